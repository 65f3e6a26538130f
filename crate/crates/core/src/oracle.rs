//! Exact evolution of the collision schedule in the single-excitation sector.
//!
//! The step generator conserves the excitation number, so a state with one
//! excitation stays in the span of `{e1, e2} ∪ {(m, R)} ∪ {(m, L')}`. Each
//! step mixes only the six amplitudes of the two qubits and of lattice bins
//! `n` and `n - ell`; everything else is untouched. This makes the oracle
//! O(1) per step and exact up to rounding.

use nalgebra::DVector;
use num_complex::Complex64 as C64;

use crate::collision::{
    Couplings, Detuning, ModelParams, ObservableRecord, SiteMap, StepGate,
};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMat};
use crate::mps::{emitter, photon, MpsState, SiteRole};
use crate::wavepacket::{exponential_bin_amplitudes, RelaxationStart};

/// Amplitudes of a one-excitation state.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactState {
    /// Bin index of `r[0]` and `l[0]`.
    pub lo: i64,
    /// `(qubit 1 excited, qubit 2 excited)`.
    pub qubits: [C64; 2],
    pub r: Vec<C64>,
    /// Left-moving amplitudes in the relabeled layout: `l[m - lo]` is the
    /// mode sharing a lattice site with `r[m - lo]`.
    pub l: Vec<C64>,
}

impl ExactState {
    pub fn vacuum(p: &ModelParams) -> Self {
        let n = p.n_bins;
        Self {
            lo: p.lowest_bin(),
            qubits: [C64::new(0.0, 0.0); 2],
            r: vec![C64::new(0.0, 0.0); n],
            l: vec![C64::new(0.0, 0.0); n],
        }
    }

    /// Exponential scattering input for `p.mode`.
    pub fn scattering(p: &ModelParams) -> Result<Self> {
        let amps = exponential_bin_amplitudes(p)?;
        let mut s = Self::vacuum(p);
        let (wr, wl) = amps.weights;
        for (m, x) in amps.bins() {
            let i = (m - s.lo) as usize;
            s.r[i] = wr * x;
            s.l[i] = wl * x;
        }
        Ok(s)
    }

    pub fn relaxation(p: &ModelParams, which: RelaxationStart) -> Self {
        let mut s = Self::vacuum(p);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        s.qubits = match which {
            RelaxationStart::Qubit1 => [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            RelaxationStart::BellPlus => [C64::new(h, 0.0), C64::new(h, 0.0)],
            RelaxationStart::BellMinus => [C64::new(h, 0.0), C64::new(-h, 0.0)],
        };
        s
    }

    pub fn initial(p: &ModelParams, start: RelaxationStart) -> Result<Self> {
        if p.mode.is_scattering() {
            Self::scattering(p)
        } else {
            Ok(Self::relaxation(p, start))
        }
    }

    /// Reads the one-excitation amplitudes off an MPS laid out per `roles`.
    pub fn from_mps(p: &ModelParams, mps: &MpsState) -> Result<Self> {
        let mut s = Self::vacuum(p);
        let n = mps.len();
        let sites = mps.sites();
        // vacuum-channel products from the left and from the right
        let mut left = vec![CMat::from_element(1, 1, C64::new(1.0, 0.0))];
        for t in sites {
            let a0 = CMat::from_fn(t.left_dim(), t.right_dim(), |l, r| t.get(l, 0, r));
            left.push(left.last().unwrap() * a0);
        }
        let mut right = vec![CMat::from_element(1, 1, C64::new(1.0, 0.0)); n + 1];
        for i in (0..n).rev() {
            let t = &sites[i];
            let a0 = CMat::from_fn(t.left_dim(), t.right_dim(), |l, r| t.get(l, 0, r));
            right[i] = a0 * &right[i + 1];
        }
        for (i, role) in mps.roles().iter().enumerate() {
            let t = &sites[i];
            let amp = |local: usize| {
                let a = CMat::from_fn(t.left_dim(), t.right_dim(), |l, r| t.get(l, local, r));
                (&left[i] * a * &right[i + 1])[(0, 0)]
            };
            match role {
                SiteRole::Emitter => {
                    s.qubits = [amp(emitter::EG), amp(emitter::GE)];
                }
                SiteRole::Bin(m) => {
                    let idx = m - s.lo;
                    if idx < 0 || idx as usize >= s.r.len() {
                        return Err(Error::ShapeMismatch(format!("bin {m} outside the lattice")));
                    }
                    s.r[idx as usize] = amp(photon::R);
                    s.l[idx as usize] = amp(photon::L);
                }
            }
        }
        Ok(s)
    }

    /// Bond-dimension-2 MPS of this state laid out per `roles`.
    pub fn to_mps(&self, roles: &[SiteRole]) -> Result<MpsState> {
        let amps: Vec<Vec<(usize, C64)>> = roles
            .iter()
            .map(|role| match role {
                SiteRole::Emitter => vec![(emitter::EG, self.qubits[0]), (emitter::GE, self.qubits[1])],
                SiteRole::Bin(m) => {
                    let i = (m - self.lo) as usize;
                    vec![(photon::R, self.r[i]), (photon::L, self.l[i])]
                }
            })
            .collect();
        MpsState::single_excitation(&amps, roles)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.qubits.iter().chain(&self.r).chain(&self.l).map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &ExactState) -> C64 {
        self.qubits
            .iter()
            .chain(&self.r)
            .chain(&self.l)
            .zip(other.qubits.iter().chain(&other.r).chain(&other.l))
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn index(&self, m: i64) -> Option<usize> {
        let i = m - self.lo;
        (i >= 0 && (i as usize) < self.r.len()).then_some(i as usize)
    }

    pub fn photons_in(&self, lo: i64, hi: i64) -> f64 {
        (lo..=hi)
            .filter_map(|m| self.index(m))
            .map(|i| self.r[i].norm_sqr() + self.l[i].norm_sqr())
            .sum()
    }

    /// `(n_R, n_L)` of lattice bin `m`.
    pub fn occupation(&self, m: i64) -> (f64, f64) {
        self.index(m)
            .map(|i| (self.r[i].norm_sqr(), self.l[i].norm_sqr()))
            .unwrap_or((0.0, 0.0))
    }

    pub fn record(&self, p: &ModelParams, k: i64) -> ObservableRecord {
        let [c1, c2] = self.qubits;
        let norm = self.norm_sqr();
        ObservableRecord::assemble(
            p,
            k,
            norm,
            norm,
            c1.norm_sqr(),
            c2.norm_sqr(),
            (c1 + c2).norm_sqr() / 2.0,
            (c1 - c2).norm_sqr() / 2.0,
            self.photons_in(k - p.ell as i64, k - 1),
        )
    }
}

/// Which construction supplies the 6x6 step block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockSource {
    /// Restriction of the 64x64 step gate used by the MPS engine.
    SharedGate,
    /// Independent 6x6 generator written from the coupling coefficients,
    /// exponentiated by eigendecomposition.
    HandWritten,
}

/// 6x6 single-excitation generator in the basis
/// `{e1, e2, (n,R), (n,L'), (n-ell,R), (n-ell,L')}`.
pub fn hand_written_generator(p: &ModelParams, detuned: bool, c: Couplings) -> CMat {
    let g = (p.gamma * p.dt / 2.0).sqrt();
    let (g1, g2) = (g * c.qubit1, g * c.qubit2);
    let mut m = CMat::zeros(6, 6);
    let mut couple = |row: usize, col: usize, v: C64| {
        m[(row, col)] += v;
        m[(col, row)] += v.conj();
    };
    // qubit 1 emits into R of bin n and L' of bin n - ell
    couple(2, 0, C64::new(g1, 0.0));
    couple(5, 0, C64::new(g1, 0.0));
    // qubit 2 emits into R of bin n - ell (phase e^{-iφ}) and L' of bin n (e^{iφ})
    couple(4, 1, C64::from_polar(g2, -p.phi));
    couple(3, 1, C64::from_polar(g2, p.phi));
    if detuned {
        if let Detuning::Finite(dw) = p.delta_omega {
            m[(0, 0)] += dw * p.dt;
            m[(1, 1)] += dw * p.dt;
        }
    }
    m
}

fn exp_minus_i_hermitian(h: &CMat) -> CMat {
    let (vals, vecs) = hermitian_eigen(h).expect("a 6x6 Hermitian eigenproblem converges");
    let phases = CMat::from_diagonal(&DVector::from_iterator(6, vals.iter().map(|e| C64::new(0.0, -e).exp())));
    &vecs * phases * vecs.adjoint()
}

/// Step unitary restricted to the six coupled amplitudes of step `n`.
#[derive(Clone, Debug)]
pub struct SectorStep {
    /// Lattice bins of the current and delayed sites.
    pub current: i64,
    pub delayed: i64,
    pub block: CMat,
}

impl SectorStep {
    pub fn apply(&self, s: &mut ExactState) -> Result<()> {
        let a = s.index(self.current).ok_or_else(|| Error::Schedule(format!("bin {} outside lattice", self.current)))?;
        let b = s.index(self.delayed).ok_or_else(|| Error::Schedule(format!("bin {} outside lattice", self.delayed)))?;
        let v = [s.qubits[0], s.qubits[1], s.r[a], s.l[a], s.r[b], s.l[b]];
        let mut out = [C64::new(0.0, 0.0); 6];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, x) in v.iter().enumerate() {
                *o += self.block[(i, j)] * x;
            }
        }
        s.qubits = [out[0], out[1]];
        s.r[a] = out[2];
        s.l[a] = out[3];
        s.r[b] = out[4];
        s.l[b] = out[5];
        Ok(())
    }

    /// Dense matrix on the whole one-excitation space (for checks on small
    /// lattices). Basis order: `e1, e2, R(lo..), L'(lo..)`.
    pub fn to_dense(&self, p: &ModelParams) -> CMat {
        let nb = p.n_bins;
        let lo = p.lowest_bin();
        let dim = 2 + 2 * nb;
        let a = (self.current - lo) as usize;
        let b = (self.delayed - lo) as usize;
        let idx = [0, 1, 2 + a, 2 + nb + a, 2 + b, 2 + nb + b];
        let mut u = CMat::identity(dim, dim);
        for i in 0..6 {
            for j in 0..6 {
                u[(idx[i], idx[j])] = self.block[(i, j)];
            }
        }
        u
    }
}

/// Sector block of step `n`. Errors if `n` or `n - ell` leaves the lattice.
pub fn sector_step_matrix(p: &ModelParams, n: i64, detuned: bool) -> Result<SectorStep> {
    let gate = StepGate::build(p, detuned)?;
    sector_step_from_gate(p, n, &gate)
}

fn sector_step_from_gate(p: &ModelParams, n: i64, gate: &StepGate) -> Result<SectorStep> {
    let delayed = n - p.ell as i64;
    if delayed < p.lowest_bin() || n > p.highest_bin() {
        return Err(Error::Schedule(format!("step {n} needs bins {delayed} and {n} on the lattice")));
    }
    Ok(SectorStep { current: n, delayed, block: gate.single_excitation_block() })
}

/// Exact trajectory with the same records as the MPS engine.
#[derive(Clone, Debug)]
pub struct ExactRun {
    pub records: Vec<ObservableRecord>,
    pub final_state: ExactState,
}

impl ExactRun {
    pub fn last(&self) -> &ObservableRecord {
        self.records.last().expect("initial record")
    }
}

#[derive(Clone, Debug)]
pub struct ExactEngine {
    params: ModelParams,
    undetuned: CMat,
    detuned: Option<CMat>,
}

impl ExactEngine {
    pub fn new(p: &ModelParams) -> Result<Self> {
        Self::with_source(p, BlockSource::SharedGate, Couplings::default())
    }

    pub fn with_source(p: &ModelParams, source: BlockSource, c: Couplings) -> Result<Self> {
        p.validate()?;
        let block = |detuned: bool| -> Result<CMat> {
            Ok(match source {
                BlockSource::SharedGate => StepGate::build_with(p, detuned, c)?.single_excitation_block(),
                BlockSource::HandWritten => exp_minus_i_hermitian(&hand_written_generator(p, detuned, c)),
            })
        };
        let undetuned = block(false)?;
        let detuned = match p.delta_omega {
            Detuning::IdealSwitch => None,
            Detuning::Finite(_) => Some(block(true)?),
        };
        Ok(Self { params: p.clone(), undetuned, detuned })
    }

    pub fn step(&self, n: i64) -> SectorStep {
        let block = match (&self.detuned, n < 0) {
            (Some(d), true) => d.clone(),
            _ => self.undetuned.clone(),
        };
        SectorStep { current: n, delayed: n - self.params.ell as i64, block }
    }

    pub fn run(&self, initial: ExactState) -> Result<ExactRun> {
        self.run_observed(initial, |_, _| {})
    }

    pub fn run_observed<F>(&self, initial: ExactState, mut observe: F) -> Result<ExactRun>
    where
        F: FnMut(i64, &ExactState),
    {
        let p = &self.params;
        if initial.lo != p.lowest_bin() || initial.r.len() != p.n_bins {
            return Err(Error::ShapeMismatch("initial state does not match the lattice".into()));
        }
        let first = p.first_step();
        let mut s = initial;
        let mut records = vec![s.record(p, first)];
        observe(first, &s);
        for (done, n) in (first..first + p.steps as i64).enumerate() {
            self.step(n).apply(&mut s)?;
            let k = n + 1;
            if (done + 1) % p.record_every == 0 || done + 1 == p.steps {
                records.push(s.record(p, k));
            }
            observe(k, &s);
        }
        Ok(ExactRun { records, final_state: s })
    }
}

/// Evolves `initial` exactly through the schedule of `p`.
pub fn evolve_exact(p: &ModelParams, initial: ExactState) -> Result<ExactRun> {
    ExactEngine::new(p)?.run(initial)
}

/// `|⟨exact|mps⟩|²`, embedding the exact state in the MPS's site order.
pub fn fidelity_against_mps(exact: &ExactState, mps: &MpsState) -> Result<f64> {
    let embedded = exact.to_mps(mps.roles())?;
    Ok(embedded.inner_product(mps)?.norm_sqr())
}

/// Lattice layout of the exact state at time index `k`.
pub fn roles_at(p: &ModelParams, k: i64) -> Vec<SiteRole> {
    SiteMap::at(p, k).roles()
}
