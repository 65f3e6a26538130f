//! Initial states: exponential single-photon wavepackets and relaxation
//! starts.
//!
//! Amplitudes live in the rotating frame of the bin operators, so a
//! resonant packet has a real envelope. The carrier enters only through a
//! global phase `e^{-iφ}` on the right-moving component: the right-moving
//! packet is referenced to qubit 2, the left-moving one to qubit 1.
//!
//! At the switch time the right-moving wavefront sits on qubit 2 and the
//! left-moving one on qubit 1, so both components start at lattice bin
//! `-ell` and decay as `e^{-ΓΔt (m + ell)/2}` towards later bins.

use num_complex::Complex64 as C64;

use crate::collision::{Mode, ModelParams, SiteMap};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::mps::{bell_vector, emitter, photon, MpsState, SiteRole, SiteTensor, Truncation, PHYS_DIM};

/// Minimum fraction of the exponential's norm the lattice must hold before
/// a warning is issued.
pub const MIN_RETAINED: f64 = 0.999;

/// Real envelope per lattice bin plus complex direction weights.
#[derive(Clone, Debug, PartialEq)]
pub struct BinAmplitudes {
    /// Bin index of `xi[0]`.
    pub lo: i64,
    pub xi: Vec<f64>,
    /// `(w_R, w_L)` with `|w_R|² + |w_L|² = 1`.
    pub weights: (C64, C64),
    /// Squared weight of the exponential tail cut off at the lattice end.
    pub tail_discarded: f64,
}

impl BinAmplitudes {
    pub fn at(&self, m: i64) -> f64 {
        if m < self.lo {
            return 0.0;
        }
        self.xi.get((m - self.lo) as usize).copied().unwrap_or(0.0)
    }

    pub fn bins(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.xi.iter().enumerate().map(move |(i, &x)| (self.lo + i as i64, x))
    }
}

/// `(w_R, w_L)` for a scattering mode at carrier phase `phi`.
pub fn direction_weights(mode: Mode, phi: f64) -> Result<(C64, C64)> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let carrier = C64::from_polar(1.0, -phi);
    Ok(match mode {
        Mode::ScatterSym => (carrier * h, C64::new(h, 0.0)),
        Mode::ScatterAntisym => (carrier * h, C64::new(-h, 0.0)),
        Mode::ScatterOnesideR => (carrier, C64::new(0.0, 0.0)),
        Mode::ScatterOnesideL => (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
        Mode::Relaxation => {
            return Err(Error::InvalidParam {
                key: "mode",
                reason: "relaxation has no incoming photon".into(),
            })
        }
    })
}

/// Discretized exponential envelope over the lattice of `p`.
pub fn exponential_bin_amplitudes(p: &ModelParams) -> Result<BinAmplitudes> {
    if !(p.gamma_band > 0.0 && p.gamma_band.is_finite()) {
        return Err(Error::InvalidParam {
            key: "gamma_band",
            reason: format!("must be positive, got {}", p.gamma_band),
        });
    }
    let weights = direction_weights(p.mode, p.phi)?;
    let lo = p.lowest_bin();
    let hi = p.highest_bin();
    let start = -(p.ell as i64);
    let decay = (-p.gamma_band * p.dt / 2.0).exp();
    let mut xi = Vec::with_capacity(p.n_bins);
    let mut amp = 1.0;
    for m in lo..=hi {
        if m < start {
            xi.push(0.0);
        } else {
            xi.push(amp);
            amp *= decay;
        }
    }
    let held = (hi - start + 1) as f64;
    // fraction of Σ_{j≥0} r^{2j} held in the first `held` terms
    let retained = 1.0 - (-p.gamma_band * p.dt * held).exp();
    if retained < MIN_RETAINED {
        log::warn!(
            "lattice holds only {:.4} of the wavepacket norm; renormalizing",
            retained
        );
    }
    let norm: f64 = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut xi {
        *x /= norm;
    }
    Ok(BinAmplitudes { lo, xi, weights, tail_discarded: 1.0 - retained })
}

fn vacuum_site_amps(map: &SiteMap) -> Vec<Vec<(usize, C64)>> {
    vec![Vec::new(); map.len()]
}

/// Single-excitation MPS with amplitude `xi(m) w_R` on the right-moving and
/// `xi(m) w_L` on the left-moving mode of bin `m`; qubits in `|gg⟩`.
pub fn build_input_mps(p: &ModelParams, amps: &BinAmplitudes) -> Result<MpsState> {
    if !p.mode.is_scattering() {
        return Err(Error::InvalidParam { key: "mode", reason: "expected a scattering mode".into() });
    }
    let map = SiteMap::new(p);
    let roles = map.roles();
    let mut site_amps = vacuum_site_amps(&map);
    let (wr, wl) = amps.weights;
    for (pos, role) in roles.iter().enumerate() {
        if let SiteRole::Bin(m) = role {
            let x = amps.at(*m);
            if x != 0.0 {
                if wr != C64::new(0.0, 0.0) {
                    site_amps[pos].push((photon::R, wr * x));
                }
                if wl != C64::new(0.0, 0.0) {
                    site_amps[pos].push((photon::L, wl * x));
                }
            }
        }
    }
    MpsState::single_excitation(&site_amps, &roles)
}

/// Operator-valued bond matrix of the wavepacket creation MPO: `ops[l * right
/// + r]` is the 4x4 local operator between bond indices `l` and `r`.
#[derive(Clone, Debug)]
pub struct MpoTensor {
    pub left: usize,
    pub right: usize,
    pub ops: Vec<CMat>,
}

impl MpoTensor {
    pub fn op(&self, l: usize, r: usize) -> &CMat {
        &self.ops[l * self.right + r]
    }
}

/// Creation MPO `Ξ = W[1] W[2] ... W[N]` with
///
/// ```text
/// W[1] = ( A_1  1 ),   W[s] = ( 1    0 ),   W[N] = ( 1   )
///                             ( A_s  1 )            ( A_N )
/// ```
///
/// and `A_s = xi(s) (w_R σ⁺_R + w_L σ⁺_L)`. The emitter site carries the
/// identity on both bond channels.
pub fn wavepacket_mpo(p: &ModelParams, amps: &BinAmplitudes) -> Vec<MpoTensor> {
    let map = SiteMap::new(p);
    let roles = map.roles();
    let n = roles.len();
    let id = CMat::identity(PHYS_DIM, PHYS_DIM);
    let zero = CMat::zeros(PHYS_DIM, PHYS_DIM);
    let (wr, wl) = amps.weights;
    let raise = |x: f64| {
        let mut a = CMat::zeros(PHYS_DIM, PHYS_DIM);
        a[(photon::R, photon::VAC)] += wr * x;
        a[(photon::RL, photon::L)] += wr * x;
        a[(photon::L, photon::VAC)] += wl * x;
        a[(photon::RL, photon::R)] += wl * x;
        a
    };
    roles
        .iter()
        .enumerate()
        .map(|(i, role)| {
            let a = match role {
                SiteRole::Bin(m) => raise(amps.at(*m)),
                SiteRole::Emitter => zero.clone(),
            };
            if i == 0 {
                MpoTensor { left: 1, right: 2, ops: vec![a, id.clone()] }
            } else if i == n - 1 {
                MpoTensor { left: 2, right: 1, ops: vec![id.clone(), a] }
            } else {
                MpoTensor { left: 2, right: 2, ops: vec![id.clone(), zero.clone(), a, id.clone()] }
            }
        })
        .collect()
}

/// Builds the input photon by applying the creation MPO to the vacuum and
/// compressing the result.
pub fn build_input_via_mpo(p: &ModelParams, amps: &BinAmplitudes) -> Result<MpsState> {
    if !p.mode.is_scattering() {
        return Err(Error::InvalidParam { key: "mode", reason: "expected a scattering mode".into() });
    }
    let roles = SiteMap::new(p).roles();
    let mpo = wavepacket_mpo(p, amps);
    // vacuum is |0> on photonic sites and |gg> on the emitter: local index 0
    let sites = mpo
        .iter()
        .map(|w| {
            let mut data = Vec::with_capacity(w.left * PHYS_DIM * w.right);
            for l in 0..w.left {
                for s in 0..PHYS_DIM {
                    for r in 0..w.right {
                        data.push(w.op(l, r)[(s, 0)]);
                    }
                }
            }
            SiteTensor::new(w.left, PHYS_DIM, w.right, data)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut state = MpsState::from_tensors(sites, roles)?;
    if state.norm_sqr() < 1e-24 {
        return Err(Error::ZeroNorm);
    }
    state.compress(Truncation::EXACT)?;
    Ok(state)
}

/// Which qubit state a relaxation run starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelaxationStart {
    Qubit1,
    BellPlus,
    BellMinus,
}

impl std::str::FromStr for RelaxationStart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qubit1" | "eg" => Ok(Self::Qubit1),
            "bell_plus" | "bell-plus" => Ok(Self::BellPlus),
            "bell_minus" | "bell-minus" => Ok(Self::BellMinus),
            other => Err(Error::InvalidParam {
                key: "relax_start",
                reason: format!("unknown relaxation start `{other}`"),
            }),
        }
    }
}

/// Qubits excited (per `which`), field in vacuum.
pub fn relaxation_initial_state(p: &ModelParams, which: RelaxationStart) -> Result<MpsState> {
    if p.mode != Mode::Relaxation {
        return Err(Error::InvalidParam { key: "mode", reason: "expected relaxation".into() });
    }
    let roles = SiteMap::new(p).roles();
    let vacuum = {
        let mut v = vec![C64::new(0.0, 0.0); PHYS_DIM];
        v[0] = C64::new(1.0, 0.0);
        v
    };
    let qubits = match which {
        RelaxationStart::Qubit1 => {
            let mut v = vec![C64::new(0.0, 0.0); PHYS_DIM];
            v[emitter::EG] = C64::new(1.0, 0.0);
            v
        }
        RelaxationStart::BellPlus => bell_vector(1.0).to_vec(),
        RelaxationStart::BellMinus => bell_vector(-1.0).to_vec(),
    };
    let locals: Vec<Vec<C64>> = roles
        .iter()
        .map(|r| if r.is_emitter() { qubits.clone() } else { vacuum.clone() })
        .collect();
    MpsState::new_product_state(&locals, &roles)
}

/// Initial state for `p.mode`, relaxation starting from `|eg⟩`.
pub fn initial_state(p: &ModelParams) -> Result<MpsState> {
    initial_state_with(p, RelaxationStart::Qubit1)
}

pub fn initial_state_with(p: &ModelParams, start: RelaxationStart) -> Result<MpsState> {
    if p.mode.is_scattering() {
        build_input_mps(p, &exponential_bin_amplitudes(p)?)
    } else {
        relaxation_initial_state(p, start)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::Detuning;

    fn small(mode: Mode) -> ModelParams {
        ModelParams { ell: 3, n_bins: 40, steps: 30, gamma_band: 2.0, dt: 0.1, mode, ..Default::default() }
    }

    #[test]
    fn envelope_is_normalized_and_geometric() {
        let p = ModelParams::default();
        let a = exponential_bin_amplitudes(&p).unwrap();
        let total: f64 = a.xi.iter().map(|x| x * x).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let ratio = a.at(-99) / a.at(-100);
        assert!((ratio - (-0.0125f64).exp()).abs() < 1e-14);
        assert!((ratio - 0.98758).abs() < 1e-5);
        let lead = a.bins().max_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
        assert_eq!(lead.0, -100);
    }

    #[test]
    fn narrow_packet_is_delta_like() {
        let p = ModelParams { gamma_band: 1e4, ..ModelParams::default() };
        let a = exponential_bin_amplitudes(&p).unwrap();
        assert!((a.at(-100) - 1.0).abs() < 1e-12);
        assert!(a.at(-99) < 1e-80);
    }

    #[test]
    fn detuned_lattice_pads_with_vacuum() {
        let p = ModelParams { delta_omega: Detuning::Finite(2.0), ..small(Mode::ScatterSym) };
        let a = exponential_bin_amplitudes(&p).unwrap();
        assert_eq!(a.lo, -6);
        assert_eq!(a.at(-4), 0.0);
        assert!(a.at(-3) > 0.0);
    }

    #[test]
    fn non_positive_bandwidth_is_rejected() {
        let p = ModelParams { gamma_band: 0.0, ..small(Mode::ScatterSym) };
        assert!(exponential_bin_amplitudes(&p).is_err());
    }

    #[test]
    fn one_sided_input_has_no_left_photons() {
        let p = small(Mode::ScatterOnesideR);
        let s = build_input_mps(&p, &exponential_bin_amplitudes(&p).unwrap()).unwrap();
        let occ = s.local_occupations();
        let left: f64 = occ.bins.iter().map(|b| b.2).sum();
        assert!(left.abs() < 1e-14);
        assert!((occ.total_excitation() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sym_and_antisym_are_orthogonal() {
        let ps = small(Mode::ScatterSym);
        let pa = small(Mode::ScatterAntisym);
        let s = build_input_mps(&ps, &exponential_bin_amplitudes(&ps).unwrap()).unwrap();
        let a = build_input_mps(&pa, &exponential_bin_amplitudes(&pa).unwrap()).unwrap();
        assert!(s.inner_product(&a).unwrap().norm() < 1e-12);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(s.max_bond() <= 2);
    }

    #[test]
    fn mpo_route_matches_direct_construction() {
        for mode in [Mode::ScatterSym, Mode::ScatterOnesideL] {
            let p = small(mode);
            let amps = exponential_bin_amplitudes(&p).unwrap();
            let direct = build_input_mps(&p, &amps).unwrap();
            let via = build_input_via_mpo(&p, &amps).unwrap();
            let f = direct.inner_product(&via).unwrap().norm_sqr();
            assert!(f >= 1.0 - 1e-10, "{f}");
        }
    }

    #[test]
    fn mpo_with_zero_amplitudes_is_rejected() {
        let p = small(Mode::ScatterSym);
        let mut amps = exponential_bin_amplitudes(&p).unwrap();
        amps.xi.iter_mut().for_each(|x| *x = 0.0);
        assert!(matches!(build_input_via_mpo(&p, &amps), Err(Error::ZeroNorm)));
    }

    #[test]
    fn relaxation_starts() {
        let p = small(Mode::Relaxation);
        let s = relaxation_initial_state(&p, RelaxationStart::Qubit1).unwrap();
        let occ = s.local_occupations();
        assert_eq!((occ.p_e1, occ.p_e2), (1.0, 0.0));
        let b = relaxation_initial_state(&p, RelaxationStart::BellPlus).unwrap();
        assert!((b.qubit_rdm().unwrap().bell_plus() - 1.0).abs() < 1e-14);
        assert!("sideways".parse::<RelaxationStart>().is_err());
        assert!(relaxation_initial_state(&small(Mode::ScatterSym), RelaxationStart::Qubit1).is_err());
        assert!(build_input_mps(&p, &exponential_bin_amplitudes(&small(Mode::ScatterSym)).unwrap()).is_err());
    }
}
