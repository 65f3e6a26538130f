//! Coarse-grained collision dynamics of two qubits with delayed coupling.
//!
//! At step `n` qubit 1 meets right-moving bin `n` and left-moving bin `n`,
//! while qubit 2 meets right-moving bin `n - ell` and left-moving bin
//! `n + ell`. Relabeling the left-moving bins as `L'_m = L_{m + ell}` puts
//! both partners of step `n` on two lattice sites only: site `n` holds
//! `(R_n, L'_n)` and site `n - ell` holds `(R_{n-ell}, L'_{n-ell})`. In that
//! layout
//!
//! ```text
//! O1 = g σ1 (R†_n + L'†_{n-ell}) + h.c.
//! O2 = g σ2 (e^{-iφ} R†_{n-ell} + e^{iφ} L'†_n) + h.c.,   g = sqrt(γΔt/2)
//! ```
//!
//! and one step is `exp(-i (O1 + O2 + ΔωΔt (n1 + n2)))`, the detuning term
//! being present only before the switch time.
//!
//! On the lattice the emitter site sits just left of the next bin to
//! collide. A step swaps the delayed site next to the emitter, applies the
//! three-site gate, moves the emitter one site right and swaps the delayed
//! site back.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::analytics;
use crate::error::{Error, Result};
use crate::linalg::{factor_permutation, hermiticity_defect, unitary_from_generator, CMat};
use crate::mps::{emitter, photon, LocalGate, MpsState, SiteRole, Sweep, Truncation, PHYS_DIM};

/// Incoming photon symmetry, or relaxation from an excited qubit state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ScatterSym,
    ScatterAntisym,
    ScatterOnesideR,
    ScatterOnesideL,
    Relaxation,
}

impl Mode {
    pub fn is_scattering(self) -> bool {
        !matches!(self, Mode::Relaxation)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::ScatterSym => "scatter-sym",
            Mode::ScatterAntisym => "scatter-antisym",
            Mode::ScatterOnesideR => "scatter-oneside-R",
            Mode::ScatterOnesideL => "scatter-oneside-L",
            Mode::Relaxation => "relaxation",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "scatter-sym" => Mode::ScatterSym,
            "scatter-antisym" => Mode::ScatterAntisym,
            "scatter-oneside-R" | "scatter-oneside-r" => Mode::ScatterOnesideR,
            "scatter-oneside-L" | "scatter-oneside-l" => Mode::ScatterOnesideL,
            "relaxation" => Mode::Relaxation,
            other => {
                return Err(Error::InvalidParam { key: "mode", reason: format!("unknown mode `{other}`") })
            }
        })
    }
}

/// Qubit detuning before the switch time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Detuning {
    /// The coupling itself is off before the switch; nothing is simulated
    /// before step 0.
    IdealSwitch,
    /// Detuning `Δω/γ` applied during the `ell` steps preceding the switch.
    Finite(f64),
}

impl Detuning {
    pub fn is_ideal(self) -> bool {
        matches!(self, Detuning::IdealSwitch)
    }
}

impl std::fmt::Display for Detuning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Detuning::IdealSwitch => write!(f, "ideal-switch"),
            Detuning::Finite(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for Detuning {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Detuning::IdealSwitch => s.serialize_str("ideal-switch"),
            Detuning::Finite(x) => s.serialize_f64(*x),
        }
    }
}

impl std::str::FromStr for Detuning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "ideal-switch" {
            return Ok(Detuning::IdealSwitch);
        }
        s.parse::<f64>().map(Detuning::Finite).map_err(|_| Error::InvalidParam {
            key: "delta_omega",
            reason: format!("expected a number or `ideal-switch`, got `{s}`"),
        })
    }
}

/// All physical and numerical parameters of one run.
///
/// Rates and frequencies are in units of a reference emission rate; `dt` is
/// the coarse-graining step in the same units, so `gamma = 1` gives the
/// usual `γΔt = dt`. Setting `gamma = 0` switches the coupling off.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub gamma: f64,
    pub dt: f64,
    pub ell: usize,
    pub phi: f64,
    pub gamma_band: f64,
    pub delta_omega: Detuning,
    pub mode: Mode,
    pub n_bins: usize,
    pub steps: usize,
    pub trunc_eps: f64,
    pub chi_max: usize,
    pub record_every: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            dt: 0.04,
            ell: 100,
            phi: PI,
            gamma_band: 0.625,
            delta_omega: Detuning::IdealSwitch,
            mode: Mode::ScatterSym,
            n_bins: 1000,
            steps: 900,
            trunc_eps: 1e-4,
            chi_max: 64,
            record_every: 1,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |key, reason: String| Err(Error::InvalidParam { key, reason });
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", format!("must be positive, got {}", self.dt));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma", format!("must be non-negative, got {}", self.gamma));
        }
        if self.ell == 0 {
            return bad("ell", "must be at least 1 (co-located qubits are not supported)".into());
        }
        if !self.phi.is_finite() {
            return bad("phi", "must be finite".into());
        }
        if self.n_bins <= self.ell {
            return bad("n_bins", format!("must exceed ell = {}", self.ell));
        }
        if self.steps == 0 || self.steps > self.n_bins - self.ell {
            return bad("steps", format!("must lie in 1..={}", self.n_bins - self.ell));
        }
        if self.mode.is_scattering() && !(self.gamma_band > 0.0 && self.gamma_band.is_finite()) {
            return bad("gamma_band", format!("must be positive, got {}", self.gamma_band));
        }
        if let Detuning::Finite(x) = self.delta_omega {
            if !x.is_finite() {
                return bad("delta_omega", "must be finite".into());
            }
        }
        if !(self.trunc_eps >= 0.0) {
            return bad("trunc_eps", "must be non-negative".into());
        }
        if self.chi_max == 0 {
            return bad("chi_max", "must be at least 1".into());
        }
        if self.record_every == 0 {
            return bad("record_every", "must be at least 1".into());
        }
        Ok(())
    }

    pub fn tau(&self) -> f64 {
        self.ell as f64 * self.dt
    }

    pub fn gamma_tau(&self) -> f64 {
        self.gamma * self.tau()
    }

    /// Index of the first simulated step: `0` under an ideal switch, `-ell`
    /// under finite detuning.
    pub fn first_step(&self) -> i64 {
        match self.delta_omega {
            Detuning::IdealSwitch => 0,
            Detuning::Finite(_) => -(self.ell as i64),
        }
    }

    /// Lowest bin index on the lattice.
    pub fn lowest_bin(&self) -> i64 {
        self.first_step() - self.ell as i64
    }

    pub fn highest_bin(&self) -> i64 {
        self.lowest_bin() + self.n_bins as i64 - 1
    }

    pub fn truncation(&self) -> Truncation {
        Truncation::new(self.trunc_eps, self.chi_max)
    }

    /// `+1` when the bound state at the nearest resonance `φ = nπ` carries
    /// `ψ+`, `-1` for `ψ-`.
    pub fn bic_sign(&self) -> f64 {
        bic_sign(self.phi)
    }
}

/// `(-1)^(n+1)` for the resonance `n = round(φ/π)`.
pub fn bic_sign(phi: f64) -> f64 {
    let n = (phi / PI).round() as i64;
    if n.rem_euclid(2) == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Coupling multipliers for the two qubits. Both are 1 in the physical
/// model; tests use them to decouple one qubit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Couplings {
    pub qubit1: f64,
    pub qubit2: f64,
}

impl Default for Couplings {
    fn default() -> Self {
        Self { qubit1: 1.0, qubit2: 1.0 }
    }
}

// Factor order of the three-site space used by the generator: emitter,
// current site (n), delayed site (n - ell).
const F_EMITTER: usize = 0;
const F_CURRENT: usize = 1;
const F_DELAYED: usize = 2;

fn gen_index(e: usize, a: usize, b: usize) -> usize {
    (e * PHYS_DIM + a) * PHYS_DIM + b
}

/// Hard-core creation operator on one local mode, as a 4x4 local matrix.
fn creation(mode: usize) -> CMat {
    let one = C64::new(1.0, 0.0);
    let mut m = CMat::zeros(PHYS_DIM, PHYS_DIM);
    match mode {
        photon::R => {
            m[(photon::R, photon::VAC)] = one;
            m[(photon::RL, photon::L)] = one;
        }
        photon::L => {
            m[(photon::L, photon::VAC)] = one;
            m[(photon::RL, photon::R)] = one;
        }
        _ => unreachable!("creation on unknown mode"),
    }
    m
}

/// Lowering operator of qubit 1 (`j = 1`) or qubit 2 on the emitter site.
fn lowering(j: usize) -> CMat {
    let one = C64::new(1.0, 0.0);
    let mut m = CMat::zeros(PHYS_DIM, PHYS_DIM);
    if j == 1 {
        m[(emitter::GG, emitter::EG)] = one;
        m[(emitter::GE, emitter::EE)] = one;
    } else {
        m[(emitter::GG, emitter::GE)] = one;
        m[(emitter::EG, emitter::EE)] = one;
    }
    m
}

fn embed(op_e: &CMat, op_a: &CMat, op_b: &CMat) -> CMat {
    crate::linalg::kron_all(&[op_e.clone(), op_a.clone(), op_b.clone()])
}

/// Excitation number on the three-site space.
pub fn excitation_operator() -> CMat {
    let dim = PHYS_DIM.pow(3);
    let n_local = [0.0, 1.0, 1.0, 2.0];
    CMat::from_fn(dim, dim, |i, j| {
        if i != j {
            return C64::new(0.0, 0.0);
        }
        let (e, a, b) = (i / 16, (i / 4) % 4, i % 4);
        C64::new(n_local[e] + n_local[a] + n_local[b], 0.0)
    })
}

/// Hermitian step generator `M` over (emitter ⊗ site n ⊗ site n-ell).
pub fn build_step_generator(p: &ModelParams, detuned: bool) -> CMat {
    build_step_generator_with(p, detuned, Couplings::default())
}

pub fn build_step_generator_with(p: &ModelParams, detuned: bool, c: Couplings) -> CMat {
    let dim = PHYS_DIM.pow(3);
    let id = CMat::identity(PHYS_DIM, PHYS_DIM);
    let g = (p.gamma * p.dt / 2.0).sqrt();
    let phase = C64::from_polar(1.0, p.phi);

    let s1 = lowering(1);
    let s2 = lowering(2);
    let r_dag = creation(photon::R);
    let l_dag = creation(photon::L);

    // σ1 (R†_n + L'†_{n-ell})
    let a1 = embed(&s1, &r_dag, &id) + embed(&s1, &id, &l_dag);
    // σ2 (e^{-iφ} R†_{n-ell} + e^{iφ} L'†_n)
    let a2 = embed(&s2, &id, &r_dag) * phase.conj() + embed(&s2, &l_dag, &id) * phase;

    let mut m = CMat::zeros(dim, dim);
    if g != 0.0 {
        let o1 = &a1 * C64::new(g * c.qubit1, 0.0);
        let o2 = &a2 * C64::new(g * c.qubit2, 0.0);
        m += &o1 + o1.adjoint() + &o2 + o2.adjoint();
    }
    if detuned {
        if let Detuning::Finite(dw) = p.delta_omega {
            let mut n_q = CMat::zeros(PHYS_DIM, PHYS_DIM);
            n_q[(emitter::GE, emitter::GE)] = C64::new(1.0, 0.0);
            n_q[(emitter::EG, emitter::EG)] = C64::new(1.0, 0.0);
            n_q[(emitter::EE, emitter::EE)] = C64::new(2.0, 0.0);
            m += embed(&n_q, &id, &id) * C64::new(dw * p.dt, 0.0);
        }
    }
    debug_assert!(hermiticity_defect(&m) < 1e-14);
    m
}

/// Three-site step unitary, detuned or undetuned.
#[derive(Clone, Debug)]
pub struct StepGate {
    /// `exp(-iM)` in the generator factor order (emitter, site n, site n-ell).
    pub matrix: CMat,
    pub detuned: bool,
    lattice: LocalGate,
}

impl StepGate {
    pub fn build(p: &ModelParams, detuned: bool) -> Result<Self> {
        Self::from_generator(&build_step_generator(p, detuned), detuned)
    }

    pub fn build_with(p: &ModelParams, detuned: bool, c: Couplings) -> Result<Self> {
        Self::from_generator(&build_step_generator_with(p, detuned, c), detuned)
    }

    pub fn from_generator(m: &CMat, detuned: bool) -> Result<Self> {
        Self::from_unitary(unitary_from_generator(m), detuned)
    }

    pub fn identity() -> Self {
        Self::from_unitary(CMat::identity(64, 64), false).expect("identity is unitary")
    }

    fn from_unitary(matrix: CMat, detuned: bool) -> Result<Self> {
        // lattice order during the gate: delayed, emitter, current
        let perm = factor_permutation(
            PHYS_DIM,
            &[F_EMITTER, F_CURRENT, F_DELAYED],
            &[F_DELAYED, F_EMITTER, F_CURRENT],
        );
        let lattice = LocalGate::new(&perm * &matrix * perm.adjoint(), 3)?;
        Ok(Self { matrix, detuned, lattice })
    }

    /// The gate reordered to act on (site n-ell, emitter, site n).
    pub fn lattice_gate(&self) -> &LocalGate {
        &self.lattice
    }

    pub fn unitarity_defect(&self) -> f64 {
        crate::linalg::unitarity_defect(&self.matrix)
    }

    /// Single-excitation block in the basis
    /// `{e1, e2, (n,R), (n,L'), (n-ell,R), (n-ell,L')}`.
    pub fn single_excitation_block(&self) -> CMat {
        let idx = single_excitation_indices();
        CMat::from_fn(6, 6, |i, j| self.matrix[(idx[i], idx[j])])
    }
}

/// Generator-space indices of the six single-excitation basis states.
pub fn single_excitation_indices() -> [usize; 6] {
    [
        gen_index(emitter::EG, photon::VAC, photon::VAC),
        gen_index(emitter::GE, photon::VAC, photon::VAC),
        gen_index(emitter::GG, photon::R, photon::VAC),
        gen_index(emitter::GG, photon::L, photon::VAC),
        gen_index(emitter::GG, photon::VAC, photon::R),
        gen_index(emitter::GG, photon::VAC, photon::L),
    ]
}

/// Lattice bookkeeping: which bin sits where and where the emitter is.
///
/// Bins `lo..=hi` are laid out in ascending order with the emitter inserted
/// immediately before bin `next`, the next bin to meet qubit 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SiteMap {
    pub lo: i64,
    pub hi: i64,
    /// Relabeling offset between left-moving bins and lattice sites.
    pub offset: usize,
    pub next: i64,
}

impl SiteMap {
    pub fn new(p: &ModelParams) -> Self {
        Self { lo: p.lowest_bin(), hi: p.highest_bin(), offset: p.ell, next: p.first_step() }
    }

    pub fn at(p: &ModelParams, next: i64) -> Self {
        Self { next, ..Self::new(p) }
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 2) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn emitter_position(&self) -> usize {
        (self.next - self.lo) as usize
    }

    pub fn position(&self, bin: i64) -> Option<usize> {
        if bin < self.lo || bin > self.hi {
            return None;
        }
        let base = (bin - self.lo) as usize;
        Some(if bin < self.next { base } else { base + 1 })
    }

    pub fn roles(&self) -> Vec<SiteRole> {
        let mut roles: Vec<SiteRole> = (self.lo..self.next).map(SiteRole::Bin).collect();
        roles.push(SiteRole::Emitter);
        roles.extend((self.next..=self.hi).map(SiteRole::Bin));
        roles
    }

    /// Original left-moving bin index stored at lattice bin `m`.
    pub fn left_bin(&self, m: i64) -> i64 {
        m + self.offset as i64
    }
}

/// Advances the state by step `n`: swaps site `n - ell` next to the emitter,
/// applies the step gate, moves the emitter past site `n`, and swaps site
/// `n - ell` back. Returns the discarded weight of the step.
pub fn schedule_step(
    state: &mut MpsState,
    map: &mut SiteMap,
    gate: &StepGate,
    n: i64,
    trunc: Truncation,
) -> Result<f64> {
    if map.next != n {
        return Err(Error::Schedule(format!("emitter is before bin {}, not {n}", map.next)));
    }
    if n > map.hi {
        return Err(Error::Schedule(format!("emitter reached the lattice boundary at step {n}")));
    }
    let delayed = n - map.offset as i64;
    let p = map
        .position(delayed)
        .ok_or_else(|| Error::Schedule(format!("delayed bin {delayed} is outside the lattice")))?;
    let e = map.emitter_position();
    debug_assert_eq!(state.roles()[e], SiteRole::Emitter);

    let mut discarded = 0.0;
    for q in p..e - 1 {
        discarded += state.swap_sites_sweep(q, trunc, Sweep::Right)?;
    }
    discarded += state.apply_gate_sweep(gate.lattice_gate(), e - 1, trunc, Sweep::Left)?;
    // emitter past site n: (delayed, E, n) -> (delayed, n, E)
    discarded += state.swap_sites_sweep(e, trunc, Sweep::Left)?;
    for q in (p..e - 1).rev() {
        discarded += state.swap_sites_sweep(q, trunc, Sweep::Left)?;
    }
    map.next += 1;
    Ok(discarded)
}

/// Observables recorded along a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableRecord {
    /// Time index `k`: the state after steps up to `k - 1`.
    pub step: i64,
    pub time: f64,
    pub norm: f64,
    pub excitation: f64,
    pub p_e1: f64,
    pub p_e2: f64,
    pub bell_plus: f64,
    pub bell_minus: f64,
    /// Photons on the `ell` sites between the qubits, `[k - ell, k - 1]`.
    pub trapped_n: f64,
    pub p_bic_inferred: f64,
}

impl ObservableRecord {
    pub fn from_mps(p: &ModelParams, k: i64, state: &MpsState) -> Result<Self> {
        let occ = state.local_occupations();
        let rho = state.qubit_rdm()?;
        let (bp, bm) = (rho.bell_plus(), rho.bell_minus());
        Ok(Self::assemble(
            p,
            k,
            state.norm_sqr(),
            occ.total_excitation(),
            occ.p_e1,
            occ.p_e2,
            bp,
            bm,
            occ.photons_in(k - p.ell as i64, k - 1),
        ))
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        p: &ModelParams,
        k: i64,
        norm: f64,
        excitation: f64,
        p_e1: f64,
        p_e2: f64,
        bell_plus: f64,
        bell_minus: f64,
        trapped_n: f64,
    ) -> Self {
        let bell = if p.bic_sign() > 0.0 { bell_plus } else { bell_minus };
        Self {
            step: k,
            time: k as f64 * p.dt,
            norm,
            excitation,
            p_e1,
            p_e2,
            bell_plus,
            bell_minus,
            trapped_n,
            p_bic_inferred: analytics::infer_p_bic_from_bell(bell.clamp(0.0, 1.0), p.gamma, p.tau()),
        }
    }

    /// Bell population of the bound-state parity.
    pub fn bell_bic(&self, p: &ModelParams) -> f64 {
        if p.bic_sign() > 0.0 {
            self.bell_plus
        } else {
            self.bell_minus
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<ObservableRecord>,
    pub final_state: MpsState,
    pub final_map: SiteMap,
    pub max_bond: usize,
}

impl RunOutput {
    pub fn last(&self) -> &ObservableRecord {
        self.records.last().expect("a run records at least its initial state")
    }
}

/// Runs the collision schedule for one parameter set.
#[derive(Clone, Debug)]
pub struct CollisionEngine {
    params: ModelParams,
    undetuned: StepGate,
    detuned: Option<StepGate>,
}

impl CollisionEngine {
    pub fn new(p: &ModelParams) -> Result<Self> {
        p.validate()?;
        let undetuned = StepGate::build(p, false)?;
        let detuned = match p.delta_omega {
            Detuning::IdealSwitch => None,
            Detuning::Finite(_) => Some(StepGate::build(p, true)?),
        };
        Ok(Self { params: p.clone(), undetuned, detuned })
    }

    /// Engine with caller-supplied gates (zero-coupling controls, decoupled
    /// qubits). `detuned` is used for steps before 0 when the parameters
    /// carry a finite detuning.
    pub fn with_gates(p: &ModelParams, undetuned: StepGate, detuned: Option<StepGate>) -> Result<Self> {
        p.validate()?;
        if matches!(p.delta_omega, Detuning::Finite(_)) && detuned.is_none() {
            return Err(Error::InvalidParam {
                key: "delta_omega",
                reason: "finite detuning needs a detuned gate".into(),
            });
        }
        Ok(Self { params: p.clone(), undetuned, detuned })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn gates(&self) -> (&StepGate, Option<&StepGate>) {
        (&self.undetuned, self.detuned.as_ref())
    }

    pub fn gate_for(&self, n: i64) -> &StepGate {
        match (&self.detuned, n < 0) {
            (Some(g), true) => g,
            _ => &self.undetuned,
        }
    }

    pub fn site_map(&self) -> SiteMap {
        SiteMap::new(&self.params)
    }

    pub fn run(&self, initial: MpsState) -> Result<RunOutput> {
        self.run_observed(initial, |_, _| Ok(()))
    }

    /// Runs all steps, calling `observe(k, state)` after every step with the
    /// time index `k` reached.
    pub fn run_observed<F>(&self, initial: MpsState, mut observe: F) -> Result<RunOutput>
    where
        F: FnMut(i64, &MpsState) -> Result<()>,
    {
        let p = &self.params;
        let mut map = self.site_map();
        if initial.roles() != map.roles().as_slice() {
            return Err(Error::ShapeMismatch("initial state does not match the lattice layout".into()));
        }
        let trunc = p.truncation();
        let mut state = initial;
        let first = p.first_step();
        let mut records = vec![ObservableRecord::from_mps(p, first, &state)?];
        let mut max_bond = state.max_bond();
        observe(first, &state)?;

        for (done, n) in (first..first + p.steps as i64).enumerate() {
            schedule_step(&mut state, &mut map, self.gate_for(n), n, trunc)?;
            max_bond = max_bond.max(state.max_bond());
            let k = n + 1;
            let is_last = done + 1 == p.steps;
            if (done + 1) % p.record_every == 0 || is_last {
                records.push(ObservableRecord::from_mps(p, k, &state)?);
            }
            observe(k, &state)?;
        }
        Ok(RunOutput { records, final_state: state, final_map: map, max_bond })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn flagship() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn zero_coupling_generator_vanishes() {
        let p = ModelParams { gamma: 0.0, ..flagship() };
        assert_eq!(max_abs(&build_step_generator(&p, false)), 0.0);
    }

    #[test]
    fn generator_is_hermitian_and_conserves_excitations() {
        let p = flagship();
        let m = build_step_generator(&p, false);
        assert!(hermiticity_defect(&m) < 1e-14);
        let n = excitation_operator();
        assert!(max_abs(&(&m * &n - &n * &m)) <= 1e-13);
        let pd = ModelParams { delta_omega: Detuning::Finite(3.0), ..flagship() };
        let md = build_step_generator(&pd, true);
        assert!(max_abs(&(&md * &n - &n * &md)) <= 1e-13);
    }

    #[test]
    fn generator_matrix_elements() {
        let p = ModelParams { phi: 0.7, ..flagship() };
        let m = build_step_generator(&p, false);
        let g = (0.04f64 / 2.0).sqrt();
        let from = gen_index(emitter::EG, photon::VAC, photon::VAC);
        assert!((m[(gen_index(emitter::GG, photon::R, photon::VAC), from)] - g).norm() < 1e-15);
        assert!((m[(gen_index(emitter::GG, photon::VAC, photon::L), from)] - g).norm() < 1e-15);
        let from2 = gen_index(emitter::GE, photon::VAC, photon::VAC);
        let e_m = C64::from_polar(g, -0.7);
        let e_p = C64::from_polar(g, 0.7);
        assert!((m[(gen_index(emitter::GG, photon::VAC, photon::R), from2)] - e_m).norm() < 1e-15);
        assert!((m[(gen_index(emitter::GG, photon::L, photon::VAC), from2)] - e_p).norm() < 1e-15);
    }

    #[test]
    fn detuning_adds_qubit_energy() {
        let p = ModelParams { gamma: 0.0, delta_omega: Detuning::Finite(5.0), ..flagship() };
        let m = build_step_generator(&p, true);
        let ee = gen_index(emitter::EE, photon::VAC, photon::VAC);
        let eg = gen_index(emitter::EG, photon::R, photon::VAC);
        assert!((m[(ee, ee)].re - 2.0 * 5.0 * 0.04).abs() < 1e-15);
        assert!((m[(eg, eg)].re - 5.0 * 0.04).abs() < 1e-15);
        // undetuned variant ignores the detuning
        assert_eq!(max_abs(&build_step_generator(&p, false)), 0.0);
    }

    #[test]
    fn step_gate_matches_second_order_taylor() {
        let p = flagship();
        let m = build_step_generator(&p, false);
        let gate = StepGate::build(&p, false).unwrap();
        let i = CMat::identity(64, 64);
        let taylor = &i - &m * C64::new(0.0, 1.0) - (&m * &m) * C64::new(0.5, 0.0);
        // remainder of the second-order expansion is bounded by ‖M‖³/6
        let spectral = m.clone().symmetric_eigenvalues().iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!((spectral - 0.4).abs() < 1e-12);
        let dev = max_abs(&(&gate.matrix - taylor));
        assert!(dev <= spectral.powi(3) / 6.0, "{dev}");
        assert!(gate.unitarity_defect() < 1e-12);
        let zero = StepGate::build(&ModelParams { gamma: 0.0, ..p }, false).unwrap();
        assert!(max_abs(&(&zero.matrix - &i)) < 1e-15);
    }

    #[test]
    fn large_detuning_gate_is_unitary() {
        let p = ModelParams { delta_omega: Detuning::Finite(1e3), ..flagship() };
        let gate = StepGate::build(&p, true).unwrap();
        assert!(gate.unitarity_defect() < 1e-12);
    }

    #[test]
    fn validation_rejects_inconsistent_lattices() {
        assert!(matches!(
            ModelParams { ell: 0, ..flagship() }.validate(),
            Err(Error::InvalidParam { key: "ell", .. })
        ));
        assert!(matches!(
            ModelParams { steps: 901, ..flagship() }.validate(),
            Err(Error::InvalidParam { key: "steps", .. })
        ));
        assert!(matches!(
            ModelParams { gamma_band: 0.0, ..flagship() }.validate(),
            Err(Error::InvalidParam { key: "gamma_band", .. })
        ));
        assert!(ModelParams { gamma_band: 0.0, mode: Mode::Relaxation, ..flagship() }.validate().is_ok());
        assert!(matches!(
            ModelParams { n_bins: 100, ..flagship() }.validate(),
            Err(Error::InvalidParam { key: "n_bins", .. })
        ));
    }

    #[test]
    fn site_map_layout() {
        let p = ModelParams { ell: 2, n_bins: 6, steps: 4, ..flagship() };
        let map = SiteMap::new(&p);
        assert_eq!((map.lo, map.hi, map.next), (-2, 3, 0));
        assert_eq!(map.offset, 2);
        assert_eq!(map.left_bin(-2), 0);
        assert_eq!(map.emitter_position(), 2);
        assert_eq!(map.position(-1), Some(1));
        assert_eq!(map.position(0), Some(3));
        assert_eq!(map.roles()[2], SiteRole::Emitter);
        assert_eq!(map.len(), 7);

        let pd = ModelParams { delta_omega: Detuning::Finite(1.0), ..p };
        let mapd = SiteMap::new(&pd);
        assert_eq!((mapd.lo, mapd.next), (-4, -2));
    }

    #[test]
    fn bic_sign_follows_resonance_parity() {
        assert_eq!(bic_sign(PI), 1.0);
        assert_eq!(bic_sign(2.0 * PI), -1.0);
        assert_eq!(bic_sign(3.0 * PI + 1e-12), 1.0);
    }

    #[test]
    fn mode_and_detuning_parse() {
        assert_eq!("scatter-oneside-R".parse::<Mode>().unwrap(), Mode::ScatterOnesideR);
        assert!("sideways".parse::<Mode>().is_err());
        assert_eq!("ideal-switch".parse::<Detuning>().unwrap(), Detuning::IdealSwitch);
        assert_eq!("2.5".parse::<Detuning>().unwrap(), Detuning::Finite(2.5));
        assert!("fast".parse::<Detuning>().is_err());
    }
}
