//! Closed-form results for the bound state in the continuum (BIC) of two
//! qubits at resonance and for the single-photon scattering protocol.
//!
//! Rates are in any consistent unit; `gamma` is the single-qubit emission
//! rate and `tau` the propagation delay between the qubits.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::collision::ModelParams;
use crate::error::{Error, Result};
use crate::mps::{emitter, photon, MpsState};

/// Weights of the qubit and photon parts of the bound state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BicWeights {
    pub qubit_share: f64,
    pub photon_share: f64,
    /// `+1` for a `ψ+` qubit component, `-1` for `ψ-`.
    pub parity: i8,
}

impl BicWeights {
    /// Weights at the resonance `φ = nπ`.
    pub fn new(gamma_tau: f64, n: i64) -> Self {
        let denom = 1.0 + gamma_tau / 2.0;
        Self {
            qubit_share: 1.0 / denom,
            photon_share: (gamma_tau / 2.0) / denom,
            parity: if n.rem_euclid(2) == 1 { 1 } else { -1 },
        }
    }
}

fn check_band(gamma_band: f64) -> Result<()> {
    if gamma_band > 0.0 && gamma_band.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam { key: "gamma_band", reason: format!("must be positive, got {gamma_band}") })
    }
}

/// Overlap probability of the parity-matched exponential photon with the
/// bound state: `2γ(1 - e^{-Γτ/2})² / (Γ(1 + γτ/2))`.
pub fn p_bic_analytic(gamma_band: f64, gamma: f64, tau: f64) -> Result<f64> {
    check_band(gamma_band)?;
    let gt = gamma * tau;
    let shape = 1.0 - (-gamma_band * tau / 2.0).exp();
    Ok(2.0 * gamma * shape * shape / (gamma_band * (1.0 + gt / 2.0)))
}

/// Bell-state population carried by the bound state: `P_BIC / (1 + γτ/2)`.
pub fn p_bell_analytic(gamma_band: f64, gamma: f64, tau: f64) -> Result<f64> {
    Ok(p_bic_analytic(gamma_band, gamma, tau)? / (1.0 + gamma * tau / 2.0))
}

/// Root of `u = e^{u/2} - 1` on `[1, 5]`, the optimal `Γτ`.
pub fn optimal_bandwidth_product() -> f64 {
    let f = |u: f64| (u / 2.0).exp() - 1.0 - u;
    let (mut lo, mut hi) = (1.0_f64, 5.0_f64);
    // f(1) < 0 < f(5)
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bandwidth `Γ*` maximizing the BIC probability at delay `tau`.
pub fn optimal_bandwidth(tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParam { key: "tau", reason: format!("must be positive, got {tau}") });
    }
    Ok(optimal_bandwidth_product() / tau)
}

/// Coefficient `c` in `P*_BIC = c γτ / (1 + γτ/2)`.
pub fn optimal_bic_coefficient() -> f64 {
    let u = optimal_bandwidth_product();
    let shape = 1.0 - (-u / 2.0).exp();
    2.0 * shape * shape / u
}

/// Relaxation from `|eg⟩ ⊗ |0⟩`: `(P_BIC, P_Bell)`.
pub fn relaxation_baselines(gamma: f64, tau: f64) -> (f64, f64) {
    let denom = 1.0 + gamma * tau / 2.0;
    (1.0 / (2.0 * denom), 1.0 / (2.0 * denom * denom))
}

/// Amplitude `⟨Φ| gg, φ_sym⟩` of the exponential two-sided photon with the
/// bound state, for carrier phase `k0d` and resonance order `parity_n`.
pub fn overlap_amplitude(gamma_band: f64, gamma: f64, tau: f64, k0d: f64, parity_n: i64) -> Result<C64> {
    check_band(gamma_band)?;
    let prefactor = (gamma / (2.0 * gamma_band * (1.0 + gamma * tau / 2.0))).sqrt();
    let shape = 1.0 - (-gamma_band * tau / 2.0).exp();
    let sign = if parity_n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let bracket = C64::from_polar(1.0, k0d) + sign;
    Ok(C64::new(0.0, -1.0) * prefactor * shape * bracket)
}

/// One-sided photon: half the two-sided probability.
pub fn one_side_probability(gamma_band: f64, gamma: f64, tau: f64) -> Result<f64> {
    Ok(p_bic_analytic(gamma_band, gamma, tau)? / 2.0)
}

/// Photon density `2 sin²(k0 x)` of the trapped standing wave.
pub fn continuum_bic_density(x: f64, k0: f64) -> f64 {
    2.0 * (k0 * x).sin().powi(2)
}

/// `bell · (1 + γτ/2)`, clipped to `[0, 1]`.
pub fn infer_p_bic_from_bell(bell_population: f64, gamma: f64, tau: f64) -> f64 {
    (bell_population * (1.0 + gamma * tau / 2.0)).clamp(0.0, 1.0)
}

/// All closed-form outputs for one `(Γ, γ, τ)` point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalyticSummary {
    pub gamma: f64,
    pub tau: f64,
    pub gamma_band: f64,
    pub gamma_tau: f64,
    pub qubit_share: f64,
    pub photon_share: f64,
    pub p_bic: f64,
    pub p_bell: f64,
    pub p_one_side: f64,
    pub gamma_star_tau: f64,
    pub gamma_star: Option<f64>,
    pub p_bic_star: f64,
    pub p_bell_star: f64,
    pub p_bic_relax: f64,
    pub p_bell_relax: f64,
}

pub fn summary(gamma_band: f64, gamma: f64, tau: f64) -> Result<AnalyticSummary> {
    let gt = gamma * tau;
    let w = BicWeights::new(gt, 1);
    let u = optimal_bandwidth_product();
    let c = optimal_bic_coefficient();
    let (relax_bic, relax_bell) = relaxation_baselines(gamma, tau);
    let denom = 1.0 + gt / 2.0;
    Ok(AnalyticSummary {
        gamma,
        tau,
        gamma_band,
        gamma_tau: gt,
        qubit_share: w.qubit_share,
        photon_share: w.photon_share,
        p_bic: p_bic_analytic(gamma_band, gamma, tau)?,
        p_bell: p_bell_analytic(gamma_band, gamma, tau)?,
        p_one_side: one_side_probability(gamma_band, gamma, tau)?,
        gamma_star_tau: u,
        gamma_star: if tau > 0.0 { Some(u / tau) } else { None },
        p_bic_star: c * gt / denom,
        p_bell_star: c * gt / (denom * denom),
        p_bic_relax: relax_bic,
        p_bell_relax: relax_bell,
    })
}

/// Discretized bound state at time index `k` (emitter just before bin `k`):
/// qubit part `sqrt(q) ψ±`, photon part uniform over the `ell` sites
/// `[k - ell, k - 1]` with amplitude `∓i sqrt(γΔt q / 4)` on the right-
/// and left-moving modes, `q = 1/(1 + γτ/2)`.
pub fn discretized_bic_state(p: &ModelParams, k: i64) -> Result<MpsState> {
    let n = (p.phi / std::f64::consts::PI).round();
    if (p.phi - n * std::f64::consts::PI).abs() > 1e-9 {
        return Err(Error::OffResonance { phi: p.phi });
    }
    let map = crate::collision::SiteMap::at(p, k);
    if k - (p.ell as i64) < map.lo || k > map.hi + 1 {
        return Err(Error::Schedule(format!("time index {k} leaves no room for the trapped field")));
    }
    let q = 1.0 / (1.0 + p.gamma_tau() / 2.0);
    let sign = p.bic_sign();
    let c1 = (q / 2.0).sqrt();
    let a = (p.gamma * p.dt * q / 4.0).sqrt();
    let amps: Vec<Vec<(usize, C64)>> = map
        .roles()
        .iter()
        .map(|role| match role {
            crate::mps::SiteRole::Emitter => {
                vec![(emitter::EG, C64::new(c1, 0.0)), (emitter::GE, C64::new(sign * c1, 0.0))]
            }
            crate::mps::SiteRole::Bin(m) if *m >= k - p.ell as i64 && *m < k => {
                vec![(photon::R, C64::new(0.0, -a)), (photon::L, C64::new(0.0, a))]
            }
            crate::mps::SiteRole::Bin(_) => vec![],
        })
        .collect();
    MpsState::single_excitation(&amps, &map.roles())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bic_probability_values() {
        assert_eq!(p_bic_analytic(1.0, 1.0, 0.0).unwrap(), 0.0);
        let fig2 = p_bic_analytic(0.625, 1.0, 4.0).unwrap();
        assert!((fig2 - 0.5430).abs() < 5e-5, "{fig2}");
        let opt = p_bic_analytic(2.513 / 2.0, 1.0, 2.0).unwrap();
        assert!((opt - 0.4073).abs() < 5e-5, "{opt}");
        assert!(p_bic_analytic(0.0, 1.0, 1.0).is_err());
        assert!(p_bic_analytic(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn bell_probability_values() {
        assert_eq!(p_bell_analytic(1.0, 1.0, 0.0).unwrap(), 0.0);
        let fig2 = p_bell_analytic(0.625, 1.0, 4.0).unwrap();
        assert!((fig2 - 0.1810).abs() < 5e-5);
        // at Γ = Γ*, P_Bell = c γτ/(1+γτ/2)² with c ≈ 0.41
        let c = optimal_bic_coefficient();
        for gt in [0.5, 2.0, 7.0] {
            let pb = p_bell_analytic(optimal_bandwidth(gt).unwrap(), 1.0, gt).unwrap();
            assert!((pb - c * gt / (1.0 + gt / 2.0).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn optimal_bandwidth_root() {
        let u = optimal_bandwidth_product();
        assert!((u - ((u / 2.0).exp() - 1.0)).abs() < 1e-10);
        assert!((optimal_bandwidth(1.0).unwrap() - 2.513).abs() < 1e-3);
        assert_eq!(format!("{:.2}", u), "2.51");
        assert_eq!(format!("{:.2}", optimal_bic_coefficient()), "0.41");
        let at = |g: f64| p_bic_analytic(g, 1.0, 1.0).unwrap();
        let best = at(u);
        assert!(at(u * 1.01) < best && at(u * 0.99) < best);
        assert!(optimal_bandwidth(0.0).is_err());
    }

    #[test]
    fn relaxation_values() {
        assert_eq!(relaxation_baselines(1.0, 0.0), (0.5, 0.5));
        assert_eq!(relaxation_baselines(1.0, 2.0), (0.25, 0.125));
        // crossover with the optimal scattering probability
        let c = optimal_bic_coefficient();
        let crossover = 0.5 / c;
        assert!((crossover - 1.23).abs() < 0.01);
        let (relax, _) = relaxation_baselines(1.0, crossover);
        let scat = c * crossover / (1.0 + crossover / 2.0);
        assert!((relax - scat).abs() < 1e-12);
    }

    #[test]
    fn overlap_amplitude_parity() {
        let (gb, g, t) = (0.625, 1.0, 4.0);
        let pbic = p_bic_analytic(gb, g, t).unwrap();
        for n in 1..5 {
            let pi_n = n as f64 * std::f64::consts::PI;
            let matched = overlap_amplitude(gb, g, t, pi_n, n).unwrap();
            assert!((matched.norm_sqr() - pbic).abs() < 1e-12);
            let opposite = overlap_amplitude(gb, g, t, pi_n, n + 1).unwrap();
            assert!(opposite.norm_sqr() < 1e-24);
            let half = overlap_amplitude(gb, g, t, pi_n + std::f64::consts::FRAC_PI_2, n).unwrap();
            assert!((half.norm_sqr() - pbic / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_side_is_half() {
        assert_eq!(one_side_probability(1.0, 1.0, 0.0).unwrap(), 0.0);
        assert!((one_side_probability(0.625, 1.0, 4.0).unwrap() - 0.2715).abs() < 5e-5);
    }

    #[test]
    fn standing_wave_density() {
        let k0 = 3.0;
        assert_eq!(continuum_bic_density(0.0, k0), 0.0);
        assert!((continuum_bic_density(std::f64::consts::PI / (2.0 * k0), k0) - 2.0).abs() < 1e-15);
        // trapezoid quadrature of ∫_0^d at k0 d = 3π
        let d = 3.0 * std::f64::consts::PI / k0;
        let n = 20_000;
        let h = d / n as f64;
        let integral: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * continuum_bic_density(i as f64 * h, k0)
            })
            .sum::<f64>()
            * h;
        assert!((integral - d).abs() < 1e-9);
    }

    #[test]
    fn inference_inverts_bell_relation() {
        assert_eq!(infer_p_bic_from_bell(0.0, 1.0, 4.0), 0.0);
        assert!((infer_p_bic_from_bell(0.1810, 1.0, 4.0) - 0.5430).abs() < 1e-12);
        assert_eq!(infer_p_bic_from_bell(0.9, 1.0, 4.0), 1.0);
    }

    #[test]
    fn weights_sum_to_one() {
        for gt in [0.0, 0.3, 4.0, 100.0] {
            let w = BicWeights::new(gt, 3);
            assert!((w.qubit_share + w.photon_share - 1.0).abs() < 1e-14);
            assert!(w.qubit_share > 0.0 && w.qubit_share <= 1.0);
        }
        assert_eq!(BicWeights::new(1.0, 1).parity, 1);
        assert_eq!(BicWeights::new(1.0, 2).parity, -1);
    }

    #[test]
    fn summary_at_zero_delay() {
        let s = summary(1.0, 1.0, 0.0).unwrap();
        assert_eq!((s.p_bic, s.p_bell, s.p_one_side, s.p_bic_star), (0.0, 0.0, 0.0, 0.0));
        assert_eq!((s.p_bic_relax, s.p_bell_relax), (0.5, 0.5));
        assert!(s.gamma_star.is_none());
    }
}
