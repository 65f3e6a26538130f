//! Symmetric single photon on two qubits at γτ = 4, φ = π, Γ = 0.625γ.
//! Prints a coarse time trace and compares the final bound-state population
//! with the closed form.
//!
//!     cargo run --release --example flagship_scattering

use waveguide_bic::analytics::{discretized_bic_state, p_bic_analytic};
use waveguide_bic::wavepacket::initial_state;
use waveguide_bic::{CollisionEngine, ModelParams};

fn main() -> waveguide_bic::Result<()> {
    let p = ModelParams { record_every: 50, ..ModelParams::default() };
    let engine = CollisionEngine::new(&p)?;
    let out = engine.run(initial_state(&p)?)?;

    println!("{:>6} {:>8} {:>9} {:>9} {:>9} {:>9}", "step", "γt", "p_e1", "p_e2", "bell+", "trapped");
    for r in &out.records {
        println!(
            "{:>6} {:>8.2} {:>9.5} {:>9.5} {:>9.5} {:>9.5}",
            r.step, r.time, r.p_e1, r.p_e2, r.bell_plus, r.trapped_n
        );
    }
    let last = out.last();
    let bic = discretized_bic_state(&p, last.step)?;
    let overlap = bic.inner_product(&out.final_state)?.norm_sqr();
    println!();
    println!("P_BIC from Bell population : {:.5}", last.p_bic_inferred);
    println!("P_BIC from direct overlap  : {overlap:.5}");
    println!("closed form                : {:.5}", p_bic_analytic(p.gamma_band, p.gamma, p.tau())?);
    println!("max bond {}, discarded {:.2e}", out.max_bond, out.final_state.cumulative_discarded());
    Ok(())
}
