//! One excited qubit decaying into the waveguide: the bound-state share it
//! leaves behind against 1/(2(1+γτ/2)).
//!
//!     cargo run --release --example relaxation_baseline

use waveguide_bic::analytics::relaxation_baselines;
use waveguide_bic::wavepacket::{initial_state_with, RelaxationStart};
use waveguide_bic::{CollisionEngine, Mode, ModelParams};

fn main() -> waveguide_bic::Result<()> {
    println!("{:>5} {:>10} {:>10} {:>10}", "γτ", "P_BIC", "target", "P_Bell");
    for ell in [5usize, 25, 50, 100] {
        let p = ModelParams { mode: Mode::Relaxation, ell, n_bins: 800 + ell, steps: 800, record_every: 800, ..Default::default() };
        let out = CollisionEngine::new(&p)?.run(initial_state_with(&p, RelaxationStart::Qubit1)?)?;
        let r = out.last();
        println!(
            "{:>5.2} {:>10.5} {:>10.5} {:>10.5}",
            p.gamma_tau(),
            r.p_bic_inferred,
            relaxation_baselines(p.gamma, p.tau()).0,
            r.bell_bic(&p)
        );
    }

    // starting in the bound-state Bell pair keeps most of it
    let p = ModelParams { mode: Mode::Relaxation, ell: 50, n_bins: 850, steps: 800, record_every: 800, ..Default::default() };
    let out = CollisionEngine::new(&p)?.run(initial_state_with(&p, RelaxationStart::BellMinus)?)?;
    println!("\nfrom ψ- at γτ = 2: final Bell population {:.5}", out.last().bell_minus);
    Ok(())
}
