//! MPS evolution against the exact single-excitation evolution on a short
//! lattice, with and without a pre-switch detuning.
//!
//!     cargo run --release --example oracle_check

use waveguide_bic::cli::oracle_check;
use waveguide_bic::oracle::{BlockSource, ExactEngine, ExactState};
use waveguide_bic::collision::Couplings;
use waveguide_bic::wavepacket::RelaxationStart;
use waveguide_bic::{Detuning, ModelParams};

fn main() -> waveguide_bic::Result<()> {
    let p = ModelParams { ell: 10, n_bins: 100, steps: 90, gamma_band: 6.25, trunc_eps: 1e-12, ..Default::default() };
    for d in [Detuning::IdealSwitch, Detuning::Finite(3.0)] {
        let q = ModelParams { delta_omega: d, steps: if d.is_ideal() { 90 } else { 80 }, ..p.clone() };
        let c = oracle_check(&q)?;
        println!(
            "{:>12}: 1 - F = {:.2e}, max observable deviation {:.2e}, max bond {}",
            d.to_string(),
            1.0 - c.fidelity,
            c.max_observable_deviation,
            c.max_bond
        );
    }

    // the two oracle generators: restricted 64x64 gate vs hand-written block
    let a = ExactEngine::with_source(&p, BlockSource::SharedGate, Couplings::default())?
        .run(ExactState::initial(&p, RelaxationStart::Qubit1)?)?;
    let b = ExactEngine::with_source(&p, BlockSource::HandWritten, Couplings::default())?
        .run(ExactState::initial(&p, RelaxationStart::Qubit1)?)?;
    println!("shared vs hand-written block: |1 - ⟨a|b⟩| = {:.2e}", (a.final_state.inner(&b.final_state) - 1.0).norm());
    Ok(())
}
