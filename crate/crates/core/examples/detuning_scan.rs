//! Final Bell population when the qubits sit detuned until the switch time
//! instead of being decoupled. γτ = 1, Γτ = 2.513.
//!
//!     cargo run --release --example detuning_scan [-- --oracle]

use waveguide_bic::cli::{sweep_detuning, Backend};
use waveguide_bic::ModelParams;

fn main() -> waveguide_bic::Result<()> {
    let backend = if std::env::args().any(|a| a == "--oracle") { Backend::Oracle } else { Backend::Mps };
    let deltas = [0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 16.0, 1000.0];
    let scan = sweep_detuning(&ModelParams::default(), 1.0, 2.513, &deltas, backend, 1)?;
    for r in &scan.rows {
        let bar = "#".repeat((r.p_bell_final * 150.0).round() as usize);
        println!("{:>14} {:.5} {bar}", r.delta_omega.to_string(), r.p_bell_final);
    }
    if let (Some(d), Some(v)) = (scan.best_delta_omega, scan.best_p_bell) {
        println!("\nbest Δω = {d}γ: {v:.5} vs ideal switch {:.5}", scan.ideal_switch);
    }
    Ok(())
}
