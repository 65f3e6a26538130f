//! Simulated bound-state probability over bandwidth and delay, next to the
//! closed form. Use `--oracle` for the exact single-excitation evolution.
//!
//!     cargo run --release --example bandwidth_grid [-- --oracle]

use waveguide_bic::cli::{sweep_grid, Backend};
use waveguide_bic::ModelParams;

fn main() -> waveguide_bic::Result<()> {
    let backend = if std::env::args().any(|a| a == "--oracle") { Backend::Oracle } else { Backend::Mps };
    let jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let rows = sweep_grid(&ModelParams::default(), &[1.0, 1.5, 2.5, 3.5, 5.0], &[25, 50, 100], false, backend, jobs)?;
    println!("{:>6} {:>5} {:>9} {:>9} {:>9}", "Γτ", "γτ", "sim", "analytic", "|err|");
    for r in &rows {
        println!(
            "{:>6} {:>5} {:>9.5} {:>9.5} {:>9.2e}",
            r.gamma_band_tau, r.gamma_tau, r.p_bic_sim, r.p_bic_analytic, r.abs_err
        );
    }
    Ok(())
}
