//! Time for the bound-state population to reach 90% of its final value at
//! the optimal bandwidth, for growing delays, with a straight-line fit.
//!
//!     cargo run --release --example time_to_ninety [-- --oracle]

use waveguide_bic::cli::{t90_scan, Backend};
use waveguide_bic::ModelParams;

fn main() -> waveguide_bic::Result<()> {
    let backend = if std::env::args().any(|a| a == "--oracle") { Backend::Oracle } else { Backend::Mps };
    let report = t90_scan(&ModelParams::default(), &[25, 50, 100, 150, 200], backend, 1)?;
    println!("{:>6} {:>8} {:>10}", "γτ", "γ t90", "asymptote");
    for r in &report.rows {
        println!("{:>6} {:>8.3} {:>10.5}", r.gamma_tau, r.t90, r.asymptote);
    }
    if let Some(f) = report.fit {
        println!("\nγ t90 ≈ {:.3} γτ + {:.3}   (R² = {:.4})", f.slope, f.intercept, f.r2);
    }
    Ok(())
}
