//! Closed-form bound-state probabilities: the optimal bandwidth, the
//! scattering probability across delays, and the relaxation baseline.
//!
//!     cargo run --release --example analytic_bounds

use waveguide_bic::analytics::{
    optimal_bandwidth, optimal_bandwidth_product, optimal_bic_coefficient, p_bell_analytic, p_bic_analytic,
    relaxation_baselines,
};

fn main() -> waveguide_bic::Result<()> {
    let u = optimal_bandwidth_product();
    println!("optimal bandwidth  Γ*τ = {u:.6}");
    println!("optimal coefficient    = {:.6}", optimal_bic_coefficient());
    println!();
    println!("{:>6} {:>10} {:>10} {:>10} {:>10} {:>10}", "γτ", "Γ*", "P_BIC*", "P_Bell*", "relax", "Γτ=1");
    for gt in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
        let g_star = optimal_bandwidth(gt)?;
        let (relax, _) = relaxation_baselines(1.0, gt);
        println!(
            "{gt:>6} {g_star:>10.4} {:>10.4} {:>10.4} {relax:>10.4} {:>10.4}",
            p_bic_analytic(g_star, 1.0, gt)?,
            p_bell_analytic(g_star, 1.0, gt)?,
            p_bic_analytic(1.0 / gt, 1.0, gt)?,
        );
    }
    Ok(())
}
