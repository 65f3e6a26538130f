//! Low-level MPS operations: a three-site gate applied across distant sites
//! by swapping one of them in and back out, checked against the dense state.
//!
//!     cargo run --release --example swap_network

use num_complex::Complex64 as C64;
use waveguide_bic::dense::DenseState;
use waveguide_bic::linalg::{unitary_from_generator, CMat};
use waveguide_bic::mps::{LocalGate, MpsState, SiteRole, Sweep, Truncation};

fn main() -> waveguide_bic::Result<()> {
    let n = 6;
    let roles: Vec<SiteRole> = (0..n as i64).map(SiteRole::Bin).collect();
    let locals: Vec<Vec<C64>> = (0..n)
        .map(|i| {
            let t = 0.3 + 0.2 * i as f64;
            vec![C64::new(t.cos(), 0.0), C64::new(0.0, t.sin()), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]
        })
        .collect();
    let mut mps = MpsState::new_product_state(&locals, &roles)?;
    let mut dense = DenseState::product(&locals);

    // a Hermitian generator coupling three sites
    let h = CMat::from_fn(64, 64, |r, c| {
        let x = ((r * 7 + c * 3) % 11) as f64 * 0.01;
        if r == c { C64::new(x, 0.0) } else if r < c { C64::new(x, 0.5 * x) } else { C64::new(0.0, 0.0) }
    });
    let h = &h + h.adjoint() - CMat::from_diagonal(&h.diagonal());
    let gate = LocalGate::new(unitary_from_generator(&h), 3)?;

    // targets (0, 4, 5): move site 0 next to 4, apply, move it back
    let exact = Truncation::EXACT;
    for q in 0..3 {
        mps.swap_sites_sweep(q, exact, Sweep::Right)?;
    }
    mps.apply_gate_sweep(&gate, 3, exact, Sweep::Left)?;
    for q in (0..3).rev() {
        mps.swap_sites_sweep(q, exact, Sweep::Left)?;
    }
    dense.apply(gate.matrix(), &[0, 4, 5]);

    let overlap: C64 = dense.amps.iter().zip(mps.to_dense()).map(|(a, b)| a.conj() * b).sum();
    println!("bond dims {:?}", mps.bond_dims());
    println!("|⟨dense|mps⟩|² = {:.14}", overlap.norm_sqr());
    Ok(())
}
