//! The exponential input photon built two ways: directly as a bond-2 MPS
//! and by applying the creation MPO to the vacuum.
//!
//!     cargo run --release --example wavepacket_mpo

use waveguide_bic::wavepacket::{build_input_mps, build_input_via_mpo, exponential_bin_amplitudes, wavepacket_mpo};
use waveguide_bic::{Mode, ModelParams};

fn main() -> waveguide_bic::Result<()> {
    let p = ModelParams { ell: 20, n_bins: 300, steps: 280, gamma_band: 2.0, mode: Mode::ScatterSym, ..Default::default() };
    let amps = exponential_bin_amplitudes(&p)?;
    println!("bins {}..{}, tail lost to the lattice end {:.2e}", amps.lo, amps.lo + amps.xi.len() as i64 - 1, amps.tail_discarded);
    println!("weights w_R = {:.4}, w_L = {:.4}", amps.weights.0, amps.weights.1);
    for (m, x) in amps.bins().filter(|(m, _)| *m >= -(p.ell as i64)).step_by(20).take(8) {
        println!("  bin {m:>4}: {x:.5}");
    }

    let direct = build_input_mps(&p, &amps)?;
    let mpo = wavepacket_mpo(&p, &amps);
    let via = build_input_via_mpo(&p, &amps)?;
    let f = direct.inner_product(&via)?.norm_sqr();
    println!("MPO bond {}, sites {}", mpo.iter().map(|t| t.right).max().unwrap_or(1), mpo.len());
    println!("direct bond {}, MPO route bond {}, fidelity {:.12}", direct.max_bond(), via.max_bond(), f);
    Ok(())
}
