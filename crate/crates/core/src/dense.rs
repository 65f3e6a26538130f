//! Dense state vectors over a handful of four-level sites.
//!
//! This is a brute-force reference for checking the MPS engine on short
//! lattices: gates are applied by explicit index arithmetic on the full
//! `4^n` amplitude vector, with the first site as the most significant digit.

use num_complex::Complex64 as C64;

use crate::linalg::CMat;
use crate::mps::PHYS_DIM;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    pub sites: usize,
    pub amps: Vec<C64>,
}

impl DenseState {
    pub fn product(locals: &[Vec<C64>]) -> Self {
        let mut amps = vec![C64::new(1.0, 0.0)];
        for v in locals {
            let mut next = Vec::with_capacity(amps.len() * v.len());
            for a in &amps {
                for b in v {
                    next.push(a * b);
                }
            }
            amps = next;
        }
        Self { sites: locals.len(), amps }
    }

    pub fn from_amps(sites: usize, amps: Vec<C64>) -> Self {
        assert_eq!(amps.len(), PHYS_DIM.pow(sites as u32));
        Self { sites, amps }
    }

    fn digit(&self, idx: usize, site: usize) -> usize {
        (idx / PHYS_DIM.pow((self.sites - 1 - site) as u32)) % PHYS_DIM
    }

    /// Applies `gate` (acting on `targets`, in the listed order) to the state.
    /// The targets need not be contiguous.
    pub fn apply(&mut self, gate: &CMat, targets: &[usize]) {
        let k = targets.len();
        let block = PHYS_DIM.pow(k as u32);
        assert_eq!(gate.nrows(), block);
        let strides: Vec<usize> = targets
            .iter()
            .map(|&t| PHYS_DIM.pow((self.sites - 1 - t) as u32))
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); self.amps.len()];
        for (idx, amp) in self.amps.iter().enumerate() {
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            let mut local_in = 0;
            let mut base = idx;
            for (j, &t) in targets.iter().enumerate() {
                let dg = self.digit(idx, t);
                local_in = local_in * PHYS_DIM + dg;
                base -= dg * strides[j];
            }
            for local_out in 0..block {
                let g = gate[(local_out, local_in)];
                if g == C64::new(0.0, 0.0) {
                    continue;
                }
                let mut target = base;
                let mut rem = local_out;
                for j in (0..k).rev() {
                    target += (rem % PHYS_DIM) * strides[j];
                    rem /= PHYS_DIM;
                }
                out[target] += g * amp;
            }
        }
        self.amps = out;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &DenseState) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Probability weight of each local index at `site`.
    pub fn local_populations(&self, site: usize) -> [f64; 4] {
        let mut p = [0.0; 4];
        for (idx, a) in self.amps.iter().enumerate() {
            p[self.digit(idx, site)] += a.norm_sqr();
        }
        p
    }

    /// Reduced density matrix of one site by explicit partial trace.
    pub fn site_rdm(&self, site: usize) -> CMat {
        let stride = PHYS_DIM.pow((self.sites - 1 - site) as u32);
        let mut rho = CMat::zeros(PHYS_DIM, PHYS_DIM);
        for (idx, a) in self.amps.iter().enumerate() {
            let s = self.digit(idx, site);
            let base = idx - s * stride;
            for t in 0..PHYS_DIM {
                let b = self.amps[base + t * stride];
                rho[(s, t)] += a * b.conj();
            }
        }
        rho
    }
}
