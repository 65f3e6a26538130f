//! Small dense kernels: matrix exponential, unitarity checks and Kronecker
//! products on `nalgebra` complex matrices.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;

/// Largest entrywise deviation of `u† u` from the identity.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let n = u.ncols();
    let g = u.adjoint() * u;
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Largest entrywise deviation of `a` from `a†`.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    (a - a.adjoint()).iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

fn one_norm(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(a)` by scaling and squaring with a truncated Taylor series.
///
/// The argument is scaled by `2^-s` until its 1-norm is at most 1/2; the
/// series is then summed until the next term drops below 1e-18 relative to
/// the partial sum, and the result squared `s` times.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let norm = one_norm(a);
    let mut s = 0u32;
    if norm > 0.5 {
        s = (norm / 0.5).log2().ceil() as u32;
    }
    let scaled = a * C64::new(0.5_f64.powi(s as i32), 0.0);

    let mut sum = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for k in 1..64 {
        term = &term * &scaled * C64::new(1.0 / k as f64, 0.0);
        sum += &term;
        if max_abs(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// `exp(-i h)` for a Hermitian generator.
pub fn unitary_from_generator(h: &CMat) -> CMat {
    expm(&(h * C64::new(0.0, -1.0)))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn kron_all(factors: &[CMat]) -> CMat {
    factors
        .iter()
        .skip(1)
        .fold(factors[0].clone(), |acc, f| kron(&acc, f))
}

/// Permutation matrix that maps a product basis ordered as `order_from` to
/// one ordered as `order_to`. Both slices name the same factors (each of
/// local dimension `d`) by label.
pub fn factor_permutation(d: usize, order_from: &[usize], order_to: &[usize]) -> CMat {
    let k = order_from.len();
    assert_eq!(k, order_to.len());
    let dim = d.pow(k as u32);
    let mut p = CMat::zeros(dim, dim);
    for idx in 0..dim {
        // digits of idx in `order_from` layout, most significant first
        let mut digits = vec![0usize; k];
        let mut rem = idx;
        for slot in (0..k).rev() {
            digits[slot] = rem % d;
            rem /= d;
        }
        let mut target = 0usize;
        for label in order_to {
            let pos = order_from.iter().position(|l| l == label).expect("label");
            target = target * d + digits[pos];
        }
        p[(target, idx)] = C64::new(1.0, 0.0);
    }
    p
}

/// Thin SVD `m = u · diag(s) · vt` with `s` sorted descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub vt: CMat,
}

/// Relative reconstruction error accepted from an SVD.
pub const SVD_TOL: f64 = 1e-12;

impl Svd {
    fn reconstruction_error(&self, m: &CMat) -> f64 {
        let mut us = self.u.clone();
        for (c, s) in self.s.iter().enumerate() {
            us.column_mut(c).scale_mut(*s);
        }
        (us * &self.vt - m).norm()
    }

    fn sorted(u: CMat, s: &[f64], vt: CMat) -> Self {
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
        Self {
            u: CMat::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]),
            s: order.iter().map(|&i| s[i]).collect(),
            vt: CMat::from_fn(order.len(), vt.ncols(), |r, c| vt[(order[r], c)]),
        }
    }
}

/// SVD checked by reconstruction.
///
/// nalgebra's complex bidiagonal SVD occasionally returns unitary factors
/// that do not reproduce rank-deficient inputs (errors around 1e-4). Each
/// candidate is therefore verified, falling back to the adjoint, a tighter
/// convergence threshold and finally a one-sided Jacobi SVD.
pub fn svd(m: &CMat) -> Option<Svd> {
    let tol = SVD_TOL * m.norm().max(f64::MIN_POSITIVE);
    let direct = |eps: f64| {
        let d = m.clone().try_svd(true, true, eps, 100_000)?;
        Some(Svd::sorted(d.u?, d.singular_values.as_slice(), d.v_t?))
    };
    let adjoint = || {
        let d = m.adjoint().try_svd(true, true, 1e-15, 100_000)?;
        Some(Svd::sorted(d.v_t?.adjoint(), d.singular_values.as_slice(), d.u?.adjoint()))
    };
    let candidates: [&dyn Fn() -> Option<Svd>; 4] =
        [&|| direct(1e-15), &adjoint, &|| direct(1e-17), &|| Some(jacobi_svd(m))];
    for (i, f) in candidates.iter().enumerate() {
        if let Some(d) = f() {
            if d.reconstruction_error(m) <= tol {
                if i > 0 {
                    log::debug!("svd fallback {i} used for a {:?} matrix", m.shape());
                }
                return Some(d);
            }
        }
    }
    None
}

/// Eigenvalues and eigenvectors (as columns) of a Hermitian matrix.
///
/// nalgebra's default convergence threshold stops early on degenerate
/// spectra, leaving reconstruction errors near 1e-10, so tighter thresholds
/// are tried and each result is checked.
pub fn hermitian_eigen(h: &CMat) -> Option<(Vec<f64>, CMat)> {
    let tol = SVD_TOL * h.norm().max(f64::MIN_POSITIVE);
    for eps in [1e-18, 1e-20, 1e-22] {
        let Some(e) = h.clone().try_symmetric_eigen(eps, 100_000) else { continue };
        let d = CMat::from_diagonal(&e.eigenvalues.map(|x| C64::new(x, 0.0)));
        if max_abs(&(&e.eigenvectors * d * e.eigenvectors.adjoint() - h)) <= tol {
            return Some((e.eigenvalues.iter().copied().collect(), e.eigenvectors));
        }
    }
    None
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn jacobi_svd(m: &CMat) -> Svd {
    if m.nrows() < m.ncols() {
        let t = jacobi_svd(&m.adjoint());
        return Svd { u: t.vt.adjoint(), s: t.s, vt: t.u.adjoint() };
    }
    let (rows, n) = m.shape();
    let mut a = m.clone();
    let mut v = CMat::identity(n, n);
    for _ in 0..80 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let g = a.column(i).dotc(&a.column(j));
                let ga = g.norm();
                if ga <= 1e-15 * (alpha * beta).sqrt() || ga == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = g / ga;
                let zeta = (beta - alpha) / (2.0 * ga);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for r in 0..mat.nrows() {
                        let x = mat[(r, i)];
                        let y = mat[(r, j)] * phase.conj();
                        mat[(r, i)] = x * c - y * s;
                        mat[(r, j)] = (x * s + y * c) * phase;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s: Vec<f64> = (0..n).map(|c| a.column(c).norm()).collect();
    let mut u = CMat::zeros(rows, n);
    for c in 0..n {
        if s[c] > 0.0 {
            u.set_column(c, &(a.column(c) / C64::new(s[c], 0.0)));
        }
    }
    complete_orthonormal(&mut u, &s);
    Svd::sorted(u, &s, v.adjoint())
}

/// Replaces the columns of `u` with zero singular value by unit vectors
/// orthogonal to the rest.
fn complete_orthonormal(u: &mut CMat, s: &[f64]) {
    let rows = u.nrows();
    let mut basis = 0;
    for c in 0..s.len() {
        if s[c] > 0.0 {
            continue;
        }
        while basis < rows {
            let mut e = nalgebra::DVector::<C64>::zeros(rows);
            e[basis] = C64::new(1.0, 0.0);
            basis += 1;
            for k in 0..s.len() {
                if k != c && (s[k] > 0.0 || k < c) {
                    let proj = u.column(k).dotc(&e);
                    e -= u.column(k) * proj;
                }
            }
            let nrm = e.norm();
            if nrm > 1e-8 {
                u.set_column(c, &(e / C64::new(nrm, 0.0)));
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hermitian_sample(n: usize, seed: u64) -> CMat {
        // deterministic LCG fill
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m = CMat::from_fn(n, n, |_, _| C64::new(next(), next()));
        (&m + m.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn hermitian_eigen_resolves_degenerate_pairs() {
        // two identical blocks give doubly degenerate eigenvalues
        let b = hermitian_sample(3, 7) * C64::new(4.0, 0.0);
        let h = kron(&CMat::identity(2, 2), &b) + CMat::from_diagonal_element(6, 6, C64::new(-1.9, 0.0));
        let (vals, vecs) = hermitian_eigen(&h).unwrap();
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(6, vals.iter().map(|&x| C64::new(x, 0.0))));
        assert!(max_abs(&(&vecs * d * vecs.adjoint() - &h)) < 1e-14);
        assert!(unitarity_defect(&vecs) < 1e-14);
    }

    #[test]
    fn expm_matches_eigendecomposition() {
        for (seed, scale) in [(1u64, 0.3), (2, 4.0), (3, 40.0)] {
            let h = hermitian_sample(6, seed) * C64::new(scale, 0.0);
            let u = unitary_from_generator(&h);
            let (vals, vecs) = hermitian_eigen(&h).unwrap();
            let phases = CMat::from_diagonal(&nalgebra::DVector::from_iterator(vals.len(), vals.iter().map(|e| C64::new(0.0, -e).exp())));
            let reference = &vecs * phases * vecs.adjoint();
            assert!(max_abs(&(&u - &reference)) < 1e-11, "scale {scale}");
            assert!(unitarity_defect(&u) < 1e-12);
        }
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = CMat::zeros(5, 5);
        assert_eq!(expm(&z), CMat::identity(5, 5));
    }

    #[test]
    fn permutation_reorders_kron_factors() {
        let a = hermitian_sample(2, 7);
        let b = hermitian_sample(2, 8);
        let c = hermitian_sample(2, 9);
        let abc = kron_all(&[a.clone(), b.clone(), c.clone()]);
        let cab = kron_all(&[c, a, b]);
        let p = factor_permutation(2, &[0, 1, 2], &[2, 0, 1]);
        assert!(max_abs(&(&p * abc * p.adjoint() - cab)) < 1e-15);
    }

    fn pseudo_random(rows: usize, cols: usize, seed: f64) -> CMat {
        CMat::from_fn(rows, cols, |r, c| {
            let x = (r * r * 13 + c * c * 7 + r * c * 3 + r) as f64 + seed;
            C64::new((x * 1.618).sin(), (x * 2.718).cos())
        })
    }

    fn low_rank(rows: usize, cols: usize, rank: usize, seed: f64) -> CMat {
        pseudo_random(rows, rank, seed) * pseudo_random(rank, cols, seed + 0.5)
    }

    fn check(m: &CMat, d: &Svd) {
        let k = d.s.len();
        assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        assert!((d.u.adjoint() * &d.u - CMat::identity(k, k)).norm() < 1e-11);
        let gram = &d.vt * d.vt.adjoint();
        assert!((gram - CMat::identity(k, k)).norm() < 1e-11);
        assert!(d.reconstruction_error(m) < 1e-11 * m.norm().max(1.0));
    }

    #[test]
    fn jacobi_svd_reconstructs() {
        for (r, c, rank) in [(8, 8, 8), (8, 8, 2), (6, 10, 3), (12, 4, 4), (16, 16, 1)] {
            let m = low_rank(r, c, rank, rank as f64);
            let d = jacobi_svd(&m);
            check(&m, &d);
            let nonzero = d.s.iter().filter(|&&s| s > 1e-10 * d.s[0]).count();
            assert_eq!(nonzero, rank);
        }
    }

    #[test]
    fn checked_svd_handles_rank_deficient_inputs() {
        for seed in 0..40 {
            let m = low_rank(8, 8, 1 + seed % 3, seed as f64 * 0.37);
            let d = svd(&m).expect("svd");
            check(&m, &d);
        }
    }

    #[test]
    fn jacobi_agrees_with_checked_svd_on_values() {
        let m = pseudo_random(7, 5, 0.3);
        let a = jacobi_svd(&m);
        let b = svd(&m).unwrap();
        for (x, y) in a.s.iter().zip(&b.s) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
