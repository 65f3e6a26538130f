//! Matrix product states over the time-bin lattice plus one emitter site.
//!
//! Every site carries a four-dimensional physical index. Photonic sites hold
//! one right- and one left-moving bin mode truncated to occupations {0, 1},
//! in the basis `{vac, R, L, RL}` (index `n_R + 2 n_L`). The emitter site
//! holds the qubit pair in the basis `{gg, ge, eg, ee}` (index `2 e_1 + e_2`).
//!
//! Site tensors are stored as `(left bond, physical, right bond)` with the
//! right bond running fastest. The state is kept in mixed canonical form:
//! sites left of `center` are left-canonical, sites right of it are
//! right-canonical.
//!
//! ```text
//!   A[0] -- A[1] -- ... -- A[c] -- ... -- A[n-1]
//!    |       |              |               |
//!   (L)     (L)         (center)           (R)
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{svd, unitarity_defect, CMat};

/// Local physical dimension of every site.
pub const PHYS_DIM: usize = 4;

/// Singular values below this are always dropped.
pub const SV_FLOOR: f64 = 1e-14;
/// Singular values closer than this are treated as degenerate at a cut.
pub const SV_TIE: f64 = 1e-12;
/// Tolerance for accepting a gate as unitary.
pub const UNITARY_TOL: f64 = 1e-12;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Photonic basis indices.
pub mod photon {
    pub const VAC: usize = 0;
    pub const R: usize = 1;
    pub const L: usize = 2;
    pub const RL: usize = 3;
}

/// Emitter basis indices.
pub mod emitter {
    pub const GG: usize = 0;
    pub const GE: usize = 1;
    pub const EG: usize = 2;
    pub const EE: usize = 3;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SiteRole {
    /// Photonic site carrying bin index `m` (right-moving bin `m` and the
    /// relabeled left-moving bin).
    Bin(i64),
    Emitter,
}

impl SiteRole {
    pub fn is_emitter(&self) -> bool {
        matches!(self, SiteRole::Emitter)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor {
    left: usize,
    phys: usize,
    right: usize,
    data: Vec<C64>,
}

impl SiteTensor {
    pub fn new(left: usize, phys: usize, right: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != left * phys * right {
            return Err(Error::ShapeMismatch(format!(
                "site tensor ({left}, {phys}, {right}) given {} entries",
                data.len()
            )));
        }
        Ok(Self { left, phys, right, data })
    }

    pub fn from_local(v: &[C64]) -> Self {
        Self { left: 1, phys: v.len(), right: 1, data: v.to_vec() }
    }

    pub fn left_dim(&self) -> usize {
        self.left
    }

    pub fn right_dim(&self) -> usize {
        self.right
    }

    pub fn phys_dim(&self) -> usize {
        self.phys
    }

    #[inline]
    pub fn get(&self, l: usize, s: usize, r: usize) -> C64 {
        self.data[(l * self.phys + s) * self.right + r]
    }

    /// `(left * phys) x right` matrix view.
    fn as_left_matrix(&self) -> CMat {
        DMatrix::from_fn(self.left * self.phys, self.right, |i, j| self.data[i * self.right + j])
    }

    /// `left x (phys * right)` matrix view.
    fn as_right_matrix(&self) -> CMat {
        let cols = self.phys * self.right;
        DMatrix::from_fn(self.left, cols, |i, j| self.data[i * cols + j])
    }

    fn from_left_matrix(m: &CMat, phys: usize) -> Self {
        let (rows, right) = m.shape();
        let left = rows / phys;
        let mut data = Vec::with_capacity(rows * right);
        for i in 0..rows {
            for j in 0..right {
                data.push(m[(i, j)]);
            }
        }
        Self { left, phys, right, data }
    }

    fn from_right_matrix(m: &CMat, phys: usize) -> Self {
        let (left, cols) = m.shape();
        let right = cols / phys;
        let mut data = Vec::with_capacity(left * cols);
        for i in 0..left {
            for j in 0..cols {
                data.push(m[(i, j)]);
            }
        }
        Self { left, phys, right, data }
    }

    /// Deviation of `Σ_{l,s} A* A` from the identity on the right bond.
    pub fn left_canonical_defect(&self) -> f64 {
        let m = self.as_left_matrix();
        unitarity_defect_rect(&(m.adjoint() * &m))
    }

    /// Deviation of `Σ_{s,r} A A*` from the identity on the left bond.
    pub fn right_canonical_defect(&self) -> f64 {
        let m = self.as_right_matrix();
        unitarity_defect_rect(&(&m * m.adjoint()))
    }
}

fn unitarity_defect_rect(gram: &CMat) -> f64 {
    let n = gram.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let t = if i == j { ONE } else { ZERO };
            worst = worst.max((gram[(i, j)] - t).norm());
        }
    }
    worst
}

/// Bond truncation policy applied at every SVD split.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truncation {
    /// Maximum discarded squared-singular-value sum per split.
    pub eps: f64,
    pub chi_max: usize,
}

impl Truncation {
    pub const EXACT: Truncation = Truncation { eps: 0.0, chi_max: usize::MAX };

    pub fn new(eps: f64, chi_max: usize) -> Self {
        Self { eps, chi_max: chi_max.max(1) }
    }

    /// Number of singular values to keep (sorted descending) and the
    /// discarded squared weight.
    pub fn cut(&self, sv: &[f64]) -> (usize, f64) {
        let n = sv.len();
        if n == 0 {
            return (0, 0.0);
        }
        // tail[k] = sum of squares of sv[k..]
        let mut tail = vec![0.0; n + 1];
        for k in (0..n).rev() {
            tail[k] = tail[k + 1] + sv[k] * sv[k];
        }
        let above_floor = sv.iter().take_while(|&&s| s >= SV_FLOOR).count().max(1);
        let mut keep = (1..=above_floor)
            .find(|&k| tail[k] <= self.eps)
            .unwrap_or(above_floor);
        keep = keep.min(self.chi_max);
        while keep < above_floor && keep < self.chi_max && sv[keep - 1] - sv[keep] < SV_TIE {
            keep += 1;
        }
        (keep, tail[keep])
    }
}

/// A unitary acting on `k` contiguous sites, validated once at construction.
#[derive(Clone, Debug)]
pub struct LocalGate {
    matrix: CMat,
    sites: usize,
}

impl LocalGate {
    pub fn new(matrix: CMat, sites: usize) -> Result<Self> {
        let dim = PHYS_DIM.pow(sites as u32);
        if matrix.shape() != (dim, dim) {
            return Err(Error::ShapeMismatch(format!(
                "{sites}-site gate must be {dim}x{dim}, got {:?}",
                matrix.shape()
            )));
        }
        let deviation = unitarity_defect(&matrix);
        if deviation > UNITARY_TOL {
            return Err(Error::NonUnitary { deviation });
        }
        Ok(Self { matrix, sites })
    }

    pub fn identity(sites: usize) -> Self {
        let dim = PHYS_DIM.pow(sites as u32);
        Self { matrix: CMat::identity(dim, dim), sites }
    }

    /// Two-site SWAP.
    pub fn swap() -> Self {
        let d = PHYS_DIM;
        let mut m = CMat::zeros(d * d, d * d);
        for a in 0..d {
            for b in 0..d {
                m[(b * d + a, a * d + b)] = ONE;
            }
        }
        Self { matrix: m, sites: 2 }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn sites(&self) -> usize {
        self.sites
    }
}

/// Direction of the SVD sweep that restores MPS form after a gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sweep {
    /// Left-to-right splits; the center ends on the last gate site.
    Right,
    /// Right-to-left splits; the center ends on the first gate site.
    Left,
}

#[derive(Clone, Debug)]
pub struct MpsState {
    sites: Vec<SiteTensor>,
    roles: Vec<SiteRole>,
    center: usize,
    cumulative_discarded: f64,
}

impl MpsState {
    /// Bond-dimension-one product state.
    pub fn new_product_state(locals: &[Vec<C64>], roles: &[SiteRole]) -> Result<Self> {
        if locals.is_empty() {
            return Err(Error::Empty);
        }
        if locals.len() != roles.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} local vectors for {} roles",
                locals.len(),
                roles.len()
            )));
        }
        let mut sites = Vec::with_capacity(locals.len());
        for (i, v) in locals.iter().enumerate() {
            if v.len() != PHYS_DIM {
                return Err(Error::ShapeMismatch(format!(
                    "local vector at site {i} has length {}",
                    v.len()
                )));
            }
            let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            if (norm2 - 1.0).abs() > 1e-12 {
                return Err(Error::Unnormalized { site: i, norm2 });
            }
            sites.push(SiteTensor::from_local(v));
        }
        Ok(Self { sites, roles: roles.to_vec(), center: 0, cumulative_discarded: 0.0 })
    }

    /// Builds a state from arbitrary site tensors and brings it to mixed
    /// canonical form with the center on site 0. The norm is left as is.
    pub fn from_tensors(sites: Vec<SiteTensor>, roles: Vec<SiteRole>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Empty);
        }
        if sites.len() != roles.len() {
            return Err(Error::ShapeMismatch("tensor and role counts differ".into()));
        }
        if sites[0].left != 1 || sites[sites.len() - 1].right != 1 {
            return Err(Error::ShapeMismatch("open boundary bonds must be 1".into()));
        }
        for (i, w) in sites.windows(2).enumerate() {
            if w[0].right != w[1].left {
                return Err(Error::ShapeMismatch(format!(
                    "bond {i}: {} vs {}",
                    w[0].right, w[1].left
                )));
            }
        }
        let last = sites.len() - 1;
        let mut state = Self { sites, roles, center: last, cumulative_discarded: 0.0 };
        state.move_center(0);
        Ok(state)
    }

    /// Single-excitation state `Σ_i Σ_s a_{i,s} |.. s_i ..⟩` where every
    /// site other than `i` is in its local index 0. `amps[i]` lists the
    /// amplitudes of local indices 1..4 that carry exactly one excitation
    /// (for the photonic basis: R and L; for the emitter: ge and eg), given
    /// as `(local index, amplitude)` pairs.
    ///
    /// The resulting MPS has bond dimension 2 (vacuum channel and
    /// excitation-already-placed channel) and is canonicalized.
    pub fn single_excitation(amps: &[Vec<(usize, C64)>], roles: &[SiteRole]) -> Result<Self> {
        let n = amps.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        let total: f64 = amps.iter().flatten().map(|(_, a)| a.norm_sqr()).sum();
        if total <= 1e-300 {
            return Err(Error::ZeroNorm);
        }
        let mut sites = Vec::with_capacity(n);
        for (i, list) in amps.iter().enumerate() {
            let left = if i == 0 { 1 } else { 2 };
            let right = if i == n - 1 { 1 } else { 2 };
            let mut data = vec![ZERO; left * PHYS_DIM * right];
            let idx = |l: usize, s: usize, r: usize| (l * PHYS_DIM + s) * right + r;
            // channel 0: no excitation yet; channel 1: excitation placed
            let (l_vac, l_done) = (0, if left == 2 { 1 } else { usize::MAX });
            let (r_vac, r_done) = if right == 2 { (0, 1) } else { (usize::MAX, 0) };
            if right == 2 {
                data[idx(l_vac, 0, r_vac)] = ONE;
            }
            if l_done != usize::MAX {
                data[idx(l_done, 0, r_done)] = ONE;
            }
            for &(s, a) in list {
                if s == 0 || s >= PHYS_DIM {
                    return Err(Error::ShapeMismatch(format!(
                        "excitation index {s} at site {i}"
                    )));
                }
                data[idx(l_vac, s, r_done)] += a;
            }
            sites.push(SiteTensor { left, phys: PHYS_DIM, right, data });
        }
        Self::from_tensors(sites, roles.to_vec())
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn cumulative_discarded(&self) -> f64 {
        self.cumulative_discarded
    }

    pub fn roles(&self) -> &[SiteRole] {
        &self.roles
    }

    pub fn sites(&self) -> &[SiteTensor] {
        &self.sites
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.len() - 1].iter().map(|s| s.right).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn emitter_position(&self) -> Result<usize> {
        let mut found = self.roles.iter().enumerate().filter(|(_, r)| r.is_emitter());
        match (found.next(), found.next()) {
            (Some((i, _)), None) => Ok(i),
            (None, _) => Err(Error::NoEmitter),
            (Some(_), Some(_)) => {
                Err(Error::EmitterCount(self.roles.iter().filter(|r| r.is_emitter()).count()))
            }
        }
    }

    pub fn position_of(&self, role: SiteRole) -> Option<usize> {
        self.roles.iter().position(|&r| r == role)
    }

    /// Moves the orthogonality center with QR (LQ) steps.
    pub fn move_center(&mut self, to: usize) {
        assert!(to < self.len());
        while self.center < to {
            let c = self.center;
            let qr = self.sites[c].as_left_matrix().qr();
            let (q, r) = (qr.q(), qr.r());
            let phys = self.sites[c].phys;
            self.sites[c] = SiteTensor::from_left_matrix(&q, phys);
            let next = &self.sites[c + 1];
            let merged = r * next.as_right_matrix();
            self.sites[c + 1] = SiteTensor::from_right_matrix(&merged, next.phys);
            self.center += 1;
        }
        while self.center > to {
            let c = self.center;
            // LQ of A = (QR of A†)†
            let qr = self.sites[c].as_right_matrix().adjoint().qr();
            let (q, r) = (qr.q().adjoint(), qr.r().adjoint());
            let phys = self.sites[c].phys;
            self.sites[c] = SiteTensor::from_right_matrix(&q, phys);
            let prev = &self.sites[c - 1];
            let merged = prev.as_left_matrix() * r;
            self.sites[c - 1] = SiteTensor::from_left_matrix(&merged, prev.phys);
            self.center -= 1;
        }
    }

    /// Applies a gate on `gate.sites()` contiguous sites starting at
    /// `first`, restoring MPS form with left-to-right SVD splits. The center
    /// is left on the last gate site. Returns the discarded weight.
    pub fn apply_gate(&mut self, gate: &LocalGate, first: usize, trunc: Truncation) -> Result<f64> {
        self.apply_gate_sweep(gate, first, trunc, Sweep::Right)
    }

    pub fn apply_gate_sweep(
        &mut self,
        gate: &LocalGate,
        first: usize,
        trunc: Truncation,
        sweep: Sweep,
    ) -> Result<f64> {
        let k = gate.sites;
        if k == 0 || first + k > self.len() {
            return Err(Error::OutOfRange { index: first + k.saturating_sub(1), len: self.len() });
        }
        let last = first + k - 1;
        let target = self.center.clamp(first, last);
        self.move_center(target);

        let d = PHYS_DIM;
        let left = self.sites[first].left;
        let right = self.sites[last].right;
        let block = d.pow(k as u32);

        // theta[(l, s), r] with s running over the k physical indices
        let mut theta = self.sites[first].as_left_matrix();
        for site in &self.sites[first + 1..=last] {
            let rows = theta.nrows();
            let m = theta * site.as_right_matrix();
            // (rows) x (phys*right) -> (rows*phys) x right
            theta = reshape_rows(&m, rows * site.phys, site.right);
        }
        // theta is (left*block) x right; apply U on the block index
        let mut applied = CMat::zeros(left * block, right);
        let u = &gate.matrix;
        for l in 0..left {
            let slab = theta.rows(l * block, block);
            let out = u * slab;
            applied.rows_mut(l * block, block).copy_from(&out);
        }

        let mut discarded = 0.0;
        match sweep {
            Sweep::Right => {
                // rem: (bond*rest_phys) x right, viewed as (bond*d) x (rest*right)
                let mut rem = applied;
                let mut bond = left;
                for j in 0..k - 1 {
                    let rest = d.pow((k - 1 - j) as u32);
                    let m = reshape_rows(&rem, bond * d, rest * right);
                    let (u_m, sv, vt, w) = truncated_svd(&m, trunc)?;
                    discarded += w;
                    self.sites[first + j] = SiteTensor::from_left_matrix(&u_m, d);
                    let chi = sv.len();
                    let mut sv_vt = vt;
                    for (r, s) in sv.iter().enumerate() {
                        sv_vt.row_mut(r).scale_mut(*s);
                    }
                    rem = reshape_rows(&sv_vt, chi * rest, right);
                    bond = chi;
                }
                self.sites[last] = SiteTensor::from_left_matrix(&reshape_rows(&rem, bond * d, right), d);
                self.center = last;
            }
            Sweep::Left => {
                // rem viewed as (left*rest) x (d*bond)
                let mut rem = reshape_rows(&applied, left, block * right);
                let mut bond = right;
                for j in (1..k).rev() {
                    let rest = d.pow(j as u32);
                    let m = reshape_rows(&rem, left * rest, d * bond);
                    let (u_m, sv, vt, w) = truncated_svd(&m, trunc)?;
                    discarded += w;
                    self.sites[first + j] = SiteTensor::from_right_matrix(&vt, d);
                    let chi = sv.len();
                    let mut u_sv = u_m;
                    for (c, s) in sv.iter().enumerate() {
                        u_sv.column_mut(c).scale_mut(*s);
                    }
                    rem = u_sv;
                    bond = chi;
                }
                self.sites[first] = SiteTensor::from_right_matrix(&reshape_rows(&rem, left, d * bond), d);
                self.center = first;
            }
        }
        self.cumulative_discarded += discarded;
        Ok(discarded)
    }

    /// Left-to-right SVD sweep truncating every bond per `trunc`; the center
    /// ends on the last site. Returns the discarded weight.
    pub fn compress(&mut self, trunc: Truncation) -> Result<f64> {
        self.move_center(0);
        let mut discarded = 0.0;
        for i in 0..self.len() - 1 {
            let phys = self.sites[i].phys;
            let (u, sv, vt, w) = truncated_svd(&self.sites[i].as_left_matrix(), trunc)?;
            discarded += w;
            self.sites[i] = SiteTensor::from_left_matrix(&u, phys);
            let mut sv_vt = vt;
            for (r, s) in sv.iter().enumerate() {
                sv_vt.row_mut(r).scale_mut(*s);
            }
            let next = &self.sites[i + 1];
            let merged = sv_vt * next.as_right_matrix();
            self.sites[i + 1] = SiteTensor::from_right_matrix(&merged, next.phys);
            self.center = i + 1;
        }
        self.cumulative_discarded += discarded;
        Ok(discarded)
    }

    /// Exchanges the contents (and role tags) of sites `i` and `i + 1`.
    pub fn swap_sites(&mut self, i: usize, trunc: Truncation) -> Result<f64> {
        self.swap_sites_sweep(i, trunc, Sweep::Right)
    }

    pub fn swap_sites_sweep(&mut self, i: usize, trunc: Truncation, sweep: Sweep) -> Result<f64> {
        if i + 1 >= self.len() {
            return Err(Error::OutOfRange { index: i + 1, len: self.len() });
        }
        let w = self.apply_gate_sweep(swap_gate(), i, trunc, sweep)?;
        self.roles.swap(i, i + 1);
        Ok(w)
    }

    /// `⟨self|other⟩`.
    pub fn inner_product(&self, other: &MpsState) -> Result<C64> {
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch(format!(
                "lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        let mut env = CMat::from_element(1, 1, ONE);
        for (a, b) in self.sites.iter().zip(&other.sites) {
            if a.phys != b.phys {
                return Err(Error::ShapeMismatch("physical dimensions differ".into()));
            }
            env = transfer(&env, a, b);
        }
        Ok(env[(0, 0)])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.sites[self.center].data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// One-site reduced density matrices `ρ_i[s, t]`, computed with full
    /// left and right environments (no reliance on canonical form).
    pub fn site_rdms(&self) -> Vec<CMat> {
        let n = self.len();
        let mut lefts = Vec::with_capacity(n + 1);
        lefts.push(CMat::from_element(1, 1, ONE));
        for i in 0..n {
            let next = transfer(&lefts[i], &self.sites[i], &self.sites[i]);
            lefts.push(next);
        }
        let mut rights = vec![CMat::from_element(1, 1, ONE); n + 1];
        for i in (0..n).rev() {
            rights[i] = transfer_right(&rights[i + 1], &self.sites[i], &self.sites[i]);
        }
        (0..n).map(|i| site_rdm(&lefts[i], &self.sites[i], &rights[i + 1])).collect()
    }

    /// Reduced density matrix of a single site.
    pub fn site_rdm(&self, i: usize) -> Result<CMat> {
        if i >= self.len() {
            return Err(Error::OutOfRange { index: i, len: self.len() });
        }
        let mut left = CMat::from_element(1, 1, ONE);
        for s in &self.sites[..i] {
            left = transfer(&left, s, s);
        }
        let mut right = CMat::from_element(1, 1, ONE);
        for s in self.sites[i + 1..].iter().rev() {
            right = transfer_right(&right, s, s);
        }
        Ok(site_rdm(&left, &self.sites[i], &right))
    }

    pub fn local_occupations(&self) -> Occupations {
        let rdms = self.site_rdms();
        let mut occ = Occupations::default();
        for (role, rho) in self.roles.iter().zip(&rdms) {
            match role {
                SiteRole::Bin(m) => {
                    let n_r = (rho[(photon::R, photon::R)] + rho[(photon::RL, photon::RL)]).re;
                    let n_l = (rho[(photon::L, photon::L)] + rho[(photon::RL, photon::RL)]).re;
                    occ.bins.push((*m, n_r, n_l));
                }
                SiteRole::Emitter => {
                    occ.p_e1 = (rho[(emitter::EG, emitter::EG)] + rho[(emitter::EE, emitter::EE)]).re;
                    occ.p_e2 = (rho[(emitter::GE, emitter::GE)] + rho[(emitter::EE, emitter::EE)]).re;
                }
            }
        }
        occ
    }

    /// Reduced state of the qubit pair.
    pub fn qubit_rdm(&self) -> Result<DensityMatrix4> {
        let e = self.emitter_position()?;
        Ok(DensityMatrix4(self.site_rdm(e)?))
    }

    /// Dense amplitude vector in the site order of the lattice, first site
    /// most significant. Only sensible for a handful of sites.
    pub fn to_dense(&self) -> Vec<C64> {
        let mut acc = CMat::from_element(1, 1, ONE); // (configs) x bond
        for site in &self.sites {
            let rows = acc.nrows();
            let m = &acc * site.as_right_matrix(); // rows x (phys*right)
            acc = reshape_rows(&m, rows * site.phys, site.right);
        }
        acc.column(0).iter().copied().collect()
    }
}

fn swap_gate() -> &'static LocalGate {
    static SWAP: std::sync::OnceLock<LocalGate> = std::sync::OnceLock::new();
    SWAP.get_or_init(LocalGate::swap)
}

/// Per-site occupation profile.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Occupations {
    /// `(bin index, n_R, n_L)` in lattice order.
    pub bins: Vec<(i64, f64, f64)>,
    pub p_e1: f64,
    pub p_e2: f64,
}

impl Occupations {
    pub fn total_excitation(&self) -> f64 {
        self.bins.iter().map(|(_, r, l)| r + l).sum::<f64>() + self.p_e1 + self.p_e2
    }

    pub fn photons_in(&self, lo: i64, hi: i64) -> f64 {
        self.bins
            .iter()
            .filter(|(m, _, _)| *m >= lo && *m <= hi)
            .map(|(_, r, l)| r + l)
            .sum()
    }
}

/// Reduced state of the qubit pair in the basis `{gg, ge, eg, ee}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix4(pub CMat);

impl DensityMatrix4 {
    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn population(&self, psi: &[C64; 4]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(psi);
        (v.adjoint() * &self.0 * &v)[(0, 0)].re
    }

    /// `⟨ψ+|ρ|ψ+⟩` with `ψ± = (|eg⟩ ± |ge⟩)/√2`.
    pub fn bell_plus(&self) -> f64 {
        self.population(&bell_vector(1.0))
    }

    pub fn bell_minus(&self) -> f64 {
        self.population(&bell_vector(-1.0))
    }

    pub fn hermiticity_defect(&self) -> f64 {
        crate::linalg::hermiticity_defect(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `(|eg⟩ + sign |ge⟩)/√2` as an emitter-site vector.
pub fn bell_vector(sign: f64) -> [C64; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = [ZERO; 4];
    v[emitter::EG] = C64::new(h, 0.0);
    v[emitter::GE] = C64::new(sign * h, 0.0);
    v
}

/// Row-major reshape of a matrix into `rows x cols`.
fn reshape_rows(m: &CMat, rows: usize, cols: usize) -> CMat {
    let (mr, mc) = m.shape();
    debug_assert_eq!(mr * mc, rows * cols);
    DMatrix::from_fn(rows, cols, |i, j| {
        let flat = i * cols + j;
        m[(flat / mc, flat % mc)]
    })
}

type SvdParts = (CMat, Vec<f64>, CMat, f64);

/// SVD with singular values sorted descending and cut per `trunc`.
fn truncated_svd(m: &CMat, trunc: Truncation) -> Result<SvdParts> {
    let d = svd(m).ok_or_else(|| Error::Numerical(format!("SVD of a {:?} matrix failed", m.shape())))?;
    let (keep, discarded) = trunc.cut(&d.s);
    let u_k = d.u.columns(0, keep).into_owned();
    let vt_k = d.vt.rows(0, keep).into_owned();
    Ok((u_k, d.s[..keep].to_vec(), vt_k, discarded))
}

/// `E'[a', b'] = Σ E[a, b] conj(A[a, s, a']) B[b, s, b']`.
fn transfer(env: &CMat, a: &SiteTensor, b: &SiteTensor) -> CMat {
    let mut out = CMat::zeros(a.right, b.right);
    for s in 0..a.phys {
        // (env^T-contracted) : tmp[a', b] = Σ_a conj(A[a,s,a']) env[a,b]
        let a_s = CMat::from_fn(a.left, a.right, |l, r| a.get(l, s, r));
        let b_s = CMat::from_fn(b.left, b.right, |l, r| b.get(l, s, r));
        out += a_s.adjoint() * env * b_s;
    }
    out
}

/// `R'[a, b] = Σ conj(A[a, s, a']) B[b, s, b'] R[a', b']`.
fn transfer_right(env: &CMat, a: &SiteTensor, b: &SiteTensor) -> CMat {
    let mut out = CMat::zeros(a.left, b.left);
    for s in 0..a.phys {
        let a_s = CMat::from_fn(a.left, a.right, |l, r| a.get(l, s, r));
        let b_s = CMat::from_fn(b.left, b.right, |l, r| b.get(l, s, r));
        out += a_s.conjugate() * env * b_s.transpose();
    }
    out
}

/// `ρ[s, t] = Σ E[a, b] B[b, s, b'] conj(A[a, t, a']) R[a', b']` with `A = B`.
fn site_rdm(left: &CMat, site: &SiteTensor, right: &CMat) -> CMat {
    let slices: Vec<CMat> = (0..site.phys)
        .map(|s| CMat::from_fn(site.left, site.right, |l, r| site.get(l, s, r)))
        .collect();
    // half[s] = E^T-side: Σ_b E[a,b] B_s[b,b'] -> (a, b')
    let half: Vec<CMat> = slices.iter().map(|b| left * b).collect();
    let mut rho = CMat::zeros(site.phys, site.phys);
    for s in 0..site.phys {
        let hr = &half[s] * right.transpose(); // (a, a')
        for t in 0..site.phys {
            let a_t = &slices[t];
            let mut acc = ZERO;
            for (x, y) in hr.iter().zip(a_t.iter()) {
                acc += x * y.conj();
            }
            rho[(s, t)] = acc;
        }
    }
    rho
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn vacuum() -> Vec<C64> {
        vec![c(1.0), c(0.0), c(0.0), c(0.0)]
    }

    #[test]
    fn truncation_keeps_tail_below_eps() {
        let t = Truncation::new(1e-3, 10);
        let sv = [0.9, 0.4, 0.03, 0.01];
        let (keep, w) = t.cut(&sv);
        assert_eq!(keep, 2);
        assert!((w - (0.03f64.powi(2) + 0.01f64.powi(2))).abs() < 1e-15);
    }

    #[test]
    fn truncation_respects_chi_max_and_floor() {
        let t = Truncation::new(0.0, 2);
        assert_eq!(t.cut(&[0.8, 0.5, 0.3]).0, 2);
        let exact = Truncation::EXACT;
        assert_eq!(exact.cut(&[1.0, 1e-15, 1e-16]).0, 1);
    }

    #[test]
    fn truncation_does_not_split_degenerate_pair() {
        let t = Truncation::new(0.3, 10);
        // 0.5^2 = 0.25 <= 0.3 would allow keeping one, but sv[0] == sv[1]
        let (keep, _) = t.cut(&[0.5, 0.5, 0.1]);
        assert_eq!(keep, 2);
    }

    #[test]
    fn empty_and_unnormalized_inputs_are_rejected() {
        assert!(matches!(MpsState::new_product_state(&[], &[]), Err(Error::Empty)));
        let bad = vec![c(1.0), c(1.0), c(0.0), c(0.0)];
        let err = MpsState::new_product_state(&[bad], &[SiteRole::Emitter]).unwrap_err();
        assert!(matches!(err, Error::Unnormalized { site: 0, .. }));
    }

    #[test]
    fn vacuum_state_has_no_excitation() {
        let roles = [SiteRole::Bin(0), SiteRole::Emitter, SiteRole::Bin(1)];
        let s = MpsState::new_product_state(&[vacuum(), vacuum(), vacuum()], &roles).unwrap();
        let occ = s.local_occupations();
        assert_eq!(occ.total_excitation(), 0.0);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
        let rho = s.qubit_rdm().unwrap();
        assert!((rho.0[(0, 0)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_occupied_bin() {
        let roles = [SiteRole::Emitter, SiteRole::Bin(0), SiteRole::Bin(1)];
        let occupied = vec![c(0.0), c(1.0), c(0.0), c(0.0)];
        let s = MpsState::new_product_state(&[vacuum(), occupied, vacuum()], &roles).unwrap();
        let occ = s.local_occupations();
        assert_eq!(occ.bins, vec![(0, 1.0, 0.0), (1, 0.0, 0.0)]);
        assert!((occ.total_excitation() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bell_emitter_with_vacuum_field() {
        let roles = [SiteRole::Bin(0), SiteRole::Emitter];
        let s = MpsState::new_product_state(&[vacuum(), bell_vector(1.0).to_vec()], &roles).unwrap();
        let rho = s.qubit_rdm().unwrap();
        assert!((rho.bell_plus() - 1.0).abs() < 1e-14);
        assert!(rho.bell_minus().abs() < 1e-14);
    }

    #[test]
    fn qubit_rdm_needs_an_emitter() {
        let s = MpsState::new_product_state(&[vacuum()], &[SiteRole::Bin(0)]).unwrap();
        assert!(matches!(s.qubit_rdm(), Err(Error::NoEmitter)));
    }

    #[test]
    fn non_unitary_gate_is_rejected() {
        let m = CMat::identity(16, 16) * c(1.01);
        assert!(matches!(LocalGate::new(m, 2), Err(Error::NonUnitary { .. })));
    }

    #[test]
    fn identity_gate_leaves_state_unchanged() {
        let roles = [SiteRole::Bin(0), SiteRole::Emitter, SiteRole::Bin(1)];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mixed = vec![c(h), c(0.0), c(h), c(0.0)];
        let mut s = MpsState::new_product_state(&[mixed.clone(), vacuum(), mixed], &roles).unwrap();
        let before = s.to_dense();
        let w = s.apply_gate(&LocalGate::identity(3), 0, Truncation::EXACT).unwrap();
        assert!(w < 1e-26);
        for (a, b) in before.iter().zip(s.to_dense()) {
            assert!((a - b).norm() < 1e-14);
        }
        assert_eq!(s.center(), 2);
    }

    #[test]
    fn gate_out_of_range() {
        let s0 = MpsState::new_product_state(&[vacuum(), vacuum()], &[SiteRole::Bin(0), SiteRole::Emitter])
            .unwrap();
        let mut s = s0.clone();
        assert!(matches!(
            s.apply_gate(&LocalGate::identity(3), 0, Truncation::EXACT),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(s.swap_sites(1, Truncation::EXACT), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn single_excitation_builder_matches_amplitudes() {
        let roles = [SiteRole::Bin(0), SiteRole::Emitter, SiteRole::Bin(1)];
        let a = [c(0.5), c(-0.5), C64::new(0.0, 0.5), c(0.5)];
        let amps = vec![
            vec![(photon::R, a[0])],
            vec![(emitter::EG, a[1])],
            vec![(photon::R, a[2]), (photon::L, a[3])],
        ];
        let s = MpsState::single_excitation(&amps, &roles).unwrap();
        let dense = s.to_dense();
        let idx = |i: usize, j: usize, k: usize| (i * 4 + j) * 4 + k;
        assert!((dense[idx(1, 0, 0)] - a[0]).norm() < 1e-14);
        assert!((dense[idx(0, 2, 0)] - a[1]).norm() < 1e-14);
        assert!((dense[idx(0, 0, 1)] - a[2]).norm() < 1e-14);
        assert!((dense[idx(0, 0, 2)] - a[3]).norm() < 1e-14);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-14);
        for (i, site) in s.sites().iter().enumerate().skip(1) {
            assert!(site.right_canonical_defect() < 1e-10, "site {i}");
        }
    }

    #[test]
    fn zero_amplitudes_are_rejected() {
        let roles = [SiteRole::Bin(0), SiteRole::Emitter];
        let amps = vec![vec![(photon::R, c(0.0))], vec![]];
        assert!(matches!(MpsState::single_excitation(&amps, &roles), Err(Error::ZeroNorm)));
    }
}
