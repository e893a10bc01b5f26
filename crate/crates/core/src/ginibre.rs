//! Ginibre sampling, Schur forms, resolvent traces and Monte Carlo estimators.
//!
//! Every sample draws from its own ChaCha stream keyed by `(seed, index)`, and
//! per-sample values are folded in index order, so results do not depend on
//! the number of worker threads.

use std::collections::BTreeMap;

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::analytic::{separation, PointConfig};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::permlat::{PartialPermutation, Vertex};

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Minimum distance between a spectral parameter and an eigenvalue of a triangular matrix.
pub const POLE_DISTANCE: f64 = 1e-10;
/// Relative eigenvalue gap below which an eigenbasis is refused.
pub const GAP_TOL: f64 = 1e-12;

/// A Ginibre draw together with its Schur form when one was computed.
#[derive(Clone, Debug)]
pub struct GinibreSample {
    pub n: usize,
    pub matrix: CMat,
    pub schur: Option<Schur>,
    pub eigenvalues: Vec<C>,
}

/// `M = U T U†` with `U` unitary and `T` upper triangular.
#[derive(Clone, Debug)]
pub struct Schur {
    pub u: CMat,
    pub t: CMat,
}

impl Schur {
    /// `‖U T U† − M‖_F / ‖M‖_F`.
    pub fn residual(&self, m: &CMat) -> f64 {
        let back = self.u.matmul(&self.t).matmul(&self.u.adjoint());
        back.sub(m).norm_fro() / m.norm_fro().max(f64::MIN_POSITIVE)
    }
}

/// The random stream for sample `index` under master seed `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Complex Gaussian with `E|x|² = var`.
fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C::new(s * re, s * im)
}

/// Dense Ginibre matrix: iid entries with variance `1/N`.
pub fn sample_ginibre_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let var = 1.0 / n as f64;
    CMat::from_fn(n, n, |_, _| complex_gaussian(rng, var))
}

/// Dense Ginibre matrix with its Schur form.
pub fn sample_ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<GinibreSample> {
    if n == 0 {
        return Err(Error::Invalid("N must be at least 1".into()));
    }
    let matrix = sample_ginibre_matrix(n, rng);
    let s = schur(&matrix)?;
    let eigenvalues = s.t.diag();
    Ok(GinibreSample { n, matrix, schur: Some(s), eigenvalues })
}

/// Upper Hessenberg matrix unitarily similar in law to a Ginibre matrix:
/// entries on and above the diagonal are iid with variance `1/N`, and the
/// subdiagonal entry of column `k` is `sqrt(Gamma(N−k−1, 1/N))`, the norm of
/// the column that Householder reduction folds into it.
pub fn sample_hessenberg<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let var = 1.0 / n as f64;
    let mut h = CMat::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            h[(i, j)] = complex_gaussian(rng, var);
        }
        if j + 1 < n {
            let shape = (n - j - 1) as f64;
            let g = Gamma::new(shape, var).expect("positive shape and scale");
            h[(j + 1, j)] = C::new(g.sample(rng).sqrt(), 0.0);
        }
    }
    h
}

/// Upper triangular `T` with prescribed diagonal and iid strictly-upper
/// entries of variance `1/N`.
pub fn sample_triangular_fixed_diag<R: Rng + ?Sized>(lambdas: &[C], rng: &mut R) -> GinibreSample {
    let n = lambdas.len();
    let var = 1.0 / n.max(1) as f64;
    let mut t = CMat::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            t[(i, j)] = complex_gaussian(rng, var);
        }
        t[(j, j)] = lambdas[j];
    }
    GinibreSample {
        n,
        matrix: t.clone(),
        schur: Some(Schur { u: CMat::identity(n), t }),
        eigenvalues: lambdas.to_vec(),
    }
}

/// Householder reduction `M = Q H Q†` to upper Hessenberg form. `Q` is
/// accumulated only when requested.
pub fn hessenberg(m: &CMat, want_q: bool) -> (Option<CMat>, CMat) {
    let n = m.rows();
    let mut h = m.clone();
    let mut q = want_q.then(|| CMat::identity(n));
    for k in 0..n.saturating_sub(2) {
        let mut v: Vec<C> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let phase = if v[0].norm() > 0.0 { v[0] / v[0].norm() } else { ONE };
        let alpha = -phase * norm;
        v[0] -= alpha;
        let vn = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for x in v.iter_mut() {
            *x /= vn;
        }
        // rows: H ← (I − 2vv†) H
        for j in k..n {
            let dot: C = v.iter().enumerate().map(|(a, x)| x.conj() * h[(k + 1 + a, j)]).sum();
            for (a, x) in v.iter().enumerate() {
                h[(k + 1 + a, j)] -= 2.0 * x * dot;
            }
        }
        // columns: H ← H (I − 2vv†)
        apply_reflector_right(&mut h, &v, k + 1);
        if let Some(q) = q.as_mut() {
            apply_reflector_right(q, &v, k + 1);
        }
        h[(k + 1, k)] = alpha;
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
    (q, h)
}

fn apply_reflector_right(a: &mut CMat, v: &[C], offset: usize) {
    for i in 0..a.rows() {
        let dot: C = v.iter().enumerate().map(|(b, x)| a[(i, offset + b)] * x).sum();
        for (b, x) in v.iter().enumerate() {
            a[(i, offset + b)] -= 2.0 * dot * x.conj();
        }
    }
}

fn givens(a: C, b: C) -> (f64, C) {
    if b == ZERO {
        return (1.0, ZERO);
    }
    if a == ZERO {
        return (0.0, ONE);
    }
    let r = a.norm().hypot(b.norm());
    (a.norm() / r, (a / a.norm()) * b.conj() / r)
}

/// Shifted QR iteration on an upper Hessenberg matrix, in place. With
/// `want_t` the full triangular factor is formed; otherwise only the
/// diagonal is meaningful. Rotations are accumulated into `z` when given.
/// Returns the eigenvalues in diagonal order.
pub fn hessenberg_qr(h: &mut CMat, want_t: bool, mut z: Option<&mut CMat>) -> Result<Vec<C>> {
    let n = h.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let norm = h.max_abs().max(f64::MIN_POSITIVE);
    let max_iter = 30 * n.max(10);
    let mut total = 0usize;
    let mut iter = 0usize;
    let mut hi = n - 1;
    let mut rots: Vec<(f64, C)> = Vec::with_capacity(n);
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let mut s = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].norm() <= f64::EPSILON * s {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if iter > max_iter {
            return Err(Error::NonConvergence(total));
        }
        let mu = if iter.is_multiple_of(11) {
            h[(hi, hi)] + 0.75 * h[(hi, hi - 1)].norm()
        } else {
            let (a, b, c, d) = (h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)]);
            let m = (a + d) * 0.5;
            let disc = ((a - d) * (a - d) * 0.25 + b * c).sqrt();
            let (e1, e2) = (m + disc, m - disc);
            if (e1 - d).norm() <= (e2 - d).norm() { e1 } else { e2 }
        };
        let col_end = if want_t { n } else { hi + 1 };
        let row_start = if want_t { 0 } else { l };
        for k in l..=hi {
            h[(k, k)] -= mu;
        }
        rots.clear();
        for k in l..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..col_end {
                let (x, y) = (h[(k, j)], h[(k + 1, j)]);
                h[(k, j)] = c * x + s * y;
                h[(k + 1, j)] = c * y - s.conj() * x;
            }
            h[(k + 1, k)] = ZERO;
            rots.push((c, s));
        }
        for (idx, k) in (l..hi).enumerate() {
            let (c, s) = rots[idx];
            for i in row_start..=(k + 1).min(hi) {
                let (x, y) = (h[(i, k)], h[(i, k + 1)]);
                h[(i, k)] = c * x + s.conj() * y;
                h[(i, k + 1)] = c * y - s * x;
            }
            if let Some(z) = z.as_deref_mut() {
                for i in 0..n {
                    let (x, y) = (z[(i, k)], z[(i, k + 1)]);
                    z[(i, k)] = c * x + s.conj() * y;
                    z[(i, k + 1)] = c * y - s * x;
                }
            }
        }
        for k in l..=hi {
            h[(k, k)] += mu;
        }
    }
    Ok(h.diag())
}

/// Complex Schur decomposition of a square matrix.
pub fn schur(m: &CMat) -> Result<Schur> {
    if !m.is_square() {
        return Err(Error::Invalid("Schur form needs a square matrix".into()));
    }
    if m.as_slice().iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::Invalid("non-finite matrix entry".into()));
    }
    let (q, mut t) = hessenberg(m, true);
    let mut u = q.expect("Q requested");
    hessenberg_qr(&mut t, true, Some(&mut u))?;
    for j in 0..t.cols() {
        for i in j + 1..t.rows() {
            t[(i, j)] = ZERO;
        }
    }
    Ok(Schur { u, t })
}

/// Eigenvalues of an upper Hessenberg matrix without forming `T`.
pub fn hessenberg_eigenvalues(h: &CMat) -> Result<Vec<C>> {
    let mut work = h.clone();
    hessenberg_qr(&mut work, false, None)
}

/// LU factorisation of `H − x` for upper Hessenberg `H`, pivoting between
/// neighbouring rows. Triangular input needs no pivoting.
#[derive(Clone, Debug)]
pub struct HessenbergLu {
    u: CMat,
    mult: Vec<C>,
    swap: Vec<bool>,
    min_pivot: f64,
}

impl HessenbergLu {
    /// Factorises `H − x`. A zero pivot is replaced by `floor` when given.
    pub fn new(h: &CMat, x: C, floor: Option<f64>) -> Self {
        let n = h.rows();
        let mut u = h.clone();
        for k in 0..n {
            u[(k, k)] -= x;
        }
        let mut mult = vec![ZERO; n.saturating_sub(1)];
        let mut swap = vec![false; n.saturating_sub(1)];
        for k in 0..n.saturating_sub(1) {
            if u[(k + 1, k)].norm() > u[(k, k)].norm() {
                swap[k] = true;
                for j in k..n {
                    let t = u[(k, j)];
                    u[(k, j)] = u[(k + 1, j)];
                    u[(k + 1, j)] = t;
                }
            }
            if u[(k, k)] == ZERO {
                if let Some(f) = floor {
                    u[(k, k)] = C::new(f, 0.0);
                }
            }
            if u[(k + 1, k)] != ZERO && u[(k, k)] != ZERO {
                let m = u[(k + 1, k)] / u[(k, k)];
                mult[k] = m;
                for j in k + 1..n {
                    let t = u[(k, j)];
                    u[(k + 1, j)] -= m * t;
                }
            }
            u[(k + 1, k)] = ZERO;
        }
        if n > 0 && u[(n - 1, n - 1)] == ZERO {
            if let Some(f) = floor {
                u[(n - 1, n - 1)] = C::new(f, 0.0);
            }
        }
        let min_pivot = (0..n).map(|k| u[(k, k)].norm()).fold(f64::INFINITY, f64::min);
        Self { u, mult, swap, min_pivot }
    }

    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    /// Overwrites `b` with `(H − x)⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [C]) {
        let n = b.len();
        for k in 0..n.saturating_sub(1) {
            if self.swap[k] {
                b.swap(k, k + 1);
            }
            let t = b[k];
            b[k + 1] -= self.mult[k] * t;
        }
        self.back_substitute(b);
    }

    fn back_substitute(&self, b: &mut [C]) {
        for j in (0..b.len()).rev() {
            b[j] /= self.u[(j, j)];
            let x = b[j];
            if x == ZERO {
                continue;
            }
            for (i, bi) in b.iter_mut().enumerate().take(j) {
                *bi -= self.u[(i, j)] * x;
            }
        }
    }

    /// Overwrites the row vector `b` with `b (H − x)⁻¹`.
    pub fn solve_row_in_place(&self, b: &mut [C]) {
        let n = b.len();
        for j in 0..n {
            let mut s = b[j];
            for i in 0..j {
                s -= b[i] * self.u[(i, j)];
            }
            b[j] = s / self.u[(j, j)];
        }
        for k in (0..n.saturating_sub(1)).rev() {
            let t = b[k + 1];
            b[k] -= self.mult[k] * t;
            if self.swap[k] {
                b.swap(k, k + 1);
            }
        }
    }

    /// `(H − x)⁻¹` column by column.
    pub fn inverse(&self) -> CMat {
        let n = self.u.rows();
        let mut out = CMat::zeros(n, n);
        for j in 0..n {
            let col = out.col_mut(j);
            col[j] = ONE;
            // the forward sweep only touches rows ≥ j − 1
            for k in j.saturating_sub(1)..n.saturating_sub(1) {
                if self.swap[k] {
                    col.swap(k, k + 1);
                }
                let t = col[k];
                col[k + 1] -= self.mult[k] * t;
            }
            self.back_substitute(col);
        }
        out
    }
}

fn is_upper_hessenberg(h: &CMat) -> bool {
    (0..h.cols()).all(|j| (j + 2..h.rows()).all(|i| h[(i, j)] == ZERO))
}

fn is_upper_triangular(h: &CMat) -> bool {
    (0..h.cols()).all(|j| (j + 1..h.rows()).all(|i| h[(i, j)] == ZERO))
}

/// `R(x) = (H − x)⁻¹` for upper Hessenberg `H`. For triangular `H` the
/// distance from `x` to the diagonal is checked against [`POLE_DISTANCE`];
/// otherwise a pivot below `1e-14‖H‖` is reported.
pub fn resolvent(h: &CMat, x: C) -> Result<CMat> {
    if !is_upper_hessenberg(h) {
        return Err(Error::Invalid("resolvent needs an upper Hessenberg matrix".into()));
    }
    if is_upper_triangular(h) {
        let d = h.diag().iter().map(|l| (l - x).norm()).fold(f64::INFINITY, f64::min);
        if d < POLE_DISTANCE {
            return Err(Error::ResolventPole(d));
        }
    }
    let lu = HessenbergLu::new(h, x, None);
    let scale = h.max_abs().max(x.norm()).max(1.0);
    if lu.min_pivot() < 1e-14 * scale {
        return Err(Error::ResolventPole(lu.min_pivot()));
    }
    Ok(lu.inverse())
}

/// `∏_cycles Tr ∏_{α∈cycle} R(z_α)† R(w_α)` for a resolvent supplier.
fn product_trace(
    sigma: &PartialPermutation,
    pts: &PointConfig,
    res: &dyn Fn(C) -> Result<CMat>,
) -> Result<C> {
    pts.require(sigma.vertices())?;
    let mut total = ONE;
    for cycle in sigma.cycles() {
        let factors: Vec<(CMat, CMat)> =
            cycle.iter().map(|&a| Ok((res(pts.z(a))?, res(pts.w(a))?))).collect::<Result<_>>()?;
        let tr: C = if let [(rz, rw)] = factors.as_slice() {
            rz.as_slice().iter().zip(rw.as_slice()).map(|(a, b)| a.conj() * b).sum()
        } else {
            let mut p: Option<CMat> = None;
            for (rz, rw) in &factors {
                let step = rz.adjoint().matmul(rw);
                p = Some(match p {
                    None => step,
                    Some(acc) => acc.matmul(&step),
                });
            }
            p.expect("nonempty cycle").diag().iter().sum()
        };
        total *= tr;
    }
    Ok(total)
}

/// `F_N(σ; z, w)` from an upper Hessenberg (typically triangular) matrix.
pub fn resolvent_product_trace(h: &CMat, sigma: &PartialPermutation, pts: &PointConfig) -> Result<C> {
    product_trace(sigma, pts, &|x| resolvent(h, x))
}

/// Biorthogonal eigenvectors: columns of `r`, rows of `l`, `l r = I`.
#[derive(Clone, Debug)]
pub struct EigenBasis {
    pub r: CMat,
    pub l: CMat,
    pub eigenvalues: Vec<C>,
}

impl EigenBasis {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `‖L R − I‖_max`.
    pub fn biorthogonality_residual(&self) -> f64 {
        self.l.matmul(&self.r).sub(&CMat::identity(self.len())).max_abs()
    }

    /// `max_i ‖M r_i − λ_i r_i‖ / ‖r_i‖`.
    pub fn eigen_residual(&self, m: &CMat) -> f64 {
        let mr = m.matmul(&self.r);
        (0..self.len())
            .map(|i| {
                let col = self.r.col(i);
                let num = mr.col(i).iter().zip(col).map(|(a, b)| (a - self.eigenvalues[i] * b).norm_sqr()).sum::<f64>();
                let den = col.iter().map(|b| b.norm_sqr()).sum::<f64>();
                (num / den).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `Tr(Q_i† Q_i) = ‖l_i‖² ‖r_i‖²`.
    pub fn diagonal_overlap(&self, i: usize) -> f64 {
        let rn: f64 = self.r.col(i).iter().map(|x| x.norm_sqr()).sum();
        let ln: f64 = (0..self.len()).map(|k| self.l[(i, k)].norm_sqr()).sum();
        rn * ln
    }

    /// `R(x) = Σ_i r_i l_i / (λ_i − x)`.
    pub fn resolvent(&self, x: C) -> Result<CMat> {
        let d = self.eigenvalues.iter().map(|l| (l - x).norm()).fold(f64::INFINITY, f64::min);
        if d < POLE_DISTANCE {
            return Err(Error::ResolventPole(d));
        }
        let inv: Vec<C> = self.eigenvalues.iter().map(|l| (l - x).inv()).collect();
        Ok(self.r.matmul(&CMat::from_diag(&inv)).matmul(&self.l))
    }

    /// `F_N(σ; z, w)` through the spectral decomposition of the resolvent.
    pub fn resolvent_product_trace(&self, sigma: &PartialPermutation, pts: &PointConfig) -> Result<C> {
        product_trace(sigma, pts, &|x| self.resolvent(x))
    }
}

/// Right eigenvectors of an upper triangular `T` by back substitution, with
/// unit entry at the eigenvalue's own position.
fn triangular_right_vectors(t: &CMat) -> Result<CMat> {
    let n = t.rows();
    let scale = t.max_abs().max(f64::MIN_POSITIVE);
    let mut r = CMat::zeros(n, n);
    for i in 0..n {
        let lam = t[(i, i)];
        let col = r.col_mut(i);
        col[i] = ONE;
        for k in (0..i).rev() {
            let gap = t[(k, k)] - lam;
            if gap.norm() < GAP_TOL * scale {
                return Err(Error::NearDefective(gap.norm()));
            }
            let s: C = (k + 1..=i).map(|j| t[(k, j)] * col[j]).sum();
            col[k] = -s / gap;
        }
    }
    Ok(r)
}

/// Right eigenvectors from the Schur form rotated by `U`, and `L = R⁻¹`.
pub fn eigenbasis(sample: &GinibreSample) -> Result<EigenBasis> {
    let owned;
    let s = match &sample.schur {
        Some(s) => s,
        None => {
            owned = schur(&sample.matrix)?;
            &owned
        }
    };
    let r = s.u.matmul(&triangular_right_vectors(&s.t)?);
    let l = r.inverse()?;
    Ok(EigenBasis { r, l, eigenvalues: s.t.diag() })
}

/// `∏_{j∈𝒱(σ)} (l_{J_{σ⁻¹(j)}} · l_{I_j}†)(r_{I_j}† · r_{J_j})`.
pub fn overlap_trace(
    basis: &EigenBasis,
    i_tuple: &BTreeMap<Vertex, usize>,
    j_tuple: &BTreeMap<Vertex, usize>,
    sigma: &PartialPermutation,
) -> Result<C> {
    let n = basis.len();
    let look = |t: &BTreeMap<Vertex, usize>, v: Vertex| -> Result<usize> {
        match t.get(&v) {
            Some(&k) if k < n => Ok(k),
            Some(&k) => Err(Error::Invalid(format!("index {k} out of range for N = {n}"))),
            None => Err(Error::SupportMismatch(format!("index tuple misses vertex {v}"))),
        }
    };
    let inv = sigma.inverse();
    let mut out = ONE;
    for j in sigma.vertices() {
        let a = look(j_tuple, inv.apply_or_fix(j))?;
        let b = look(i_tuple, j)?;
        let c = look(j_tuple, j)?;
        let ll: C = (0..n).map(|k| basis.l[(a, k)] * basis.l[(b, k)].conj()).sum();
        let rr: C = basis.r.col(b).iter().zip(basis.r.col(c)).map(|(x, y)| x.conj() * y).sum();
        out *= ll * rr;
    }
    Ok(out)
}

/// Right and left eigenvectors of upper Hessenberg `H` for a computed
/// eigenvalue, by inverse iteration, normalised so that `l · r = 1`.
pub fn window_eigenvectors(h: &CMat, lambda: C) -> (Vec<C>, Vec<C>) {
    let n = h.rows();
    let floor = f64::EPSILON * h.max_abs().max(f64::MIN_POSITIVE);
    let lu = HessenbergLu::new(h, lambda, Some(floor));
    let normalise = |x: &mut Vec<C>| {
        let s = x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if s > 0.0 && s.is_finite() {
            for a in x.iter_mut() {
                *a /= s;
            }
        }
    };
    let start = C::new(1.0 / (n as f64).sqrt(), 0.0);
    let mut r = vec![start; n];
    let mut l = vec![start; n];
    for _ in 0..3 {
        lu.solve_in_place(&mut r);
        normalise(&mut r);
        lu.solve_row_in_place(&mut l);
        normalise(&mut l);
    }
    let dot: C = l.iter().zip(&r).map(|(a, b)| a * b).sum();
    for a in l.iter_mut() {
        *a /= dot;
    }
    (r, l)
}

/// Streaming mean and variance of a complex observable.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MCAccumulator {
    pub count: u64,
    pub mean: C,
    /// Sum of `|x − mean|²`.
    pub m2: f64,
}

impl MCAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: C) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += (d.conj() * (x - self.mean)).re;
    }

    /// Chan's pairwise merge.
    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = self.count + other.count;
        let (na, nb) = (self.count as f64, other.count as f64);
        let d = other.mean - self.mean;
        Self {
            count: n,
            mean: self.mean + d * (nb / n as f64),
            m2: self.m2 + other.m2 + d.norm_sqr() * na * nb / n as f64,
        }
    }

    /// Sample variance `E|x − mean|²` with the `n − 1` denominator.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    /// `|mean − target| / stderr`, infinite when the error is nonzero but the stderr vanishes.
    pub fn sigmas(&self, target: C) -> f64 {
        let e = (self.mean - target).norm();
        let s = self.stderr();
        if s > 0.0 {
            e / s
        } else if e == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

impl FromIterator<C> for MCAccumulator {
    fn from_iter<I: IntoIterator<Item = C>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// How matrices are drawn for the Monte Carlo estimators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Sampler {
    /// Dense Ginibre matrix, reduced to Hessenberg form.
    Dense,
    /// Hessenberg matrix drawn directly from its law.
    #[default]
    Hessenberg,
}

/// Monte Carlo run parameters.
#[derive(Clone, Debug)]
pub struct MCConfig {
    pub n: usize,
    pub samples: u64,
    pub seed: u64,
    pub eps: f64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub sampler: Sampler,
}

impl MCConfig {
    pub fn new(n: usize, samples: u64, seed: u64) -> Self {
        Self { n, samples, seed, eps: 0.0, threads: None, sampler: Sampler::default() }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_sampler(mut self, sampler: Sampler) -> Self {
        self.sampler = sampler;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Invalid("N must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Invalid("thread count must be positive".into()));
        }
        Ok(())
    }

    /// Upper Hessenberg matrix for sample `index`.
    pub fn draw(&self, index: u64) -> CMat {
        let mut rng = substream(self.seed, index);
        match self.sampler {
            Sampler::Hessenberg => sample_hessenberg(self.n, &mut rng),
            Sampler::Dense => hessenberg(&sample_ginibre_matrix(self.n, &mut rng), false).1,
        }
    }
}

const CHUNK: u64 = 512;
/// Every `SPOT_EVERY`-th sample is re-checked by an independent route.
const SPOT_EVERY: u64 = 100;

/// Evaluates `f` on every sample index and folds the results in index order.
fn run_samples<T, F, G>(samples: u64, threads: Option<usize>, f: F, mut fold: G) -> Result<()>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
    G: FnMut(T),
{
    let pool = match threads {
        Some(k) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?,
        ),
        None => None,
    };
    let mut start = 0;
    while start < samples {
        let end = (start + CHUNK).min(samples);
        let work = || (start..end).into_par_iter().map(&f).collect::<Vec<Result<T>>>();
        let chunk = match &pool {
            Some(p) => p.install(work),
            None => work(),
        };
        for r in chunk {
            fold(r?);
        }
        start = end;
    }
    Ok(())
}

/// Schur reconstruction and trace agreement for a spot-checked sample.
fn spot_check_trace(h: &CMat, sigma: &PartialPermutation, pts: &PointConfig, value: C) -> Result<()> {
    let s = schur(h)?;
    let res = s.residual(h);
    if res > 1e-10 {
        return Err(Error::SpotCheck(format!("Schur residual {res:e}")));
    }
    let sample = GinibreSample { n: h.rows(), matrix: h.clone(), eigenvalues: s.t.diag(), schur: Some(s) };
    let basis = eigenbasis(&sample)?;
    let bio = basis.biorthogonality_residual();
    if bio > 1e-8 {
        return Err(Error::SpotCheck(format!("biorthogonality residual {bio:e}")));
    }
    let other = basis.resolvent_product_trace(sigma, pts)?;
    if (other - value).norm() > 1e-6 * value.norm().max(1.0) {
        return Err(Error::SpotCheck(format!("F_N routes differ: {value} vs {other}")));
    }
    Ok(())
}

/// Monte Carlo estimate of `E[N^{−|σ|} F_N(σ; z, w)]`.
pub fn mc_f_n(cfg: &MCConfig, sigma: &PartialPermutation, pts: &PointConfig) -> Result<MCAccumulator> {
    cfg.validate()?;
    pts.require(sigma.vertices())?;
    let sep = separation(&pts.restrict(&sigma.support())?);
    if !sigma.is_empty() && !sep.ok_macroscopic {
        return Err(Error::DegenerateConfig("points are not macroscopically separated".into()));
    }
    let norm = (cfg.n as f64).powi(-(sigma.cycle_count() as i32));
    let mut acc = MCAccumulator::new();
    run_samples(
        cfg.samples,
        cfg.threads,
        |k| {
            if sigma.is_empty() {
                return Ok(ONE);
            }
            let h = cfg.draw(k);
            let f = resolvent_product_trace(&h, sigma, pts)?;
            if k % SPOT_EVERY == 0 {
                spot_check_trace(&h, sigma, pts, f)?;
            }
            Ok(f * norm)
        },
        |x| acc.push(x),
    )?;
    Ok(acc)
}

/// Monte Carlo mean of `F_N(σ)` over triangular matrices with fixed diagonal.
pub fn mc_conditional_transfer(
    lambdas: &[C],
    sigma: &PartialPermutation,
    pts: &PointConfig,
    samples: u64,
    seed: u64,
    threads: Option<usize>,
) -> Result<MCAccumulator> {
    if lambdas.is_empty() {
        return Err(Error::Invalid("need at least one eigenvalue".into()));
    }
    pts.require(sigma.vertices())?;
    let mut acc = MCAccumulator::new();
    run_samples(
        samples,
        threads,
        |k| {
            let t = sample_triangular_fixed_diag(lambdas, &mut substream(seed, k)).matrix;
            resolvent_product_trace(&t, sigma, pts)
        },
        |x| acc.push(x),
    )?;
    Ok(acc)
}

/// An eigenvalue with its right and left eigenvectors.
type EigenTriple = (C, Vec<C>, Vec<C>);

/// Eigenvalues of `H` with eigenvectors for those selected by `keep`,
/// spot-checking the eigen-equation on every `SPOT_EVERY`-th sample.
fn windowed_vectors(
    h: &CMat,
    index: u64,
    keep: impl Fn(C) -> bool,
) -> Result<Vec<EigenTriple>> {
    let lams = hessenberg_eigenvalues(h)?;
    let out: Vec<(C, Vec<C>, Vec<C>)> = lams
        .into_iter()
        .filter(|&l| keep(l))
        .map(|l| {
            let (r, lv) = window_eigenvectors(h, l);
            (l, r, lv)
        })
        .collect();
    if index.is_multiple_of(SPOT_EVERY) {
        let scale = h.max_abs().max(1.0);
        for (l, r, lv) in &out {
            let hr = h.matvec(r);
            let res = hr.iter().zip(r).map(|(a, b)| (a - l * b).norm_sqr()).sum::<f64>().sqrt();
            let row = CMat::from_rows(std::slice::from_ref(lv)).matmul(h);
            let lres = (0..h.cols()).map(|k| (row[(0, k)] - l * lv[k]).norm_sqr()).sum::<f64>().sqrt();
            let lnorm = lv.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if res > 1e-8 * scale || lres > 1e-8 * scale * lnorm {
                return Err(Error::SpotCheck(format!("eigenvector residuals {res:e}, {lres:e}")));
            }
        }
    }
    Ok(out)
}

/// The window estimator `ε^{−4|𝒱(σ)|} N^{−|σ|} Σ_{I,J} φ_ε φ_ε ∏_j (l·l†)(r†·r)`
/// with disc windows `|u_j − λ_{I_j}| < ε`, `|v_j − λ_{J_j}| < ε`.
pub fn estimate_rho_hat(cfg: &MCConfig, sigma: &PartialPermutation, pts: &PointConfig) -> Result<MCAccumulator> {
    cfg.validate()?;
    if sigma.is_empty() {
        return Err(Error::Invalid("the window estimator needs a nonempty permutation".into()));
    }
    let local = pts.restrict(&sigma.support())?;
    let half = separation(&local).dist_macro / 2.0;
    if !(cfg.eps > 0.0 && cfg.eps < half) {
        return Err(Error::WindowOverlap { eps: cfg.eps, half_dist: half });
    }
    let verts: Vec<Vertex> = sigma.vertices().collect();
    let inv = sigma.inverse();
    let ell = verts.len() as i32;
    let norm = cfg.eps.powi(-4 * ell) * (cfg.n as f64).powi(-(sigma.cycle_count() as i32));
    let centres: Vec<C> = verts.iter().flat_map(|&v| [local.u(v), local.v(v)]).collect();
    let mut acc = MCAccumulator::new();
    run_samples(
        cfg.samples,
        cfg.threads,
        |k| {
            let h = cfg.draw(k);
            let found = windowed_vectors(&h, k, |l| centres.iter().any(|c| (c - l).norm() < cfg.eps))?;
            let near = |c: C| -> Vec<usize> {
                (0..found.len()).filter(|&i| (found[i].0 - c).norm() < cfg.eps).collect()
            };
            let cand_i: Vec<Vec<usize>> = verts.iter().map(|&v| near(local.u(v))).collect();
            let cand_j: Vec<Vec<usize>> = verts.iter().map(|&v| near(local.v(v))).collect();
            if cand_i.iter().chain(&cand_j).any(|c| c.is_empty()) {
                return Ok(ZERO);
            }
            let pos: BTreeMap<Vertex, usize> = verts.iter().enumerate().map(|(p, &v)| (v, p)).collect();
            let lists: Vec<&Vec<usize>> = cand_i.iter().chain(&cand_j).collect();
            let mut choice = vec![0usize; lists.len()];
            let m = verts.len();
            let mut total = ZERO;
            loop {
                let mut term = ONE;
                for (p, &j) in verts.iter().enumerate() {
                    let (_, r_i, l_i) = &found[lists[p][choice[p]]];
                    let jp = pos[&inv.apply_or_fix(j)];
                    let (_, _, l_a) = &found[lists[m + jp][choice[m + jp]]];
                    let (_, r_j, _) = &found[lists[m + p][choice[m + p]]];
                    let ll: C = l_a.iter().zip(l_i).map(|(a, b)| a * b.conj()).sum();
                    let rr: C = r_i.iter().zip(r_j).map(|(a, b)| a.conj() * b).sum();
                    term *= ll * rr;
                }
                total += term;
                let mut d = 0;
                loop {
                    if d == lists.len() {
                        return Ok(total * norm);
                    }
                    choice[d] += 1;
                    if choice[d] < lists[d].len() {
                        break;
                    }
                    choice[d] = 0;
                    d += 1;
                }
            }
        },
        |x| acc.push(x),
    )?;
    Ok(acc)
}

/// Mean of `Tr(Q_i† Q_i)/N` over eigenvalues in `|λ − centre| < ε`, one
/// accumulator per centre, all centres sharing the same samples.
pub fn estimate_diag_overlaps(cfg: &MCConfig, centres: &[C]) -> Result<Vec<MCAccumulator>> {
    cfg.validate()?;
    for c in centres {
        if !(cfg.eps > 0.0 && c.norm() + cfg.eps < 1.0) {
            return Err(Error::Invalid(format!("window of radius {} at {c} leaves the unit disc", cfg.eps)));
        }
    }
    let n = cfg.n as f64;
    let mut accs = vec![MCAccumulator::new(); centres.len()];
    run_samples(
        cfg.samples,
        cfg.threads,
        |k| {
            let h = cfg.draw(k);
            let found = windowed_vectors(&h, k, |l| centres.iter().any(|c| (c - l).norm() < cfg.eps))?;
            Ok(centres
                .iter()
                .map(|c| {
                    found
                        .iter()
                        .filter(|(l, _, _)| (l - c).norm() < cfg.eps)
                        .map(|(_, r, lv)| {
                            let rn: f64 = r.iter().map(|a| a.norm_sqr()).sum();
                            let ln: f64 = lv.iter().map(|a| a.norm_sqr()).sum();
                            rn * ln / n
                        })
                        .collect::<Vec<f64>>()
                })
                .collect::<Vec<_>>())
        },
        |per_centre| {
            for (acc, vals) in accs.iter_mut().zip(per_centre) {
                for v in vals {
                    acc.push(C::new(v, 0.0));
                }
            }
        },
    )?;
    Ok(accs)
}

/// Single-centre form of [`estimate_diag_overlaps`].
pub fn estimate_diag_overlap(cfg: &MCConfig, centre: C) -> Result<MCAccumulator> {
    Ok(estimate_diag_overlaps(cfg, &[centre])?[0])
}
