//! The lattice matrix `𝔑`, its left/right eigenvectors by forward
//! substitution along the lattice order, matrix exponentials, the finite-N
//! transfer matrices `A^λ`, `B^λ`, and the disintegrated matrices `𝔐^ν`.

use std::collections::BTreeMap;

use num_complex::Complex64 as C;

use crate::analytic::{frak_h_with, frak_n_vertices, frak_n_with, h, PointConfig};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::permlat::{relabel_to_prefix, shared_index, OrderedIndex, PartialPermutation, Vertex};

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Relative threshold below which two comparable diagonal entries count as equal.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// `𝔑_ℓ` over an ordered lattice index.
#[derive(Clone, Debug)]
pub struct NMatrix<'a> {
    pub index: &'a OrderedIndex,
    pub pts: PointConfig,
    pub entries: CMat,
    pub diag: Vec<C>,
}

/// `L[σ][τ] = 𝔩_σ(τ)` and `R[σ][τ] = 𝔯_τ(σ)`.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub l: CMat,
    pub r: CMat,
    pub diag: Vec<C>,
}

fn check_points(index: &OrderedIndex, pts: &PointConfig) -> Result<()> {
    let ell = index.ell() as Vertex;
    pts.require(1..=ell)?;
    for a in 1..=ell {
        for b in a + 1..=ell {
            if pts.w(a) == pts.w(b) || pts.z(a) == pts.z(b) {
                return Err(Error::DegenerateConfig(format!(
                    "vertices {a} and {b} share a spectral parameter"
                )));
            }
        }
    }
    Ok(())
}

/// `h(z_β, w_α)` for all vertex pairs of `[ℓ]`, computed once.
fn h_table(ell: usize, pts: &PointConfig) -> Result<Vec<C>> {
    let mut table = vec![ZERO; ell * ell];
    for b in 1..=ell {
        for a in 1..=ell {
            table[(b - 1) * ell + (a - 1)] = h(pts.z(b as Vertex), pts.w(a as Vertex))?;
        }
    }
    Ok(table)
}

pub fn build_nmatrix<'a>(index: &'a OrderedIndex, pts: &PointConfig) -> Result<NMatrix<'a>> {
    check_points(index, pts)?;
    let ell = index.ell();
    let table = h_table(ell, pts)?;
    let lookup = |b: Vertex, a: Vertex| Ok(table[(b as usize - 1) * ell + (a as usize - 1)]);
    build_nmatrix_with(index, pts, &lookup)
}

/// `𝔑` with every `h(z_β, w_α)` replaced by `table(β, α)`; the rational
/// partial-fraction coefficients still come from `pts`.
pub fn build_nmatrix_with<'a>(
    index: &'a OrderedIndex,
    pts: &PointConfig,
    table: &dyn Fn(Vertex, Vertex) -> Result<C>,
) -> Result<NMatrix<'a>> {
    pts.require(1..=index.ell() as Vertex)?;
    let n = index.len();
    let mut entries = CMat::zeros(n, n);
    let mut diag = Vec::with_capacity(n);
    for j in 0..n {
        let tau = index.element(j);
        let d = frak_h_with(tau, table)?;
        entries[(j, j)] = d;
        diag.push(d);
        for &i in index.preds(j) {
            entries[(i, j)] = frak_n_with(index.element(i), tau, pts, table)?;
        }
    }
    Ok(NMatrix { index, pts: pts.clone(), entries, diag })
}

fn degeneracy_tol(diag: &[C]) -> f64 {
    DEGENERACY_TOL * diag.iter().fold(0.0f64, |m, d| m.max(d.norm()))
}

fn gap(diag: &[C], a: usize, b: usize, tol: f64) -> Result<C> {
    let g = diag[a] - diag[b];
    if g.norm() < tol {
        return Err(Error::DegenerateSpectrum { gap: g.norm(), tol });
    }
    Ok(g)
}

/// Left eigenvectors: `(𝔥_σ − 𝔥_τ) 𝔩_σ(τ) = Σ_{σ⊴π≺τ} 𝔩_σ(π) 𝔑_{π,τ}` with `𝔩_σ(σ) = 1`.
pub fn solve_left_eigenvectors(nm: &NMatrix) -> Result<CMat> {
    let index = nm.index;
    let n = index.len();
    let tol = degeneracy_tol(&nm.diag);
    let mut l = CMat::zeros(n, n);
    let mut row = vec![ZERO; n];
    for s in 0..n {
        row.iter_mut().for_each(|x| *x = ZERO);
        row[s] = ONE;
        for t in s + 1..n {
            if !index.leq(s, t) {
                continue;
            }
            let mut acc = ZERO;
            for &p in index.preds(t) {
                if p >= s && row[p] != ZERO {
                    acc += row[p] * nm.entries[(p, t)];
                }
            }
            row[t] = acc / gap(&nm.diag, s, t, tol)?;
        }
        for t in s..n {
            l[(s, t)] = row[t];
        }
    }
    Ok(l)
}

/// Right eigenvectors: `(𝔥_τ − 𝔥_σ) 𝔯_τ(σ) = Σ_{σ≺π⊴τ} 𝔑_{σ,π} 𝔯_τ(π)` with `𝔯_τ(τ) = 1`.
pub fn solve_right_eigenvectors(nm: &NMatrix) -> Result<CMat> {
    let index = nm.index;
    let n = index.len();
    let tol = degeneracy_tol(&nm.diag);
    let mut r = CMat::zeros(n, n);
    for t in 0..n {
        let col = r.col_mut(t);
        col[t] = ONE;
        for s in (0..t).rev() {
            if !index.leq(s, t) {
                continue;
            }
            let mut acc = ZERO;
            for &p in index.succs(s) {
                if p <= t && col[p] != ZERO {
                    acc += nm.entries[(s, p)] * col[p];
                }
            }
            col[s] = acc / gap(&nm.diag, t, s, tol)?;
        }
    }
    Ok(r)
}

pub fn solve_eigensystem(nm: &NMatrix) -> Result<EigenSystem> {
    Ok(EigenSystem {
        l: solve_left_eigenvectors(nm)?,
        r: solve_right_eigenvectors(nm)?,
        diag: nm.diag.clone(),
    })
}

/// Residuals of the eigenvector equations, `max|L𝔑 − 𝔥L|` and `max|𝔑R − R𝔥|`.
pub fn eigen_residuals(nm: &NMatrix, es: &EigenSystem) -> (f64, f64) {
    let d = CMat::from_diag(&nm.diag);
    let left = es.l.matmul(&nm.entries).sub(&d.matmul(&es.l)).max_abs();
    let right = nm.entries.matmul(&es.r).sub(&es.r.matmul(&d)).max_abs();
    (left, right)
}

/// `exp 𝔑 = R e^𝔥 L`.
pub fn exp_spectral(es: &EigenSystem) -> CMat {
    let e: Vec<C> = es.diag.iter().map(|d| d.exp()).collect();
    es.r.matmul(&CMat::from_diag(&e)).matmul(&es.l)
}

/// Matrix exponential by scaling and squaring with a Taylor series.
pub fn exp_series(m: &CMat) -> CMat {
    let norm = m.norm_one();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let a = m.scale(C::new(0.5f64.powi(squarings as i32), 0.0));
    let n = m.rows();
    let mut sum = CMat::identity(n);
    let mut term = CMat::identity(n);
    for k in 1..60 {
        term = term.matmul(&a).scale(C::new(1.0 / k as f64, 0.0));
        sum = sum.add(&term);
        if term.max_abs() <= 1e-18 * sum.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}

/// Entry of an index-by-index matrix for two permutations.
pub fn entry(index: &OrderedIndex, m: &CMat, sigma: &PartialPermutation, tau: &PartialPermutation) -> Result<C> {
    Ok(m[(index.index_of(sigma)?, index.index_of(tau)?)])
}

/// The lattice, points and relabelled permutations for `𝒱(τ)` mapped onto `1..=k`.
fn localise(
    sigma: &PartialPermutation,
    tau: &PartialPermutation,
    pts: &PointConfig,
) -> Result<Option<(&'static OrderedIndex, PointConfig, PartialPermutation, PartialPermutation)>> {
    if !sigma.vertices().all(|v| tau.contains(v)) {
        return Ok(None);
    }
    let (local_tau, labels) = relabel_to_prefix(tau);
    let f: BTreeMap<Vertex, Vertex> =
        labels.iter().enumerate().map(|(i, &v)| (v, i as Vertex + 1)).collect();
    let index = shared_index(labels.len())?;
    Ok(Some((index, pts.relabel(&f)?, sigma.relabel(&f), local_tau)))
}

/// `𝔩_σ(τ)` for arbitrary vertex labels, computed on the lattice of `𝒱(τ)`.
pub fn left_component(sigma: &PartialPermutation, tau: &PartialPermutation, pts: &PointConfig) -> Result<C> {
    let Some((index, local_pts, s, t)) = localise(sigma, tau, pts)? else {
        return Ok(ZERO);
    };
    let nm = build_nmatrix(index, &local_pts)?;
    entry(index, &solve_left_eigenvectors(&nm)?, &s, &t)
}

/// `𝔯_τ(σ)` for arbitrary vertex labels, computed on the lattice of `𝒱(τ)`.
pub fn right_component(sigma: &PartialPermutation, tau: &PartialPermutation, pts: &PointConfig) -> Result<C> {
    let Some((index, local_pts, s, t)) = localise(sigma, tau, pts)? else {
        return Ok(ZERO);
    };
    let nm = build_nmatrix(index, &local_pts)?;
    entry(index, &solve_right_eigenvectors(&nm)?, &s, &t)
}

/// `(exp 𝔑)_{∅,σ}`, the large-N limit of `E[N^{−|σ|} F_N(σ)]`.
pub fn limit_f(sigma: &PartialPermutation, pts: &PointConfig) -> Result<C> {
    let Some((index, local_pts, s, _)) = localise(sigma, sigma, pts)? else {
        unreachable!("σ is supported on itself");
    };
    let es = solve_eigensystem(&build_nmatrix(index, &local_pts)?)?;
    entry(index, &exp_spectral(&es), &PartialPermutation::empty(), &s)
}

/// A finite-N transfer matrix `A^λ` or `B^λ`, indexed `[σ′][σ]`.
#[derive(Clone, Debug)]
pub struct TransferMatrix<'a> {
    pub index: &'a OrderedIndex,
    pub lambda: C,
    pub n: usize,
    pub entries: CMat,
}

const POLE_TOL: f64 = 1e-12;

fn check_pole(lambda: C, index: &OrderedIndex, pts: &PointConfig) -> Result<()> {
    for v in 1..=index.ell() as Vertex {
        let d = (lambda - pts.w(v)).norm().min((lambda - pts.z(v)).norm());
        if d < POLE_TOL {
            return Err(Error::PoleCollision(d));
        }
    }
    Ok(())
}

/// `A(σ′,σ) = Σ_{F⊆ℰ(σ,σ′)} N^{−|𝒱(σ′)|+|F|} ∏_{α∈𝒱(σ)∖F^o} a(w_α) ∏_{α∈𝒱(σ)∖F^i} ā(z_α)`
/// with `a(x) = (λ − x)⁻¹`, `F^o` the tails and `F^i` the heads of `F`.
pub fn build_transfer_a<'a>(
    index: &'a OrderedIndex,
    lambda: C,
    pts: &PointConfig,
    n: usize,
) -> Result<TransferMatrix<'a>> {
    pts.require(1..=index.ell() as Vertex)?;
    check_pole(lambda, index, pts)?;
    if n == 0 {
        return Err(Error::Invalid("N must be positive".into()));
    }
    let ell = index.ell();
    let aw: Vec<C> = (1..=ell).map(|v| (lambda - pts.w(v as Vertex)).inv()).collect();
    let az: Vec<C> = (1..=ell).map(|v| (lambda - pts.z(v as Vertex)).inv().conj()).collect();
    let nf = n as f64;
    let size = index.len();
    let mut entries = CMat::zeros(size, size);
    for j in 0..size {
        let sigma = index.element(j);
        for i in 0..size {
            let sp = index.element(i);
            if !sp.vertices().all(|v| sigma.contains(v)) {
                continue;
            }
            let common: Vec<(Vertex, Vertex)> =
                sp.pairs().filter(|&(a, b)| sigma.get(a) == Some(b)).collect();
            let mut total = ZERO;
            for mask in 0u32..(1 << common.len()) {
                let mut tails = 0u32;
                let mut heads = 0u32;
                for (k, &(a, b)) in common.iter().enumerate() {
                    if mask & (1 << k) != 0 {
                        tails |= 1 << a;
                        heads |= 1 << b;
                    }
                }
                let power = mask.count_ones() as i32 - sp.size() as i32;
                let mut term = C::new(nf.powi(power), 0.0);
                for v in sigma.vertices() {
                    if tails & (1 << v) == 0 {
                        term *= aw[v as usize - 1];
                    }
                    if heads & (1 << v) == 0 {
                        term *= az[v as usize - 1];
                    }
                }
                total += term;
            }
            entries[(i, j)] = total;
        }
    }
    Ok(TransferMatrix { index, lambda, n, entries })
}

/// `B(σ,τ) = N^{|σ|−|τ|} A(σ,τ)`.
pub fn build_transfer_b<'a>(
    index: &'a OrderedIndex,
    lambda: C,
    pts: &PointConfig,
    n: usize,
) -> Result<TransferMatrix<'a>> {
    let mut t = build_transfer_a(index, lambda, pts, n)?;
    let size = index.len();
    for j in 0..size {
        for i in 0..size {
            let p = index.element(i).cycle_count() as i32 - index.element(j).cycle_count() as i32;
            t.entries[(i, j)] *= (n as f64).powi(p);
        }
    }
    Ok(t)
}

/// `e_∅ᵀ A^{λ₁} ⋯ A^{λ_N} e_σ`, the exact conditional expectation of
/// `F_N(σ)` given the eigenvalues.
pub fn conditional_f_product(lambdas: &[C], sigma: &PartialPermutation, pts: &PointConfig) -> Result<C> {
    let Some((index, local_pts, s, _)) = localise(sigma, sigma, pts)? else {
        unreachable!("σ is supported on itself");
    };
    let n = lambdas.len();
    let mut x = vec![ZERO; index.len()];
    x[index.index_of(&s)?] = ONE;
    for &lam in lambdas.iter().rev() {
        let a = build_transfer_a(index, lam, &local_pts, n)?;
        x = a.entries.matvec(&x);
    }
    Ok(x[0])
}

/// The disintegrated matrix `𝔐^ν`.
#[derive(Clone, Debug)]
pub struct DisintegratedMatrix<'a> {
    pub index: &'a OrderedIndex,
    pub nu: C,
    pub entries: CMat,
}

/// `𝔐^ν`: diagonal `Σ_α ((ν̄ − z̄_α)(ν − w_{σ⁻¹(α)}))⁻¹`, and for `σ ≺ τ`
/// the integrand of `𝔫_{σ,τ}` evaluated at `ν`. The disc average
/// `(1/π)∫ 𝔐^ν d²ν` is `𝔑`.
pub fn build_m_nu<'a>(index: &'a OrderedIndex, nu: C, pts: &PointConfig) -> Result<DisintegratedMatrix<'a>> {
    pts.require(1..=index.ell() as Vertex)?;
    check_pole(nu, index, pts)?;
    let kernel = |b: Vertex, a: Vertex| Ok(((nu - pts.z(b)).conj() * (nu - pts.w(a))).inv());
    let n = index.len();
    let mut entries = CMat::zeros(n, n);
    for j in 0..n {
        let tau = index.element(j);
        entries[(j, j)] = frak_h_with(tau, &kernel)?;
        for &i in index.preds(j) {
            let (alphas, betas) = frak_n_vertices(index.element(i), tau)?;
            let mut d = ONE;
            for &a in &alphas {
                d *= nu - pts.w(a);
            }
            for &b in &betas {
                d *= (nu - pts.z(b)).conj();
            }
            entries[(i, j)] = d.inv();
        }
    }
    Ok(DisintegratedMatrix { index, nu, entries })
}

/// `max |M₁M₂ − M₂M₁|`.
pub fn commutator_norm(m1: &CMat, m2: &CMat) -> f64 {
    m1.commutator(m2).max_abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{frak_n, separation};
    use crate::permlat::leq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn p(s: &str) -> PartialPermutation {
        s.parse().unwrap()
    }

    fn cfg(ell: usize, seed: u64) -> PointConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointConfig::random(ell, 0.2, 0.9, &mut rng)
    }

    fn hh(pts: &PointConfig, b: Vertex, a: Vertex) -> C {
        h(pts.z(b), pts.w(a)).unwrap()
    }

    #[test]
    fn ell_one_matrix() {
        let index = OrderedIndex::new(1).unwrap();
        let pts = cfg(1, 1);
        let nm = build_nmatrix(&index, &pts).unwrap();
        let h11 = hh(&pts, 1, 1);
        let expect = CMat::from_rows(&[vec![c(0.0, 0.0), h11], vec![c(0.0, 0.0), h11]]);
        assert!(nm.entries.sub(&expect).max_abs() < 1e-15);
        let es = solve_eigensystem(&nm).unwrap();
        let e = exp_spectral(&es);
        assert!((e[(0, 1)] - (h11.exp() - 1.0)).norm() < 1e-13);
        assert!((exp_series(&nm.entries)[(0, 1)] - (h11.exp() - 1.0)).norm() < 1e-12);
    }

    #[test]
    fn ell_two_matrix() {
        let index = OrderedIndex::new(2).unwrap();
        let pts = cfg(2, 2);
        let nm = build_nmatrix(&index, &pts).unwrap();
        let (h11, h22, h12, h21) = (hh(&pts, 1, 1), hh(&pts, 2, 2), hh(&pts, 1, 2), hh(&pts, 2, 1));
        let big_h = (h11 + h22 - h12 - h21)
            / ((pts.w(1) - pts.w(2)) * (pts.z(1).conj() - pts.z(2).conj()));
        let z = c(0.0, 0.0);
        let expect = CMat::from_rows(&[
            vec![z, h11, h22, z, big_h],
            vec![z, h11, z, h22, big_h],
            vec![z, z, h22, h11, big_h],
            vec![z, z, z, h11 + h22, big_h],
            vec![z, z, z, z, h12 + h21],
        ]);
        assert!(nm.entries.sub(&expect).max_abs() < 1e-12);
    }

    /// The closed ℓ = 2 eigenvector tables, written out by hand.
    fn tables(pts: &PointConfig) -> (CMat, CMat) {
        let delta = ((pts.u(2).conj() - pts.u(1).conj()) * (pts.v(2) - pts.v(1))).inv();
        let (o, z, m) = (c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0));
        let l = CMat::from_rows(&[
            vec![o, m, m, o, z],
            vec![z, o, z, m, z],
            vec![z, z, o, m, z],
            vec![z, z, z, o, delta],
            vec![z, z, z, z, o],
        ]);
        let r = CMat::from_rows(&[
            vec![o, o, o, o, -delta],
            vec![z, o, z, o, -delta],
            vec![z, z, o, o, -delta],
            vec![z, z, z, o, -delta],
            vec![z, z, z, z, o],
        ]);
        (l, r)
    }

    #[test]
    fn ell_two_tables() {
        let index = OrderedIndex::new(2).unwrap();
        for seed in 0..10 {
            let pts = cfg(2, 100 + seed);
            let nm = build_nmatrix(&index, &pts).unwrap();
            let es = solve_eigensystem(&nm).unwrap();
            let (l, r) = tables(&pts);
            let scale = l.max_abs();
            assert!(es.l.sub(&l).max_abs() <= 1e-12 * scale, "seed {seed}");
            assert!(es.r.sub(&r).max_abs() <= 1e-12 * scale, "seed {seed}");
        }
    }

    #[test]
    fn ell_two_exponential_entry() {
        let index = OrderedIndex::new(2).unwrap();
        let pts = cfg(2, 7);
        let nm = build_nmatrix(&index, &pts).unwrap();
        let e = exp_series(&nm.entries);
        let (h11, h22, h12, h21) = (hh(&pts, 1, 1), hh(&pts, 2, 2), hh(&pts, 1, 2), hh(&pts, 2, 1));
        let expect = ((h11 + h22).exp() - (h12 + h21).exp())
            / ((pts.w(1) - pts.w(2)) * (pts.z(1).conj() - pts.z(2).conj()));
        assert!((e[(0, 4)] - expect).norm() < 1e-10 * expect.norm());
    }

    #[test]
    fn eigensystem_sweep() {
        for ell in 1..=4 {
            let index = OrderedIndex::new(ell).unwrap();
            for seed in 0..5 {
                let pts = cfg(ell, 1000 * ell as u64 + seed);
                let nm = build_nmatrix(&index, &pts).unwrap();
                let es = solve_eigensystem(&nm).unwrap();
                let scale = nm.entries.max_abs() * es.l.max_abs() * es.r.max_abs();
                let (rl, rr) = eigen_residuals(&nm, &es);
                assert!(rl <= 1e-10 * scale && rr <= 1e-10 * scale, "ℓ={ell}: {rl} {rr}");
                let id = es.l.matmul(&es.r).sub(&CMat::identity(index.len())).max_abs();
                assert!(id <= 1e-10 * es.l.max_abs() * es.r.max_abs(), "ℓ={ell}: {id}");
                for i in 0..index.len() {
                    for j in 0..index.len() {
                        if !index.leq(i, j) {
                            assert_eq!(es.l[(i, j)], c(0.0, 0.0));
                            assert_eq!(es.r[(i, j)], c(0.0, 0.0));
                        }
                    }
                }
                let a = exp_spectral(&es);
                let b = exp_series(&nm.entries);
                assert!(a.sub(&b).max_abs() <= 1e-9 * b.max_abs(), "ℓ={ell}");
            }
        }
    }

    #[test]
    fn lower_part_is_zero() {
        let index = OrderedIndex::new(3).unwrap();
        let nm = build_nmatrix(&index, &cfg(3, 5)).unwrap();
        for i in 0..index.len() {
            for j in 0..i {
                assert_eq!(nm.entries[(i, j)], c(0.0, 0.0));
            }
        }
    }

    #[test]
    fn left_eigenvectors_supported_on_the_order() {
        let index = OrderedIndex::new(3).unwrap();
        let nm = build_nmatrix(&index, &cfg(3, 9)).unwrap();
        let l = solve_left_eigenvectors(&nm).unwrap();
        for i in 0..index.len() {
            for j in 0..index.len() {
                if l[(i, j)].norm() > 1e-13 {
                    assert!(index.leq(i, j), "{} {}", index.element(i), index.element(j));
                }
            }
        }
    }

    #[test]
    fn degenerate_inputs() {
        let index = OrderedIndex::new(2).unwrap();
        let pts = PointConfig::from_uv(&[c(0.1, 0.0), c(0.1, 0.0)], &[c(0.5, 0.0), c(-0.5, 0.0)]).unwrap();
        assert!(matches!(build_nmatrix(&index, &pts), Err(Error::DegenerateConfig(_))));
        // 𝔥 equal on comparable elements.
        let pts = cfg(2, 3);
        let zero_table = |_: Vertex, _: Vertex| Ok(c(0.0, 0.0));
        let nm = build_nmatrix_with(&index, &pts, &zero_table).unwrap();
        let mut nm = nm;
        nm.diag = vec![c(1.0, 0.0); index.len()];
        assert!(matches!(solve_left_eigenvectors(&nm), Err(Error::DegenerateSpectrum { .. })));
    }

    #[test]
    fn h_independence() {
        for ell in 2..=3 {
            let index = OrderedIndex::new(ell).unwrap();
            let pts = cfg(ell, 40 + ell as u64);
            let es = solve_eigensystem(&build_nmatrix(&index, &pts).unwrap()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let random: Vec<C> =
                (0..ell * ell).map(|_| c(rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0)).collect();
            let table = |b: Vertex, a: Vertex| Ok(random[(b as usize - 1) * ell + a as usize - 1]);
            let nm = build_nmatrix_with(&index, &pts, &table).unwrap();
            let other = solve_eigensystem(&nm).unwrap();
            let scale = es.l.max_abs().max(es.r.max_abs());
            assert!(es.l.sub(&other.l).max_abs() <= 1e-9 * scale, "ℓ={ell}");
            assert!(es.r.sub(&other.r).max_abs() <= 1e-9 * scale, "ℓ={ell}");
        }
    }

    #[test]
    fn lifting_left() {
        let index = OrderedIndex::new(3).unwrap();
        let pts = cfg(3, 11);
        let l = solve_left_eigenvectors(&build_nmatrix(&index, &pts).unwrap()).unwrap();
        for (i, sigma) in index.elements().iter().enumerate() {
            for (j, tau) in index.elements().iter().enumerate() {
                let b = tau.support();
                let lifts_from: Vec<&PartialPermutation> = index
                    .elements()
                    .iter()
                    .filter(|pi| {
                        sigma.vertices().all(|v| pi.contains(v))
                            && pi.extend_to(&b).map(|e| &e == tau).unwrap_or(false)
                    })
                    .collect();
                if lifts_from.is_empty() {
                    assert!(l[(i, j)].norm() < 1e-12, "{sigma} {tau}");
                }
                for pi in lifts_from {
                    let sign = if (tau.size() - pi.size()) % 2 == 0 { 1.0 } else { -1.0 };
                    let k = index.position(pi).unwrap();
                    assert!((l[(i, j)] - l[(i, k)] * sign).norm() < 1e-10 * (1.0 + l[(i, k)].norm()));
                }
            }
        }
    }

    #[test]
    fn lifting_right() {
        let index = OrderedIndex::new(3).unwrap();
        let pts = cfg(3, 12);
        let r = solve_right_eigenvectors(&build_nmatrix(&index, &pts).unwrap()).unwrap();
        for (j, tau) in index.elements().iter().enumerate() {
            for (i, sigma) in index.elements().iter().enumerate() {
                let b = tau.support();
                if let Ok(lifted) = sigma.extend_to(&b) {
                    let k = index.position(&lifted).unwrap();
                    assert!((r[(i, j)] - r[(k, j)]).norm() < 1e-10 * (1.0 + r[(k, j)].norm()), "{sigma} {tau}");
                }
            }
        }
    }

    #[test]
    fn tensorial_left() {
        let pts = cfg(4, 21);
        let index = OrderedIndex::new(4).unwrap();
        let l = solve_left_eigenvectors(&build_nmatrix(&index, &pts).unwrap()).unwrap();
        for (j, tau) in index.elements().iter().enumerate() {
            let parts = tau.cycle_parts();
            if parts.len() < 2 {
                continue;
            }
            for (i, sigma) in index.elements().iter().enumerate() {
                if !index.leq(i, j) {
                    continue;
                }
                let mut prod = c(1.0, 0.0);
                for part in &parts {
                    let on_part = sigma.support().intersection(&part.support()).copied().collect();
                    let restricted = sigma.restrict(&on_part).unwrap();
                    prod *= left_component(&restricted, part, &pts).unwrap();
                }
                assert!((l[(i, j)] - prod).norm() <= 1e-10 * (1.0 + prod.norm()), "{sigma} {tau}");
            }
        }
    }

    #[test]
    fn leq_matches_index_closure() {
        let index = OrderedIndex::new(3).unwrap();
        for (i, a) in index.elements().iter().enumerate() {
            for (j, b) in index.elements().iter().enumerate() {
                assert_eq!(index.leq(i, j), leq(a, b));
            }
        }
    }

    #[test]
    fn transfer_examples() {
        let index = OrderedIndex::new(2).unwrap();
        let pts = cfg(2, 31);
        let lam = c(0.05, -0.02);
        let n = 8;
        let a = build_transfer_a(&index, lam, &pts, n).unwrap();
        let aw = |v: Vertex| (lam - pts.w(v)).inv();
        let az = |v: Vertex| (lam - pts.z(v)).inv().conj();
        let one = index.index_of(&p("(1)")).unwrap();
        let expect = 1.0 + aw(1) * az(1) / n as f64;
        assert!((a.entries[(one, one)] - expect).norm() < 1e-14);
        let top = index.index_of(&p("(1,2)")).unwrap();
        let expect = aw(1) * az(1) * aw(2) * az(2);
        assert!((a.entries[(0, top)] - expect).norm() < 1e-14);
        for i in 0..index.len() {
            for j in 0..index.len() {
                let (x, y) = (index.element(i), index.element(j));
                if !x.vertices().all(|v| y.contains(v)) {
                    assert_eq!(a.entries[(i, j)], c(0.0, 0.0));
                }
            }
        }
        let b = build_transfer_b(&index, lam, &pts, n).unwrap();
        for i in 0..index.len() {
            assert_eq!(a.entries[(i, i)], b.entries[(i, i)]);
        }
        assert!((b.entries[(0, one)] - a.entries[(0, one)] / n as f64).norm() < 1e-15);
        let far = build_transfer_b(&index, lam, &pts, 1 << 30).unwrap();
        for i in 0..index.len() {
            assert!((far.entries[(i, i)] - 1.0).norm() < 1e-6);
        }
        assert!(matches!(build_transfer_a(&index, pts.w(1), &pts, n), Err(Error::PoleCollision(_))));
    }

    #[test]
    fn transfer_triangular_exhaustive() {
        let index = OrderedIndex::new(3).unwrap();
        let pts = cfg(3, 32);
        let a = build_transfer_a(&index, c(0.01, 0.03), &pts, 5).unwrap();
        for i in 0..index.len() {
            for j in 0..index.len() {
                let (x, y) = (index.element(i), index.element(j));
                if !x.vertices().all(|v| y.contains(v)) {
                    assert_eq!(a.entries[(i, j)], c(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn conditional_product_small_cases() {
        let pts = cfg(2, 33);
        let lam = c(0.1, 0.2);
        let value = conditional_f_product(&[lam], &p("(1)"), &pts).unwrap();
        let expect = ((lam - pts.w(1)) * (lam - pts.z(1)).conj()).inv();
        assert!((value - expect).norm() < 1e-14);
        let lams = [c(0.1, 0.2), c(-0.3, 0.1), c(0.2, -0.4)];
        assert_eq!(conditional_f_product(&lams, &p("()"), &pts).unwrap(), c(1.0, 0.0));
    }

    /// Exact `E F_2(σ)` for a 2×2 triangular matrix with one Gaussian entry
    /// `t`, `E|t|² = 1/N`: average over the phase of `t` at several radii to
    /// isolate the coefficients of `|t|^{2a}`, then use `E|t|^{2a} = a!/N^a`.
    fn exact_two_by_two(lams: [C; 2], sigma: &PartialPermutation, pts: &PointConfig) -> C {
        let n = 2.0f64;
        let resolvent = |t: C, x: C| {
            let (a1, a2) = ((lams[0] - x).inv(), (lams[1] - x).inv());
            [[a1, -t * a1 * a2], [c(0.0, 0.0), a2]]
        };
        let trace_product = |t: C| {
            let mut total = c(1.0, 0.0);
            for cycle in sigma.cycles() {
                let mut m = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
                for &v in &cycle {
                    let rz = resolvent(t, pts.z(v));
                    let rw = resolvent(t, pts.w(v));
                    let rz_adj = [[rz[0][0].conj(), rz[1][0].conj()], [rz[0][1].conj(), rz[1][1].conj()]];
                    for f in [rz_adj, rw] {
                        let mut next = [[c(0.0, 0.0); 2]; 2];
                        for i in 0..2 {
                            for j in 0..2 {
                                for k in 0..2 {
                                    next[i][j] += m[i][k] * f[k][j];
                                }
                            }
                        }
                        m = next;
                    }
                }
                total *= m[0][0] + m[1][1];
            }
            total
        };
        let degree = 2 * sigma.size();
        let radii: Vec<f64> = (1..=degree + 1).map(|k| 0.3 * k as f64).collect();
        let phases = 4 * degree + 4;
        let g: Vec<C> = radii
            .iter()
            .map(|&r| {
                (0..phases)
                    .map(|k| trace_product(C::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / phases as f64)))
                    .sum::<C>()
                    / phases as f64
            })
            .collect();
        // g(r) = Σ_a c_a r^{2a}: solve the Vandermonde system in s = r².
        let m = radii.len();
        let mut a = CMat::from_fn(m, m, |i, j| c((radii[i] * radii[i]).powi(j as i32), 0.0));
        a = a.inverse().unwrap();
        let coeffs = a.matvec(&g);
        let mut fact = 1.0;
        let mut expectation = c(0.0, 0.0);
        for (k, ck) in coeffs.iter().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            expectation += ck * (fact / n.powi(k as i32));
        }
        expectation
    }

    #[test]
    fn conditional_product_exact_at_two() {
        let pts = cfg(2, 34);
        let lams = [c(0.15, -0.1), c(-0.2, 0.3)];
        for s in ["(1)", "(2)", "(1,2)", "(1)(2)"] {
            let sigma = p(s);
            let exact = exact_two_by_two(lams, &sigma, &pts);
            let product = conditional_f_product(&lams, &sigma, &pts).unwrap();
            assert!((exact - product).norm() < 1e-8 * exact.norm(), "{s}: {exact} vs {product}");
        }
    }

    #[test]
    fn m_nu_examples() {
        let index = OrderedIndex::new(2).unwrap();
        let pts = cfg(2, 41);
        let nu = c(0.05, 0.6);
        let m = build_m_nu(&index, nu, &pts).unwrap();
        let k = |b: Vertex, a: Vertex| ((nu - pts.z(b)).conj() * (nu - pts.w(a))).inv();
        let top = index.index_of(&p("(1,2)")).unwrap();
        assert!((m.entries[(top, top)] - (k(1, 2) + k(2, 1))).norm() < 1e-13);
        assert_eq!(commutator_norm(&m.entries, &m.entries), 0.0);
        assert!(matches!(build_m_nu(&index, pts.z(2), &pts), Err(Error::PoleCollision(_))));
    }

    #[test]
    fn m_nu_commutes() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for ell in 1..=3 {
            let index = OrderedIndex::new(ell).unwrap();
            let pts = cfg(ell, 50 + ell as u64);
            for _ in 0..3 {
                let nu1 = C::from_polar(0.95 * rng.random::<f64>().sqrt(), 6.3 * rng.random::<f64>());
                let nu2 = C::from_polar(0.95 * rng.random::<f64>().sqrt(), 6.3 * rng.random::<f64>());
                let a = build_m_nu(&index, nu1, &pts).unwrap().entries;
                let b = build_m_nu(&index, nu2, &pts).unwrap().entries;
                let scale = a.max_abs() * b.max_abs();
                assert!(commutator_norm(&a, &b) <= 1e-10 * scale, "ℓ={ell}");
            }
        }
    }

    #[test]
    fn m_nu_with_unbalanced_normalisation_does_not_commute() {
        let index = OrderedIndex::new(2).unwrap();
        let pts = cfg(2, 43);
        let scaled = |nu: C| {
            let mut m = build_m_nu(&index, nu, &pts).unwrap().entries;
            for j in 0..index.len() {
                for i in 0..j {
                    m[(i, j)] /= std::f64::consts::PI;
                }
            }
            m
        };
        let (a, b) = (scaled(c(0.1, 0.5)), scaled(c(-0.6, -0.2)));
        assert!(commutator_norm(&a, &b) > 1e-6 * a.max_abs() * b.max_abs());
    }

    #[test]
    fn m_nu_integrates_to_frak_n() {
        let index = OrderedIndex::new(1).unwrap();
        let pts = cfg(1, 44);
        let q = crate::analytic::disc_quadrature(
            |nu| build_m_nu(&index, nu, &pts).map(|m| m.entries[(0, 1)]).unwrap_or(c(0.0, 0.0)),
            300,
            &[pts.z(1), pts.w(1)],
        );
        let exact = frak_n(&p("()"), &p("(1)"), &pts).unwrap();
        assert!((q - exact).norm() < 1e-2, "{q} vs {exact}");
        assert!(separation(&pts).ok_macroscopic);
    }
}
