//! Scalar kernels: `h`, `ρ₂`, the diagonal sums `𝔥_σ`, the off-diagonal
//! entries `𝔫_{σ,τ}` in partial-fraction form, and a unit-disc quadrature
//! used as an independent oracle for them.
//!
//! Convention: the `z` (alias `u`) family always sits in the conjugated slot.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use num_complex::Complex64 as C;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::permlat::{hat_nonfixed, lt_step, PartialPermutation, Vertex};

const ZERO: C = C::new(0.0, 0.0);

/// Spectral parameters `(z_α, w_α)` indexed by vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct PointConfig {
    points: BTreeMap<Vertex, (C, C)>,
}

impl PointConfig {
    pub fn new<I: IntoIterator<Item = (Vertex, C, C)>>(points: I) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (v, z, w) in points {
            if v == 0 {
                return Err(Error::Invalid("vertex labels must be positive".into()));
            }
            if !(z.re.is_finite() && z.im.is_finite() && w.re.is_finite() && w.im.is_finite()) {
                return Err(Error::Invalid(format!("non-finite point at vertex {v}")));
            }
            if map.insert(v, (z, w)).is_some() {
                return Err(Error::Invalid(format!("vertex {v} listed twice")));
            }
        }
        Ok(Self { points: map })
    }

    /// Vertices `1..=n` with `z_α = u[α−1]`, `w_α = v[α−1]`.
    pub fn from_uv(u: &[C], v: &[C]) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::Invalid("u and v must have equal length".into()));
        }
        Self::new((0..u.len()).map(|k| (k as Vertex + 1, u[k], v[k])))
    }

    /// `ν = (ν₁, …, ν_{2ℓ})` with odd entries in the conjugated family:
    /// `u_j = ν_{2j−1}`, `v_j = ν_{2j}`.
    pub fn from_nu(nu: &[C]) -> Result<Self> {
        if !nu.len().is_multiple_of(2) {
            return Err(Error::Invalid("ν must have even length".into()));
        }
        let u: Vec<C> = nu.iter().step_by(2).copied().collect();
        let v: Vec<C> = nu.iter().skip(1).step_by(2).copied().collect();
        Self::from_uv(&u, &v)
    }

    /// Uniform points in the disc of radius `radius`, redrawn until the
    /// macroscopic separation is at least `min_dist`.
    pub fn random<R: Rng + ?Sized>(ell: usize, min_dist: f64, radius: f64, rng: &mut R) -> Self {
        let draw = |rng: &mut R| {
            let r = radius * rng.random::<f64>().sqrt();
            C::from_polar(r, 2.0 * PI * rng.random::<f64>())
        };
        loop {
            let pts = (1..=ell as Vertex).map(|v| (v, draw(rng), draw(rng)));
            let cfg = Self::new(pts).expect("finite points");
            if separation(&cfg).dist_macro >= min_dist {
                return cfg;
            }
        }
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.points.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.points.contains_key(&v)
    }

    pub fn get(&self, v: Vertex) -> Option<(C, C)> {
        self.points.get(&v).copied()
    }

    /// `z_α`; panics if `α` is missing (callers check with [`Self::require`]).
    pub fn z(&self, v: Vertex) -> C {
        self.points[&v].0
    }

    /// `w_α`; panics if `α` is missing.
    pub fn w(&self, v: Vertex) -> C {
        self.points[&v].1
    }

    pub fn u(&self, v: Vertex) -> C {
        self.z(v)
    }

    pub fn v(&self, v: Vertex) -> C {
        self.w(v)
    }

    pub fn points(&self) -> impl Iterator<Item = (Vertex, C, C)> + '_ {
        self.points.iter().map(|(&v, &(z, w))| (v, z, w))
    }

    pub fn require<I: IntoIterator<Item = Vertex>>(&self, vs: I) -> Result<()> {
        for v in vs {
            if !self.contains(v) {
                return Err(Error::Invalid(format!("no point given for vertex {v}")));
            }
        }
        Ok(())
    }

    pub fn restrict(&self, vs: &BTreeSet<Vertex>) -> Result<Self> {
        self.require(vs.iter().copied())?;
        Ok(Self { points: vs.iter().map(|&v| (v, self.points[&v])).collect() })
    }

    /// Renames vertex `v` to `f(v)` for every `v` in the domain of `f`.
    pub fn relabel(&self, f: &BTreeMap<Vertex, Vertex>) -> Result<Self> {
        self.require(f.keys().copied())?;
        Self::new(f.iter().map(|(&v, &to)| (to, self.z(v), self.w(v))))
    }

    /// Replaces the `w` values: `w′_α = w_{g(α)}` for every `α` in the domain of `g`.
    pub fn permute_w(&self, g: &BTreeMap<Vertex, Vertex>) -> Result<Self> {
        self.require(g.keys().chain(g.values()).copied())?;
        let mut points = self.points.clone();
        for (&a, &b) in g {
            points.get_mut(&a).expect("checked").1 = self.w(b);
        }
        Ok(Self { points })
    }

    /// Scales both families by the real factor `t`, so `z̄` and `w` scale jointly.
    pub fn scaled(&self, t: f64) -> Self {
        Self { points: self.points.iter().map(|(&v, &(z, w))| (v, (z * t, w * t))).collect() }
    }

    /// Swaps the two families.
    pub fn swapped(&self) -> Self {
        Self { points: self.points.iter().map(|(&v, &(z, w))| (v, (w, z))).collect() }
    }

    pub fn inside_disc(&self) -> bool {
        self.points.values().all(|(z, w)| z.norm() < 1.0 && w.norm() < 1.0)
    }

    /// Whether all `z` and `w` values are pairwise distinct.
    pub fn pairwise_distinct(&self) -> bool {
        let all: Vec<C> = self.points.values().flat_map(|&(z, w)| [z, w]).collect();
        (0..all.len()).all(|i| (i + 1..all.len()).all(|j| all[i] != all[j]))
    }
}

/// Macroscopic separation of a configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparationReport {
    /// `Dist`: minimum over all pairwise distances among the `z` and `w`
    /// values and their distances to the unit circle.
    pub dist_macro: f64,
    /// `dist`: minimum over the distances `|z_α − w_β|` and the boundary gaps.
    pub dist: f64,
    pub ok_macroscopic: bool,
}

pub fn separation(pts: &PointConfig) -> SeparationReport {
    let zs: Vec<C> = pts.points().map(|p| p.1).collect();
    let ws: Vec<C> = pts.points().map(|p| p.2).collect();
    let boundary = zs
        .iter()
        .chain(&ws)
        .map(|x| (1.0 - x.norm()).max(0.0))
        .fold(f64::INFINITY, f64::min);
    let cross = zs
        .iter()
        .flat_map(|z| ws.iter().map(move |w| (z - w).norm()))
        .fold(f64::INFINITY, f64::min);
    let within = |xs: &[C]| {
        let mut m = f64::INFINITY;
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                m = m.min((xs[i] - xs[j]).norm());
            }
        }
        m
    };
    let dist = boundary.min(cross);
    let dist_macro = dist.min(within(&zs)).min(within(&ws));
    let dist_macro = if dist_macro.is_finite() { dist_macro } else { 1.0 };
    let dist = if dist.is_finite() { dist } else { 1.0 };
    SeparationReport { dist_macro, dist, ok_macroscopic: dist_macro > 0.0 }
}

fn coincidence_tol(a: C, b: C) -> f64 {
    1e-14 * 1f64.max(a.norm()).max(b.norm())
}

/// `h(a, b) = log((1 − āb)/|a − b|²)`, principal branch.
pub fn h(a: C, b: C) -> Result<C> {
    let d = (a - b).norm();
    if d <= coincidence_tol(a, b) {
        return Err(Error::CoincidentPoints(d));
    }
    let num = C::new(1.0, 0.0) - a.conj() * b;
    if num.norm() == 0.0 {
        return Err(Error::DegenerateConfig(format!("1 − āb vanishes at a = {a}, b = {b}")));
    }
    Ok((num / (d * d)).ln())
}

/// `ρ₂(ν₁, ν₂) = −(1 − ν̄₁ν₂)/|ν₁ − ν₂|⁴`.
pub fn rho2(nu1: C, nu2: C) -> Result<C> {
    let d = (nu1 - nu2).norm();
    if d <= coincidence_tol(nu1, nu2) {
        return Err(Error::CoincidentPoints(d));
    }
    Ok(-(C::new(1.0, 0.0) - nu1.conj() * nu2) / (d * d * d * d))
}

/// Coefficients `c_α = ∏_{β≠α}(x_α − x_β)⁻¹` of `∏(λ − x_α)⁻¹ = Σ c_α (λ − x_α)⁻¹`.
pub fn partial_fractions(poles: &[C]) -> Result<Vec<C>> {
    let scale = poles.iter().fold(1f64, |m, p| m.max(p.norm()));
    let mut out = Vec::with_capacity(poles.len());
    for (a, &xa) in poles.iter().enumerate() {
        let mut prod = C::new(1.0, 0.0);
        for (b, &xb) in poles.iter().enumerate() {
            if a != b {
                let d = xa - xb;
                if d.norm() <= 1e-14 * scale {
                    return Err(Error::DegenerateConfig(format!("repeated pole {xa}")));
                }
                prod *= d;
            }
        }
        out.push(prod.inv());
    }
    Ok(out)
}

/// `(β, α) ↦ h(z_β, w_α)` for a configuration.
pub fn h_of(pts: &PointConfig) -> impl Fn(Vertex, Vertex) -> Result<C> + '_ {
    move |beta, alpha| h(pts.z(beta), pts.w(alpha))
}

/// `𝔥_σ = Σ_{α∈𝒱(σ)} h(z_α, w_{σ⁻¹(α)})`.
pub fn frak_h(sigma: &PartialPermutation, pts: &PointConfig) -> Result<C> {
    pts.require(sigma.vertices())?;
    frak_h_with(sigma, &h_of(pts))
}

/// `𝔥_σ` with `h(z_β, w_α)` replaced by `table(β, α)`.
pub fn frak_h_with(
    sigma: &PartialPermutation,
    table: &dyn Fn(Vertex, Vertex) -> Result<C>,
) -> Result<C> {
    let inv = sigma.inverse();
    sigma.vertices().try_fold(ZERO, |acc, a| Ok(acc + table(a, inv.apply_or_fix(a))?))
}

/// The two pole families of `𝔫_{σ,τ}`: `w`-side vertices `σ⁻¹(𝒱̂_nf)` and
/// `z̄`-side vertices `𝒱̂_nf`.
pub fn frak_n_vertices(
    sigma: &PartialPermutation,
    tau: &PartialPermutation,
) -> Result<(Vec<Vertex>, Vec<Vertex>)> {
    if !lt_step(sigma, tau) {
        return Err(Error::NotComparable(sigma.to_string(), tau.to_string()));
    }
    let hat: Vec<Vertex> = hat_nonfixed(sigma, tau)?.into_iter().collect();
    let inv = sigma.inverse();
    let pre: Vec<Vertex> = hat.iter().map(|&a| inv.apply_or_fix(a)).collect();
    Ok((pre, hat))
}

/// `𝔫_{σ,τ}` for `σ ≺ τ` as the partial-fraction double sum of `h` values.
pub fn frak_n(sigma: &PartialPermutation, tau: &PartialPermutation, pts: &PointConfig) -> Result<C> {
    pts.require(tau.vertices())?;
    frak_n_with(sigma, tau, pts, &h_of(pts))
}

/// `𝔫_{σ,τ}` with `h(z_β, w_α)` replaced by `table(β, α)`; the rational
/// coefficients still come from `pts`.
pub fn frak_n_with(
    sigma: &PartialPermutation,
    tau: &PartialPermutation,
    pts: &PointConfig,
    table: &dyn Fn(Vertex, Vertex) -> Result<C>,
) -> Result<C> {
    let (alphas, betas) = frak_n_vertices(sigma, tau)?;
    let cw = partial_fractions(&alphas.iter().map(|&a| pts.w(a)).collect::<Vec<_>>())?;
    let cz = partial_fractions(&betas.iter().map(|&b| pts.z(b).conj()).collect::<Vec<_>>())?;
    let mut sum = ZERO;
    for (i, &a) in alphas.iter().enumerate() {
        for (j, &b) in betas.iter().enumerate() {
            sum += table(b, a)? * cw[i] * cz[j];
        }
    }
    Ok(sum)
}

/// The integrand of `𝔫_{σ,τ}` over the disc:
/// `∏_α (ν − w_α)⁻¹ ∏_β (ν̄ − z̄_β)⁻¹`, together with its poles.
pub fn frak_n_integrand(
    sigma: &PartialPermutation,
    tau: &PartialPermutation,
    pts: &PointConfig,
) -> Result<(impl Fn(C) -> C + Sync, Vec<C>)> {
    pts.require(tau.vertices())?;
    let (alphas, betas) = frak_n_vertices(sigma, tau)?;
    let ws: Vec<C> = alphas.iter().map(|&a| pts.w(a)).collect();
    let zs: Vec<C> = betas.iter().map(|&b| pts.z(b)).collect();
    let poles: Vec<C> = ws.iter().chain(&zs).copied().collect();
    let f = move |nu: C| {
        let mut d = C::new(1.0, 0.0);
        for w in &ws {
            d *= nu - w;
        }
        for z in &zs {
            d *= (nu - z).conj();
        }
        d.inv()
    };
    Ok((f, poles))
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            (0.5 * (1.0 - x), 0.5 * w)
        })
        .collect()
}

struct Hole {
    centre: C,
    radius: f64,
}

/// `(1/π) ∫_{D₁} f(ν) d²ν`.
///
/// A polar midpoint grid with `res` radial and `2·res` angular cells covers
/// the disc. Around each listed singular point inside the disc a small hole
/// is cut out of the grid and integrated in local polar coordinates, where
/// an integrable `1/|ν − p|` singularity becomes smooth.
pub fn disc_quadrature<F: Fn(C) -> C + Sync>(f: F, res: usize, singular: &[C]) -> C {
    let inside: Vec<C> = singular.iter().copied().filter(|p| p.norm() < 1.0).collect();
    let holes: Vec<Hole> = inside
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let sep = inside
                .iter()
                .enumerate()
                .filter(|&(j, q)| j != k && (p - q).norm() > 0.0)
                .map(|(_, q)| (p - q).norm())
                .fold(f64::INFINITY, f64::min);
            let radius = 0.1f64.min(0.45 * sep).min(0.9 * (1.0 - p.norm()));
            Hole { centre: p, radius }
        })
        .filter(|hole| hole.radius > 0.0)
        .collect();

    let dr = 1.0 / res as f64;
    let nth = 2 * res;
    let dth = 2.0 * PI / nth as f64;
    let sub = 8;
    let in_hole = |x: C| holes.iter().any(|hl| (x - hl.centre).norm() < hl.radius);

    let rings: Vec<C> = (0..res)
        .into_par_iter()
        .map(|i| {
            let r0 = i as f64 * dr;
            let rm = r0 + 0.5 * dr;
            let reach = dr.max((r0 + dr) * dth);
            let mut ring = ZERO;
            for j in 0..nth {
                let th = (j as f64 + 0.5) * dth;
                let c = C::from_polar(rm, th);
                let mut near = false;
                let mut skip = false;
                for hl in &holes {
                    let d = (c - hl.centre).norm();
                    if d < hl.radius - reach {
                        skip = true;
                    } else if d <= hl.radius + reach {
                        near = true;
                    }
                }
                if skip {
                    continue;
                }
                if !near {
                    ring += f(c) * (rm * dr * dth);
                    continue;
                }
                let (sr, st) = (dr / sub as f64, dth / sub as f64);
                for a in 0..sub {
                    let r = r0 + (a as f64 + 0.5) * sr;
                    for b in 0..sub {
                        let t = j as f64 * dth + (b as f64 + 0.5) * st;
                        let x = C::from_polar(r, t);
                        if !in_hole(x) {
                            ring += f(x) * (r * sr * st);
                        }
                    }
                }
            }
            ring
        })
        .collect();
    let mut total: C = rings.iter().sum();

    let gl = gauss_legendre(32);
    let nphi = 128;
    let dphi = 2.0 * PI / nphi as f64;
    for hl in &holes {
        let mut s = ZERO;
        for &(x, wgt) in &gl {
            let r = x * hl.radius;
            for k in 0..nphi {
                let phi = k as f64 * dphi;
                s += f(hl.centre + C::from_polar(r, phi)) * (r * wgt * hl.radius * dphi);
            }
        }
        total += s;
    }
    total / PI
}

/// `h(a, b)` as the disc average `(1/π)∫ (ν̄ − ā)⁻¹(ν − b)⁻¹ d²ν`.
pub fn h_quadrature(a: C, b: C, res: usize) -> C {
    disc_quadrature(|nu| ((nu - a).conj() * (nu - b)).inv(), res, &[a, b])
}

/// `𝔫_{σ,τ}` as a disc average of its rational integrand.
pub fn frak_n_quadrature(
    sigma: &PartialPermutation,
    tau: &PartialPermutation,
    pts: &PointConfig,
    res: usize,
) -> Result<C> {
    let (f, poles) = frak_n_integrand(sigma, tau, pts)?;
    Ok(disc_quadrature(f, res, &poles))
}

/// Central-difference estimate of the mixed Wirtinger derivative
/// `∂_a ∂_{b̄} f(a, b)`.
pub fn wirtinger_mixed_fd(f: &dyn Fn(C, C) -> C, a: C, b: C, step: f64) -> Result<C> {
    let one = C::new(1.0, 0.0);
    let i = C::new(0.0, 1.0);
    let mixed = |da: C, db: C| -> Result<C> {
        let vals = [
            f(a + da * step, b + db * step),
            f(a + da * step, b - db * step),
            f(a - da * step, b + db * step),
            f(a - da * step, b - db * step),
        ];
        if vals.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::DegenerateConfig("finite-difference stencil hits a singularity".into()));
        }
        Ok((vals[0] - vals[1] - vals[2] + vals[3]) / (4.0 * step * step))
    };
    let xs = mixed(one, one)?;
    let xt = mixed(one, i)?;
    let ys = mixed(i, one)?;
    let yt = mixed(i, i)?;
    Ok((xs + i * xt - i * ys + yt) * 0.25)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permlat::OrderedIndex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn p(s: &str) -> PartialPermutation {
        s.parse().unwrap()
    }

    fn close(a: C, b: C, tol: f64) -> bool {
        (a - b).norm() <= tol * 1f64.max(b.norm())
    }

    fn random_in_disc(rng: &mut ChaCha8Rng, radius: f64) -> C {
        C::from_polar(radius * rng.random::<f64>().sqrt(), 2.0 * PI * rng.random::<f64>())
    }

    #[test]
    fn h_examples() {
        assert!(close(h(c(0.0, 0.0), c(0.5, 0.0)).unwrap(), c(4f64.ln(), 0.0), 1e-15));
        assert!(close(h(c(0.3, 0.0), c(0.6, 0.0)).unwrap(), c((0.82f64 / 0.09).ln(), 0.0), 1e-14));
        assert!(matches!(h(c(0.2, 0.1), c(0.2, 0.1)), Err(Error::CoincidentPoints(_))));
    }

    #[test]
    fn rho2_examples() {
        assert!(close(rho2(c(0.0, 0.0), c(0.5, 0.0)).unwrap(), c(-16.0, 0.0), 1e-15));
        assert!(close(rho2(c(-0.4, 0.0), c(0.4, 0.0)).unwrap(), c(-2.83203125, 0.0), 1e-14));
    }

    #[test]
    fn conjugation_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = random_in_disc(&mut rng, 0.95);
            let b = random_in_disc(&mut rng, 0.95);
            assert!(close(h(b, a).unwrap(), h(a, b).unwrap().conj(), 1e-14));
            assert!(close(rho2(b, a).unwrap(), rho2(a, b).unwrap().conj(), 1e-14));
        }
    }

    #[test]
    fn branch_sanity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let a = random_in_disc(&mut rng, 1.0);
            let b = random_in_disc(&mut rng, 1.0);
            if (a - b).norm() < 1e-6 {
                continue;
            }
            let num = c(1.0, 0.0) - a.conj() * b;
            assert!(num.re > 0.0);
            assert!(close(h(a, b).unwrap().exp(), num / (a - b).norm_sqr(), 1e-12));
        }
    }

    #[test]
    fn partial_fraction_examples() {
        assert_eq!(partial_fractions(&[c(0.3, 0.2)]).unwrap(), vec![c(1.0, 0.0)]);
        let cs = partial_fractions(&[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(close(cs[0], c(-1.0, 0.0), 1e-15) && close(cs[1], c(1.0, 0.0), 1e-15));
        assert!(partial_fractions(&[c(0.1, 0.0), c(0.1, 0.0)]).is_err());
    }

    #[test]
    fn partial_fraction_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..6 {
            let xs: Vec<C> = (0..n).map(|_| random_in_disc(&mut rng, 1.0)).collect();
            let cs = partial_fractions(&xs).unwrap();
            let lam = random_in_disc(&mut rng, 2.0) + c(2.5, 0.0);
            let lhs = xs.iter().fold(c(1.0, 0.0), |acc, x| acc / (lam - x));
            let rhs: C = xs.iter().zip(&cs).map(|(x, ci)| ci / (lam - x)).sum();
            assert!(close(lhs, rhs, 1e-12));
            // Σ c_α x_α^k vanishes for k < n − 1 and is 1 for k = n − 1.
            for k in 0..n {
                let s: C = xs.iter().zip(&cs).map(|(x, ci)| ci * x.powu(k as u32)).sum();
                let expect = if k + 1 == n { c(1.0, 0.0) } else { c(0.0, 0.0) };
                assert!((s - expect).norm() < 1e-9, "n={n} k={k} {s}");
            }
        }
    }

    fn pts2() -> PointConfig {
        PointConfig::from_uv(&[c(0.1, 0.3), c(-0.4, 0.2)], &[c(0.5, -0.1), c(-0.2, -0.5)]).unwrap()
    }

    #[test]
    fn frak_h_examples() {
        let pts = pts2();
        assert_eq!(frak_h(&p("()"), &pts).unwrap(), c(0.0, 0.0));
        let h11 = h(pts.z(1), pts.w(1)).unwrap();
        assert!(close(frak_h(&p("(1)"), &pts).unwrap(), h11, 1e-15));
        let expect = h(pts.z(1), pts.w(2)).unwrap() + h(pts.z(2), pts.w(1)).unwrap();
        assert!(close(frak_h(&p("(1,2)"), &pts).unwrap(), expect, 1e-14));
    }

    #[test]
    fn frak_n_examples() {
        let pts = pts2();
        let hh = |b: Vertex, a: Vertex| h(pts.z(b), pts.w(a)).unwrap();
        assert!(close(frak_n(&p("()"), &p("(1)"), &pts).unwrap(), hh(1, 1), 1e-15));
        assert!(close(frak_n(&p("(1)"), &p("(1)(2)"), &pts).unwrap(), hh(2, 2), 1e-15));
        let big_h = (hh(1, 1) + hh(2, 2) - hh(1, 2) - hh(2, 1))
            / ((pts.w(1) - pts.w(2)) * (pts.z(1).conj() - pts.z(2).conj()));
        assert!(close(frak_n(&p("(1)(2)"), &p("(1,2)"), &pts).unwrap(), big_h, 1e-13));
        assert!(matches!(
            frak_n(&p("(1,2)"), &p("(1)(2)"), &pts),
            Err(Error::NotComparable(_, _))
        ));
    }

    #[test]
    fn quadrature_normalisation() {
        let one = disc_quadrature(|_| c(1.0, 0.0), 400, &[]);
        assert!((one - c(1.0, 0.0)).norm() < 1e-12);
        let with_hole = disc_quadrature(|_| c(1.0, 0.0), 400, &[c(0.3, 0.2)]);
        assert!((with_hole - c(1.0, 0.0)).norm() < 1e-4);
    }

    #[test]
    fn h_quadrature_examples() {
        let q = h_quadrature(c(0.0, 0.0), c(0.5, 0.0), 2000);
        assert!((q - c(4f64.ln(), 0.0)).norm() < 1e-3, "{q}");
        let a = c(0.2, -0.3);
        let b = c(-0.35, 0.4);
        assert!((h_quadrature(a, b, 600) - h(a, b).unwrap()).norm() < 5e-3);
    }

    #[test]
    fn frak_n_quadrature_ell_one() {
        let pts = PointConfig::from_uv(&[c(0.0, 0.4)], &[c(-0.5, 0.0)]).unwrap();
        let q = frak_n_quadrature(&p("()"), &p("(1)"), &pts, 800).unwrap();
        assert!((q - frak_n(&p("()"), &p("(1)"), &pts).unwrap()).norm() < 5e-3);
    }

    #[test]
    fn frak_n_quadrature_ell_two() {
        let pts = pts2();
        let index = OrderedIndex::new(2).unwrap();
        for j in 0..index.len() {
            for &i in index.preds(j) {
                let (s, t) = (index.element(i), index.element(j));
                let q = frak_n_quadrature(s, t, &pts, 800).unwrap();
                let exact = frak_n(s, t, &pts).unwrap();
                assert!((q - exact).norm() < 5e-3, "{s} ≺ {t}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn wirtinger_examples() {
        let a = c(0.1, 0.0);
        let b = c(0.5, 0.2);
        let exp_h = |x: C, y: C| h(x, y).map(|v| v.exp()).unwrap_or(c(f64::NAN, 0.0));
        let d = wirtinger_mixed_fd(&exp_h, a, b, 1e-4).unwrap();
        let target = rho2(a, b).unwrap();
        assert!((d - target).norm() <= 1e-5 * target.norm(), "{d} vs {target}");
        let constant = wirtinger_mixed_fd(&|_, _| c(2.0, 1.0), a, b, 1e-3).unwrap();
        assert!(constant.norm() < 1e-12);
        let unit = wirtinger_mixed_fd(&|x, y| x * y.conj(), a, b, 1e-3).unwrap();
        assert!((unit - c(1.0, 0.0)).norm() < 1e-9);
        // `h` itself is pluriharmonic off the diagonal.
        let hf = |x: C, y: C| h(x, y).unwrap();
        assert!(wirtinger_mixed_fd(&hf, a, b, 1e-4).unwrap().norm() < 1e-5);
        assert!(wirtinger_mixed_fd(&|x, y| (x - y).inv(), a, a, 0.0).is_err());
    }

    #[test]
    fn separation_examples() {
        let one = PointConfig::from_uv(&[c(0.0, 0.4)], &[c(-0.5, 0.0)]).unwrap();
        let rep = separation(&one);
        assert!((rep.dist - 0.5).abs() < 1e-15);
        assert!(rep.dist >= rep.dist_macro);
        let rep = PointConfig::from_uv(&[c(0.1, 0.0), c(0.1, 0.0)], &[c(0.5, 0.0), c(-0.5, 0.0)])
            .map(|p| separation(&p))
            .unwrap();
        assert_eq!(rep.dist_macro, 0.0);
        assert!(!rep.ok_macroscopic);
        let edge = PointConfig::from_uv(&[c(0.999999, 0.0)], &[c(0.0, 0.0)]).unwrap();
        assert!(separation(&edge).dist_macro < 1e-5);
    }

    #[test]
    fn nu_mapping() {
        let pts = PointConfig::from_nu(&[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)]).unwrap();
        assert_eq!(pts.u(1), c(1.0, 0.0));
        assert_eq!(pts.v(1), c(2.0, 0.0));
        assert_eq!(pts.u(2), c(3.0, 0.0));
        assert_eq!(pts.v(2), c(4.0, 0.0));
    }
}
