//! Limiting correlation functions `ρ(σ; u, v)` assembled from the
//! eigenvectors of `𝔑`, the polynomials `𝔏_σ`, `𝔕_σ`, and the checks built
//! on them (factorisation, homogeneity, vanishing on coincident pairs).

use std::collections::BTreeMap;

use num_complex::Complex64 as C;

use crate::analytic::{rho2, PointConfig};
use crate::error::{Error, Result};
use crate::permlat::{relabel_to_prefix, shared_index, PartialPermutation, Vertex};
use crate::spectral::{
    build_nmatrix, build_nmatrix_with, entry, left_component, solve_eigensystem,
    solve_left_eigenvectors, solve_right_eigenvectors,
};

const ONE: C = C::new(1.0, 0.0);

#[derive(Clone, Debug)]
pub struct CorrelationResult {
    pub sigma: PartialPermutation,
    pub pts: PointConfig,
    pub value: C,
    /// Contribution of each `π ⊴ σ` with `𝒱(π) = 𝒱(σ)`.
    pub terms: Vec<(PartialPermutation, C)>,
}

#[derive(Clone, Debug)]
pub struct PolynomialEval {
    pub sigma: PartialPermutation,
    /// `𝔏_σ = 𝖵(ū) 𝖵(v) 𝔩_𝙸(σ)`.
    pub l_value: C,
    /// `𝔕_σ = 𝖵(ū) 𝖵(v) 𝔯_σ(∅)`.
    pub r_value: C,
    pub vandermonde_u: C,
    pub vandermonde_v: C,
}

/// `∏_{i<j} (x_j − x_i)` over the values in label order.
pub fn vandermonde(values: &[C]) -> C {
    let mut prod = ONE;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            prod *= values[j] - values[i];
        }
    }
    prod
}

/// `(𝖵_{𝒱(σ)}(ū), 𝖵_{𝒱(σ)}(v))`.
pub fn vandermonde_pair(sigma: &PartialPermutation, pts: &PointConfig) -> Result<(C, C)> {
    pts.require(sigma.vertices())?;
    let u: Vec<C> = sigma.vertices().map(|a| pts.u(a).conj()).collect();
    let v: Vec<C> = sigma.vertices().map(|a| pts.v(a)).collect();
    Ok((vandermonde(&u), vandermonde(&v)))
}

struct Local {
    sigma: PartialPermutation,
    pts: PointConfig,
    back: BTreeMap<Vertex, Vertex>,
}

fn localise(sigma: &PartialPermutation, pts: &PointConfig) -> Result<Local> {
    pts.require(sigma.vertices())?;
    let (local, labels) = relabel_to_prefix(sigma);
    let f: BTreeMap<Vertex, Vertex> =
        labels.iter().enumerate().map(|(i, &v)| (v, i as Vertex + 1)).collect();
    let back = f.iter().map(|(&a, &b)| (b, a)).collect();
    Ok(Local { sigma: local, pts: pts.relabel(&f)?, back })
}

/// `∏_α ρ₂(u_α, v_{π⁻¹(α)})`.
fn rho2_product(pi: &PartialPermutation, pts: &PointConfig) -> Result<C> {
    let inv = pi.inverse();
    pi.vertices().try_fold(ONE, |acc, a| Ok(acc * rho2(pts.u(a), pts.v(inv.apply_or_fix(a)))?))
}

/// `ρ(σ) = Σ_{π⊴σ, 𝒱(π)=𝒱(σ)} 𝔯_π(∅) 𝔩_π(σ) ∏_α ρ₂(u_α, v_{π⁻¹(α)})`,
/// with all eigenvector components taken from one eigensystem on `𝒱(σ)`.
pub fn rho(sigma: &PartialPermutation, pts: &PointConfig) -> Result<CorrelationResult> {
    let local = localise(sigma, pts)?;
    let index = shared_index(local.sigma.size())?;
    let nm = build_nmatrix(index, &local.pts)?;
    let es = solve_eigensystem(&nm)?;
    let top = index.index_of(&local.sigma)?;
    let mut terms = Vec::new();
    let mut value = C::new(0.0, 0.0);
    for (k, pi) in index.elements().iter().enumerate() {
        if pi.size() != local.sigma.size() || !index.leq(k, top) {
            continue;
        }
        let term = es.r[(0, k)] * es.l[(k, top)] * rho2_product(pi, &local.pts)?;
        value += term;
        terms.push((pi.relabel(&local.back), term));
    }
    Ok(CorrelationResult { sigma: sigma.clone(), pts: pts.clone(), value, terms })
}

/// `ρ(σ)` through the identity-row form
/// `Σ 𝔯_π(∅) 𝔩_𝙸(σ∘π⁻¹; z, π⁻¹(w)) ∏ ρ₂`, where each left component is
/// solved afresh on the configuration with permuted `w`.
pub fn rho_via_identity(sigma: &PartialPermutation, pts: &PointConfig) -> Result<C> {
    let local = localise(sigma, pts)?;
    let index = shared_index(local.sigma.size())?;
    let r = solve_right_eigenvectors(&build_nmatrix(index, &local.pts)?)?;
    let identity = PartialPermutation::identity(local.sigma.vertices());
    let mut value = C::new(0.0, 0.0);
    for (k, pi) in index.elements().iter().enumerate() {
        if pi.size() != local.sigma.size() || !index.leq(k, index.index_of(&local.sigma)?) {
            continue;
        }
        let inv = pi.inverse();
        let g: BTreeMap<Vertex, Vertex> = pi.vertices().map(|a| (a, inv.apply_or_fix(a))).collect();
        let shifted = local.pts.permute_w(&g)?;
        let target = local.sigma.compose(&inv)?;
        let l = left_component(&identity, &target, &shifted)?;
        value += r[(0, k)] * l * rho2_product(pi, &local.pts)?;
    }
    Ok(value)
}

/// `ρ(σ) = ∏_k ρ(ℒ_k)` over the cycles `ℒ_k` of `σ`.
pub fn rho_factorized(sigma: &PartialPermutation, pts: &PointConfig) -> Result<C> {
    sigma.cycle_parts().iter().try_fold(ONE, |acc, cycle| {
        Ok(acc * rho(cycle, &pts.restrict(&cycle.support())?)?.value)
    })
}

/// The closed four-point function
/// `((ν₂−ν₄)(ν̄₁−ν̄₃))⁻¹ [ρ₂(ν₁,ν₂)ρ₂(ν₃,ν₄) − ρ₂(ν₁,ν₄)ρ₂(ν₃,ν₂)]`.
pub fn rho4_closed(nu: [C; 4]) -> Result<C> {
    let [n1, n2, n3, n4] = nu;
    for (a, b) in [(n2, n4), (n1, n3)] {
        let d = (a - b).norm();
        if d <= 1e-14 * 1f64.max(a.norm()).max(b.norm()) {
            return Err(Error::CoincidentPoints(d));
        }
    }
    let bracket = rho2(n1, n2)? * rho2(n3, n4)? - rho2(n1, n4)? * rho2(n3, n2)?;
    Ok(bracket / ((n2 - n4) * (n1.conj() - n3.conj())))
}

/// `𝔏_σ` and `𝔕_σ` at a configuration.
pub fn poly_eval(sigma: &PartialPermutation, pts: &PointConfig) -> Result<PolynomialEval> {
    poly_eval_inner(sigma, pts, None)
}

/// As [`poly_eval`], with `h(z_β, w_α)` replaced by `table(β, α)` (labels
/// relative to `𝒱(σ)` mapped onto `1..=k`). The values do not depend on the table.
pub fn poly_eval_with(
    sigma: &PartialPermutation,
    pts: &PointConfig,
    table: &dyn Fn(Vertex, Vertex) -> Result<C>,
) -> Result<PolynomialEval> {
    poly_eval_inner(sigma, pts, Some(table))
}

fn poly_eval_inner(
    sigma: &PartialPermutation,
    pts: &PointConfig,
    table: Option<&dyn Fn(Vertex, Vertex) -> Result<C>>,
) -> Result<PolynomialEval> {
    let local = localise(sigma, pts)?;
    let index = shared_index(local.sigma.size())?;
    let nm = match table {
        Some(t) => build_nmatrix_with(index, &local.pts, t)?,
        None => build_nmatrix(index, &local.pts)?,
    };
    let identity = PartialPermutation::identity(local.sigma.vertices());
    let l = entry(index, &solve_left_eigenvectors(&nm)?, &identity, &local.sigma)?;
    let r = entry(index, &solve_right_eigenvectors(&nm)?, &PartialPermutation::empty(), &local.sigma)?;
    let (vu, vv) = vandermonde_pair(&local.sigma, &local.pts)?;
    Ok(PolynomialEval {
        sigma: sigma.clone(),
        l_value: vu * vv * l,
        r_value: vu * vv * r,
        vandermonde_u: vu,
        vandermonde_v: vv,
    })
}

pub fn poly_l(sigma: &PartialPermutation, pts: &PointConfig) -> Result<C> {
    Ok(poly_eval(sigma, pts)?.l_value)
}

pub fn poly_r(sigma: &PartialPermutation, pts: &PointConfig) -> Result<C> {
    Ok(poly_eval(sigma, pts)?.r_value)
}

/// `z̄ ↦ t z̄`, `w ↦ t w`.
pub fn scale_config(pts: &PointConfig, t: C) -> Result<PointConfig> {
    PointConfig::new(pts.points().map(|(v, z, w)| (v, t.conj() * z, t * w)))
}

/// Measured degrees of `𝔏` and `𝔕` under scaling of the `ū` family, the `v`
/// family, and both at once.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homogeneity {
    pub l_conj: f64,
    pub l_w: f64,
    pub l_joint: f64,
    pub r_conj: f64,
    pub r_w: f64,
    pub r_joint: f64,
}

/// Degrees read off from `P(t·x) = tᵈ P(x)` as `log|ratio| / log|t|`.
pub fn homogeneity_exponent(sigma: &PartialPermutation, pts: &PointConfig, t: C) -> Result<Homogeneity> {
    if (t.norm() - 1.0).abs() < 1e-3 {
        return Err(Error::Invalid("|t| must differ from 1".into()));
    }
    let one = C::new(1.0, 0.0);
    let base = poly_eval(sigma, pts)?;
    let lt = t.norm().ln();
    let measure = |a: C, b: C| -> Result<(f64, f64)> {
        let moved = PointConfig::new(pts.points().map(|(v, z, w)| (v, a.conj() * z, b * w)))?;
        let m = poly_eval(sigma, &moved)?;
        Ok(((m.l_value / base.l_value).norm().ln() / lt, (m.r_value / base.r_value).norm().ln() / lt))
    };
    let (l_conj, r_conj) = measure(t, one)?;
    let (l_w, r_w) = measure(one, t)?;
    let (l_joint, r_joint) = measure(t, t)?;
    Ok(Homogeneity { l_conj, l_w, l_joint, r_conj, r_w, r_joint })
}

/// `(𝔏_σ, 𝔕_σ)` at a possibly degenerate configuration, read off as the
/// constant term of `s ↦ P(z̄ + s·a, w + s·b)` by averaging over a circle of
/// `samples` points of radius `radius`. Exact when `samples` exceeds the degree.
pub fn poly_at_degenerate(
    sigma: &PartialPermutation,
    pts: &PointConfig,
    direction: &PointConfig,
    radius: f64,
    samples: usize,
    table: &dyn Fn(Vertex, Vertex) -> Result<C>,
) -> Result<(C, C)> {
    let mut acc = (C::new(0.0, 0.0), C::new(0.0, 0.0));
    for k in 0..samples {
        let s = C::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / samples as f64);
        let moved = PointConfig::new(pts.points().map(|(v, z, w)| {
            let (da, db) = direction.get(v).unwrap_or_default();
            (v, (z.conj() + s * da).conj(), w + s * db)
        }))?;
        let p = poly_eval_with(sigma, &moved, table)?;
        acc.0 += p.l_value;
        acc.1 += p.r_value;
    }
    Ok((acc.0 / samples as f64, acc.1 / samples as f64))
}
