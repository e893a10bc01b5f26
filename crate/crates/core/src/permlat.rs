//! Partial permutations, the step relation `⪯`, its order closure `⊴`,
//! subloop and crossing tests, and the ordered lattice index over `𝒮_ℓ`.
//!
//! A partial permutation remembers its support: `(1,2,3)` and `(1,2,3)(4)`
//! are different values. Fixed points are stored explicitly.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub type Vertex = u32;

/// Largest lattice size built by default (`|𝒮_6| = 1957`).
pub const DEFAULT_CAP: usize = 6;

/// Largest cycle accepted by [`interval_decomposition_oracle`].
pub const ORACLE_CAP: usize = 8;

/// A bijection of a finite vertex set onto itself.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartialPermutation {
    map: BTreeMap<Vertex, Vertex>,
}

impl PartialPermutation {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The identity `𝙸_A`.
    pub fn identity<I: IntoIterator<Item = Vertex>>(vertices: I) -> Self {
        Self {
            map: vertices.into_iter().map(|v| (v, v)).collect(),
        }
    }

    pub fn from_map(map: BTreeMap<Vertex, Vertex>) -> Result<Self> {
        if map.contains_key(&0) {
            return Err(Error::InvalidPermutation("vertex labels must be positive".into()));
        }
        let images: BTreeSet<Vertex> = map.values().copied().collect();
        if images.len() != map.len() || !images.iter().all(|v| map.contains_key(v)) {
            return Err(Error::InvalidPermutation(
                "map is not a bijection of its support".into(),
            ));
        }
        Ok(Self { map })
    }

    /// Builds a permutation from disjoint cycles; fixed points are listed as
    /// one-element cycles.
    pub fn from_cycles<C: AsRef<[Vertex]>>(cycles: &[C]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for cycle in cycles {
            let cycle = cycle.as_ref();
            if cycle.is_empty() {
                return Err(Error::InvalidPermutation("empty cycle".into()));
            }
            for (k, &v) in cycle.iter().enumerate() {
                if v == 0 {
                    return Err(Error::InvalidPermutation("vertex labels must be positive".into()));
                }
                let next = cycle[(k + 1) % cycle.len()];
                if map.insert(v, next).is_some() {
                    return Err(Error::InvalidPermutation(format!(
                        "vertex {v} appears in more than one place"
                    )));
                }
            }
        }
        Ok(Self { map })
    }

    pub fn cycle(vertices: &[Vertex]) -> Result<Self> {
        Self::from_cycles(&[vertices])
    }

    pub fn support(&self) -> BTreeSet<Vertex> {
        self.map.keys().copied().collect()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.map.keys().copied()
    }

    /// `|𝒱(σ)|`.
    pub fn size(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.map.contains_key(&v)
    }

    pub fn get(&self, v: Vertex) -> Option<Vertex> {
        self.map.get(&v).copied()
    }

    /// `σ(v)`, with the convention `σ(v) = v` off the support.
    pub fn apply_or_fix(&self, v: Vertex) -> Vertex {
        self.get(v).unwrap_or(v)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        self.map.iter().map(|(&a, &b)| (a, b))
    }

    /// Cycles in canonical form: each starts at its smallest vertex, and
    /// cycles are sorted by that vertex.
    pub fn cycles(&self) -> Vec<Vec<Vertex>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &start in self.map.keys() {
            if seen.contains(&start) {
                continue;
            }
            let mut cycle = vec![start];
            seen.insert(start);
            let mut v = self.map[&start];
            while v != start {
                cycle.push(v);
                seen.insert(v);
                v = self.map[&v];
            }
            out.push(cycle);
        }
        out
    }

    /// `|σ|`, the number of cycles.
    pub fn cycle_count(&self) -> usize {
        self.cycles().len()
    }

    pub fn is_cycle(&self) -> bool {
        self.cycle_count() == 1
    }

    /// The cycles as separate single-cycle permutations.
    pub fn cycle_parts(&self) -> Vec<PartialPermutation> {
        self.cycles()
            .iter()
            .map(|c| PartialPermutation::cycle(c).expect("cycle of a valid permutation"))
            .collect()
    }

    /// `ℰ(σ) = {(v, σ(v))}`.
    pub fn edge_set(&self) -> BTreeSet<(Vertex, Vertex)> {
        self.pairs().collect()
    }

    pub fn inverse(&self) -> Self {
        Self {
            map: self.map.iter().map(|(&a, &b)| (b, a)).collect(),
        }
    }

    /// `self ∘ other`; both must have the same support.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if !self.map.keys().eq(other.map.keys()) {
            return Err(Error::SupportMismatch(format!(
                "cannot compose {self} with {other}"
            )));
        }
        Ok(Self {
            map: other.map.iter().map(|(&a, &b)| (a, self.map[&b])).collect(),
        })
    }

    /// `σ|_A`; `A` must be a union of cycles of `σ`.
    pub fn restrict(&self, a: &BTreeSet<Vertex>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for &v in a {
            match self.get(v) {
                Some(img) if a.contains(&img) => {
                    map.insert(v, img);
                }
                Some(_) => {
                    return Err(Error::SupportMismatch(format!(
                        "restriction of {self} is not closed at vertex {v}"
                    )))
                }
                None => {
                    return Err(Error::SupportMismatch(format!(
                        "vertex {v} is not in the support of {self}"
                    )))
                }
            }
        }
        Ok(Self { map })
    }

    /// `U_A^B(σ)`: extends `σ` by fixed points on `B ∖ A`.
    pub fn extend_to(&self, b: &BTreeSet<Vertex>) -> Result<Self> {
        if !self.map.keys().all(|v| b.contains(v)) {
            return Err(Error::SupportMismatch(format!(
                "support of {self} is not contained in the target set"
            )));
        }
        let mut map = self.map.clone();
        for &v in b {
            map.entry(v).or_insert(v);
        }
        Ok(Self { map })
    }

    /// Applies a vertex relabelling `v ↦ f(v)`; `f` must be injective on the support.
    pub fn relabel(&self, f: &BTreeMap<Vertex, Vertex>) -> Self {
        Self {
            map: self.map.iter().map(|(a, b)| (f[a], f[b])).collect(),
        }
    }

    /// Disjoint union; supports must not overlap.
    pub fn disjoint_union(&self, other: &Self) -> Result<Self> {
        let mut map = self.map.clone();
        for (a, b) in other.pairs() {
            if map.insert(a, b).is_some() {
                return Err(Error::SupportMismatch(format!("{self} and {other} overlap")));
            }
        }
        Ok(Self { map })
    }

    /// Images listed in increasing order of the support.
    pub fn one_line(&self) -> Vec<Vertex> {
        self.map.values().copied().collect()
    }

    fn sort_key(&self) -> (usize, Reverse<usize>, Vec<Vertex>, Vec<Vertex>) {
        (
            self.size(),
            Reverse(self.cycle_count()),
            self.map.keys().copied().collect(),
            self.one_line(),
        )
    }
}

impl fmt::Display for PartialPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "()");
        }
        for cycle in self.cycles() {
            let parts: Vec<String> = cycle.iter().map(|v| v.to_string()).collect();
            write!(f, "({})", parts.join(","))?;
        }
        Ok(())
    }
}

impl fmt::Debug for PartialPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for PartialPermutation {
    type Err = Error;

    /// Parses compact cycle notation such as `(1,2)(3)`; `()` or an empty
    /// string is the empty permutation.
    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() || s == "()" || s == "∅" {
            return Ok(Self::empty());
        }
        let bad = || Error::InvalidPermutation(format!("cannot parse {s:?}"));
        let mut cycles = Vec::new();
        let mut rest = s.as_str();
        while !rest.is_empty() {
            let body = rest.strip_prefix('(').ok_or_else(bad)?;
            let end = body.find(')').ok_or_else(bad)?;
            let cycle = body[..end]
                .split(',')
                .map(|t| t.parse::<Vertex>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            cycles.push(cycle);
            rest = &body[end + 1..];
        }
        Self::from_cycles(&cycles)
    }
}

fn is_subset(a: &PartialPermutation, b: &PartialPermutation) -> bool {
    a.vertices().all(|v| b.contains(v))
}

/// `|ℰ(σ) ∩ ℰ(τ)|`.
pub fn common_edges(sigma: &PartialPermutation, tau: &PartialPermutation) -> usize {
    sigma.pairs().filter(|&(a, b)| tau.get(a) == Some(b)).count()
}

/// The step relation `σ ⪯ τ`, by the edge count
/// `𝒱(σ) ⊆ 𝒱(τ)` and `|𝒱(σ)| + |τ| − |σ| − 1 ≤ |ℰ(σ,τ)|`.
pub fn leq_step(sigma: &PartialPermutation, tau: &PartialPermutation) -> bool {
    if sigma == tau {
        return true;
    }
    if !is_subset(sigma, tau) {
        return false;
    }
    let lhs = sigma.size() as i64 + tau.cycle_count() as i64 - sigma.cycle_count() as i64 - 1;
    lhs <= common_edges(sigma, tau) as i64
}

/// `σ ≺ τ`: `σ ⪯ τ` and `σ ≠ τ`.
pub fn lt_step(sigma: &PartialPermutation, tau: &PartialPermutation) -> bool {
    sigma != tau && leq_step(sigma, tau)
}

fn require_cycle(p: &PartialPermutation, what: &str) -> Result<()> {
    if p.is_cycle() {
        Ok(())
    } else {
        Err(Error::InvalidPermutation(format!("{what} = {p} is not a single cycle")))
    }
}

/// Subloop test: `τ ∘ σ⁻¹` has at most one non-fixed point on `𝒱(σ)`.
///
/// This holds exactly when `σ` closes up a run of consecutive vertices of `τ`.
pub fn is_subloop(sigma: &PartialPermutation, tau: &PartialPermutation) -> Result<bool> {
    require_cycle(sigma, "σ")?;
    require_cycle(tau, "τ")?;
    if !is_subset(sigma, tau) {
        return Err(Error::SupportMismatch(format!("{sigma} is not supported inside {tau}")));
    }
    let sigma_inv = sigma.inverse();
    let moved = sigma
        .vertices()
        .filter(|&a| tau.apply_or_fix(sigma_inv.apply_or_fix(a)) != a)
        .count();
    Ok(moved <= 1)
}

/// Ordered-subloop test: the orbit of `σ` visits its vertices in the
/// cyclic order of `τ`, so `σ` is the cycle that `τ` induces on `𝒱(σ)`.
pub fn is_ordered_subloop(sigma: &PartialPermutation, tau: &PartialPermutation) -> Result<bool> {
    require_cycle(sigma, "σ")?;
    require_cycle(tau, "τ")?;
    if !is_subset(sigma, tau) {
        return Err(Error::SupportMismatch(format!("{sigma} is not supported inside {tau}")));
    }
    if sigma.size() < 3 {
        return Ok(true);
    }
    in_cyclic_order(tau, &sigma.cycles()[0])
}

fn orbit_positions(sigma: &PartialPermutation) -> HashMap<Vertex, usize> {
    sigma.cycles()[0]
        .iter()
        .enumerate()
        .map(|(k, &v)| (v, k))
        .collect()
}

/// Whether traversing the orbit of the cycle `σ` meets `vs` in the given
/// cyclic order. Lists with fewer than three vertices are always in order.
pub fn in_cyclic_order(sigma: &PartialPermutation, vs: &[Vertex]) -> Result<bool> {
    require_cycle(sigma, "σ")?;
    let distinct: BTreeSet<Vertex> = vs.iter().copied().collect();
    if distinct.len() != vs.len() {
        return Err(Error::Invalid(format!("repeated vertices in {vs:?}")));
    }
    if let Some(v) = vs.iter().find(|&&v| !sigma.contains(v)) {
        return Err(Error::Invalid(format!("vertex {v} is not on {sigma}")));
    }
    if vs.len() < 3 {
        return Ok(true);
    }
    let pos = orbit_positions(sigma);
    let p: Vec<usize> = vs.iter().map(|v| pos[v]).collect();
    let descents = (0..p.len())
        .filter(|&k| p[(k + 1) % p.len()] < p[k])
        .count();
    Ok(descents == 1)
}

/// Whether the disjoint cycles `π1`, `π2` inside the cycle `σ` cross:
/// their vertex sets interleave along the orbit of `σ`, so that `𝒱(π2)`
/// does not fit inside a single gap between consecutive vertices of `π1`.
///
/// A fixed point never crosses anything.
pub fn are_crossing(
    pi1: &PartialPermutation,
    pi2: &PartialPermutation,
    sigma: &PartialPermutation,
) -> Result<bool> {
    require_cycle(pi1, "π1")?;
    require_cycle(pi2, "π2")?;
    require_cycle(sigma, "σ")?;
    if !is_subset(pi1, sigma) || !is_subset(pi2, sigma) {
        return Err(Error::SupportMismatch(format!(
            "{pi1} and {pi2} must lie on {sigma}"
        )));
    }
    if pi1.vertices().any(|v| pi2.contains(v)) {
        return Err(Error::SupportMismatch(format!("{pi1} and {pi2} overlap")));
    }
    if pi1.size() < 2 || pi2.size() < 2 {
        return Ok(false);
    }
    let pos = orbit_positions(sigma);
    let mut a: Vec<usize> = pi1.vertices().map(|v| pos[&v]).collect();
    a.sort_unstable();
    let gap = |b: usize| a.iter().filter(|&&x| x < b).count() % a.len();
    let gaps: BTreeSet<usize> = pi2.vertices().map(|v| gap(pos[&v])).collect();
    Ok(gaps.len() > 1)
}

fn containing_cycle(
    cycles: &[PartialPermutation],
    v: Vertex,
) -> Option<(usize, &PartialPermutation)> {
    cycles.iter().enumerate().find(|(_, c)| c.contains(v))
}

/// `σ ⪯ τ` by the subloop characterisation: every cycle of `σ` is a subloop
/// of a cycle of `τ`, and all but at most one cycle of `τ` are cycles of `σ`.
pub fn leq_step_by_subloops(sigma: &PartialPermutation, tau: &PartialPermutation) -> bool {
    if !is_subset(sigma, tau) {
        return false;
    }
    let tau_cycles = tau.cycle_parts();
    let sigma_cycles = sigma.cycle_parts();
    for c in &sigma_cycles {
        let first = c.vertices().next().expect("nonempty cycle");
        let (_, host) = containing_cycle(&tau_cycles, first).expect("support checked");
        if !is_subset(c, host) || !is_subloop(c, host).unwrap_or(false) {
            return false;
        }
    }
    let broken = tau_cycles.iter().filter(|t| !sigma_cycles.contains(t)).count();
    broken <= 1
}

/// `σ ⊴ τ` by the non-crossing characterisation: every cycle of `σ` is an
/// ordered subloop of a cycle of `τ`, and cycles of `σ` sharing a host
/// cycle are pairwise non-crossing.
pub fn leq_by_definition(sigma: &PartialPermutation, tau: &PartialPermutation) -> bool {
    if !is_subset(sigma, tau) {
        return false;
    }
    let tau_cycles = tau.cycle_parts();
    let mut hosted: Vec<Vec<PartialPermutation>> = vec![Vec::new(); tau_cycles.len()];
    for c in sigma.cycle_parts() {
        let first = c.vertices().next().expect("nonempty cycle");
        let (k, host) = containing_cycle(&tau_cycles, first).expect("support checked");
        if !is_subset(&c, host) || !is_ordered_subloop(&c, host).unwrap_or(false) {
            return false;
        }
        hosted[k].push(c);
    }
    for (k, group) in hosted.iter().enumerate() {
        for i in 0..group.len() {
            for j in i + 1..group.len() {
                if are_crossing(&group[i], &group[j], &tau_cycles[k]).unwrap_or(true) {
                    return false;
                }
            }
        }
    }
    true
}

/// `𝒱_nf(σ;τ) = {β ∈ 𝒱(σ) : τ(σ⁻¹(β)) ≠ β}`; requires `σ ⪯ τ`.
pub fn nonfixed(sigma: &PartialPermutation, tau: &PartialPermutation) -> Result<BTreeSet<Vertex>> {
    if !leq_step(sigma, tau) {
        return Err(Error::NotComparable(sigma.to_string(), tau.to_string()));
    }
    let sigma_inv = sigma.inverse();
    Ok(sigma
        .vertices()
        .filter(|&b| tau.apply_or_fix(sigma_inv.apply_or_fix(b)) != b)
        .collect())
}

/// `𝒱̂_nf(σ;τ) = 𝒱_nf(σ;τ) ∪ (𝒱(τ) ∖ 𝒱(σ))`; requires `σ ⪯ τ`.
pub fn hat_nonfixed(
    sigma: &PartialPermutation,
    tau: &PartialPermutation,
) -> Result<BTreeSet<Vertex>> {
    let mut out = nonfixed(sigma, tau)?;
    out.extend(tau.vertices().filter(|&v| !sigma.contains(v)));
    Ok(out)
}

/// `σ⁻¹(𝒱̂_nf(σ;τ))` with `σ⁻¹(α) = α` off the support of `σ`.
pub fn hat_nonfixed_preimage(
    sigma: &PartialPermutation,
    tau: &PartialPermutation,
) -> Result<BTreeSet<Vertex>> {
    let sigma_inv = sigma.inverse();
    Ok(hat_nonfixed(sigma, tau)?
        .into_iter()
        .map(|a| sigma_inv.apply_or_fix(a))
        .collect())
}

/// Every `σ ⪯ τ` for a single cycle `τ`, built by cutting the orbit of `τ`
/// into consecutive intervals and either deleting each interval or closing
/// it into a cycle.
pub fn interval_decomposition_oracle(
    tau: &PartialPermutation,
) -> Result<BTreeSet<PartialPermutation>> {
    require_cycle(tau, "τ")?;
    let orbit = &tau.cycles()[0];
    let m = orbit.len();
    if m > ORACLE_CAP {
        return Err(Error::CapExceeded { ell: m, cap: ORACLE_CAP });
    }
    let mut out = BTreeSet::new();
    for cuts in 1u32..(1 << m) {
        let starts: Vec<usize> = (0..m).filter(|&p| cuts & (1 << p) != 0).collect();
        let intervals: Vec<Vec<Vertex>> = (0..starts.len())
            .map(|k| {
                let from = starts[k];
                let to = if k + 1 < starts.len() { starts[k + 1] } else { starts[0] + m };
                (from..to).map(|p| orbit[p % m]).collect()
            })
            .collect();
        for keep in 0u32..(1 << intervals.len()) {
            let kept: Vec<&Vec<Vertex>> = intervals
                .iter()
                .enumerate()
                .filter(|(k, _)| keep & (1 << k) != 0)
                .map(|(_, iv)| iv)
                .collect();
            out.insert(PartialPermutation::from_cycles(&kept)?);
        }
    }
    Ok(out)
}

/// Every `σ ⪯ τ` for arbitrary `τ`: at most one cycle is decomposed by
/// [`interval_decomposition_oracle`], the others are kept.
pub fn step_downset_oracle(tau: &PartialPermutation) -> Result<BTreeSet<PartialPermutation>> {
    let parts = tau.cycle_parts();
    let mut out = BTreeSet::from([tau.clone()]);
    for (k, cycle) in parts.iter().enumerate() {
        let mut rest = PartialPermutation::empty();
        for (j, other) in parts.iter().enumerate() {
            if j != k {
                rest = rest.disjoint_union(other)?;
            }
        }
        for piece in interval_decomposition_oracle(cycle)? {
            out.insert(rest.disjoint_union(&piece)?);
        }
    }
    Ok(out)
}

/// `σ ⊴ τ`: a chain `σ = π₀ ⪯ π₁ ⪯ … ⪯ π_m = τ` exists. Computed by
/// reachability downward from `τ`.
pub fn leq(sigma: &PartialPermutation, tau: &PartialPermutation) -> bool {
    if !is_subset(sigma, tau) {
        return false;
    }
    let mut seen = BTreeSet::new();
    let mut stack = vec![tau.clone()];
    while let Some(p) = stack.pop() {
        if &p == sigma {
            return true;
        }
        if !seen.insert(p.clone()) {
            continue;
        }
        let below = match step_downset_oracle(&p) {
            Ok(b) => b,
            Err(_) => down_by_edge_count(&p),
        };
        for q in below {
            if q != p && is_subset(sigma, &q) && !seen.contains(&q) {
                stack.push(q);
            }
        }
    }
    false
}

fn down_by_edge_count(tau: &PartialPermutation) -> BTreeSet<PartialPermutation> {
    let verts: Vec<Vertex> = tau.vertices().collect();
    let mut out = BTreeSet::new();
    for mask in 0u64..(1 << verts.len()) {
        let sub: Vec<Vertex> = (0..verts.len())
            .filter(|&k| mask & (1 << k) != 0)
            .map(|k| verts[k])
            .collect();
        for p in all_permutations_of(&sub) {
            if leq_step(&p, tau) {
                out.insert(p);
            }
        }
    }
    out
}

/// All bijections of `vs` onto itself.
pub fn all_permutations_of(vs: &[Vertex]) -> Vec<PartialPermutation> {
    let mut out = Vec::new();
    let mut images = vs.to_vec();
    permute(&mut images, 0, &mut |img| {
        let map = vs.iter().copied().zip(img.iter().copied()).collect();
        out.push(PartialPermutation { map });
    });
    out
}

fn permute(a: &mut [Vertex], k: usize, f: &mut dyn FnMut(&[Vertex])) {
    if k == a.len() {
        f(a);
        return;
    }
    for i in k..a.len() {
        a.swap(k, i);
        permute(a, k + 1, f);
        a.swap(k, i);
    }
}

/// Maps the support of `σ` onto `1..=k` preserving order. Returns the
/// relabelled permutation and the original labels (`labels[i]` is the
/// original name of vertex `i + 1`).
pub fn relabel_to_prefix(sigma: &PartialPermutation) -> (PartialPermutation, Vec<Vertex>) {
    let labels: Vec<Vertex> = sigma.vertices().collect();
    let f: BTreeMap<Vertex, Vertex> = labels
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i as Vertex + 1))
        .collect();
    (sigma.relabel(&f), labels)
}

/// `{π : π ⊴ σ, 𝒱(π) = 𝒱(σ)}` in lattice order.
pub fn full_support_downset(sigma: &PartialPermutation) -> Result<Vec<PartialPermutation>> {
    let (local, labels) = relabel_to_prefix(sigma);
    let index = shared_index(labels.len())?;
    let top = index.position(&local).expect("element of its own lattice");
    let back: BTreeMap<Vertex, Vertex> = labels
        .iter()
        .enumerate()
        .map(|(i, &v)| (i as Vertex + 1, v))
        .collect();
    Ok((0..index.len())
        .filter(|&i| index.elements[i].size() == local.size() && index.leq(i, top))
        .map(|i| index.elements[i].relabel(&back))
        .collect())
}

#[derive(Clone, Debug)]
struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    fn new(n: usize) -> Self {
        Self { words: vec![0; n.div_ceil(64)] }
    }

    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn contains(&self, i: usize) -> bool {
        self.words[i / 64] & (1 << (i % 64)) != 0
    }

    fn union_with(&mut self, other: &BitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }
}

/// Every partial permutation supported in `[ℓ] = {1, …, ℓ}`, sorted by
/// (support size ascending, cycle count descending, support, one-line
/// notation). The order is a linear extension of `⊴`.
#[derive(Clone, Debug)]
pub struct OrderedIndex {
    ell: usize,
    elements: Vec<PartialPermutation>,
    positions: HashMap<PartialPermutation, usize>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    down: Vec<BitSet>,
}

impl OrderedIndex {
    pub fn new(ell: usize) -> Result<Self> {
        Self::with_cap(ell, DEFAULT_CAP)
    }

    pub fn with_cap(ell: usize, cap: usize) -> Result<Self> {
        if ell > cap || ell > 8 {
            return Err(Error::CapExceeded { ell, cap: cap.min(8) });
        }
        let mut elements = Vec::new();
        for mask in 0u32..(1 << ell) {
            let vs: Vec<Vertex> = (0..ell as u32)
                .filter(|k| mask & (1 << k) != 0)
                .map(|k| k + 1)
                .collect();
            elements.extend(all_permutations_of(&vs));
        }
        elements.sort_by_cached_key(|p| p.sort_key());
        let positions = elements
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();

        let n = elements.len();
        let mut images = vec![[0u8; 9]; n];
        let mut masks = vec![0u32; n];
        let mut counts = vec![0i64; n];
        for (i, p) in elements.iter().enumerate() {
            for (a, b) in p.pairs() {
                images[i][a as usize] = b as u8;
                masks[i] |= 1 << a;
            }
            counts[i] = p.cycle_count() as i64;
        }
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for j in 0..n {
            for i in 0..j {
                if masks[i] & !masks[j] != 0 {
                    continue;
                }
                let common = (1..=ell)
                    .filter(|&v| images[i][v] != 0 && images[i][v] == images[j][v])
                    .count() as i64;
                let size = masks[i].count_ones() as i64;
                if size + counts[j] - counts[i] - 1 <= common {
                    preds[j].push(i);
                    succs[i].push(j);
                }
            }
        }
        let mut down: Vec<BitSet> = Vec::with_capacity(n);
        for j in 0..n {
            let mut set = BitSet::new(n);
            set.insert(j);
            for &i in &preds[j] {
                set.union_with(&down[i]);
            }
            down.push(set);
        }
        Ok(Self { ell, elements, positions, preds, succs, down })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[PartialPermutation] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &PartialPermutation {
        &self.elements[i]
    }

    pub fn position(&self, sigma: &PartialPermutation) -> Option<usize> {
        self.positions.get(sigma).copied()
    }

    pub fn index_of(&self, sigma: &PartialPermutation) -> Result<usize> {
        self.position(sigma).ok_or_else(|| {
            Error::SupportMismatch(format!("{sigma} is not in the lattice of size {}", self.ell))
        })
    }

    /// Positions `i` with `element(i) ≺ element(j)`, increasing.
    pub fn preds(&self, j: usize) -> &[usize] {
        &self.preds[j]
    }

    /// Positions `j` with `element(i) ≺ element(j)`, increasing.
    pub fn succs(&self, i: usize) -> &[usize] {
        &self.succs[i]
    }

    /// `element(i) ≺ element(j)`.
    pub fn is_step(&self, i: usize, j: usize) -> bool {
        i < j && self.preds[j].binary_search(&i).is_ok()
    }

    /// `element(i) ⊴ element(j)`.
    pub fn leq(&self, i: usize, j: usize) -> bool {
        self.down[j].contains(i)
    }

    /// `{σ : σ ≺ τ}`.
    pub fn predecessors(&self, tau: &PartialPermutation) -> Result<Vec<PartialPermutation>> {
        let j = self.index_of(tau)?;
        Ok(self.preds[j].iter().map(|&i| self.elements[i].clone()).collect())
    }
}

/// A process-wide copy of the lattice index for `ℓ ≤ DEFAULT_CAP`, built on first use.
pub fn shared_index(ell: usize) -> Result<&'static OrderedIndex> {
    static CACHE: [OnceLock<OrderedIndex>; DEFAULT_CAP + 1] =
        [const { OnceLock::new() }; DEFAULT_CAP + 1];
    if ell > DEFAULT_CAP {
        return Err(Error::CapExceeded { ell, cap: DEFAULT_CAP });
    }
    Ok(CACHE[ell].get_or_init(|| OrderedIndex::new(ell).expect("within cap")))
}

/// `enumerate_lattice(ℓ)` with the default cap.
pub fn enumerate_lattice(ell: usize) -> Result<OrderedIndex> {
    OrderedIndex::new(ell)
}
