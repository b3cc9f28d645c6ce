//! Whitney jets on finite point sets: Taylor remainders, the Beurling and
//! weight-matrix seminorms, growth profiles and the jet-to-weight pipeline.

mod format;
pub mod interpolant;
pub mod pipeline;

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;

use crate::conjugate::{weight_conjugate, weight_matrix};
use crate::error::{Error, Result};
use crate::weights::Weight;

pub use format::parse_jet;
pub use interpolant::{
    build_convex_interpolant, envelope_to_majorant, fit_offsets, ConvexInterpolant, ConvexProfile, FnProfile,
    Majorant, OffsetFit, Piece, PsiFamily, PsiStar,
};
pub use pipeline::{beurling_to_roumieu_pipeline, PipelineConfig, PipelineReport, StageOutcome};

/// A multi-index `α ∈ ℕⁿ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

/// All multi-indices of length `dim` with `|α| ≤ p`, graded and then
/// lexicographically ascending within each order.
pub fn graded_indices(dim: usize, p: u32) -> Vec<MultiIndex> {
    fn fill(dim: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == dim {
            prefix.push(left);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for a in 0..=left {
            prefix.push(a);
            fill(dim, left - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for k in 0..=p {
        if dim == 0 {
            break;
        }
        fill(dim, k, &mut Vec::with_capacity(dim), &mut out);
    }
    out
}

/// `k!` as `f64` for `k = 0..=n`.
pub fn factorials(n: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = 1.0;
    out.push(acc);
    for k in 1..=n {
        acc *= k as f64;
        out.push(acc);
    }
    out
}

/// A jet `(F^α(x))` on finite point set with every `|α| ≤ p_cap` present.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    dim: usize,
    points: Vec<Vec<f64>>,
    pcap: u32,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    /// Point-major dense storage in graded order.
    values: Vec<f64>,
    fact: Vec<f64>,
}

impl Jet {
    /// Builds a jet from possibly missing entries.
    pub fn from_entries(
        dim: usize,
        points: Vec<Vec<f64>>,
        pcap: u32,
        entries: impl IntoIterator<Item = (usize, MultiIndex, f64)>,
    ) -> Result<Self> {
        validate_points(dim, &points)?;
        let indices = graded_indices(dim, pcap);
        let lookup: HashMap<MultiIndex, usize> = indices.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        let mut slots: Vec<Option<f64>> = vec![None; points.len() * indices.len()];
        for (pt, alpha, v) in entries {
            if pt >= points.len() {
                return Err(Error::JetData(format!("point index {pt} out of range ({} points)", points.len())));
            }
            if alpha.dim() != dim {
                return Err(Error::JetData(format!("multi-index {alpha} has length {}, expected {dim}", alpha.dim())));
            }
            let Some(&i) = lookup.get(&alpha) else {
                return Err(Error::JetData(format!("multi-index {alpha} exceeds pcap {pcap}")));
            };
            if !v.is_finite() {
                return Err(Error::JetData(format!("value at point {pt}, alpha {alpha} is not finite")));
            }
            let slot = &mut slots[pt * indices.len() + i];
            if slot.is_some() {
                return Err(Error::JetData(format!("duplicate entry for point {pt}, alpha {alpha}")));
            }
            *slot = Some(v);
        }
        let mut values = Vec::with_capacity(slots.len());
        for (k, s) in slots.into_iter().enumerate() {
            match s {
                Some(v) => values.push(v),
                None => {
                    let (pt, i) = (k / indices.len(), k % indices.len());
                    return Err(Error::JetData(format!("missing value at point {pt}, alpha {}", indices[i])));
                }
            }
        }
        Ok(Jet { dim, points, pcap, indices, lookup, values, fact: factorials(pcap + 1) })
    }

    /// `F^α(x) = f(x, α)` for every point and `|α| ≤ pcap`.
    pub fn from_fn<F>(dim: usize, points: Vec<Vec<f64>>, pcap: u32, f: F) -> Result<Self>
    where
        F: Fn(&[f64], &MultiIndex) -> f64,
    {
        let indices = graded_indices(dim, pcap);
        let mut entries = Vec::with_capacity(points.len() * indices.len());
        for (i, x) in points.iter().enumerate() {
            for alpha in &indices {
                entries.push((i, alpha.clone(), f(x, alpha)));
            }
        }
        Self::from_entries(dim, points, pcap, entries)
    }

    /// The jet of the polynomial `Σ c · x^e` over `terms = [(c, e)]`.
    pub fn polynomial(dim: usize, points: Vec<Vec<f64>>, pcap: u32, terms: &[(f64, MultiIndex)]) -> Result<Self> {
        Self::from_fn(dim, points, pcap, |x, alpha| {
            terms.iter().map(|(c, e)| c * monomial_derivative(e, alpha, x)).sum()
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pcap(&self) -> u32 {
        self.pcap
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    fn index_of(&self, alpha: &MultiIndex) -> Result<usize> {
        self.lookup
            .get(alpha)
            .copied()
            .ok_or_else(|| Error::JetData(format!("no value for alpha {alpha} (pcap {})", self.pcap)))
    }

    fn at(&self, pt: usize, i: usize) -> f64 {
        self.values[pt * self.indices.len() + i]
    }

    pub fn value(&self, pt: usize, alpha: &MultiIndex) -> Result<f64> {
        if pt >= self.points.len() {
            return Err(Error::JetData(format!("point index {pt} out of range")));
        }
        Ok(self.at(pt, self.index_of(alpha)?))
    }

    /// The jet with every value multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Jet {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= lambda);
        out
    }

    /// The same values transported to points shifted by `v`.
    pub fn translated(&self, v: &[f64]) -> Jet {
        let mut out = self.clone();
        for p in &mut out.points {
            p.iter_mut().zip(v).for_each(|(x, s)| *x += s);
        }
        out
    }

    fn count_up_to(&self, q: u32) -> usize {
        self.indices.partition_point(|a| a.order() <= q)
    }

    /// `(R^p_x F)^α(y)`.
    pub fn remainder(&self, x: usize, y: usize, alpha: &MultiIndex, p: u32) -> Result<f64> {
        self.remainder_with(x, y, alpha, p, false)
    }

    /// As [`remainder`](Self::remainder); with `noise_floor` set, results
    /// within the rounding level of the summed terms are reported as 0.
    pub fn remainder_with(&self, x: usize, y: usize, alpha: &MultiIndex, p: u32, noise_floor: bool) -> Result<f64> {
        if x >= self.points.len() || y >= self.points.len() {
            return Err(Error::JetData(format!("point index out of range ({x}, {y})")));
        }
        let order = alpha.order();
        if order > p || p > self.pcap {
            return Err(Error::Argument(format!("need |alpha| <= p <= pcap, got |alpha| = {order}, p = {p}, pcap = {}", self.pcap)));
        }
        let ai = self.index_of(alpha)?;
        Ok(self.remainder_unchecked(x, y, ai, p, noise_floor))
    }

    fn remainder_unchecked(&self, x: usize, y: usize, ai: usize, p: u32, noise_floor: bool) -> f64 {
        let alpha = &self.indices[ai];
        let dx: Vec<f64> = self.points[y].iter().zip(&self.points[x]).map(|(b, a)| b - a).collect();
        let n_terms = self.count_up_to(p - alpha.order());
        let mut sum = 0.0;
        let mut abs_sum = 0.0;
        for beta in &self.indices[..n_terms] {
            let ab = alpha.add(beta);
            let mut num = self.at(x, self.lookup[&ab]);
            let mut beta_fact = 1.0;
            for (i, &b) in beta.0.iter().enumerate() {
                num *= dx[i].powi(b as i32);
                beta_fact *= self.fact[b as usize];
            }
            let term = num / beta_fact;
            sum += term;
            abs_sum += term.abs();
        }
        let fy = self.at(y, ai);
        let r = fy - sum;
        if noise_floor && r.abs() <= (n_terms as f64 + 2.0) * f64::EPSILON * (fy.abs() + abs_sum) {
            0.0
        } else {
            r
        }
    }
}

/// `∂^α x^e` evaluated at `x`.
pub fn monomial_derivative(e: &MultiIndex, alpha: &MultiIndex, x: &[f64]) -> f64 {
    let mut v = 1.0;
    for ((&ei, &ai), &xi) in e.0.iter().zip(&alpha.0).zip(x) {
        if ai > ei {
            return 0.0;
        }
        let falling: f64 = ((ei - ai + 1)..=ei).map(|k| k as f64).product();
        v *= falling * xi.powi((ei - ai) as i32);
    }
    v
}

fn validate_points(dim: usize, points: &[Vec<f64>]) -> Result<()> {
    if dim == 0 {
        return Err(Error::JetData("dimension must be at least 1".into()));
    }
    if points.is_empty() {
        return Err(Error::JetData("a jet needs at least one point".into()));
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::JetData(format!("point {i} has {} coordinates, expected {dim}", p.len())));
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::JetData(format!("point {i} has a non-finite coordinate")));
        }
        if points[..i].iter().any(|q| q == p) {
            return Err(Error::JetData(format!("point {i} repeats an earlier point")));
        }
    }
    Ok(())
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Location of a norm supremum: `(α, point)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormAt {
    pub alpha: MultiIndex,
    pub x: usize,
}

/// Location of a remainder supremum: `(p, α, x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeminormAt {
    pub p: u32,
    pub alpha: MultiIndex,
    pub x: usize,
    pub y: usize,
}

/// Both weighted suprema with their maximizers, and the per-order maxima
/// `max(N_k, S_k)` used by the stability heuristic.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSups {
    pub norm: f64,
    pub norm_at: Option<NormAt>,
    pub seminorm: f64,
    pub seminorm_at: Option<SeminormAt>,
    /// `N_k = sup_{|α|=k} sup_x |F^α(x)| / M_k`.
    pub norm_by_order: Vec<f64>,
    /// `S_p = sup_{|α|≤p} sup_{x≠y} |R| (p+1−|α|)! / (M_{p+1} |x−y|^{p+1−|α|})`.
    pub seminorm_by_order: Vec<f64>,
}

impl WeightedSups {
    pub fn by_order(&self) -> Vec<f64> {
        self.norm_by_order.iter().zip(&self.seminorm_by_order).map(|(a, b)| a.max(*b)).collect()
    }
}

/// Suprema of `|F^α(x)| e^{−L_{|α|}}` and of the scaled remainders against
/// `e^{−L_{p+1}}`, where `log_weights[k] = L_k` for `k = 0..=p_max+1`.
/// Ties keep the lexicographically smallest tuple.
pub fn weighted_sups(jet: &Jet, log_weights: &[f64], p_max: u32, noise_floor: bool) -> Result<WeightedSups> {
    if p_max > jet.pcap {
        return Err(Error::Argument(format!("p_max = {p_max} exceeds pcap = {}", jet.pcap)));
    }
    if log_weights.len() < p_max as usize + 2 {
        return Err(Error::Argument(format!("need {} log weights, got {}", p_max + 2, log_weights.len())));
    }
    let n_pts = jet.points.len();
    let mut norm_by_order = vec![0.0; p_max as usize + 1];
    let mut norm = 0.0;
    let mut norm_at = None;
    for (i, alpha) in jet.indices[..jet.count_up_to(p_max)].iter().enumerate() {
        let k = alpha.order() as usize;
        let scale = (-log_weights[k]).exp();
        for x in 0..n_pts {
            let v = jet.at(x, i).abs() * scale;
            if v > norm_by_order[k] {
                norm_by_order[k] = v;
            }
            if v > norm || norm_at.is_none() {
                norm = v;
                norm_at = Some(NormAt { alpha: alpha.clone(), x });
            }
        }
    }

    let per_p: Vec<(f64, Option<SeminormAt>)> = (0..=p_max)
        .into_par_iter()
        .map(|p| {
            let scale = (-log_weights[p as usize + 1]).exp();
            let mut best = 0.0;
            let mut at = None;
            for ai in 0..jet.count_up_to(p) {
                let alpha = &jet.indices[ai];
                let e = p + 1 - alpha.order();
                for x in 0..n_pts {
                    for y in 0..n_pts {
                        if x == y {
                            continue;
                        }
                        let r = jet.remainder_unchecked(x, y, ai, p, noise_floor);
                        let d = distance(&jet.points[x], &jet.points[y]);
                        let v = r.abs() * jet.fact[e as usize] / d.powi(e as i32) * scale;
                        if v > best || at.is_none() {
                            best = v;
                            at = Some(SeminormAt { p, alpha: alpha.clone(), x, y });
                        }
                    }
                }
            }
            (best, at)
        })
        .collect();
    let mut seminorm = 0.0;
    let mut seminorm_at = None;
    let mut seminorm_by_order = Vec::with_capacity(per_p.len());
    for (v, at) in per_p {
        seminorm_by_order.push(v);
        if at.is_some() && (v > seminorm || seminorm_at.is_none()) {
            seminorm = v;
            seminorm_at = at;
        }
    }
    Ok(WeightedSups { norm, norm_at, seminorm, seminorm_at, norm_by_order, seminorm_by_order })
}

/// `‖F‖^ω_{K,1/m}` and `|F|^ω_{K,1/m}` with `p ≤ p_max`, using `φ*` of the
/// normalized weight.
pub fn beurling_seminorms(jet: &Jet, w: &dyn Weight, m: u32, p_max: u32) -> Result<WeightedSups> {
    if m == 0 {
        return Err(Error::Argument("m must be at least 1".into()));
    }
    let mf = m as f64;
    let log_weights = (0..=p_max + 1)
        .into_par_iter()
        .map(|k| weight_conjugate(w, k as f64 / mf).map(|c| mf * c.value))
        .collect::<Result<Vec<f64>>>()?;
    weighted_sups(jet, &log_weights, p_max, false)
}

/// `a_k`, `b_k` and the step function `g` of a jet.
#[derive(Debug, Clone, PartialEq)]
pub struct JetGrowthProfile {
    /// `a_0, …, a_{p_max}`.
    pub a: Vec<f64>,
    /// `b_0 = 0, b_1, …, b_{p_max+1}`.
    pub b: Vec<f64>,
    /// `g(t) = log max{a_k, b_k, 1}` on `[k, k+1)`, `k = 0..=p_max`.
    pub g: Vec<f64>,
}

impl JetGrowthProfile {
    pub fn p_max(&self) -> u32 {
        self.g.len() as u32 - 1
    }

    /// `g(t)` for `t ∈ [0, p_max + 1)`.
    pub fn g_at(&self, t: f64) -> Option<f64> {
        if t < 0.0 {
            return None;
        }
        self.g.get(t.floor() as usize).copied()
    }
}

pub fn jet_growth_profile(jet: &Jet, p_max: u32, noise_floor: bool) -> Result<JetGrowthProfile> {
    let sups = weighted_sups(jet, &vec![0.0; p_max as usize + 2], p_max, noise_floor)?;
    let a = sups.norm_by_order;
    let mut b = vec![0.0];
    b.extend(sups.seminorm_by_order);
    let g = (0..=p_max as usize).map(|k| a[k].max(b[k]).max(1.0).ln()).collect();
    Ok(JetGrowthProfile { a, b, g })
}

/// One row of the membership table.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipRow {
    pub x: f64,
    pub norm: f64,
    pub seminorm: f64,
    /// Order at which `max(N_p, S_p)` peaks.
    pub peak_order: u32,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    /// Smallest stable `x` in the grid.
    pub x: Option<f64>,
    pub rows: Vec<MembershipRow>,
}

impl Membership {
    pub fn message(&self) -> String {
        match self.x {
            Some(x) => format!("membership evidence at x = {x}"),
            None => format!(
                "no membership evidence <= {}",
                self.rows.iter().map(|r| r.x).fold(f64::NEG_INFINITY, f64::max)
            ),
        }
    }
}

/// Stability of the per-order maxima: the peak lies in the first two thirds
/// of `0..=p_max` and the last third is nonincreasing.
pub fn is_stable(by_order: &[f64]) -> (bool, u32) {
    let mut peak = 0;
    for (k, v) in by_order.iter().enumerate() {
        if *v > by_order[peak] {
            peak = k;
        }
    }
    let n = by_order.len();
    let tail_start = (2 * (n - 1)) / 3;
    let tail_ok = by_order[tail_start..].windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    (peak < tail_start.max(1) && tail_ok, peak as u32)
}

/// Evaluates `‖F‖^{W^x}` and `|F|^{W^x}` (with `a = 1`) for every `x` in the
/// grid and returns the smallest `x` whose per-order maxima are stable.
/// Remainders use the noise floor.
pub fn roumieu_membership(jet: &Jet, w: &dyn Weight, x_grid: &[f64], p_max: u32) -> Result<Membership> {
    let mut rows = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let m = weight_matrix(w, x, p_max as usize + 1)?;
        let sups = weighted_sups(jet, &m.log_entries, p_max, true)?;
        let (stable, peak_order) = is_stable(&sups.by_order());
        rows.push(MembershipRow { x, norm: sups.norm, seminorm: sups.seminorm, peak_order, stable });
    }
    let x = rows.iter().filter(|r| r.stable).map(|r| r.x).fold(None, |acc: Option<f64>, x| {
        Some(acc.map_or(x, |a| a.min(x)))
    });
    Ok(Membership { x, rows })
}
