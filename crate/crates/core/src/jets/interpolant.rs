//! Offsets `C_j`, the family `ψ_j(t) = jψ*(t/j)`, a convex `h` squeezed
//! between `inf_j(ψ_j + C_j)` and `inf_j(ψ_j + D_j)`, and the majorant
//! `f(t) = h*(max{0, log t})`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use super::JetGrowthProfile;
use crate::conjugate::{conjugate_point, phi_of, s_cap_of, weight_conjugate, Phi, Truncated, INITIAL_S_MAX};
use crate::error::{Error, Result};
use crate::numeric::linspace;
use crate::weights::Weight;

/// Lower bound for every `C_j`.
pub const C_FLOOR: f64 = 1.0 + 1e-6;

/// Fitted offsets with the order at which each one is attained.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetFit {
    /// `C_1, …, C_{j_max}`.
    pub c: Vec<f64>,
    /// `k` maximizing `g(k) − ψ_j(k)`.
    pub argmax: Vec<u32>,
    /// `max_k (g(k) − ψ_j(k))` before flooring.
    pub excess: Vec<f64>,
    pub p_max: u32,
}

impl OffsetFit {
    /// First `j` (1-based) whose excess above the floor is attained in the
    /// last third of the sampled orders, i.e. where the growth of `g` is not
    /// dominated by `ψ_j` on the data.
    pub fn first_unstable(&self) -> Option<usize> {
        let tail = (2 * self.p_max).div_ceil(3).max(1);
        (0..self.c.len()).find(|&i| self.argmax[i] >= tail && self.excess[i] > C_FLOOR).map(|i| i + 1)
    }

    /// `C'_1 = C_1`, `C'_j = max(C_j, ρ C'_{j−1})`.
    pub fn raised(&self, rho: f64) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::with_capacity(self.c.len());
        for &c in &self.c {
            let prev = out.last().map_or(0.0, |p| rho * p);
            out.push(c.max(prev));
        }
        out
    }
}

/// `C_j = max(1 + 1e−6, max_{k ≤ p_max} (g(k) − jψ*(k/j)))` with `ψ*` the
/// conjugate of `σ∘exp` for the normalized `σ`.
pub fn fit_offsets(profile: &JetGrowthProfile, sigma: &dyn Weight, j_max: usize) -> Result<OffsetFit> {
    if j_max == 0 {
        return Err(Error::Argument("j_max must be at least 1".into()));
    }
    let p_max = profile.p_max();
    let rows = (1..=j_max)
        .into_par_iter()
        .map(|j| {
            let jf = j as f64;
            let mut best = f64::NEG_INFINITY;
            let mut at = 0;
            for (k, g) in profile.g.iter().enumerate() {
                let psi = jf * weight_conjugate(sigma, k as f64 / jf)?.value;
                let e = g - psi;
                if e > best {
                    best = e;
                    at = k as u32;
                }
            }
            Ok((best, at))
        })
        .collect::<Result<Vec<(f64, u32)>>>()?;
    Ok(OffsetFit {
        c: rows.iter().map(|r| r.0.max(C_FLOOR)).collect(),
        argmax: rows.iter().map(|r| r.1).collect(),
        excess: rows.iter().map(|r| r.0).collect(),
        p_max,
    })
}

/// Tabulated `ψ*` with exact first derivative: maximizers `s*(y)` are sampled
/// and interpolated linearly, and values are their running integral, so the
/// table is convex and `C¹` by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiStar {
    y: Vec<f64>,
    slope: Vec<f64>,
    value: Vec<f64>,
}

const UNIFORM_TOP: f64 = 8.0;
const UNIFORM_STEP: f64 = 1.0 / 256.0;
const GEOMETRIC_RATIO: f64 = 1.002;

fn psi_grid(y_top: f64) -> Vec<f64> {
    let head = y_top.min(UNIFORM_TOP);
    let mut ys = linspace(0.0, head, (head / UNIFORM_STEP).ceil() as usize + 1);
    let mut y = head;
    while y < y_top {
        y = (y * GEOMETRIC_RATIO).min(y_top);
        ys.push(y);
    }
    ys
}

/// Argmax jumps larger than this are bisected until the cell is negligible.
const JUMP: f64 = 0.05;
const MIN_CELL: f64 = 1e-10;

/// Inserts nodes into every cell across which the maximizer jumps, so the
/// integrated slope does not smear the kink of `ψ*`.
fn refine_jumps(phi: &Phi<'_>, s_cap: f64, y: &mut Vec<f64>, slope: &mut Vec<f64>) -> Result<()> {
    let mut out_y = Vec::with_capacity(y.len());
    let mut out_s = Vec::with_capacity(y.len());
    for i in 0..y.len() - 1 {
        out_y.push(y[i]);
        out_s.push(slope[i]);
        let mut stack = vec![(y[i], slope[i], y[i + 1], slope[i + 1])];
        let mut inner = Vec::new();
        while let Some((a, sa, b, sb)) = stack.pop() {
            if sb - sa <= JUMP || b - a <= MIN_CELL * (1.0 + b) {
                continue;
            }
            let m = 0.5 * (a + b);
            let sm = conjugate_point(phi, m, INITIAL_S_MAX, s_cap)?.argmax;
            inner.push((m, sm));
            stack.push((a, sa, m, sm));
            stack.push((m, sm, b, sb));
        }
        inner.sort_by(|p, q| p.0.total_cmp(&q.0));
        for (m, sm) in inner {
            out_y.push(m);
            out_s.push(sm);
        }
    }
    out_y.push(*y.last().unwrap());
    out_s.push(*slope.last().unwrap());
    *y = out_y;
    *slope = out_s;
    Ok(())
}

impl PsiStar {
    /// Tabulates the conjugate of `φ` on `[0, y_top]`.
    pub fn from_phi(phi: &Phi<'_>, s_cap: f64, y_top: f64) -> Result<Self> {
        if !(y_top > 0.0 && y_top.is_finite()) {
            return Err(Error::Argument(format!("y_top must be positive, got {y_top}")));
        }
        let y = psi_grid(y_top);
        let points = y
            .par_iter()
            .map(|&v| conjugate_point(phi, v, INITIAL_S_MAX, s_cap))
            .collect::<Result<Vec<_>>>()?;
        if let Some(p) = points.iter().find(|p| p.truncated) {
            return Err(Error::ArgmaxAtBoundary { y: y_top, s_max: p.s_max });
        }
        let mut y = y;
        let mut slope: Vec<f64> = points.iter().map(|p| p.argmax).collect();
        refine_jumps(phi, s_cap, &mut y, &mut slope)?;
        for i in 1..slope.len() {
            slope[i] = slope[i].max(slope[i - 1]);
        }
        let mut value = vec![0.0; y.len()];
        for i in 1..y.len() {
            value[i] = value[i - 1] + 0.5 * (y[i] - y[i - 1]) * (slope[i] + slope[i - 1]);
        }
        Ok(PsiStar { y, slope, value })
    }

    /// `ψ*` for `ψ = σ∘exp` of the normalized `σ`.
    pub fn from_weight(sigma: &dyn Weight, y_top: f64) -> Result<Self> {
        let t = Truncated(sigma);
        let phi = phi_of(&t);
        Self::from_phi(&phi, s_cap_of(sigma), y_top)
    }

    pub fn y_top(&self) -> f64 {
        *self.y.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn cell(&self, y: f64) -> Option<usize> {
        if !(y >= 0.0 && y <= self.y_top()) {
            return None;
        }
        Some(self.y.partition_point(|&v| v <= y).saturating_sub(1).min(self.y.len() - 2))
    }

    /// `ψ*(y)`, NaN outside `[0, y_top]`.
    pub fn value(&self, y: f64) -> f64 {
        let Some(i) = self.cell(y) else { return f64::NAN };
        let d = self.y[i + 1] - self.y[i];
        let u = y - self.y[i];
        self.value[i] + self.slope[i] * u + (self.slope[i + 1] - self.slope[i]) * u * u / (2.0 * d)
    }

    /// `(ψ*)′(y)`, NaN outside `[0, y_top]`.
    pub fn slope(&self, y: f64) -> f64 {
        let Some(i) = self.cell(y) else { return f64::NAN };
        let d = self.y[i + 1] - self.y[i];
        self.slope[i] + (self.slope[i + 1] - self.slope[i]) * (y - self.y[i]) / d
    }

    /// Smallest `y` with `(ψ*)′(y) ≥ s`, if inside the table.
    pub fn inverse_slope(&self, s: f64) -> Option<f64> {
        if self.slope[0] >= s {
            return Some(0.0);
        }
        let i = self.slope.partition_point(|&v| v < s);
        if i == self.slope.len() {
            return None;
        }
        let (a, b) = (self.slope[i - 1], self.slope[i]);
        let y = self.y[i - 1] + (s - a) / (b - a) * (self.y[i] - self.y[i - 1]);
        Some(y.min(self.y[i]))
    }
}

/// `ψ_i(t) = λ_i ψ*(t/λ_i)` for scales `λ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiFamily {
    pub base: Arc<PsiStar>,
    pub scales: Vec<f64>,
}

impl PsiFamily {
    pub fn new(base: Arc<PsiStar>, scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() || scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Argument("family scales must be positive and non-empty".into()));
        }
        Ok(PsiFamily { base, scales })
    }

    /// Scales `1, 2, …, j_max`.
    pub fn standard(base: Arc<PsiStar>, j_max: usize) -> Result<Self> {
        Self::new(base, (1..=j_max).map(|j| j as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn value(&self, i: usize, t: f64) -> f64 {
        let l = self.scales[i];
        l * self.base.value(t / l)
    }

    pub fn slope(&self, i: usize, t: f64) -> f64 {
        self.base.slope(t / self.scales[i])
    }

    pub fn inverse_slope(&self, i: usize, s: f64) -> Option<f64> {
        self.base.inverse_slope(s).map(|y| y * self.scales[i])
    }

    /// End of the tabulated domain of `ψ_i`.
    pub fn t_limit(&self, i: usize) -> f64 {
        self.scales[i] * self.base.y_top()
    }

    /// Grid checks of the four hypotheses on `grid`; the strict decrease of
    /// slopes is only required where `ψ_i′ > 0`.
    pub fn validate(&self, grid: &[f64]) -> Result<()> {
        let fail = |what: String| Err(Error::Construction(format!("family hypothesis fails: {what}")));
        let t_end = *grid.last().unwrap();
        let mid = grid[grid.len() / 2];
        for i in 0..self.len() {
            let j = i + 1;
            if self.value(i, 0.0) != 0.0 {
                return fail(format!("psi_{j}(0) != 0"));
            }
            for w in grid.windows(2) {
                let (a, b) = (w[0], w[1]);
                if self.value(i, b) < self.value(i, a) || self.slope(i, b) < self.slope(i, a) {
                    return fail(format!("psi_{j} not increasing and convex on [{a}, {b}]"));
                }
            }
            if !(self.slope(i, t_end) > self.slope(i, mid)) {
                return fail(format!("psi_{j}' does not grow on [{mid}, {t_end}]"));
            }
            if i + 1 < self.len() {
                for &t in grid.iter().filter(|&&t| t > 0.0) {
                    let (s0, s1) = (self.slope(i, t), self.slope(i + 1, t));
                    if s0 > 0.0 && !(s0 > s1) {
                        return fail(format!("psi_{j}'({t}) = {s0} is not above psi_{}'({t}) = {s1}", j + 1));
                    }
                }
                let gap = |t: f64| self.value(i, t) - self.value(i + 1, t);
                if !(gap(t_end) > gap(mid) && gap(mid) >= 0.0) {
                    return fail(format!("psi_{j} - psi_{} does not grow on [{mid}, {t_end}]", j + 1));
                }
            }
        }
        Ok(())
    }
}

/// A convex function on `[0, s_limit]` with its right derivative.
pub trait ConvexProfile: Send + Sync {
    fn value(&self, s: f64) -> f64;
    fn slope(&self, s: f64) -> f64;
    fn s_limit(&self) -> f64 {
        f64::INFINITY
    }
    fn label(&self) -> String {
        "h".into()
    }
}

/// Closure pair `(h, h′)` as a [`ConvexProfile`].
pub struct FnProfile<F, G> {
    pub value: F,
    pub slope: G,
    pub name: String,
}

impl<F, G> FnProfile<F, G>
where
    F: Fn(f64) -> f64 + Send + Sync,
    G: Fn(f64) -> f64 + Send + Sync,
{
    pub fn new(name: impl Into<String>, value: F, slope: G) -> Self {
        FnProfile { value, slope, name: name.into() }
    }
}

impl<F, G> ConvexProfile for FnProfile<F, G>
where
    F: Fn(f64) -> f64 + Send + Sync,
    G: Fn(f64) -> f64 + Send + Sync,
{
    fn value(&self, s: f64) -> f64 {
        (self.value)(s)
    }
    fn slope(&self, s: f64) -> f64 {
        (self.slope)(s)
    }
    fn label(&self) -> String {
        self.name.clone()
    }
}

/// One piece of `h`, valid from `start` to the next piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    /// `ψ_index + offset`.
    Curve { start: f64, index: usize, offset: f64 },
    /// `value + slope (t − start)`.
    Bridge { start: f64, value: f64, slope: f64 },
}

impl Piece {
    pub fn start(&self) -> f64 {
        match *self {
            Piece::Curve { start, .. } | Piece::Bridge { start, .. } => start,
        }
    }
}

impl fmt::Display for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Piece::Curve { start, index, offset } => write!(f, "from {start}: psi_{} + {offset}", index + 1),
            Piece::Bridge { start, value, slope } => write!(f, "from {start}: {value} + {slope} (t - {start})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexInterpolant {
    pub family: PsiFamily,
    /// The lower offsets `C_j`.
    pub offsets: Vec<f64>,
    pub pieces: Vec<Piece>,
    /// `D_j = sup_grid (h − ψ_j)`.
    pub d: Vec<f64>,
    pub t_max: f64,
    /// Some index had no admissible switch below `t_max`.
    pub truncated: bool,
    pub grid: Vec<f64>,
    /// `min_grid (h − inf_j(ψ_j + C_j))`.
    pub lower_margin: f64,
    /// Largest decrease of consecutive chord slopes of `h` on the grid.
    pub convexity_defect: f64,
}

impl ConvexInterpolant {
    fn piece_at(&self, t: f64) -> &Piece {
        let i = self.pieces.partition_point(|p| p.start() <= t).saturating_sub(1);
        &self.pieces[i]
    }

    pub fn final_index(&self) -> usize {
        self.pieces
            .iter()
            .rev()
            .find_map(|p| match p {
                Piece::Curve { index, .. } => Some(*index),
                Piece::Bridge { .. } => None,
            })
            .unwrap_or(0)
    }

    /// `inf_j(ψ_j(t) + C_j)` over the family.
    pub fn lower_envelope(&self, t: f64) -> f64 {
        (0..self.family.len()).map(|i| self.family.value(i, t) + self.offsets[i]).fold(f64::INFINITY, f64::min)
    }

    /// `inf_j(ψ_j(t) + D_j)` over the family.
    pub fn upper_envelope(&self, t: f64) -> f64 {
        (0..self.family.len()).map(|i| self.family.value(i, t) + self.d[i]).fold(f64::INFINITY, f64::min)
    }
}

impl ConvexProfile for ConvexInterpolant {
    fn value(&self, t: f64) -> f64 {
        match *self.piece_at(t) {
            Piece::Curve { index, offset, .. } => self.family.value(index, t) + offset,
            Piece::Bridge { start, value, slope } => value + slope * (t - start),
        }
    }

    fn slope(&self, t: f64) -> f64 {
        match *self.piece_at(t) {
            Piece::Curve { index, .. } => self.family.slope(index, t),
            Piece::Bridge { slope, .. } => slope,
        }
    }

    fn s_limit(&self) -> f64 {
        self.family.t_limit(self.final_index())
    }
}

/// Uniform near 0, then geometric with ratio 1.01 up to `t_max`.
pub fn working_grid(t_max: f64) -> Vec<f64> {
    let head = t_max.min(16.0);
    let mut g = linspace(0.0, head, 513);
    let mut t = head;
    while t < t_max {
        t = (t * 1.01).min(t_max);
        g.push(t);
    }
    g
}

/// Builds `h` by a switch schedule. It starts on `ψ_1 + C_1`. To move from
/// index `j` to `j+1` it leaves `ψ_j` at the first grid point `A` for which
/// the tangent bridge of slope `ψ_j′(A)` followed by `ψ_{j+1} + O_{j+1}`
/// (joined where `ψ_{j+1}′ = ψ_j′(A)`, offset fixed by continuity) stays
/// above `inf_i(ψ_i + C_i)` on `[A, t_max]`.
pub fn build_convex_interpolant(family: &PsiFamily, offsets: &[f64], t_max: f64) -> Result<ConvexInterpolant> {
    let m = family.len();
    if offsets.len() < m {
        return Err(Error::Argument(format!("need {m} offsets, got {}", offsets.len())));
    }
    if !(t_max > 0.0 && t_max <= family.t_limit(0)) {
        return Err(Error::Argument(format!("t_max = {t_max} must lie in (0, {}]", family.t_limit(0))));
    }
    let grid = working_grid(t_max);
    family.validate(&grid)?;
    let psi: Vec<Vec<f64>> =
        (0..m).into_par_iter().map(|i| grid.iter().map(|&t| family.value(i, t)).collect()).collect();
    let lower: Vec<f64> =
        (0..grid.len()).map(|k| (0..m).map(|i| psi[i][k] + offsets[i]).fold(f64::INFINITY, f64::min)).collect();
    let above = |v: f64, l: f64| v >= l - 1e-12 * (1.0 + l.abs());

    let mut pieces = vec![Piece::Curve { start: 0.0, index: 0, offset: offsets[0] }];
    let (mut cur, mut cur_offset, mut cur_start) = (0usize, offsets[0], 0.0f64);
    let mut truncated = false;
    'next: for next in 1..m {
        let first = grid.partition_point(|&t| t < cur_start);
        for ka in first..grid.len() {
            let a = grid[ka];
            let s_a = family.slope(cur, a);
            let h_a = psi[cur][ka] + cur_offset;
            let Some(join) = family.inverse_slope(next, s_a) else { break };
            let join = join.max(a);
            if !(family.slope(next, join) >= s_a * (1.0 - 1e-12)) {
                return Err(Error::Construction(format!("slope decreases at the switch to psi_{}", next + 1)));
            }
            let o_next = h_a + s_a * (join - a) - family.value(next, join);
            let ok = (ka..grid.len()).all(|k| {
                let t = grid[k];
                let v = if t < join { h_a + s_a * (t - a) } else { psi[next][k] + o_next };
                above(v, lower[k])
            });
            if ok {
                if join > a {
                    pieces.push(Piece::Bridge { start: a, value: h_a, slope: s_a });
                }
                pieces.push(Piece::Curve { start: join, index: next, offset: o_next });
                cur = next;
                cur_offset = o_next;
                cur_start = join;
                continue 'next;
            }
        }
        truncated = true;
        break;
    }

    let mut h = ConvexInterpolant {
        family: family.clone(),
        offsets: offsets[..m].to_vec(),
        pieces,
        d: Vec::new(),
        t_max,
        truncated,
        grid: Vec::new(),
        lower_margin: 0.0,
        convexity_defect: 0.0,
    };
    let hv: Vec<f64> = grid.iter().map(|&t| h.value(t)).collect();
    h.lower_margin = hv.iter().zip(&lower).map(|(v, l)| v - l).fold(f64::INFINITY, f64::min);
    let chords: Vec<f64> = grid.windows(2).zip(hv.windows(2)).map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0])).collect();
    h.convexity_defect = chords.windows(2).map(|c| (c[0] - c[1]) / (1.0 + c[0].abs())).fold(0.0, f64::max);
    h.d = (0..m).map(|i| hv.iter().zip(&psi[i]).map(|(v, p)| v - p).fold(f64::NEG_INFINITY, f64::max)).collect();
    h.grid = grid;
    if !(h.lower_margin >= -1e-9) {
        return Err(Error::Construction(format!("lower sandwich violated by {}", -h.lower_margin)));
    }
    Ok(h)
}

/// Maximum point of `sy − h(s)`: the smallest `s` with `h′(s) ≥ y`.
pub fn profile_conjugate(h: &dyn ConvexProfile, y: f64) -> Result<(f64, f64)> {
    let limit = h.s_limit().min(1e15);
    let s = if h.slope(0.0) >= y {
        0.0
    } else {
        let mut lo = 0.0;
        let mut hi = 1.0f64.min(limit);
        while !(h.slope(hi) >= y) {
            if hi >= limit {
                return Err(Error::ArgmaxAtBoundary { y, s_max: limit });
            }
            lo = hi;
            hi = (2.0 * hi).min(limit);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if h.slope(mid) >= y {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    Ok((y * s - h.value(s), s))
}

/// `f(t) = h*(max{0, log t})`.
#[derive(Clone)]
pub struct Majorant {
    pub h: Arc<dyn ConvexProfile>,
}

impl fmt::Debug for Majorant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Majorant({})", self.h.label())
    }
}

impl Majorant {
    /// `(f(t), s*)` with `s*` the maximizer of the conjugate.
    pub fn eval_with_argmax(&self, t: f64) -> Result<(f64, f64)> {
        if !(t >= 0.0) {
            return Err(Error::Domain { name: self.label(), t, detail: "negative or NaN argument".into() });
        }
        let y = if t > 1.0 { t.ln() } else { 0.0 };
        profile_conjugate(self.h.as_ref(), y)
    }

    /// `f(t) ≥ j σ(t) − D_j` at `t`, as `(lhs − rhs)`.
    pub fn envelope_gap(&self, sigma: &dyn Weight, j: f64, d_j: f64, t: f64) -> Result<f64> {
        Ok(self.eval(t)? - (j * sigma.eval(t)? - d_j))
    }
}

impl Weight for Majorant {
    fn eval(&self, t: f64) -> Result<f64> {
        self.eval_with_argmax(t).map(|p| p.0)
    }

    fn derivative(&self, t: f64) -> Result<f64> {
        let (_, s) = self.eval_with_argmax(t)?;
        Ok(if t > 1.0 { s / t } else { 0.0 })
    }

    fn label(&self) -> String {
        format!("{}*(log t)", self.h.label())
    }
}

pub fn envelope_to_majorant(h: Arc<dyn ConvexProfile>) -> Majorant {
    Majorant { h }
}
