//! The reduction construction: from a pair `(ω, σ)` satisfying the discrete
//! condition and a majorant `f` with `σ = o(f)`, build the sequences
//! `x_n, y_n, z_n` and the piecewise weights `ω̃`, `σ̃`, then check every
//! inequality the construction is supposed to deliver.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::conditions::{check_discrete_condition, DiscreteSearch, PairVerdict};
use crate::error::{Error, Result};
use crate::numeric::{bisect, fmt_sig, integrate_semi_infinite, GeometricGrid};
use crate::weights::{asymptotic_verdict, check_weight_axioms, FnWeight, Relation, Verdict, Weight};

/// Headroom factor applied to the largest lower bound for `x_n`.
pub const X_MARGIN: f64 = 1.05;
/// Upper limit for every threshold search.
pub const T_CAP: f64 = 1e300;
const LOCAL_POINTS: usize = 48;
const SLACK: f64 = 1e-9;

/// Constants `(C, K, H, t₀)` of `ω(K^j t) ≤ C H^j σ(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteConstants {
    pub c: f64,
    pub k: f64,
    pub h: f64,
    pub t0: f64,
}

impl DiscreteConstants {
    /// Extracts the constants of a successful discrete-condition verdict.
    pub fn from_verdict(pv: &PairVerdict) -> Option<Self> {
        let c = pv.constants?;
        Some(DiscreteConstants { c: c.c, k: c.k?, h: c.h?, t0: c.t0? })
    }
}

#[derive(Clone)]
pub struct ReductionInput {
    pub w: Arc<dyn Weight>,
    pub sigma: Arc<dyn Weight>,
    pub f: Arc<dyn Weight>,
    pub constants: DiscreteConstants,
    pub n_max: usize,
    pub enforce_nq: bool,
}

impl fmt::Debug for ReductionInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReductionInput")
            .field("w", &self.w.label())
            .field("sigma", &self.sigma.label())
            .field("f", &self.f.label())
            .field("constants", &self.constants)
            .field("n_max", &self.n_max)
            .field("enforce_nq", &self.enforce_nq)
            .finish()
    }
}

/// One hypothesis of the construction with its grid verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub name: String,
    pub verdict: Verdict,
}

/// Grid checks of the standing assumptions: `ω` concave with moderate growth,
/// `σ = o(t)`, `σ = o(f)` and the discrete constants on the grid.
pub fn check_hypotheses(input: &ReductionInput, grid: &GeometricGrid) -> Result<Vec<Hypothesis>> {
    let axioms = check_weight_axioms(input.w.as_ref(), grid)?;
    let identity = FnWeight::new("t", |t: f64| t);
    let little_t = asymptotic_verdict(input.sigma.as_ref(), &identity, Relation::LittleO, grid);
    let little_f = asymptotic_verdict(input.sigma.as_ref(), input.f.as_ref(), Relation::LittleO, grid);
    let c = input.constants;
    let mut constants_ok = Verdict::HoldsEmpirically;
    for t in grid.points().into_iter().filter(|&t| t >= c.t0) {
        let s = input.sigma.eval(t)?;
        for j in 1..=20 {
            let v = input.w.eval(c.k.powi(j) * t)?;
            if v > c.c * c.h.powi(j) * s * (1.0 + 1e-6) {
                constants_ok = Verdict::Fails;
            }
        }
    }
    Ok(vec![
        Hypothesis { name: "omega concave".into(), verdict: axioms.concave.verdict },
        Hypothesis { name: "omega moderate growth".into(), verdict: axioms.moderate_growth.check.verdict },
        Hypothesis { name: "sigma = o(t)".into(), verdict: little_t.verdict },
        Hypothesis { name: "sigma = o(f)".into(), verdict: little_f.verdict },
        Hypothesis { name: "discrete constants".into(), verdict: constants_ok },
    ])
}

/// Data of the segment `[x_n, x_{n+1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub n: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub omega_x: f64,
    pub omega_dx: f64,
    /// `Σ_{i=1}^{n−2} ω(z_{i+1})`.
    pub affine_offset: f64,
    /// `Σ_{i=1}^{n−1} ω(z_{i+1})`.
    pub curved_offset: f64,
    /// `Σ_{i=1}^{n} σ(x_i)`.
    pub sigma_offset: f64,
    /// `ω` is affine on `[x_n, y_n]` and `z_n = y_n` was set by convention.
    pub degenerate_z: bool,
}

#[derive(Debug, Clone)]
pub struct ReductionResult {
    pub input: ReductionInput,
    /// `x_1, …, x_{n_max}` (index 0 is `n = 1`); likewise `y`, `z`.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// Segments for `n = 2, …, n_max`.
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Omega,
    Sigma,
}

fn local_ok<F: Fn(f64) -> f64>(g: &F, t: f64) -> bool {
    let hi = (t * 1e6).min(T_CAP);
    if hi <= t {
        return g(t) >= 0.0;
    }
    GeometricGrid { lo: t, hi, count: LOCAL_POINTS }.points().into_iter().all(|s| g(s) >= 0.0)
}

/// Smallest `T` (to bisection accuracy) from which `g ≥ 0` on a local grid.
fn threshold<F: Fn(f64) -> f64>(g: F, what: &str) -> Result<f64> {
    let mut hi = 1.0;
    while !local_ok(&g, hi) {
        hi *= 2.0;
        if hi > T_CAP {
            return Err(Error::Construction(format!("{what} fails empirically below {T_CAP:e}")));
        }
    }
    if hi == 1.0 {
        return Ok(hi);
    }
    let mut lo = hi / 2.0;
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if local_ok(&g, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Smallest `x` with `w(x) ≥ target`.
fn inverse(w: &dyn Weight, target: f64) -> Result<f64> {
    if target <= 0.0 {
        return Ok(0.0);
    }
    let g = |x: f64| w.eval(x).unwrap_or(f64::INFINITY) - target;
    let mut hi = 1.0;
    while g(hi) < 0.0 {
        hi *= 2.0;
        if hi > T_CAP {
            return Err(Error::Construction(format!("`{}` stays below {target}", w.label())));
        }
    }
    bisect(g, 0.0, hi, 1e-13)
}

/// `∫_x^∞ σ(t)/(1+t²) dt`.
pub fn nq_tail(sigma: &dyn Weight, x: f64) -> Option<f64> {
    let g = |v: f64| {
        let t = x * v.exp();
        sigma.eval(t).map(|s| s * t / (1.0 + t * t)).unwrap_or(f64::NAN)
    };
    integrate_semi_infinite(&g, 0.0, 1e-10)
}

fn nq_threshold(sigma: &dyn Weight, n: usize) -> Result<f64> {
    let target = 1.0 / (n as f64).powi(3);
    let excess = |x: f64| nq_tail(sigma, x).map(|v| v - target).unwrap_or(f64::INFINITY);
    let mut hi = 1.0;
    while excess(hi) > 0.0 {
        hi *= 2.0;
        if hi > T_CAP {
            return Err(Error::Construction("the integral of sigma(t)/(1+t^2) does not become small".into()));
        }
    }
    if hi == 1.0 {
        return Ok(hi);
    }
    bisect(excess, hi / 2.0, hi, 1e-12)
}

/// `y > x` with `ω′(y) = target`, by doubling and bisection.
fn solve_tangent(w: &dyn Weight, x: f64, target: f64) -> Result<f64> {
    let d = |t: f64| w.derivative(t);
    let mut prev = d(x)?;
    let mut lo = x;
    let mut hi = 2.0 * x;
    loop {
        let dh = d(hi)?;
        if dh > prev {
            return Err(Error::Construction(format!(
                "derivative of `{}` increases between {lo} and {hi}: not concave enough",
                w.label()
            )));
        }
        if dh <= target {
            break;
        }
        prev = dh;
        lo = hi;
        hi *= 2.0;
        if hi > T_CAP {
            return Err(Error::Construction(format!(
                "derivative of `{}` does not decrease to {target}",
                w.label()
            )));
        }
    }
    let g = |t: f64| w.derivative(t).unwrap_or(f64::NAN) - target;
    bisect(g, lo, hi, 1e-12)
}

/// Runs the construction for `n = 2, …, n_max`.
pub fn build_reduction(input: ReductionInput) -> Result<ReductionResult> {
    if input.n_max < 3 {
        return Err(Error::Argument(format!("n_max must be at least 3, got {}", input.n_max)));
    }
    let c = input.constants;
    if !(c.k > c.h && c.h > 1.0 && c.c > 0.0) {
        return Err(Error::Argument(format!("need K > H > 1 and C > 0, got {c:?}")));
    }
    let (w, sigma, f) = (input.w.as_ref(), input.sigma.as_ref(), input.f.as_ref());
    let mut x = vec![0.0];
    let mut y = vec![0.0];
    let mut z = vec![0.0];
    let mut segments = Vec::with_capacity(input.n_max - 1);
    for n in 2..=input.n_max {
        let nf = n as f64;
        let spacing = c.k.max(2.0) * y[n - 2] + nf;
        let growth = threshold(
            |t| {
                let (Ok(ft), Ok(st)) = (f.eval(t), sigma.eval(t)) else { return f64::NEG_INFINITY };
                t.min(ft) - nf * nf * st
            },
            "sigma = o(min(t, f))",
        )?;
        let omega_target = (1..n)
            .map(|i| Ok(2f64.powi((n - i) as i32) * w.eval(z[i - 1])?))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let sigma_target = (1..n)
            .map(|i| Ok(2f64.powi((n - i) as i32) * sigma.eval(x[i - 1])?))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let mut lower = spacing.max(growth).max(inverse(w, omega_target)?).max(inverse(sigma, sigma_target)?);
        if input.enforce_nq {
            lower = lower.max(nq_threshold(sigma, n)?);
        }
        let xn = X_MARGIN * lower;

        let omega_x = w.eval(xn)?;
        let omega_dx = w.derivative(xn)?;
        if !(omega_dx > 0.0) {
            return Err(Error::Construction(format!("derivative of `{}` vanishes at {xn}", w.label())));
        }
        let yn = solve_tangent(w, xn, (nf - 1.0) / nf * omega_dx)?;
        let omega_y = w.eval(yn)?;
        let z_target = nf * omega_y - (nf - 1.0) * (omega_x + (yn - xn) * omega_dx);
        let (zn, degenerate) = if omega_y - z_target <= 1e-12 * omega_y.abs() {
            (yn, true)
        } else if omega_x >= z_target {
            (xn, false)
        } else {
            (bisect(|t| w.eval(t).unwrap_or(f64::NAN) - z_target, xn, yn, 1e-14)?, false)
        };
        x.push(xn);
        y.push(yn);
        z.push(zn);

        let affine_offset = (2..n).map(|i| w.eval(z[i - 1])).sum::<Result<f64>>()?;
        let curved_offset = affine_offset + w.eval(zn)?;
        let sigma_offset = x.iter().map(|&xi| sigma.eval(xi)).sum::<Result<f64>>()?;
        segments.push(Segment {
            n,
            x: xn,
            y: yn,
            z: zn,
            omega_x,
            omega_dx,
            affine_offset,
            curved_offset,
            sigma_offset,
            degenerate_z: degenerate,
        });
    }
    Ok(ReductionResult { input, x, y, z, segments })
}

impl ReductionResult {
    pub fn n_max(&self) -> usize {
        self.input.n_max
    }

    /// `[x_2, x_{n_max}]`.
    pub fn range(&self) -> (f64, f64) {
        (self.x[1], self.x[self.n_max() - 1])
    }

    fn segment_index(&self, t: f64) -> usize {
        self.segments.partition_point(|s| s.x <= t).saturating_sub(1)
    }

    fn eval_segment(&self, seg: &Segment, which: Which, t: f64) -> Result<f64> {
        let nf = seg.n as f64;
        match which {
            Which::Omega if t < seg.y => {
                Ok((nf - 1.0) * (seg.omega_x + (t - seg.x) * seg.omega_dx) - seg.affine_offset)
            }
            Which::Omega => Ok(nf * self.input.w.eval(t)? - seg.curved_offset),
            Which::Sigma => Ok(nf * self.input.sigma.eval(t)? - seg.sigma_offset),
        }
    }

    /// `ω̃(t)` or `σ̃(t)` for `t ∈ [x_2, x_{n_max}]`.
    pub fn eval_tilde(&self, which: Which, t: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(t >= lo && t <= hi) {
            return Err(Error::Range { t, lo, hi });
        }
        self.eval_segment(&self.segments[self.segment_index(t)], which, t)
    }

    /// As [`eval_tilde`](Self::eval_tilde), continued by `ω̃ = ω`, `σ̃ = σ`
    /// on `[0, x_2)`.
    pub fn eval_tilde_extended(&self, which: Which, t: f64) -> Result<f64> {
        if t >= 0.0 && t < self.x[1] {
            return match which {
                Which::Omega => self.input.w.eval(t),
                Which::Sigma => self.input.sigma.eval(t),
            };
        }
        self.eval_tilde(which, t)
    }

    /// Both branches of `ω̃` at `y_n`.
    pub fn branches_at_y(&self, n: usize) -> Result<(f64, f64)> {
        let seg = &self.segments[n - 2];
        let nf = n as f64;
        let affine = (nf - 1.0) * (seg.omega_x + (seg.y - seg.x) * seg.omega_dx) - seg.affine_offset;
        let curved = nf * self.input.w.eval(seg.y)? - seg.curved_offset;
        Ok((affine, curved))
    }

    pub fn tilde(&self, which: Which) -> Tilde<'_> {
        Tilde { result: self, which, extended: false }
    }

    pub fn tilde_extended(&self, which: Which) -> Tilde<'_> {
        Tilde { result: self, which, extended: true }
    }

    pub fn sequence_csv(&self) -> String {
        let mut out = String::from("n,x,y,z\n");
        for n in 1..=self.n_max() {
            out.push_str(&format!(
                "{n},{},{},{}\n",
                fmt_sig(self.x[n - 1], 17),
                fmt_sig(self.y[n - 1], 17),
                fmt_sig(self.z[n - 1], 17)
            ));
        }
        out
    }

    pub fn curves_csv(&self, points: usize) -> Result<String> {
        let (lo, hi) = self.range();
        let mut out = String::from("t,omega,omega_tilde,sigma,sigma_tilde,f\n");
        for t in GeometricGrid::new(lo, hi, points.max(2))?.points() {
            let row = [
                t,
                self.input.w.eval(t)?,
                self.eval_tilde(Which::Omega, t)?,
                self.input.sigma.eval(t)?,
                self.eval_tilde(Which::Sigma, t)?,
                self.input.f.eval(t)?,
            ];
            let cells: Vec<String> = row.iter().map(|v| fmt_sig(*v, 17)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        Ok(out)
    }
}

/// `ω̃` or `σ̃` as a [`Weight`] on `[x_2, x_{n_max}]`, or on `[0, x_{n_max}]`
/// when extended.
pub struct Tilde<'a> {
    result: &'a ReductionResult,
    which: Which,
    extended: bool,
}

impl Weight for Tilde<'_> {
    fn eval(&self, t: f64) -> Result<f64> {
        if self.extended {
            self.result.eval_tilde_extended(self.which, t)
        } else {
            self.result.eval_tilde(self.which, t)
        }
    }

    fn derivative(&self, t: f64) -> Result<f64> {
        if self.extended && t < self.result.x[1] {
            return match self.which {
                Which::Omega => self.result.input.w.derivative(t),
                Which::Sigma => self.result.input.sigma.derivative(t),
            };
        }
        self.eval(t)?;
        let seg = &self.result.segments[self.result.segment_index(t)];
        let nf = seg.n as f64;
        match self.which {
            Which::Omega if t < seg.y => Ok((nf - 1.0) * seg.omega_dx),
            Which::Omega => Ok(nf * self.result.input.w.derivative(t)?),
            Which::Sigma => Ok(nf * self.result.input.sigma.derivative(t)?),
        }
    }

    fn domain_max(&self) -> f64 {
        self.result.range().1
    }

    fn label(&self) -> String {
        match self.which {
            Which::Omega => "omega~".into(),
            Which::Sigma => "sigma~".into(),
        }
    }
}

/// One checked inequality: smallest relative margin `(rhs − lhs)/|rhs|` and
/// the point attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct Claim {
    pub name: String,
    pub holds: bool,
    pub min_margin: f64,
    pub witness: Option<(f64, f64)>,
}

#[derive(Default)]
struct ClaimAcc {
    min_margin: f64,
    witness: Option<(f64, f64)>,
    count: usize,
}

impl ClaimAcc {
    fn new() -> Self {
        ClaimAcc { min_margin: f64::INFINITY, witness: None, count: 0 }
    }

    /// Records `lhs ≤ rhs` at `t`.
    fn le(&mut self, t: f64, lhs: f64, rhs: f64) {
        let scale = rhs.abs().max(lhs.abs()).max(1e-300);
        let m = (rhs - lhs) / scale;
        self.count += 1;
        if m < self.min_margin || m.is_nan() {
            self.min_margin = m;
            self.witness = Some((t, lhs - rhs));
        }
    }

    fn merge(mut self, other: ClaimAcc) -> Self {
        if other.min_margin < self.min_margin || other.min_margin.is_nan() {
            self.min_margin = other.min_margin;
            self.witness = other.witness;
        }
        self.count += other.count;
        self
    }

    fn finish(self, name: &str) -> Claim {
        let holds = self.min_margin >= -SLACK;
        Claim {
            name: name.into(),
            holds,
            min_margin: if self.count == 0 { f64::INFINITY } else { self.min_margin },
            witness: if holds { None } else { self.witness },
        }
    }
}

/// Per-`n` ratios at `t = x_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NRatios {
    pub n: usize,
    pub omega_ratio: f64,
    pub sigma_ratio: f64,
    pub sigma_f_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub claims: Vec<Claim>,
    pub ratios: Vec<NRatios>,
    /// Largest relative jump of `ω̃` at the points `y_n`.
    pub continuity_y: f64,
    /// Largest relative jump of `ω̃`, `σ̃` at the points `x_{n+1}`.
    pub continuity_x: f64,
    pub c_prime_omega: f64,
    pub c_prime_sigma: f64,
    pub h_tilde: f64,
    pub n_tilde: u32,
    pub d: f64,
    pub d_tilde: f64,
    pub recertification: Option<PairVerdict>,
}

impl ValidationReport {
    pub fn claim(&self, name: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.name == name)
    }

    pub fn all_hold(&self) -> bool {
        self.claims.iter().all(|c| c.holds)
            && self.recertification.as_ref().is_none_or(|r| r.verdict.holds())
    }
}

/// Smallest `Ñ` with `log j / j ≤ gap` for every `j ≥ Ñ`.
pub fn n_tilde(gap: f64) -> u32 {
    // over the integers log j / j peaks at j = 3 and decreases afterwards
    if (3f64).ln() / 3.0 <= gap {
        return 1;
    }
    let mut j = 4u32;
    while (j as f64).ln() / j as f64 > gap {
        j += 1;
    }
    j
}

/// Checks every inequality of the construction on `grid_per_segment` points
/// per segment `[x_n, x_{n+1})`, `2 ≤ n < n_max`.
pub fn validate_reduction(result: &ReductionResult, grid_per_segment: usize) -> Result<ValidationReport> {
    let k = grid_per_segment.max(4);
    let n_max = result.n_max();
    let (w, sigma, f) = (result.input.w.as_ref(), result.input.sigma.as_ref(), result.input.f.as_ref());
    let omega_t = result.tilde(Which::Omega);
    let sigma_t = result.tilde(Which::Sigma);

    let mut points: Vec<(usize, f64)> = Vec::new();
    for n in 2..n_max {
        let (a, b) = (result.x[n - 1], result.x[n]);
        let grid = GeometricGrid::new(a, b, k + 1)?.points();
        points.extend(grid[..k].iter().map(|&t| (n, t)));
        points.push((n, result.y[n - 1].min(b * (1.0 - 1e-15))));
    }
    points.sort_by(|a, b| a.1.total_cmp(&b.1));
    points.dedup_by(|a, b| a.1 == b.1);

    let names = ["omega~ >= (n-2) omega", "omega~ <= n omega", "sigma~ >= (n-2) sigma", "sigma~ <= n sigma", "sigma~ <= f/n", "sigma~ <= t/n"];
    let sandwich = points
        .par_iter()
        .map(|&(n, t)| -> Result<Vec<ClaimAcc>> {
            let nf = n as f64;
            let (om, ot) = (w.eval(t)?, omega_t.eval(t)?);
            let (sg, st) = (sigma.eval(t)?, sigma_t.eval(t)?);
            let mut acc: Vec<ClaimAcc> = (0..6).map(|_| ClaimAcc::new()).collect();
            acc[0].le(t, (nf - 2.0) * om, ot);
            acc[1].le(t, ot, nf * om);
            acc[2].le(t, (nf - 2.0) * sg, st);
            acc[3].le(t, st, nf * sg);
            acc[4].le(t, st, f.eval(t)? / nf);
            acc[5].le(t, st, t / nf);
            Ok(acc)
        })
        .try_reduce(
            || (0..6).map(|_| ClaimAcc::new()).collect(),
            |a, b| Ok(a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect()),
        )?;
    let mut claims: Vec<Claim> = sandwich.into_iter().zip(names).map(|(a, n)| a.finish(n)).collect();

    let ts: Vec<f64> = points.iter().map(|p| p.1).collect();
    let mut concave = ClaimAcc::new();
    let mut convex_w = ClaimAcc::new();
    let mut convex_s = ClaimAcc::new();
    for pair in ts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let m = 0.5 * (a + b);
        let (fa, fb, fm) = (omega_t.eval(a)?, omega_t.eval(b)?, omega_t.eval(m)?);
        concave.le(m, 0.5 * (fa + fb) - SLACK * (1.0 + fm.abs()), fm);
        let g = (a.ln() + b.ln()) * 0.5;
        let gm = g.exp().clamp(a, b);
        let wm = omega_t.eval(gm)?;
        convex_w.le(gm, wm, 0.5 * (fa + fb) + SLACK * (1.0 + wm.abs()));
        let (sa, sb, sm) = (sigma_t.eval(a)?, sigma_t.eval(b)?, sigma_t.eval(gm)?);
        convex_s.le(gm, sm, 0.5 * (sa + sb) + SLACK * (1.0 + sm.abs()));
    }
    claims.push(concave.finish("omega~ concave"));
    claims.push(convex_w.finish("omega~(e^s) convex"));
    claims.push(convex_s.finish("sigma~(e^s) convex"));

    let mut continuity_y: f64 = 0.0;
    for n in 2..=n_max {
        let (a, c) = result.branches_at_y(n)?;
        continuity_y = continuity_y.max((a - c).abs() / c.abs().max(1e-300));
    }
    let mut continuity_x: f64 = 0.0;
    for n in 2..n_max {
        let (left, right) = (&result.segments[n - 2], &result.segments[n - 1]);
        let t = right.x;
        for which in [Which::Omega, Which::Sigma] {
            let l = result.eval_segment(left, which, t)?;
            let r = result.eval_segment(right, which, t)?;
            continuity_x = continuity_x.max((l - r).abs() / r.abs().max(1e-300));
        }
    }
    claims.push(Claim {
        name: "continuity at y_n".into(),
        holds: continuity_y <= 1e-9,
        min_margin: 1e-9 - continuity_y,
        witness: None,
    });
    claims.push(Claim {
        name: "continuity at x_n".into(),
        holds: continuity_x <= 1e-9,
        min_margin: 1e-9 - continuity_x,
        witness: None,
    });

    let mut ratios = Vec::new();
    let mut ratio_claim = ClaimAcc::new();
    for n in 2..=n_max {
        let t = result.x[n - 1];
        let r = NRatios {
            n,
            omega_ratio: w.eval(t)? / omega_t.eval(t)?,
            sigma_ratio: sigma.eval(t)? / sigma_t.eval(t)?,
            sigma_f_ratio: sigma_t.eval(t)? / f.eval(t)?,
        };
        if n >= 4 {
            let bound = 1.0 / (n as f64 - 2.0);
            ratio_claim.le(t, r.omega_ratio, bound);
            ratio_claim.le(t, r.sigma_ratio, bound);
            ratio_claim.le(t, r.sigma_f_ratio, 1.0 / n as f64);
            if let Some(prev) = ratios.last() {
                let prev: &NRatios = prev;
                ratio_claim.le(t, r.omega_ratio, prev.omega_ratio);
                ratio_claim.le(t, r.sigma_ratio, prev.sigma_ratio);
            }
        }
        ratios.push(r);
    }
    claims.push(ratio_claim.finish("ratios at x_n"));

    let c = result.input.constants;
    let big_n = (3..=n_max).find(|&n| result.x[n - 1] >= c.t0).unwrap_or(n_max);
    let x_big_n = result.x[big_n - 1];
    let (_, hi) = result.range();
    let late: Vec<(usize, f64)> = points.iter().cloned().filter(|p| p.1 >= x_big_n).collect();

    let mut c_prime_omega: f64 = 0.0;
    let mut c_prime_sigma: f64 = 0.0;
    for &(_, t) in late.iter().filter(|p| 2.0 * p.1 <= hi) {
        c_prime_omega = c_prime_omega.max(omega_t.eval(2.0 * t)? / omega_t.eval(t)?);
        c_prime_sigma = c_prime_sigma.max(sigma_t.eval(2.0 * t)? / sigma_t.eval(t)?);
    }

    let h_tilde = (c.h * c.k).sqrt();
    let n_t = n_tilde(h_tilde.ln() - c.h.ln());
    let mut transfer = ClaimAcc::new();
    let mut d: f64 = 0.0;
    let mut pairs = Vec::new();
    for &(n, y) in &late {
        let mut j = 1;
        while c.k.powi(j) * y <= hi {
            let lhs = omega_t.eval(c.k.powi(j) * y)?;
            let st = sigma_t.eval(y)?;
            let nf = n as f64;
            transfer.le(y, lhs, (nf + j as f64 + 1.0) / (nf - 2.0) * c.c * c.h.powi(j) * st);
            d = d.max(lhs / (j as f64 * c.h.powi(j) * st));
            pairs.push((y, j, lhs, st));
            j += 1;
        }
    }
    claims.push(transfer.finish("transfer"));
    let d_tilde = d * n_t as f64;
    let mut tilde_bound = ClaimAcc::new();
    for &(y, j, lhs, st) in &pairs {
        tilde_bound.le(y, lhs, d_tilde * h_tilde.powi(j) * st);
    }
    claims.push(tilde_bound.finish("omega~ <= D~ H~^j sigma~"));

    let recertification = if hi / c.k > x_big_n * 1.000001 {
        let search = DiscreteSearch {
            k_grid: vec![c.k],
            h_exponents: vec![h_tilde.ln() / c.k.ln()],
            t0_grid: vec![x_big_n],
            j_max: 20,
            t_hi: hi / c.k,
            t_count: 60,
        };
        Some(check_discrete_condition(&omega_t, &sigma_t, &search)?)
    } else {
        None
    };

    if result.input.enforce_nq {
        let mut nq = ClaimAcc::new();
        let mut partial = 0.0;
        let mut bound = 0.0;
        for n in 2..=n_max {
            let xn = result.x[n - 1];
            let tail = nq_tail(sigma, xn).unwrap_or(f64::INFINITY);
            nq.le(xn, tail, 1.0 / (n as f64).powi(3));
            if n < n_max {
                let next = nq_tail(sigma, result.x[n]).unwrap_or(f64::INFINITY);
                partial += n as f64 * (tail - next);
                bound += 1.0 / (n as f64).powi(2);
                nq.le(xn, partial, bound);
            }
        }
        claims.push(nq.finish("nq tails"));
    }

    Ok(ValidationReport {
        claims,
        ratios,
        continuity_y,
        continuity_x,
        c_prime_omega,
        c_prime_sigma,
        h_tilde,
        n_tilde: n_t,
        d,
        d_tilde,
        recertification,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::catalog;

    fn sqrt_input(n_max: usize, enforce_nq: bool) -> ReductionInput {
        ReductionInput {
            w: Arc::new(catalog::power(0.5)),
            sigma: Arc::new(catalog::power(0.5)),
            f: Arc::new(catalog::power(0.75)),
            constants: DiscreteConstants { c: 1.0, k: 4.0, h: 2.0, t0: 1.0 },
            n_max,
            enforce_nq,
        }
    }

    #[test]
    fn closed_form_sequences() {
        let r = build_reduction(sqrt_input(8, false)).unwrap();
        assert_eq!((r.x[0], r.y[0], r.z[0]), (0.0, 0.0, 0.0));
        for n in 2..=8 {
            let ratio = r.y[n - 1] / r.x[n - 1];
            let expected = (n as f64 / (n as f64 - 1.0)).powi(2);
            assert!((ratio / expected - 1.0).abs() < 1e-6, "n = {n}");
            assert!(r.z[n - 1] >= r.x[n - 1] && r.z[n - 1] <= r.y[n - 1]);
        }
        assert!((r.z[1] / r.x[1] - 2.25).abs() < 1e-6);
        assert!(r.x.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn x_n_respects_lower_bounds() {
        let r = build_reduction(sqrt_input(6, false)).unwrap();
        for n in 2..=6 {
            let xn = r.x[n - 1];
            assert!(xn > 4.0 * r.y[n - 2] + n as f64);
            // t^0.75 >= n^2 t^0.5 from t = n^8
            assert!(xn >= (n as f64).powi(8));
        }
    }

    #[test]
    fn eval_examples() {
        let r = build_reduction(sqrt_input(5, false)).unwrap();
        let w = catalog::power(0.5);
        let seg2 = &r.segments[0];
        assert_eq!(seg2.affine_offset, 0.0);
        let t = 0.5 * (seg2.x + seg2.y);
        let direct = w.eval(seg2.x).unwrap() + (t - seg2.x) * w.derivative(seg2.x).unwrap();
        assert!((r.eval_tilde(Which::Omega, t).unwrap() - direct).abs() < 1e-12 * direct);

        let x3 = r.x[2];
        let expected = 2.0 * w.eval(x3).unwrap() - w.eval(r.z[1]).unwrap();
        assert!((r.eval_tilde(Which::Omega, x3).unwrap() - expected).abs() < 1e-12 * expected);
        let expected_sigma = 3.0 * w.eval(x3).unwrap() - (w.eval(r.x[1]).unwrap() + w.eval(x3).unwrap());
        assert!((r.eval_tilde(Which::Sigma, x3).unwrap() - expected_sigma).abs() < 1e-12 * expected_sigma);

        for n in 2..=5 {
            let (a, c) = r.branches_at_y(n).unwrap();
            assert!((a - c).abs() <= 1e-9 * c.abs());
        }
        match r.eval_tilde(Which::Omega, 1.0) {
            Err(Error::Range { lo, hi, .. }) => assert_eq!((lo, hi), r.range()),
            other => panic!("{other:?}"),
        }
        assert!(r.eval_tilde_extended(Which::Omega, 1.0).is_ok());
    }

    #[test]
    fn validation_of_sqrt_run() {
        let r = build_reduction(sqrt_input(8, false)).unwrap();
        let v = validate_reduction(&r, 64).unwrap();
        for claim in &v.claims {
            assert!(claim.holds, "{claim:?}");
        }
        assert!(v.continuity_y <= 1e-9);
        let recert = v.recertification.as_ref().unwrap();
        assert!(recert.verdict.holds());
        let h = recert.constants.unwrap().h.unwrap();
        assert!(h > 2.0 && h < 4.0);
        for r in v.ratios.iter().filter(|r| r.n >= 4) {
            assert!(r.omega_ratio <= 1.0 / (r.n as f64 - 2.0));
        }
    }

    #[test]
    fn degenerate_three_segments() {
        let r = build_reduction(sqrt_input(3, false)).unwrap();
        let v = validate_reduction(&r, 16).unwrap();
        assert!(v.claim("omega~ >= (n-2) omega").unwrap().holds);
        assert!(v.recertification.is_none());
    }

    #[test]
    fn nq_variant_tails() {
        let r = build_reduction(sqrt_input(6, true)).unwrap();
        let sigma = catalog::power(0.5);
        for n in 2..=6 {
            let tail = nq_tail(&sigma, r.x[n - 1]).unwrap();
            assert!(tail <= 1.0 / (n as f64).powi(3));
        }
        let v = validate_reduction(&r, 16).unwrap();
        assert!(v.claim("nq tails").unwrap().holds);
    }

    #[test]
    fn n_tilde_definition() {
        for gap in [0.05, 0.1, 0.2, 0.35, 0.5] {
            let n = n_tilde(gap);
            for j in n.max(1)..n + 200 {
                assert!((j as f64).ln() / j as f64 <= gap);
            }
            if n > 1 {
                assert!(((n - 1) as f64).ln() / (n - 1) as f64 > gap);
            }
        }
    }

    #[test]
    fn affine_weight_is_rejected() {
        let mut input = sqrt_input(4, false);
        input.w = Arc::new(crate::weights::WeightFunction::parse("t").unwrap());
        assert!(matches!(build_reduction(input), Err(Error::Construction(_))));
    }

    #[test]
    fn rejects_small_n_max() {
        assert!(build_reduction(sqrt_input(2, false)).is_err());
    }

    #[test]
    fn csv_exports() {
        let r = build_reduction(sqrt_input(4, false)).unwrap();
        let seq = r.sequence_csv();
        assert!(seq.starts_with("n,x,y,z\n1,0,0,0\n"));
        let curves = r.curves_csv(5).unwrap();
        assert_eq!(curves.lines().count(), 6);
    }
}
