//! Integral and discrete conditions on pairs of weights: the `σ_r` integrals,
//! `κ`, `τ_r`, the `r`-strong and discrete conditions, interlacing constants,
//! the growth index and the exponential integral `E_α`.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{adaptive_simpson, integrate_semi_infinite, GeometricGrid};
use crate::weights::{bounded_trend, AsymptoticVerdict, Verdict, Weight, WeightFunction};

/// Upper cut `t·e^V = T_TOP` of the numerically integrated part of `σ_r`.
pub const T_TOP: f64 = 1e250;
const EXPONENT_EPS: f64 = 1e-4;
const LOG_EXPONENT_EPS: f64 = 1e-3;
pub const DEFAULT_TOL: f64 = 1e-8;

/// Result of an improper integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegralOutcome {
    /// `value` includes the closed-form `tail` beyond the cut.
    Converged { value: f64, tail: f64 },
    /// Fitted growth exponent of the integrand's weight.
    Divergent { exponent: f64 },
    Inconclusive { partial: f64 },
}

impl IntegralOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            IntegralOutcome::Converged { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, IntegralOutcome::Divergent { .. })
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol <= 1e-2 {
        Ok(())
    } else {
        Err(Error::Argument(format!("tolerance must lie in (0, 1e-2], got {tol}")))
    }
}

/// Fits `ω(T) ≈ c·T^p (log T)^(−q)` from local log-log slopes at
/// `log T = L/2` and `log T = L` with `L = log T_TOP`. Returns `(p, q)`.
pub fn tail_exponents(w: &dyn Weight) -> Option<(f64, f64)> {
    let slope = |l: f64| -> Option<f64> {
        let hi = w.eval((l + 1.0).exp()).ok()?;
        let lo = w.eval((l - 1.0).exp()).ok()?;
        let e = 0.5 * (hi.ln() - lo.ln());
        e.is_finite().then_some(e)
    };
    let l2 = T_TOP.ln();
    let l1 = 0.5 * l2;
    let (e1, e2) = (slope(l1)?, slope(l2)?);
    let q = (e2 - e1) / (1.0 / l1 - 1.0 / l2);
    let p = e2 + q / l2;
    (p.is_finite() && q.is_finite()).then_some((p, q))
}

/// `S(q, x) = ∫₁^∞ y^(−q) e^(−x(y−1)) dy`, or `None` when it diverges.
pub fn tail_factor(q: f64, x: f64, tol: f64) -> Option<f64> {
    if x < 0.0 || (x == 0.0 && q <= 1.0) {
        return None;
    }
    if x == 0.0 {
        return Some(1.0 / (q - 1.0));
    }
    // y = e^s removes the algebraic factor
    let f = |s: f64| (s * (1.0 - q) - x * s.exp_m1()).exp();
    integrate_semi_infinite(&f, 0.0, tol)
}

fn diverges(p: f64, q: f64, r: f64) -> bool {
    p > r + EXPONENT_EPS || ((r - p).abs() <= EXPONENT_EPS && q <= 1.0 + LOG_EXPONENT_EPS)
}

fn require_unbounded(w: &dyn Weight) -> Result<()> {
    if w.domain_max().is_finite() {
        return Err(Error::Argument(format!(
            "`{}` is only defined up to {}; integrals to infinity need an unbounded weight",
            w.label(),
            w.domain_max()
        )));
    }
    Ok(())
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r <= 1.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("r must lie in (0, 1], got {r}")))
    }
}

fn integrand<'a>(w: &'a dyn Weight, r: f64, t: f64) -> impl Fn(f64) -> f64 + 'a {
    move |v: f64| w.eval(t * v.exp()).map(|x| x * (-r * v).exp()).unwrap_or(f64::NAN)
}

/// `∫₁^U ω(tu) u^(−1−r) du`.
pub fn sigma_r_truncated(w: &dyn Weight, r: f64, t: f64, u_max: f64, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    if !(u_max >= 1.0) {
        return Err(Error::Argument(format!("upper limit must be at least 1, got {u_max}")));
    }
    Ok(adaptive_simpson(&integrand(w, r, t), 0.0, u_max.ln(), tol))
}

/// `σ_r(t) = ∫₁^∞ ω(tu) u^(−1−r) du`.
pub fn sigma_r(w: &dyn Weight, r: f64, t: f64, tol: f64) -> Result<IntegralOutcome> {
    check_r(r)?;
    check_tol(tol)?;
    require_unbounded(w)?;
    if !(t > 0.0 && t < T_TOP / 1e10) {
        return Err(Error::Argument(format!("t must lie in (0, {:e}), got {t}", T_TOP / 1e10)));
    }
    let Some((p, q)) = tail_exponents(w) else {
        let partial = adaptive_simpson(&integrand(w, r, t), 0.0, (T_TOP / t).ln(), tol);
        return Ok(IntegralOutcome::Inconclusive { partial });
    };
    if diverges(p, q, r) {
        return Ok(IntegralOutcome::Divergent { exponent: p });
    }
    let cut = (T_TOP / t).ln();
    let partial = adaptive_simpson(&integrand(w, r, t), 0.0, cut, tol);
    let l_c = T_TOP.ln();
    let x = (r - p).max(0.0) * l_c;
    let tail = match (tail_factor(q, x, tol), w.eval(T_TOP)) {
        (Some(s), Ok(wc)) => wc * (-r * cut).exp() * l_c * s,
        _ => return Ok(IntegralOutcome::Inconclusive { partial }),
    };
    if !partial.is_finite() {
        return Ok(IntegralOutcome::Inconclusive { partial });
    }
    Ok(IntegralOutcome::Converged { value: partial + tail, tail })
}

/// `κ(t) = σ_1(t)`.
pub fn kappa(w: &dyn Weight, t: f64, tol: f64) -> Result<IntegralOutcome> {
    sigma_r(w, 1.0, t, tol)
}

/// `E_α(x) = ∫₁^∞ y^(−α) e^(−xy) dy`.
pub fn exp_integral(alpha: f64, x: f64, tol: f64) -> Result<IntegralOutcome> {
    check_tol(tol)?;
    if alpha < 0.0 {
        return Err(Error::Argument(format!("alpha must be nonnegative, got {alpha}")));
    }
    match tail_factor(alpha, x, tol) {
        Some(s) => Ok(IntegralOutcome::Converged { value: (-x).exp() * s, tail: 0.0 }),
        None if x < 0.0 || (x == 0.0 && alpha <= 1.0) => Ok(IntegralOutcome::Divergent { exponent: -x }),
        None => Ok(IntegralOutcome::Inconclusive { partial: f64::NAN }),
    }
}

/// `∫₁^Y y^(−α) e^(−xy) dy`, finite for every real `x`.
pub fn exp_integral_truncated(alpha: f64, x: f64, y_max: f64, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    if !(y_max >= 1.0) {
        return Err(Error::Argument(format!("upper limit must be at least 1, got {y_max}")));
    }
    let f = |y: f64| y.powf(-alpha) * (-x * y).exp();
    Ok(adaptive_simpson(&f, 1.0, y_max, tol))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Condition {
    StrongR(f64),
    Discrete,
    Strong,
    NonQuasianalytic,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::StrongR(r) => write!(f, "S_r(r={r})"),
            Condition::Discrete => f.write_str("discrete"),
            Condition::Strong => f.write_str("strong"),
            Condition::NonQuasianalytic => f.write_str("non-quasianalytic"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Constants {
    pub c: f64,
    pub k: Option<f64>,
    pub h: Option<f64>,
    pub t0: Option<f64>,
    pub r: Option<f64>,
}

/// A violation at `(t, j)`; `j` is a power index or a cutoff index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub t: f64,
    pub j: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairVerdict {
    pub condition: Condition,
    pub verdict: Verdict,
    pub constants: Option<Constants>,
    pub witnesses: Vec<Witness>,
    pub grid: Option<GeometricGrid>,
    /// Extra named quantities (integral values, exponents).
    pub details: Vec<(String, f64)>,
}

impl PairVerdict {
    fn new(condition: Condition, verdict: Verdict) -> Self {
        PairVerdict { condition, verdict, constants: None, witnesses: Vec::new(), grid: None, details: Vec::new() }
    }

    pub fn detail(&self, name: &str) -> Option<f64> {
        self.details.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// `∫₁^∞ ω(t)/t² dt`. The part over `[1, t_min]`, where `ω` is continued
/// below its formula, is reported as `ramp_part`.
pub fn check_nonquasianalytic(w: &WeightFunction, tol: f64) -> Result<PairVerdict> {
    let outcome = sigma_r(w, 1.0, 1.0, tol)?;
    let mut pv = PairVerdict::new(Condition::NonQuasianalytic, Verdict::Inconclusive);
    match outcome {
        IntegralOutcome::Converged { value, tail } => {
            let ramp = if w.t_min > 1.0 {
                adaptive_simpson(&integrand(w, 1.0, 1.0), 0.0, w.t_min.ln(), tol)
            } else {
                0.0
            };
            pv.verdict = Verdict::HoldsEmpirically;
            pv.constants = Some(Constants { c: value, r: Some(1.0), ..Default::default() });
            pv.details = vec![
                ("value".into(), value),
                ("tail".into(), tail),
                ("ramp_part".into(), ramp),
                ("formula_part".into(), value - ramp),
            ];
        }
        IntegralOutcome::Divergent { exponent } => {
            pv.verdict = Verdict::Fails;
            pv.witnesses = divergence_witnesses(w, 1.0, 1.0, 1.0);
            pv.details = vec![("exponent".into(), exponent)];
        }
        IntegralOutcome::Inconclusive { partial } => {
            pv.details = vec![("partial".into(), partial)];
        }
    }
    Ok(pv)
}

/// Partial integrals of `σ_r(t)` over growing cutoffs, scaled by `1/scale`.
fn divergence_witnesses(w: &dyn Weight, r: f64, t: f64, scale: f64) -> Vec<Witness> {
    let cut = (T_TOP / t).ln();
    let f = integrand(w, r, t);
    (1..=5)
        .map(|k| Witness {
            t,
            j: k,
            value: adaptive_simpson(&f, 0.0, cut * k as f64 / 5.0, 1e-6) / scale,
        })
        .collect()
}

/// Tests `∫₁^∞ ω(tu) u^(−1−r) du ≤ C σ(t) + C` on the grid via the profile
/// `M(t) = σ_r(t)/(σ(t) + 1)`.
pub fn check_r_strong(
    w: &dyn Weight,
    sigma: &dyn Weight,
    r: f64,
    grid: &GeometricGrid,
    tol: f64,
) -> Result<PairVerdict> {
    check_r(r)?;
    let mut pv = PairVerdict::new(Condition::StrongR(r), Verdict::Inconclusive);
    pv.grid = Some(*grid);
    let ts = grid.points();
    let outcomes = ts
        .par_iter()
        .map(|&t| sigma_r(w, r, t, tol))
        .collect::<Result<Vec<IntegralOutcome>>>()?;
    if let Some(i) = outcomes.iter().position(|o| o.is_divergent()) {
        let scale = sigma.eval(ts[i])? + 1.0;
        pv.verdict = Verdict::Fails;
        pv.witnesses = divergence_witnesses(w, r, ts[i], scale);
        if let IntegralOutcome::Divergent { exponent } = outcomes[i] {
            pv.details.push(("exponent".into(), exponent));
        }
        return Ok(pv);
    }
    let mut profile = Vec::with_capacity(ts.len());
    for (t, o) in ts.iter().zip(&outcomes) {
        match o.value() {
            Some(v) => profile.push(v / (sigma.eval(*t)? + 1.0)),
            None => return Ok(pv),
        }
    }
    let decade = grid.last_decade_start();
    let c = profile.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (trend, _) = bounded_trend(&ts, &profile, decade);
    if trend == Verdict::HoldsEmpirically {
        pv.verdict = Verdict::HoldsEmpirically;
        pv.constants = Some(Constants { c, r: Some(r), ..Default::default() });
        return Ok(pv);
    }
    let tail = &profile[decade..];
    let first_half = profile[..ts.len() / 2].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let monotone = tail.windows(2).all(|w| w[1] >= w[0]);
    if monotone && *tail.last().unwrap() >= 10.0 * first_half {
        pv.verdict = Verdict::Fails;
        pv.witnesses = ts[decade..]
            .iter()
            .zip(tail)
            .enumerate()
            .map(|(k, (&t, &value))| Witness { t, j: k as u32, value })
            .collect();
    }
    Ok(pv)
}

/// The strong-pair condition, i.e. `S_r` with `r = 1`.
pub fn check_strong(w: &dyn Weight, sigma: &dyn Weight, grid: &GeometricGrid, tol: f64) -> Result<PairVerdict> {
    let mut pv = check_r_strong(w, sigma, 1.0, grid, tol)?;
    pv.condition = Condition::Strong;
    Ok(pv)
}

/// Candidate grids for the discrete condition `ω(K^j t) ≤ C H^j σ(t)`.
/// `H` runs over `K^e` for `e` in `h_exponents`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSearch {
    pub k_grid: Vec<f64>,
    pub h_exponents: Vec<f64>,
    pub t0_grid: Vec<f64>,
    pub j_max: u32,
    /// Upper end and size of the geometric `t` grid starting at `t₀`.
    pub t_hi: f64,
    pub t_count: usize,
}

impl Default for DiscreteSearch {
    fn default() -> Self {
        let mut h_exponents: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        h_exponents.push(0.95);
        DiscreteSearch {
            k_grid: vec![2.0, std::f64::consts::E, 4.0, 8.0],
            h_exponents,
            t0_grid: vec![1.0, 10.0, 100.0],
            j_max: 20,
            t_hi: 1e12,
            t_count: 120,
        }
    }
}

struct Candidate {
    k: f64,
    h: f64,
    t0: f64,
}

enum CandidateResult {
    Stable(f64),
    Unstable(Witness),
}

fn ratio(w: &dyn Weight, sigma_t: f64, c: &Candidate, t: f64, j: u32) -> f64 {
    let arg = c.k.powi(j as i32) * t;
    match w.eval(arg) {
        Ok(v) => v / (c.h.powi(j as i32) * sigma_t),
        Err(_) => f64::INFINITY,
    }
}

fn evaluate_candidate(w: &dyn Weight, sigma: &dyn Weight, c: &Candidate, s: &DiscreteSearch) -> Result<CandidateResult> {
    // on a bounded domain only t with K·t inside it are sampled
    let t_hi = s.t_hi.min(w.domain_max() / c.k);
    if !(t_hi > c.t0) {
        return Err(Error::Argument(format!(
            "t grid [{}, {t_hi}] is empty for K = {}",
            c.t0, c.k
        )));
    }
    let grid = GeometricGrid::new(c.t0, t_hi, s.t_count)?;
    let ts = grid.points();
    let mut best = Witness { t: c.t0, j: 1, value: f64::NEG_INFINITY };
    let mut per_t = Vec::with_capacity(ts.len());
    for &t in &ts {
        let st = sigma.eval(t)?;
        let mut m = f64::NEG_INFINITY;
        for j in 1..=s.j_max {
            if c.k.powi(j as i32) * t > w.domain_max() {
                break;
            }
            let v = ratio(w, st, c, t, j);
            if v > best.value || v.is_nan() {
                best = Witness { t, j, value: v };
            }
            m = m.max(v);
        }
        per_t.push(m);
    }
    if !best.value.is_finite() {
        return Ok(CandidateResult::Unstable(best));
    }
    let (trend, _) = bounded_trend(&ts, &per_t, grid.last_decade_start());
    if trend != Verdict::HoldsEmpirically {
        return Ok(CandidateResult::Unstable(best));
    }
    // far-j probe: follow j until K^j t leaves the representable range
    let top = w.domain_max().min(1e300);
    for &t in [ts[0], ts[ts.len() / 2], ts[ts.len() - 1]].iter() {
        let st = sigma.eval(t)?;
        let j_far = ((top / t).ln() / c.k.ln()).floor().max(0.0) as u32;
        let mut j = s.j_max + 1;
        while j <= j_far {
            let v = ratio(w, st, c, t, j);
            if !(v <= best.value * (1.0 + 1e-6)) {
                return Ok(CandidateResult::Unstable(Witness { t, j, value: v }));
            }
            j += 1;
        }
    }
    Ok(CandidateResult::Stable(best.value))
}

/// Exhaustive search for `(C, K, H, t₀)` with `ω(K^j t) ≤ C H^j σ(t)` for
/// `t ≥ t₀` and `1 ≤ j ≤ j_max`, returning the first stable candidate in
/// grid order.
pub fn check_discrete_condition(w: &dyn Weight, sigma: &dyn Weight, search: &DiscreteSearch) -> Result<PairVerdict> {
    if search.k_grid.is_empty() || search.h_exponents.is_empty() || search.t0_grid.is_empty() {
        return Err(Error::Argument("discrete search grids must be nonempty".into()));
    }
    if search.k_grid.iter().any(|&k| !(k > 1.0)) || search.h_exponents.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::Argument("need K > 1 and H = K^e with 0 < e < 1, so that H < K".into()));
    }
    let mut candidates = Vec::new();
    for &k in &search.k_grid {
        for &e in &search.h_exponents {
            for &t0 in &search.t0_grid {
                candidates.push(Candidate { k, h: k.powf(e), t0 });
            }
        }
    }
    let results = candidates
        .par_iter()
        .map(|c| evaluate_candidate(w, sigma, c, search))
        .collect::<Result<Vec<_>>>()?;
    let mut pv = PairVerdict::new(Condition::Discrete, Verdict::Fails);
    for (c, res) in candidates.iter().zip(&results) {
        match res {
            CandidateResult::Stable(cst) => {
                pv.verdict = Verdict::HoldsEmpirically;
                pv.constants = Some(Constants { c: *cst, k: Some(c.k), h: Some(c.h), t0: Some(c.t0), r: None });
                pv.witnesses.clear();
                return Ok(pv);
            }
            CandidateResult::Unstable(wit) => pv.witnesses.push(*wit),
        }
    }
    Ok(pv)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauValue {
    pub value: f64,
    pub argmax: u32,
    pub divergent: bool,
}

/// `τ_r(t) = sup_{0≤j≤j_max} ω(K^j t)/K^(rj)`, flagged divergent when the
/// terms still grow by a factor of at least `1 + tol` at `j_max`.
pub fn tau_r(w: &dyn Weight, k: f64, r: f64, t: f64, j_max: u32, tol: f64) -> Result<TauValue> {
    if !(k > 1.0) {
        return Err(Error::Argument(format!("K must exceed 1, got {k}")));
    }
    let terms = (0..=j_max)
        .map(|j| Ok(w.eval(k.powi(j as i32) * t)? / k.powf(r * j as f64)))
        .collect::<Result<Vec<f64>>>()?;
    let (argmax, value) = terms
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
    let n = terms.len();
    let divergent = n >= 2 && terms[n - 1] >= terms[n - 2] * (1.0 + tol);
    Ok(TauValue { value, argmax: argmax as u32, divergent })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterlacingReport {
    /// `τ_r ≤ C₄ σ_r` on the grid.
    pub c4: Option<f64>,
    /// `σ_r ≤ C₅ τ_s` on the grid.
    pub c5: Option<f64>,
    /// `τ_s = O(τ_r)`.
    pub tau_bound: AsymptoticVerdict,
}

/// Grid constants relating `τ_r`, `σ_r` and `τ_s` for `s ≤ r`.
pub fn verify_interlacing(
    w: &dyn Weight,
    k: f64,
    r: f64,
    s: f64,
    grid: &GeometricGrid,
    j_max: u32,
) -> Result<InterlacingReport> {
    check_r(r)?;
    if !(s > 0.0 && s <= r) {
        return Err(Error::Argument(format!("need 0 < s <= r, got s = {s}, r = {r}")));
    }
    if j_max < 8 {
        return Err(Error::Argument("j_max must be at least 8".into()));
    }
    let ts = grid.points();
    let rows = ts
        .par_iter()
        .map(|&t| {
            Ok((
                tau_r(w, k, r, t, j_max, 1e-3)?,
                tau_r(w, k, s, t, j_max, 1e-3)?,
                sigma_r(w, r, t, DEFAULT_TOL)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let sigmas: Option<Vec<f64>> = rows.iter().map(|(_, _, o)| o.value()).collect();
    let tau_r_ok = rows.iter().all(|(a, _, _)| !a.divergent);
    let tau_s_ok = rows.iter().all(|(_, b, _)| !b.divergent);
    let max = |v: Vec<f64>| v.into_iter().fold(f64::NEG_INFINITY, f64::max);
    let c4 = match (&sigmas, tau_r_ok) {
        (Some(sg), true) => Some(max(rows.iter().zip(sg).map(|((a, _, _), s)| a.value / s).collect())),
        _ => None,
    };
    let c5 = match (&sigmas, tau_s_ok) {
        (Some(sg), true) => Some(max(rows.iter().zip(sg).map(|((_, b, _), s)| s / b.value).collect())),
        _ => None,
    };
    let tau_bound = if !tau_r_ok {
        AsymptoticVerdict { verdict: Verdict::Inconclusive, witnesses: Vec::new(), grid: *grid }
    } else {
        let ratios: Vec<f64> = rows
            .iter()
            .map(|(a, b, _)| if b.divergent { f64::INFINITY } else { b.value / a.value })
            .collect();
        let (verdict, witnesses) = bounded_trend(&ts, &ratios, grid.last_decade_start());
        AsymptoticVerdict { verdict, witnesses, grid: *grid }
    };
    Ok(InterlacingReport { c4, c5, tau_bound })
}

/// Estimate of `γ(σ, ω)` with its bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthIndex {
    /// `γ ∈ [lo, hi]`.
    Estimate { gamma: f64, lo: f64, hi: f64 },
    /// Still `r`-strong at the floor `r = 0.01`.
    AtLeast(f64),
    /// Not even 1-strong.
    BelowOne,
}

pub const R_FLOOR: f64 = 0.01;

/// Coarser grid used by the growth-index bisection.
pub fn growth_index_grid() -> GeometricGrid {
    GeometricGrid { lo: 10.0, hi: 1e12, count: 40 }
}

/// Bisects `r` over `check_r_strong` verdicts; `γ = 1/r*`. Stops when the
/// `γ` bracket is narrower than `tol·γ`.
pub fn growth_index(sigma: &dyn Weight, w: &dyn Weight, tol: f64, grid: &GeometricGrid) -> Result<GrowthIndex> {
    if !(tol > 0.0 && tol <= 0.1) {
        return Err(Error::Argument(format!("tolerance must lie in (0, 0.1], got {tol}")));
    }
    let holds = |r: f64| -> Result<bool> { Ok(check_r_strong(w, sigma, r, grid, DEFAULT_TOL)?.verdict.holds()) };
    if !holds(1.0)? {
        return Ok(GrowthIndex::BelowOne);
    }
    if holds(R_FLOOR)? {
        return Ok(GrowthIndex::AtLeast(1.0 / R_FLOOR));
    }
    let (mut lo, mut hi) = (R_FLOOR, 1.0);
    while 1.0 / lo - 1.0 / hi > tol / hi {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(GrowthIndex::Estimate { gamma: 2.0 / (lo + hi), lo: 1.0 / hi, hi: 1.0 / lo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::catalog;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn converged(o: IntegralOutcome) -> f64 {
        o.value().unwrap_or_else(|| panic!("expected convergence, got {o:?}"))
    }

    fn small_grid() -> GeometricGrid {
        GeometricGrid::new(10.0, 1e12, 40).unwrap()
    }

    #[test]
    fn sigma_examples() {
        let w = catalog::power(0.5);
        let v = converged(sigma_r(&w, 0.75, 4.0, DEFAULT_TOL).unwrap());
        assert!((v - 8.0).abs() / 8.0 < 1e-6);
        assert!(sigma_r(&w, 0.5, 4.0, DEFAULT_TOL).unwrap().is_divergent());
        let k = converged(kappa(&w, 9.0, DEFAULT_TOL).unwrap());
        assert!((k - 6.0).abs() < 1e-6);
    }

    #[test]
    fn sigma_rejects_bad_arguments() {
        let w = catalog::power(0.5);
        assert!(sigma_r(&w, 0.0, 4.0, DEFAULT_TOL).is_err());
        assert!(sigma_r(&w, 0.5, 4.0, 0.1).is_err());
    }

    #[test]
    fn tail_fit_recovers_exponents() {
        let (p, q) = tail_exponents(&catalog::omega_alpha(2.0)).unwrap();
        assert!((p - 1.0).abs() < 1e-6 && (q - 2.0).abs() < 1e-4);
        let (p, q) = tail_exponents(&catalog::power(0.3)).unwrap();
        assert!((p - 0.3).abs() < 1e-6 && q.abs() < 1e-4);
    }

    #[test]
    fn kappa_of_log_weights() {
        let t = 30f64.exp();
        for alpha in [2.0, 3.0] {
            let k = converged(kappa(&catalog::omega_alpha(alpha), t, DEFAULT_TOL).unwrap());
            let lower = catalog::omega_alpha(alpha - 1.0).eval(t).unwrap();
            assert!(((alpha - 1.0) * k / lower - 1.0).abs() < 1e-6, "alpha {alpha}");
        }
    }

    #[test]
    fn exp_integral_examples() {
        assert!((converged(exp_integral(2.0, 0.0, 1e-10).unwrap()) - 1.0).abs() < 1e-12);
        let e1 = converged(exp_integral(1.0, 1.0, 1e-10).unwrap());
        assert!((e1 - 0.219_383_934_395_520_3).abs() < 1e-7);
        assert!(exp_integral(1.0, 0.0, 1e-8).unwrap().is_divergent());
        assert!(exp_integral(2.0, -1.0, 1e-8).unwrap().is_divergent());
    }

    #[test]
    fn exp_integral_matches_direct_quadrature() {
        for (alpha, x) in [(0.5, 2.0), (2.0, 0.3), (3.0, 5.0)] {
            let v = converged(exp_integral(alpha, x, 1e-10).unwrap());
            let direct = exp_integral_truncated(alpha, x, 200.0, 1e-10).unwrap();
            assert!((v - direct).abs() / v < 1e-8, "{alpha} {x}");
        }
    }

    #[test]
    fn log_weight_identity_under_truncation() {
        let w = catalog::omega_alpha(2.0);
        let r = 0.75;
        for l in [10.0, 20.0] {
            let t = f64::exp(l);
            assert!(sigma_r(&w, r, t, DEFAULT_TOL).unwrap().is_divergent());
            assert!(exp_integral(2.0, (r - 1.0) * l, DEFAULT_TOL).unwrap().is_divergent());
            let u_max = f64::exp(40.0);
            let lhs = sigma_r_truncated(&w, r, t, u_max, 1e-10).unwrap();
            let y_max = 1.0 + 40.0 / l;
            let e = exp_integral_truncated(2.0, (r - 1.0) * l, y_max, 1e-10).unwrap();
            let rhs = catalog::omega_alpha(1.0).eval(t).unwrap() * t.powf(r - 1.0) * e;
            assert!((lhs / rhs - 1.0).abs() < 1e-4, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn nonquasianalytic_battery() {
        let pv = check_nonquasianalytic(&catalog::power(0.5), DEFAULT_TOL).unwrap();
        assert!(pv.verdict.holds());
        assert!((pv.detail("value").unwrap() - 2.0).abs() < 1e-4);
        assert_eq!(pv.detail("ramp_part").unwrap(), 0.0);
        assert_eq!(check_nonquasianalytic(&catalog::power(1.0), DEFAULT_TOL).unwrap().verdict, Verdict::Fails);
        for (alpha, holds) in [(0.5, false), (1.0, false), (1.5, true), (2.0, true)] {
            let pv = check_nonquasianalytic(&catalog::omega_alpha(alpha), DEFAULT_TOL).unwrap();
            assert_eq!(pv.verdict.holds(), holds, "alpha {alpha}: {pv:?}");
            if holds {
                assert!(pv.detail("ramp_part").unwrap() > 0.0);
            } else {
                assert!(!pv.witnesses.is_empty());
            }
        }
    }

    #[test]
    fn r_strong_examples() {
        let grid = small_grid();
        let sqrt = catalog::power(0.5);
        let pv = check_r_strong(&sqrt, &sqrt, 0.75, &grid, DEFAULT_TOL).unwrap();
        assert!(pv.verdict.holds());
        assert!((pv.constants.unwrap().c - 4.0).abs() < 0.1);

        let (w2, w1) = (catalog::omega_alpha(2.0), catalog::omega_alpha(1.0));
        assert!(check_r_strong(&w2, &w1, 1.0, &grid, DEFAULT_TOL).unwrap().verdict.holds());
        let pv = check_r_strong(&w2, &w1, 0.9, &grid, DEFAULT_TOL).unwrap();
        assert_eq!(pv.verdict, Verdict::Fails);
        assert!(pv.witnesses.windows(2).all(|w| w[1].value > w[0].value));
    }

    #[test]
    fn discrete_examples() {
        let sqrt = catalog::power(0.5);
        let search = DiscreteSearch { k_grid: vec![4.0], ..Default::default() };
        let pv = check_discrete_condition(&sqrt, &sqrt, &search).unwrap();
        let c = pv.constants.unwrap();
        assert!((c.c - 1.0).abs() < 1e-9);
        assert_eq!(c.k, Some(4.0));
        assert!((c.h.unwrap() - 2.0).abs() < 1e-12);

        let search = DiscreteSearch { h_exponents: vec![0.6], ..Default::default() };
        let pv = check_discrete_condition(&sqrt, &catalog::power(0.9), &search).unwrap();
        let c = pv.constants.unwrap();
        // sup of 2^(-0.1 j) t^(-0.4) over j >= 1, t >= 1
        assert!((c.c - 2f64.powf(-0.1)).abs() < 1e-12);
        assert_eq!(c.t0, Some(1.0));
        assert!((c.h.unwrap() - 2f64.powf(0.6)).abs() < 1e-12);

        let pv = check_discrete_condition(&catalog::omega_alpha(2.0), &catalog::omega_alpha(1.0), &DiscreteSearch::default()).unwrap();
        assert_eq!(pv.verdict, Verdict::Fails);
        assert_eq!(pv.witnesses.len(), 4 * 10 * 3);
    }

    #[test]
    fn discrete_rejects_bad_grids() {
        let w = catalog::power(0.5);
        let empty = DiscreteSearch { k_grid: vec![], ..Default::default() };
        assert!(check_discrete_condition(&w, &w, &empty).is_err());
        let bad = DiscreteSearch { h_exponents: vec![1.2], ..Default::default() };
        assert!(check_discrete_condition(&w, &w, &bad).is_err());
    }

    #[test]
    fn tau_examples() {
        let w = catalog::power(0.5);
        let t = tau_r(&w, 4.0, 0.75, 9.0, 20, 1e-3).unwrap();
        assert_eq!((t.value, t.argmax, t.divergent), (3.0, 0, false));
        assert!(tau_r(&w, 4.0, 0.25, 9.0, 20, 1e-3).unwrap().divergent);
        assert_eq!(tau_r(&w, 4.0, 0.25, 9.0, 0, 1e-3).unwrap().value, 3.0);
    }

    #[test]
    fn interlacing_examples() {
        let grid = small_grid();
        let w = catalog::power(0.5);
        let rep = verify_interlacing(&w, 4.0, 0.75, 0.6, &grid, 20).unwrap();
        assert!((rep.c4.unwrap() - 0.25).abs() < 1e-6);
        assert!((rep.c5.unwrap() - 4.0).abs() < 1e-6);
        assert!(rep.tau_bound.verdict.holds());
        let rep = verify_interlacing(&w, 4.0, 0.75, 0.75, &grid, 20).unwrap();
        assert!(rep.c5.unwrap().is_finite());

        let rep = verify_interlacing(&catalog::omega_alpha(2.0), E, 0.95, 0.9, &grid, 8).unwrap();
        assert_eq!(rep.tau_bound.verdict, Verdict::Fails);
        assert!(rep.c4.is_none());
    }

    #[test]
    fn growth_indices() {
        let grid = growth_index_grid();
        let cases = [
            (catalog::power(0.5), catalog::power(0.5), 2.0),
            (catalog::power(1.0 / 3.0), catalog::power(1.0 / 3.0), 3.0),
            (catalog::omega_alpha(1.0), catalog::omega_alpha(2.0), 1.0),
        ];
        for (sigma, w, expected) in cases {
            match growth_index(&sigma, &w, 0.01, &grid).unwrap() {
                GrowthIndex::Estimate { gamma, lo, hi } => {
                    assert!((gamma / expected - 1.0).abs() < 0.05, "{gamma} vs {expected}");
                    assert!(lo <= gamma && gamma <= hi);
                }
                other => panic!("{other:?}"),
            }
        }
        let linear = catalog::power(1.0);
        assert_eq!(growth_index(&catalog::power(0.5), &linear, 0.01, &grid).unwrap(), GrowthIndex::BelowOne);
    }

    #[test]
    fn sigma_dominates_weight() {
        for w in [catalog::power(0.5), catalog::omega_alpha(2.0), catalog::power(0.9)] {
            for t in small_grid().points() {
                let s = converged(sigma_r(&w, 1.0, t, DEFAULT_TOL).unwrap());
                assert!(w.eval(t).unwrap() <= s * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn lemma_chain_agrees() {
        let grid = small_grid();
        let search = DiscreteSearch::default();
        let sqrt = catalog::power(0.5);
        assert!(check_r_strong(&sqrt, &sqrt, 0.75, &grid, DEFAULT_TOL).unwrap().verdict.holds());
        let pv = check_discrete_condition(&sqrt, &sqrt, &search).unwrap();
        assert!(pv.verdict.holds());
        assert!((pv.constants.unwrap().c - 1.0).abs() < 1e-9);

        let w2 = catalog::omega_alpha(2.0);
        assert_eq!(check_r_strong(&w2, &w2, 0.75, &grid, DEFAULT_TOL).unwrap().verdict, Verdict::Fails);
        assert_eq!(check_discrete_condition(&w2, &w2, &search).unwrap().verdict, Verdict::Fails);
    }

    #[test]
    fn discrete_constants_bound_sigma_r() {
        let sqrt = catalog::power(0.5);
        let r = 0.75;
        let k = 4.0;
        let search = DiscreteSearch { k_grid: vec![k], h_exponents: vec![r], ..Default::default() };
        assert!(check_discrete_condition(&sqrt, &sqrt, &search).unwrap().verdict.holds());
        let grid = small_grid();
        let c_r = check_r_strong(&sqrt, &sqrt, r, &grid, DEFAULT_TOL).unwrap().constants.unwrap().c;
        let factor = k.powf(1.0 + r) / (k - 1.0);
        for t in grid.points() {
            let s = converged(sigma_r(&sqrt, r, t, DEFAULT_TOL).unwrap());
            for j in 0..20 {
                let lhs = sqrt.eval(k.powi(j) * t).unwrap() / k.powf(r * j as f64);
                assert!(lhs <= factor * s);
                assert!(lhs <= factor * c_r * (sqrt.eval(t).unwrap() + 1.0));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn r_strong_is_monotone_in_r(r in 0.55f64..1.0, d in 0.0f64..0.4) {
            let s = (r + d).min(1.0);
            let grid = GeometricGrid::new(10.0, 1e12, 24).unwrap();
            let w = catalog::power(0.5);
            let a = check_r_strong(&w, &w, r, &grid, DEFAULT_TOL).unwrap();
            let b = check_r_strong(&w, &w, s, &grid, DEFAULT_TOL).unwrap();
            prop_assert!(a.verdict.holds());
            prop_assert!(b.verdict.holds());
            prop_assert!(b.constants.unwrap().c <= a.constants.unwrap().c * (1.0 + 1e-7));
        }

        #[test]
        fn kappa_dominates_dilations(t in 1.0f64..1e8, k in 1.1f64..10.0, j in 0i32..12, alpha in 1.5f64..3.0) {
            let w = catalog::omega_alpha(alpha);
            let kap = converged(kappa(&w, t, DEFAULT_TOL).unwrap());
            prop_assert!(kap * (1.0 + 1e-7) >= w.eval(k.powi(j) * t).unwrap() / k.powi(j));
        }
    }
}
