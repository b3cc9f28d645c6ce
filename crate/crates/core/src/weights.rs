//! Weight functions and grid-level checks of the weight-function axioms.
//!
//! Every verdict produced here is a statement about a finite grid. A
//! [`Verdict::HoldsEmpirically`] never proves an asymptotic relation; it only
//! reports that the sampled values show no trend against it.

use std::fmt;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::numeric::GeometricGrid;

/// Anything that can be evaluated as a weight `t ↦ ω(t)` on `[0, domain_max]`.
pub trait Weight: Send + Sync {
    fn eval(&self, t: f64) -> Result<f64>;

    /// First derivative; defaults to a Richardson-refined central difference.
    fn derivative(&self, t: f64) -> Result<f64> {
        central_difference(|x| self.eval(x), t, &self.label())
    }

    /// Upper end of the interval on which `eval` is defined.
    fn domain_max(&self) -> f64 {
        f64::INFINITY
    }

    fn label(&self) -> String {
        "weight".to_string()
    }
}

impl<W: Weight + ?Sized> Weight for &W {
    fn eval(&self, t: f64) -> Result<f64> {
        (**self).eval(t)
    }
    fn derivative(&self, t: f64) -> Result<f64> {
        (**self).derivative(t)
    }
    fn domain_max(&self) -> f64 {
        (**self).domain_max()
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

/// Adapter turning a closure into a [`Weight`].
pub struct FnWeight<F> {
    f: F,
    name: String,
}

impl<F> FnWeight<F>
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnWeight { f, name: name.into() }
    }
}

impl<F> Weight for FnWeight<F>
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    fn eval(&self, t: f64) -> Result<f64> {
        let v = (self.f)(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain { name: self.name.clone(), t, detail: format!("value {v}") })
        }
    }

    fn label(&self) -> String {
        self.name.clone()
    }
}

/// How a weight is continued below its validity threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// `ω(t) = ω(t_min)·t/t_min` for `t < t_min`.
    Ramp,
    /// Ramp continuation, then `ω(t) = 0` on `[0, below]`.
    Truncate { below: f64 },
}

/// Continuation of a weight below `t_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Continuation {
    /// `ω(t_min)·t/t_min`.
    Linear,
    /// `ω(t_min)·(t/t_min)^p` with `p = t_min·ω′(t_min)/ω(t_min)`, which keeps
    /// `ω` differentiable at `t_min` and `ω∘exp` convex.
    Power,
}

/// A weight given by a closed-form expression valid for `t ≥ t_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction {
    pub expr: Expr,
    pub deriv: Option<Expr>,
    pub t_min: f64,
    pub name: String,
    pub normalization: Normalization,
    pub continuation: Continuation,
}

impl WeightFunction {
    /// Parses `text`; `t_min` defaults to 1.
    pub fn parse(text: &str) -> Result<Self> {
        let expr = Expr::parse(text)?;
        Ok(WeightFunction {
            expr,
            deriv: None,
            t_min: 1.0,
            name: text.trim().to_string(),
            normalization: Normalization::Ramp,
            continuation: Continuation::Linear,
        })
    }

    pub fn with_t_min(mut self, t_min: f64) -> Result<Self> {
        if !(t_min > 0.0 && t_min.is_finite()) {
            return Err(Error::Argument(format!("t_min must be positive, got {t_min}")));
        }
        self.t_min = t_min;
        Ok(self)
    }

    pub fn with_derivative(mut self, text: &str) -> Result<Self> {
        self.deriv = Some(Expr::parse(text)?);
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Hard truncation `ω = 0` on `[0, below]`.
    pub fn truncated(mut self, below: f64) -> Self {
        self.normalization = Normalization::Truncate { below };
        self
    }

    /// The `ω|[0,1] = 0` normalization used before conjugation.
    pub fn normalized(&self) -> Self {
        self.clone().truncated(1.0)
    }

    pub fn with_continuation(mut self, continuation: Continuation) -> Self {
        self.continuation = continuation;
        self
    }

    /// Exponent of the continuation below `t_min` (1 for the linear ramp).
    fn ramp_exponent(&self) -> Result<f64> {
        match self.continuation {
            Continuation::Linear => Ok(1.0),
            Continuation::Power => {
                let v = self.raw(self.t_min)?;
                let d = match &self.deriv {
                    Some(d) => d.eval(self.t_min),
                    None => central_difference(|x| self.raw(x), self.t_min, &self.name)?,
                };
                let p = self.t_min * d / v;
                if p.is_finite() && p > 0.0 {
                    Ok(p)
                } else {
                    Err(Error::Derivative { name: self.name.clone(), t: self.t_min, step: 0.0 })
                }
            }
        }
    }

    fn raw(&self, t: f64) -> Result<f64> {
        let v = self.expr.eval(t);
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(Error::Domain {
                name: self.name.clone(),
                t,
                detail: format!("expression evaluates to {v}"),
            })
        }
    }
}

impl Weight for WeightFunction {
    fn eval(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::Domain {
                name: self.name.clone(),
                t,
                detail: "argument must be a nonnegative number".into(),
            });
        }
        if let Normalization::Truncate { below } = self.normalization {
            if t <= below {
                return Ok(0.0);
            }
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        if t < self.t_min {
            let p = self.ramp_exponent()?;
            return Ok(self.raw(self.t_min)? * (t / self.t_min).powf(p));
        }
        self.raw(t)
    }

    fn derivative(&self, t: f64) -> Result<f64> {
        if let Normalization::Truncate { below } = self.normalization {
            if t < below {
                return Ok(0.0);
            }
        }
        if t < self.t_min {
            let p = self.ramp_exponent()?;
            return Ok(p * self.raw(self.t_min)? / self.t_min * (t / self.t_min).powf(p - 1.0));
        }
        match &self.deriv {
            Some(d) => {
                let v = d.eval(t);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Derivative { name: self.name.clone(), t, step: 0.0 })
                }
            }
            None => central_difference(|x| self.eval(x), t, &self.name),
        }
    }

    fn label(&self) -> String {
        self.name.clone()
    }
}

impl fmt::Display for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

pub fn eval_weight(w: &dyn Weight, t: f64) -> Result<f64> {
    w.eval(t)
}

pub fn weight_derivative(w: &dyn Weight, t: f64) -> Result<f64> {
    w.derivative(t)
}

/// Central difference with step `max(1e-6·t, 1e-9)` and one Richardson step.
pub fn central_difference<F>(f: F, t: f64, name: &str) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let h = (1e-6 * t.abs()).max(1e-9);
    let quotient = |h: f64| -> Result<f64> { Ok((f(t + h)? - f(t - h)?) / (2.0 * h)) };
    let coarse = quotient(h)?;
    let fine = quotient(0.5 * h)?;
    let d = (4.0 * fine - coarse) / 3.0;
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::Derivative { name: name.to_string(), t, step: h })
    }
}

/// Catalog weights with analytic derivatives.
pub mod catalog {
    use super::{Continuation, WeightFunction};
    use crate::expr::Expr;

    /// `t^beta`.
    pub fn power(beta: f64) -> WeightFunction {
        WeightFunction::parse(&format!("t^{beta}"))
            .and_then(|w| w.with_derivative(&format!("{beta} * t^({beta} - 1)")))
            .expect("power weight parses")
    }

    /// `t/(log t)^alpha`, continued by a power below `e^(alpha+1)` where the
    /// expression starts being concave.
    pub fn omega_alpha(alpha: f64) -> WeightFunction {
        let text = if alpha == 0.0 { "t".to_string() } else { format!("t/(log t)^{alpha}") };
        let mut w = WeightFunction::parse(&text)
            .and_then(|w| {
                w.with_derivative(&format!("(log(t) - {alpha}) / log(t)^({alpha} + 1)"))
            })
            .expect("log weight parses")
            .with_continuation(Continuation::Power);
        w.t_min = (alpha + 1.0).exp();
        w
    }

    /// `max(0, t - 1)`.
    pub fn shifted_linear() -> WeightFunction {
        WeightFunction::parse("max(0, t - 1)")
            .and_then(|w| w.with_derivative("1"))
            .expect("shifted linear weight parses")
    }

    /// Maps expressions of the catalog shapes `t^β`, `t/(log t)^α`,
    /// `t/log t` and `max(0, t - 1)` to the catalog weight.
    pub fn recognize(expr: &Expr) -> Option<WeightFunction> {
        let named = |w: WeightFunction| Some(w.with_name(expr.to_string()));
        match expr {
            Expr::Pow(b, e) => match (b.as_ref(), e.as_ref()) {
                (Expr::Var, Expr::Num(beta)) if *beta > 0.0 && *beta <= 1.0 => named(power(*beta)),
                _ => None,
            },
            Expr::Div(n, d) if **n == Expr::Var => match d.as_ref() {
                Expr::Log(a) if **a == Expr::Var => named(omega_alpha(1.0)),
                Expr::Pow(b, e) => match (b.as_ref(), e.as_ref()) {
                    (Expr::Log(a), Expr::Num(alpha)) if **a == Expr::Var && *alpha > 0.0 => named(omega_alpha(*alpha)),
                    _ => None,
                },
                _ => None,
            },
            Expr::Max(a, b) => match (a.as_ref(), b.as_ref()) {
                (Expr::Num(z), Expr::Sub(v, one)) if *z == 0.0 && **v == Expr::Var && **one == Expr::Num(1.0) => {
                    named(shifted_linear())
                }
                _ => None,
            },
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    HoldsEmpirically,
    Fails,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::HoldsEmpirically => "holds-empirically",
            Verdict::Fails => "fails",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    /// Combines verdicts: any failure fails, otherwise any inconclusive wins.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fails, _) | (_, Fails) => Fails,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => HoldsEmpirically,
        }
    }

    pub fn holds(&self) -> bool {
        *self == Verdict::HoldsEmpirically
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    BigO,
    LittleO,
    Equivalent,
}

impl Relation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Relation::BigO => "big_O",
            Relation::LittleO => "little_o",
            Relation::Equivalent => "equivalent",
        }
    }
}

/// Grid-level verdict with the `(t, value)` pairs that violate the tested bound.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticVerdict {
    pub verdict: Verdict,
    pub witnesses: Vec<(f64, f64)>,
    pub grid: GeometricGrid,
}

impl AsymptoticVerdict {
    fn new(verdict: Verdict, witnesses: Vec<(f64, f64)>, grid: GeometricGrid) -> Self {
        AsymptoticVerdict { verdict, witnesses, grid }
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Bounded-ratio heuristic: the last-decade maximum stays within twice the
/// overall median. Witnesses are last-decade points above that bound.
pub fn bounded_trend(ts: &[f64], ratios: &[f64], decade_start: usize) -> (Verdict, Vec<(f64, f64)>) {
    if ratios.iter().any(|r| r.is_nan()) {
        let w = ts.iter().zip(ratios).filter(|(_, r)| r.is_nan()).map(|(&t, &r)| (t, r)).collect();
        return (Verdict::Inconclusive, w);
    }
    let infinite: Vec<(f64, f64)> =
        ts.iter().zip(ratios).filter(|(_, r)| r.is_infinite()).map(|(&t, &r)| (t, r)).collect();
    if !infinite.is_empty() {
        return (Verdict::Fails, infinite);
    }
    let bound = 2.0 * median(ratios);
    let witnesses: Vec<(f64, f64)> = ts[decade_start..]
        .iter()
        .zip(&ratios[decade_start..])
        .filter(|(_, &r)| r > bound)
        .map(|(&t, &r)| (t, r))
        .collect();
    if witnesses.is_empty() {
        (Verdict::HoldsEmpirically, witnesses)
    } else {
        (Verdict::Fails, witnesses)
    }
}

/// Vanishing-ratio heuristic: the last value is at most a tenth of the first
/// and the ratio is nonincreasing over the second half of the grid.
pub fn vanishing_trend(ts: &[f64], ratios: &[f64]) -> (Verdict, Vec<(f64, f64)>) {
    if ratios.iter().any(|r| !r.is_finite()) {
        let w = ts
            .iter()
            .zip(ratios)
            .filter(|(_, r)| !r.is_finite())
            .map(|(&t, &r)| (t, r))
            .collect();
        return (Verdict::Inconclusive, w);
    }
    let n = ratios.len();
    let mut witnesses = Vec::new();
    if ratios[n - 1] > 0.1 * ratios[0] {
        witnesses.push((ts[n - 1], ratios[n - 1]));
    }
    for i in (n / 2).max(1)..n {
        if ratios[i] > ratios[i - 1] + 1e-9 * ratios[i - 1].abs() {
            witnesses.push((ts[i], ratios[i]));
        }
    }
    witnesses.sort_by(|a, b| a.0.total_cmp(&b.0));
    witnesses.dedup_by(|a, b| a.0 == b.0);
    if witnesses.is_empty() {
        (Verdict::HoldsEmpirically, witnesses)
    } else {
        (Verdict::Fails, witnesses)
    }
}

fn ratios_on_grid(f: &dyn Weight, g: &dyn Weight, ts: &[f64]) -> Option<Vec<f64>> {
    ts.iter()
        .map(|&t| {
            let den = g.eval(t).ok()?;
            if den <= 0.0 {
                return None;
            }
            Some(f.eval(t).map(|v| v / den).unwrap_or(f64::INFINITY))
        })
        .collect()
}

/// Tests `f = O(g)`, `f = o(g)` or equivalence on the grid.
pub fn asymptotic_verdict(
    f: &dyn Weight,
    g: &dyn Weight,
    relation: Relation,
    grid: &GeometricGrid,
) -> AsymptoticVerdict {
    let ts = grid.points();
    let decade = grid.last_decade_start();
    let Some(ratios) = ratios_on_grid(f, g, &ts) else {
        return AsymptoticVerdict::new(Verdict::Inconclusive, Vec::new(), *grid);
    };
    let (verdict, witnesses) = match relation {
        Relation::BigO => bounded_trend(&ts, &ratios, decade),
        Relation::LittleO => vanishing_trend(&ts, &ratios),
        Relation::Equivalent => {
            let (v1, mut w1) = bounded_trend(&ts, &ratios, decade);
            let Some(inverse) = ratios_on_grid(g, f, &ts) else {
                return AsymptoticVerdict::new(Verdict::Inconclusive, w1, *grid);
            };
            let (v2, w2) = bounded_trend(&ts, &inverse, decade);
            w1.extend(w2);
            (v1.and(v2), w1)
        }
    };
    AsymptoticVerdict::new(verdict, witnesses, *grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModerateGrowth {
    pub check: AsymptoticVerdict,
    /// Smallest `C₂` with `ω(2t) ≤ C₂ ω(t)` on the grid.
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub grid: GeometricGrid,
    pub increasing: AsymptoticVerdict,
    pub moderate_growth: ModerateGrowth,
    pub log_small: AsymptoticVerdict,
    pub phi_convex: AsymptoticVerdict,
    pub concave: AsymptoticVerdict,
}

impl AxiomReport {
    /// Axioms of a weight function (concavity is reported separately).
    pub fn is_weight(&self) -> Verdict {
        self.increasing
            .verdict
            .and(self.moderate_growth.check.verdict)
            .and(self.log_small.verdict)
            .and(self.phi_convex.verdict)
    }

    pub fn overall(&self) -> Verdict {
        self.is_weight().and(self.concave.verdict)
    }
}

const MIDPOINT_SLACK: f64 = 1e-9;

fn slack(v: f64) -> f64 {
    MIDPOINT_SLACK * (1.0 + v.abs())
}

fn verdict_from(witnesses: Vec<(f64, f64)>, missing: bool, grid: GeometricGrid) -> AsymptoticVerdict {
    let verdict = if !witnesses.is_empty() {
        Verdict::Fails
    } else if missing {
        Verdict::Inconclusive
    } else {
        Verdict::HoldsEmpirically
    };
    AsymptoticVerdict::new(verdict, witnesses, grid)
}

/// Checks the weight-function axioms and concavity of `w` on `grid`.
pub fn check_weight_axioms(w: &dyn Weight, grid: &GeometricGrid) -> Result<AxiomReport> {
    if grid.count < 16 {
        return Err(Error::Argument(format!("axiom grid needs at least 16 points, got {}", grid.count)));
    }
    let ts = grid.points();
    let vals: Vec<Option<f64>> = ts.iter().map(|&t| w.eval(t).ok()).collect();
    let missing = vals.iter().any(Option::is_none);

    let mut inc = Vec::new();
    for i in 1..ts.len() {
        if let (Some(a), Some(b)) = (vals[i - 1], vals[i]) {
            if b < a {
                inc.push((ts[i], b - a));
            }
        }
    }
    let increasing = verdict_from(inc, missing, *grid);

    let ratios: Vec<f64> = ts
        .iter()
        .zip(&vals)
        .map(|(&t, v)| match (v, w.eval(2.0 * t)) {
            (Some(a), Ok(b)) if *a > 0.0 => b / a,
            (Some(a), Ok(b)) if *a == 0.0 && b == 0.0 => 1.0,
            _ => f64::INFINITY,
        })
        .collect();
    let (mg_verdict, mg_witnesses) = bounded_trend(&ts, &ratios, grid.last_decade_start());
    let c2 = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let moderate_growth = ModerateGrowth {
        check: AsymptoticVerdict::new(mg_verdict, mg_witnesses, *grid),
        c2,
    };

    let log = FnWeight::new("log t", f64::ln);
    let log_small = asymptotic_verdict(&log, w, Relation::LittleO, grid);

    let mut convex = Vec::new();
    let mut concave = Vec::new();
    let mut mid_missing = missing;
    for i in 1..ts.len() - 1 {
        let (sa, sb) = (ts[i - 1].ln(), ts[i + 1].ln());
        let sm = 0.5 * (sa + sb);
        match (vals[i - 1], vals[i + 1], w.eval(sm.exp())) {
            (Some(a), Some(b), Ok(m)) => {
                if m > 0.5 * (a + b) + slack(m) {
                    convex.push((sm.exp(), m - 0.5 * (a + b)));
                }
            }
            _ => mid_missing = true,
        }
    }
    for i in 1..ts.len() {
        let (a, b) = (ts[i - 1], ts[i]);
        let m = 0.5 * (a + b);
        match (vals[i - 1], vals[i], w.eval(m)) {
            (Some(fa), Some(fb), Ok(fm)) => {
                if fm < 0.5 * (fa + fb) - slack(fm) {
                    concave.push((m, fm - 0.5 * (fa + fb)));
                }
            }
            _ => mid_missing = true,
        }
    }

    Ok(AxiomReport {
        grid: *grid,
        increasing,
        moderate_growth,
        log_small,
        phi_convex: verdict_from(convex, mid_missing, *grid),
        concave: verdict_from(concave, mid_missing, *grid),
    })
}
