//! Grids, one-dimensional root finding, golden-section maximization and
//! adaptive Simpson quadrature.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Geometric grid `lo, lo·q, …, hi` with `count` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricGrid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GeometricGrid {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self, Error> {
        if !(lo > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) || count < 2 {
            return Err(Error::Argument(format!(
                "grid needs 0 < lo < hi and at least 2 points, got {lo}:{hi}:{count}"
            )));
        }
        Ok(GeometricGrid { lo, hi, count })
    }

    pub fn points(&self) -> Vec<f64> {
        let (a, b) = (self.lo.ln(), self.hi.ln());
        let n = self.count - 1;
        (0..self.count)
            .map(|i| {
                if i == 0 {
                    self.lo
                } else if i == n {
                    self.hi
                } else {
                    (a + (b - a) * i as f64 / n as f64).exp()
                }
            })
            .collect()
    }

    /// Indices of points in the last decade `[hi/10, hi]` (at least two points).
    pub fn last_decade_start(&self) -> usize {
        let pts = self.points();
        let cut = self.hi / 10.0;
        let idx = pts.iter().position(|&t| t >= cut).unwrap_or(0);
        idx.min(self.count.saturating_sub(2))
    }
}

impl Default for GeometricGrid {
    fn default() -> Self {
        GeometricGrid { lo: 10.0, hi: 1e12, count: 200 }
    }
}

impl fmt::Display for GeometricGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", fmt_sig(self.lo, 12), fmt_sig(self.hi, 12), self.count)
    }
}

impl FromStr for GeometricGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Argument(format!("grid must look like LO:HI:N, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        GeometricGrid::new(lo, hi, n)
    }
}

/// `n` equally spaced points on `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
        .collect()
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
///
/// Stops when the bracket is narrower than `rel_tol·|hi|` (or after 200
/// halvings). Returns the endpoint on the `f(hi)` side, so the returned point
/// satisfies the same sign condition as `hi`.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> Result<f64, Error>
where
    F: FnMut(f64) -> f64,
{
    let flo = f(lo);
    let fhi = f(hi);
    if flo.is_nan() || fhi.is_nan() {
        return Err(Error::Construction(format!("bisection endpoint is NaN on [{lo}, {hi}]")));
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Construction(format!("no sign change on [{lo}, {hi}]")));
    }
    let lo_sign = flo.signum();
    for _ in 0..200 {
        if (hi - lo).abs() <= rel_tol * hi.abs().max(lo.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        let fm = f(mid);
        if fm.is_nan() {
            return Err(Error::Construction(format!("NaN at {mid} during bisection")));
        }
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
/// Returns `(argmax, max)`; the endpoints are compared as well.
pub fn golden_max<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (a0, b0) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [a0, b0] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Adaptive Simpson quadrature on a finite interval with relative tolerance.
///
/// The interval is first cut into 64 panels; the panel sum sets the scale for
/// the absolute tolerance handed to the recursive refinement.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64
where
    F: Fn(f64) -> f64 + ?Sized,
{
    if a == b {
        return 0.0;
    }
    const PANELS: usize = 64;
    let h = (b - a) / PANELS as f64;
    let mut panels = Vec::with_capacity(PANELS);
    let mut coarse = 0.0;
    for i in 0..PANELS {
        let x0 = a + h * i as f64;
        let x1 = if i == PANELS - 1 { b } else { x0 + h };
        let xm = 0.5 * (x0 + x1);
        let (f0, fm, f1) = (f(x0), f(xm), f(x1));
        let s = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        coarse += s.abs();
        panels.push((x0, x1, f0, fm, f1, s));
    }
    if !coarse.is_finite() {
        return f64::NAN;
    }
    let abs_tol = (rel_tol * coarse).max(1e-300);
    panels
        .into_iter()
        .map(|(x0, x1, f0, fm, f1, s)| {
            simpson_rec(f, x0, x1, f0, fm, f1, s, abs_tol / PANELS as f64, 48)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || !delta.is_finite() {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `∫_a^∞ f` for an integrand that eventually decays, integrating chunks of
/// doubling width until a chunk contributes less than `rel_tol` of the total.
/// Returns `None` when no such chunk is reached before `a + 2^40`.
pub fn integrate_semi_infinite<F>(f: &F, a: f64, rel_tol: f64) -> Option<f64>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let mut total = 0.0;
    let mut lo = a;
    let mut width = 1.0;
    for _ in 0..40 {
        let hi = lo + width;
        let chunk = adaptive_simpson(f, lo, hi, rel_tol * 0.1);
        if !chunk.is_finite() {
            return None;
        }
        total += chunk;
        if chunk.abs() <= rel_tol * 0.1 * total.abs() || (chunk == 0.0 && total != 0.0) {
            return Some(total);
        }
        lo = hi;
        width *= 2.0;
    }
    None
}

/// Formats like C's `%.{sig}g`: fixed notation for moderate exponents,
/// scientific otherwise, trailing zeros stripped.
pub fn fmt_sig(v: f64, sig: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", sig - 1, v);
    let (mantissa, exp) = sci.split_once('e').unwrap_or((sci.as_str(), "0"));
    let exp: i32 = exp.parse().unwrap_or(0);
    if exp < -5 || exp >= sig as i32 {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { "-" } else { "+" };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, v))
    }
}

fn strip_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}
