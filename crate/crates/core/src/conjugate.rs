//! Young conjugates `φ*(y) = sup_{s≥0} (sy − φ(s))` of `φ = ω∘exp` and the
//! weight matrices `W^x_k = exp(φ*(kx)/x)` built from them.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{fmt_sig, golden_max, linspace};
use crate::weights::Weight;

/// Coarse scan resolution on `[lo, hi]` before the golden-section polish.
const COARSE: usize = 64;
const GOLDEN_TOL: f64 = 1e-10;
pub const INITIAL_S_MAX: f64 = 64.0;
/// Hard stop for the doubling search of `s_max`.
const S_MAX_LIMIT: f64 = 65536.0;

/// Scalar function handle used as `φ`.
pub type Phi<'a> = dyn Fn(f64) -> f64 + Sync + 'a;

/// Value and maximizer of `sup_{s∈[lo,hi]} (sy − f(s))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupPoint {
    pub value: f64,
    pub argmax: f64,
}

/// Maximizes `sy − f(s)` over `[lo, hi]` by a coarse scan and a golden-section
/// polish around the best scan point. Ties keep the smallest `s`.
pub fn sup_affine(f: &Phi<'_>, y: f64, lo: f64, hi: f64) -> SupPoint {
    let obj = |s: f64| {
        let v = s * y - f(s);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let grid = linspace(lo, hi, COARSE + 1);
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    let values: Vec<f64> = grid.iter().map(|&s| obj(s)).collect();
    for (i, &v) in values.iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    let mut point = SupPoint { value: best_v, argmax: grid[best] };
    if best_v == f64::NEG_INFINITY {
        return point;
    }
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(COARSE)];
    let (s, v) = golden_max(obj, a, b, GOLDEN_TOL);
    if v > point.value {
        point = SupPoint { value: v, argmax: s };
    }
    point
}

/// One value of `φ*` with the search interval that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugatePoint {
    pub value: f64,
    pub argmax: f64,
    pub s_max: f64,
    /// The search stopped at the end of the domain of `φ`.
    pub truncated: bool,
}

fn at_boundary(argmax: f64, s_max: f64) -> bool {
    argmax >= s_max * (1.0 - 1e-9)
}

/// `φ*(y)` with `s_max` doubled from `s_max0` until the maximizer is interior.
/// `s_cap` bounds the domain of `φ`; reaching it sets the truncated flag
/// instead of failing.
pub fn conjugate_point(phi: &Phi<'_>, y: f64, s_max0: f64, s_cap: f64) -> Result<ConjugatePoint> {
    if !(s_max0 > 0.0) {
        return Err(Error::Argument(format!("s_max must be positive, got {s_max0}")));
    }
    let mut s_max = s_max0.min(s_cap);
    loop {
        let p = sup_affine(phi, y, 0.0, s_max);
        if !p.value.is_finite() {
            return Err(Error::ArgmaxAtBoundary { y, s_max });
        }
        if !at_boundary(p.argmax, s_max) {
            return Ok(ConjugatePoint { value: p.value, argmax: p.argmax, s_max, truncated: false });
        }
        if s_max >= s_cap {
            return Ok(ConjugatePoint { value: p.value, argmax: p.argmax, s_max, truncated: true });
        }
        if s_max >= S_MAX_LIMIT {
            return Err(Error::ArgmaxAtBoundary { y, s_max });
        }
        s_max = (2.0 * s_max).min(s_cap);
    }
}

/// Samples of `φ*` on an increasing grid, interpolated piecewise linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateTable {
    pub y_grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Maximizers `s*(y)`; these sample the derivative of `φ*`.
    pub argmax: Vec<f64>,
    pub s_max: f64,
    pub truncated: bool,
}

impl ConjugateTable {
    /// The coarse scan points, on which Fenchel–Young holds exactly.
    pub fn s_grid(&self) -> Vec<f64> {
        linspace(0.0, self.s_max, COARSE + 1)
    }

    pub fn eval(&self, y: f64) -> Result<f64> {
        interpolate(&self.y_grid, &self.values, y)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,value,log_value\n");
        for (y, v) in self.y_grid.iter().zip(&self.values) {
            out.push_str(&format!("{},{},{}\n", fmt_sig(*y, 17), fmt_sig(*v, 17), fmt_sig(v.ln(), 17)));
        }
        out
    }
}

pub(crate) fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Result<f64> {
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    if !(x >= lo && x <= hi) {
        return Err(Error::Range { t: x, lo, hi });
    }
    let i = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    if x1 == x0 {
        return Ok(ys[i]);
    }
    let w = (x - x0) / (x1 - x0);
    Ok(ys[i - 1] + w * (ys[i] - ys[i - 1]))
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid[0] < 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("grid must be nonempty, nonnegative and increasing".into()));
    }
    Ok(())
}

/// `φ*` on `y_grid`, searching `s ∈ [0, s_max]` (doubled as needed).
pub fn young_conjugate(phi: &Phi<'_>, y_grid: &[f64], s_max: f64) -> Result<ConjugateTable> {
    young_conjugate_capped(phi, y_grid, s_max, f64::INFINITY)
}

/// As [`young_conjugate`] for a `φ` defined only on `[0, s_cap]`.
pub fn young_conjugate_capped(
    phi: &Phi<'_>,
    y_grid: &[f64],
    s_max: f64,
    s_cap: f64,
) -> Result<ConjugateTable> {
    check_grid(y_grid)?;
    let top = conjugate_point(phi, *y_grid.last().unwrap(), s_max, s_cap)?;
    let s_max = top.s_max;
    let points: Vec<SupPoint> = y_grid.par_iter().map(|&y| sup_affine(phi, y, 0.0, s_max)).collect();
    Ok(ConjugateTable {
        y_grid: y_grid.to_vec(),
        values: points.iter().map(|p| p.value).collect(),
        argmax: points.iter().map(|p| p.argmax).collect(),
        s_max,
        truncated: top.truncated,
    })
}

/// `φ**` on `s_grid`, with the outer supremum taken over `y ∈ [0, max y_grid]`
/// and `φ*` evaluated pointwise.
pub fn double_conjugate(
    phi: &Phi<'_>,
    s_grid: &[f64],
    y_grid: &[f64],
    s_max: f64,
) -> Result<ConjugateTable> {
    check_grid(s_grid)?;
    check_grid(y_grid)?;
    let y_top = *y_grid.last().unwrap();
    let inner_s_max = conjugate_point(phi, y_top, s_max, f64::INFINITY)?.s_max;
    let star = |y: f64| sup_affine(phi, y, 0.0, inner_s_max).value;
    let points: Vec<SupPoint> = s_grid.par_iter().map(|&s| sup_affine(&star, s, 0.0, y_top)).collect();
    Ok(ConjugateTable {
        y_grid: s_grid.to_vec(),
        values: points.iter().map(|p| p.value).collect(),
        argmax: points.iter().map(|p| p.argmax).collect(),
        s_max: y_top,
        truncated: false,
    })
}

/// `ω` with the normalization `ω = 0` on `[0, 1]`.
pub struct Truncated<'a>(pub &'a dyn Weight);

impl Weight for Truncated<'_> {
    fn eval(&self, t: f64) -> Result<f64> {
        if (0.0..=1.0).contains(&t) {
            Ok(0.0)
        } else {
            self.0.eval(t)
        }
    }
    fn domain_max(&self) -> f64 {
        self.0.domain_max()
    }
    fn label(&self) -> String {
        self.0.label()
    }
}

/// `φ = ω∘exp`, with evaluation failures mapped to `+∞`.
pub fn phi_of<'a>(w: &'a dyn Weight) -> impl Fn(f64) -> f64 + Sync + 'a {
    move |s: f64| w.eval(s.exp()).unwrap_or(f64::INFINITY)
}

/// Largest `s` with `e^s` in the domain of `w`.
pub fn s_cap_of(w: &dyn Weight) -> f64 {
    let m = w.domain_max();
    if m.is_finite() {
        m.ln()
    } else {
        f64::INFINITY
    }
}

/// `φ*(y)` for `φ = ω∘exp` of the normalized weight.
pub fn weight_conjugate(w: &dyn Weight, y: f64) -> Result<ConjugatePoint> {
    let t = Truncated(w);
    let phi = phi_of(&t);
    conjugate_point(&phi, y, INITIAL_S_MAX, s_cap_of(w))
}

/// `W^x_0, …, W^x_{k_max}` stored as logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub x: f64,
    pub log_entries: Vec<f64>,
    /// Entries whose exponential overflows `f64`.
    pub overflow: Vec<bool>,
}

impl WeightMatrix {
    pub fn entry(&self, k: usize) -> f64 {
        self.log_entries[k].exp()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,value,log_value\n");
        for (k, l) in self.log_entries.iter().enumerate() {
            out.push_str(&format!("{k},{},{}\n", fmt_sig(l.exp(), 17), fmt_sig(*l, 17)));
        }
        out
    }
}

/// `log W^x_k = φ*(kx)/x` for `k = 0..=k_max`, using the truncated weight.
pub fn weight_matrix(w: &dyn Weight, x: f64, k_max: usize) -> Result<WeightMatrix> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Argument(format!("x must be positive, got {x}")));
    }
    let log_entries = (0..=k_max)
        .into_par_iter()
        .map(|k| weight_conjugate(w, k as f64 * x).map(|p| p.value / x))
        .collect::<Result<Vec<f64>>>()?;
    let overflow = log_entries.iter().map(|l| *l > f64::MAX.ln()).collect();
    Ok(WeightMatrix { x, log_entries, overflow })
}

/// `log(a^k W^x_k / W^{Hx}_k)` for `k = 0..=k_max`.
pub fn ratio_profile(w: &dyn Weight, a: f64, x: f64, h: f64, k_max: usize) -> Result<Vec<f64>> {
    let small = weight_matrix(w, x, k_max)?;
    let large = weight_matrix(w, h * x, k_max)?;
    Ok((0..=k_max)
        .map(|k| k as f64 * a.ln() + small.log_entries[k] - large.log_entries[k])
        .collect())
}

/// Outcome of the matrix growth search.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixGrowth {
    Holds { h: f64, c: f64, profile: Vec<f64> },
    /// No candidate up to `h_max` was stable; `profile` is the log-ratio
    /// profile at `h_max`.
    Fails { h_max: f64, profile: Vec<f64> },
}

/// A log-ratio profile is bounded when its last third does not exceed the
/// maximum of the earlier entries.
fn profile_bounded(profile: &[f64]) -> bool {
    let cut = (2 * profile.len()).div_ceil(3).max(1);
    let earlier = profile[..cut].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let late = profile[cut..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    profile.iter().all(|v| v.is_finite()) && late <= earlier + 1e-8 * (1.0 + earlier.abs())
}

/// Smallest `H` on a geometric grid in `[a, 16·a]` with `a^k W^x_k ≤ C W^{Hx}_k`
/// bounded in `k ≤ k_max`.
pub fn check_matrix_growth(w: &dyn Weight, a: f64, x: f64, k_max: usize) -> Result<MatrixGrowth> {
    if !(a >= 1.0 && a.is_finite()) {
        return Err(Error::Argument(format!("a must be at least 1, got {a}")));
    }
    if k_max < 3 {
        return Err(Error::Argument("k_max must be at least 3".into()));
    }
    const STEPS: usize = 32;
    let h_max = 16.0 * a;
    let mut last = Vec::new();
    for i in 0..=STEPS {
        let h = if i == STEPS { h_max } else { a * 16f64.powf(i as f64 / STEPS as f64) };
        let profile = ratio_profile(w, a, x, h, k_max)?;
        if profile_bounded(&profile) {
            let c = profile.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
            return Ok(MatrixGrowth::Holds { h, c, profile });
        }
        last = profile;
    }
    Ok(MatrixGrowth::Fails { h_max, profile: last })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{catalog, WeightFunction};
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn half_square(s: f64) -> f64 {
        0.5 * s * s
    }

    fn hinge(s: f64) -> f64 {
        (2.0 * (s - 1.0)).max(0.0)
    }

    #[test]
    fn conjugate_examples() {
        let t = young_conjugate(&half_square, &[0.0, 1.5], 64.0).unwrap();
        assert!((t.values[1] - 1.125).abs() < 1e-12);
        assert_eq!(t.values[0], 0.0);

        let t = young_conjugate(&hinge, &[0.0, 1.0, 2.0], 64.0).unwrap();
        assert!((t.values[1] - 1.0).abs() < 1e-12);
        assert!((t.values[2] - 2.0).abs() < 1e-12);
        assert_eq!(t.values[0], 0.0);
    }

    #[test]
    fn linear_growth_hits_boundary() {
        match young_conjugate(&hinge, &[3.0], 64.0) {
            Err(Error::ArgmaxAtBoundary { y, .. }) => assert_eq!(y, 3.0),
            other => panic!("expected boundary error, got {other:?}"),
        }
    }

    #[test]
    fn s_max_doubles_when_needed() {
        let t = young_conjugate(&half_square, &[100.0], 64.0).unwrap();
        assert_eq!(t.s_max, 128.0);
        assert!((t.values[0] - 5000.0).abs() < 1e-8);
    }

    #[test]
    fn capped_search_sets_truncated_flag() {
        let t = young_conjugate_capped(&half_square, &[10.0], 64.0, 5.0).unwrap();
        assert!(t.truncated);
        assert!((t.values[0] - (50.0 - 12.5)).abs() < 1e-12);
    }

    #[test]
    fn double_conjugate_examples() {
        let s = linspace(0.0, 5.0, 101);
        let y = linspace(0.0, 10.0, 11);
        let dd = double_conjugate(&half_square, &s, &y, 64.0).unwrap();
        for (si, v) in s.iter().zip(&dd.values) {
            assert!((v - half_square(*si)).abs() < 1e-6);
        }

        let y = linspace(0.0, 2.0, 11);
        let dd = double_conjugate(&hinge, &s, &y, 64.0).unwrap();
        for (si, v) in s.iter().zip(&dd.values) {
            assert!((v - hinge(*si)).abs() < 1e-8, "{si}: {v}");
        }
    }

    #[test]
    fn biconjugate_is_convex_minorant() {
        let kinked = |s: f64| s.min(2.0 * s - 1.0);
        let s = linspace(0.0, 3.0, 61);
        let y = linspace(0.0, 1.0, 5);
        let dd = double_conjugate(&kinked, &s, &y, 64.0).unwrap();
        for (si, v) in s.iter().zip(&dd.values) {
            assert!(*v <= kinked(*si) + 1e-9);
        }
        // the convex envelope is s - 1
        for (si, v) in s.iter().zip(&dd.values) {
            assert!((v - (si - 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn shifted_linear_matrix() {
        let w = catalog::shifted_linear();
        let m = weight_matrix(&w, 1.0, 5).unwrap();
        assert!((m.entry(0) - 1.0).abs() < 1e-12);
        assert!((m.entry(1) - 1.0).abs() < 1e-12);
        assert!((m.entry(2) - 4.0 / E).abs() < 1e-9);
        let w5 = (5.0 * 5f64.ln() - 4.0).exp();
        assert!((m.entry(5) - w5).abs() / w5 < 1e-9);
        assert!((w5 - 57.24).abs() < 0.01);
    }

    #[test]
    fn matrix_starts_at_one() {
        for w in [catalog::power(0.5), catalog::omega_alpha(2.0)] {
            for x in [0.5, 1.0, 3.0] {
                let m = weight_matrix(&w, x, 3).unwrap();
                assert_eq!(m.log_entries[0], 0.0);
            }
        }
    }

    #[test]
    fn overflow_flagged() {
        let w = catalog::power(0.5);
        let m = weight_matrix(&w, 1.0, 120).unwrap();
        assert!(m.overflow[120]);
        assert!(m.log_entries[120].is_finite());
    }

    #[test]
    fn matrix_growth_examples() {
        let w = catalog::shifted_linear();
        match check_matrix_growth(&w, 2.0, 1.0, 12).unwrap() {
            MatrixGrowth::Holds { h, c, .. } => {
                assert_eq!(h, 2.0);
                assert!(c <= 0.5f64.exp() + 1e-9);
                assert!((c - 0.5f64.exp()).abs() < 1e-8);
            }
            other => panic!("{other:?}"),
        }
        match check_matrix_growth(&w, 1.0, 1.0, 12).unwrap() {
            MatrixGrowth::Holds { h, c, .. } => {
                assert_eq!(h, 1.0);
                assert!((c - 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let forced = ratio_profile(&w, 2.0, 1.0, 1.5, 12).unwrap();
        assert!(!profile_bounded(&forced));
        let slope = (4.0f64 / 3.0).ln();
        assert!((forced[12] - forced[11] - slope).abs() < 1e-8);
    }

    #[test]
    fn csv_layout() {
        let w = WeightFunction::parse("max(0, t-1)").unwrap();
        let m = weight_matrix(&w, 1.0, 2).unwrap();
        let csv = m.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "index,value,log_value");
        assert_eq!(lines[1], "0,1,0");
        assert!(!csv.contains('\r'));
    }

    proptest! {
        #[test]
        fn fenchel_young_on_samples(c in 0.5f64..4.0, p in 1.5f64..4.0, ys in prop::collection::vec(0.0f64..20.0, 1..8)) {
            let phi = move |s: f64| c * s.powf(p);
            let mut ys = ys;
            ys.sort_by(|a, b| a.total_cmp(b));
            ys.dedup();
            let table = young_conjugate(&phi, &ys, 64.0).unwrap();
            for s in table.s_grid() {
                for (y, v) in ys.iter().zip(&table.values) {
                    prop_assert!(s * y <= phi(s) + v);
                }
            }
        }

        #[test]
        fn conjugate_is_monotone_and_convex(c in 0.5f64..4.0, p in 1.5f64..4.0) {
            let phi = move |s: f64| c * s.powf(p);
            let ys = linspace(0.0, 10.0, 41);
            let t = young_conjugate(&phi, &ys, 64.0).unwrap();
            for w in t.values.windows(3) {
                prop_assert!(w[1] >= w[0] - 1e-12);
                prop_assert!(w[1] <= 0.5 * (w[0] + w[2]) + 1e-9 * (1.0 + w[1].abs()));
            }
        }

        #[test]
        fn conjugation_reverses_order(c in 0.2f64..2.0, d in 0.0f64..2.0) {
            let small = move |s: f64| c * s * s;
            let large = move |s: f64| (c + d) * s * s + d * s;
            let ys = linspace(0.0, 10.0, 21);
            let a = young_conjugate(&small, &ys, 64.0).unwrap();
            let b = young_conjugate(&large, &ys, 64.0).unwrap();
            for (u, v) in a.values.iter().zip(&b.values) {
                prop_assert!(*u >= v - 1e-9);
            }
        }

        #[test]
        fn involution_on_power_family(c in 0.2f64..2.0, p in 1.5f64..3.0) {
            let phi = move |s: f64| c * s.powf(p);
            let s = linspace(0.0, 4.0, 41);
            let y_top = c * p * 4f64.powf(p - 1.0) * 1.5;
            let y = linspace(0.0, y_top, 5);
            let dd = double_conjugate(&phi, &s, &y, 64.0).unwrap();
            let scale = 1.0 + s.iter().map(|&v| phi(v).abs()).fold(0.0, f64::max);
            for (si, v) in s.iter().zip(&dd.values) {
                prop_assert!((v - phi(*si)).abs() <= 1e-6 * scale);
            }
        }

        #[test]
        fn matrix_is_log_convex(x in 0.3f64..3.0) {
            let w = catalog::power(0.5);
            let m = weight_matrix(&w, x, 12).unwrap();
            for l in m.log_entries.windows(3) {
                prop_assert!(l[1] <= 0.5 * (l[0] + l[2]) + 1e-9 * (1.0 + l[1].abs()));
            }
        }
    }
}
