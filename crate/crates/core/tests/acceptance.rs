//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints its own PASS/FAIL line; exits nonzero if any fails.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{rel_close, OracleJet};
use ultradiff::conditions::{
    check_discrete_condition, check_nonquasianalytic, check_r_strong, growth_index, growth_index_grid, kappa,
    DiscreteSearch, GrowthIndex, IntegralOutcome,
};
use ultradiff::conjugate::{double_conjugate, phi_of, weight_conjugate, weight_matrix, Truncated};
use ultradiff::jets::{
    beurling_seminorms, beurling_to_roumieu_pipeline, jet_growth_profile, ConvexProfile, Jet, MultiIndex,
    PipelineConfig,
};
use ultradiff::numeric::{adaptive_simpson, linspace};
use ultradiff::reduction::{build_reduction, validate_reduction, DiscreteConstants, ReductionInput};
use ultradiff::weights::catalog;
use ultradiff::{Error, GeometricGrid, Weight};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let spent = start.elapsed();
    ensure(spent < limit, || format!("took {spent:?}, limit {limit:?}"))
}

fn log_weight_identity() -> Outcome {
    let start = Instant::now();
    let t = 30f64.exp();
    let mut parts = Vec::new();
    for alpha in [2.0, 3.0] {
        let k = match kappa(&catalog::omega_alpha(alpha), t, 1e-8).map_err(|e| e.to_string())? {
            IntegralOutcome::Converged { value, .. } => value,
            other => return Err(format!("alpha {alpha}: {other:?}")),
        };
        let lower = catalog::omega_alpha(alpha - 1.0).eval(t).map_err(|e| e.to_string())?;
        let dev = ((alpha - 1.0) * k / lower - 1.0).abs();
        ensure(dev <= 0.05, || format!("alpha {alpha}: deviation {dev}"))?;
        parts.push(format!("alpha {alpha}: deviation {dev:.2e}"));
    }
    within(start, Duration::from_secs(5))?;
    Ok(parts.join("; "))
}

fn strong_not_r_strong() -> Outcome {
    let (w2, w1) = (catalog::omega_alpha(2.0), catalog::omega_alpha(1.0));
    let grid = GeometricGrid::default();
    let one = check_r_strong(&w2, &w1, 1.0, &grid, 1e-8).map_err(|e| e.to_string())?;
    ensure(one.verdict.holds(), || format!("r = 1 verdict {}", one.verdict))?;
    let r09 = check_r_strong(&w2, &w1, 0.9, &grid, 1e-8).map_err(|e| e.to_string())?;
    ensure(!r09.verdict.holds() && r09.verdict == ultradiff::Verdict::Fails, || format!("r = 0.9 verdict {}", r09.verdict))?;
    let values: Vec<f64> = r09.witnesses.iter().map(|w| w.value).collect();
    ensure(values.len() >= 2 && values.windows(2).all(|p| p[1] > p[0]), || format!("witnesses not monotone: {values:?}"))?;
    let disc = check_discrete_condition(&w2, &w1, &DiscreteSearch::default()).map_err(|e| e.to_string())?;
    ensure(disc.verdict == ultradiff::Verdict::Fails, || format!("discrete verdict {}", disc.verdict))?;
    Ok(format!("r = 1 holds; r = 0.9 fails with {} increasing witnesses; discrete fails", values.len()))
}

fn growth_indices() -> Outcome {
    let cases = [
        (catalog::power(0.5), catalog::power(0.5), 1.9, 2.1),
        (catalog::power(1.0 / 3.0), catalog::power(1.0 / 3.0), 2.85, 3.15),
        (catalog::omega_alpha(1.0), catalog::omega_alpha(2.0), 0.95, 1.05),
    ];
    let mut parts = Vec::new();
    for (sigma, w, lo, hi) in cases {
        let start = Instant::now();
        let g = growth_index(&sigma, &w, 0.02, &growth_index_grid()).map_err(|e| e.to_string())?;
        let GrowthIndex::Estimate { gamma, .. } = g else { return Err(format!("{}: {g:?}", sigma.name)) };
        ensure((lo..=hi).contains(&gamma), || format!("gamma({}, {}) = {gamma}", sigma.name, w.name))?;
        within(start, Duration::from_secs(10))?;
        parts.push(format!("{gamma:.4}"));
    }
    Ok(format!("gamma = {}", parts.join(", ")))
}

fn young_conjugation() -> Outcome {
    let half = |s: f64| 0.5 * s * s;
    let hinge = |s: f64| (2.0 * (s - 1.0)).max(0.0);
    let lin = catalog::shifted_linear();
    let tr = Truncated(&lin);
    let shifted = phi_of(&tr);
    let s = linspace(0.0, 3.0, 61);
    let cases: [(&str, &ultradiff::conjugate::Phi<'_>, f64); 3] =
        [("s^2/2", &half, 4.5), ("max(0,2(s-1))", &hinge, 2.0), ("max(0,t-1) o exp", &shifted, 3f64.exp() * 1.5)];
    let mut worst: f64 = 0.0;
    for (name, phi, y_top) in cases {
        let y = linspace(0.0, y_top, 7);
        let dd = double_conjugate(phi, &s, &y, 64.0).map_err(|e| e.to_string())?;
        let scale = 1.0 + s.iter().map(|&v| phi(v).abs()).fold(0.0, f64::max);
        let err = s.iter().zip(&dd.values).map(|(&si, v)| (v - phi(si)).abs()).fold(0.0, f64::max);
        ensure(err <= 1e-6 * scale, || format!("{name}: involution error {err}"))?;
        worst = worst.max(err / scale);
    }
    let w12 = weight_matrix(&lin, 1.0, 2).map_err(|e| e.to_string())?.entry(2);
    let target = 4.0 / std::f64::consts::E;
    ensure(rel_close(w12, target, 1e-6), || format!("W^1_2 = {w12}"))?;
    Ok(format!("worst involution error {worst:.2e}; W^1_2 = {w12:.9}"))
}

fn sqrt_constants() -> Result<DiscreteConstants, String> {
    let s = catalog::power(0.5);
    let pv = check_discrete_condition(&s, &s, &DiscreteSearch::default()).map_err(|e| e.to_string())?;
    DiscreteConstants::from_verdict(&pv).ok_or_else(|| "no discrete constants for t^0.5".to_string())
}

fn reduction_input(n_max: usize, nq: bool) -> Result<ReductionInput, String> {
    Ok(ReductionInput {
        w: Arc::new(catalog::power(0.5)),
        sigma: Arc::new(catalog::power(0.5)),
        f: Arc::new(catalog::power(0.75)),
        constants: sqrt_constants()?,
        n_max,
        enforce_nq: nq,
    })
}

fn reduction_run() -> Outcome {
    let start = Instant::now();
    let input = reduction_input(8, false)?;
    let (h, k) = (input.constants.h, input.constants.k);
    let res = build_reduction(input).map_err(|e| e.to_string())?;
    for n in 2..=8 {
        let ratio = res.y[n - 1] / res.x[n - 1];
        let expected = (n as f64 / (n as f64 - 1.0)).powi(2);
        ensure(rel_close(ratio, expected, 1e-6), || format!("y_{n}/x_{n} = {ratio}"))?;
    }
    let z2 = res.z[1] / res.x[1];
    ensure(rel_close(z2, 2.25, 1e-6), || format!("z_2/x_2 = {z2}"))?;
    let v = validate_reduction(&res, 32).map_err(|e| e.to_string())?;
    for name in [
        "omega~ >= (n-2) omega",
        "omega~ <= n omega",
        "sigma~ >= (n-2) sigma",
        "sigma~ <= n sigma",
        "omega~ concave",
        "sigma~ <= f/n",
        "sigma~ <= t/n",
    ] {
        let c = v.claim(name).ok_or_else(|| format!("claim {name} missing"))?;
        ensure(c.holds, || format!("claim {name} fails: margin {}", c.min_margin))?;
    }
    ensure(v.continuity_y <= 1e-9, || format!("jump at y_n {}", v.continuity_y))?;
    let rc = v.recertification.as_ref().ok_or("no recertification")?;
    ensure(rc.verdict.holds(), || format!("recertification {}", rc.verdict))?;
    let h_new = rc.constants.and_then(|c| c.h).ok_or("recertification without H")?;
    ensure(h < h_new && h_new < k, || format!("H~ = {h_new} outside ({h}, {k})"))?;
    within(start, Duration::from_secs(10))?;
    Ok(format!("all claims hold; H~ = {h_new:.6} in ({h:.6}, {k})"))
}

fn nq_variant() -> Outcome {
    let res = build_reduction(reduction_input(8, true)?).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for n in 2..=res.n_max() {
        let x = res.x[n - 1];
        // t = x/u^2 maps the tail of sqrt(t)/(1+t^2) onto a smooth integrand
        // on (0, 1] bounded by 2/sqrt(x)
        let f = |u: f64| 2.0 * x.powf(1.5) / (u.powi(4) + x * x);
        let eps = 1e-9;
        let tail = adaptive_simpson(&f, eps, 1.0, 1e-12) + eps * 2.0 / x.sqrt();
        let bound = (n as f64).powi(-3);
        ensure(tail <= bound, || format!("n = {n}: tail {tail} > {bound}"))?;
        worst = worst.max(tail / bound);
    }
    Ok(format!("largest tail / bound ratio {worst:.4}"))
}

fn jet_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let w = catalog::shifted_linear();
    for case in 0..50 {
        let oj = OracleJet::random(&mut rng);
        let jet = oj.to_jet();
        let n = oj.points.len();
        for x in 0..n {
            for y in 0..n {
                for p in 0..=oj.pcap {
                    for a in 0..=p {
                        let got = jet.remainder(x, y, &MultiIndex(vec![a]), p).map_err(|e| e.to_string())?;
                        let want = oj.remainder(x, y, a, p);
                        ensure(got.to_bits() == want.to_bits(), || format!("case {case}: R({x},{y},{a},{p}) {got} vs {want}"))?;
                    }
                }
            }
        }
        let profile = jet_growth_profile(&jet, oj.pcap, false).map_err(|e| e.to_string())?;
        let m = 1 + case % 3;
        let logw: Vec<f64> =
            (0..=oj.pcap + 1).map(|k| m as f64 * weight_conjugate(&w, k as f64 / m as f64).unwrap().value).collect();
        let want = oj.sups(&logw, oj.pcap);
        ensure(profile.a == want.a, || format!("case {case}: a_k differ"))?;
        ensure(profile.b == want.b, || format!("case {case}: b_k differ {:?} vs {:?}", profile.b, want.b))?;
        let sups = beurling_seminorms(&jet, &w, m as u32, oj.pcap).map_err(|e| e.to_string())?;
        ensure(rel_close(sups.norm, want.norm, 1e-12), || format!("case {case}: norm {} vs {}", sups.norm, want.norm))?;
        ensure(rel_close(sups.seminorm, want.seminorm, 1e-12), || {
            format!("case {case}: seminorm {} vs {}", sups.seminorm, want.seminorm)
        })?;
    }
    Ok("50 random jets agree with exhaustive enumeration".into())
}

fn polynomial_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    use rand::Rng;
    let mut checked = 0usize;
    for dim in 1..=2usize {
        for d in 0..=4u32 {
            for _ in 0..4 {
                let mut terms = Vec::new();
                for alpha in ultradiff::jets::graded_indices(dim, d) {
                    let c: i32 = rng.gen_range(-5..=5);
                    terms.push((c as f64, alpha));
                }
                let top: Vec<u32> = (0..dim).map(|i| if i == 0 { d } else { 0 }).collect();
                terms.push((1.0, MultiIndex(top)));
                let mut points: Vec<Vec<f64>> = Vec::new();
                while points.len() < 3 {
                    let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-8i32..=8) as f64 / 4.0).collect();
                    if !points.contains(&p) {
                        points.push(p);
                    }
                }
                let pcap = d + 2;
                let jet = Jet::polynomial(dim, points, pcap, &terms).map_err(|e| e.to_string())?;
                for p in d..=pcap {
                    for alpha in jet.indices().iter().filter(|a| a.order() <= p) {
                        for x in 0..3 {
                            for y in 0..3 {
                                let r = jet.remainder(x, y, alpha, p).map_err(|e| e.to_string())?;
                                ensure(r == 0.0, || format!("dim {dim}, d {d}: R = {r} at p {p}, alpha {alpha}"))?;
                                checked += 1;
                            }
                        }
                    }
                }
                let sups = beurling_seminorms(&jet, &catalog::shifted_linear(), 1, pcap).map_err(|e| e.to_string())?;
                ensure(sups.seminorm_by_order[d as usize..].iter().all(|v| *v == 0.0), || {
                    format!("dim {dim}, d {d}: seminorm contributions {:?}", sups.seminorm_by_order)
                })?;
            }
        }
    }
    Ok(format!("{checked} remainders are exactly zero"))
}

fn pipeline() -> Outcome {
    let start = Instant::now();
    let s = catalog::power(0.5);
    let cfg = PipelineConfig::default();
    let jet = Jet::from_fn(1, vec![vec![0.0], vec![0.5], vec![1.0]], 30, |x, _| x[0].exp()).map_err(|e| e.to_string())?;
    let rep = beurling_to_roumieu_pipeline(&jet, &s, &s, &cfg).map_err(|e| e.to_string())?;
    ensure(rep.passed(), || "a stage failed".into())?;
    let h = &rep.interpolant;
    for &t in &h.grid {
        let v = h.value(t);
        ensure(h.lower_envelope(t) <= v + 1e-9 && v <= h.upper_envelope(t) + 1e-9, || format!("sandwich fails at {t}"))?;
    }
    ensure(rep.majorant_verdict.verdict.holds(), || "sigma = o(f) does not hold".into())?;
    ensure(rep.validation.all_hold(), || "reduction validation fails".into())?;
    ensure(rep.final_check.len() == 31 && rep.final_check.iter().all(|(_, g, b)| g <= b), || "g <= psi~* + B fails".into())?;
    ensure(rep.membership_sigma.x.is_some(), || rep.membership_sigma.message())?;

    let bad = Jet::from_fn(1, vec![vec![0.0]], 12, |_, a| ((a.order() * a.order()) as f64).exp()).map_err(|e| e.to_string())?;
    let witness = match beurling_to_roumieu_pipeline(&bad, &s, &s, &cfg) {
        Err(Error::Stage { stage, witness }) if stage == "fit" && witness.contains("at j = ") => witness,
        other => return Err(format!("adversarial jet: {other:?}")),
    };
    within(start, Duration::from_secs(30))?;
    Ok(format!("all 8 stages pass; B = {:.6}; adversarial jet: {witness}", rep.b))
}

fn nonquasianalytic_battery() -> Outcome {
    let sqrt = check_nonquasianalytic(&catalog::power(0.5), 1e-8).map_err(|e| e.to_string())?;
    let value = sqrt.detail("value").ok_or("no integral value")?;
    ensure(sqrt.verdict.holds() && (value - 2.0).abs() <= 1e-4, || format!("t^0.5: {} {value}", sqrt.verdict))?;
    let lin = check_nonquasianalytic(&catalog::power(1.0), 1e-8).map_err(|e| e.to_string())?;
    ensure(lin.verdict == ultradiff::Verdict::Fails, || format!("t: {}", lin.verdict))?;
    for (alpha, converges) in [(0.5, false), (1.5, true), (2.0, true)] {
        let pv = check_nonquasianalytic(&catalog::omega_alpha(alpha), 1e-8).map_err(|e| e.to_string())?;
        let ok = if converges { pv.verdict.holds() } else { pv.verdict == ultradiff::Verdict::Fails };
        ensure(ok, || format!("omega_{alpha}: {}", pv.verdict))?;
    }
    Ok(format!("t^0.5 integral {value:.8}; t, omega_0.5 diverge; omega_1.5, omega_2 converge"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("log-weight kappa identity", log_weight_identity),
        ("strong but not r-strong", strong_not_r_strong),
        ("growth indices", growth_indices),
        ("Young conjugation", young_conjugation),
        ("reduction run", reduction_run),
        ("non-quasianalytic tails of x_n", nq_variant),
        ("jet oracle equivalence", jet_oracle),
        ("polynomial exactness", polynomial_exactness),
        ("pipeline end to end", pipeline),
        ("non-quasianalyticity battery", nonquasianalytic_battery),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name} ({secs:.2}s): {detail}", i + 1),
            Err(why) => {
                failures += 1;
                println!("criterion {:>2} FAIL {name} ({secs:.2}s): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
