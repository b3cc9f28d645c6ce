//! The Beurling-to-Roumieu pipeline: jet growth profile, offsets, convex
//! interpolant, majorant `f`, reduction `(ω̃, σ̃)` and the final checks.

use std::sync::Arc;

use super::interpolant::{build_convex_interpolant, envelope_to_majorant, fit_offsets, ConvexProfile, PsiFamily, PsiStar};
use super::{jet_growth_profile, roumieu_membership, ConvexInterpolant, Jet, JetGrowthProfile, Membership, OffsetFit};
use crate::conditions::{check_discrete_condition, check_nonquasianalytic, DiscreteSearch, DEFAULT_TOL};
use crate::conjugate::{conjugate_point, phi_of, Truncated, INITIAL_S_MAX};
use crate::error::{Error, Result};
use crate::numeric::{fmt_sig, linspace, GeometricGrid};
use crate::reduction::{build_reduction, validate_reduction, DiscreteConstants, ReductionInput, ReductionResult, ValidationReport, Which};
use crate::weights::{asymptotic_verdict, check_weight_axioms, AsymptoticVerdict, FnWeight, Relation, Weight, WeightFunction};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub j_max: usize,
    /// Highest order used; clamped to the jet's `pcap`.
    pub p_max: u32,
    pub n_max: usize,
    /// Ratio `ρ` of the geometric floor `C_j ≥ ρ C_{j−1}` on the offsets.
    pub offset_growth: f64,
    /// Largest `t` at which the majorant `f` is tabulated.
    pub t_top: f64,
    pub verdict_grid: GeometricGrid,
    pub membership_grid: Vec<f64>,
    pub grid_per_segment: usize,
    pub search: DiscreteSearch,
    pub tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            j_max: 24,
            p_max: 30,
            n_max: 4,
            offset_growth: 2.0,
            t_top: 1e40,
            verdict_grid: GeometricGrid::default(),
            membership_grid: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            grid_per_segment: 32,
            search: DiscreteSearch::default(),
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub config: PipelineConfig,
    pub stages: Vec<StageOutcome>,
    pub constants: DiscreteConstants,
    pub profile: JetGrowthProfile,
    pub fit: OffsetFit,
    /// Offsets actually used for the interpolant.
    pub offsets: Vec<f64>,
    pub interpolant: Arc<ConvexInterpolant>,
    pub majorant_verdict: AsymptoticVerdict,
    pub reduction: ReductionResult,
    pub validation: ValidationReport,
    pub b: f64,
    /// `(k, g(k), ψ̃*(k) + B)`.
    pub final_check: Vec<(u32, f64, f64)>,
    pub membership_omega: Membership,
    pub membership_sigma: Membership,
}

impl PipelineReport {
    pub fn passed(&self) -> bool {
        self.stages.iter().all(|s| s.passed)
    }
}

fn sig(v: f64) -> String {
    fmt_sig(v, 12)
}

fn abort(stage: &str, witness: impl Into<String>) -> Error {
    Error::Stage { stage: stage.into(), witness: witness.into() }
}

/// Runs every stage in order and aborts at the first failed hypothesis.
pub fn beurling_to_roumieu_pipeline(
    jet: &Jet,
    w: &WeightFunction,
    sigma: &WeightFunction,
    cfg: &PipelineConfig,
) -> Result<PipelineReport> {
    let mut stages = Vec::new();
    let p_max = cfg.p_max.min(jet.pcap());
    if cfg.j_max <= cfg.n_max * cfg.n_max {
        return Err(Error::Argument(format!(
            "j_max = {} must exceed n_max^2 = {} for f to dominate n^2 sigma",
            cfg.j_max,
            cfg.n_max * cfg.n_max
        )));
    }

    // hypotheses on (ω, σ)
    let grid = GeometricGrid::default();
    let axioms = check_weight_axioms(w, &grid)?;
    if !axioms.concave.verdict.holds() {
        return Err(abort("hypotheses", format!("omega `{}` is not concave on the grid", w.label())));
    }
    let nq = check_nonquasianalytic(w, cfg.tol)?;
    if !nq.verdict.holds() {
        return Err(abort("hypotheses", format!("omega `{}` is not non-quasianalytic ({})", w.label(), nq.verdict)));
    }
    let identity = FnWeight::new("t", |t: f64| t);
    let small = asymptotic_verdict(sigma, &identity, Relation::LittleO, &grid);
    if !small.verdict.holds() {
        return Err(abort("hypotheses", format!("sigma = o(t) is {}", small.verdict)));
    }
    let discrete = check_discrete_condition(w, sigma, &cfg.search)?;
    let constants = DiscreteConstants::from_verdict(&discrete)
        .filter(|_| discrete.verdict.holds())
        .ok_or_else(|| abort("hypotheses", "no discrete-condition constants (C, K, H, t0) found"))?;
    stages.push(StageOutcome {
        name: "hypotheses",
        passed: true,
        detail: format!("C = {}; K = {}; H = {}; t0 = {}", sig(constants.c), sig(constants.k), sig(constants.h), sig(constants.t0)),
    });

    let profile = jet_growth_profile(jet, p_max, true)?;
    stages.push(StageOutcome {
        name: "profile",
        passed: true,
        detail: format!("max g = {}", sig(profile.g.iter().cloned().fold(0.0, f64::max))),
    });

    let fit = fit_offsets(&profile, sigma, cfg.j_max)?;
    if let Some(j) = fit.first_unstable() {
        return Err(abort(
            "fit",
            format!(
                "jet not empirically Beurling: C_j floor exceeded growth at j = {j} (g(k) - psi_j(k) = {} peaks at k = {} of {p_max})",
                fit.excess[j - 1],
                fit.argmax[j - 1]
            ),
        ));
    }
    stages.push(StageOutcome { name: "fit", passed: true, detail: format!("C_1 = {}; C_J = {}", sig(fit.c[0]), sig(fit.c[cfg.j_max - 1])) });

    let offsets = fit.raised(cfg.offset_growth);
    let y_top = 1.1 * sigma.derivative(cfg.t_top)? * cfg.t_top;
    let base = Arc::new(PsiStar::from_weight(sigma, y_top)?);
    let family = PsiFamily::standard(base, cfg.j_max)?;
    let h = Arc::new(build_convex_interpolant(&family, &offsets, y_top)?);
    if h.truncated {
        return Err(abort("interpolant", format!("no admissible switch after psi_{}", h.final_index() + 1)));
    }
    if h.convexity_defect > 1e-9 {
        return Err(abort("interpolant", format!("chord slopes decrease by {}", h.convexity_defect)));
    }
    if let Some(k) = (0..=p_max).find(|&k| profile.g[k as usize] > h.value(k as f64)) {
        return Err(abort("interpolant", format!("g({k}) exceeds h({k})")));
    }
    stages.push(StageOutcome {
        name: "interpolant",
        passed: true,
        detail: format!("{} pieces; lower margin {}", h.pieces.len(), sig(h.lower_margin)),
    });

    let f = envelope_to_majorant(h.clone() as Arc<dyn ConvexProfile>);
    for t in cfg.verdict_grid.points() {
        let s = sigma.eval(t)?;
        let fv = f.eval(t)?;
        if let Some((j, d)) = h.d.iter().enumerate().find(|(j, d)| s > (fv + *d) / (*j as f64 + 1.0) * (1.0 + 1e-6) + 1e-6) {
            return Err(abort("majorant", format!("sigma({t}) > (f(t) + D_{})/{} with D = {d}", j + 1, j + 1)));
        }
    }
    let mut lo = cfg.verdict_grid.lo;
    while f.eval(lo)? <= 0.0 {
        lo *= 10.0;
        if lo >= cfg.verdict_grid.hi {
            return Err(abort("majorant", "f stays nonpositive on the verdict grid"));
        }
    }
    let vgrid = GeometricGrid::new(lo, cfg.verdict_grid.hi, cfg.verdict_grid.count)?;
    let majorant_verdict = asymptotic_verdict(sigma, &f, Relation::LittleO, &vgrid);
    if !majorant_verdict.verdict.holds() {
        return Err(abort("majorant", format!("sigma = o(f) is {} on {vgrid}", majorant_verdict.verdict)));
    }
    stages.push(StageOutcome { name: "majorant", passed: true, detail: format!("sigma = o(f) on {vgrid}") });

    let input = ReductionInput {
        w: Arc::new(w.clone()),
        sigma: Arc::new(sigma.clone()),
        f: Arc::new(f.clone()),
        constants,
        n_max: cfg.n_max,
        enforce_nq: false,
    };
    let reduction = build_reduction(input).map_err(|e| abort("reduction", e.to_string()))?;
    let validation = validate_reduction(&reduction, cfg.grid_per_segment)?;
    if let Some(c) = validation.claims.iter().find(|c| !c.holds) {
        return Err(abort("reduction", format!("claim {} fails with margin {}", c.name, c.min_margin)));
    }
    if let Some(r) = validation.recertification.as_ref().filter(|r| !r.verdict.holds()) {
        return Err(abort("reduction", format!("discrete condition for (omega~, sigma~) is {}", r.verdict)));
    }
    stages.push(StageOutcome {
        name: "reduction",
        passed: true,
        detail: format!("x_2 = {}; x_{} = {}", sig(reduction.x[1]), cfg.n_max, sig(reduction.range().1)),
    });

    let (b, final_check, membership_omega, membership_sigma) = {
        let sigma_t = reduction.tilde_extended(Which::Sigma);
        let s_cap = reduction.range().1.ln();
        let truncated = Truncated(&sigma_t);
        let psi_tilde = phi_of(&truncated);
        let mut b: f64 = 0.0;
        for s in linspace(0.0, s_cap, 4001) {
            b = b.max(psi_tilde(s) - f.eval(s.exp())?);
        }
        let mut final_check = Vec::with_capacity(p_max as usize + 1);
        for k in 0..=p_max {
            let star = conjugate_point(&psi_tilde, k as f64, INITIAL_S_MAX.min(s_cap), s_cap)?;
            let g = profile.g[k as usize];
            let bound = star.value + b;
            if g > bound * (1.0 + 1e-12) {
                return Err(abort("final", format!("g({k}) = {g} exceeds psi~*({k}) + B = {bound}")));
            }
            final_check.push((k, g, bound));
        }
        stages.push(StageOutcome { name: "final", passed: true, detail: format!("B = {}", sig(b)) });

        let omega_t = reduction.tilde_extended(Which::Omega);
        let membership_omega = roumieu_membership(jet, &omega_t, &cfg.membership_grid, p_max)?;
        let membership_sigma = roumieu_membership(jet, &sigma_t, &cfg.membership_grid, p_max)?;
        if membership_sigma.x.is_none() {
            return Err(abort("membership", format!("sigma~: {}", membership_sigma.message())));
        }
        stages.push(StageOutcome {
            name: "membership",
            passed: true,
            detail: format!("sigma~: {}; omega~: {}", membership_sigma.message(), membership_omega.message()),
        });
        (b, final_check, membership_omega, membership_sigma)
    };

    Ok(PipelineReport {
        config: cfg.clone(),
        stages,
        constants,
        profile,
        fit,
        offsets,
        interpolant: h,
        majorant_verdict,
        reduction,
        validation,
        b,
        final_check,
        membership_omega,
        membership_sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::catalog;

    fn exp_jet() -> Jet {
        Jet::from_fn(1, vec![vec![0.0], vec![0.5], vec![1.0]], 30, |x, _| x[0].exp()).unwrap()
    }

    #[test]
    fn exponential_jet_passes() {
        let s = catalog::power(0.5);
        let report = beurling_to_roumieu_pipeline(&exp_jet(), &s, &s, &PipelineConfig::default()).unwrap();
        assert!(report.passed());
        assert_eq!(report.stages.len(), 8);
        assert!(report.membership_sigma.x.is_some());
    }

    #[test]
    fn constant_jet_passes() {
        let s = catalog::power(0.5);
        let jet = Jet::from_fn(1, vec![vec![0.0], vec![1.0]], 6, |_, a| if a.order() == 0 { 1.0 } else { 0.0 }).unwrap();
        let report = beurling_to_roumieu_pipeline(&jet, &s, &s, &PipelineConfig::default()).unwrap();
        assert!(report.profile.g.iter().all(|&g| g == 0.0));
        assert!(report.passed());
    }

    #[test]
    fn super_exponential_jet_aborts_at_fit() {
        let s = catalog::power(0.5);
        let jet = Jet::from_fn(1, vec![vec![0.0]], 12, |_, a| ((a.order() * a.order()) as f64).exp()).unwrap();
        match beurling_to_roumieu_pipeline(&jet, &s, &s, &PipelineConfig::default()) {
            Err(Error::Stage { stage, witness }) => {
                assert_eq!(stage, "fit");
                assert!(witness.contains("not empirically Beurling"), "{witness}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn undersized_j_max_is_rejected() {
        let s = catalog::power(0.5);
        let cfg = PipelineConfig { j_max: 16, ..PipelineConfig::default() };
        assert!(matches!(beurling_to_roumieu_pipeline(&exp_jet(), &s, &s, &cfg), Err(Error::Argument(_))));
    }
}
