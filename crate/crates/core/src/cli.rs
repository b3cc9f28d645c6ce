//! Command-line front end. Every subcommand prints one report on standard
//! output; diagnostics go to standard error.
//!
//! Exit codes: 0 verdict holds, 1 verdict fails, 2 inconclusive, 64 usage
//! error, 65 data error.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::conditions::{
    check_discrete_condition, check_r_strong, growth_index, growth_index_grid, kappa, DiscreteSearch, GrowthIndex,
    IntegralOutcome, PairVerdict, DEFAULT_TOL,
};
use crate::conjugate::{weight_conjugate, weight_matrix};
use crate::error::{Error, Result};
use crate::jets::{beurling_seminorms, beurling_to_roumieu_pipeline, parse_jet, Jet, PipelineConfig};
use crate::numeric::{linspace, GeometricGrid};
use crate::reduction::{build_reduction, nq_tail, validate_reduction, DiscreteConstants, ReductionInput};
use crate::report::{Report, Table, Value};
use crate::weights::{catalog, check_weight_axioms, AsymptoticVerdict, Verdict, WeightFunction};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILS: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;

/// Witness rows printed per table.
const MAX_WITNESSES: usize = 20;
/// Rows of the `--csv` curve export of `reduce`.
const CSV_POINTS: usize = 400;
const VALIDATION_POINTS: usize = 32;

#[derive(Debug, Parser)]
#[command(name = "ultradiff", version, about = "Weight functions, conjugates, pair conditions, reductions and jets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// Candidate K values.
    #[arg(long, value_delimiter = ',')]
    k_grid: Option<Vec<f64>>,
    /// Candidate exponents e with H = K^e.
    #[arg(long, value_delimiter = ',')]
    h_exponents: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    t0_grid: Option<Vec<f64>>,
    #[arg(long)]
    search_jmax: Option<u32>,
    #[arg(long)]
    thi: Option<f64>,
    #[arg(long)]
    tcount: Option<usize>,
}

impl SearchArgs {
    fn search(&self) -> DiscreteSearch {
        let d = DiscreteSearch::default();
        DiscreteSearch {
            k_grid: self.k_grid.clone().unwrap_or(d.k_grid),
            h_exponents: self.h_exponents.clone().unwrap_or(d.h_exponents),
            t0_grid: self.t0_grid.clone().unwrap_or(d.t0_grid),
            j_max: self.search_jmax.unwrap_or(d.j_max),
            t_hi: self.thi.unwrap_or(d.t_hi),
            t_count: self.tcount.unwrap_or(d.t_count),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Weight-function axioms and concavity on a grid.
    CheckWeight {
        expr: String,
        #[arg(long)]
        tmin: Option<f64>,
        #[arg(long, default_value_t = GeometricGrid::default())]
        grid: GeometricGrid,
    },
    /// Young conjugate of the normalized weight on a uniform y grid.
    Conjugate {
        expr: String,
        /// LO:HI:N, uniformly spaced.
        #[arg(long)]
        ygrid: String,
        #[arg(long)]
        tmin: Option<f64>,
    },
    /// Entries W^x_0, ..., W^x_K.
    WeightMatrix {
        expr: String,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        kmax: usize,
        #[arg(long)]
        tmin: Option<f64>,
    },
    /// The r-strong or the discrete condition for (omega, sigma).
    #[command(group(clap::ArgGroup::new("mode").required(true).args(["r", "discrete"])))]
    CheckPair {
        omega: String,
        sigma: String,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        discrete: bool,
        #[arg(long, default_value_t = GeometricGrid::default())]
        grid: GeometricGrid,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Growth index gamma(sigma, omega).
    GrowthIndex {
        sigma: String,
        omega: String,
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
        #[arg(long, default_value_t = growth_index_grid())]
        grid: GeometricGrid,
    },
    /// kappa(t) = integral of omega(tu)/u^2 over u >= 1.
    Kappa {
        omega: String,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Builds (omega~, sigma~) from (omega, sigma, f) and validates it.
    Reduce {
        omega: String,
        sigma: String,
        #[arg(long)]
        f: String,
        #[arg(long)]
        nmax: usize,
        /// Also force the non-quasianalytic tail bound 1/n^3.
        #[arg(long)]
        nq: bool,
        /// Writes the curves t, omega, omega~, sigma, sigma~, f.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Beurling norm and seminorm of a jet for m.
    JetSeminorm {
        jetfile: PathBuf,
        omega: String,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        pmax: u32,
    },
    /// Runs the Beurling to Roumieu pipeline on a jet.
    JetReduce {
        jetfile: PathBuf,
        omega: String,
        sigma: String,
        #[arg(long, default_value_t = PipelineConfig::default().j_max)]
        jmax: usize,
        #[arg(long, default_value_t = PipelineConfig::default().p_max)]
        pmax: u32,
        #[arg(long, default_value_t = PipelineConfig::default().n_max)]
        nmax: usize,
    },
}

/// Builds a weight from command-line text. Catalog shapes get their
/// analytic derivative and continuation unless `--tmin` overrides `t_min`.
pub fn resolve_weight(text: &str, t_min: Option<f64>) -> Result<WeightFunction> {
    let w = WeightFunction::parse(text)?;
    match t_min {
        Some(t) => w.with_t_min(t),
        None => Ok(catalog::recognize(&w.expr).map_or(w, |c| c.with_name(text.trim()))),
    }
}

fn exit_for(v: Verdict) -> i32 {
    match v {
        Verdict::HoldsEmpirically => EXIT_OK,
        Verdict::Fails => EXIT_FAILS,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn exit_for_error(e: &Error) -> i32 {
    match e {
        Error::Argument(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn uniform_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Argument(format!("grid must look like LO:HI:N, got `{text}`"));
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let [lo, hi, n] = parts[..] else { return Err(bad()) };
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    let n: usize = n.parse().map_err(|_| bad())?;
    if !(lo >= 0.0 && hi >= lo && hi.is_finite() && n >= 1) {
        return Err(Error::Argument(format!("grid needs 0 <= LO <= HI and N >= 1, got `{text}`")));
    }
    Ok(if n == 1 { vec![lo] } else { linspace(lo, hi, n) })
}

fn search_defaults(r: &mut Report, s: &DiscreteSearch) {
    let list = |v: &[f64]| v.iter().map(|x| Value::Num(*x).to_string()).collect::<Vec<_>>().join(",");
    r.default_value("k_grid", list(&s.k_grid))
        .default_value("h_exponents", list(&s.h_exponents))
        .default_value("t0_grid", list(&s.t0_grid))
        .default_value("search_jmax", s.j_max)
        .default_value("thi", s.t_hi)
        .default_value("tcount", s.t_count);
}

fn asymptotic_section(r: &mut Report, name: &str, v: &AsymptoticVerdict) {
    let s = r.section(name);
    s.kv("verdict", v.verdict).kv("grid", v.grid.to_string()).kv("witnesses", v.witnesses.len());
    if !v.witnesses.is_empty() {
        let mut t = Table::new(format!("{name}_witnesses"), &["t", "value"]);
        for (x, y) in v.witnesses.iter().take(MAX_WITNESSES) {
            t.row(vec![(*x).into(), (*y).into()]);
        }
        s.table(t);
    }
}

fn pair_section(r: &mut Report, pv: &PairVerdict) {
    let s = r.section("verdict");
    s.kv("condition", pv.condition.to_string()).kv("verdict", pv.verdict);
    if let Some(g) = pv.grid {
        s.kv("grid", g.to_string());
    }
    if let Some(c) = pv.constants {
        s.kv("C", c.c).kv("K", c.k).kv("H", c.h).kv("t0", c.t0).kv("r", c.r);
    }
    for (k, v) in &pv.details {
        s.kv(k, *v);
    }
    if !pv.witnesses.is_empty() {
        let mut t = Table::new("witnesses", &["t", "j", "value"]);
        for w in pv.witnesses.iter().take(MAX_WITNESSES) {
            t.row(vec![w.t.into(), w.j.into(), w.value.into()]);
        }
        s.table(t);
    }
}

fn weight_section(r: &mut Report, role: &str, w: &WeightFunction) {
    r.section(role)
        .kv("expr", w.expr.to_string())
        .kv("t_min", w.t_min)
        .kv("continuation", format!("{:?}", w.continuation).to_lowercase());
}

fn outcome_kv(r: &mut Report, name: &str, o: &IntegralOutcome) -> i32 {
    let s = r.section(name);
    match *o {
        IntegralOutcome::Converged { value, tail } => {
            s.kv("outcome", "converged").kv("value", value).kv("tail", tail);
            EXIT_OK
        }
        IntegralOutcome::Divergent { exponent } => {
            s.kv("outcome", "divergent").kv("exponent", exponent);
            EXIT_FAILS
        }
        IntegralOutcome::Inconclusive { partial } => {
            s.kv("outcome", "inconclusive").kv("partial", partial);
            EXIT_INCONCLUSIVE
        }
    }
}

fn read_jet(path: &PathBuf) -> Result<Jet> {
    let text = std::fs::read_to_string(path)?;
    parse_jet(&text)
}

fn execute(cmd: Command) -> Result<(Report, i32)> {
    match cmd {
        Command::CheckWeight { expr, tmin, grid } => {
            let w = resolve_weight(&expr, tmin)?;
            let mut r = Report::new("check-weight");
            r.default_value("grid", grid.to_string()).default_value("tmin", tmin);
            weight_section(&mut r, "weight", &w);
            let a = check_weight_axioms(&w, &grid)?;
            asymptotic_section(&mut r, "increasing", &a.increasing);
            asymptotic_section(&mut r, "moderate_growth", &a.moderate_growth.check);
            r.sections.last_mut().unwrap().kv("c2", a.moderate_growth.c2);
            asymptotic_section(&mut r, "log_small", &a.log_small);
            asymptotic_section(&mut r, "phi_convex", &a.phi_convex);
            asymptotic_section(&mut r, "concave", &a.concave);
            r.section("summary").kv("is_weight", a.is_weight()).kv("with_concavity", a.overall());
            Ok((r, exit_for(a.is_weight())))
        }
        Command::Conjugate { expr, ygrid, tmin } => {
            let w = resolve_weight(&expr, tmin)?;
            let ys = uniform_grid(&ygrid)?;
            let mut r = Report::new("conjugate");
            r.default_value("ygrid", ygrid.as_str()).default_value("tmin", tmin).default_value("normalization", "omega = 0 on [0,1]");
            weight_section(&mut r, "weight", &w);
            let mut t = Table::new("conjugate", &["y", "phi_star", "argmax", "s_max"]);
            for y in ys {
                let p = weight_conjugate(&w, y)?;
                t.row(vec![y.into(), p.value.into(), p.argmax.into(), p.s_max.into()]);
            }
            r.section("values").table(t);
            Ok((r, EXIT_OK))
        }
        Command::WeightMatrix { expr, x, kmax, tmin } => {
            let w = resolve_weight(&expr, tmin)?;
            let m = weight_matrix(&w, x, kmax)?;
            let mut r = Report::new("weight-matrix");
            r.default_value("x", x).default_value("kmax", kmax).default_value("tmin", tmin);
            weight_section(&mut r, "weight", &w);
            let mut t = Table::new("matrix", &["k", "value", "log_value"]);
            for (k, l) in m.log_entries.iter().enumerate() {
                t.row(vec![k.into(), l.exp().into(), (*l).into()]);
            }
            r.section("entries").kv("overflowing", m.overflow.iter().filter(|o| **o).count()).table(t);
            Ok((r, EXIT_OK))
        }
        Command::CheckPair { omega, sigma, r: rr, discrete, grid, tol, search } => {
            let w = resolve_weight(&omega, None)?;
            let s = resolve_weight(&sigma, None)?;
            let search = search.search();
            let mut r = Report::new("check-pair");
            r.default_value("grid", grid.to_string()).default_value("tol", tol);
            search_defaults(&mut r, &search);
            weight_section(&mut r, "omega", &w);
            weight_section(&mut r, "sigma", &s);
            let pv = match (rr, discrete) {
                (Some(rv), false) => check_r_strong(&w, &s, rv, &grid, tol)?,
                _ => check_discrete_condition(&w, &s, &search)?,
            };
            pair_section(&mut r, &pv);
            Ok((r, exit_for(pv.verdict)))
        }
        Command::GrowthIndex { sigma, omega, tol, grid } => {
            let s = resolve_weight(&sigma, None)?;
            let w = resolve_weight(&omega, None)?;
            let mut r = Report::new("growth-index");
            r.default_value("tol", tol).default_value("grid", grid.to_string()).default_value("quad_tol", DEFAULT_TOL);
            weight_section(&mut r, "sigma", &s);
            weight_section(&mut r, "omega", &w);
            let sec = r.section("index");
            let code = match growth_index(&s, &w, tol, &grid)? {
                GrowthIndex::Estimate { gamma, lo, hi } => {
                    sec.kv("outcome", "estimate").kv("gamma", gamma).kv("gamma_lo", lo).kv("gamma_hi", hi);
                    EXIT_OK
                }
                GrowthIndex::AtLeast(g) => {
                    sec.kv("outcome", "at_least").kv("gamma_lo", g);
                    EXIT_INCONCLUSIVE
                }
                GrowthIndex::BelowOne => {
                    sec.kv("outcome", "not 1-strong");
                    EXIT_FAILS
                }
            };
            Ok((r, code))
        }
        Command::Kappa { omega, t, tol } => {
            let w = resolve_weight(&omega, None)?;
            let mut r = Report::new("kappa");
            r.default_value("t", t).default_value("tol", tol);
            weight_section(&mut r, "omega", &w);
            let o = kappa(&w, t, tol)?;
            let code = outcome_kv(&mut r, "kappa", &o);
            Ok((r, code))
        }
        Command::Reduce { omega, sigma, f, nmax, nq, csv, search } => {
            let w = resolve_weight(&omega, None)?;
            let s = resolve_weight(&sigma, None)?;
            let fw = resolve_weight(&f, None)?;
            let search = search.search();
            let mut r = Report::new("reduce");
            r.default_value("nmax", nmax)
                .default_value("nq", nq)
                .default_value("validation_points", VALIDATION_POINTS)
                .default_value("csv_points", CSV_POINTS);
            search_defaults(&mut r, &search);
            weight_section(&mut r, "omega", &w);
            weight_section(&mut r, "sigma", &s);
            weight_section(&mut r, "f", &fw);
            let pv = check_discrete_condition(&w, &s, &search)?;
            let Some(constants) = DiscreteConstants::from_verdict(&pv).filter(|_| pv.verdict.holds()) else {
                pair_section(&mut r, &pv);
                return Ok((r, exit_for(pv.verdict).max(EXIT_FAILS)));
            };
            r.section("constants").kv("C", constants.c).kv("K", constants.k).kv("H", constants.h).kv("t0", constants.t0);
            let sigma_arc = Arc::new(s.clone());
            let input = ReductionInput {
                w: Arc::new(w),
                sigma: sigma_arc.clone(),
                f: Arc::new(fw),
                constants,
                n_max: nmax,
                enforce_nq: nq,
            };
            let res = build_reduction(input)?;
            let mut seq = Table::new("sequence", &["n", "x", "y", "z", "degenerate_z"]);
            for (i, x) in res.x.iter().enumerate() {
                let degenerate = res.segments.iter().find(|g| g.n == i + 1).is_some_and(|g| g.degenerate_z);
                seq.row(vec![(i + 1).into(), (*x).into(), res.y[i].into(), res.z[i].into(), degenerate.into()]);
            }
            r.section("sequence").table(seq);
            if nq {
                let mut t = Table::new("nq_tails", &["n", "x", "tail", "bound"]);
                for (i, x) in res.x.iter().enumerate() {
                    let n = (i + 1) as f64;
                    t.row(vec![(i + 1).into(), (*x).into(), nq_tail(sigma_arc.as_ref(), *x).into(), n.powi(-3).into()]);
                }
                r.section("nq").table(t);
            }
            let v = validate_reduction(&res, VALIDATION_POINTS)?;
            let mut claims = Table::new("claims", &["name", "holds", "min_margin", "witness_t"]);
            for c in &v.claims {
                claims.row(vec![c.name.as_str().into(), c.holds.into(), c.min_margin.into(), c.witness.map(|w| w.0).into()]);
            }
            let mut ratios = Table::new("ratios", &["n", "omega_ratio", "sigma_ratio", "sigma_f_ratio"]);
            for q in &v.ratios {
                ratios.row(vec![q.n.into(), q.omega_ratio.into(), q.sigma_ratio.into(), q.sigma_f_ratio.into()]);
            }
            r.section("validation")
                .kv("continuity_y", v.continuity_y)
                .kv("continuity_x", v.continuity_x)
                .kv("c_prime_omega", v.c_prime_omega)
                .kv("c_prime_sigma", v.c_prime_sigma)
                .kv("h_tilde", v.h_tilde)
                .kv("n_tilde", v.n_tilde)
                .kv("d", v.d)
                .kv("d_tilde", v.d_tilde)
                .kv("all_hold", v.all_hold())
                .table(claims)
                .table(ratios);
            if let Some(rc) = &v.recertification {
                pair_section(&mut r, rc);
                r.sections.last_mut().unwrap().name = "recertification".into();
            }
            if let Some(path) = csv {
                std::fs::write(&path, res.curves_csv(CSV_POINTS)?)?;
                r.section("export").kv("csv", path.display().to_string());
            }
            Ok((r, if v.all_hold() { EXIT_OK } else { EXIT_FAILS }))
        }
        Command::JetSeminorm { jetfile, omega, m, pmax } => {
            let jet = read_jet(&jetfile)?;
            let w = resolve_weight(&omega, None)?;
            let sups = beurling_seminorms(&jet, &w, m, pmax)?;
            let mut r = Report::new("jet-seminorm");
            r.default_value("m", m).default_value("pmax", pmax);
            r.section("jet").kv("dim", jet.dim()).kv("points", jet.points().len()).kv("pcap", jet.pcap());
            weight_section(&mut r, "omega", &w);
            let mut t = Table::new("by_order", &["p", "norm", "seminorm"]);
            for (p, (a, b)) in sups.norm_by_order.iter().zip(&sups.seminorm_by_order).enumerate() {
                t.row(vec![p.into(), (*a).into(), (*b).into()]);
            }
            r.section("sups")
                .kv("norm", sups.norm)
                .kv("norm_at", sups.norm_at.as_ref().map(|a| format!("alpha={} x={}", a.alpha, a.x)))
                .kv("seminorm", sups.seminorm)
                .kv(
                    "seminorm_at",
                    sups.seminorm_at.as_ref().map(|a| format!("p={} alpha={} x={} y={}", a.p, a.alpha, a.x, a.y)),
                )
                .table(t);
            Ok((r, EXIT_OK))
        }
        Command::JetReduce { jetfile, omega, sigma, jmax, pmax, nmax } => {
            let jet = read_jet(&jetfile)?;
            let w = resolve_weight(&omega, None)?;
            let s = resolve_weight(&sigma, None)?;
            let cfg = PipelineConfig { j_max: jmax, p_max: pmax, n_max: nmax, ..PipelineConfig::default() };
            let mut r = Report::new("jet-reduce");
            r.default_value("jmax", jmax)
                .default_value("pmax", pmax)
                .default_value("nmax", nmax)
                .default_value("offset_growth", cfg.offset_growth)
                .default_value("t_top", cfg.t_top)
                .default_value("verdict_grid", cfg.verdict_grid.to_string())
                .default_value(
                    "membership_grid",
                    cfg.membership_grid.iter().map(|x| Value::Num(*x).to_string()).collect::<Vec<_>>().join(","),
                )
                .default_value("grid_per_segment", cfg.grid_per_segment)
                .default_value("tol", cfg.tol);
            search_defaults(&mut r, &cfg.search);
            r.section("jet").kv("dim", jet.dim()).kv("points", jet.points().len()).kv("pcap", jet.pcap());
            weight_section(&mut r, "omega", &w);
            weight_section(&mut r, "sigma", &s);
            match beurling_to_roumieu_pipeline(&jet, &w, &s, &cfg) {
                Ok(rep) => {
                    let mut stages = Table::new("stages", &["stage", "passed", "detail"]);
                    for st in &rep.stages {
                        stages.row(vec![st.name.into(), st.passed.into(), st.detail.as_str().into()]);
                    }
                    let mut growth = Table::new("growth", &["k", "g", "bound"]);
                    for (k, g, b) in &rep.final_check {
                        growth.row(vec![(*k).into(), (*g).into(), (*b).into()]);
                    }
                    let mut offsets = Table::new("offsets", &["j", "c_fit", "c_used", "d"]);
                    for (j, c) in rep.fit.c.iter().enumerate() {
                        let d = rep.interpolant.d.get(j).copied();
                        offsets.row(vec![(j + 1).into(), (*c).into(), rep.offsets[j].into(), d.into()]);
                    }
                    let mut member = Table::new("membership", &["weight", "x", "norm", "seminorm", "peak_order", "stable"]);
                    for (name, m) in [("omega~", &rep.membership_omega), ("sigma~", &rep.membership_sigma)] {
                        for row in &m.rows {
                            member.row(vec![
                                name.into(),
                                row.x.into(),
                                row.norm.into(),
                                row.seminorm.into(),
                                row.peak_order.into(),
                                row.stable.into(),
                            ]);
                        }
                    }
                    r.section("pipeline")
                        .kv("passed", rep.passed())
                        .kv("B", rep.b)
                        .kv("membership_sigma", rep.membership_sigma.message())
                        .kv("membership_omega", rep.membership_omega.message())
                        .table(stages)
                        .table(offsets)
                        .table(growth)
                        .table(member);
                    Ok((r, if rep.passed() { EXIT_OK } else { EXIT_FAILS }))
                }
                Err(Error::Stage { stage, witness }) => {
                    r.section("pipeline").kv("passed", false).kv("failed_stage", stage).kv("witness", witness);
                    Ok((r, EXIT_FAILS))
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command) {
        Ok((report, code)) => {
            if let Err(e) = out.write_all(report.render().as_bytes()) {
                let _ = writeln!(err, "error: {e}");
                return EXIT_DATA;
            }
            code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_for_error(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("ultradiff").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors() {
        assert_eq!(call(&[]).0, EXIT_USAGE);
        assert_eq!(call(&["check-pair", "t^0.5", "t^0.5"]).0, EXIT_USAGE);
        assert_eq!(call(&["conjugate", "t^0.5", "--ygrid", "1:2"]).0, EXIT_USAGE);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn data_errors() {
        let (code, out, err) = call(&["check-weight", "t +"]);
        assert_eq!(code, EXIT_DATA);
        assert!(out.is_empty());
        assert!(err.contains("offset 3"), "{err}");
        assert_eq!(call(&["jet-seminorm", "/nonexistent/jet.txt", "t^0.5", "--m", "1", "--pmax", "2"]).0, EXIT_DATA);
    }

    #[test]
    fn weight_matrix_report() {
        let (code, out, _) = call(&["weight-matrix", "max(0, t-1)", "--x", "1", "--kmax", "2"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.starts_with("# ultradiff weight-matrix\n[defaults]\nx = 1\nkmax = 2\n"), "{out}");
        let last = out.lines().last().unwrap();
        let w2: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
        assert!((w2 - 4.0 / std::f64::consts::E).abs() < 1e-9);
    }

    #[test]
    fn catalog_weights_are_resolved() {
        let w = resolve_weight("t/(log t)^2", None).unwrap();
        assert_eq!(w.t_min, 3f64.exp());
        assert_eq!(w.name, "t/(log t)^2");
        assert_eq!(resolve_weight("t/(log t)^2", Some(20.0)).unwrap().t_min, 20.0);
    }

    #[test]
    fn uniform_grids() {
        assert_eq!(uniform_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(uniform_grid("2:2:1").unwrap(), vec![2.0]);
        assert!(uniform_grid("1:0:3").is_err());
        assert!(uniform_grid("a:1:3").is_err());
    }
}
