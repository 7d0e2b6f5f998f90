//! JSON problem specs and the `dulackit` command.
//!
//! ```text
//! dulackit check|expand|verify|loud <spec.json> [--out DIR] [--threads N]
//! ```
//!
//! Exit codes: 0 pass, 1 verification failure, 2 hypothesis failure,
//! 3 parse error, 4 refused preconditions.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::expansion::{
    coefficients, dulac_time_coefficients, BiSpec, ExpansionError, ExpansionResult, ModeSource, UnfoldingSpec,
};
use crate::family::{
    biggest_real_root_branch, compute_q, default_eps_grid, eps_hat_of, newton_diagram, FamilyError, NewtonData,
    PolynomialFamily, PuiseuxBranch, Side,
};
use crate::loud::{self, LoudError, LoudParams};
use crate::oracle::{
    self, FlatnessCase, FlatnessGrid, FlatnessReport, OdeConfig, OracleError, QuadratureConfig, Sampled,
};
use crate::scalar::{rational_to_f64, Rational, Scalar};
use crate::series::{CoeffLiteral, TruncatedSeries};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERIFY_FAIL: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_REFUSED: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid spec: {0}")]
    Parse(String),
    #[error("hypothesis failure: {0}")]
    Hypothesis(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Loud(#[from] LoudError),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Parse(_) => EXIT_PARSE,
            CliError::Hypothesis(_) => EXIT_HYPOTHESIS,
            CliError::Family(FamilyError::DegenerateQ)
            | CliError::Expansion(ExpansionError::Family(FamilyError::DegenerateQ)) => EXIT_HYPOTHESIS,
            CliError::Family(FamilyError::InvalidFamily(_)) => EXIT_PARSE,
            CliError::Expansion(ExpansionError::InvalidSpec(_)) => EXIT_PARSE,
            CliError::Refused(_) => EXIT_REFUSED,
            _ => EXIT_VERIFY_FAIL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    #[default]
    Orbit,
    DulacMap,
    DulacTime,
    Loud,
}

/// Modes of `U_a(x, y) = sum U_n(x) y^{n-1}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModesSpec {
    /// Finitely many modes.
    Finite(Vec<TruncatedSeries<Rational>>),
    /// `U_a = 1 / (1 - a x y)`, that is `U_n = (a x)^{n-1}`, for `0 < a < 1`.
    InverseLinear(CoeffLiteral),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SGridSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoudSpec {
    #[serde(default = "default_d_grid")]
    pub d_grid: Vec<f64>,
    #[serde(default = "one")]
    pub f: f64,
    #[serde(default = "default_loud_s")]
    pub s_grid: Vec<f64>,
    /// `F` at which `c1_hat` is compared with its limit.
    #[serde(default = "default_c1_f")]
    pub c1_f: f64,
}

fn default_d_grid() -> Vec<f64> {
    vec![-0.9, -0.75, -0.5, -0.25, -0.1]
}
fn one() -> f64 {
    1.0
}
fn default_loud_s() -> Vec<f64> {
    (0..6).map(|i| 1e-3 * 10f64.powf(i as f64 / 5.0)).collect()
}
fn default_c1_f() -> f64 {
    1.0 - 1e-4
}

impl Default for LoudSpec {
    fn default() -> Self {
        Self { d_grid: default_d_grid(), f: 1.0, s_grid: default_loud_s(), c1_f: default_c1_f() }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

/// A problem read from JSON.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default)]
    pub kind: ProblemKind,
    pub family: Option<PolynomialFamily>,
    #[serde(rename = "V")]
    pub v: Option<TruncatedSeries<Rational>>,
    #[serde(rename = "U")]
    pub u: Option<TruncatedSeries<Rational>>,
    pub modes: Option<ModesSpec>,
    pub lambda: Option<CoeffLiteral>,
    pub lambdas: Option<Vec<CoeffLiteral>>,
    pub eps: Option<CoeffLiteral>,
    pub eps_grid: Option<Vec<CoeffLiteral>>,
    #[serde(default)]
    pub ell: usize,
    #[serde(default)]
    pub k: usize,
    pub x0: Option<f64>,
    #[serde(default)]
    pub oracle: QuadratureConfig,
    pub s_grid: Option<SGridSpec>,
    pub tol: Option<f64>,
    /// Replaces `c_j` before verification, for sabotage runs.
    #[serde(default)]
    pub coefficient_overrides: BTreeMap<usize, CoeffLiteral>,
    #[serde(default)]
    pub output: OutputSpec,
    pub loud: Option<LoudSpec>,
    /// Recorded in reports; every computation is deterministic.
    pub seed: Option<u64>,
}

/// `U_a(x, y)` in double precision.
type Ua = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

fn parse_lit(l: &CoeffLiteral, what: &str) -> Result<Rational, CliError> {
    l.parse::<Rational>().map_err(|e| CliError::Parse(format!("{what}: {e}")))
}

impl ProblemSpec {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let spec: ProblemSpec = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.kind != ProblemKind::Loud && self.family.is_none() {
            return Err(CliError::Parse("missing family".into()));
        }
        if self.eps_grid.as_ref().is_some_and(|g| g.is_empty()) || self.lambdas.as_ref().is_some_and(|g| g.is_empty()) {
            return Err(CliError::Parse("grids must be non-empty".into()));
        }
        if let Some(g) = &self.s_grid {
            if !(g.min > 0.0 && g.max > g.min && g.n >= 2) {
                return Err(CliError::Parse("s_grid needs 0 < min < max and n >= 2".into()));
            }
        }
        if self.kind == ProblemKind::DulacTime && self.modes.is_none() {
            return Err(CliError::Parse("dulac_time needs modes".into()));
        }
        self.oracle.validate().map_err(|e| CliError::Parse(e.to_string()))?;
        Ok(())
    }

    fn family(&self) -> &PolynomialFamily {
        self.family.as_ref().expect("validated")
    }

    fn v(&self) -> TruncatedSeries<Rational> {
        self.v.clone().unwrap_or_else(|| TruncatedSeries::constant(Rational::from_integer(1.into()), 0))
    }

    fn u(&self) -> TruncatedSeries<Rational> {
        self.u.clone().unwrap_or_else(|| TruncatedSeries::zero(0))
    }

    fn lambdas(&self) -> Result<Vec<Rational>, CliError> {
        match (&self.lambdas, &self.lambda) {
            (Some(g), _) => g.iter().map(|l| parse_lit(l, "lambdas")).collect(),
            (None, Some(l)) => Ok(vec![parse_lit(l, "lambda")?]),
            (None, None) => Ok(vec![Rational::from_integer(1.into())]),
        }
    }

    fn eps_values(&self) -> Result<Vec<Rational>, CliError> {
        match (&self.eps_grid, &self.eps) {
            (Some(g), _) => g.iter().map(|l| parse_lit(l, "eps_grid")).collect(),
            (None, Some(l)) => Ok(vec![parse_lit(l, "eps")?]),
            (None, None) => Ok(vec![Rational::from_integer(0.into())]),
        }
    }

    /// One unfolding per `(eps, lambda)` pair, eps-major. `U` is dropped for
    /// `dulac_map` specs.
    pub fn unfoldings(&self) -> Result<Vec<UnfoldingSpec>, CliError> {
        if !matches!(self.kind, ProblemKind::Orbit | ProblemKind::DulacMap) {
            return Err(CliError::Parse("unfoldings need an orbit or dulac_map spec".into()));
        }
        let u = if self.kind == ProblemKind::DulacMap { TruncatedSeries::zero(0) } else { self.u() };
        let mut out = Vec::new();
        for eps in self.eps_values()? {
            for lambda in self.lambdas()? {
                out.push(UnfoldingSpec::build(self.family().clone(), self.v(), u.clone(), lambda, &eps)?);
            }
        }
        Ok(out)
    }

    fn s_grid(&self) -> SGridSpec {
        self.s_grid.unwrap_or(SGridSpec { min: 1e-4, max: 1e-1, n: 40 })
    }

    fn mode_source(&self) -> Result<(ModeSource, Ua), CliError> {
        match self.modes.as_ref().expect("validated") {
            ModesSpec::Finite(list) => {
                let f: Vec<Vec<f64>> = list.iter().map(|m| m.to_f64().into_coeffs()).collect();
                let ua = move |x: f64, y: f64| {
                    f.iter().rev().fold(0.0, |acc, m| acc * y + m.iter().rev().fold(0.0, |a, c| a * x + c))
                };
                Ok((ModeSource::Finite(list.clone()), Arc::new(ua)))
            }
            ModesSpec::InverseLinear(a) => {
                let a = parse_lit(a, "inverse_linear")?;
                let af = rational_to_f64(&a);
                if !(af > 0.0 && af < 1.0) {
                    return Err(CliError::Parse("inverse_linear needs 0 < a < 1".into()));
                }
                let mode = move |n: usize| TruncatedSeries::monomial(n - 1, Scalar::powi(&a, n as u32 - 1), n - 1);
                let src = ModeSource::Geometric { mode: Arc::new(mode), certificate: Some((1.0 / af, af)) };
                Ok((src, Arc::new(move |x: f64, y: f64| 1.0 / (1.0 - af * x * y))))
            }
        }
    }
}

/// Hypothesis data for one side of `eps = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct SideCheck {
    pub side: Side,
    pub branch: PuiseuxBranch,
    pub newton: Value,
    pub pass: bool,
}

fn newton_json<T: Scalar>(nd: &NewtonData<T>) -> Value {
    serde_json::to_value(nd).expect("serializable")
}

/// Branch, `Q` and `(H0)(H1)(H2)` on one side.
pub fn check_side(family: &PolynomialFamily, side: Side) -> Result<SideCheck, CliError> {
    let branch = biggest_real_root_branch(family, side)?;
    let grid: Vec<f64> = default_eps_grid().iter().map(|e| rational_to_f64(&eps_hat_of(e, branch.rho))).collect();
    let (newton, pass) = if branch.is_exact() {
        let nd = newton_diagram(&compute_q::<Rational>(family, &branch)?)?.with_checks(&grid);
        (newton_json(&nd), nd.all_pass())
    } else {
        let nd = newton_diagram(&compute_q::<f64>(family, &branch)?)?.with_checks(&grid);
        (newton_json(&nd), nd.all_pass())
    };
    Ok(SideCheck { side, branch, newton, pass })
}

pub fn cmd_check(spec: &ProblemSpec) -> Result<(Value, bool), CliError> {
    let plus = check_side(spec.family(), Side::Plus)?;
    let minus = check_side(spec.family(), Side::Minus)?;
    let pass = plus.pass && minus.pass;
    Ok((json!({ "command": "check", "family": spec.family(), "plus": plus, "minus": minus, "pass": pass }), pass))
}

/// `Refused` unless (H0)(H1)(H2) pass on the side of `eps`.
pub fn require_hypotheses(family: &PolynomialFamily, eps: &Rational) -> Result<(), CliError> {
    let side = if eps < &Rational::from_integer(0.into()) { Side::Minus } else { Side::Plus };
    let c = check_side(family, side)?;
    if !c.pass {
        return Err(CliError::Refused(format!(
            "hypotheses fail on the {} side",
            if side == Side::Plus { "plus" } else { "minus" }
        )));
    }
    Ok(())
}

fn expansion_at<T: Scalar>(spec: &UnfoldingSpec, ell: usize) -> Result<ExpansionResult<f64>, CliError> {
    Ok(coefficients::<T>(spec, ell)?.to_f64())
}

/// Report JSON, double coefficients and, for exact branches, the rationals.
type Coefficients = (Value, Vec<f64>, Option<Vec<Rational>>);

fn exact_coefficients(spec: &UnfoldingSpec, ell: usize) -> Result<Coefficients, CliError> {
    if spec.branch.is_exact() {
        let r = coefficients::<Rational>(spec, ell)?;
        let v = serde_json::to_value(&r).expect("serializable");
        Ok((v, r.to_f64().coeffs, Some(r.coeffs)))
    } else {
        let r = expansion_at::<f64>(spec, ell)?;
        Ok((serde_json::to_value(&r).expect("serializable"), r.coeffs, None))
    }
}

fn bispec(spec: &ProblemSpec, eps: &Rational) -> Result<BiSpec, CliError> {
    let side = if eps < &Rational::from_integer(0.into()) { Side::Minus } else { Side::Plus };
    let family = spec.family().clone();
    let branch = biggest_real_root_branch(&family, side)?;
    let eps_hat = eps_hat_of(eps, branch.rho);
    Ok(BiSpec { family, branch, v: spec.v(), modes: spec.mode_source()?.0, eps_hat })
}

pub fn cmd_expand(spec: &ProblemSpec) -> Result<(Value, bool), CliError> {
    let mut runs = Vec::new();
    for eps in spec.eps_values()? {
        require_hypotheses(spec.family(), &eps)?;
        match spec.kind {
            ProblemKind::Orbit | ProblemKind::DulacMap => {
                let u = if spec.kind == ProblemKind::DulacMap { TruncatedSeries::zero(0) } else { spec.u() };
                for lambda in spec.lambdas()? {
                    let us = UnfoldingSpec::build(spec.family().clone(), spec.v(), u.clone(), lambda, &eps)?;
                    runs.push(exact_coefficients(&us, spec.ell)?.0);
                }
            }
            ProblemKind::DulacTime => {
                let b = bispec(spec, &eps)?;
                let r = dulac_time_coefficients(&b, spec.ell, spec.tol.unwrap_or(1e-8))?;
                runs.push(serde_json::to_value(&r).expect("serializable"));
            }
            ProblemKind::Loud => return Err(CliError::Parse("expand does not apply to loud specs".into())),
        }
    }
    Ok((json!({ "command": "expand", "kind": spec.kind, "runs": runs }), true))
}

fn apply_overrides(spec: &ProblemSpec, c: &mut [f64], exact: Option<&mut Vec<Rational>>) -> Result<(), CliError> {
    let mut exact = exact;
    for (&j, lit) in &spec.coefficient_overrides {
        if j >= c.len() {
            return Err(CliError::Parse(format!("override index {j} exceeds ell")));
        }
        let v = parse_lit(lit, "coefficient_overrides")?;
        c[j] = rational_to_f64(&v);
        if let Some(e) = exact.as_deref_mut() {
            e[j] = v;
        }
    }
    Ok(())
}

pub fn cmd_verify(spec: &ProblemSpec) -> Result<(Value, FlatnessReport), CliError> {
    let tol = spec.tol.unwrap_or(1e-2);
    let g = spec.s_grid();
    let qcfg = spec.oracle;
    let ocfg = OdeConfig { rtol: 1e-12, atol: 1e-300, ..OdeConfig::default() };
    let x0 = spec.x0.unwrap_or(1.0);
    let mut cases = Vec::new();
    let mut meta = Vec::new();
    let report = match spec.kind {
        ProblemKind::Orbit | ProblemKind::DulacMap => {
            let mut specs = Vec::new();
            let mut exacts = Vec::new();
            for eps in spec.eps_values()? {
                require_hypotheses(spec.family(), &eps)?;
                for lambda in spec.lambdas()? {
                    let u = if spec.kind == ProblemKind::DulacMap { TruncatedSeries::zero(0) } else { spec.u() };
                    let us = UnfoldingSpec::build(spec.family().clone(), spec.v(), u, lambda, &eps)?;
                    let (json, mut c, mut exact) = exact_coefficients(&us, spec.ell)?;
                    apply_overrides(spec, &mut c, exact.as_mut())?;
                    let f64s = coefficients_meta(&json, &c);
                    meta.push(f64s);
                    let mut case = FlatnessCase::from_expansion(cases.len(), &coefficients::<f64>(&us, spec.ell)?);
                    case.coeffs = c;
                    cases.push(case);
                    specs.push(us);
                    exacts.push(exact);
                }
            }
            let grid = FlatnessGrid::log(g.min, g.max, g.n, cases)?;
            if spec.kind == ProblemKind::DulacMap {
                oracle::flatness_report(
                    |case, s| oracle::dulac_map(&specs[case.a_index], s, &qcfg),
                    Sampled::Value,
                    &grid,
                    spec.ell,
                    spec.k,
                    tol,
                )
            } else {
                oracle::flatness_report(
                    |case, s| {
                        let i = case.a_index;
                        match &exacts[i] {
                            Some(e) => oracle::remainder(&specs[i], e, x0, s, &ocfg),
                            None => oracle::remainder(&specs[i], &case.coeffs, x0, s, &ocfg),
                        }
                    },
                    Sampled::Remainder,
                    &grid,
                    spec.ell,
                    spec.k,
                    tol,
                )
            }
        }
        ProblemKind::DulacTime => {
            let (_, ua) = spec.mode_source()?;
            let mut fields = Vec::new();
            for eps in spec.eps_values()? {
                require_hypotheses(spec.family(), &eps)?;
                let b = bispec(spec, &eps)?;
                let r = dulac_time_coefficients(&b, spec.ell, 1e-12)?;
                let mut c = r.coeffs.clone();
                apply_overrides(spec, &mut c, None)?;
                meta.push(json!({ "eps": r.eps, "coeffs": c, "modes": r.modes, "tail_bound": r.tail_bound }));
                let mut case = FlatnessCase::from_expansion(cases.len(), &r);
                case.coeffs = c;
                cases.push(case);
                fields.push(oracle::NodeField::from_bispec(&b)?);
            }
            let grid = FlatnessGrid::log(g.min, g.max, g.n, cases)?;
            oracle::flatness_report(
                |case, s| oracle::dulac_time_in(&fields[case.a_index], &*ua, s, &qcfg),
                Sampled::Value,
                &grid,
                spec.ell,
                spec.k,
                tol,
            )
        }
        ProblemKind::Loud => {
            return Err(CliError::Parse("verify does not apply to loud specs; use the loud command".into()))
        }
    };
    let summary = json!({
        "command": "verify",
        "kind": spec.kind,
        "seed": spec.seed,
        "cases": meta,
        "report": report,
        "pass": report.verdict,
    });
    Ok((summary, report))
}

fn coefficients_meta(json: &Value, c: &[f64]) -> Value {
    let mut v = json.clone();
    if let Some(obj) = v.as_object_mut() {
        obj.insert("coeffs_used".into(), json!(c));
    }
    v
}

/// Regularity sweep, the `c1` limit table and a gamma self-test.
pub fn cmd_loud(spec: &ProblemSpec) -> Result<(Value, loud::RegularityReport), CliError> {
    let ls = spec.loud.clone().unwrap_or_default();
    let report = loud::regularity_check(&ls.d_grid, ls.f, &ls.s_grid)?;
    let mut table = Vec::new();
    let mut c1_ok = true;
    for &d in &ls.d_grid {
        let p = LoudParams::new(d, ls.c1_f)?;
        let c = loud::c1_hat(&p)?;
        let lim = loud::c1_hat_limit(d);
        let ok = (c - lim).abs() <= 1e-2;
        c1_ok &= ok;
        table.push(json!({ "d": d, "f": ls.c1_f, "c1_hat": c, "limit": lim, "ok": ok }));
    }
    let g5 = loud::gamma(5.0)?;
    let g_half = loud::gamma(0.5)?;
    let gamma_ok = (g5 - 24.0).abs() <= 1e-12 * 24.0 && (g_half - std::f64::consts::PI.sqrt()).abs() <= 1e-12;
    let pass = report.coherent && c1_ok && gamma_ok;
    let summary = json!({
        "command": "loud",
        "regularity": report,
        "c1_table": table,
        "gamma_self_test": { "gamma_5": g5, "gamma_half": g_half, "ok": gamma_ok },
        "pass": pass,
    });
    Ok((summary, report))
}

#[derive(Debug, Parser)]
#[command(name = "dulackit", version, about = "Asymptotic expansions of Dulac maps and times near saddle-nodes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output directory (default: the spec's output.dir, else the current directory)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: DULACKIT_THREADS, else all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Newton diagram and hypothesis verdicts
    Check { spec: PathBuf },
    /// Expansion coefficients
    Expand { spec: PathBuf },
    /// Expansion against the numeric oracle, with flatness verdicts
    Verify { spec: PathBuf },
    /// Loud family regularity report
    Loud { spec: PathBuf },
}

fn write_json(dir: &Path, name: &str, v: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Output(e.to_string()))?;
    fs::write(dir.join(name), text + "\n").map_err(|e| CliError::Output(e.to_string()))
}

fn configure_threads(n: Option<usize>) {
    let n = n.or_else(|| std::env::var("DULACKIT_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = n.filter(|n| *n > 0) {
        // a pool configured earlier in the process stays in place
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let path = match &cli.command {
        Command::Check { spec } | Command::Expand { spec } | Command::Verify { spec } | Command::Loud { spec } => spec,
    };
    let spec = ProblemSpec::from_path(path)?;
    let dir = cli.out.clone().or_else(|| spec.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| CliError::Output(e.to_string()))?;
    match &cli.command {
        Command::Check { .. } => {
            let (v, pass) = cmd_check(&spec)?;
            write_json(&dir, "check.json", &v)?;
            println!("check: {}", if pass { "pass" } else { "fail" });
            Ok(if pass { EXIT_PASS } else { EXIT_HYPOTHESIS })
        }
        Command::Expand { .. } => {
            let (v, _) = cmd_expand(&spec)?;
            write_json(&dir, "expand.json", &v)?;
            println!("expand: {} run(s)", v["runs"].as_array().map_or(0, Vec::len));
            Ok(EXIT_PASS)
        }
        Command::Verify { .. } => {
            let (v, report) = cmd_verify(&spec)?;
            write_json(&dir, "verify.json", &v)?;
            let f = fs::File::create(dir.join("verify.csv")).map_err(|e| CliError::Output(e.to_string()))?;
            report.write_csv(f).map_err(|e| CliError::Output(e.to_string()))?;
            println!("verify: {}", if report.verdict { "pass" } else { "fail" });
            Ok(if report.verdict { EXIT_PASS } else { EXIT_VERIFY_FAIL })
        }
        Command::Loud { .. } => {
            let (v, report) = cmd_loud(&spec)?;
            write_json(&dir, "loud.json", &v)?;
            let f = fs::File::create(dir.join("loud.csv")).map_err(|e| CliError::Output(e.to_string()))?;
            report.write_csv(f).map_err(|e| CliError::Output(e.to_string()))?;
            let pass = v["pass"].as_bool().unwrap_or(false);
            println!("loud: {}", if pass { "pass" } else { "fail" });
            Ok(if pass { EXIT_PASS } else { EXIT_VERIFY_FAIL })
        }
    }
}

/// Parses `args`, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    configure_threads(cli.threads);
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("dulackit: {e}");
            e.exit_code()
        }
    }
}
