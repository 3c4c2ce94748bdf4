//! Run files: a single JSON document naming a command, its parameters and
//! an output directory. Results go to `results.csv` and `summary.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::constants::{eval_constants, SolverParams};
use crate::error::{Error, Result};
use crate::estimate::with_workers;
use crate::experiments::{
    counterexample_sweep, records_to_csv, seminorm_convergence, stability_sweep, summarize_counterexample,
    summarize_stability,
};
use crate::geometry::{build_domain, critical_plane, perimeter_2d, rho_deviation, DomainSpec, HyperplaneFrame, ShapeSpec};
use crate::verify::{
    check_closure, check_geometry_bounds, check_growth, check_hopf, check_kernel_sandwich, check_poisson_mass,
    check_symmetry_theorem, check_torsion_normalization, harnack_on_witness, symmetry_converse_evidence, BallSet,
    BoundConstants, CheckReport, CheckStatus,
};
use crate::wos::{estimate_u, WalkConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Solve,
    Verify,
    Stability,
    Counterexample,
    Geometry,
}

impl std::str::FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown command '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub n: usize,
    pub s: f64,
}

impl Default for ParamsSpec {
    fn default() -> Self {
        Self { n: 2, s: 0.5 }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must match the command given on the command line when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default)]
    pub params: ParamsSpec,
    /// Domain for solve, verify and geometry; the unit ball when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeSpec>,
    /// `base_seed` is replaced by `seed`.
    #[serde(default)]
    pub walk: WalkConfig,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,

    /// solve: evaluation points; the origin when absent.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    /// verify, stability: thickening radius `R` of the default witness and
    /// of the perturbed balls.
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// verify: direction of the reflection used for the Harnack and Hopf
    /// witness; the diagonal when absent.
    #[serde(default)]
    pub witness_direction: Vec<f64>,
    #[serde(default = "default_eps")]
    pub eps_list: Vec<f64>,
    #[serde(default = "default_mode")]
    pub mode: u32,
    #[serde(default = "default_l")]
    pub l_list: Vec<f64>,
    #[serde(default = "default_m")]
    pub m_boundary: usize,
    /// stability: also report the seminorm at these boundary sample sizes
    /// for the largest `ε`.
    #[serde(default)]
    pub convergence_sizes: Vec<usize>,
    #[serde(default = "default_growth")]
    pub growth_points: usize,
    #[serde(default = "default_triples")]
    pub sandwich_triples: usize,
    #[serde(default = "default_samples")]
    pub geometry_samples: u64,
    #[serde(default = "default_trials")]
    pub closure_trials: u64,
}

fn default_radius() -> f64 {
    0.5
}
fn default_eps() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.02]
}
fn default_mode() -> u32 {
    2
}
fn default_l() -> Vec<f64> {
    vec![4.0, 8.0, 16.0, 32.0]
}
fn default_m() -> usize {
    64
}
fn default_growth() -> usize {
    1000
}
fn default_triples() -> usize {
    10_000
}
fn default_samples() -> u64 {
    200_000
}
fn default_trials() -> u64 {
    10_000
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {} column {}: {e}", e.line(), e.column())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn solver_params(&self) -> Result<SolverParams> {
        eval_constants(self.params.n, self.params.s).map_err(|e| Error::Config(format!("params: {e}")))
    }

    pub fn walk_config(&self) -> WalkConfig {
        self.walk.with_seed(self.seed)
    }

    pub fn shape_spec(&self) -> ShapeSpec {
        self.shape.clone().unwrap_or_else(|| ShapeSpec::ball(&vec![0.0; self.params.n], 1.0))
    }

    /// Fills defaults that depend on other fields.
    pub fn resolved(&self, command: Command) -> Self {
        let mut c = self.clone();
        c.command = Some(command);
        c.walk.base_seed = c.seed;
        if c.shape.is_none() {
            c.shape = Some(self.shape_spec());
        }
        if command == Command::Solve && c.points.is_empty() {
            c.points = vec![vec![0.0; c.params.n]];
        }
        if c.witness_direction.is_empty() {
            c.witness_direction = vec![1.0; c.params.n];
        }
        c
    }

    /// Every range check that can fail, before any computation.
    pub fn validate(&self, command: Command) -> Result<()> {
        let field = |name: &str, e: Error| Error::Config(format!("{name}: {e}"));
        if let Some(c) = self.command {
            if c != command {
                return Err(Error::Config(format!("command: config names {c:?} but {command:?} was requested")));
            }
        }
        let params = self.solver_params()?;
        self.walk.validate().map_err(|e| field("walk", e))?;
        let n = params.n();
        match command {
            Command::Solve | Command::Verify | Command::Geometry => {
                let d = build_domain(&self.shape_spec()).map_err(|e| field("shape", e))?;
                if d.dim() != n {
                    return Err(Error::Config(format!("shape: dimension {} does not match params.n = {n}", d.dim())));
                }
                if command == Command::Solve && self.points.iter().any(|p| p.len() != n) {
                    return Err(Error::Config(format!("points: every point needs {n} coordinates")));
                }
                if command == Command::Verify {
                    if !(self.radius > 0.0) {
                        return Err(Error::Config("radius: must be positive".into()));
                    }
                    if !self.witness_direction.is_empty() && self.witness_direction.len() != n {
                        return Err(Error::Config(format!("witness_direction: needs {n} coordinates")));
                    }
                    if self.growth_points == 0 || self.sandwich_triples == 0 {
                        return Err(Error::Config("growth_points and sandwich_triples must be positive".into()));
                    }
                }
                if self.geometry_samples == 0 || self.closure_trials == 0 {
                    return Err(Error::Config("geometry_samples and closure_trials must be positive".into()));
                }
            }
            Command::Stability => {
                if n != 2 {
                    return Err(Error::Config("params.n: the stability sweep is planar".into()));
                }
                if !(self.radius > 0.0) {
                    return Err(Error::Config("radius: must be positive".into()));
                }
                if self.eps_list.is_empty() || self.eps_list.windows(2).any(|w| w[0] < w[1]) {
                    return Err(Error::Config("eps_list: must be non-empty and sorted descending".into()));
                }
                if let Some(e) = self.eps_list.iter().find(|&&e| !(e >= 0.0 && e * (self.mode as f64) < 1.0)) {
                    return Err(Error::Config(format!("eps_list: {e} violates 0 ≤ eps·mode < 1")));
                }
                if self.mode == 0 {
                    return Err(Error::Config("mode: must be at least 1".into()));
                }
                for &eps in &self.eps_list {
                    build_domain(&ShapeSpec::perturbed(1.0, eps, self.mode).plus_ball(self.radius))
                        .map_err(|e| field("eps_list", e))?;
                }
                if self.m_boundary < 2 || self.convergence_sizes.iter().any(|&m| m < 2) {
                    return Err(Error::Config("m_boundary: need at least 2 points".into()));
                }
            }
            Command::Counterexample => {
                if self.l_list.is_empty() || self.l_list.iter().any(|&l| !(l >= 4.0)) {
                    return Err(Error::Config("l_list: every L must be at least 4".into()));
                }
                if self.m_boundary < 4 {
                    return Err(Error::Config("m_boundary: need at least 4 points".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub csv: String,
    pub summary: Value,
    pub checks: Vec<CheckReport>,
}

impl RunOutcome {
    /// Every asserted check passed; inconclusive ones do not count.
    pub fn success(&self) -> bool {
        !self.checks.iter().any(CheckReport::blocks)
    }
}

fn verdict(name: &str, ok: bool, details: Value) -> CheckReport {
    let mut r = CheckReport::leq(name, if ok { 0.0 } else { 1.0 }, 0.0, 0.0);
    if let Value::Object(m) = details {
        r.details.extend(m);
    }
    r
}

fn fmt_point(p: &[f64]) -> String {
    p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn run_solve(cfg: &RunConfig, params: &SolverParams) -> Result<RunOutcome> {
    let d = build_domain(&cfg.shape_spec())?;
    let walk = cfg.walk_config();
    let mut csv = String::from("point,mean,stderr,n_samples,max_steps_hit\n");
    let mut rows = Vec::new();
    for p in &cfg.points {
        let e = estimate_u(p, &d, params, &walk)?;
        eprintln!("u({}) = {} ± {}", fmt_point(p), e.mean, e.stderr);
        csv.push_str(&format!("{},{},{},{},{}\n", fmt_point(p), e.mean, e.stderr, e.n_samples, e.max_steps_hit));
        rows.push(json!({ "point": p, "estimate": e }));
    }
    Ok(RunOutcome { csv, summary: json!({ "estimates": rows }), checks: Vec::new() })
}

/// Harnack and Hopf witness on `d` reflected in its critical plane along
/// `e`; `B` and `K` sit on the normal line through the plane's foot, inside
/// the reflected cap.
fn witness_checks(
    d: &DomainSpec,
    e: &[f64],
    params: &SolverParams,
    walk: &WalkConfig,
) -> Result<Vec<CheckReport>> {
    let frame = match critical_plane(d, e) {
        Ok(f) => f,
        Err(Error::Bracket(why)) => {
            let r = CheckReport::leq("harnack", 0.0, 0.0, 0.0).with_detail("vacuous", json!(why));
            return Ok(vec![r]);
        }
        Err(e) => return Err(e),
    };
    let mut harnack = harnack_on_witness(d, &frame, params, walk, 8, 4)?;
    harnack.name = "harnack".into();
    let foot: Vec<f64> = frame.e.iter().map(|v| v * frame.lambda).collect();
    let h = -d.sdf(&foot);
    let at = |t: f64| -> Vec<f64> { foot.iter().zip(&frame.e).map(|(c, v)| c - t * v).collect() };
    let ball = BallSet { center: at(0.4 * h), radius: (d.interior_radius() / 8.0).min(0.1 * h) };
    let k_set = BallSet { center: at(0.7 * h), radius: 0.08 * h };
    let hopf = check_hopf(params, d, &ball, &k_set, &frame, walk)?;
    Ok(vec![harnack, hopf.with_detail("lambda", json!(frame.lambda))])
}

fn run_verify(cfg: &RunConfig, params: &SolverParams) -> Result<RunOutcome> {
    let walk = cfg.walk_config();
    let spec = cfg.shape_spec();
    let d = build_domain(&spec)?;
    let mut checks = vec![
        check_torsion_normalization(params),
        check_poisson_mass(params),
        check_kernel_sandwich(params, cfg.sandwich_triples, cfg.seed),
    ];
    eprintln!("verify: witness checks");
    let direction = if cfg.witness_direction.is_empty() { vec![1.0; params.n()] } else { cfg.witness_direction.clone() };
    checks.extend(witness_checks(&d, &direction, params, &walk)?);
    eprintln!("verify: geometry bounds");
    match check_geometry_bounds(&d, cfg.geometry_samples, cfg.seed) {
        Ok(r) => checks.extend(r),
        Err(Error::Unsupported(why)) | Err(Error::Precondition(why)) => {
            checks.push(CheckReport::leq("geometry bounds", 0.0, 0.0, 0.0).skipped(&why))
        }
        Err(e) => return Err(e),
    }
    if let ShapeSpec::Minkowski { inner, radius } = &spec {
        checks.push(check_closure(inner, *radius, cfg.closure_trials, cfg.seed)?);
    }
    eprintln!("verify: growth");
    checks.push(check_growth(&d, params, &walk, cfg.growth_points)?);
    eprintln!("verify: symmetry");
    checks.push(check_symmetry_theorem(params, 0.3, &walk)?);
    if params.n() == 2 {
        checks.push(symmetry_converse_evidence(params, 0.1, cfg.radius, &walk)?);
    }
    let constants = BoundConstants::new(params, d.interior_radius(), d.diameter(), d.volume().mean)?;
    Ok(RunOutcome {
        csv: checks_to_csv(&checks),
        summary: json!({ "bound_constants": constants }),
        checks,
    })
}

fn checks_to_csv(checks: &[CheckReport]) -> String {
    let mut out = String::from("name,status,passed,lhs,rhs,margin,asserted\n");
    for c in checks {
        let status = match c.status {
            CheckStatus::Passed => "passed",
            CheckStatus::Failed => "failed",
            CheckStatus::Inconclusive => "inconclusive",
        };
        out.push_str(&format!("{},{status},{},{},{},{},{}\n", c.name, c.passed, c.lhs, c.rhs, c.margin, c.asserted));
    }
    out
}

fn run_stability(cfg: &RunConfig, params: &SolverParams) -> Result<RunOutcome> {
    let walk = cfg.walk_config();
    let records = stability_sweep(&cfg.eps_list, cfg.mode, cfg.radius, params, &walk, cfg.m_boundary)?;
    let summary = summarize_stability(&records, params.s());
    let mut extra = json!({ "stability": summary });
    if !cfg.convergence_sizes.is_empty() {
        let conv = seminorm_convergence(cfg.eps_list[0], cfg.mode, cfg.radius, params, &walk, &cfg.convergence_sizes)?;
        let rows: Vec<Value> = conv.iter().map(|(m, v, f)| json!({ "m": m, "seminorm": v, "noise_floor": f })).collect();
        extra["convergence"] = json!(rows);
    }
    let checks = vec![
        verdict("seminorm decreasing", summary.seminorm_decreasing, json!({})),
        verdict("deviation decreasing", summary.rho_decreasing, json!({})),
        verdict(
            "ratio band",
            summary.ratio_band.is_some_and(|b| b <= 10.0),
            json!({ "ratio_band": summary.ratio_band, "significant_records": summary.significant_records }),
        ),
    ];
    extra["records"] = json!(records);
    Ok(RunOutcome { csv: records_to_csv(&records), summary: extra, checks })
}

fn run_counterexample(cfg: &RunConfig, params: &SolverParams) -> Result<RunOutcome> {
    let walk = cfg.walk_config();
    let records = counterexample_sweep(&cfg.l_list, params, &walk, cfg.m_boundary)?;
    let summary = summarize_counterexample(&records, params);
    let checks = vec![
        verdict(
            "decay slope",
            summary.slope_within_tolerance,
            json!({ "fitted_slope": summary.fitted_slope, "target_slope": summary.target_slope, "tolerance": 0.5 }),
        ),
        verdict("ratio increasing", summary.ratio_increasing, json!({})),
        verdict("deviation lower bound", summary.rho_lower_bound_holds, json!({})),
        verdict("uniform bound", summary.boundedness_holds, json!({})),
    ];
    Ok(RunOutcome {
        csv: records_to_csv(&records),
        summary: json!({ "counterexample": summary, "records": records }),
        checks,
    })
}

fn run_geometry(cfg: &RunConfig) -> Result<RunOutcome> {
    let spec = cfg.shape_spec();
    let d = build_domain(&spec)?;
    let n = d.dim();
    let mut rows: Vec<(String, f64)> = vec![
        ("diameter".into(), d.diameter()),
        ("interior_radius".into(), d.interior_radius()),
        ("volume".into(), d.volume().mean),
        ("volume_stderr".into(), d.volume().stderr),
        ("rho".into(), rho_deviation(&d)?),
    ];
    if n == 2 {
        if let Ok(p) = perimeter_2d(&d) {
            rows.push(("perimeter".into(), p));
        }
    }
    let mut planes = Vec::new();
    for i in 0..n {
        let e = crate::vec::unit(n, i);
        match critical_plane(&d, &e) {
            Ok(f) => {
                rows.push((format!("lambda_axis_{i}"), f.lambda));
                planes.push(f);
            }
            Err(Error::Bracket(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let mut checks = match check_geometry_bounds(&d, cfg.geometry_samples, cfg.seed) {
        Ok(r) => r,
        Err(Error::Unsupported(why)) | Err(Error::Precondition(why)) => {
            vec![CheckReport::leq("geometry bounds", 0.0, 0.0, 0.0).skipped(&why)]
        }
        Err(e) => return Err(e),
    };
    if let ShapeSpec::Minkowski { inner, radius } = &spec {
        checks.push(check_closure(inner, *radius, cfg.closure_trials, cfg.seed)?);
    }
    let mut csv = String::from("quantity,value\n");
    for (k, v) in &rows {
        csv.push_str(&format!("{k},{v}\n"));
    }
    let quantities: serde_json::Map<String, Value> = rows.into_iter().map(|(k, v)| (k, json!(v))).collect();
    let planes: Vec<&HyperplaneFrame> = planes.iter().collect();
    Ok(RunOutcome { csv, summary: json!({ "quantities": quantities, "critical_planes": planes }), checks })
}

/// Validates, runs and writes `results.csv` and `summary.json`.
pub fn run(command: Command, cfg: &RunConfig, workers: Option<usize>) -> Result<RunOutcome> {
    cfg.validate(command)?;
    let resolved = cfg.resolved(command);
    let params = resolved.solver_params()?;
    let job = || match command {
        Command::Solve => run_solve(&resolved, &params),
        Command::Verify => run_verify(&resolved, &params),
        Command::Stability => run_stability(&resolved, &params),
        Command::Counterexample => run_counterexample(&resolved, &params),
        Command::Geometry => run_geometry(&resolved),
    };
    let mut outcome = match workers {
        Some(w) => with_workers(w, job),
        None => job(),
    }?;
    let inconclusive: Vec<&str> = outcome
        .checks
        .iter()
        .filter(|c| c.status == CheckStatus::Inconclusive)
        .map(|c| c.name.as_str())
        .collect();
    let mut summary = json!({
        "command": command,
        "seed": resolved.seed,
        "config": resolved,
        "checks": outcome.checks,
        "inconclusive": inconclusive,
        "passed": outcome.success(),
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut summary, outcome.summary.clone()) {
        dst.extend(src);
    }
    outcome.summary = summary;
    fs::create_dir_all(&resolved.output_dir)
        .map_err(|e| Error::Io(format!("{}: {e}", resolved.output_dir.display())))?;
    let write = |name: &str, text: &str| {
        let p = resolved.output_dir.join(name);
        fs::write(&p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
    };
    write("results.csv", &outcome.csv)?;
    let text = serde_json::to_string_pretty(&outcome.summary).map_err(|e| Error::Io(e.to_string()))?;
    write("summary.json", &(text + "\n"))?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = RunConfig::parse("{\n  \"params\": {\"n\": 2, \"s\": 0.5},\n  \"walks\": 10\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("walks"), "{msg}");
        assert!(RunConfig::parse("{\"params\": {\"n\": 2, \"s\": 0.5, \"t\": 1}}").is_err());
    }

    #[test]
    fn ranges_checked_before_running() {
        let c = RunConfig::parse(r#"{"params": {"n": 2, "s": 1.5}}"#).unwrap();
        assert!(matches!(c.validate(Command::Solve), Err(Error::Config(_))));
        let c = RunConfig::parse(r#"{"walk": {"step_shrink": 0}}"#).unwrap();
        assert!(c.validate(Command::Solve).is_err());
        let c = RunConfig::parse(r#"{"eps_list": [0.05, 0.1]}"#).unwrap();
        assert!(c.validate(Command::Stability).is_err());
        let c = RunConfig::parse(r#"{"l_list": [2]}"#).unwrap();
        assert!(c.validate(Command::Counterexample).is_err());
        let c = RunConfig::parse(r#"{"command": "verify"}"#).unwrap();
        assert!(c.validate(Command::Solve).is_err());
        let c = RunConfig::parse(r#"{"params": {"n": 3, "s": 0.5}, "shape": {"kind": "ball", "center": [0, 0], "radius": 1}}"#).unwrap();
        assert!(c.validate(Command::Geometry).is_err());
    }

    #[test]
    fn resolved_config_fills_defaults() {
        let c = RunConfig::parse(r#"{"seed": 9}"#).unwrap().resolved(Command::Solve);
        assert_eq!(c.points, vec![vec![0.0, 0.0]]);
        assert_eq!(c.walk.base_seed, 9);
        assert_eq!(c.command, Some(Command::Solve));
        let back = RunConfig::parse(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn command_names() {
        assert_eq!("counterexample".parse::<Command>().unwrap(), Command::Counterexample);
        assert!("plot".parse::<Command>().is_err());
    }
}
