//! Stability sweep over perturbed balls and the remote-balls sweep.

use serde::{Deserialize, Serialize};

use crate::constants::SolverParams;
use crate::error::{Error, Result};
use crate::geometry::{build_domain, critical_plane, rho_deviation, DomainSpec, ShapeSpec};
use crate::rng::{derive_seed, derive_seed_str};
use crate::wos::{lipschitz_seminorm, remote_balls_seminorm, SeminormEstimate, WalkConfig};

pub const CSV_HEADER: &str = "shape_param,seminorm,noise_floor,rho,ratio,lambda_max,flag";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordFlag {
    Ok,
    /// Seminorm at or below its noise floor.
    Inconclusive,
}

impl RecordFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordFlag::Ok => "ok",
            RecordFlag::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    /// `ε` for the stability sweep, `L` for the remote balls.
    pub shape_param: f64,
    pub seminorm: f64,
    pub noise_floor: f64,
    pub rho: f64,
    /// `rho / seminorm^{1/(s+2)}`, or 0 for a vanishing seminorm.
    pub ratio: f64,
    /// Largest `|λ_e|` over the tested directions.
    pub lambda_max: f64,
    pub flag: RecordFlag,
    /// Largest estimated boundary value of `u`.
    pub max_boundary_u: f64,
    pub max_boundary_stderr: f64,
}

impl StabilityRecord {
    fn new(shape_param: f64, semi: &SeminormEstimate, rho: f64, lambda_max: f64, s: f64) -> Self {
        let top = semi.values.iter().max_by(|a, b| a.mean.total_cmp(&b.mean));
        Self {
            shape_param,
            seminorm: semi.value,
            noise_floor: semi.noise_floor,
            rho,
            ratio: if semi.value > 0.0 { rho / semi.value.powf(1.0 / (s + 2.0)) } else { 0.0 },
            lambda_max,
            flag: if semi.significant() { RecordFlag::Ok } else { RecordFlag::Inconclusive },
            max_boundary_u: top.map_or(0.0, |e| e.mean),
            max_boundary_stderr: top.map_or(0.0, |e| e.stderr),
        }
    }

    /// Strong enough to enter fits and ratio bands.
    pub fn fit_worthy(&self) -> bool {
        self.seminorm > 2.0 * self.noise_floor
    }
}

/// One CSV row per record under [`CSV_HEADER`], `\n` line endings.
pub fn records_to_csv(records: &[StabilityRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.shape_param,
            r.seminorm,
            r.noise_floor,
            r.rho,
            r.ratio,
            r.lambda_max,
            r.flag.as_str()
        ));
    }
    out
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let m = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn max_abs_lambda(d: &DomainSpec, directions: &[Vec<f64>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for e in directions {
        worst = worst.max(critical_plane(d, e)?.lambda.abs());
    }
    Ok(worst)
}

/// The coordinate axes plus 8 directions spread over the half circle; the
/// axes alone are symmetry axes of every even-mode perturbation.
pub fn planar_directions() -> Vec<Vec<f64>> {
    (0..8)
        .map(|j| {
            let t = std::f64::consts::PI * (j as f64 + 0.5) / 8.0;
            vec![t.cos(), t.sin()]
        })
        .chain([vec![1.0, 0.0], vec![0.0, 1.0]])
        .collect()
}

fn param_seed(base: u64, experiment: &str, param: f64) -> u64 {
    derive_seed(derive_seed_str(base, experiment), param.to_bits())
}

/// `G` = perturbed unit disk with mode `k`, `Ω = G + B_R`, for each `ε`.
pub fn stability_sweep(
    eps_list: &[f64],
    k: u32,
    radius: f64,
    params: &SolverParams,
    cfg: &WalkConfig,
    m_boundary: usize,
) -> Result<Vec<StabilityRecord>> {
    if params.n() != 2 {
        return Err(Error::Unsupported("perturbed balls are planar".into()));
    }
    if eps_list.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Parameter("eps list must be sorted in descending order".into()));
    }
    if let Some(e) = eps_list.iter().find(|&&e| !(e >= 0.0 && e * (k as f64) < 1.0)) {
        return Err(Error::Parameter(format!("perturbation eps = {e} needs 0 ≤ eps·k < 1")));
    }
    let directions = planar_directions();
    let mut out = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let inner = build_domain(&ShapeSpec::perturbed(1.0, eps, k))?;
        let omega = build_domain(&inner.spec().clone().plus_ball(radius))?;
        let run = cfg.clone().with_seed(param_seed(cfg.base_seed, "stability", eps));
        let semi = lipschitz_seminorm(&inner, radius, params, &run, m_boundary)?;
        let rho = rho_deviation(&omega)?;
        let lambda = max_abs_lambda(&omega, &directions)?;
        eprintln!("stability eps={eps}: seminorm {:.4e} (floor {:.4e}), rho {rho:.4e}", semi.value, semi.noise_floor);
        out.push(StabilityRecord::new(eps, &semi, rho, lambda, params.s()));
    }
    Ok(out)
}

/// Seminorm of the perturbed-ball configuration at several boundary sample
/// sizes: `(m, value, noise_floor)`.
pub fn seminorm_convergence(
    eps: f64,
    k: u32,
    radius: f64,
    params: &SolverParams,
    cfg: &WalkConfig,
    sizes: &[usize],
) -> Result<Vec<(usize, f64, f64)>> {
    let inner = build_domain(&ShapeSpec::perturbed(1.0, eps, k))?;
    let run = cfg.clone().with_seed(param_seed(cfg.base_seed, "stability", eps));
    sizes
        .iter()
        .map(|&m| lipschitz_seminorm(&inner, radius, params, &run, m).map(|e| (m, e.value, e.noise_floor)))
        .collect()
}

/// Two balls `B_{1/4}(±L e₁)` thickened by `3/4`, for each `L`.
pub fn counterexample_sweep(
    l_list: &[f64],
    params: &SolverParams,
    cfg: &WalkConfig,
    m_boundary: usize,
) -> Result<Vec<StabilityRecord>> {
    let n = params.n();
    if let Some(l) = l_list.iter().find(|&&l| !(l >= 4.0)) {
        return Err(Error::Parameter(format!("half distance L = {l} must be at least 4")));
    }
    let axes: Vec<Vec<f64>> = (0..n).map(|i| crate::vec::unit(n, i)).collect();
    let mut out = Vec::with_capacity(l_list.len());
    for &l in l_list {
        let mut left = vec![0.0; n];
        left[0] = -l;
        let mut right = vec![0.0; n];
        right[0] = l;
        let omega = build_domain(&ShapeSpec::union(vec![left, right], vec![0.25, 0.25]).plus_ball(0.75))?;
        let run = cfg.clone().with_seed(param_seed(cfg.base_seed, "counterexample", l));
        let semi = remote_balls_seminorm(l, params, &run, m_boundary)?;
        let rho = rho_deviation(&omega)?;
        let lambda = max_abs_lambda(&omega, &axes)?;
        eprintln!("counterexample L={l}: seminorm {:.4e} (floor {:.4e}), rho {rho:.4e}", semi.value, semi.noise_floor);
        out.push(StabilityRecord::new(l, &semi, rho, lambda, params.s()));
    }
    Ok(out)
}

/// Whether consecutive records decrease in `key`, skipping a step when its
/// later record is flagged inconclusive.
pub fn decreasing_up_to_noise(records: &[StabilityRecord], key: impl Fn(&StabilityRecord) -> f64) -> bool {
    records.windows(2).all(|w| key(&w[1]) <= key(&w[0]) || w[1].flag != RecordFlag::Ok)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub significant_records: usize,
    /// `max ratio / min ratio` over fit-worthy records.
    pub ratio_band: Option<f64>,
    pub seminorm_decreasing: bool,
    pub rho_decreasing: bool,
    /// Slope of `ln ρ` against `ln [u]`, compared with the bound's `1/(s+2)`.
    pub empirical_exponent: Option<f64>,
    pub bound_exponent: f64,
    pub passed: bool,
}

pub fn summarize_stability(records: &[StabilityRecord], s: f64) -> StabilitySummary {
    let good: Vec<&StabilityRecord> = records.iter().filter(|r| r.fit_worthy()).collect();
    let ratios: Vec<f64> = good.iter().map(|r| r.ratio).collect();
    let ratio_band = (!ratios.is_empty()).then(|| {
        let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
        hi / lo
    });
    let seminorm_decreasing = decreasing_up_to_noise(records, |r| r.seminorm);
    let rho_decreasing = records.windows(2).all(|w| w[1].rho <= w[0].rho);
    let pts: Vec<(f64, f64)> = good.iter().map(|r| (r.seminorm, r.rho)).collect();
    StabilitySummary {
        significant_records: good.len(),
        ratio_band,
        seminorm_decreasing,
        rho_decreasing,
        empirical_exponent: loglog_slope(&pts),
        bound_exponent: 1.0 / (s + 2.0),
        passed: seminorm_decreasing && rho_decreasing && ratio_band.is_some_and(|b| b <= 10.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSummary {
    pub fitted_slope: Option<f64>,
    pub target_slope: f64,
    pub slope_within_tolerance: bool,
    pub ratio_increasing: bool,
    pub rho_lower_bound_holds: bool,
    /// `max u on ∂G ≤ γ + 10 L^{-(n+2s)} + 3σ` for every record.
    pub boundedness_holds: bool,
    pub passed: bool,
}

pub fn summarize_counterexample(records: &[StabilityRecord], params: &SolverParams) -> CounterexampleSummary {
    let a = params.n() as f64 + 2.0 * params.s();
    let pts: Vec<(f64, f64)> = records.iter().filter(|r| r.fit_worthy()).map(|r| (r.shape_param, r.seminorm)).collect();
    let fitted_slope = loglog_slope(&pts);
    let slope_within_tolerance = fitted_slope.is_some_and(|m| (m + a).abs() <= 0.5);
    let ratio_increasing = records.windows(2).all(|w| w[1].ratio > w[0].ratio);
    let rho_lower_bound_holds = records.iter().all(|r| r.rho >= 2.0 * r.shape_param - 2.0);
    let boundedness_holds = records.iter().all(|r| {
        r.max_boundary_u <= params.gamma_ns() + 10.0 * r.shape_param.powf(-a) + 3.0 * r.max_boundary_stderr
    });
    CounterexampleSummary {
        fitted_slope,
        target_slope: -a,
        slope_within_tolerance,
        ratio_increasing,
        rho_lower_bound_holds,
        boundedness_holds,
        passed: slope_within_tolerance && ratio_increasing && rho_lower_bound_holds && boundedness_holds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::eval_constants;

    fn rec(p: f64, semi: f64, floor: f64, rho: f64) -> StabilityRecord {
        StabilityRecord {
            shape_param: p,
            seminorm: semi,
            noise_floor: floor,
            rho,
            ratio: rho / semi.powf(0.4),
            lambda_max: 0.0,
            flag: if semi > floor { RecordFlag::Ok } else { RecordFlag::Inconclusive },
            max_boundary_u: 0.0,
            max_boundary_stderr: 0.0,
        }
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [4.0, 8.0, 16.0, 32.0].iter().map(|&l: &f64| (l, 3.0 * l.powf(-3.0))).collect();
        assert!((loglog_slope(&pts).unwrap() + 3.0).abs() < 1e-12);
        assert!(loglog_slope(&pts[..1]).is_none());
        assert!(loglog_slope(&[(1.0, 0.0), (2.0, 1.0)]).is_none());
    }

    #[test]
    fn csv_layout() {
        let csv = records_to_csv(&[rec(0.1, 0.5, 0.01, 0.2), rec(0.05, 0.001, 0.01, 0.1)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0.1,0.5,0.01,0.2,"));
        assert!(lines[2].ends_with(",inconclusive"));
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn noisy_steps_do_not_break_monotonicity() {
        let r = vec![rec(0.2, 0.4, 0.01, 0.3), rec(0.1, 0.2, 0.01, 0.15), rec(0.05, 0.005, 0.01, 0.07), rec(0.02, 0.008, 0.01, 0.03)];
        assert!(decreasing_up_to_noise(&r, |x| x.seminorm));
        let s = summarize_stability(&r, 0.5);
        assert_eq!(s.significant_records, 2);
        assert!(s.rho_decreasing);
        let bad = vec![rec(0.2, 0.1, 0.01, 0.3), rec(0.1, 0.2, 0.01, 0.15)];
        assert!(!decreasing_up_to_noise(&bad, |x| x.seminorm));
    }

    #[test]
    fn sweep_argument_checks() {
        let p = eval_constants(2, 0.5).unwrap();
        let cfg = WalkConfig::default().with_walks(10);
        assert!(stability_sweep(&[0.05, 0.1], 2, 0.5, &p, &cfg, 8).is_err());
        assert!(stability_sweep(&[0.6], 2, 0.5, &p, &cfg, 8).is_err());
        assert!(counterexample_sweep(&[2.0], &p, &cfg, 8).is_err());
        assert!(stability_sweep(&[0.1], 2, 0.5, &eval_constants(3, 0.5).unwrap(), &cfg, 8).is_err());
    }

    #[test]
    fn ball_has_zero_deviation_and_tiny_seminorm() {
        let p = eval_constants(2, 0.5).unwrap();
        let cfg = WalkConfig::default().with_walks(2000);
        let r = stability_sweep(&[0.0], 2, 0.5, &p, &cfg, 16).unwrap();
        assert!(r[0].rho <= 1e-3, "{}", r[0].rho);
        assert!(r[0].lambda_max <= 1e-3 * 3.0);
        assert_eq!(r[0].flag, RecordFlag::Inconclusive);
    }

    #[test]
    fn remote_balls_deviation_grows_with_distance() {
        let p = eval_constants(2, 0.5).unwrap();
        let cfg = WalkConfig::default().with_walks(2000);
        let r = counterexample_sweep(&[4.0, 8.0], &p, &cfg, 16).unwrap();
        for x in &r {
            assert!(x.rho >= 2.0 * x.shape_param - 2.0);
            assert!(x.lambda_max < 1e-6);
        }
        assert!(summarize_counterexample(&r, &p).boundedness_holds);
    }
}
