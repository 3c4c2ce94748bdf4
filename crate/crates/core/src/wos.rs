//! Walk-on-spheres estimators for the torsion function `u`, its reflected
//! differences, and its Lipschitz seminorm on a parallel surface.
//!
//! Each walk recenters at every step: from `p` it scores `γ r^{2s}` (the
//! torsion function of `B_r(p)` at its center) with `r` a fraction of the
//! distance to the boundary, then jumps to an exact exit point of that ball.
//! Coupled walks replay one stream of `(radius factor, direction)` draws,
//! optionally mirroring the direction.

use serde::{Deserialize, Serialize};

use crate::constants::{poisson_kernel, psi_ball, unit_ball_volume, SolverParams};
use crate::error::{Error, Result};
use crate::estimate::{reduce_blocks, CoMoments, Estimate, Moments};
use crate::geometry::{build_domain, DomainSpec, HyperplaneFrame, ShapeSpec};
use crate::rng::{derive_seed_str, stream, Stream};
use crate::sampler::ExitLaw;
use crate::vec::{dist, dot};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkConfig {
    pub n_walks: u64,
    pub max_steps: u64,
    /// Ball radius as a fraction of the distance to the boundary.
    pub step_shrink: f64,
    pub base_seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self { n_walks: 100_000, max_steps: 10_000, step_shrink: 1.0, base_seed: 0 }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_walks < 1 {
            return Err(Error::Parameter("n_walks must be at least 1".into()));
        }
        if self.max_steps < 1 {
            return Err(Error::Parameter("max_steps must be at least 1".into()));
        }
        if !(self.step_shrink > 0.0 && self.step_shrink <= 1.0) {
            return Err(Error::Parameter(format!("step_shrink must lie in (0, 1], got {}", self.step_shrink)));
        }
        Ok(())
    }

    pub fn with_walks(self, n_walks: u64) -> Self {
        Self { n_walks, ..self }
    }

    pub fn with_seed(self, base_seed: u64) -> Self {
        Self { base_seed, ..self }
    }
}

/// One walker of a coupled group.
struct Walker<'a> {
    domain: &'a DomainSpec,
    pos: Vec<f64>,
    /// Reflect every jump direction across the plane with this normal.
    mirror: Option<&'a [f64]>,
    score: f64,
    alive: bool,
    radius: f64,
}

impl<'a> Walker<'a> {
    fn new(domain: &'a DomainSpec, start: &[f64], mirror: Option<&'a [f64]>) -> Self {
        Self { domain, pos: start.to_vec(), mirror, score: 0.0, alive: true, radius: 0.0 }
    }
}

struct Stepper {
    law: ExitLaw,
    gamma: f64,
    two_s: f64,
    shrink: f64,
    max_steps: u64,
}

impl Stepper {
    fn new(params: &SolverParams, cfg: &WalkConfig) -> Self {
        Self {
            law: ExitLaw::new(params),
            gamma: params.gamma_ns(),
            two_s: 2.0 * params.s(),
            shrink: cfg.step_shrink,
            max_steps: cfg.max_steps,
        }
    }

    /// Runs all walkers on one shared stream of draws until every walker has
    /// left its domain; returns whether the step limit cut the group off.
    fn run(&self, walkers: &mut [Walker], rng: &mut Stream, dir: &mut [f64]) -> bool {
        for _ in 0..self.max_steps {
            let mut any = false;
            for w in walkers.iter_mut().filter(|w| w.alive) {
                let q = w.domain.query(&w.pos);
                if !q.inside {
                    w.alive = false;
                    continue;
                }
                w.radius = self.shrink * q.dist_boundary;
                w.score += self.gamma * w.radius.powf(self.two_s);
                any = true;
            }
            if !any {
                return false;
            }
            let factor = self.law.draw(rng, dir);
            for w in walkers.iter_mut().filter(|w| w.alive) {
                let step = w.radius * factor;
                match w.mirror {
                    None => w.pos.iter_mut().zip(dir.iter()).for_each(|(p, d)| *p += step * d),
                    Some(e) => {
                        let t = 2.0 * dot(dir, e);
                        w.pos.iter_mut().zip(dir.iter()).zip(e).for_each(|((p, d), ei)| *p += step * (d - t * ei));
                    }
                }
            }
        }
        walkers.iter().any(|w| w.alive && w.domain.contains(&w.pos))
    }
}

fn check_dim(d: &DomainSpec, params: &SolverParams, x: &[f64]) -> Result<()> {
    if d.dim() != params.n() || x.len() != params.n() {
        return Err(Error::Parameter(format!(
            "dimension mismatch: domain {}, parameters {}, point {}",
            d.dim(),
            params.n(),
            x.len()
        )));
    }
    Ok(())
}

/// Walk-on-spheres estimate of `u(x)`. Exactly zero outside Ω.
pub fn estimate_u(x: &[f64], d: &DomainSpec, params: &SolverParams, cfg: &WalkConfig) -> Result<Estimate> {
    cfg.validate()?;
    check_dim(d, params, x)?;
    if !d.contains(x) {
        return Ok(Estimate { mean: 0.0, stderr: 0.0, n_samples: cfg.n_walks, max_steps_hit: 0 });
    }
    let stepper = Stepper::new(params, cfg);
    let m = reduce_blocks(
        cfg.n_walks,
        |a, b| {
            let mut acc = Moments::default();
            let mut dir = vec![0.0; params.n()];
            for i in a..b {
                let mut rng = stream(cfg.base_seed, i);
                let mut w = [Walker::new(d, x, None)];
                if stepper.run(&mut w, &mut rng, &mut dir) {
                    acc.truncated += 1;
                }
                acc.push(w[0].score);
            }
            acc
        },
        Moments::merge,
    )
    .unwrap_or_default();
    Ok(m.to_estimate())
}

/// Estimates of `u(x)`, `u(Q x)` and their difference from mirror-coupled
/// walks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledEstimate {
    pub difference: Estimate,
    pub at_x: Estimate,
    pub at_reflection: Estimate,
}

/// `v(x) = u(x) - u(Q x)` by mirror coupling: the walk from `Q x` replays
/// the draws of the walk from `x` with every direction reflected, so on a
/// domain symmetric about the plane the two walks are mirror images and
/// every paired difference vanishes.
pub fn estimate_v_coupled(
    x: &[f64],
    frame: &HyperplaneFrame,
    d: &DomainSpec,
    params: &SolverParams,
    cfg: &WalkConfig,
) -> Result<CoupledEstimate> {
    cfg.validate()?;
    check_dim(d, params, x)?;
    let xr = frame.reflect(x);
    let stepper = Stepper::new(params, cfg);
    let c = reduce_blocks(
        cfg.n_walks,
        |a, b| {
            let mut rows = Vec::with_capacity((b - a) as usize);
            let mut truncated = 0;
            let mut dir = vec![0.0; params.n()];
            for i in a..b {
                let mut rng = stream(cfg.base_seed, i);
                let mut w = [Walker::new(d, x, None), Walker::new(d, &xr, Some(&frame.e))];
                if stepper.run(&mut w, &mut rng, &mut dir) {
                    truncated += 1;
                }
                rows.push(vec![w[0].score, w[1].score]);
            }
            CoMoments::from_rows(&rows, truncated)
        },
        CoMoments::merge,
    )
    .unwrap_or_else(|| CoMoments::new(2));
    Ok(CoupledEstimate { difference: c.difference(0, 1), at_x: c.component(0), at_reflection: c.component(1) })
}

/// Seminorm estimate on a finite boundary sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormEstimate {
    /// `max |û(x) - û(y)| / |x - y|` over admissible pairs.
    pub value: f64,
    /// `max 3 σ(û(x) - û(y)) / |x - y|` over admissible pairs.
    pub noise_floor: f64,
    pub pairs: usize,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<Estimate>,
    pub max_steps_hit: u64,
}

impl SeminormEstimate {
    pub fn significant(&self) -> bool {
        self.value > self.noise_floor
    }
}

/// Max ratio and noise floor over pairs at least `min_gap` apart; `diff`
/// gives the paired difference estimate for indices `(i, j)`.
fn pair_maxima<F: Fn(usize, usize) -> Estimate>(points: &[Vec<f64>], min_gap: f64, diff: F) -> (f64, f64, usize) {
    let mut value: f64 = 0.0;
    let mut floor: f64 = 0.0;
    let mut pairs = 0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let g = dist(&points[i], &points[j]);
            if g < min_gap || g == 0.0 {
                continue;
            }
            let e = diff(i, j);
            value = value.max(e.mean.abs() / g);
            floor = floor.max(3.0 * e.stderr / g);
            pairs += 1;
        }
    }
    (value, floor, pairs)
}

/// Ball whose torsion function serves as a control variate for `G + B_R`:
/// the unperturbed shape for radial graphs, none otherwise.
fn control_ball(inner: &DomainSpec, radius: f64) -> Option<DomainSpec> {
    match inner.spec() {
        ShapeSpec::PerturbedBall2d { a, .. } => build_domain(&ShapeSpec::ball(&[0.0, 0.0], a + radius)).ok(),
        _ => None,
    }
}

/// `[u]_{∂G}` for `Ω = G + B_R` from `m_boundary` points of `∂G`. All
/// points share walk streams by walk index, so differences between points
/// carry only the noise of diverging walks. For radial graphs each walk is
/// also paired with a walk in the unperturbed ball, whose torsion function
/// is known, and only the difference is sampled.
pub fn lipschitz_seminorm(
    inner: &DomainSpec,
    radius: f64,
    params: &SolverParams,
    cfg: &WalkConfig,
    m_boundary: usize,
) -> Result<SeminormEstimate> {
    cfg.validate()?;
    if m_boundary < 2 {
        return Err(Error::Parameter(format!("need at least 2 boundary points, got {m_boundary}")));
    }
    let omega = build_domain(&inner.spec().clone().plus_ball(radius))?;
    let points = inner.boundary_samples(m_boundary);
    for p in &points {
        check_dim(&omega, params, p)?;
    }
    let control = control_ball(inner, radius);
    let exact: Vec<f64> = match &control {
        Some(b) => {
            let r = b.diameter() / 2.0;
            points.iter().map(|p| psi_ball(p, &[0.0, 0.0], r, params)).collect()
        }
        None => vec![0.0; points.len()],
    };
    let stepper = Stepper::new(params, cfg);
    let m = points.len();
    let c = reduce_blocks(
        cfg.n_walks,
        |a, b| {
            let mut rows = Vec::with_capacity((b - a) as usize);
            let mut truncated = 0;
            let mut dir = vec![0.0; params.n()];
            for i in a..b {
                let mut walkers: Vec<Walker> = points.iter().map(|p| Walker::new(&omega, p, None)).collect();
                if let Some(ball) = &control {
                    walkers.extend(points.iter().map(|p| Walker::new(ball, p, None)));
                }
                let mut rng = stream(cfg.base_seed, i);
                if stepper.run(&mut walkers, &mut rng, &mut dir) {
                    truncated += 1;
                }
                let row: Vec<f64> = (0..m)
                    .map(|j| match control {
                        Some(_) => exact[j] + walkers[j].score - walkers[m + j].score,
                        None => walkers[j].score,
                    })
                    .collect();
                rows.push(row);
            }
            CoMoments::from_rows(&rows, truncated)
        },
        CoMoments::merge,
    )
    .unwrap_or_else(|| CoMoments::new(m));
    let (value, noise_floor, pairs) = pair_maxima(&points, inner.diameter() / 100.0, |i, j| c.difference(i, j));
    Ok(SeminormEstimate {
        value,
        noise_floor,
        pairs,
        values: (0..m).map(|j| c.component(j)).collect(),
        points,
        max_steps_hit: c.truncated,
    })
}

/// `[u]_{∂G}` for two remote balls: `G = B_{1/4}(±L e₁)`, `Ω = B_1(±L e₁)`.
///
/// On the left ball `u = ψ + w` with `ψ` the single-ball torsion function,
/// constant on the left sphere, and `w(x) = ∫_{right ball} P(x, y) u(y) dy`
/// with `P` the Poisson kernel of the left ball. The integral is sampled
/// with points `y` uniform in the right ball shared by all `x`; each `u(y)`
/// is `ψ(y)` plus a walk in Ω minus a walk in the right ball alone on the
/// same stream, which differ only after a jump into the left ball. Values
/// on the right sphere follow by mirror symmetry.
pub fn remote_balls_seminorm(
    half_distance: f64,
    params: &SolverParams,
    cfg: &WalkConfig,
    m_boundary: usize,
) -> Result<SeminormEstimate> {
    cfg.validate()?;
    let n = params.n();
    let l = half_distance;
    if !(l > 1.0) {
        return Err(Error::Parameter(format!("balls overlap for L = {l}")));
    }
    if m_boundary < 4 {
        return Err(Error::Parameter(format!("need at least 4 boundary points, got {m_boundary}")));
    }
    let mut left_c = vec![0.0; n];
    left_c[0] = -l;
    let mut right_c = vec![0.0; n];
    right_c[0] = l;
    let g = ShapeSpec::union(vec![left_c.clone(), right_c.clone()], vec![0.25, 0.25]);
    let inner = build_domain(&g)?;
    let omega = build_domain(&g.clone().plus_ball(0.75))?;
    let right = build_domain(&ShapeSpec::ball(&right_c, 1.0))?;

    let points = inner.boundary_samples(m_boundary);
    let mirror = HyperplaneFrame::new(&crate::vec::unit(n, 0), 0.0, f64::INFINITY)?;
    // every point maps to a left-sphere point; components are left points
    let left_idx: Vec<usize> = (0..points.len()).filter(|&i| points[i][0] < 0.0).collect();
    let component: Vec<usize> = points
        .iter()
        .map(|p| {
            let q = if p[0] < 0.0 { p.clone() } else { mirror.reflect(p) };
            (0..left_idx.len())
                .min_by(|&a, &b| dist(&points[left_idx[a]], &q).total_cmp(&dist(&points[left_idx[b]], &q)))
                .unwrap()
        })
        .collect();
    for (i, p) in points.iter().enumerate() {
        let q = if p[0] < 0.0 { p.clone() } else { mirror.reflect(p) };
        if dist(&points[left_idx[component[i]]], &q) > 1e-12 {
            return Err(Error::Precondition("boundary sample is not mirror symmetric".into()));
        }
    }
    let left_local: Vec<Vec<f64>> =
        left_idx.iter().map(|&i| points[i].iter().zip(&left_c).map(|(a, b)| a - b).collect()).collect();
    let volume = unit_ball_volume(n);
    let stepper = Stepper::new(params, cfg);
    let seed = derive_seed_str(cfg.base_seed, "remote-balls");
    let k = left_idx.len();
    let c = reduce_blocks(
        cfg.n_walks,
        |a, b| {
            let mut rows = Vec::with_capacity((b - a) as usize);
            let mut truncated = 0;
            let mut dir = vec![0.0; n];
            let mut y = vec![0.0; n];
            for i in a..b {
                let mut rng = stream(seed, i);
                // uniform point of the right ball by rejection from the cube
                loop {
                    for v in y.iter_mut() {
                        *v = 2.0 * rand::Rng::random::<f64>(&mut rng) - 1.0;
                    }
                    if crate::vec::norm2(&y) < 1.0 {
                        break;
                    }
                }
                let yr: Vec<f64> = y.iter().zip(&right_c).map(|(a, b)| a + b).collect();
                let mut w = [Walker::new(&omega, &yr, None), Walker::new(&right, &yr, None)];
                if stepper.run(&mut w, &mut rng, &mut dir) {
                    truncated += 1;
                }
                let u_y = psi_ball(&yr, &right_c, 1.0, params) + w[0].score - w[1].score;
                let y_local: Vec<f64> = yr.iter().zip(&left_c).map(|(a, b)| a - b).collect();
                let row: Vec<f64> = left_local
                    .iter()
                    .map(|x| volume * poisson_kernel(x, &y_local, 1.0, params).unwrap_or(0.0) * u_y)
                    .collect();
                rows.push(row);
            }
            CoMoments::from_rows(&rows, truncated)
        },
        CoMoments::merge,
    )
    .unwrap_or_else(|| CoMoments::new(k));
    let base = psi_ball(&points[left_idx[0]], &left_c, 1.0, params);
    let values: Vec<Estimate> = component
        .iter()
        .map(|&j| {
            let e = c.component(j);
            Estimate { mean: base + e.mean, ..e }
        })
        .collect();
    let (value, noise_floor, pairs) = pair_maxima(&points, inner.diameter() / 100.0, |i, j| {
        if component[i] == component[j] {
            Estimate::exact(0.0, c.n)
        } else {
            c.difference(component[i], component[j])
        }
    });
    Ok(SeminormEstimate { value, noise_floor, pairs, points, values, max_steps_hit: c.truncated })
}
