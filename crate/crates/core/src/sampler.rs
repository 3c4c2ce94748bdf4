//! Exact exit positions of the isotropic 2s-stable process from a ball,
//! started at the center.
//!
//! At the center the Poisson kernel is radial with density proportional to
//! `(|y|² - r²)^{-s} |y|^{-n}`. The surface factor `|y|^{n-1}` cancels the
//! dimension, and substituting `v = r² / |y|²` turns the radial law into
//! `Beta(s, 1 - s)`. So `|exit| = r / √V` with `V ~ Beta(s, 1 - s)` and the
//! direction is uniform on the sphere, independent of the radius.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::beta::beta_reg;

use crate::constants::SolverParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ExitSample {
    pub point: Vec<f64>,
    /// `|point - center| / r`, always greater than one.
    pub radius_factor: f64,
}

/// Sampler of `(radius factor, direction)` pairs for fixed `(n, s)`.
///
/// The pair does not depend on where the ball is or how large it is, which
/// is what lets coupled walks replay one stream of draws from different
/// starting points.
#[derive(Debug, Clone)]
pub struct ExitLaw {
    n: usize,
    num: Gamma<f64>,
    den: Gamma<f64>,
}

impl ExitLaw {
    pub fn new(params: &SolverParams) -> Self {
        let s = params.s();
        Self {
            n: params.n(),
            num: Gamma::new(s, 1.0).expect("s in (0,1)"),
            den: Gamma::new(1.0 - s, 1.0).expect("s in (0,1)"),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `V ~ Beta(s, 1 - s)` as a ratio of Gamma variates, restricted to `V < 1`.
    pub fn draw_beta<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x = self.num.sample(rng);
            let y = self.den.sample(rng);
            let v = x / (x + y);
            if v < 1.0 {
                return v;
            }
        }
    }

    /// Uniform direction on `S^{n-1}` via a normalized Gaussian vector.
    pub fn draw_direction<R: Rng + ?Sized>(&self, rng: &mut R, dir: &mut [f64]) {
        if self.n == 1 {
            let g: f64 = StandardNormal.sample(rng);
            dir[0] = if g < 0.0 { -1.0 } else { 1.0 };
            return;
        }
        loop {
            let mut l2 = 0.0;
            for d in dir.iter_mut() {
                let g: f64 = StandardNormal.sample(rng);
                *d = g;
                l2 += g * g;
            }
            if l2 > 1e-300 {
                let inv = 1.0 / l2.sqrt();
                dir.iter_mut().for_each(|d| *d *= inv);
                return;
            }
        }
    }

    /// One exit draw: fills `dir` and returns the radius factor `1/√V`.
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, dir: &mut [f64]) -> f64 {
        let v = self.draw_beta(rng);
        self.draw_direction(rng, dir);
        1.0 / v.sqrt()
    }
}

/// Exit position from `B_r(center)` of the process started at `center`.
pub fn sample_exit<R: Rng + ?Sized>(center: &[f64], r: f64, params: &SolverParams, rng: &mut R) -> ExitSample {
    let law = ExitLaw::new(params);
    let mut dir = vec![0.0; params.n()];
    let radius_factor = law.draw(rng, &mut dir);
    let point = center.iter().zip(&dir).map(|(c, d)| c + r * radius_factor * d).collect();
    ExitSample { point, radius_factor }
}

/// `P(|exit - center| / r ≤ rho) = 1 - I_{1/rho²}(s, 1 - s)`.
pub fn exit_radius_cdf(rho: f64, s: f64) -> Result<f64> {
    if !(rho >= 1.0) {
        return Err(Error::Domain(format!("radius factor {rho} is below one")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Parameter(format!("fractional order s = {s} is not in (0, 1)")));
    }
    if rho.is_infinite() {
        return Ok(1.0);
    }
    let x = 1.0 / (rho * rho);
    Ok((1.0 - beta_reg(s, 1.0 - s, x)).clamp(0.0, 1.0))
}
