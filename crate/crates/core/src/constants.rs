//! Closed-form constants and ball kernels of the fractional Laplacian.
//!
//! Everything here is a pure function of `(n, s)` and the points involved.
//! The operator is normalized as
//!
//! ```text
//! (-Δ)^s u(x) = c_{n,s} P.V. ∫ (u(x) - u(z)) / |x - z|^{n+2s} dz,
//! c_{n,s} = 4^s s Γ(n/2 + s) / (π^{n/2} Γ(1 - s)),
//! ```
//!
//! under which the torsion function of `B_r(x0)` is
//! `γ_{n,s} (r² - |x - x0|²)_+^s` with
//! `γ_{n,s} = 4^{-s} Γ(n/2) / (Γ(n/2 + s) Γ(1 + s))`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::vec::{dist2, norm2};

/// Dimension and fractional order together with every derived constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    n: usize,
    s: f64,
    c_ns: f64,
    gamma_ns: f64,
    harnack_k: f64,
    poisson_const: f64,
    sphere_area: f64,
}

impl SolverParams {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("dimension n must be at least 1".into()));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Parameter(format!("fractional order s = {s} is not in (0, 1)")));
        }
        let half_n = n as f64 / 2.0;
        let c_ns = 4f64.powf(s) * s * gamma(half_n + s) / (PI.powf(half_n) * gamma(1.0 - s));
        let gamma_ns = 4f64.powf(-s) * gamma(half_n) / (gamma(half_n + s) * gamma(1.0 + s));
        let harnack_k = (4.0f64 / 3.0).powf(s) * 3.5f64.powi(n as i32 + 2) * 2.0 * n as f64;
        // exit law of the ball; integrates to one over the exterior
        let poisson_const = gamma(half_n) * (PI * s).sin() / PI.powf(half_n + 1.0);
        let sphere_area = 2.0 * PI.powf(half_n) / gamma(half_n);
        Ok(Self { n, s, c_ns, gamma_ns, harnack_k, poisson_const, sphere_area })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Normalizing constant of the singular integral.
    pub fn c_ns(&self) -> f64 {
        self.c_ns
    }

    /// Torsion constant of the unit ball: `ψ_{B_1}(0) = γ_{n,s}`.
    pub fn gamma_ns(&self) -> f64 {
        self.gamma_ns
    }

    /// Boundary Harnack constant `K = (4/3)^s (7/2)^{n+2} 2n`.
    pub fn harnack_k(&self) -> f64 {
        self.harnack_k
    }

    /// Constant of the ball Poisson kernel, `Γ(n/2) sin(πs) / π^{n/2+1}`.
    pub fn poisson_const(&self) -> f64 {
        self.poisson_const
    }

    /// Surface measure `ω_n` of the unit sphere `S^{n-1}`.
    pub fn sphere_area(&self) -> f64 {
        self.sphere_area
    }

    /// Volume `ω_n / n` of the unit ball.
    pub fn unit_ball_volume(&self) -> f64 {
        self.sphere_area / self.n as f64
    }
}

pub fn eval_constants(n: usize, s: f64) -> Result<SolverParams> {
    SolverParams::new(n, s)
}

/// Volume of the unit ball in dimension `n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    let half_n = n as f64 / 2.0;
    PI.powf(half_n) / gamma(half_n + 1.0)
}

/// Torsion function of the ball `B_r(center)`: `γ_{n,s} (r² - |x - center|²)_+^s`.
pub fn psi_ball(x: &[f64], center: &[f64], r: f64, params: &SolverParams) -> f64 {
    let gap = r * r - dist2(x, center);
    if gap <= 0.0 {
        0.0
    } else {
        params.gamma_ns * gap.powf(params.s)
    }
}

/// Poisson kernel of `B_R(0)`: the density of the exit position `y` of the
/// 2s-stable process started at `x`.
pub fn poisson_kernel(x: &[f64], y: &[f64], radius: f64, params: &SolverParams) -> Result<f64> {
    let r2 = radius * radius;
    let x2 = norm2(x);
    let y2 = norm2(y);
    if x2 >= r2 {
        return Err(Error::Domain(format!("|x| = {} is not inside the ball of radius {radius}", x2.sqrt())));
    }
    if y2 <= r2 {
        return Err(Error::Domain(format!("|y| = {} is not outside the ball of radius {radius}", y2.sqrt())));
    }
    let d = dist2(x, y).sqrt();
    Ok(params.poisson_const * ((r2 - x2) / (y2 - r2)).powf(params.s) * d.powi(-(params.n as i32)))
}

/// `|x-y|^{-n} - |x-y'|^{-n}` with `|x-y'|² = |x-y|² + 4 x₁ y₁`, evaluated
/// without cancellation.
pub(crate) fn reflected_difference(a2: f64, x1y1: f64, n: usize) -> f64 {
    let half_n = n as f64 / 2.0;
    let lead = a2.powf(-half_n);
    lead * -(-half_n * (4.0 * x1y1 / a2).ln_1p()).exp_m1()
}

/// Antisymmetric kernel `T(x, y) = P(x, y) - P(x, y')`, with `y'` the mirror
/// of `y` across `{x₁ = 0}`. No domain checks.
pub fn antisym_kernel_raw(x: &[f64], y: &[f64], radius: f64, params: &SolverParams) -> f64 {
    let r2 = radius * radius;
    let weight = ((r2 - norm2(x)) / (norm2(y) - r2)).powf(params.s);
    params.poisson_const * weight * reflected_difference(dist2(x, y), x[0] * y[0], params.n)
}

/// Antisymmetric kernel on its natural domain: `|x| < R < |y|`, `x₁, y₁ > 0`.
pub fn antisym_kernel(x: &[f64], y: &[f64], radius: f64, params: &SolverParams) -> Result<f64> {
    let r2 = radius * radius;
    if norm2(x) >= r2 || x[0] <= 0.0 {
        return Err(Error::Domain("x must lie in the open half ball {x₁ > 0} ∩ B_R".into()));
    }
    if norm2(y) <= r2 || y[0] <= 0.0 {
        return Err(Error::Domain("y must lie in {y₁ > 0} outside the closed ball".into()));
    }
    Ok(antisym_kernel_raw(x, y, radius, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn c_ns_half_laplacian_line() {
        let p = eval_constants(1, 0.5).unwrap();
        assert!(close(p.c_ns(), 1.0 / PI, 1e-12), "{}", p.c_ns());
    }

    #[test]
    fn gamma_ns_plane_half() {
        let p = eval_constants(2, 0.5).unwrap();
        assert!(close(p.gamma_ns(), 2.0 / PI, 1e-12));
    }

    #[test]
    fn harnack_constant_plane_half() {
        let p = eval_constants(2, 0.5).unwrap();
        let expected = (4.0f64 / 3.0).sqrt() * 3.5f64.powi(4) * 4.0;
        assert!(close(p.harnack_k(), expected, 1e-14));
        assert!((p.harnack_k() - 693.1).abs() < 0.05);
    }

    #[test]
    fn gamma_ns_classical_limit() {
        for n in 1..=6 {
            let p = eval_constants(n, 1.0 - 1e-6).unwrap();
            assert!(close(p.gamma_ns(), 1.0 / (2.0 * n as f64), 1e-4), "n = {n}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(eval_constants(0, 0.5), Err(Error::Parameter(_))));
        assert!(matches!(eval_constants(2, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(eval_constants(2, 1.0), Err(Error::Parameter(_))));
        assert!(matches!(eval_constants(2, f64::NAN), Err(Error::Parameter(_))));
    }

    #[test]
    fn psi_ball_values() {
        let p = eval_constants(1, 0.5).unwrap();
        assert!(close(psi_ball(&[0.0], &[0.0], 1.0, &p), 1.0, 1e-12));
        let q = eval_constants(3, 0.3).unwrap();
        let c = [1.0, -2.0, 0.5];
        assert!(close(psi_ball(&c, &c, 2.0, &q), q.gamma_ns() * 2f64.powf(0.6), 1e-14));
        assert_eq!(psi_ball(&[3.0, -2.0, 0.5], &c, 2.0, &q), 0.0);
        assert_eq!(psi_ball(&[10.0, 0.0, 0.0], &c, 2.0, &q), 0.0);
    }

    #[test]
    fn poisson_kernel_scaling() {
        let p = eval_constants(3, 0.4).unwrap();
        let x = [0.3, -0.2, 0.5];
        let y = [1.7, 0.9, -1.1];
        let big = 2.5;
        let xs: Vec<f64> = x.iter().map(|v| v * big).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * big).collect();
        let scaled = poisson_kernel(&xs, &ys, big, &p).unwrap();
        let unit = poisson_kernel(&x, &y, 1.0, &p).unwrap();
        assert!(close(scaled, big.powi(-3) * unit, 1e-12));
    }

    #[test]
    fn poisson_kernel_domain_errors() {
        let p = eval_constants(2, 0.5).unwrap();
        assert!(poisson_kernel(&[1.0, 0.0], &[2.0, 0.0], 1.0, &p).is_err());
        assert!(poisson_kernel(&[0.0, 0.0], &[0.5, 0.0], 1.0, &p).is_err());
        assert!(antisym_kernel(&[-0.1, 0.0], &[2.0, 0.0], 1.0, &p).is_err());
        assert!(antisym_kernel(&[0.1, 0.0], &[-2.0, 0.0], 1.0, &p).is_err());
    }

    #[test]
    fn antisym_vanishes_on_plane() {
        let p = eval_constants(2, 0.5).unwrap();
        assert_eq!(antisym_kernel_raw(&[0.0, 0.3], &[1.5, 0.2], 1.0, &p), 0.0);
    }

    #[test]
    fn constants_positive_and_continuous_on_grid() {
        for n in 1..=10 {
            let mut prev: Option<SolverParams> = None;
            for i in 1..200 {
                let s = i as f64 / 200.0;
                let p = eval_constants(n, s).unwrap();
                for v in [p.c_ns(), p.gamma_ns(), p.harnack_k(), p.poisson_const()] {
                    assert!(v > 0.0 && v.is_finite(), "n={n} s={s}");
                }
                if let Some(q) = prev {
                    assert!(close(p.gamma_ns(), q.gamma_ns(), 0.05), "gamma jumps at n={n} s={s}");
                    // c vanishes linearly at both ends of (0, 1)
                    let (a, b) = (p.c_ns() / (s * (1.0 - s)), q.c_ns() / (q.s() * (1.0 - q.s())));
                    assert!(close(a, b, 0.05), "c jumps at n={n} s={s}");
                    assert!(p.harnack_k() > q.harnack_k());
                    if n >= 2 {
                        assert!(p.gamma_ns() < q.gamma_ns(), "gamma not decreasing at n={n} s={s}");
                    }
                }
                prev = Some(p);
            }
        }
    }

    #[test]
    fn harnack_constant_grows_with_dimension() {
        for s in [0.1, 0.5, 0.9] {
            for n in 1..10 {
                assert!(eval_constants(n + 1, s).unwrap().harnack_k() > eval_constants(n, s).unwrap().harnack_k());
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn antisym_is_kernel_minus_mirrored_kernel(
            n in 1usize..4,
            s in 0.05f64..0.95,
            x in proptest::collection::vec(-0.6f64..0.6, 3),
            y in proptest::collection::vec(-3.0f64..3.0, 3),
        ) {
            let p = eval_constants(n, s).unwrap();
            let mut x = x[..n].to_vec();
            let mut y = y[..n].to_vec();
            x[0] = x[0].abs() + 1e-3;
            y[0] = y[0].abs() + 1e-3;
            proptest::prop_assume!(norm2(&x) < 0.9 && norm2(&y) > 1.2);
            let mut ym = y.clone();
            ym[0] = -ym[0];
            let direct = poisson_kernel(&x, &y, 1.0, &p).unwrap() - poisson_kernel(&x, &ym, 1.0, &p).unwrap();
            let t = antisym_kernel(&x, &y, 1.0, &p).unwrap();
            proptest::prop_assert!(t > 0.0);
            proptest::prop_assert!((t - direct).abs() <= 1e-10 * poisson_kernel(&x, &y, 1.0, &p).unwrap());
        }
    }
}
