//! Planar star-shaped curve `r(θ) = a (1 + ε cos kθ)` and its outer parallel
//! sets.

use std::f64::consts::{PI, TAU};

use crate::quad;

const COARSE_MIN: usize = 128;

#[derive(Debug, Clone)]
pub struct RadialCurve {
    pub a: f64,
    pub eps: f64,
    pub k: u32,
    /// Offset of the parallel set; zero for the curve's own interior.
    pub offset: f64,
    coarse: Vec<[f64; 2]>,
    coarse_step: f64,
    min_radius: f64,
    max_radius: f64,
}

impl RadialCurve {
    pub fn new(a: f64, eps: f64, k: u32, offset: f64) -> Self {
        let m = COARSE_MIN.max(32 * k as usize);
        let coarse_step = TAU / m as f64;
        let mut c = Self {
            a,
            eps,
            k,
            offset,
            coarse: Vec::new(),
            coarse_step,
            min_radius: a * (1.0 - eps.abs()),
            max_radius: a * (1.0 + eps.abs()),
        };
        if k == 0 {
            c.min_radius = a * (1.0 + eps);
            c.max_radius = a * (1.0 + eps);
        }
        c.coarse = (0..m).map(|i| c.point(i as f64 * coarse_step)).collect();
        c
    }

    pub fn with_offset(&self, offset: f64) -> Self {
        Self { offset, ..self.clone() }
    }

    #[inline]
    pub fn radius(&self, theta: f64) -> f64 {
        self.a * (1.0 + self.eps * (self.k as f64 * theta).cos())
    }

    /// `(r, r', r'')` at `θ`.
    #[inline]
    fn radius_derivs(&self, theta: f64) -> (f64, f64, f64) {
        let kf = self.k as f64;
        let (sk, ck) = (kf * theta).sin_cos();
        (
            self.a * (1.0 + self.eps * ck),
            -self.a * self.eps * kf * sk,
            -self.a * self.eps * kf * kf * ck,
        )
    }

    #[inline]
    pub fn point(&self, theta: f64) -> [f64; 2] {
        let r = self.radius(theta);
        let (s, c) = theta.sin_cos();
        [r * c, r * s]
    }

    /// `(c, c', c'')` at `θ`.
    #[inline]
    fn derivs(&self, theta: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        let (r, r1, r2) = self.radius_derivs(theta);
        let (s, c) = theta.sin_cos();
        (
            [r * c, r * s],
            [r1 * c - r * s, r1 * s + r * c],
            [(r2 - r) * c - 2.0 * r1 * s, (r2 - r) * s + 2.0 * r1 * c],
        )
    }

    pub fn speed(&self, theta: f64) -> f64 {
        let (r, r1, _) = self.radius_derivs(theta);
        (r * r + r1 * r1).sqrt()
    }

    /// Signed curvature, positive where the curve is convex.
    pub fn curvature(&self, theta: f64) -> f64 {
        let (r, r1, r2) = self.radius_derivs(theta);
        (r * r + 2.0 * r1 * r1 - r * r2) / (r * r + r1 * r1).powf(1.5)
    }

    pub fn min_curvature(&self) -> f64 {
        let m = 4096;
        (0..m)
            .map(|i| self.curvature(i as f64 * TAU / m as f64))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_curvature(&self) -> f64 {
        let m = 4096;
        (0..m)
            .map(|i| self.curvature(i as f64 * TAU / m as f64))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Outward unit normal of the base curve.
    pub fn normal(&self, theta: f64) -> [f64; 2] {
        let (_, d1, _) = self.derivs(theta);
        let l = (d1[0] * d1[0] + d1[1] * d1[1]).sqrt();
        [d1[1] / l, -d1[0] / l]
    }

    /// Point of the offset curve `c(θ) + offset · n(θ)`.
    pub fn offset_point(&self, theta: f64) -> [f64; 2] {
        let c = self.point(theta);
        let n = self.normal(theta);
        [c[0] + self.offset * n[0], c[1] + self.offset * n[1]]
    }

    /// Inside the base curve (strict).
    #[inline]
    pub fn inside_curve(&self, x: &[f64]) -> bool {
        let r2 = x[0] * x[0] + x[1] * x[1];
        if r2 < self.min_radius * self.min_radius {
            return true;
        }
        if r2 >= self.max_radius * self.max_radius {
            return false;
        }
        let theta = x[1].atan2(x[0]);
        let r = self.radius(theta);
        r2 < r * r
    }

    /// Nearest parameter on the base curve and the distance to it.
    pub fn nearest(&self, x: &[f64]) -> (f64, f64) {
        let m = self.coarse.len();
        let mut d2 = Vec::with_capacity(m);
        let mut best = f64::INFINITY;
        for p in &self.coarse {
            let dx = p[0] - x[0];
            let dy = p[1] - x[1];
            let v = dx * dx + dy * dy;
            best = best.min(v);
            d2.push(v);
        }
        // a true minimum between samples is below its neighbours by at most
        // about (step · speed)²; keep every discrete local minimum within that
        let h = self.coarse_step * self.max_radius * (1.0 + self.eps.abs() * self.k as f64);
        let slack = 2.0 * h * best.sqrt() + h * h;
        let mut best_theta = 0.0;
        let mut best_d2 = f64::INFINITY;
        for i in 0..m {
            let prev = d2[(i + m - 1) % m];
            let next = d2[(i + 1) % m];
            if d2[i] <= prev && d2[i] <= next && d2[i] <= best + slack {
                let (t, v) = self.refine(x, i as f64 * self.coarse_step);
                if v < best_d2 {
                    best_d2 = v;
                    best_theta = t;
                }
            }
        }
        (best_theta.rem_euclid(TAU), best_d2.sqrt())
    }

    /// Local minimization of `|c(θ) - x|²` in `[θ0 - h, θ0 + h]`:
    /// safeguarded Newton on the derivative, golden section as fallback.
    fn refine(&self, x: &[f64], theta0: f64) -> (f64, f64) {
        let f = |t: f64| {
            let p = self.point(t);
            (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)
        };
        let g = |t: f64| {
            let (c, d1, d2) = self.derivs(t);
            let e = [c[0] - x[0], c[1] - x[1]];
            let g = e[0] * d1[0] + e[1] * d1[1];
            let gp = d1[0] * d1[0] + d1[1] * d1[1] + e[0] * d2[0] + e[1] * d2[1];
            (g, gp)
        };
        let h = self.coarse_step;
        let mut lo = theta0 - h;
        let mut hi = theta0 + h;
        let (glo, _) = g(lo);
        let (ghi, _) = g(hi);
        if glo <= 0.0 && ghi >= 0.0 {
            let mut t = theta0;
            for _ in 0..60 {
                let (gv, gp) = g(t);
                if gv == 0.0 {
                    break;
                }
                if gv < 0.0 {
                    lo = t;
                } else {
                    hi = t;
                }
                let newton = t - gv / gp;
                let next = if gp > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
                if (next - t).abs() < 1e-14 {
                    t = next;
                    break;
                }
                t = next;
            }
            let v = f(t);
            return (t, v);
        }
        // no sign change: golden section on f
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = hi - phi * (hi - lo);
        let mut d = lo + phi * (hi - lo);
        let mut fc = f(c);
        let mut fd = f(d);
        for _ in 0..80 {
            if hi - lo < 1e-13 {
                break;
            }
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - phi * (hi - lo);
                fc = f(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + phi * (hi - lo);
                fd = f(d);
            }
        }
        let t = 0.5 * (lo + hi);
        let candidates = [(theta0 - h, f(theta0 - h)), (theta0 + h, f(theta0 + h)), (t, f(t))];
        candidates.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap()
    }

    /// Signed distance to the base curve, negative inside.
    pub fn curve_sdf(&self, x: &[f64]) -> f64 {
        let (_, d) = self.nearest(x);
        if self.inside_curve(x) {
            -d
        } else {
            d
        }
    }

    /// Signed distance to the boundary of the offset set.
    pub fn sdf(&self, x: &[f64]) -> f64 {
        self.curve_sdf(x) - self.offset
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let inner = self.min_radius + self.offset;
        if r2 < inner * inner {
            return true;
        }
        let outer = self.max_radius + self.offset;
        if r2 >= outer * outer {
            return false;
        }
        if self.inside_curve(x) {
            return true;
        }
        if self.offset == 0.0 {
            return false;
        }
        self.nearest(x).1 < self.offset
    }

    /// Nearest point of the offset boundary.
    pub fn closest_boundary_point(&self, x: &[f64]) -> [f64; 2] {
        let (t, d) = self.nearest(x);
        let c = self.point(t);
        if self.offset == 0.0 {
            return c;
        }
        if self.inside_curve(x) || d == 0.0 {
            let n = self.normal(t);
            [c[0] + self.offset * n[0], c[1] + self.offset * n[1]]
        } else {
            [c[0] + self.offset * (x[0] - c[0]) / d, c[1] + self.offset * (x[1] - c[1]) / d]
        }
    }

    /// Maximizes `φ(θ)` over the circle: coarse scan then golden section.
    fn maximize<F: Fn(f64) -> f64>(&self, phi: F) -> f64 {
        let m = 4 * self.coarse.len();
        let step = TAU / m as f64;
        let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
        for i in 0..m {
            let v = phi(i as f64 * step);
            if v > best {
                best = v;
                best_i = i;
            }
        }
        let mut lo = (best_i as f64 - 1.0) * step;
        let mut hi = (best_i as f64 + 1.0) * step;
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            if hi - lo < 1e-13 {
                break;
            }
            let c = hi - g * (hi - lo);
            let d = lo + g * (hi - lo);
            if phi(c) > phi(d) {
                hi = d;
            } else {
                lo = c;
            }
        }
        best.max(phi(0.5 * (lo + hi)))
    }

    /// `sup_{y ∈ Ω} |y - p|`.
    pub fn farthest_distance(&self, p: &[f64]) -> f64 {
        self.maximize(|t| {
            let c = self.point(t);
            ((c[0] - p[0]).powi(2) + (c[1] - p[1]).powi(2)).sqrt()
        }) + self.offset
    }

    /// `sup_{y ∈ Ω} y · e`.
    pub fn support(&self, e: &[f64]) -> f64 {
        self.maximize(|t| {
            let c = self.point(t);
            c[0] * e[0] + c[1] * e[1]
        }) + self.offset
    }

    /// Arc length of the offset boundary, `∫ |c'| (1 + offset κ) dθ`.
    pub fn perimeter(&self) -> f64 {
        quad::integrate(
            |t| self.speed(t) * (1.0 + self.offset * self.curvature(t)),
            0.0,
            TAU,
            1e-10,
            0.0,
            2000,
        )
        .value
    }

    /// Enclosed area by Green's theorem on the offset boundary.
    pub fn area(&self) -> f64 {
        if self.eps == 0.0 {
            let r = self.a + self.offset;
            return PI * r * r;
        }
        0.5 * quad::integrate(
            |t| {
                let p = self.offset_point(t);
                let (_, d1, _) = self.derivs(t);
                let stretch = 1.0 + self.offset * self.curvature(t);
                stretch * (p[0] * d1[1] - p[1] * d1[0])
            },
            0.0,
            TAU,
            1e-12,
            0.0,
            2000,
        )
        .value
    }

    /// Largest sampled chord of the base curve plus twice the offset.
    pub fn diameter(&self) -> f64 {
        let m = 2048;
        let pts: Vec<[f64; 2]> = (0..m).map(|i| self.point(i as f64 * TAU / m as f64)).collect();
        let mut best: f64 = 0.0;
        for i in 0..m {
            for j in (i + 1)..m {
                let d = (pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2);
                best = best.max(d);
            }
        }
        best.sqrt() + 2.0 * self.offset
    }

    pub fn outer_radius(&self) -> f64 {
        self.max_radius + self.offset
    }
}
