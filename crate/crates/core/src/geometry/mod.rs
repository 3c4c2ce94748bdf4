//! Domains: membership, signed distance, Minkowski sums with balls, and the
//! geometric functionals used by the symmetry and stability checks.

mod measure;
mod plane;
pub mod radial;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constants::unit_ball_volume;
use crate::error::{Error, Result};
use crate::estimate::{Estimate, Moments};
use crate::rng::stream;
use crate::vec::{dist, dot, norm};

pub use measure::{minkowski_closure_check, perimeter_2d, rho_deviation, symdiff_measure, tubular_volume};
pub use plane::{critical_plane, reflected_cap_inside, CaseTag, HyperplaneFrame};
use radial::RadialCurve;

/// Shape description as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    UnionOfBalls {
        centers: Vec<Vec<f64>>,
        radii: Vec<f64>,
    },
    /// Planar radial graph `r(θ) = a (1 + ε cos kθ)` around the origin.
    #[serde(rename = "perturbed_ball_2d")]
    PerturbedBall2d {
        a: f64,
        eps: f64,
        k: u32,
    },
    /// A closed segment; only useful as the inner set of a Minkowski sum.
    Segment {
        start: Vec<f64>,
        end: Vec<f64>,
    },
    Minkowski {
        inner: Box<ShapeSpec>,
        radius: f64,
    },
}

impl ShapeSpec {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        ShapeSpec::Ball { center: center.to_vec(), radius }
    }

    pub fn union(centers: Vec<Vec<f64>>, radii: Vec<f64>) -> Self {
        ShapeSpec::UnionOfBalls { centers, radii }
    }

    pub fn perturbed(a: f64, eps: f64, k: u32) -> Self {
        ShapeSpec::PerturbedBall2d { a, eps, k }
    }

    pub fn segment(start: &[f64], end: &[f64]) -> Self {
        ShapeSpec::Segment { start: start.to_vec(), end: end.to_vec() }
    }

    pub fn plus_ball(self, radius: f64) -> Self {
        ShapeSpec::Minkowski { inner: Box::new(self), radius }
    }

    /// Mirror image under `frame`'s reflection. Radial graphs are only
    /// reflected exactly across lines through the origin that are symmetry
    /// axes of the graph, so they are rejected here.
    pub fn reflected(&self, frame: &HyperplaneFrame) -> Result<Self> {
        Ok(match self {
            ShapeSpec::Ball { center, radius } => ShapeSpec::Ball { center: frame.reflect(center), radius: *radius },
            ShapeSpec::UnionOfBalls { centers, radii } => ShapeSpec::UnionOfBalls {
                centers: centers.iter().map(|c| frame.reflect(c)).collect(),
                radii: radii.clone(),
            },
            ShapeSpec::Segment { start, end } => {
                ShapeSpec::Segment { start: frame.reflect(start), end: frame.reflect(end) }
            }
            ShapeSpec::Minkowski { inner, radius } => {
                ShapeSpec::Minkowski { inner: Box::new(inner.reflected(frame)?), radius: *radius }
            }
            ShapeSpec::PerturbedBall2d { .. } => {
                return Err(Error::Unsupported("reflection of a radial graph".into()))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Ball,
    UnionOfBalls,
    #[serde(rename = "perturbed_ball_2d")]
    PerturbedBall2d,
    Segment,
    Minkowski,
}

#[derive(Debug, Clone)]
enum Body {
    Balls { centers: Vec<Vec<f64>>, radii: Vec<f64> },
    Capsule { start: Vec<f64>, end: Vec<f64>, radius: f64 },
    Radial(RadialCurve),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Query {
    pub inside: bool,
    pub dist_boundary: f64,
}

/// An immutable bounded domain with cached geometric data.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    spec: ShapeSpec,
    kind: DomainKind,
    dim: usize,
    body: Body,
    /// Inner set and radius when built as `G + B_R`.
    parts: Option<(Box<DomainSpec>, f64)>,
    diameter: f64,
    interior_radius: f64,
    volume: Estimate,
    bbox: (Vec<f64>, Vec<f64>),
}

fn check_point(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Shape(format!("{what} has no coordinates")));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Shape(format!("{what} has a non-finite coordinate")));
    }
    Ok(())
}

fn check_radius(r: f64, what: &str) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Shape(format!("{what} must be positive and finite, got {r}")));
    }
    Ok(())
}

/// Builds a domain, normalizing Minkowski sums with balls into the same
/// family of bodies (balls grow, segments become capsules, radial graphs
/// gain an offset).
pub fn build_domain(spec: &ShapeSpec) -> Result<DomainSpec> {
    match spec {
        ShapeSpec::Ball { center, radius } => {
            check_point(center, "ball center")?;
            check_radius(*radius, "ball radius")?;
            let body = Body::Balls { centers: vec![center.clone()], radii: vec![*radius] };
            Ok(DomainSpec::finish(spec.clone(), DomainKind::Ball, body, None, *radius))
        }
        ShapeSpec::UnionOfBalls { centers, radii } => {
            if centers.is_empty() || centers.len() != radii.len() {
                return Err(Error::Shape("union needs matching non-empty centers and radii".into()));
            }
            let n = centers[0].len();
            for (c, r) in centers.iter().zip(radii) {
                check_point(c, "ball center")?;
                check_radius(*r, "ball radius")?;
                if c.len() != n {
                    return Err(Error::Shape("ball centers of different dimensions".into()));
                }
            }
            let inner = radii.iter().cloned().fold(f64::INFINITY, f64::min);
            let body = Body::Balls { centers: centers.clone(), radii: radii.clone() };
            Ok(DomainSpec::finish(spec.clone(), DomainKind::UnionOfBalls, body, None, inner))
        }
        ShapeSpec::PerturbedBall2d { a, eps, k } => {
            check_radius(*a, "radial graph scale a")?;
            if !eps.is_finite() || eps.abs() * (*k).max(1) as f64 >= 1.0 {
                return Err(Error::Shape(format!("radial graph needs |ε|·k < 1, got ε = {eps}, k = {k}")));
            }
            let curve = RadialCurve::new(*a, *eps, *k, 0.0);
            let inner = radial_inradius(&curve);
            Ok(DomainSpec::finish(spec.clone(), DomainKind::PerturbedBall2d, Body::Radial(curve), None, inner))
        }
        ShapeSpec::Segment { start, end } => {
            check_point(start, "segment start")?;
            check_point(end, "segment end")?;
            if start.len() != end.len() {
                return Err(Error::Shape("segment endpoints of different dimensions".into()));
            }
            let body = Body::Capsule { start: start.clone(), end: end.clone(), radius: 0.0 };
            Ok(DomainSpec::finish(spec.clone(), DomainKind::Segment, body, None, 0.0))
        }
        ShapeSpec::Minkowski { inner, radius } => {
            check_radius(*radius, "Minkowski radius")?;
            let g = build_domain(inner)?;
            let body = match &g.body {
                Body::Balls { centers, radii } => Body::Balls {
                    centers: centers.clone(),
                    radii: radii.iter().map(|r| r + radius).collect(),
                },
                Body::Capsule { start, end, radius: r0 } => {
                    Body::Capsule { start: start.clone(), end: end.clone(), radius: r0 + radius }
                }
                Body::Radial(c) => {
                    let offset = c.offset + radius;
                    let kmin = c.with_offset(0.0).min_curvature();
                    if 1.0 + offset * kmin <= 0.0 {
                        return Err(Error::Shape(format!(
                            "offset {offset} exceeds the radius of curvature {} of the radial graph",
                            -1.0 / kmin
                        )));
                    }
                    Body::Radial(c.with_offset(offset))
                }
            };
            Ok(DomainSpec::finish(spec.clone(), DomainKind::Minkowski, body, Some((Box::new(g), *radius)), *radius))
        }
    }
}

/// Largest ball inside a radial graph: bisection on the radius at the best
/// of a grid of centers.
fn radial_inradius(c: &RadialCurve) -> f64 {
    let mut best: f64 = 0.0;
    let m = 41;
    let h = c.outer_radius();
    for i in 0..m {
        for j in 0..m {
            let p = [h * (2.0 * i as f64 / (m - 1) as f64 - 1.0), h * (2.0 * j as f64 / (m - 1) as f64 - 1.0)];
            if c.inside_curve(&p) {
                best = best.max(c.nearest(&p).1);
            }
        }
    }
    best.max(c.nearest(&[0.0, 0.0]).1)
}

impl DomainSpec {
    fn finish(spec: ShapeSpec, kind: DomainKind, body: Body, parts: Option<(Box<DomainSpec>, f64)>, inner: f64) -> Self {
        let dim = match &body {
            Body::Balls { centers, .. } => centers[0].len(),
            Body::Capsule { start, .. } => start.len(),
            Body::Radial(_) => 2,
        };
        let mut d = Self {
            spec,
            kind,
            dim,
            body,
            parts,
            diameter: 0.0,
            interior_radius: inner,
            volume: Estimate::exact(0.0, 0),
            bbox: (vec![], vec![]),
        };
        d.bbox = d.compute_bbox();
        d.diameter = d.compute_diameter();
        d.volume = d.compute_volume();
        d
    }

    pub fn spec(&self) -> &ShapeSpec {
        &self.spec
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// `r_Ω`. For `G + B_R` this is `R` by convention.
    pub fn interior_radius(&self) -> f64 {
        self.interior_radius
    }

    pub fn volume(&self) -> Estimate {
        self.volume
    }

    /// `(G, R)` when the domain was built as a Minkowski sum.
    pub fn minkowski_parts(&self) -> Option<(&DomainSpec, f64)> {
        self.parts.as_ref().map(|(g, r)| (g.as_ref(), *r))
    }

    pub fn bounding_box(&self) -> (&[f64], &[f64]) {
        (&self.bbox.0, &self.bbox.1)
    }

    /// Signed distance to the boundary, negative inside. For overlapping
    /// ball unions the inside value is only bounded by the true distance.
    pub fn sdf(&self, x: &[f64]) -> f64 {
        match &self.body {
            Body::Balls { centers, radii } => centers
                .iter()
                .zip(radii)
                .map(|(c, r)| dist(x, c) - r)
                .fold(f64::INFINITY, f64::min),
            Body::Capsule { start, end, radius } => segment_distance(x, start, end) - radius,
            Body::Radial(c) => c.sdf(x),
        }
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.body {
            Body::Balls { centers, radii } => {
                centers.iter().zip(radii).any(|(c, r)| crate::vec::dist2(x, c) < r * r)
            }
            Body::Capsule { start, end, radius } => segment_distance(x, start, end) < *radius,
            Body::Radial(c) => c.contains(x),
        }
    }

    #[inline]
    pub fn query(&self, x: &[f64]) -> Query {
        let d = self.sdf(x);
        Query { inside: d < 0.0, dist_boundary: d.abs() }
    }

    /// Nearest boundary point (for ball unions: of the nearest sphere).
    pub fn closest_boundary_point(&self, x: &[f64]) -> Vec<f64> {
        match &self.body {
            Body::Balls { centers, radii } => {
                let (c, r) = centers
                    .iter()
                    .zip(radii)
                    .min_by(|a, b| (dist(x, a.0) - a.1).abs().total_cmp(&(dist(x, b.0) - b.1).abs()))
                    .unwrap();
                radial_projection(x, c, *r, self.dim)
            }
            Body::Capsule { start, end, radius } => {
                let q = segment_closest(x, start, end);
                radial_projection(x, &q, *radius, self.dim)
            }
            Body::Radial(c) => c.closest_boundary_point(x).to_vec(),
        }
    }

    /// Outward unit normal at a boundary point, from a centered difference
    /// of the signed distance.
    pub fn outward_normal(&self, x: &[f64]) -> Vec<f64> {
        let h = 1e-6 * self.diameter.max(1e-300);
        let mut g = vec![0.0; self.dim];
        let mut p = x.to_vec();
        for i in 0..self.dim {
            p[i] = x[i] + h;
            let fp = self.sdf(&p);
            p[i] = x[i] - h;
            let fm = self.sdf(&p);
            p[i] = x[i];
            g[i] = (fp - fm) / (2.0 * h);
        }
        let l = norm(&g);
        if l > 0.0 {
            g.iter_mut().for_each(|v| *v /= l);
        }
        g
    }

    /// `sup_{y ∈ Ω} |y - p|`.
    pub fn farthest_distance(&self, p: &[f64]) -> f64 {
        match &self.body {
            Body::Balls { centers, radii } => centers
                .iter()
                .zip(radii)
                .map(|(c, r)| dist(p, c) + r)
                .fold(0.0, f64::max),
            Body::Capsule { start, end, radius } => dist(p, start).max(dist(p, end)) + radius,
            Body::Radial(c) => c.farthest_distance(p),
        }
    }

    /// `sup_{y ∈ Ω} y · e` for a unit vector `e`.
    pub fn support(&self, e: &[f64]) -> f64 {
        match &self.body {
            Body::Balls { centers, radii } => centers
                .iter()
                .zip(radii)
                .map(|(c, r)| dot(c, e) + r)
                .fold(f64::NEG_INFINITY, f64::max),
            Body::Capsule { start, end, radius } => dot(start, e).max(dot(end, e)) + radius,
            Body::Radial(c) => c.support(e),
        }
    }

    /// Deterministic sample of about `m` points on the boundary. For ball
    /// unions, points covered by another ball are dropped.
    pub fn boundary_samples(&self, m: usize) -> Vec<Vec<f64>> {
        let m = m.max(2);
        match &self.body {
            Body::Balls { centers, radii } => {
                let per = (m / centers.len()).max(2);
                let dirs = sphere_points(self.dim, per);
                let mut out = Vec::new();
                for (i, (c, r)) in centers.iter().zip(radii).enumerate() {
                    for d in &dirs {
                        let p: Vec<f64> = c.iter().zip(d).map(|(ci, di)| ci + r * di).collect();
                        let covered = centers
                            .iter()
                            .zip(radii)
                            .enumerate()
                            .any(|(j, (cj, rj))| j != i && dist(&p, cj) < rj * (1.0 - 1e-12));
                        if !covered {
                            out.push(p);
                        }
                    }
                }
                out
            }
            Body::Capsule { start, end, radius } => capsule_boundary(start, end, *radius, m),
            Body::Radial(c) => (0..m)
                .map(|i| c.offset_point(i as f64 * std::f64::consts::TAU / m as f64).to_vec())
                .collect(),
        }
    }

    /// Uniform point of the bounding box.
    pub fn sample_box<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let u: f64 = rng.random();
            *o = self.bbox.0[i] + u * (self.bbox.1[i] - self.bbox.0[i]);
        }
    }

    pub fn box_volume(&self) -> f64 {
        self.bbox.0.iter().zip(&self.bbox.1).map(|(a, b)| b - a).product()
    }

    fn compute_bbox(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim;
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            hi[i] = self.support(&e);
            e[i] = -1.0;
            lo[i] = -self.support(&e);
        }
        (lo, hi)
    }

    fn compute_diameter(&self) -> f64 {
        match &self.body {
            Body::Balls { centers, radii } => {
                let mut best: f64 = 0.0;
                for (i, (a, ra)) in centers.iter().zip(radii).enumerate() {
                    for (b, rb) in centers.iter().zip(radii).skip(i) {
                        best = best.max(dist(a, b) + ra + rb);
                    }
                }
                best
            }
            Body::Capsule { start, end, radius } => dist(start, end) + 2.0 * radius,
            Body::Radial(c) => c.diameter(),
        }
    }

    fn compute_volume(&self) -> Estimate {
        let n = self.dim;
        match &self.body {
            Body::Balls { centers, radii } => {
                let disjoint = centers.iter().zip(radii).enumerate().all(|(i, (a, ra))| {
                    centers.iter().zip(radii).skip(i + 1).all(|(b, rb)| dist(a, b) >= ra + rb)
                });
                if disjoint {
                    let v = radii.iter().map(|r| unit_ball_volume(n) * r.powi(n as i32)).sum();
                    Estimate::exact(v, 0)
                } else {
                    self.monte_carlo_volume(200_000, 0x766f_6c75_6d65)
                }
            }
            Body::Capsule { start, end, radius } => {
                let l = dist(start, end);
                let side = if n > 1 { unit_ball_volume(n - 1) * radius.powi(n as i32 - 1) * l } else { l };
                Estimate::exact(side + unit_ball_volume(n) * radius.powi(n as i32), 0)
            }
            Body::Radial(c) => Estimate::exact(c.area(), 0),
        }
    }

    /// Hit-or-miss volume in the bounding box.
    pub fn monte_carlo_volume(&self, samples: u64, seed: u64) -> Estimate {
        let bv = self.box_volume();
        let m = crate::estimate::reduce_blocks(
            samples,
            |a, b| {
                let mut acc = Moments::default();
                let mut x = vec![0.0; self.dim];
                for i in a..b {
                    let mut rng = stream(seed, i);
                    self.sample_box(&mut rng, &mut x);
                    acc.push(if self.contains(&x) { bv } else { 0.0 });
                }
                acc
            },
            Moments::merge,
        )
        .unwrap_or_default();
        m.to_estimate()
    }
}

/// Shorthand for `build_domain(spec)` followed by `query`.
pub fn domain_query(d: &DomainSpec, x: &[f64]) -> Query {
    d.query(x)
}

fn radial_projection(x: &[f64], c: &[f64], r: f64, n: usize) -> Vec<f64> {
    let d = dist(x, c);
    if d == 0.0 {
        let mut p = c.to_vec();
        p[0] += r;
        return p;
    }
    let _ = n;
    c.iter().zip(x).map(|(ci, xi)| ci + r * (xi - ci) / d).collect()
}

fn segment_closest(x: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    let ab: Vec<f64> = b.iter().zip(a).map(|(b, a)| b - a).collect();
    let l2 = dot(&ab, &ab);
    let t = if l2 == 0.0 {
        0.0
    } else {
        (x.iter().zip(a).zip(&ab).map(|((x, a), d)| (x - a) * d).sum::<f64>() / l2).clamp(0.0, 1.0)
    };
    a.iter().zip(&ab).map(|(a, d)| a + t * d).collect()
}

fn segment_distance(x: &[f64], a: &[f64], b: &[f64]) -> f64 {
    dist(x, &segment_closest(x, a, b))
}

/// Deterministic, roughly uniform points on `S^{n-1}`.
pub fn sphere_points(n: usize, m: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..m)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / m as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / m as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = stream(0x7370_6865_7265, n as u64);
            (0..m)
                .map(|_| loop {
                    let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let l = norm(&g);
                    if l > 1e-12 {
                        break g.iter().map(|v| v / l).collect();
                    }
                })
                .collect()
        }
    }
}

fn capsule_boundary(a: &[f64], b: &[f64], r: f64, m: usize) -> Vec<Vec<f64>> {
    let n = a.len();
    let ab: Vec<f64> = b.iter().zip(a).map(|(b, a)| b - a).collect();
    let l = norm(&ab);
    if r == 0.0 {
        return (0..m)
            .map(|i| {
                let t = i as f64 / (m - 1) as f64;
                a.iter().zip(&ab).map(|(a, d)| a + t * d).collect()
            })
            .collect();
    }
    if l == 0.0 {
        return sphere_points(n, m).into_iter().map(|d| a.iter().zip(&d).map(|(a, d)| a + r * d).collect()).collect();
    }
    let axis: Vec<f64> = ab.iter().map(|v| v / l).collect();
    // split points between caps and side in proportion to their extent
    let cap_len = std::f64::consts::PI * r;
    let m_side = ((m as f64) * l / (l + cap_len)).round() as usize;
    let dirs = sphere_points(n, (m - m_side).max(2));
    let mut out = Vec::with_capacity(m);
    for d in &dirs {
        let base = if dot(d, &axis) >= 0.0 { b } else { a };
        out.push(base.iter().zip(d).map(|(c, d)| c + r * d).collect());
    }
    if m_side > 0 {
        let rings = sphere_points(n, m_side.max(2));
        for (i, d) in rings.iter().enumerate() {
            let along = dot(d, &axis);
            let perp: Vec<f64> = d.iter().zip(&axis).map(|(d, e)| d - along * e).collect();
            let pl = norm(&perp);
            if pl < 1e-9 {
                continue;
            }
            let t = (i as f64 + 0.5) / m_side as f64;
            out.push(
                a.iter()
                    .zip(&ab)
                    .zip(&perp)
                    .map(|((a, d), p)| a + t * d + r * p / pl)
                    .collect(),
            );
        }
    }
    out
}
