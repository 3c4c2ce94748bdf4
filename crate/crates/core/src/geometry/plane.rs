//! Hyperplanes, reflections and the critical position of the moving plane.

use serde::{Deserialize, Serialize};

use super::DomainSpec;
use crate::error::{Error, Result};
use crate::rng::halton;
use crate::vec::{dot, normalized};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseTag {
    /// The reflected cap touches the boundary at a point off the plane.
    Case1Tangent,
    /// The plane meets the boundary orthogonally.
    Case2Orthogonal,
    Undetermined,
}

/// The plane `{x · e = λ}` together with the extent `Λ_e = sup_Ω x · e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneFrame {
    pub e: Vec<f64>,
    pub lambda: f64,
    pub lambda_max: f64,
    pub case_tag: CaseTag,
    /// Both contact conditions were detected within tolerance.
    pub ambiguous: bool,
}

impl HyperplaneFrame {
    pub fn new(e: &[f64], lambda: f64, lambda_max: f64) -> Result<Self> {
        let e = normalized(e).ok_or_else(|| Error::Parameter("plane direction must be a nonzero vector".into()))?;
        if !lambda.is_finite() || lambda > lambda_max {
            return Err(Error::Parameter(format!("plane offset {lambda} exceeds the extent {lambda_max}")));
        }
        Ok(Self { e, lambda, lambda_max, case_tag: CaseTag::Undetermined, ambiguous: false })
    }

    /// Frame at offset `lambda` with the extent taken from `d`.
    pub fn for_domain(d: &DomainSpec, e: &[f64], lambda: f64) -> Result<Self> {
        let unit = normalized(e).ok_or_else(|| Error::Parameter("plane direction must be a nonzero vector".into()))?;
        Self::new(&unit, lambda, d.support(&unit))
    }

    /// Signed offset of `x` from the plane.
    #[inline]
    pub fn side(&self, x: &[f64]) -> f64 {
        dot(x, &self.e) - self.lambda
    }

    /// Strictly beyond the plane, where the cap lives.
    #[inline]
    pub fn in_cap(&self, x: &[f64]) -> bool {
        self.side(x) > 0.0
    }

    pub fn reflect(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.reflect_into(x, &mut out);
        out
    }

    #[inline]
    pub fn reflect_into(&self, x: &[f64], out: &mut [f64]) {
        let t = -2.0 * self.side(x);
        for ((o, xi), ei) in out.iter_mut().zip(x).zip(&self.e) {
            *o = xi + t * ei;
        }
    }

    pub fn at(&self, lambda: f64) -> Self {
        Self { lambda, case_tag: CaseTag::Undetermined, ambiguous: false, ..self.clone() }
    }
}

const BISECTION_STEPS: usize = 40;
const CAP_SAMPLES: usize = 10_000;
const MAX_DRAWS: u64 = 1_000_000;

struct CapTester<'a> {
    d: &'a DomainSpec,
    boundary: Vec<Vec<f64>>,
    tol: f64,
}

impl CapTester<'_> {
    /// Whether the reflected cap at `frame` lies in the closure of Ω, tested
    /// on boundary samples and on fresh low-discrepancy interior samples.
    fn contained(&self, frame: &HyperplaneFrame, level: u64) -> bool {
        let mut q = vec![0.0; self.d.dim()];
        for p in &self.boundary {
            if frame.in_cap(p) {
                frame.reflect_into(p, &mut q);
                if self.d.sdf(&q) > self.tol {
                    return false;
                }
            }
        }
        let (lo, hi) = self.d.bounding_box();
        let n = self.d.dim();
        let mut x = vec![0.0; n];
        let mut found = 0;
        let offset = 1 + level * MAX_DRAWS;
        for i in 0..MAX_DRAWS {
            for (k, xk) in x.iter_mut().enumerate() {
                *xk = lo[k] + halton(offset + i, k) * (hi[k] - lo[k]);
            }
            if !frame.in_cap(&x) || !self.d.contains(&x) {
                continue;
            }
            found += 1;
            frame.reflect_into(&x, &mut q);
            if !self.d.contains(&q) && self.d.sdf(&q) > self.tol {
                return false;
            }
            if found >= CAP_SAMPLES {
                break;
            }
        }
        true
    }
}

fn boundary_sample_count(n: usize) -> usize {
    match n {
        1 => 2,
        2 => 4096,
        _ => 8192,
    }
}

/// `λ_e`: the smallest offset such that every reflected cap beyond it stays
/// inside Ω, found by bisection on `[-Λ_{-e}, Λ_e]`; then classifies the
/// contact at the critical position.
pub fn critical_plane(d: &DomainSpec, e: &[f64]) -> Result<HyperplaneFrame> {
    let e = normalized(e).ok_or_else(|| Error::Parameter("plane direction must be a nonzero vector".into()))?;
    if e.len() != d.dim() {
        return Err(Error::Parameter("plane direction has the wrong dimension".into()));
    }
    let diam = d.diameter();
    if !(diam > 0.0 && d.volume().mean > 0.0) {
        return Err(Error::Bracket("domain has empty interior".into()));
    }
    let neg: Vec<f64> = e.iter().map(|v| -v).collect();
    let top = d.support(&e);
    let bottom = -d.support(&neg);
    let tester = CapTester { d, boundary: d.boundary_samples(boundary_sample_count(d.dim())), tol: 1e-9 * diam };
    let base = HyperplaneFrame::new(&e, top, top)?;
    if tester.contained(&base.at(bottom), 0) {
        return Err(Error::Bracket("the whole domain reflects into itself from its lowest plane".into()));
    }
    let (mut lo, mut hi) = (bottom, top);
    for level in 1..=BISECTION_STEPS as u64 {
        let mid = 0.5 * (lo + hi);
        if tester.contained(&base.at(mid), level) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut frame = base.at(hi);
    classify(d, &tester.boundary, &mut frame);
    Ok(frame)
}

fn classify(d: &DomainSpec, boundary: &[Vec<f64>], frame: &mut HyperplaneFrame) {
    let tol = 1e-3 * d.diameter();
    let mut q = vec![0.0; d.dim()];
    let tangent = boundary.iter().any(|p| {
        frame.side(p) > tol && {
            frame.reflect_into(p, &mut q);
            d.sdf(&q).abs() <= tol
        }
    });
    let orthogonal = boundary.iter().any(|p| {
        frame.side(p).abs() <= tol && {
            let n = d.outward_normal(p);
            dot(&n, &frame.e).abs() <= 1e-2
        }
    });
    frame.ambiguous = tangent && orthogonal;
    frame.case_tag = if tangent {
        CaseTag::Case1Tangent
    } else if orthogonal {
        CaseTag::Case2Orthogonal
    } else {
        CaseTag::Undetermined
    };
}

/// Whether the reflected cap at `frame` lies in Ω on the given points.
pub fn reflected_cap_inside(d: &DomainSpec, frame: &HyperplaneFrame, points: &[Vec<f64>], tol: f64) -> bool {
    points
        .iter()
        .filter(|p| frame.in_cap(p) && d.contains(p))
        .all(|p| d.sdf(&frame.reflect(p)) <= tol)
}

#[cfg(test)]
mod tests {
    use super::super::{build_domain, ShapeSpec};
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ball_critical_plane_is_through_center() {
        let c = [0.3, -0.2, 0.5];
        let d = build_domain(&ShapeSpec::ball(&c, 0.7)).unwrap();
        for e in [[1.0, 0.0, 0.0], [0.0, 1.0, 1.0], [-1.0, 2.0, 0.5]] {
            let f = critical_plane(&d, &e).unwrap();
            let ce = dot(&c, &f.e);
            assert!((f.lambda - ce).abs() < 1e-6, "{} vs {ce}", f.lambda);
            assert!(f.lambda <= f.lambda_max);
        }
    }

    #[test]
    fn symmetric_pair_and_unperturbed_graph() {
        let two = build_domain(&ShapeSpec::union(vec![vec![-5.0, 0.0], vec![5.0, 0.0]], vec![1.0, 1.0])).unwrap();
        let f = critical_plane(&two, &[0.0, 1.0]).unwrap();
        assert!(f.lambda.abs() < 1e-6);
        let f = critical_plane(&two, &[1.0, 0.0]).unwrap();
        assert!(f.lambda.abs() < 1e-6);
        let disk = build_domain(&ShapeSpec::perturbed(1.0, 0.0, 3)).unwrap();
        for e in [[1.0, 0.0], [0.6, 0.8]] {
            assert!(critical_plane(&disk, &e).unwrap().lambda.abs() < 1e-6);
        }
    }

    #[test]
    fn symmetry_axes_of_perturbed_graph() {
        // r(θ) = 1 + 0.1 cos 2θ is symmetric in both coordinate axes
        let d = build_domain(&ShapeSpec::perturbed(1.0, 0.1, 2).plus_ball(0.5)).unwrap();
        for e in [[1.0, 0.0], [0.0, 1.0]] {
            let f = critical_plane(&d, &e).unwrap();
            assert!(f.lambda.abs() <= 1e-3 * d.diameter(), "{e:?}: {}", f.lambda);
        }
        // along the diagonal the plane stops short of the center
        let f = critical_plane(&d, &[1.0, 1.0]).unwrap();
        assert!(f.lambda.abs() > 1e-3 * d.diameter(), "{}", f.lambda);
    }

    #[test]
    fn caps_beyond_the_critical_plane_stay_inside() {
        let d = build_domain(&ShapeSpec::union(vec![vec![0.0, 0.0], vec![1.5, 0.5]], vec![1.0, 0.6])).unwrap();
        let f = critical_plane(&d, &[1.0, 0.0]).unwrap();
        let pts = d.boundary_samples(2000);
        let tol = 1e-9 * d.diameter();
        for k in 1..10 {
            let lam = f.lambda + (f.lambda_max - f.lambda) * k as f64 / 10.0;
            assert!(reflected_cap_inside(&d, &f.at(lam), &pts, tol));
        }
        assert!(!reflected_cap_inside(&d, &f.at(f.lambda - 0.05), &pts, tol));
    }

    #[test]
    fn rejects_bad_direction() {
        let d = build_domain(&ShapeSpec::ball(&[0.0, 0.0], 1.0)).unwrap();
        assert!(critical_plane(&d, &[0.0, 0.0]).is_err());
        assert!(critical_plane(&d, &[1.0, 0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn reflection_is_an_isometric_involution(
            e in prop::collection::vec(-1.0f64..1.0, 3),
            lambda in -2.0f64..2.0,
            x in prop::collection::vec(-5.0f64..5.0, 3),
            y in prop::collection::vec(-5.0f64..5.0, 3),
        ) {
            prop_assume!(crate::vec::norm(&e) > 1e-3);
            let f = HyperplaneFrame::new(&e, lambda, f64::INFINITY).unwrap();
            prop_assert!((crate::vec::norm(&f.e) - 1.0).abs() < 1e-12);
            let xx = f.reflect(&f.reflect(&x));
            for (a, b) in xx.iter().zip(&x) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let d0 = crate::vec::dist(&x, &y);
            let d1 = crate::vec::dist(&f.reflect(&x), &f.reflect(&y));
            prop_assert!((d0 - d1).abs() < 1e-12);
        }
    }
}
