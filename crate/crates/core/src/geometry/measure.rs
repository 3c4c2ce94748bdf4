//! Volumes, perimeters and the ball-deviation functional.

use super::{build_domain, Body, DomainSpec, HyperplaneFrame, ShapeSpec};
use crate::error::{Error, Result};
use crate::estimate::{reduce_blocks, Estimate, Moments};
use crate::rng::{derive_seed_str, stream};
use crate::vec::dist;

/// `out(p) - in(p)` extended outside Ω by `out(p) + dist(p, Ω)`, which
/// never undercuts the value at the nearest boundary point.
fn deviation_at(d: &DomainSpec, p: &[f64]) -> f64 {
    d.farthest_distance(p) + d.sdf(p)
}

/// Nelder–Mead minimization from a single start.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], step: f64, xtol: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += step;
        simplex.push(p);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let size = simplex[1..].iter().map(|p| dist(p, &simplex[0])).fold(0.0, f64::max);
        if size < xtol {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < vals[n].min(fr) {
                simplex[n] = xc;
                vals[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    simplex[i] = best.iter().zip(&simplex[i]).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    vals[i] = f(&simplex[i]);
                }
            }
        }
    }
    let i = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    (simplex[i].clone(), vals[i])
}

/// `ρ(Ω) = inf_p (outradius(p) - inradius(p))` over centers `p ∈ Ω`, by
/// restarted Nelder–Mead from the box center and eight perturbations of it.
pub fn rho_deviation(d: &DomainSpec) -> Result<f64> {
    let diam = d.diameter();
    if !(diam.is_finite() && diam > 0.0) || d.volume().mean <= 0.0 {
        return Err(Error::Shape("deviation from a ball needs a bounded domain with interior".into()));
    }
    let n = d.dim();
    let (lo, hi) = d.bounding_box();
    let center: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut seeds = vec![center.clone()];
    for j in 0..8 {
        let mut p = center.clone();
        let axis = j % n;
        let sign = if (j / n) % 2 == 0 { 1.0 } else { -1.0 };
        let frac = 0.25 * (1 + j / (2 * n)) as f64;
        p[axis] += sign * frac * 0.5 * (hi[axis] - lo[axis]);
        seeds.push(p);
    }
    let f = |p: &[f64]| deviation_at(d, p);
    let mut best = f64::INFINITY;
    for s in &seeds {
        let (mut x, mut v) = nelder_mead(&f, s, 0.1 * diam, 1e-10 * diam, 4000);
        // restart once from the optimum to escape a collapsed simplex
        let (x2, v2) = nelder_mead(&f, &x, 1e-3 * diam, 1e-12 * diam, 4000);
        if v2 < v {
            x = x2;
            v = v2;
        }
        let _ = x;
        best = best.min(v);
    }
    Ok(best.max(0.0))
}

/// `|Ω △ Q(Ω)|` by uniform sampling in a box covering both sets.
pub fn symdiff_measure(d: &DomainSpec, frame: &HyperplaneFrame, samples: u64, seed: u64) -> Result<Estimate> {
    let n = d.dim();
    if frame.e.len() != n {
        return Err(Error::Parameter("plane direction has the wrong dimension".into()));
    }
    let (lo, hi) = d.bounding_box();
    let mut blo = lo.to_vec();
    let mut bhi = hi.to_vec();
    // reflected corners of the box bound the reflected domain
    for mask in 0..(1u64 << n) {
        let corner: Vec<f64> = (0..n).map(|k| if mask >> k & 1 == 1 { hi[k] } else { lo[k] }).collect();
        let q = frame.reflect(&corner);
        for k in 0..n {
            blo[k] = blo[k].min(q[k]);
            bhi[k] = bhi[k].max(q[k]);
        }
    }
    let vol: f64 = blo.iter().zip(&bhi).map(|(a, b)| b - a).product();
    if !(vol > 0.0) {
        return Err(Error::Shape("bounding box has zero volume".into()));
    }
    let seed = derive_seed_str(seed, "symdiff");
    let m = reduce_blocks(
        samples,
        |a, b| {
            let mut acc = Moments::default();
            let mut x = vec![0.0; n];
            let mut q = vec![0.0; n];
            for i in a..b {
                let mut rng = stream(seed, i);
                for k in 0..n {
                    let u: f64 = rand::Rng::random(&mut rng);
                    x[k] = blo[k] + u * (bhi[k] - blo[k]);
                }
                frame.reflect_into(&x, &mut q);
                acc.push(if d.contains(&x) != d.contains(&q) { vol } else { 0.0 });
            }
            acc
        },
        Moments::merge,
    )
    .unwrap_or_default();
    Ok(m.to_estimate())
}

/// `|{x ∈ Ω : dist(x, ∂Ω) < δ}|` by uniform sampling in the bounding box.
pub fn tubular_volume(d: &DomainSpec, delta: f64, samples: u64, seed: u64) -> Result<Estimate> {
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!("tube width must be positive, got {delta}")));
    }
    let n = d.dim();
    let vol = d.box_volume();
    let seed = derive_seed_str(seed, "tube");
    let m = reduce_blocks(
        samples,
        |a, b| {
            let mut acc = Moments::default();
            let mut x = vec![0.0; n];
            for i in a..b {
                let mut rng = stream(seed, i);
                d.sample_box(&mut rng, &mut x);
                let q = d.query(&x);
                acc.push(if q.inside && q.dist_boundary < delta { vol } else { 0.0 });
            }
            acc
        },
        Moments::merge,
    )
    .unwrap_or_default();
    Ok(m.to_estimate())
}

/// Length of the boundary of a planar domain.
pub fn perimeter_2d(d: &DomainSpec) -> Result<f64> {
    if d.dim() != 2 {
        return Err(Error::Unsupported(format!("perimeter of a {}-dimensional domain", d.dim())));
    }
    match &d.body {
        Body::Balls { centers, radii } => {
            for (i, (a, ra)) in centers.iter().zip(radii).enumerate() {
                for (b, rb) in centers.iter().zip(radii).skip(i + 1) {
                    if dist(a, b) < ra + rb {
                        return Err(Error::Unsupported("perimeter of overlapping disks".into()));
                    }
                }
            }
            Ok(radii.iter().map(|r| std::f64::consts::TAU * r).sum())
        }
        Body::Capsule { start, end, radius } => {
            if *radius == 0.0 {
                return Err(Error::Unsupported("perimeter of a segment".into()));
            }
            Ok(2.0 * dist(start, end) + std::f64::consts::TAU * radius)
        }
        Body::Radial(c) => Ok(c.perimeter()),
    }
}

/// Compares two descriptions of `G + B_R` on `trials` points drawn from the
/// box around it: the closed-set form `dist(x, Ḡ) < R`, and a constructive
/// witness `a ∈ G` (open) with `|x - a| < R`. Also checks the built sum
/// agrees. Points within `1e-9` of the boundary are skipped.
pub fn minkowski_closure_check(inner: &ShapeSpec, radius: f64, trials: u64, seed: u64) -> Result<bool> {
    if !(radius > 0.0) {
        return Err(Error::Precondition(format!("Minkowski radius must be positive, got {radius}")));
    }
    let g = build_domain(inner)?;
    let omega = build_domain(&inner.clone().plus_ball(radius))?;
    let n = g.dim();
    let (lo, hi) = omega.bounding_box();
    let (lo, hi) = (lo.to_vec(), hi.to_vec());
    let seed = derive_seed_str(seed, "closure");
    let thin = g.volume().mean == 0.0;
    let mut agree = true;
    let mut accepted = 0u64;
    let mut i = 0u64;
    while accepted < trials && i < 50 * trials.max(1) {
        let mut rng = stream(seed, i);
        i += 1;
        let x: Vec<f64> = (0..n)
            .map(|k| lo[k] + rand::Rng::random::<f64>(&mut rng) * (hi[k] - lo[k]))
            .collect();
        let sd = g.sdf(&x);
        let closed = sd.max(0.0) < radius;
        if (sd - radius).abs() < 1e-9 {
            continue;
        }
        let witness = if g.contains(&x) {
            true
        } else if thin {
            // no interior to step into: the nearest point is the witness
            dist(&x, &g.closest_boundary_point(&x)) < radius
        } else {
            let p = g.closest_boundary_point(&x);
            let dx = dist(&x, &p);
            if dx >= radius {
                false
            } else {
                // step past the boundary point into the open set
                let t = 0.5 * (radius - dx);
                let a: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + (dx + t) * (pi - xi) / dx).collect();
                g.contains(&a)
            }
        };
        if !closed {
            // the rejection step: only points of the sum are compared
            agree &= !witness && !omega.contains(&x);
            continue;
        }
        accepted += 1;
        agree &= witness && omega.contains(&x);
    }
    Ok(agree && accepted == trials)
}
