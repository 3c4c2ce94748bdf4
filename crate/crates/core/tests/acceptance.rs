//! One test per acceptance criterion. Each prints a PASS/FAIL line with the
//! measured quantities before asserting.

use std::time::Instant;

use fracsym::cli::{run, Command, RunConfig};
use fracsym::constants::{eval_constants, psi_ball};
use fracsym::experiments::{counterexample_sweep, stability_sweep, summarize_counterexample, summarize_stability};
use fracsym::geometry::{build_domain, ShapeSpec};
use fracsym::rng::stream;
use fracsym::sampler::{exit_radius_cdf, sample_exit, ExitLaw};
use fracsym::verify::{
    check_closure, check_geometry_bounds, check_growth, check_harnack, check_hopf_on_witness, check_kernel_sandwich,
    check_poisson_mass, check_torsion_normalization, CheckStatus,
};
use fracsym::vec::norm;
use fracsym::wos::{estimate_u, WalkConfig};
use rand::Rng;

const DIMS: [usize; 3] = [1, 2, 3];
const ORDERS: [f64; 3] = [0.25, 0.5, 0.75];

fn report(criterion: u32, ok: bool, detail: &str) {
    println!("criterion {criterion}: {} {detail}", if ok { "PASS" } else { "FAIL" });
}

fn ks_one_sample(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max)
}

fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[test]
fn criterion_01_ball_torsion_oracle() {
    let start = Instant::now();
    let mut worst_z: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    let mut misses = Vec::new();
    for (gi, &n) in DIMS.iter().enumerate() {
        for (gj, &s) in ORDERS.iter().enumerate() {
            let p = eval_constants(n, s).unwrap();
            let d = build_domain(&ShapeSpec::ball(&vec![0.0; n], 1.0)).unwrap();
            let cfg = WalkConfig::default().with_seed(100 + (3 * gi + gj) as u64);
            let mut rng = stream(7, (3 * gi + gj) as u64);
            for _ in 0..20 {
                let x: Vec<f64> = loop {
                    let x: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
                    if x.iter().map(|v| v * v).sum::<f64>() < 1.0 {
                        break x;
                    }
                };
                let e = estimate_u(&x, &d, &p, &cfg).unwrap();
                let exact = psi_ball(&x, &vec![0.0; n], 1.0, &p);
                let z = if e.stderr > 0.0 { (e.mean - exact).abs() / e.stderr } else { 0.0 };
                let rel = e.stderr / exact;
                worst_z = worst_z.max(z);
                worst_rel = worst_rel.max(rel);
                if !e.agrees_with(exact, 3.0) {
                    misses.push(format!("disagree n={n} s={s} |x|={:.4}: {} ± {} vs {exact}", norm(&x), e.mean, e.stderr));
                }
                if rel > 0.01 {
                    misses.push(format!("imprecise n={n} s={s} |x|={:.4}: stderr/value {rel:.4}", norm(&x)));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = misses.is_empty() && secs <= 300.0;
    report(
        1,
        ok,
        &format!("180 points, max |z| {worst_z:.2}, max stderr/value {worst_rel:.4}, {secs:.0}s, misses {misses:?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_02_exit_law() {
    let mut worst: f64 = 0.0;
    for (k, &s) in ORDERS.iter().enumerate() {
        let p = eval_constants(2, s).unwrap();
        let law = ExitLaw::new(&p);
        let mut rng = stream(11, k as u64);
        let mut dir = [0.0; 2];
        let radii: Vec<f64> = (0..100_000).map(|_| law.draw(&mut rng, &mut dir)).collect();
        let d = ks_one_sample(radii, |r| exit_radius_cdf(r, s).unwrap());
        println!("s={s}: KS vs closed form {d:.5}");
        worst = worst.max(d);
    }
    let p1 = eval_constants(1, 0.5).unwrap();
    let p3 = eval_constants(3, 0.5).unwrap();
    let (mut r1, mut r3) = (stream(12, 1), stream(12, 3));
    let a: Vec<f64> = (0..100_000).map(|_| sample_exit(&[0.0], 1.0, &p1, &mut r1).point[0].abs()).collect();
    let b: Vec<f64> = (0..100_000)
        .map(|_| sample_exit(&[0.0; 3], 1.0, &p3, &mut r3).point.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let d13 = ks_two_sample(a, b);
    let ok = worst < 0.01 && d13 < 0.01;
    report(2, ok, &format!("max KS {worst:.5}, n=1 vs n=3 KS {d13:.5}"));
    assert!(ok);
}

#[test]
fn criterion_03_normalization() {
    let mut ok = true;
    for &n in &DIMS {
        for &s in &ORDERS {
            let p = eval_constants(n, s).unwrap();
            let t = check_torsion_normalization(&p);
            let m = check_poisson_mass(&p);
            println!("n={n} s={s}: torsion err {:.2e}, mass err {:.2e}", t.lhs, m.lhs);
            ok &= t.passed && m.passed;
        }
    }
    report(3, ok, "laplacian of the ball torsion at its center within 1e-3, kernel mass within 1e-4");
    assert!(ok);
}

#[test]
fn criterion_04_kernel_sandwich() {
    let mut ok = true;
    for &n in &DIMS {
        for &s in &ORDERS {
            let p = eval_constants(n, s).unwrap();
            let r = check_kernel_sandwich(&p, 10_000, 4);
            println!("n={n} s={s}: worst {:.4}, relative ratio range [{}, {}]", r.lhs, r.details["min_relative_ratio"], r.details["max_relative_ratio"]);
            ok &= r.passed;
        }
    }
    report(4, ok, "1e4 triples per (n, s)");
    assert!(ok);
}

#[test]
fn criterion_05_harnack_and_hopf() {
    let start = Instant::now();
    let p = eval_constants(2, 0.5).unwrap();
    let base = WalkConfig::default().with_walks(20_000).with_seed(5);
    let mut ok = true;
    let mut verdicts = Vec::new();
    for cfg in [base, base.with_walks(80_000)] {
        let h = check_harnack(&p, 0.5, &cfg).unwrap();
        let f = check_hopf_on_witness(&p, 0.5, &cfg).unwrap();
        println!(
            "walks {}: harnack {:?} (max ratio {}), hopf {:?} (inf_K v {})",
            cfg.n_walks, h.status, h.details["empirical_max_ratio"], f.status, f.details["inf_K_v"]
        );
        verdicts.push((h.passed, f.passed));
        ok &= h.status == CheckStatus::Passed && f.status == CheckStatus::Passed;
    }
    let flipped = (verdicts[0].0 && !verdicts[1].0) || (verdicts[0].1 && !verdicts[1].1);
    let secs = start.elapsed().as_secs_f64();
    ok &= !flipped && secs <= 600.0;
    report(5, ok, &format!("flipped {flipped}, {secs:.0}s"));
    assert!(ok);
}

#[test]
fn criterion_06_geometry_bounds() {
    let disk = build_domain(&ShapeSpec::ball(&[0.0, 0.0], 1.0)).unwrap();
    let dr = check_geometry_bounds(&disk, 200_000, 1).unwrap();
    let gap = dr[0].details["relative_gap"].as_f64().unwrap();
    let stadium_spec = ShapeSpec::segment(&[-1.0, 0.0], &[1.0, 0.0]).plus_ball(0.5);
    let stadium = build_domain(&stadium_spec).unwrap();
    let sr = check_geometry_bounds(&stadium, 200_000, 2).unwrap();
    for r in &sr {
        println!("{}: {} ≤ {} + {}", r.name, r.lhs, r.rhs, r.margin);
    }
    let tubes_ok = sr.iter().filter(|r| r.name.starts_with("tube")).count() >= 4 && sr.iter().all(|r| r.passed);
    let closure = check_closure(&ShapeSpec::segment(&[-1.0, 0.0], &[1.0, 0.0]), 0.5, 10_000, 3).unwrap();
    let closure_graph = check_closure(&ShapeSpec::perturbed(1.0, 0.1, 2), 0.5, 10_000, 4).unwrap();
    let ok = gap.abs() <= 1e-3 && dr[0].passed && tubes_ok && closure.passed && closure_graph.passed;
    report(6, ok, &format!("disk perimeter gap {gap:.2e}, stadium tubes {tubes_ok}, closure {}", closure.passed && closure_graph.passed));
    assert!(ok);
}

#[test]
fn criterion_07_growth_bounds() {
    let p = eval_constants(2, 0.5).unwrap();
    let stadium = build_domain(&ShapeSpec::segment(&[-1.0, 0.0], &[1.0, 0.0]).plus_ball(0.5)).unwrap();
    let r = check_growth(&stadium, &p, &WalkConfig::default().with_walks(10_000).with_seed(6), 1000).unwrap();
    report(7, r.passed, &format!("failure rate {} over 1000 points, {:?}", r.lhs, r.details));
    assert!(r.passed);
}

#[test]
fn criterion_08_stability_sweep() {
    let start = Instant::now();
    let p = eval_constants(2, 0.5).unwrap();
    let records = stability_sweep(&[0.2, 0.1, 0.05, 0.02], 2, 0.5, &p, &WalkConfig::default(), 64).unwrap();
    for r in &records {
        println!("eps {}: seminorm {:.4e} floor {:.4e} rho {:.4e} ratio {:.4} {:?}", r.shape_param, r.seminorm, r.noise_floor, r.rho, r.ratio, r.flag);
    }
    let s = summarize_stability(&records, 0.5);
    let secs = start.elapsed().as_secs_f64();
    let ok = s.passed && secs <= 1200.0;
    report(8, ok, &format!("{s:?}, {secs:.0}s"));
    assert!(ok);
}

#[test]
fn criterion_09_remote_balls_decay() {
    let start = Instant::now();
    let p = eval_constants(2, 0.5).unwrap();
    let cfg = WalkConfig::default().with_walks(1_000_000);
    let records = counterexample_sweep(&[4.0, 8.0, 16.0, 32.0], &p, &cfg, 64).unwrap();
    for r in &records {
        println!("L {}: seminorm {:.4e} floor {:.4e} rho {} ratio {:.4e}", r.shape_param, r.seminorm, r.noise_floor, r.rho, r.ratio);
    }
    let s = summarize_counterexample(&records, &p);
    let secs = start.elapsed().as_secs_f64();
    let ok = s.slope_within_tolerance && s.ratio_increasing && secs <= 1800.0;
    report(9, ok, &format!("fitted slope {:?} (target {} ± 0.5), ratio increasing {}, {secs:.0}s", s.fitted_slope, s.target_slope, s.ratio_increasing));
    assert!(ok);
}

#[test]
fn criterion_10_worker_count_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for (k, workers) in [1usize, 2, 5].into_iter().enumerate() {
        let out = dir.path().join(format!("w{k}"));
        let text = format!(
            r#"{{"params": {{"n": 2, "s": 0.5}}, "walk": {{"n_walks": 3000}}, "seed": 42,
                "l_list": [4, 8], "m_boundary": 16, "output_dir": {:?}}}"#,
            out
        );
        let cfg = RunConfig::parse(&text).unwrap();
        run(Command::Counterexample, &cfg, Some(workers)).unwrap();
        let text = format!(
            r#"{{"params": {{"n": 2, "s": 0.5}}, "walk": {{"n_walks": 3000}}, "seed": 42,
                "shape": {{"kind": "minkowski", "inner": {{"kind": "perturbed_ball_2d", "a": 1, "eps": 0.1, "k": 3}}, "radius": 0.4}},
                "points": [[0.3, 0.2], [1.1, 0.0]], "output_dir": {:?}}}"#,
            out.join("solve")
        );
        run(Command::Solve, &RunConfig::parse(&text).unwrap(), Some(workers)).unwrap();
        csvs.push((
            std::fs::read(out.join("results.csv")).unwrap(),
            std::fs::read(out.join("solve").join("results.csv")).unwrap(),
        ));
    }
    let ok = csvs.windows(2).all(|w| w[0] == w[1]);
    report(10, ok, "counterexample and solve CSVs at 1, 2 and 5 workers");
    assert!(ok);
}
