//! Acceptance run: one line per criterion, nonzero exit on any failure.

mod common;

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;
use randlocal::classify::{classify_germ_measure, ClassifyParams, Verdict};
use randlocal::cocycle::{
    det_identity_residual, find_invariant_form, lyapunov_spectrum, min_product_norm, oseledec_matrix, CirclePoint,
    CocycleSpec, MatrixEnsemble, DEFAULT_GAP_THRESHOLD, FORM_MAX_ITERS,
};
use randlocal::gallery::{
    adversarial_orbit, e1_blowup_statistics, e1_tail_probability, e2_ensemble, l1_ensemble, level_length,
    RotationConstruction, GOLDEN_MEAN,
};
use randlocal::germ_dynamics::{
    fatou_membership, fatou_test_points, grid_nodes, limit_map_estimate, rank_profile, simulate_orbit,
    stable_set, trapping_radius, GermEnsemble, LimitMapOptions, TrapOptions,
};
use randlocal::jets::Jet;
use randlocal::linalg::{c, real_matrix, CMatrix};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn l1() -> CocycleSpec {
    CocycleSpec::Iid(l1_ensemble())
}

fn c01_l1_spectrum() -> Outcome {
    let start = Instant::now();
    let s = lyapunov_spectrum(&l1(), 10_000, 100, 1, DEFAULT_GAP_THRESHOLD).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let (k1, k2) = (s.exponents[0], s.exponents[1]);
    check(
        within(k1, 0.0, 0.02) && within(k2, -2f64.ln(), 0.02) && elapsed < Duration::from_secs(10),
        format!("kappa = ({k1:.5}, {k2:.5}), {:.2}s", elapsed.as_secs_f64()),
    )
}

fn c02_e2_spectrum() -> Outcome {
    let e2 = e2_ensemble();
    let spec = CocycleSpec::Iid(e2.linear_parts().map_err(|e| e.to_string())?);
    let s = lyapunov_spectrum(&spec, 10_000, 100, 2, DEFAULT_GAP_THRESHOLD).map_err(|e| e.to_string())?;
    let (k1, k2) = (s.exponents[0], s.exponents[1]);
    let verdict = classify_germ_measure(&e2, &ClassifyParams { seed: 2, ..Default::default() })
        .map_err(|e| e.to_string())?
        .verdict;
    check(
        within(k1, 0.0, 0.02) && within(k2, 0.5 * 0.5f64.ln(), 0.02) && verdict == Verdict::SemiNeutral,
        format!("kappa = ({k1:.5}, {k2:.5}), verdict {verdict:?}"),
    )
}

fn c03_det_identity() -> Outcome {
    let mut rng = common::rng(3);
    let mut specs = vec![l1()];
    for _ in 0..5 {
        let atoms = rng.gen_range(2..=4);
        specs.push(CocycleSpec::Iid(common::random_ensemble(&mut rng, 2, atoms)));
    }
    let mut worst: f64 = 0.0;
    for (i, spec) in specs.iter().enumerate() {
        let r = det_identity_residual(spec, 10_000, 100, 30 + i as u64).map_err(|e| e.to_string())?;
        worst = worst.max(r.residual);
    }
    check(worst <= 0.03, format!("max residual {worst:.3e} over L1 and 5 random ensembles"))
}

fn c04_oseledec() -> Outcome {
    let o = oseledec_matrix(&l1(), 4, 10_000).map_err(|e| e.to_string())?;
    let s = lyapunov_spectrum(&l1(), 10_000, 100, 4, DEFAULT_GAP_THRESHOLD).map_err(|e| e.to_string())?;
    let gap = o
        .log_eigenvalues
        .iter()
        .zip(&s.exponents)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    check(gap <= 1e-2, format!("log eigenvalues {:?}, spectrum {:?}, gap {gap:.3e}", o.log_eigenvalues, s.exponents))
}

fn c05_invariant_form() -> Outcome {
    let mut rng = common::rng(5);
    let mut worst_res: f64 = 0.0;
    let mut worst_unit: f64 = 0.0;
    let mut worst_time = Duration::ZERO;
    for case in 0..10 {
        let dim = 2 + case % 2;
        let h = common::conditioned(&mut rng, dim, 1e3);
        let h_inv = h.clone().try_inverse().ok_or("H not invertible")?;
        let gens: Vec<CMatrix> = (0..3).map(|_| &h * common::haar_unitary(&mut rng, dim) * &h_inv).collect();
        let start = Instant::now();
        let out = find_invariant_form(&gens, FORM_MAX_ITERS, 1e-8).map_err(|e| e.to_string())?;
        worst_time = worst_time.max(start.elapsed());
        let Some(f) = out.found() else {
            return Err(format!("case {case} (dim {dim}) found no form"));
        };
        worst_res = worst_res.max(f.residual);
        worst_unit = worst_unit.max(f.unitarity_defect);
    }
    let shear = real_matrix(&[&[1.0, 1.0], &[0.0, 1.0]]);
    let shear_fails = find_invariant_form(&[shear], FORM_MAX_ITERS, 1e-8).map_err(|e| e.to_string())?.found().is_none();
    check(
        worst_res <= 1e-8 && worst_unit <= 1e-6 && shear_fails && worst_time < Duration::from_secs(5),
        format!(
            "max residual {worst_res:.2e}, max unitarity defect {worst_unit:.2e}, slowest {:.3}s, shear rejected: {shear_fails}",
            worst_time.as_secs_f64()
        ),
    )
}

fn c06_norm_floor() -> Outcome {
    let r = min_product_norm(&l1(), 1_000, 1_000, 6).map_err(|e| e.to_string())?;
    check(r.min_norm >= 1.0 - 1e-10, format!("min norm {:.17} at {:?}", r.min_norm, r.argmin))
}

/// `a == b` up to one unit in the last place of `b`, subnormals included.
fn one_ulp(a: f64, b: f64) -> bool {
    let ulp = if b == 0.0 { f64::from_bits(1) } else { f64::from_bits(b.abs().to_bits() + 1) - b.abs() };
    (a - b).abs() <= ulp
}

/// `x * 2^-k` without forming `2^-k`, which underflows for `k > 1074`.
fn scale_down(mut x: f64, mut k: i32) -> f64 {
    while k > 0 {
        let step = k.min(960);
        x *= 2f64.powi(-step);
        k -= step;
    }
    x
}

fn c07_e2_boundedness() -> Outcome {
    let e2 = e2_ensemble();
    let steps = 10_000;
    let report = fatou_membership(&e2, 0.05, 16, steps, 1_000, 7).map_err(|e| e.to_string())?;
    let starts = fatou_test_points(2, 0.05, 64, 7);
    let mut law_ok = true;
    let mut halvings = 0usize;
    for (k, z0) in starts.iter().enumerate() {
        let orbit = simulate_orbit(&e2, z0, steps, 700 + k as u64).map_err(|e| e.to_string())?;
        let mut alpha = 0i32;
        for (p, &choice) in orbit.points[1..].iter().zip(&orbit.choices) {
            alpha += (choice == 0) as i32;
            law_ok &= one_ulp(p.z[1].re, scale_down(z0[1].re, alpha)) && one_ulp(p.z[1].im, scale_down(z0[1].im, alpha));
        }
        halvings += alpha as usize;
    }
    let ratio = halvings as f64 / (starts.len() * steps) as f64;
    check(
        report.fraction == 1.0 && law_ok && (0.48..=0.52).contains(&ratio),
        format!("bounded fraction {}, exact law {law_ok}, alpha(n)/n = {ratio:.4}", report.fraction),
    )
}

fn c08_attracting_trap() -> Outcome {
    let f = Jet::from_terms(1, 8, &[vec![(vec![1], c(0.5, 0.0)), (vec![2], c(1.0, 0.0))]]).map_err(|e| e.to_string())?;
    let ens = GermEnsemble::new(vec![(f, 1.0)], 10.0).map_err(|e| e.to_string())?;
    let opts = TrapOptions { seed: 8, ..Default::default() };
    let r = trapping_radius(&ens, Some(0.1), &opts).map_err(|e| e.to_string())?;
    let k = &r.contraction;
    check(
        r.eps == 0.1 && r.r == 0.1 && r.verified && k.orbits == 1_000 && k.converged == k.orbits && k.steps == 100,
        format!(
            "eps {}, r {}, verified {}, {}/{} orbits below {:.0e} in {} steps",
            r.eps, r.r, r.verified, k.converged, k.orbits, k.floor, k.steps
        ),
    )
}

fn c09_jet_law() -> Outcome {
    let g = Jet::from_terms(
        2,
        8,
        &[vec![(vec![1, 0], c(1.0, 0.0)), (vec![1, 1], c(1.0, 0.0))], vec![(vec![0, 1], c(1.0, 0.0))]],
    )
    .map_err(|e| e.to_string())?;
    let mut iterate_ok = true;
    let mut gn = Jet::identity(2, 8);
    for n in 1..=50 {
        gn = g.compose(&gn).map_err(|e| e.to_string())?;
        iterate_ok &= gn.coeff(0, &[1, 1]) == c(n as f64, 0.0);
        iterate_ok &= g.iterate(n).map_err(|e| e.to_string())?.coeff(0, &[1, 1]) == c(n as f64, 0.0);
    }
    let mut rng = common::rng(9);
    let mut worst: f64 = 0.0;
    for _ in 0..1_000 {
        let [f, g, h] = [0, 1, 2].map(|_| common::random_jet(&mut rng, 2, 8, 1.0));
        let left = f.compose(&g).and_then(|fg| fg.compose(&h)).map_err(|e| e.to_string())?;
        let right = g.compose(&h).and_then(|gh| f.compose(&gh)).map_err(|e| e.to_string())?;
        worst = worst.max(left.relative_distance(&right));
    }
    check(iterate_ok && worst <= 1e-12, format!("zw-coefficient law {iterate_ok}, max associativity defect {worst:.2e}"))
}

fn c10_adversarial() -> Outcome {
    let mut rng = common::rng(10);
    let mut monotone = true;
    let mut longest = 0;
    let mut worst_ratio = f64::INFINITY;
    for _ in 0..1_000 {
        let z0 = loop {
            let z = c(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
            if z.norm() <= 0.2 && z.norm() > 0.0 {
                break z;
            }
        };
        let o = adversarial_orbit(z0, GOLDEN_MEAN, 1_000_000).map_err(|e| e.to_string())?;
        monotone &= o.monotone(1e-14);
        worst_ratio = worst_ratio.min(o.min_ratio);
        longest = longest.max(o.choices.len());
    }
    let o = adversarial_orbit(c(0.1, 0.0), GOLDEN_MEAN, 1_000_000).map_err(|e| e.to_string())?;
    check(
        monotone && o.exit_step.is_some(),
        format!(
            "monotone {monotone} (min ratio {worst_ratio:.17}, longest {longest} steps), z0 = 0.1 exits at step {:?}",
            o.exit_step
        ),
    )
}

fn c11_rotation() -> Outcome {
    let depth = 10;
    let r = RotationConstruction::new(GOLDEN_MEAN, depth).map_err(|e| e.to_string())?;
    let mut rng = common::rng(11);
    let mut identity_err: f64 = 0.0;
    for level in &r.levels {
        for s in 0..1_000 {
            let x = if s % 2 == 0 {
                CirclePoint(rng.gen())
            } else {
                let j = rng.gen_range(0..=2 * level.a + 1);
                let offset = rng.gen_range(-(level.eps as i64)..=level.eps as i64);
                CirclePoint(r.theta.0.wrapping_mul(j).wrapping_sub(r.theta.0).wrapping_add(offset as u64))
            };
            let rhs = level.phi(x) - level.phi(x.rotate(r.theta));
            identity_err = identity_err.max((level.f(x) - rhs).abs());
        }
    }
    let integral_ok = r.levels.iter().all(|l| l.phi_integral() <= (-(l.k as f64)).exp2() * (1.0 + 1e-6));
    let mut bound_ok = true;
    let mut worst_gap = f64::NEG_INFINITY;
    for s in 0..200 {
        let x = match s % 4 {
            0 => CirclePoint(rng.gen()),
            1 => CirclePoint(0),
            2 => r.designated_point(rng.gen_range(1..=depth)),
            _ => CirclePoint(0).rotate_n(r.theta, rng.gen_range(0..level_length(depth))),
        };
        let n = rng.gen_range(1..=2 * level_length(depth) as usize);
        let gap = r.log_product(x, n) - r.phi(x);
        worst_gap = worst_gap.max(gap);
        bound_ok &= gap <= 1e-12;
    }
    let top = &r.levels[depth as usize - 1];
    let designated = top.phi(r.designated_point(depth));
    check(
        identity_err <= 1e-12 && integral_ok && bound_ok && designated == depth as f64,
        format!(
            "identity error {identity_err:.2e}, integrals bounded {integral_ok}, max log M^n - phi = {worst_gap:.3e}, phi_K at designated point {designated}"
        ),
    )
}

fn hausdorff(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    let d = |x: &[Complex64], y: &[Complex64]| x.iter().zip(y).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
    let one_way = |a: &[Vec<Complex64>], b: &[Vec<Complex64>]| {
        a.iter().map(|x| b.iter().map(|y| d(x, y)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

/// Stable set through `(0.1, 0.05)` compared with the grid nodes on the line
/// `{z_axis = value}`.
fn stable_line(ens: &MatrixEnsemble, seed: u64, axis: usize, value: f64) -> Result<(f64, f64, f64), String> {
    let germs = common::linear_germs(ens, 8);
    let opts = LimitMapOptions::default();
    let est = limit_map_estimate(&germs, seed, &opts).map_err(|e| e.to_string())?;
    let profile = rank_profile(&est, 1e-3);
    let set = stable_set(&est, &[c(0.1, 0.0), c(0.05, 0.0)], 1e-3).map_err(|e| e.to_string())?;
    let nodes = grid_nodes(opts.rho, opts.grid_size);
    let line: Vec<Vec<Complex64>> = nodes
        .iter()
        .map(|&t| if axis == 0 { vec![c(value, 0.0), c(t, 0.0)] } else { vec![c(t, 0.0), c(value, 0.0)] })
        .collect();
    let s = &profile.sigma_origin;
    Ok((hausdorff(&set.points, &line), s[0], s[1]))
}

fn c12_stable_sets() -> Outcome {
    let diag_semi = MatrixEnsemble::uniform(vec![real_matrix(&[&[0.5, 0.0], &[0.0, 1.0]])]).map_err(|e| e.to_string())?;
    let diag_first = MatrixEnsemble::uniform(vec![real_matrix(&[&[1.0, 0.0], &[0.0, 0.5]])]).map_err(|e| e.to_string())?;
    let runs = [
        ("L1, {w = 0.05}", stable_line(&l1_ensemble(), 12, 1, 0.05)?),
        ("diag(1/2, 1), {w = 0.05}", stable_line(&diag_semi, 12, 1, 0.05)?),
        ("diag(1, 1/2), {z = 0.1}", stable_line(&diag_first, 12, 0, 0.1)?),
    ];
    let ok = runs.iter().all(|(_, (h, s1, s2))| *h <= 1e-3 && *s1 >= 1.0 - 1e-3 && *s2 <= 1e-3);
    let detail = runs
        .iter()
        .map(|(name, (h, s1, s2))| format!("{name}: Hausdorff {h:.1e}, sigma ({s1:.4}, {s2:.1e})"))
        .collect::<Vec<_>>()
        .join("; ");
    check(ok, detail)
}

fn c13_e1_blowup() -> Outcome {
    let trials = 100_000;
    let short = e1_blowup_statistics(0.5, trials, 100, 1e3, 13).map_err(|e| e.to_string())?;
    let long = e1_blowup_statistics(0.5, trials, 10_000, 1e3, 13).map_err(|e| e.to_string())?;
    let tail = e1_tail_probability(100, trials, 13).map_err(|e| e.to_string())?;
    check(
        long.fraction > short.fraction && tail.estimate >= 0.01 && tail.estimate <= 0.04,
        format!(
            "fraction {:.5} at 1e2, {:.5} at 1e4; p_100 = {:.5} (exact {:.5})",
            short.fraction, long.fraction, tail.estimate, tail.exact
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("L1 spectrum", c01_l1_spectrum),
        ("E2 spectrum and verdict", c02_e2_spectrum),
        ("determinant identity", c03_det_identity),
        ("Oseledec consistency", c04_oseledec),
        ("invariant form", c05_invariant_form),
        ("semi-neutral norm floor", c06_norm_floor),
        ("E2 boundedness and exact law", c07_e2_boundedness),
        ("attracting trap", c08_attracting_trap),
        ("jet law and associativity", c09_jet_law),
        ("adversarial monotonicity", c10_adversarial),
        ("rotation cocycle", c11_rotation),
        ("stable sets", c12_stable_sets),
        ("E1 blowup trend", c13_e1_blowup),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {:02} {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("[FAIL] {:02} {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
