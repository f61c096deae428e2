//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use actstab::expansivity::{dynamical_ball, mu_expansivity_report, separation_search_in};
use actstab::group::{GeneratingSet, GroupFamily, NormalForm};
use actstab::pseudo_orbit::{convert_generating_set, perturbed_orbit, PseudoOrbit};
use actstab::shadowing::{default_search_box, scale_table, shadow_diagonal_linear, shadow_generic, shadow, GridSpec, Solver};
use actstab::stability::{
    build_h_window, build_semiconjugacy, extract_persistence_witness, pullback_bookkeeping,
    singleton_h_from_map, verify_h_properties, verify_semiconjugacy,
};
use actstab::{
    models, Action, Budget, CayleyBall, CoordinateChange, LebesgueMeasure, MetricEntourage,
    PerturbationSpec, Point,
};
use actstab_cli::{run, ExperimentConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn ball(phi: &Action, r: usize) -> Arc<CayleyBall> {
    Arc::new(CayleyBall::new(phi.genset(), r, Budget::default()).unwrap())
}

fn uniform(seed: u64, n: usize, dim: usize, lo: f64, hi: f64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Point::new((0..dim).map(|_| rng.gen_range(lo..hi)).collect()).unwrap())
        .collect()
}

fn sine_b() -> (Action, Action) {
    let phi = models::example_3_7(2.0).unwrap();
    let (psi, _) = phi.perturb(&PerturbationSpec::sine(0.01, 1.0, 0.0, &["b"]), 0).unwrap();
    (phi, psi)
}

/// Per-coordinate `max_g |x_{g,i} - scale_i(g) y_i|`.
fn coordinate_radii(po: &PseudoOrbit, phi: &Action, y: &Point) -> Vec<f64> {
    let scales = scale_table(phi, po.ball()).unwrap();
    let mut out = vec![0.0f64; phi.dim()];
    for (p, l) in po.points().iter().zip(&scales) {
        for i in 0..phi.dim() {
            out[i] = out[i].max((p.coords()[i] - l[i] * y.coords()[i]).abs());
        }
    }
    out
}

fn shadowing_bound() -> Verdict {
    let (lambda, delta, n) = (2.0, 1e-3, 30);
    let phi = models::example_3_7(lambda).unwrap();
    let b = ball(&phi, n);
    let eta = delta / (1.0 + lambda);
    let xs = uniform(101, 1000, 1, -2.0, 2.0);
    let rows: Vec<(f64, f64, bool)> = xs
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let po = perturbed_orbit(&phi, b.clone(), x, eta, 10_000 + i as u64).unwrap();
            let cf = shadow_diagonal_linear(&po, &phi).unwrap();
            let bf = shadow_generic(&po, &phi, &default_search_box(&po), GridSpec::default()).unwrap();
            (cf.tracing_radius, bf.point.distance(&cf.point), po.realized_epsilon() <= delta)
        })
        .collect();
    let worst = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let gap = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let valid = rows.iter().all(|r| r.2);
    verdict(
        valid && worst <= delta / (lambda - 1.0) && gap <= 1e-6,
        format!("1000 orbits: max radius {worst:.3e} <= 1e-3, max |y_bf - y_cf| {gap:.3e} <= 1e-6"),
    )
}

fn multi_generator() -> Verdict {
    let delta = 1e-3;
    let phi = models::example_2_2(2).unwrap();
    let b = ball(&phi, 8);
    let eta = delta / (1.0 + phi.lipschitz_max());
    let xs = uniform(202, 200, 2, -2.0, 2.0);
    let worst = xs
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let po = perturbed_orbit(&phi, b.clone(), x, eta, 20_000 + i as u64).unwrap();
            let y = shadow_diagonal_linear(&po, &phi).unwrap().point;
            coordinate_radii(&po, &phi, &y).into_iter().fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    verdict(worst <= delta, format!("200 orbits: max per-coordinate radius {worst:.3e} <= {delta}"))
}

fn solvable_group() -> Verdict {
    let delta = 1e-3;
    let phi = models::example_3_6(2.0, 1).unwrap();
    let b = ball(&phi, 6);
    let eta = delta / (1.0 + phi.lipschitz_max());
    let xs = uniform(303, 200, 1, -2.0, 2.0);
    let rows: Vec<(f64, f64)> = xs
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let po = perturbed_orbit(&phi, b.clone(), x, eta, 30_000 + i as u64).unwrap();
            let s = shadow(&po, &phi, Solver::BruteForce(GridSpec::default())).unwrap();
            (s.tracing_radius, po.declared_epsilon())
        })
        .collect();
    let ok = rows.iter().all(|(r, d)| *r <= 2.0 * d);
    let worst = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    verdict(ok, format!("200 orbits, brute force: max radius {worst:.3e} <= 2 * {delta}"))
}

struct StabilityRun {
    verdict: Verdict,
    singleton_passed: bool,
}

fn stability_construction() -> StabilityRun {
    let (phi, psi) = sine_b();
    let e = MetricEntourage::new(0.011).unwrap();
    let xs = uniform(404, 500, 1, -2.0, 2.0);
    let mut t = build_semiconjugacy(&phi, &psi, ball(&phi, 20), &e, &xs, Solver::ClosedForm).unwrap();
    let hs: Vec<_> = ["b", "b^-1", "b b"]
        .iter()
        .map(|w| phi.genset().reduce_str(w).unwrap())
        .collect();
    let r = verify_semiconjugacy(&mut t, &phi, &psi, &hs, 1e-6).unwrap();
    let s = singleton_h_from_map(&t, &LebesgueMeasure::new(1), &e);
    StabilityRun {
        verdict: verdict(
            r.unsolved.is_empty() && r.max_distance <= 0.01 && r.max_residual <= 1e-6,
            format!(
                "500 samples: sup |x - f(x)| {:.3e} <= 0.01, residual over {{b, b^-1, b^2}} {:.3e} <= 1e-6",
                r.max_distance, r.max_residual
            ),
        ),
        singleton_passed: s.passed,
    }
}

struct HRun {
    verdict: Verdict,
    witnesses_passed: bool,
}

fn h_map_properties() -> HRun {
    let (phi, psi) = sine_b();
    let ep = MetricEntourage::new(0.02).unwrap();
    let mu = LebesgueMeasure::new(1);
    let radii: Vec<usize> = (0..=12).collect();
    let xs = uniform(505, 100, 1, -2.0, 2.0);
    let exact: Vec<_> = ["b", "b b"].iter().map(|w| phi.genset().reduce_str(w).unwrap()).collect();
    let inv = phi.genset().reduce_str("b^-1").unwrap();
    struct Row {
        nested: bool,
        ratio_err: f64,
        sandwich: bool,
        inverse_excess: f64,
        witness: bool,
    }
    let rows: Vec<Row> = xs
        .par_iter()
        .map(|x| {
            let mut row = Row {
                nested: true,
                ratio_err: 0.0,
                sandwich: true,
                inverse_excess: 0.0,
                witness: false,
            };
            for h in &exact {
                let r = verify_h_properties(&phi, &psi, &ep, x, h, &radii, &mu, None).unwrap();
                row.nested &= r.nested;
                row.sandwich &= r.sandwich_holds && !r.sandwich.is_empty();
                row.ratio_err = r.volume_ratios.iter().map(|q| (q - 0.5).abs()).fold(row.ratio_err, f64::max);
            }
            let r = verify_h_properties(&phi, &psi, &ep, x, &inv, &radii, &mu, None).unwrap();
            row.inverse_excess = r
                .sandwich
                .iter()
                .map(|c| c.inner_excess.max(c.outer_excess))
                .fold(0.0, f64::max);
            let hw = build_h_window(&phi, &psi, &ep, x, &radii).unwrap();
            row.witness = extract_persistence_witness(&hw, &phi, &psi)
                .unwrap()
                .is_some_and(|w| w.passed && w.m == 12);
            row
        })
        .collect();
    let nested = rows.iter().all(|r| r.nested);
    let ratio_err = rows.iter().map(|r| r.ratio_err).fold(0.0, f64::max);
    let sandwich = rows.iter().all(|r| r.sandwich);
    let inverse_excess = rows.iter().map(|r| r.inverse_excess).fold(0.0, f64::max);
    let witnesses = rows.iter().all(|r| r.witness);
    HRun {
        verdict: verdict(
            nested && ratio_err <= 1e-12 && sandwich && witnesses && inverse_excess <= 1e-12,
            format!(
                "100 samples: nested {nested}, max |ratio - 1/2| {ratio_err:.1e}, exact sandwich for h in {{b, b^2}} {sandwich} \
                 (h = b^-1 off by at most {inverse_excess:.1e}), witnesses audited {witnesses}"
            ),
        ),
        witnesses_passed: witnesses,
    }
}

fn implication_chain(s: &StabilityRun, h: &HRun) -> Verdict {
    let first = !s.verdict.passed || s.singleton_passed;
    let second = !h.verdict.passed || h.witnesses_passed;
    verdict(
        first && second,
        format!(
            "semiconjugacy {} => singleton H (a)-(d) {}; H properties {} => witness audit {}",
            s.verdict.passed, s.singleton_passed, h.verdict.passed, h.witnesses_passed
        ),
    )
}

fn expansivity() -> Verdict {
    let phi = models::example_3_7(2.0).unwrap();
    let d = MetricEntourage::new(1.0).unwrap();
    let b = CayleyBall::new(phi.genset(), 25, Budget::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let pairs: Vec<(Point, Point)> = (0..500)
        .map(|_| {
            let x: f64 = rng.gen_range(-2.0..2.0);
            let gap = rng.gen_range((1e-6f64).ln()..(1.0f64).ln()).exp();
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (Point::scalar(x), Point::scalar(x + sign * gap))
        })
        .collect();
    let mismatches = pairs
        .par_iter()
        .filter(|(x, y)| {
            let gap = x.distance(y);
            let expected = (d.epsilon() / gap).log2().floor() as usize + 1;
            let found = separation_search_in(&phi, &b, x, y, &d).unwrap();
            found.found().map(|c| c.length) != Some(expected)
        })
        .count();
    let mu = LebesgueMeasure::new(1);
    let radii: Vec<usize> = (0..=12).collect();
    let r = mu_expansivity_report(&phi, &d, &uniform(708, 20, 1, -2.0, 2.0), &radii, &mu, 1e-2).unwrap();
    let ratio_err = r
        .rows
        .iter()
        .flat_map(|row| row.volumes.windows(2).map(|w| (w[1] / w[0] - 0.5).abs()))
        .fold(0.0, f64::max);
    verdict(
        mismatches == 0 && ratio_err <= 1e-12,
        format!("500 pairs: {mismatches} length mismatches; volume ratio error {ratio_err:.1e}"),
    )
}

fn genset_independence() -> Verdict {
    let phi = models::example_2_2(2).unwrap();
    let family = GroupFamily::FreeAbelian { rank: 2 };
    let t = GeneratingSet::from_elements(
        family,
        vec![
            ("u".into(), NormalForm::Abelian(vec![1, 0])),
            ("v".into(), NormalForm::Abelian(vec![1, 1])),
        ],
        Budget::default(),
    )
    .unwrap();
    let phi_t = phi.regenerate(&t, Budget::default()).unwrap();
    let s = GeneratingSet::standard(family);
    let m = s
        .generators()
        .iter()
        .map(|g| t.word_length(&g.value, Budget::default()).unwrap())
        .max()
        .unwrap();
    let (eps, r) = (1e-3, 5);
    let lip = phi_t.lipschitz_max();
    let bound = eps * (lip * lip - 1.0) / (lip - 1.0);
    let source = ball(&phi_t, m * (r + 1) - 1);
    let xs = uniform(808, 200, 2, -1.0, 1.0);
    let worst = xs
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let po = perturbed_orbit(&phi_t, source.clone(), x, eps / (1.0 + lip), 80_000 + i as u64).unwrap();
            let c = convert_generating_set(&po, &s, &phi_t, r, Budget::default()).unwrap();
            assert_eq!(c.max_rewrite_length, 2);
            c.orbit.realized_epsilon()
        })
        .reduce(|| 0.0, f64::max);
    verdict(
        m == 2 && lip == 2.0 && worst <= bound,
        format!("m = {m}, L = {lip}; 200 orbits: max S-defect {worst:.3e} <= {bound:.1e}"),
    )
}

fn conjugacy_transport() -> Verdict {
    let phi = models::example_3_7(2.0).unwrap();
    let h = CoordinateChange::scaling(vec![3.0]).unwrap();
    let conj = phi.conjugate(&h).unwrap();
    let b = ball(&phi, 20);
    let xs = uniform(909, 200, 1, -2.0, 2.0);
    let worst = xs
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let po = perturbed_orbit(&phi, b.clone(), x, 1e-3 / 3.0, 90_000 + i as u64).unwrap();
            let y = shadow_diagonal_linear(&po, &phi).unwrap().point;
            let moved = shadow_diagonal_linear(&po.transport(&h, &conj).unwrap(), &conj).unwrap().point;
            moved.distance(&h.apply(&y))
        })
        .reduce(|| 0.0, f64::max);
    let d = MetricEntourage::new(1.0).unwrap();
    let d3 = MetricEntourage::new(3.0).unwrap();
    let mut gamma = true;
    let mut books = true;
    for x in &xs[..50] {
        for m in 0..=12 {
            let g = dynamical_ball(&phi, x, &d, m).unwrap();
            gamma &= dynamical_ball(&conj, &h.apply(x), &d3, m).unwrap() == h.apply_set(&g).unwrap();
            let (pulled, direct) = pullback_bookkeeping(&h, &g).unwrap();
            books &= pulled == direct;
        }
    }
    verdict(
        worst <= 1e-9 && gamma && books,
        format!("max |shadow(h po) - h(shadow po)| {worst:.1e}; Gamma exact {gamma}; pullback exact {books}"),
    )
}

fn determinism() -> Verdict {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    let tmp = tempfile::tempdir().unwrap();
    let mut kinds = std::collections::BTreeSet::new();
    let mut differing = Vec::new();
    for p in &paths {
        let mut c = ExperimentConfig::load(p).unwrap();
        c.samples.count = c.samples.count.min(40);
        let c = c.resolve().unwrap();
        kinds.insert(c.experiment.name());
        let stem = p.file_stem().unwrap().to_string_lossy().to_string();
        let a = tmp.path().join(format!("{stem}-a"));
        let b = tmp.path().join(format!("{stem}-b"));
        run(&c, &a).unwrap();
        run(&c, &b).unwrap();
        if std::fs::read(a.join("detail.csv")).unwrap() != std::fs::read(b.join("detail.csv")).unwrap() {
            differing.push(stem);
        }
    }
    verdict(
        differing.is_empty() && kinds.len() == 8,
        format!(
            "{} configs covering {} experiment kinds rerun; differing detail CSVs: {:?}",
            paths.len(),
            kinds.len(),
            differing
        ),
    )
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(usize, &str, Verdict)> = Vec::new();
    results.push((1, "shadowing bound on x -> 2x with oracle agreement", shadowing_bound()));
    results.push((2, "per-coordinate shadowing for Z^2", multi_generator()));
    results.push((3, "brute-force shadowing for the solvable group", solvable_group()));
    let s = stability_construction();
    let h = h_map_properties();
    let chain = implication_chain(&s, &h);
    results.push((4, "semiconjugacy f for 2x + 0.01 sin x", s.verdict));
    results.push((5, "set-valued H windows", h.verdict));
    results.push((6, "implication chain", chain));
    results.push((7, "expansivity lengths and volume decay", expansivity()));
    results.push((8, "generating-set independence", genset_independence()));
    results.push((9, "conjugacy transport", conjugacy_transport()));
    results.push((10, "determinism of detail CSVs", determinism()));
    let mut failed = 0;
    for (n, name, v) in &results {
        let mark = if v.passed { "PASS" } else { "FAIL" };
        if !v.passed {
            failed += 1;
        }
        println!("acceptance {n:>2} {mark}: {name}: {}", v.detail);
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
