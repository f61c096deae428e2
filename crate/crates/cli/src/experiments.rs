//! One runner per experiment kind. Each returns named checks, summary
//! statistics and a detail table whose rows are ordered by sample index.

use std::sync::Arc;

use actstab::expansivity::{analytic_expansive, mu_expansivity_report, separation_search_in};
use actstab::pseudo_orbit::{convert_generating_set, perturbed_orbit};
use actstab::shadowing::{check_persistence, check_shadowing, shadow, Solver, TraceReport};
use actstab::stability::{
    admissible_delta, build_h_window_in, build_semiconjugacy, continuity_modulus,
    extract_persistence_witness, singleton_h_from_map, verify_h_properties, verify_semiconjugacy,
    SemiconjugacyTable,
};
use actstab::{expansivity, stability, Action, Budget, CayleyBall, LebesgueMeasure, MetricEntourage, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::RunError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub statistics: Map<String, Value>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Outcome {
    fn stat(&mut self, key: &str, v: impl Serialize) {
        self.statistics.insert(key.to_string(), json!(v));
    }

    fn table(&mut self, header: &[&str], rows: Vec<Vec<String>>) {
        self.header = header.iter().map(|s| s.to_string()).collect();
        self.rows = rows;
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}

// Independent streams derived from the one configured seed.
const NOISE_STREAM: u64 = 0x5EED_0001;
const PAIR_STREAM: u64 = 0x5EED_0002;

pub fn sample_points(config: &ExperimentConfig) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed());
    let (lo, hi) = (&config.samples.low, &config.samples.high);
    (0..config.samples.count)
        .map(|_| {
            Point::new(
                lo.iter()
                    .zip(hi)
                    .map(|(&l, &h)| if l == h { l } else { rng.gen_range(l..h) })
                    .collect(),
            )
            .expect("finite sample")
        })
        .collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
}

fn entourage(eps: f64) -> Result<MetricEntourage, RunError> {
    Ok(MetricEntourage::new(eps)?)
}

fn perturbed(phi: &Action, config: &ExperimentConfig) -> Result<Action, RunError> {
    let spec = config
        .perturbation
        .as_ref()
        .ok_or_else(|| RunError::Config("this experiment needs a [perturbation] section".into()))?;
    Ok(phi.perturb(spec, config.seed())?.0)
}

fn closed_form(phi: &Action, solver: Solver) -> bool {
    match solver {
        Solver::ClosedForm => true,
        Solver::BruteForce(_) => false,
        Solver::Auto(_) => phi.is_diagonal_linear(),
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Outcome, RunError> {
    let phi = config.model.build()?;
    let mut out = Outcome::default();
    match config.experiment {
        ExperimentKind::Shadowing => shadowing(config, &phi, &mut out)?,
        ExperimentKind::Persistence => persistence(config, &phi, &mut out)?,
        ExperimentKind::Expansivity => expansivity(config, &phi, &mut out)?,
        ExperimentKind::MuExpansivity => mu_expansivity(config, &phi, &mut out)?,
        ExperimentKind::Stability => stability(config, &phi, &mut out)?,
        ExperimentKind::MuStability => mu_stability(config, &phi, &mut out)?,
        ExperimentKind::GensetConversion => genset_conversion(config, &phi, &mut out)?,
        ExperimentKind::ConjugacyTransport => conjugacy_transport(config, &phi, &mut out)?,
    }
    Ok(out)
}

fn ball(phi: &Action, radius: usize) -> Result<Arc<CayleyBall>, RunError> {
    Ok(Arc::new(CayleyBall::new(phi.genset(), radius, Budget::default())?))
}

fn trace_stats(out: &mut Outcome, r: &TraceReport) {
    out.stat("max_tracing_radius", r.max_radius);
    out.stat("mean_tracing_radius", r.mean_radius);
    out.stat("pass_rate", r.pass_rate);
    out.stat("orbits", r.rows.len());
    out.table(&TraceReport::CSV_HEADER, r.to_csv_rows());
}

fn shadowing(config: &ExperimentConfig, phi: &Action, out: &mut Outcome) -> Result<(), RunError> {
    let solver = config.solver.solver();
    let delta = config.delta;
    // Telescoping bound delta / (kappa - 1) for the closed form; the oracle
    // is held to twice the declared epsilon.
    let bound = match (closed_form(phi, solver), admissible_delta(phi, &entourage(1.0)?)) {
        (true, Some(k)) => delta / k,
        _ => 2.0 * delta,
    };
    let eta = delta / (1.0 + phi.lipschitz_max());
    let samples = sample_points(config);
    let r = check_shadowing(
        phi,
        ball(phi, config.ball_radius)?,
        &samples,
        eta,
        config.seed() ^ NOISE_STREAM,
        &entourage(bound)?,
        solver,
        None,
    )?;
    let valid = r
        .rows
        .iter()
        .all(|row| row.realized_epsilon <= row.declared_epsilon + config.tolerances.audit);
    out.checks.push(Check::new(
        "pseudo-orbits within declared epsilon",
        valid,
        format!("declared {delta}"),
    ));
    out.checks.push(Check::new(
        "tracing radius within bound",
        r.passed,
        format!("max {} vs bound {bound}", r.max_radius),
    ));
    out.stat("bound", bound);
    out.stat("declared_epsilon", delta);
    out.stat("noise", eta);
    trace_stats(out, &r);
    Ok(())
}

fn persistence(config: &ExperimentConfig, phi: &Action, out: &mut Outcome) -> Result<(), RunError> {
    let psi = perturbed(phi, config)?;
    let e = entourage(config.entourages.eps_e)?;
    let r = check_persistence(
        phi,
        &psi,
        ball(phi, config.ball_radius)?,
        &sample_points(config),
        &e,
        config.solver.solver(),
    )?;
    out.checks.push(Check::new(
        "every orbit of the perturbed action is traced within eps_E",
        r.passed,
        format!("max {} vs eps_E {}", r.max_radius, e.epsilon()),
    ));
    out.stat("certified_distance", psi.certified_distance(phi)?);
    trace_stats(out, &r);
    Ok(())
}

fn expansivity(config: &ExperimentConfig, phi: &Action, out: &mut Outcome) -> Result<(), RunError> {
    let d = entourage(config.entourages.eps_d)?;
    let b = ball(phi, config.ball_radius)?;
    let xs = sample_points(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed() ^ PAIR_STREAM);
    let [g0, g1] = config.samples.gap;
    let pairs: Vec<(Point, Point)> = xs
        .into_iter()
        .map(|x| {
            let gap = if g0 == g1 { g0 } else { (rng.gen_range(g0.ln()..g1.ln())).exp() };
            let axis = rng.gen_range(0..x.dim());
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let y: Vec<f64> = x
                .coords()
                .iter()
                .enumerate()
                .map(|(i, &c)| c + gap * if i == axis { sign } else { rng.gen_range(-1.0..=1.0) })
                .collect();
            (x, Point::new(y).expect("finite"))
        })
        .collect();
    let results = pairs
        .par_iter()
        .map(|(x, y)| separation_search_in(phi, &b, x, y, &d))
        .collect::<Result<Vec<_>, _>>()?;
    let missing: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.found().is_none())
        .map(|(i, _)| i)
        .collect();
    out.checks.push(Check::new(
        "every pair separated within the ball",
        missing.is_empty(),
        if missing.is_empty() {
            format!("{} pairs", pairs.len())
        } else {
            format!(
                "{} of {} pairs not separated within radius {} (first: pair {})",
                missing.len(),
                pairs.len(),
                config.ball_radius,
                missing[0]
            )
        },
    ));
    let max_len = results.iter().filter_map(|r| r.found().map(|c| c.length)).max();
    out.stat("max_separating_length", max_len);
    out.stat("analytic_expansive", analytic_expansive(phi));
    out.stat("pairs", pairs.len());
    let rows = pairs
        .iter()
        .zip(&results)
        .enumerate()
        .map(|(i, ((x, y), r))| {
            let c = r.found();
            vec![
                i.to_string(),
                join(x.coords()),
                join(y.coords()),
                x.distance(y).to_string(),
                c.is_some().to_string(),
                c.map_or(String::new(), |c| c.length.to_string()),
                c.map_or(String::new(), |c| c.word.clone()),
                c.map_or(String::new(), |c| c.distance.to_string()),
            ]
        })
        .collect();
    out.table(
        &["index", "x", "y", "distance", "separated", "length", "word", "separated_distance"],
        rows,
    );
    Ok(())
}

fn mu_expansivity(config: &ExperimentConfig, phi: &Action, out: &mut Outcome) -> Result<(), RunError> {
    let d = entourage(config.entourages.eps_d)?;
    let mu = LebesgueMeasure::new(phi.dim());
    let r = mu_expansivity_report(phi, &d, &sample_points(config), &config.radii, &mu, config.volume_threshold)?;
    out.checks.push(Check::new(
        "dynamical ball volumes decrease below the threshold",
        r.passed,
        format!(
            "last volume {} vs threshold {}",
            r.rows[0].volumes.last().unwrap(),
            config.volume_threshold
        ),
    ));
    out.checks.push(Check::new(
        "observed volume ratios match the analytic ratios",
        r.max_ratio_error <= config.tolerances.audit,
        format!("max error {}", r.max_ratio_error),
    ));
    out.stat("observed_ratios", &r.observed_ratios);
    out.stat("analytic_ratios", &r.analytic_ratios);
    out.stat("analytic_expansive", r.analytic_expansive);
    out.stat("samples_agree", r.samples_agree);
    let rows = r
        .rows
        .iter()
        .flat_map(|row| {
            r.radii.iter().zip(&row.volumes).map(move |(m, v)| {
                vec![row.index.to_string(), join(row.x.coords()), m.to_string(), v.to_string()]
            })
        })
        .collect();
    out.table(&["index", "x", "radius", "volume"], rows);
    Ok(())
}

fn semiconjugacy(
    config: &ExperimentConfig,
    phi: &Action,
    psi: &Action,
    samples: &[Point],
) -> Result<SemiconjugacyTable, RunError> {
    Ok(build_semiconjugacy(
        phi,
        psi,
        ball(phi, config.ball_radius)?,
        &entourage(config.entourages.eps_e)?,
        samples,
        config.solver.solver(),
    )?)
}

fn stability(config: &ExperimentConfig, phi: &Action, out: &mut Outcome) -> Result<(), RunError> {
    let psi = perturbed(phi, config)?;
    let e = entourage(config.entourages.eps_e)?;
    let mut table = semiconjugacy(config, phi, &psi, &sample_points(config))?;
    let hs = config
        .test_elements
        .iter()
        .map(|w| phi.genset().reduce_str(w))
        .collect::<Result<Vec<_>, _>>()?;
    let r = verify_semiconjugacy(&mut table, phi, &psi, &hs, config.tolerances.equivariance)?;
    out.checks.push(Check::new(
        "f is within eps_E of the identity",
        r.unsolved.is_empty() && r.max_distance <= e.epsilon(),
        format!("sup |x - f(x)| = {} vs {}", r.max_distance, e.epsilon()),
    ));
    out.checks.push(Check::new(
        "f intertwines the actions",
        r.max_residual <= r.tolerance,
        format!("max residual {} vs {}", r.max_residual, r.tolerance),
    ));
    let s = singleton_h_from_map(&table, &LebesgueMeasure::new(phi.dim()), &e);
    out.checks.push(Check::new(
        "singleton H = {f} satisfies (a)-(d)",
        s.passed,
        if s.passed { "ok".into() } else { s.failures.join("; ") },
    ));
    out.stat("max_distance", r.max_distance);
    out.stat("residuals", &r.residuals);
    out.stat("certified_distance", table.certified_distance);
    out.stat("continuity_modulus", continuity_modulus(&table, 1e-4));
    out.table(&SemiconjugacyTable::CSV_HEADER, table.to_csv_rows());
    Ok(())
}

fn mu_stability(config: &ExperimentConfig, phi: &Action, out: &mut Outcome) -> Result<(), RunError> {
    let psi = perturbed(phi, config)?;
    let ep = entourage(config.entourages.eps_e_prime)?;
    let mu = LebesgueMeasure::new(phi.dim());
    let samples = sample_points(config);
    let hs = config
        .test_elements
        .iter()
        .map(|w| phi.genset().reduce_str(w))
        .collect::<Result<Vec<_>, _>>()?;
    let table = semiconjugacy(config, phi, &psi, &samples)?;
    let hball = CayleyBall::new(phi.genset(), *config.radii.last().unwrap(), Budget::default())?;

    struct Row {
        nested: bool,
        decay: bool,
        sandwich: bool,
        near: bool,
        contains_fx: Option<bool>,
        ratios: Vec<f64>,
        witness: Option<stability::PersistenceWitness>,
        last_volume: f64,
    }
    let rows = samples
        .par_iter()
        .zip(&table.rows)
        .map(|(x, srow)| -> Result<Row, RunError> {
            let hw = build_h_window_in(phi, &psi, &hball, &ep, x, &config.radii)?;
            let mut row = Row {
                nested: true,
                decay: true,
                sandwich: true,
                near: true,
                contains_fx: None,
                ratios: Vec::new(),
                witness: extract_persistence_witness(&hw, phi, &psi)?,
                last_volume: mu.volume(&hw.windows.last().unwrap().1)?,
            };
            for h in &hs {
                let r = verify_h_properties(phi, &psi, &ep, x, h, &config.radii, &mu, None)?;
                row.nested &= r.nested;
                row.decay &= r.volumes_decay;
                row.sandwich &= r.sandwich_holds;
                row.near &= r.near_identity;
                row.ratios = r.volume_ratios;
            }
            if srow.pass {
                let fx = srow.fx.as_ref().unwrap();
                row.contains_fx = Some(hw.windows.iter().all(|(_, s)| s.contains_point(fx)));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let all = |f: &dyn Fn(&Row) -> bool| rows.iter().all(f);
    out.checks.push(Check::new("H windows are nested", all(&|r| r.nested), String::new()));
    out.checks.push(Check::new("H window volumes decay", all(&|r| r.decay), String::new()));
    out.checks.push(Check::new(
        "equivariance sandwich holds exactly",
        all(&|r| r.sandwich),
        format!("h in {:?}", config.test_elements),
    ));
    out.checks.push(Check::new("H windows lie in E'[x]", all(&|r| r.near), String::new()));
    out.checks.push(Check::new(
        "f(x) lies in every window",
        all(&|r| r.contains_fx != Some(false)),
        String::new(),
    ));
    let witnessed = rows.iter().filter(|r| r.witness.is_some()).count();
    out.checks.push(Check::new(
        "persistence witnesses pass their audit",
        all(&|r| r.witness.as_ref().is_some_and(|w| w.passed)),
        format!("{witnessed} of {} samples have a nonempty window", rows.len()),
    ));
    let ratios: Vec<f64> = rows.iter().flat_map(|r| r.ratios.iter().copied()).collect();
    out.stat("min_volume_ratio", ratios.iter().copied().fold(f64::INFINITY, f64::min));
    out.stat("max_volume_ratio", ratios.iter().copied().fold(0.0, f64::max));
    out.stat("samples", rows.len());
    let detail = samples
        .iter()
        .zip(&rows)
        .enumerate()
        .map(|(i, (x, r))| {
            let w = r.witness.as_ref();
            vec![
                i.to_string(),
                join(x.coords()),
                w.map_or(String::new(), |w| w.m.to_string()),
                w.map_or(String::new(), |w| join(w.y.coords())),
                w.map_or(String::new(), |w| w.max_deviation.to_string()),
                w.map_or(String::new(), |w| w.slack.to_string()),
                r.last_volume.to_string(),
                r.nested.to_string(),
                r.sandwich.to_string(),
                w.is_some_and(|w| w.passed).to_string(),
            ]
        })
        .collect();
    out.table(
        &[
            "index", "x", "deepest_radius", "witness", "max_deviation", "slack", "last_volume", "nested",
            "sandwich", "witness_pass",
        ],
        detail,
    );
    Ok(())
}

fn genset_conversion(config: &ExperimentConfig, phi: &Action, out: &mut Outcome) -> Result<(), RunError> {
    let source = config.source_genset(phi)?;
    let phi_t = phi.regenerate(&source, Budget::default())?;
    let target = phi.genset();
    let m = target
        .generators()
        .iter()
        .map(|g| source.word_length(&g.value, Budget::default()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    let r = config.ball_radius;
    let source_ball = ball(&phi_t, (m * (r + 1)).saturating_sub(1))?;
    let lip = phi_t.lipschitz_max();
    let eta = config.delta / (1.0 + lip);
    let samples = sample_points(config);
    let base = config.seed() ^ NOISE_STREAM;
    let results = samples
        .par_iter()
        .enumerate()
        .map(|(i, x)| -> Result<(f64, f64, f64), RunError> {
            let po = perturbed_orbit(&phi_t, source_ball.clone(), x, eta, base.wrapping_add(i as u64))?;
            let c = convert_generating_set(&po, target, &phi_t, r, Budget::default())?;
            Ok((po.realized_epsilon(), c.orbit.realized_epsilon(), c.orbit.declared_epsilon()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let declared = results.first().map_or(0.0, |r| r.2);
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    out.checks.push(Check::new(
        "converted pseudo-orbits within the conversion bound",
        results.iter().all(|r| r.1 <= r.2 * (1.0 + config.tolerances.audit)),
        format!("max realized {worst} vs declared {declared}"),
    ));
    out.stat("max_rewrite_length", m);
    out.stat("lipschitz", lip);
    out.stat("source_declared_epsilon", config.delta);
    out.stat("converted_declared_epsilon", declared);
    out.stat("max_converted_realized", worst);
    let rows = samples
        .iter()
        .zip(&results)
        .enumerate()
        .map(|(i, (x, r))| {
            vec![
                i.to_string(),
                join(x.coords()),
                r.0.to_string(),
                r.1.to_string(),
                r.2.to_string(),
                (r.1 <= r.2 * (1.0 + config.tolerances.audit)).to_string(),
            ]
        })
        .collect();
    out.table(
        &["index", "x", "source_realized", "converted_realized", "converted_declared", "pass"],
        rows,
    );
    Ok(())
}

fn conjugacy_transport(config: &ExperimentConfig, phi: &Action, out: &mut Outcome) -> Result<(), RunError> {
    let h = config.coordinate_change.clone().unwrap();
    let conj = phi.conjugate(&h)?;
    let solver = config.solver.solver();
    let b = ball(phi, config.ball_radius)?;
    let eta = config.delta / (1.0 + phi.lipschitz_max());
    let samples = sample_points(config);
    let base = config.seed() ^ NOISE_STREAM;
    let residuals = samples
        .par_iter()
        .enumerate()
        .map(|(i, x)| -> Result<f64, RunError> {
            let po = perturbed_orbit(phi, b.clone(), x, eta, base.wrapping_add(i as u64))?;
            let y = shadow(&po, phi, solver)?.point;
            let moved = shadow(&po.transport(&h, &conj)?, &conj, solver)?.point;
            Ok(moved.distance(&h.apply(&y)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    let tol = config.tolerances.audit;
    out.checks.push(Check::new(
        "shadow of the transported orbit is h(shadow)",
        worst <= tol,
        format!("max {worst} vs {tol}"),
    ));

    let c = h.scales[0].abs();
    let uniform = h.scales.iter().all(|s| s.abs() == c);
    let mut gamma_rows: Vec<(bool, bool)> = Vec::new();
    if phi.is_diagonal_linear() && uniform {
        let d = entourage(config.entourages.eps_d)?;
        let dc = entourage(c * config.entourages.eps_d)?;
        gamma_rows = samples
            .par_iter()
            .map(|x| -> Result<(bool, bool), RunError> {
                let mut same = true;
                let mut books = true;
                for &m in &config.radii {
                    let g = expansivity::dynamical_ball(phi, x, &d, m)?;
                    same &= expansivity::dynamical_ball(&conj, &h.apply(x), &dc, m)? == h.apply_set(&g)?;
                    let (pulled, direct) = stability::pullback_bookkeeping(&h, &g)?;
                    books &= pulled == direct;
                }
                Ok((same, books))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.checks.push(Check::new(
            "dynamical balls transport exactly",
            gamma_rows.iter().all(|r| r.0),
            format!("radii {:?}", config.radii),
        ));
        out.checks.push(Check::new(
            "pullback measure bookkeeping is exact",
            gamma_rows.iter().all(|r| r.1),
            String::new(),
        ));
    } else {
        out.stat("dynamical_ball_check", "skipped: needs a diagonal-linear action and a uniform scaling");
    }
    out.stat("max_shadow_residual", worst);
    let rows = samples
        .iter()
        .zip(&residuals)
        .enumerate()
        .map(|(i, (x, r))| {
            let g = gamma_rows.get(i);
            vec![
                i.to_string(),
                join(x.coords()),
                r.to_string(),
                g.map_or(String::new(), |g| g.0.to_string()),
                g.map_or(String::new(), |g| g.1.to_string()),
            ]
        })
        .collect();
    out.table(&["index", "x", "shadow_residual", "gamma_exact", "pullback_exact"], rows);
    Ok(())
}
