//! Shadowing points of pseudo-orbits.
//!
//! Two independent solvers:
//!
//! * [`shadow_diagonal_linear`] pulls back, coordinate by coordinate, the
//!   point sitting at the ball element with the most extreme composite
//!   scale. For an expansion factor `lambda` per step the telescoping sum
//!   bounds the tracing radius by `eps / (lambda - 1)`.
//! * [`shadow_generic`] minimizes `y -> max_g |x_g - Phi_g(y)|` by grid
//!   scans with successive refinement around the incumbent. It only
//!   evaluates the action and serves as the oracle for the closed form.

use std::cmp::Ordering;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::error::{Error, Result};
use crate::expansivity::{separation_search, Separation};
use crate::group::{Budget, CayleyBall};
use crate::pseudo_orbit::{orbit_of_nearby_action, perturbed_orbit, PseudoOrbit};
use crate::uniformity::{AxisBox, BoxSet, Interval, MetricEntourage, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShadowMethod {
    ClosedForm,
    BruteForce,
}

/// Grid refinement parameters for [`shadow_generic`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Grid points per axis in every round.
    pub cells: usize,
    pub rounds: usize,
    /// Cell shrink factor between rounds.
    pub factor: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            cells: 64,
            rounds: 4,
            factor: 8.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Solver {
    ClosedForm,
    BruteForce(GridSpec),
    /// Closed form for diagonal-linear actions, brute force otherwise.
    Auto(GridSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShadowResult {
    pub point: Point,
    /// `max_g |x_g - Phi_g(y)|` over the ball.
    pub tracing_radius: f64,
    pub method: ShadowMethod,
    /// Edge length of the final grid cell (zero for the closed form).
    pub final_cell: f64,
    /// Brute force only: the incumbent ended within one cell of the search
    /// box boundary, so the true minimizer may lie outside.
    pub boundary_warning: bool,
    pub uniqueness: Option<Uniqueness>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Uniqueness {
    Coincide { distance: f64 },
    Separated {
        element: String,
        length: usize,
        distance: f64,
    },
    Inconclusive { searched_radius: usize },
}

/// Composite diagonal scales of every ball element, for diagonal-linear actions.
pub fn scale_table(phi: &Action, ball: &CayleyBall) -> Option<Vec<Vec<f64>>> {
    ball.elements()
        .iter()
        .map(|e| phi.diagonal_scales(&e.element))
        .collect()
}

pub fn tracing_radius(po: &PseudoOrbit, phi: &Action, y: &Point) -> Result<f64> {
    y.check_dim(phi.dim())?;
    let orbit = phi.orbit(po.ball(), y)?;
    Ok(orbit
        .iter()
        .zip(po.points())
        .map(|(a, b)| a.distance(b))
        .fold(0.0, f64::max))
}

fn diagonal_radius(po: &PseudoOrbit, scales: &[Vec<f64>], y: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (p, l) in po.points().iter().zip(scales) {
        for ((x, l), y) in p.coords().iter().zip(l).zip(y) {
            worst = worst.max((x - l * y).abs());
        }
    }
    worst
}

/// Closed-form shadow for diagonal-linear actions.
///
/// For each coordinate pick the ball element with the largest `|scale|`
/// (ties: shorter word, then smaller normal form) and pull its point back.
/// Coordinates that never expand on the ball use the most contracting
/// element instead. A coordinate on which every scale is 1 has no
/// hyperbolic witness and is an error.
#[allow(clippy::needless_range_loop)]
pub fn shadow_diagonal_linear(po: &PseudoOrbit, phi: &Action) -> Result<ShadowResult> {
    phi.check_ball(po.ball())?;
    let scales = scale_table(phi, po.ball())
        .ok_or_else(|| Error::Unsupported("closed-form shadowing needs a diagonal-linear action".into()))?;
    let ball = po.ball();
    let tie_break = |a: usize, b: usize| {
        let (ea, eb) = (ball.element(a), ball.element(b));
        ea.length
            .cmp(&eb.length)
            .then_with(|| ea.element.normal_form().cmp(eb.element.normal_form()))
    };
    let n = phi.dim();
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let pick = |better: &dyn Fn(f64, f64) -> Ordering| {
            (0..ball.len())
                .min_by(|&a, &b| {
                    better(scales[a][i].abs(), scales[b][i].abs()).then_with(|| tie_break(a, b))
                })
                .unwrap()
        };
        let widest = pick(&|a, b| b.total_cmp(&a));
        let g = if scales[widest][i].abs() > 1.0 {
            widest
        } else {
            let narrowest = pick(&|a, b| a.total_cmp(&b));
            if scales[narrowest][i].abs() < 1.0 {
                narrowest
            } else {
                return Err(Error::Solver(format!(
                    "coordinate {i} has no hyperbolic witness in the ball; use shadow_generic"
                )));
            }
        };
        y.push(po.points()[g].coords()[i] / scales[g][i]);
    }
    let radius = diagonal_radius(po, &scales, &y);
    Ok(ShadowResult {
        point: Point::from_vec(y),
        tracing_radius: radius,
        method: ShadowMethod::ClosedForm,
        final_cell: 0.0,
        boundary_warning: false,
        uniqueness: None,
    })
}

/// A box around `x_e` of half-width `2 eps + 1e-6`: any eps-shadow lies
/// within `eps` of `x_e`.
pub fn default_search_box(po: &PseudoOrbit) -> AxisBox {
    let r = 2.0 * po.declared_epsilon().max(po.realized_epsilon()) + 1e-6;
    AxisBox::new(po.base().coords().iter().map(|&c| Interval::new(c, r)).collect())
}

/// Grid min-max oracle. Round `k` scans `cells` cell centres per axis; the
/// next round re-centres on the incumbent with cells shrunk by `factor`.
pub fn shadow_generic(
    po: &PseudoOrbit,
    phi: &Action,
    search: &AxisBox,
    grid: GridSpec,
) -> Result<ShadowResult> {
    phi.check_ball(po.ball())?;
    if grid.cells == 0 || grid.rounds == 0 || !(grid.factor > 1.0) {
        return Err(Error::input("grid needs cells >= 1, rounds >= 1, factor > 1"));
    }
    let n = phi.dim();
    if search.dim() != n {
        return Err(Error::input("search box dimension differs from the action"));
    }
    let scales = scale_table(phi, po.ball());
    let objective = |y: &[f64]| -> Result<f64> {
        match &scales {
            Some(s) => Ok(diagonal_radius(po, s, y)),
            None => tracing_radius(po, phi, &Point::from_vec(y.to_vec())),
        }
    };

    let mut lo: Vec<f64> = search.sides().iter().map(Interval::lo).collect();
    let mut cell: Vec<f64> = search
        .sides()
        .iter()
        .map(|s| s.width() / grid.cells as f64)
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let total = grid.cells.pow(n as u32);
    for round in 0..grid.rounds {
        if round > 0 {
            let centre = &best.as_ref().unwrap().1;
            for i in 0..n {
                cell[i] /= grid.factor;
                lo[i] = centre[i] - 0.5 * grid.cells as f64 * cell[i];
            }
        }
        for flat in 0..total {
            let mut rest = flat;
            let y: Vec<f64> = (0..n)
                .map(|i| {
                    let k = rest % grid.cells;
                    rest /= grid.cells;
                    lo[i] + (k as f64 + 0.5) * cell[i]
                })
                .collect();
            let v = objective(&y)?;
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, y));
            }
        }
    }
    let (radius, y) = best.unwrap();
    let boundary_warning = search
        .sides()
        .iter()
        .zip(&y)
        .zip(&cell)
        .any(|((s, &c), &h)| c - s.lo() < h || s.hi() - c < h);
    Ok(ShadowResult {
        point: Point::from_vec(y),
        tracing_radius: radius,
        method: ShadowMethod::BruteForce,
        final_cell: cell.iter().copied().fold(0.0, f64::max),
        boundary_warning,
        uniqueness: None,
    })
}

pub fn shadow(po: &PseudoOrbit, phi: &Action, solver: Solver) -> Result<ShadowResult> {
    match solver {
        Solver::ClosedForm => shadow_diagonal_linear(po, phi),
        Solver::BruteForce(grid) => shadow_generic(po, phi, &default_search_box(po), grid),
        Solver::Auto(grid) => {
            if phi.is_diagonal_linear() {
                shadow_diagonal_linear(po, phi)
            } else {
                shadow_generic(po, phi, &default_search_box(po), grid)
            }
        }
    }
}

/// Decides whether two candidate shadows coincide, or finds an element
/// that pushes them more than `eps_A` apart.
pub fn shadow_uniqueness(
    y1: &Point,
    y2: &Point,
    phi: &Action,
    expansive: &MetricEntourage,
    max_radius: usize,
    coincide_tol: f64,
) -> Result<Uniqueness> {
    y2.check_dim(y1.dim())?;
    let d = y1.distance(y2);
    if d <= coincide_tol {
        return Ok(Uniqueness::Coincide { distance: d });
    }
    Ok(
        match separation_search(phi, y1, y2, expansive, max_radius, Budget::default())? {
            Separation::Found(c) => Uniqueness::Separated {
                element: c.word,
                length: c.length,
                distance: c.distance,
            },
            Separation::NotFound { searched_radius } => Uniqueness::Inconclusive { searched_radius },
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub index: usize,
    pub x: Point,
    pub y: Option<Point>,
    pub tracing_radius: Option<f64>,
    pub declared_epsilon: f64,
    pub realized_epsilon: f64,
    pub pass: bool,
    pub note: Option<String>,
}

/// One row per sample, in sample order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceReport {
    pub epsilon: f64,
    pub ball_radius: usize,
    pub rows: Vec<TraceRow>,
    pub max_radius: f64,
    pub mean_radius: f64,
    pub pass_rate: f64,
    pub passed: bool,
}

impl TraceReport {
    fn assemble(epsilon: f64, ball_radius: usize, rows: Vec<TraceRow>) -> Self {
        let radii: Vec<f64> = rows.iter().filter_map(|r| r.tracing_radius).collect();
        let max_radius = radii.iter().copied().fold(0.0, f64::max);
        let mean_radius = if radii.is_empty() {
            0.0
        } else {
            radii.iter().sum::<f64>() / radii.len() as f64
        };
        let passes = rows.iter().filter(|r| r.pass).count();
        let pass_rate = if rows.is_empty() {
            0.0
        } else {
            passes as f64 / rows.len() as f64
        };
        TraceReport {
            epsilon,
            ball_radius,
            passed: !rows.is_empty() && passes == rows.len(),
            rows,
            max_radius,
            mean_radius,
            pass_rate,
        }
    }

    pub fn to_csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.index.to_string(),
                    join(r.x.coords()),
                    r.y.as_ref().map_or(String::new(), |y| join(y.coords())),
                    r.tracing_radius.map_or(String::new(), |v| v.to_string()),
                    r.declared_epsilon.to_string(),
                    r.realized_epsilon.to_string(),
                    r.pass.to_string(),
                ]
            })
            .collect()
    }

    pub const CSV_HEADER: [&'static str; 7] =
        ["index", "x", "y", "tracing_radius", "declared_epsilon", "realized_epsilon", "pass"];
}

pub(crate) fn join(v: &[f64]) -> String {
    v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
}

fn trace_row(index: usize, x: &Point, po: Result<PseudoOrbit>, phi: &Action, solver: Solver, eps: f64) -> TraceRow {
    let fail = |note: String| TraceRow {
        index,
        x: x.clone(),
        y: None,
        tracing_radius: None,
        declared_epsilon: f64::NAN,
        realized_epsilon: f64::NAN,
        pass: false,
        note: Some(note),
    };
    let po = match po {
        Ok(po) => po,
        Err(e) => return fail(e.to_string()),
    };
    match shadow(&po, phi, solver) {
        Ok(s) => TraceRow {
            index,
            x: x.clone(),
            pass: s.tracing_radius <= eps,
            y: Some(s.point),
            tracing_radius: Some(s.tracing_radius),
            declared_epsilon: po.declared_epsilon(),
            realized_epsilon: po.realized_epsilon(),
            note: s.boundary_warning.then(|| "shadow on search box boundary".to_string()),
        },
        Err(e) => TraceRow {
            declared_epsilon: po.declared_epsilon(),
            realized_epsilon: po.realized_epsilon(),
            ..fail(e.to_string())
        },
    }
}

/// For each sample `x`, shadows the `Psi`-orbit of `x` as a `Phi`-pseudo-orbit
/// and passes iff the tracing radius is within `eps_E`.
pub fn check_persistence(
    phi: &Action,
    psi: &Action,
    ball: Arc<CayleyBall>,
    samples: &[Point],
    entourage: &MetricEntourage,
    solver: Solver,
) -> Result<TraceReport> {
    phi.check_ball(&ball)?;
    psi.check_ball(&ball)?;
    psi.certified_distance(phi)?;
    let rows = samples
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let po = orbit_of_nearby_action(psi, ball.clone(), x, phi);
            trace_row(i, x, po, phi, solver, entourage.epsilon())
        })
        .collect();
    Ok(TraceReport::assemble(entourage.epsilon(), ball.radius(), rows))
}

/// Shadowing over sampled pseudo-orbits: sample `i` is perturbed with noise
/// `eta` and seed `seed + i`. Samples outside `through` are skipped, which
/// realizes the "pseudo-orbit through B" restriction.
#[allow(clippy::too_many_arguments)]
pub fn check_shadowing(
    phi: &Action,
    ball: Arc<CayleyBall>,
    samples: &[Point],
    eta: f64,
    seed: u64,
    entourage: &MetricEntourage,
    solver: Solver,
    through: Option<&BoxSet>,
) -> Result<TraceReport> {
    phi.check_ball(&ball)?;
    let rows = samples
        .par_iter()
        .enumerate()
        .filter(|(_, x)| through.is_none_or(|b| b.contains_point(x)))
        .map(|(i, x)| {
            let po = perturbed_orbit(phi, ball.clone(), x, eta, seed.wrapping_add(i as u64));
            trace_row(i, x, po, phi, solver, entourage.epsilon())
        })
        .collect();
    Ok(TraceReport::assemble(entourage.epsilon(), ball.radius(), rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{CoordinateChange, PerturbationSpec};
    use crate::models;
    use crate::pseudo_orbit::true_orbit;

    fn ball_for(phi: &Action, r: usize) -> Arc<CayleyBall> {
        Arc::new(CayleyBall::new(phi.genset(), r, Budget::default()).unwrap())
    }

    #[test]
    fn exact_orbit_shadows_itself() {
        let phi = models::example_3_7(2.0).unwrap();
        let po = true_orbit(&phi, ball_for(&phi, 10), &Point::scalar(0.37)).unwrap();
        let s = shadow_diagonal_linear(&po, &phi).unwrap();
        assert_eq!(s.point, Point::scalar(0.37));
        assert_eq!(s.tracing_radius, 0.0);

        let b = shadow_generic(
            &po,
            &phi,
            &AxisBox::new(vec![Interval::new(0.37, 1e-3)]),
            GridSpec::default(),
        )
        .unwrap();
        assert!(b.point.distance(&Point::scalar(0.37)) <= b.final_cell);
    }

    #[test]
    fn telescoping_bound_and_oracle() {
        for (lambda, delta, n) in [(2.0, 1e-3, 10), (4.0, 1e-2, 20), (2.0, 1e-2, 30)] {
            let phi = models::example_3_7(lambda).unwrap();
            let ball = ball_for(&phi, n);
            for seed in 0..5 {
                let eta = delta / (1.0 + lambda);
                let po = perturbed_orbit(&phi, ball.clone(), &Point::scalar(0.8), eta, seed).unwrap();
                let cf = shadow_diagonal_linear(&po, &phi).unwrap();
                assert!(cf.tracing_radius <= po.realized_epsilon() / (lambda - 1.0));
                let bf = shadow_generic(&po, &phi, &default_search_box(&po), GridSpec::default()).unwrap();
                // Both points trace x_{b^n} within the closed-form radius.
                let gap = cf.tracing_radius / lambda.powi(n as i32) + 2.0 * bf.final_cell;
                assert!(bf.point.distance(&cf.point) <= gap);
                // Solver audit: the stored radius is the recomputed one.
                assert_eq!(tracing_radius(&po, &phi, &cf.point).unwrap(), cf.tracing_radius);
            }
        }
    }

    #[test]
    fn multi_generator_reduces_per_coordinate() {
        let phi = models::example_2_2(2).unwrap();
        let po = perturbed_orbit(&phi, ball_for(&phi, 6), &Point::new(vec![0.4, -0.9]).unwrap(), 1e-3, 3).unwrap();
        let s = shadow_diagonal_linear(&po, &phi).unwrap();
        assert!(s.tracing_radius <= po.declared_epsilon());
    }

    #[test]
    fn isometric_coordinates_are_rejected() {
        let phi = models::isometric(1).unwrap();
        let po = true_orbit(&phi, ball_for(&phi, 3), &Point::scalar(1.0)).unwrap();
        assert!(matches!(shadow_diagonal_linear(&po, &phi), Err(Error::Solver(_))));
    }

    #[test]
    fn solvable_group_brute_force() {
        let phi = models::example_3_6(2.0, 1).unwrap();
        let (psi, _) = phi.perturb(&PerturbationSpec::sine(0.01, 1.0, 0.0, &["b"]), 0).unwrap();
        let ball = ball_for(&phi, 6);
        let po = orbit_of_nearby_action(&psi, ball, &Point::scalar(1.1), &phi).unwrap();
        let s = shadow(&po, &phi, Solver::BruteForce(GridSpec::default())).unwrap();
        assert!(s.tracing_radius <= 2.0 * po.declared_epsilon());
        assert!(!s.boundary_warning);
    }

    #[test]
    fn persistence_reports() {
        let phi = models::example_3_7(2.0).unwrap();
        let ball = ball_for(&phi, 20);
        let samples: Vec<Point> = (0..20).map(|i| Point::scalar(1.2 + 0.035 * i as f64)).collect();
        let tight = MetricEntourage::new(0.011).unwrap();
        let r = check_persistence(&phi, &phi, ball.clone(), &samples, &tight, Solver::ClosedForm).unwrap();
        assert!(r.passed);
        assert!(r.rows.iter().all(|row| row.y.as_ref() == Some(&row.x)));

        let (psi, _) = phi.perturb(&PerturbationSpec::sine(0.01, 1.0, 0.0, &["b"]), 0).unwrap();
        let r = check_persistence(&phi, &psi, ball.clone(), &samples, &tight, Solver::ClosedForm).unwrap();
        assert!(r.passed && r.max_radius <= 0.01);
        let strict = MetricEntourage::new(0.001).unwrap();
        let r = check_persistence(&phi, &psi, ball, &samples, &strict, Solver::ClosedForm).unwrap();
        assert_eq!(r.pass_rate, 0.0);
        assert!(r.rows.iter().all(|row| row.tracing_radius.unwrap() > 0.001));
    }

    #[test]
    fn uniqueness_certificates() {
        let phi = models::example_3_7(2.0).unwrap();
        let a = MetricEntourage::new(1.0).unwrap();
        let u = shadow_uniqueness(&Point::scalar(0.0), &Point::scalar(0.0), &phi, &a, 10, 0.0).unwrap();
        assert_eq!(u, Uniqueness::Coincide { distance: 0.0 });
        let u = shadow_uniqueness(&Point::scalar(0.0), &Point::scalar(0.1), &phi, &a, 10, 0.0).unwrap();
        assert!(matches!(u, Uniqueness::Separated { length: 4, .. }), "{u:?}");
        let u = shadow_uniqueness(&Point::scalar(0.0), &Point::scalar(0.1), &phi, &a, 3, 0.0).unwrap();
        assert_eq!(u, Uniqueness::Inconclusive { searched_radius: 3 });

        // Two brute-force runs from shifted boxes land on the same shadow.
        let po = perturbed_orbit(&phi, ball_for(&phi, 12), &Point::scalar(-0.6), 1e-3, 5).unwrap();
        let base = default_search_box(&po);
        let shifted = AxisBox::new(
            base.sides().iter().map(|s| Interval::new(s.center + 0.3 * s.radius, s.radius)).collect(),
        );
        let s1 = shadow_generic(&po, &phi, &base, GridSpec::default()).unwrap();
        let s2 = shadow_generic(&po, &phi, &shifted, GridSpec::default()).unwrap();
        let tol = 2.0 * s1.final_cell.max(s2.final_cell);
        let u = shadow_uniqueness(&s1.point, &s2.point, &phi, &a, 10, tol).unwrap();
        assert!(matches!(u, Uniqueness::Coincide { .. }));
    }

    #[test]
    fn shadow_moves_with_conjugacy() {
        let phi = models::example_3_7(2.0).unwrap();
        let h = CoordinateChange::scaling(vec![3.0]).unwrap();
        let conj = phi.conjugate(&h).unwrap();
        let po = perturbed_orbit(&phi, ball_for(&phi, 15), &Point::scalar(0.2), 1e-3, 8).unwrap();
        let y = shadow_diagonal_linear(&po, &phi).unwrap().point;
        let moved = shadow_diagonal_linear(&po.transport(&h, &conj).unwrap(), &conj).unwrap().point;
        assert!(moved.distance(&h.apply(&y)) <= 1e-12);
    }

    #[test]
    fn shadowing_through_a_set() {
        let phi = models::example_3_7(2.0).unwrap();
        let samples: Vec<Point> = (0..10).map(|i| Point::scalar(-1.0 + 0.2 * i as f64)).collect();
        let b = BoxSet::from_box(AxisBox::from_bounds(&[(0.0, 1.0)]).unwrap());
        let e = MetricEntourage::new(3e-3).unwrap();
        let r = check_shadowing(&phi, ball_for(&phi, 10), &samples, 1e-3, 1, &e, Solver::ClosedForm, Some(&b)).unwrap();
        assert_eq!(r.rows.len(), 5);
        assert!(r.passed);
    }
}
