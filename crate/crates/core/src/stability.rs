//! Semiconjugacies and set-valued stability maps.
//!
//! `f(x)` is the shadow of the `Psi`-orbit of `x` viewed as a `Phi`-pseudo-orbit.
//! `H_m(x)` is the exact box `cap_{|g| <= m} Phi_{g^-1}(E'[Psi_g x])` for
//! diagonal-linear `Phi`, computed as a running intersection over the
//! breadth-first ball.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::action::{Action, CoordinateChange};
use crate::error::{Error, Result};
use crate::group::{Budget, CayleyBall, GroupElement};
use crate::pseudo_orbit::orbit_of_nearby_action;
use crate::shadowing::{join, shadow, Solver};
use crate::uniformity::{BoxSet, LebesgueMeasure, MetricEntourage, Point};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemiconjugacyRow {
    pub index: usize,
    pub x: Point,
    /// `None` when the shadow solver failed.
    pub fx: Option<Point>,
    pub tracing_radius: Option<f64>,
    pub pass: bool,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivarianceResidual {
    pub element: String,
    pub max_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SemiconjugacyTable {
    pub rows: Vec<SemiconjugacyRow>,
    pub epsilon: f64,
    pub ball_radius: usize,
    pub certified_distance: f64,
    /// Largest generator distance for which the telescoping bound delivers
    /// `eps_E`-tracing, when `Phi` is diagonal-linear and hyperbolic.
    pub admissible_delta: Option<f64>,
    pub residuals: Vec<EquivarianceResidual>,
    pub residual_tolerance: Option<f64>,
    #[serde(skip)]
    ball: Option<Arc<CayleyBall>>,
    #[serde(skip)]
    solver: Option<Solver>,
}

impl SemiconjugacyTable {
    pub fn max_distance(&self) -> f64 {
        self.rows
            .iter()
            .filter_map(|r| r.fx.as_ref().map(|f| r.x.distance(f)))
            .fold(0.0, f64::max)
    }

    pub fn unsolved_rows(&self) -> Vec<usize> {
        self.rows.iter().filter(|r| r.fx.is_none()).map(|r| r.index).collect()
    }

    /// Marks a row unsolved, as a failed solver would.
    pub fn drop_solution(&mut self, index: usize, note: &str) {
        if let Some(r) = self.rows.iter_mut().find(|r| r.index == index) {
            r.fx = None;
            r.tracing_radius = None;
            r.pass = false;
            r.note = Some(note.to_string());
        }
    }

    pub const CSV_HEADER: [&'static str; 6] = ["index", "x", "fx", "distance", "tracing_radius", "pass"];

    pub fn to_csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.index.to_string(),
                    join(r.x.coords()),
                    r.fx.as_ref().map_or(String::new(), |f| join(f.coords())),
                    r.fx.as_ref().map_or(String::new(), |f| r.x.distance(f).to_string()),
                    r.tracing_radius.map_or(String::new(), |v| v.to_string()),
                    r.pass.to_string(),
                ]
            })
            .collect()
    }
}

/// `eps_E (kappa - 1)` where `kappa` is the weakest per-coordinate
/// expansion among the generators.
pub fn admissible_delta(phi: &Action, e: &MetricEntourage) -> Option<f64> {
    if !phi.is_diagonal_linear() {
        return None;
    }
    let kappa = (0..phi.dim())
        .map(|i| {
            phi.maps()
                .iter()
                .map(|m| m.as_diagonal().unwrap()[i].abs())
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min);
    (kappa > 1.0).then(|| e.epsilon() * (kappa - 1.0))
}

fn solve_fx(phi: &Action, psi: &Action, ball: &Arc<CayleyBall>, x: &Point, solver: Solver) -> Result<(Point, f64)> {
    let po = orbit_of_nearby_action(psi, ball.clone(), x, phi)?;
    let s = shadow(&po, phi, solver)?;
    Ok((s.point, s.tracing_radius))
}

pub fn build_semiconjugacy(
    phi: &Action,
    psi: &Action,
    ball: Arc<CayleyBall>,
    e: &MetricEntourage,
    samples: &[Point],
    solver: Solver,
) -> Result<SemiconjugacyTable> {
    phi.check_ball(&ball)?;
    psi.check_ball(&ball)?;
    let certified_distance = psi.certified_distance(phi)?;
    let admissible = admissible_delta(phi, e);
    if let Some(delta) = admissible {
        if certified_distance > delta {
            return Err(Error::input(format!(
                "generator distance {certified_distance} exceeds the admissible {delta} for eps_E = {}",
                e.epsilon()
            )));
        }
    }
    let rows = samples
        .par_iter()
        .enumerate()
        .map(|(index, x)| match solve_fx(phi, psi, &ball, x, solver) {
            Ok((fx, radius)) => SemiconjugacyRow {
                index,
                x: x.clone(),
                pass: radius <= e.epsilon() && x.distance(&fx) <= e.epsilon(),
                fx: Some(fx),
                tracing_radius: Some(radius),
                note: None,
            },
            Err(err) => SemiconjugacyRow {
                index,
                x: x.clone(),
                fx: None,
                tracing_radius: None,
                pass: false,
                note: Some(format!("unsolved: {err}")),
            },
        })
        .collect();
    Ok(SemiconjugacyTable {
        rows,
        epsilon: e.epsilon(),
        ball_radius: ball.radius(),
        certified_distance,
        admissible_delta: admissible,
        residuals: Vec::new(),
        residual_tolerance: None,
        ball: Some(ball),
        solver: Some(solver),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuityModulus {
    pub delta: f64,
    pub pairs: usize,
    pub max_image_distance: f64,
}

/// `max |f(x) - f(x')|` over solved sample pairs with `|x - x'| <= delta`.
pub fn continuity_modulus(table: &SemiconjugacyTable, delta: f64) -> ContinuityModulus {
    let solved: Vec<(&Point, &Point)> = table
        .rows
        .iter()
        .filter_map(|r| r.fx.as_ref().map(|f| (&r.x, f)))
        .collect();
    let mut pairs = 0;
    let mut worst: f64 = 0.0;
    for (i, (x, fx)) in solved.iter().enumerate() {
        for (y, fy) in &solved[i + 1..] {
            if x.distance(y) <= delta {
                pairs += 1;
                worst = worst.max(fx.distance(fy));
            }
        }
    }
    ContinuityModulus {
        delta,
        pairs,
        max_image_distance: worst,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemiconjugacyReport {
    pub residuals: Vec<EquivarianceResidual>,
    pub max_residual: f64,
    pub tolerance: f64,
    pub max_distance: f64,
    pub epsilon: f64,
    pub unsolved: Vec<usize>,
    pub passed: bool,
}

/// Equivariance residuals `|f(Psi_h x) - Phi_h(f(x))|`, where `f(Psi_h x)`
/// is solved from its own orbit window. Records them in the table.
pub fn verify_semiconjugacy(
    table: &mut SemiconjugacyTable,
    phi: &Action,
    psi: &Action,
    test_elements: &[GroupElement],
    tol: f64,
) -> Result<SemiconjugacyReport> {
    let ball = table
        .ball
        .clone()
        .ok_or_else(|| Error::input("table was not built by build_semiconjugacy"))?;
    let solver = table.solver.unwrap();
    let mut residuals = Vec::with_capacity(test_elements.len());
    for h in test_elements {
        let worst = table
            .rows
            .par_iter()
            .filter_map(|r| r.fx.as_ref().map(|fx| (r, fx)))
            .map(|(r, fx)| -> Result<f64> {
                let shifted = psi.evaluate(h, &r.x)?;
                let (fs, _) = solve_fx(phi, psi, &ball, &shifted, solver)?;
                Ok(fs.distance(&phi.evaluate(h, fx)?))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        residuals.push(EquivarianceResidual {
            element: phi.genset().word_to_string(h.word()),
            max_residual: worst,
        });
    }
    let max_residual = residuals.iter().map(|r| r.max_residual).fold(0.0, f64::max);
    table.residuals = residuals.clone();
    table.residual_tolerance = Some(tol);
    let unsolved = table.unsolved_rows();
    let max_distance = table.max_distance();
    Ok(SemiconjugacyReport {
        passed: unsolved.is_empty() && max_residual <= tol && max_distance <= table.epsilon,
        residuals,
        max_residual,
        tolerance: tol,
        max_distance,
        epsilon: table.epsilon,
        unsolved,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingletonReport {
    /// (a) every sample has an image.
    pub domain_full: bool,
    pub unsolved: Vec<usize>,
    /// (b) singletons are null.
    pub values_null: bool,
    /// (c) `(x, f(x)) in E`.
    pub near_identity: bool,
    pub max_distance: f64,
    /// (d) the recorded residuals are within their tolerance.
    pub equivariant: bool,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Checks the four conditions for the singleton map `H(x) = {f(x)}`.
pub fn singleton_h_from_map(
    table: &SemiconjugacyTable,
    mu: &LebesgueMeasure,
    e: &MetricEntourage,
) -> SingletonReport {
    let unsolved = table.unsolved_rows();
    let domain_full = unsolved.is_empty();
    let values_null = table
        .rows
        .iter()
        .filter_map(|r| r.fx.as_ref())
        .all(|f| mu.point_mass(f) == 0.0);
    let max_distance = table.max_distance();
    let near_identity = max_distance <= e.epsilon();
    let equivariant = match table.residual_tolerance {
        Some(tol) => !table.residuals.is_empty() && table.residuals.iter().all(|r| r.max_residual <= tol),
        None => false,
    };
    let mut failures = Vec::new();
    if !domain_full {
        failures.push(format!(
            "(a) domain: unsolved rows {}",
            unsolved.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
        ));
    }
    if !values_null {
        failures.push("(b) a value carries positive mass".into());
    }
    if !near_identity {
        failures.push(format!("(c) sup |x - f(x)| = {max_distance} exceeds {}", e.epsilon()));
    }
    if !equivariant {
        failures.push(if table.residual_tolerance.is_none() {
            "(d) equivariance not verified".into()
        } else {
            "(d) equivariance residual above tolerance".into()
        });
    }
    SingletonReport {
        domain_full,
        unsolved,
        values_null,
        near_identity,
        max_distance,
        equivariant,
        passed: failures.is_empty(),
        failures,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HWindow {
    pub x: Point,
    pub epsilon: f64,
    /// `(m, H_m(x))` in increasing `m`.
    pub windows: Vec<(usize, BoxSet)>,
}

impl HWindow {
    pub fn get(&self, m: usize) -> Option<&BoxSet> {
        self.windows.iter().find(|(r, _)| *r == m).map(|(_, b)| b)
    }

    /// The deepest nonempty window.
    pub fn deepest(&self) -> Option<(usize, &BoxSet)> {
        self.windows
            .iter()
            .rev()
            .find(|(_, b)| !b.is_empty())
            .map(|(m, b)| (*m, b))
    }

    pub fn first_empty(&self) -> Option<usize> {
        self.windows.iter().find(|(_, b)| b.is_empty()).map(|(m, _)| *m)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "x": self.x.coords(),
            "epsilon": self.epsilon,
            "windows": self.windows.iter().map(|(m, b)| json!({"radius": m, "boxes": b.to_json()})).collect::<Vec<_>>(),
        })
    }
}

pub fn build_h_window(
    phi: &Action,
    psi: &Action,
    e: &MetricEntourage,
    x: &Point,
    radii: &[usize],
) -> Result<HWindow> {
    let top = radii.iter().copied().max().unwrap_or(0);
    let ball = CayleyBall::new(phi.genset(), top, Budget::default())?;
    build_h_window_in(phi, psi, &ball, e, x, radii)
}

pub fn build_h_window_in(
    phi: &Action,
    psi: &Action,
    ball: &CayleyBall,
    e: &MetricEntourage,
    x: &Point,
    radii: &[usize],
) -> Result<HWindow> {
    if !phi.is_diagonal_linear() {
        return Err(Error::Unsupported("exact H windows need a diagonal-linear Phi".into()));
    }
    if radii.is_empty() {
        return Err(Error::input("no window radii"));
    }
    phi.check_ball(ball)?;
    psi.check_ball(ball)?;
    let mut radii = radii.to_vec();
    radii.sort_unstable();
    radii.dedup();
    if *radii.last().unwrap() > ball.radius() {
        return Err(Error::input("window radius exceeds the Cayley ball"));
    }
    let orbit = psi.orbit(ball, x)?;
    let zeros = vec![0.0; phi.dim()];
    let mut current = e.cross_section(x);
    let mut windows = Vec::with_capacity(radii.len());
    let mut next = radii.iter().peekable();
    for (i, el) in ball.elements().iter().enumerate() {
        while let Some(&&m) = next.peek() {
            if el.length > m {
                windows.push((m, current.clone()));
                next.next();
            } else {
                break;
            }
        }
        if next.peek().is_none() {
            break;
        }
        if i == 0 || current.is_empty() {
            continue;
        }
        let inv: Vec<f64> = phi
            .diagonal_scales(&el.element)
            .unwrap()
            .iter()
            .map(|l| 1.0 / l)
            .collect();
        let constraint = e.cross_section(&orbit[i]).linear_image(&inv, &zeros)?;
        current = current.intersect(&constraint)?;
    }
    for &m in next {
        windows.push((m, current.clone()));
    }
    Ok(HWindow {
        x: x.clone(),
        epsilon: e.epsilon(),
        windows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichCheck {
    pub m: usize,
    pub inner: bool,
    pub outer: bool,
    /// Inflation that would make each inclusion hold; zero when it does.
    pub inner_excess: f64,
    pub outer_excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HPropertiesReport {
    pub x: Point,
    pub element: String,
    pub nested: bool,
    pub volumes: Vec<f64>,
    /// `volume(H_{m+1}) / volume(H_m)` over consecutive computed radii.
    pub volume_ratios: Vec<f64>,
    pub volumes_decay: bool,
    pub sandwich: Vec<SandwichCheck>,
    pub sandwich_holds: bool,
    pub near_identity: bool,
    pub passed: bool,
}

/// Nesting, volume decay, the equivariance sandwich
/// `H_{m+l}(Psi_h x) ⊆ Phi_h(H_m x) ⊆ H_{m-l}(Psi_h x)` with `l = |h|`, and
/// `H_m(x) ⊆ E[x]` (`e` defaults to `E'`).
#[allow(clippy::too_many_arguments)]
pub fn verify_h_properties(
    phi: &Action,
    psi: &Action,
    e_prime: &MetricEntourage,
    x: &Point,
    h: &GroupElement,
    radii: &[usize],
    mu: &LebesgueMeasure,
    e: Option<&MetricEntourage>,
) -> Result<HPropertiesReport> {
    let hw = build_h_window(phi, psi, e_prime, x, radii)?;
    let shifted = psi.evaluate(h, x)?;
    let hs = build_h_window(phi, psi, e_prime, &shifted, radii)?;
    let l = phi.genset().word_length(h.normal_form(), Budget::default())?;
    let scales = phi.diagonal_scales(h).unwrap();
    let zeros = vec![0.0; phi.dim()];

    let nested = hw.windows.windows(2).all(|w| w[1].1.is_subset_of(&w[0].1));
    let volumes = hw
        .windows
        .iter()
        .map(|(_, b)| mu.volume(b))
        .collect::<Result<Vec<_>>>()?;
    let volume_ratios: Vec<f64> = volumes.windows(2).map(|w| w[1] / w[0]).collect();
    let volumes_decay = volumes.windows(2).all(|w| w[1] < w[0] || w[1] == 0.0);

    let mut sandwich = Vec::new();
    for (m, set) in &hw.windows {
        let (Some(up), Some(down)) = (hs.get(m + l), m.checked_sub(l).and_then(|d| hs.get(d))) else {
            continue;
        };
        let image = set.linear_image(&scales, &zeros)?;
        let inner = up.is_subset_of(&image);
        let outer = image.is_subset_of(down);
        sandwich.push(SandwichCheck {
            m: *m,
            inner,
            outer,
            inner_excess: if inner { 0.0 } else { box_excess(up, &image) },
            outer_excess: if outer { 0.0 } else { box_excess(&image, down) },
        });
    }
    let sandwich_holds = sandwich.iter().all(|c| c.inner && c.outer);
    let bound = e.unwrap_or(e_prime).cross_section(x);
    let near_identity = hw.windows.iter().all(|(_, b)| b.is_subset_of(&bound));
    Ok(HPropertiesReport {
        x: x.clone(),
        element: phi.genset().word_to_string(h.word()),
        passed: nested && volumes_decay && sandwich_holds && near_identity,
        nested,
        volumes,
        volume_ratios,
        volumes_decay,
        sandwich,
        sandwich_holds,
        near_identity,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PersistenceWitness {
    pub y: Point,
    pub m: usize,
    pub slack: f64,
    /// `max_{|g| <= m} |Psi_g x - Phi_g y|`.
    pub max_deviation: f64,
    pub passed: bool,
}

/// Centre of the deepest nonempty window, audited against every element of
/// the radius-`m` ball with slack equal to the window half-width.
pub fn extract_persistence_witness(
    hw: &HWindow,
    phi: &Action,
    psi: &Action,
) -> Result<Option<PersistenceWitness>> {
    let Some((m, set)) = hw.deepest() else {
        return Ok(None);
    };
    let b = &set.boxes()[0];
    let y = b.center();
    let slack = b.max_radius();
    let ball = CayleyBall::new(phi.genset(), m, Budget::default())?;
    let ox = psi.orbit(&ball, &hw.x)?;
    let oy = phi.orbit(&ball, &y)?;
    let max_deviation = ox.iter().zip(&oy).map(|(a, b)| a.distance(b)).fold(0.0, f64::max);
    Ok(Some(PersistenceWitness {
        passed: max_deviation <= hw.epsilon + slack,
        y,
        m,
        slack,
        max_deviation,
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UscRow {
    pub rho: f64,
    /// Smallest inflation of `H_m(x)` containing every sampled `H_m(x')`.
    pub excess: f64,
}

/// Upper semi-continuity scan: for each `rho`, neighbours `x'` at offsets
/// `rho * k / steps` along each axis; reports how far `H_m(x')` pokes out
/// of `H_m(x)`. Should tend to 0 with `rho`.
pub fn usc_scan(
    phi: &Action,
    psi: &Action,
    e_prime: &MetricEntourage,
    x: &Point,
    m: usize,
    rhos: &[f64],
    steps: usize,
) -> Result<Vec<UscRow>> {
    let ball = CayleyBall::new(phi.genset(), m, Budget::default())?;
    let base = build_h_window_in(phi, psi, &ball, e_prime, x, &[m])?;
    let hx = base.windows[0].1.clone();
    rhos.iter()
        .map(|&rho| {
            let mut excess: f64 = 0.0;
            for axis in 0..x.dim() {
                for k in -(steps as i64)..=(steps as i64) {
                    let mut c = x.coords().to_vec();
                    c[axis] += rho * k as f64 / steps.max(1) as f64;
                    let hw = build_h_window_in(phi, psi, &ball, e_prime, &Point::from_vec(c), &[m])?;
                    let near = &hw.windows[0].1;
                    excess = excess.max(box_excess(near, &hx));
                }
            }
            Ok(UscRow { rho, excess })
        })
        .collect()
}

/// Smallest `t` with `a ⊆ inflate(b, t)`, for single-box sets.
fn box_excess(a: &BoxSet, b: &BoxSet) -> f64 {
    match (a.single(), b.single()) {
        (None, _) if a.is_empty() => 0.0,
        (Some(a), Some(b)) => a
            .sides()
            .iter()
            .zip(b.sides())
            .map(|(s, t)| (t.lo() - s.lo()).max(s.hi() - t.hi()).max(0.0))
            .fold(0.0, f64::max),
        _ => f64::INFINITY,
    }
}

/// `(h^* mu)(h(A))` and `mu(A)` for a coordinate change `h`; they agree.
pub fn pullback_bookkeeping(h: &CoordinateChange, set: &BoxSet) -> Result<(f64, f64)> {
    let image = h.apply_set(set)?;
    let pulled = LebesgueMeasure::pullback(set.dim(), h.scales.clone())?;
    Ok((pulled.volume(&image)?, LebesgueMeasure::new(set.dim()).volume(set)?))
}
