//! Pseudo-orbits over Cayley balls.
//!
//! A family `{x_g}` indexed by a ball is an eps-pseudo-orbit when every
//! internal edge `(g, s g)` satisfies `|x_{sg} - Phi_s(x_g)| <= eps`. The
//! declared epsilon is the certified bound a constructor promises; the
//! realized epsilon is the measured maximum edge defect.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::action::{Action, CoordinateChange};
use crate::error::{Error, Result};
use crate::group::{Budget, CayleyBall, GeneratingSet};
use crate::uniformity::{AxisBox, BoxSet, Point};

/// Relative slack granted to floating-point edge defects.
pub const AUDIT_RELATIVE: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct PseudoOrbit {
    ball: Arc<CayleyBall>,
    points: Vec<Point>,
    declared_epsilon: f64,
    realized_epsilon: f64,
}

impl PseudoOrbit {
    /// Wraps an arbitrary point assignment and measures its edge defect.
    pub fn new(
        phi: &Action,
        ball: Arc<CayleyBall>,
        points: Vec<Point>,
        declared_epsilon: f64,
    ) -> Result<Self> {
        phi.check_ball(&ball)?;
        if points.len() != ball.len() {
            return Err(Error::input(format!(
                "{} points for a ball of {} elements",
                points.len(),
                ball.len()
            )));
        }
        for p in &points {
            p.check_dim(phi.dim())?;
        }
        let realized_epsilon = edge_defect(phi, &ball, &points)?;
        Ok(PseudoOrbit {
            ball,
            points,
            declared_epsilon,
            realized_epsilon,
        })
    }

    pub fn ball(&self) -> &Arc<CayleyBall> {
        &self.ball
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// `x_e`.
    pub fn base(&self) -> &Point {
        &self.points[0]
    }

    pub fn declared_epsilon(&self) -> f64 {
        self.declared_epsilon
    }

    pub fn realized_epsilon(&self) -> f64 {
        self.realized_epsilon
    }

    pub fn magnitude(&self) -> f64 {
        self.points
            .iter()
            .flat_map(|p| p.coords().iter())
            .fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Realized defect within the declared bound, up to rounding.
    pub fn is_valid(&self) -> bool {
        self.realized_epsilon
            <= self.declared_epsilon + AUDIT_RELATIVE * (1.0 + self.magnitude())
    }

    /// The pseudo-orbit passes through `b` when `x_e` lies in it.
    pub fn passes_through(&self, b: &BoxSet) -> bool {
        b.contains_point(self.base())
    }

    /// Re-measures the edge defect against another action on the same ball.
    pub fn revalidate(&mut self, phi: &Action) -> Result<f64> {
        phi.check_ball(&self.ball)?;
        self.realized_epsilon = edge_defect(phi, &self.ball, &self.points)?;
        Ok(self.realized_epsilon)
    }

    /// Smallest box containing every point.
    pub fn bounding_box(&self) -> AxisBox {
        let n = self.points[0].dim();
        let bounds: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                self.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p.coords()[i]), hi.max(p.coords()[i]))
                })
            })
            .collect();
        AxisBox::from_bounds(&bounds).expect("finite points")
    }

    /// Points restricted to the sub-ball of radius `r`.
    pub fn restrict(&self, phi: &Action, r: usize) -> Result<PseudoOrbit> {
        let ball = Arc::new(CayleyBall::new(self.ball.genset(), r.min(self.ball.radius()), Budget::default())?);
        let points = self.points[..ball.len()].to_vec();
        PseudoOrbit::new(phi, ball, points, self.declared_epsilon)
    }

    /// `{h(x_g)}` as a pseudo-orbit of `h Phi h^-1`, with declared epsilon
    /// scaled by the Lipschitz constant of `h`.
    pub fn transport(&self, h: &CoordinateChange, conjugated: &Action) -> Result<PseudoOrbit> {
        let points = self.points.iter().map(|p| h.apply(p)).collect();
        PseudoOrbit::new(
            conjugated,
            self.ball.clone(),
            points,
            h.lipschitz() * self.declared_epsilon,
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        let genset = self.ball.genset();
        let points: serde_json::Map<String, serde_json::Value> = self
            .ball
            .elements()
            .iter()
            .zip(&self.points)
            .map(|(e, p)| (e.element.normal_form().to_string(), json!(p.coords())))
            .collect();
        json!({
            "ball": {
                "radius": self.ball.radius(),
                "size": self.ball.len(),
                "generators": genset.generators().iter().map(|g| g.name.clone()).collect::<Vec<_>>(),
            },
            "points": points,
            "declared_epsilon": self.declared_epsilon,
            "realized_epsilon": self.realized_epsilon,
        })
    }
}

/// Maximum over internal edges `(g, s g)` of `|x_{sg} - Phi_s(x_g)|`.
pub fn edge_defect(phi: &Action, ball: &CayleyBall, points: &[Point]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (i, s, j) in ball.edges() {
        let image = phi.apply_generator(s, &points[i])?;
        worst = worst.max(points[j].distance(&image));
    }
    Ok(worst)
}

pub fn true_orbit(phi: &Action, ball: Arc<CayleyBall>, x: &Point) -> Result<PseudoOrbit> {
    let points = phi.orbit(&ball, x)?;
    PseudoOrbit::new(phi, ball, points, 0.0)
}

/// `x_g = Phi_g(x) + noise_g` with every noise coordinate uniform in
/// `[-eta, eta]`. Declared epsilon is `eta (1 + L)` with `L` the largest
/// generator Lipschitz constant.
pub fn perturbed_orbit(
    phi: &Action,
    ball: Arc<CayleyBall>,
    x: &Point,
    eta: f64,
    seed: u64,
) -> Result<PseudoOrbit> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::input("noise bound must be finite and nonnegative"));
    }
    if eta == 0.0 {
        return true_orbit(phi, ball, x);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = phi
        .orbit(&ball, x)?
        .into_iter()
        .map(|p| {
            Point::from_vec(
                p.coords()
                    .iter()
                    .map(|c| c + rng.gen_range(-eta..=eta))
                    .collect(),
            )
        })
        .collect();
    PseudoOrbit::new(phi, ball, points, eta * (1.0 + phi.lipschitz_max()))
}

/// The `Psi`-orbit of `x`, viewed as a pseudo-orbit of `Phi` with declared
/// epsilon equal to the certified generator distance between the actions.
pub fn orbit_of_nearby_action(
    psi: &Action,
    ball: Arc<CayleyBall>,
    x: &Point,
    phi: &Action,
) -> Result<PseudoOrbit> {
    let declared = psi.certified_distance(phi)?;
    let points = psi.orbit(&ball, x)?;
    PseudoOrbit::new(phi, ball, points, declared)
}

#[derive(Clone, Debug)]
pub struct Conversion {
    pub orbit: PseudoOrbit,
    /// The action presented over the target generating set.
    pub action: Action,
    /// `max_{s in S} l_T(s)`.
    pub max_rewrite_length: usize,
    pub lipschitz: f64,
}

/// Converts a pseudo-orbit over the generating set `T` of `phi` into one
/// over `target` on the ball of radius `radius`. With `m` the longest
/// geodesic rewriting of a target generator and `L` the largest generator
/// Lipschitz constant, the new declared epsilon is
/// `eps (L^m - 1) / (L - 1)` (or `eps m` when `L = 1`).
///
/// Every point between `g` and `s g` along the rewritten word must exist,
/// so the source ball needs radius at least `m (radius + 1) - 1`.
pub fn convert_generating_set(
    po: &PseudoOrbit,
    target: &GeneratingSet,
    phi: &Action,
    radius: usize,
    budget: Budget,
) -> Result<Conversion> {
    phi.check_ball(po.ball())?;
    let source = phi.genset();
    let m = target
        .generators()
        .iter()
        .map(|g| source.word_length(&g.value, budget))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    let needed = (m * (radius + 1)).saturating_sub(1);
    if po.ball().radius() < needed {
        return Err(Error::input(format!(
            "source ball radius {} is too small: converting to radius {radius} with m = {m} needs {needed}",
            po.ball().radius()
        )));
    }
    let lipschitz = phi.lipschitz_max();
    let eps = po.declared_epsilon();
    let declared = if lipschitz == 1.0 {
        eps * m as f64
    } else {
        eps * (lipschitz.powi(m as i32) - 1.0) / (lipschitz - 1.0)
    };
    let action = phi.regenerate(target, budget)?;
    let ball = Arc::new(CayleyBall::new(target, radius, budget)?);
    let points = ball
        .elements()
        .iter()
        .map(|e| {
            po.ball()
                .find(e.element.normal_form())
                .map(|i| po.points()[i].clone())
                .ok_or_else(|| Error::input(format!("element {} missing from the source ball", e.element)))
        })
        .collect::<Result<Vec<_>>>()?;
    let orbit = PseudoOrbit::new(&action, ball, points, declared)?;
    Ok(Conversion {
        orbit,
        action,
        max_rewrite_length: m,
        lipschitz,
    })
}
