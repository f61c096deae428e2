//! Separation search, truncated dynamical balls and the volume decay
//! report standing in for measure-zero dynamical balls.

use rayon::prelude::*;
use serde::Serialize;

use crate::action::Action;
use crate::error::{Error, Result};
use crate::group::{Budget, CayleyBall, GroupElement};
use crate::uniformity::{AxisBox, BoxSet, Interval, LebesgueMeasure, MetricEntourage, Point};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationCertificate {
    #[serde(skip)]
    pub element: GroupElement,
    pub word: String,
    pub length: usize,
    /// `|Phi_g(x) - Phi_g(y)|`, strictly above the entourage radius.
    pub distance: f64,
    pub searched_radius: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Separation {
    Found(SeparationCertificate),
    NotFound { searched_radius: usize },
}

impl Separation {
    pub fn found(&self) -> Option<&SeparationCertificate> {
        match self {
            Separation::Found(c) => Some(c),
            Separation::NotFound { .. } => None,
        }
    }
}

pub fn separation_search(
    phi: &Action,
    x: &Point,
    y: &Point,
    d: &MetricEntourage,
    max_radius: usize,
    budget: Budget,
) -> Result<Separation> {
    let ball = CayleyBall::new(phi.genset(), max_radius, budget)?;
    separation_search_in(phi, &ball, x, y, d)
}

/// Scans the ball in order of word length and returns the first element
/// moving `x` and `y` more than `eps_D` apart; among elements of that
/// length the smallest normal form wins.
pub fn separation_search_in(
    phi: &Action,
    ball: &CayleyBall,
    x: &Point,
    y: &Point,
    d: &MetricEntourage,
) -> Result<Separation> {
    y.check_dim(x.dim())?;
    if x == y {
        return Err(Error::input("separation needs distinct points"));
    }
    let ox = phi.orbit(ball, x)?;
    let oy = phi.orbit(ball, y)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in ball.elements().iter().enumerate() {
        if let Some((b, _)) = best {
            if e.length > ball.element(b).length {
                break;
            }
        }
        let dist = ox[i].distance(&oy[i]);
        if dist > d.epsilon() {
            let better = best.is_none_or(|(b, _)| {
                e.element.normal_form() < ball.element(b).element.normal_form()
            });
            if better {
                best = Some((i, dist));
            }
        }
    }
    Ok(match best {
        Some((i, distance)) => {
            let e = ball.element(i);
            Separation::Found(SeparationCertificate {
                element: e.element.clone(),
                word: ball.genset().word_to_string(e.element.word()),
                length: e.length,
                distance,
                searched_radius: ball.radius(),
            })
        }
        None => Separation::NotFound {
            searched_radius: ball.radius(),
        },
    })
}

/// Per-coordinate `max |scale_i(g)|` over elements of length at most `m`.
pub fn max_scales(phi: &Action, ball: &CayleyBall, m: usize) -> Option<Vec<f64>> {
    let mut out = vec![0.0f64; phi.dim()];
    for e in &ball.elements()[..ball.prefix_len(m)] {
        let s = phi.diagonal_scales(&e.element)?;
        for (o, l) in out.iter_mut().zip(s) {
            *o = o.max(l.abs());
        }
    }
    Some(out)
}

/// `Gamma_D^m(x)`: the points kept within `eps_D` of `x` by every element
/// of length at most `m`. For diagonal-linear actions this is the box with
/// coordinate half-widths `eps_D / max_g |scale_i(g)|`.
pub fn dynamical_ball(phi: &Action, x: &Point, d: &MetricEntourage, m: usize) -> Result<BoxSet> {
    let ball = CayleyBall::new(phi.genset(), m, Budget::default())?;
    dynamical_ball_in(phi, &ball, x, d, m)
}

pub fn dynamical_ball_in(
    phi: &Action,
    ball: &CayleyBall,
    x: &Point,
    d: &MetricEntourage,
    m: usize,
) -> Result<BoxSet> {
    x.check_dim(phi.dim())?;
    if m > ball.radius() {
        return Err(Error::input("dynamical ball radius exceeds the Cayley ball"));
    }
    let scales = max_scales(phi, ball, m).ok_or_else(|| {
        Error::Unsupported("exact dynamical balls need a diagonal-linear action".into())
    })?;
    Ok(BoxSet::from_box(AxisBox::new(
        x.coords()
            .iter()
            .zip(&scales)
            .map(|(&c, &l)| Interval::new(c, d.epsilon() / l))
            .collect(),
    )))
}

/// For diagonal-linear actions: expansive iff every coordinate has a
/// generator with `|scale| != 1` (its scales are then unbounded over G).
pub fn analytic_expansive(phi: &Action) -> Option<bool> {
    if !phi.is_diagonal_linear() {
        return None;
    }
    Some((0..phi.dim()).all(|i| {
        phi.maps()
            .iter()
            .any(|m| m.as_diagonal().unwrap()[i].abs() != 1.0)
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuExpansivityRow {
    pub index: usize,
    pub x: Point,
    pub volumes: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuExpansivityReport {
    pub epsilon: f64,
    pub radii: Vec<usize>,
    pub rows: Vec<MuExpansivityRow>,
    /// Observed `volume(m_{k+1}) / volume(m_k)` from the first sample.
    pub observed_ratios: Vec<f64>,
    /// The same ratios from the exact maximal scales.
    pub analytic_ratios: Vec<f64>,
    pub max_ratio_error: f64,
    pub samples_agree: bool,
    pub analytic_expansive: Option<bool>,
    pub threshold: f64,
    pub passed: bool,
}

/// Volumes of `Gamma_D^m(x)` per sample and radius. Passes iff volumes
/// strictly decrease in `m` and end below `threshold` for every sample.
pub fn mu_expansivity_report(
    phi: &Action,
    d: &MetricEntourage,
    samples: &[Point],
    radii: &[usize],
    mu: &LebesgueMeasure,
    threshold: f64,
) -> Result<MuExpansivityReport> {
    if samples.is_empty() || radii.is_empty() {
        return Err(Error::input("need at least one sample and one radius"));
    }
    let mut radii = radii.to_vec();
    radii.sort_unstable();
    radii.dedup();
    let top = *radii.last().unwrap();
    let ball = CayleyBall::new(phi.genset(), top, Budget::default())?;
    let rows = samples
        .par_iter()
        .enumerate()
        .map(|(index, x)| {
            let volumes = radii
                .iter()
                .map(|&m| mu.volume(&dynamical_ball_in(phi, &ball, x, d, m)?))
                .collect::<Result<Vec<_>>>()?;
            Ok(MuExpansivityRow {
                index,
                x: x.clone(),
                volumes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let scales: Vec<Vec<f64>> = radii
        .iter()
        .map(|&m| max_scales(phi, &ball, m).unwrap())
        .collect();
    let analytic_ratios: Vec<f64> = scales
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| a / b).product())
        .collect();
    let observed_ratios: Vec<f64> = rows[0].volumes.windows(2).map(|w| w[1] / w[0]).collect();
    let max_ratio_error = observed_ratios
        .iter()
        .zip(&analytic_ratios)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let samples_agree = rows.iter().all(|r| r.volumes == rows[0].volumes);
    let passed = rows.iter().all(|r| {
        r.volumes.windows(2).all(|w| w[1] < w[0]) && *r.volumes.last().unwrap() < threshold
    });
    Ok(MuExpansivityReport {
        epsilon: d.epsilon(),
        radii,
        rows,
        observed_ratios,
        analytic_ratios,
        max_ratio_error,
        samples_agree,
        analytic_expansive: analytic_expansive(phi),
        threshold,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::CoordinateChange;
    use crate::models;

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn separation_examples() {
        let e1 = MetricEntourage::new(1.0).unwrap();
        let phi = models::example_3_7(2.0).unwrap();
        let s = separation_search(&phi, &p(&[0.0]), &p(&[0.1]), &e1, 10, Budget::default()).unwrap();
        let c = s.found().unwrap();
        assert_eq!((c.length, c.word.as_str()), (4, "b b b b"));
        assert!((c.distance - 1.6).abs() < 1e-12);

        let z2 = models::example_2_2(2).unwrap();
        let s = separation_search(&z2, &p(&[0.5, 0.0]), &p(&[0.5, 0.25]), &e1, 6, Budget::default()).unwrap();
        let c = s.found().unwrap();
        assert_eq!(c.length, 3);
        assert_eq!(c.word, "e2 e2 e2");

        let iso = models::isometric(1).unwrap();
        let s = separation_search(&iso, &p(&[0.0]), &p(&[0.5]), &e1, 25, Budget::default()).unwrap();
        assert_eq!(s, Separation::NotFound { searched_radius: 25 });

        assert!(separation_search(&phi, &p(&[0.2]), &p(&[0.2]), &e1, 3, Budget::default()).is_err());
    }

    #[test]
    fn dynamical_ball_examples() {
        let e1 = MetricEntourage::new(1.0).unwrap();
        let phi = models::example_3_7(2.0).unwrap();
        let x = p(&[0.3]);
        assert_eq!(dynamical_ball(&phi, &x, &e1, 0).unwrap(), e1.cross_section(&x));
        let g = dynamical_ball(&phi, &x, &e1, 5).unwrap();
        assert_eq!(g.single().unwrap().sides()[0].radius, 2f64.powi(-5));
        assert_eq!(LebesgueMeasure::new(1).volume(&g).unwrap(), 2.0 * 2f64.powi(-5));

        let z2 = models::example_2_2(2).unwrap();
        let g = dynamical_ball(&z2, &p(&[1.0, 2.0]), &e1, 4).unwrap();
        let r: Vec<f64> = g.single().unwrap().sides().iter().map(|s| s.radius).collect();
        assert_eq!(r, [0.0625, 0.0625]);

        let (psi, _) = phi
            .perturb(&crate::action::PerturbationSpec::sine(0.01, 1.0, 0.0, &["b"]), 0)
            .unwrap();
        assert!(matches!(dynamical_ball(&psi, &x, &e1, 2), Err(Error::Unsupported(_))));
    }

    #[test]
    fn dynamical_balls_are_nested_and_match_separation() {
        let e1 = MetricEntourage::new(1.0).unwrap();
        let phi = models::example_3_6(2.0, 2).unwrap();
        let ball = CayleyBall::new(phi.genset(), 5, Budget::default()).unwrap();
        let x = p(&[0.1, -0.4]);
        for m in 0..5 {
            let inner = dynamical_ball_in(&phi, &ball, &x, &e1, m + 1).unwrap();
            let outer = dynamical_ball_in(&phi, &ball, &x, &e1, m).unwrap();
            assert!(inner.is_subset_of(&outer));
        }
        let sub = CayleyBall::new(phi.genset(), 3, Budget::default()).unwrap();
        let gamma = dynamical_ball_in(&phi, &ball, &x, &e1, 3).unwrap();
        for k in 0..40 {
            let t = k as f64 / 40.0;
            let y = p(&[0.1 + 0.3 * t - 0.1, -0.4 + 0.2 * (1.0 - t)]);
            if y == x {
                continue;
            }
            let separated = separation_search_in(&phi, &sub, &x, &y, &e1).unwrap().found().is_some();
            assert_eq!(!gamma.contains_point(&y), separated, "{y:?}");
        }
    }

    #[test]
    fn mu_expansivity_volumes() {
        let e1 = MetricEntourage::new(1.0).unwrap();
        let phi = models::example_3_7(2.0).unwrap();
        let samples = vec![p(&[0.0]), p(&[0.7]), p(&[-3.0])];
        let radii: Vec<usize> = (1..=8).collect();
        let mu = LebesgueMeasure::new(1);
        let r = mu_expansivity_report(&phi, &e1, &samples, &radii, &mu, 1e-2).unwrap();
        assert!(r.passed && r.samples_agree);
        for (k, v) in r.rows[0].volumes.iter().enumerate() {
            assert_eq!(*v, 2.0 * 2f64.powi(-(k as i32 + 1)));
        }
        assert!(r.observed_ratios.iter().all(|&q| q == 0.5));
        assert_eq!(r.max_ratio_error, 0.0);
        assert_eq!(r.analytic_expansive, Some(true));

        let iso = models::isometric(1).unwrap();
        let r = mu_expansivity_report(&iso, &e1, &samples, &radii, &mu, 1e-2).unwrap();
        assert!(!r.passed);
        assert_eq!(r.analytic_expansive, Some(false));
    }

    #[test]
    fn dynamical_ball_conjugates() {
        let phi = models::example_3_7(2.0).unwrap();
        let h = CoordinateChange::scaling(vec![3.0]).unwrap();
        let conj = phi.conjugate(&h).unwrap();
        let x = p(&[0.375]);
        let e = MetricEntourage::new(1.0).unwrap();
        let e3 = MetricEntourage::new(3.0).unwrap();
        for m in 0..8 {
            let lhs = dynamical_ball(&conj, &h.apply(&x), &e3, m).unwrap();
            let rhs = h.apply_set(&dynamical_ball(&phi, &x, &e, m).unwrap()).unwrap();
            assert_eq!(lhs, rhs);
        }
    }
}
