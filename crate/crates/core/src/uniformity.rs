//! The max-metric uniformity on `R^n`: closed entourages `E_eps`, their
//! cross sections, axis-aligned box sets and Lebesgue volume.
//!
//! Boxes store each side in midpoint-radius form. Cross sections, diagonal
//! images with power-of-two scales and intersections of nested boxes are
//! then exact, so widths and volume ratios carry no rounding. Containment
//! predicates compare the rounded endpoints `center -/+ radius`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::input("points need at least one coordinate"));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::input(format!("non-finite coordinate {c}")));
        }
        Ok(Point(coords))
    }

    pub(crate) fn from_vec(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn scalar(x: f64) -> Self {
        Point(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    /// Max-metric distance.
    pub fn distance(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() == dim {
            Ok(())
        } else {
            Err(Error::input(format!(
                "point has dimension {}, expected {dim}",
                self.dim()
            )))
        }
    }
}

impl From<f64> for Point {
    fn from(x: f64) -> Self {
        Point::scalar(x)
    }
}

/// The closed entourage `{(x, y) : max_i |x_i - y_i| <= eps}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricEntourage {
    eps: f64,
}

impl MetricEntourage {
    pub fn new(eps: f64) -> Result<Self> {
        if eps.is_finite() && eps > 0.0 {
            Ok(MetricEntourage { eps })
        } else {
            Err(Error::input(format!("entourage radius must be positive, got {eps}")))
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    pub fn contains(&self, x: &Point, y: &Point) -> Result<bool> {
        y.check_dim(x.dim())?;
        Ok(x.distance(y) <= self.eps)
    }

    /// `E_a o E_b = E_{a+b}` in the max-metric realization.
    pub fn compose(&self, other: &MetricEntourage) -> MetricEntourage {
        MetricEntourage {
            eps: self.eps + other.eps,
        }
    }

    /// The `m`-fold composite `E o E o ... o E`.
    pub fn power(&self, m: usize) -> MetricEntourage {
        let mut out = *self;
        for _ in 1..m.max(1) {
            out = out.compose(self);
        }
        out
    }

    /// The cross section `E[x]`: a closed box of half-width `eps` around `x`.
    pub fn cross_section(&self, x: &Point) -> BoxSet {
        BoxSet::from_box(AxisBox::new(
            x.coords()
                .iter()
                .map(|&c| Interval::new(c, self.eps))
                .collect(),
        ))
    }
}

/// Closed interval `[center - radius, center + radius]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub center: f64,
    pub radius: f64,
}

impl Interval {
    pub fn new(center: f64, radius: f64) -> Self {
        debug_assert!(radius >= 0.0);
        Interval { center, radius }
    }

    /// Largest midpoint-radius interval inside `[lo, hi]` (inward rounding).
    pub fn from_bounds(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        let center = 0.5 * lo + 0.5 * hi;
        let mut radius = (center - lo).min(hi - center).max(0.0);
        while radius > 0.0 && (center - radius < lo || center + radius > hi) {
            radius = radius.next_down();
        }
        Interval { center, radius }
    }

    pub fn lo(&self) -> f64 {
        self.center - self.radius
    }

    pub fn hi(&self) -> f64 {
        self.center + self.radius
    }

    pub fn width(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo() <= x && x <= self.hi()
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo() <= self.lo() && self.hi() <= other.hi()
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        if self.is_subset_of(other) {
            return Some(*self);
        }
        if other.is_subset_of(self) {
            return Some(*other);
        }
        let lo = self.lo().max(other.lo());
        let hi = self.hi().min(other.hi());
        (lo <= hi).then(|| Interval::from_bounds(lo, hi))
    }

    /// Image under `x -> scale * x + offset`.
    pub fn affine_image(&self, scale: f64, offset: f64) -> Interval {
        Interval {
            center: scale * self.center + offset,
            radius: scale.abs() * self.radius,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AxisBox {
    sides: Vec<Interval>,
}

impl AxisBox {
    pub fn new(sides: Vec<Interval>) -> Self {
        AxisBox { sides }
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        bounds
            .iter()
            .map(|&(lo, hi)| {
                if lo <= hi && lo.is_finite() && hi.is_finite() {
                    Ok(Interval::from_bounds(lo, hi))
                } else {
                    Err(Error::input(format!("bad interval [{lo}, {hi}]")))
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(AxisBox::new)
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[Interval] {
        &self.sides
    }

    pub fn center(&self) -> Point {
        Point::from_vec(self.sides.iter().map(|s| s.center).collect())
    }

    pub fn max_radius(&self) -> f64 {
        self.sides.iter().map(|s| s.radius).fold(0.0, f64::max)
    }

    pub fn lebesgue(&self) -> f64 {
        self.sides.iter().map(Interval::width).product()
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.sides.iter().zip(p.coords()).all(|(s, &x)| s.contains(x))
    }

    pub fn is_subset_of(&self, other: &AxisBox) -> bool {
        self.sides
            .iter()
            .zip(&other.sides)
            .all(|(a, b)| a.is_subset_of(b))
    }

    pub fn intersect(&self, other: &AxisBox) -> Option<AxisBox> {
        self.sides
            .iter()
            .zip(&other.sides)
            .map(|(a, b)| a.intersect(b))
            .collect::<Option<Vec<_>>>()
            .map(AxisBox::new)
    }

    pub fn bounds(&self) -> Vec<[f64; 2]> {
        self.sides.iter().map(|s| [s.lo(), s.hi()]).collect()
    }
}

/// A finite union of closed axis-aligned boxes with pairwise disjoint
/// interiors. The empty list is the empty set.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSet {
    dim: usize,
    boxes: Vec<AxisBox>,
}

impl BoxSet {
    pub fn empty(dim: usize) -> Self {
        BoxSet {
            dim,
            boxes: Vec::new(),
        }
    }

    pub fn from_box(b: AxisBox) -> Self {
        BoxSet {
            dim: b.dim(),
            boxes: vec![b],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[AxisBox] {
        &self.boxes
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// The box when the set consists of exactly one.
    pub fn single(&self) -> Option<&AxisBox> {
        match self.boxes.as_slice() {
            [b] => Some(b),
            _ => None,
        }
    }

    fn check_dim(&self, other: &BoxSet) -> Result<()> {
        if self.dim == other.dim {
            Ok(())
        } else {
            Err(Error::input(format!(
                "box sets of dimension {} and {}",
                self.dim, other.dim
            )))
        }
    }

    /// Pairwise intersections of two disjoint decompositions stay disjoint.
    pub fn intersect(&self, other: &BoxSet) -> Result<BoxSet> {
        self.check_dim(other)?;
        let boxes = self
            .boxes
            .iter()
            .flat_map(|a| other.boxes.iter().filter_map(move |b| a.intersect(b)))
            .collect();
        Ok(BoxSet {
            dim: self.dim,
            boxes,
        })
    }

    /// Image under the diagonal affine map `x_i -> scales_i * x_i + offsets_i`.
    pub fn linear_image(&self, scales: &[f64], offsets: &[f64]) -> Result<BoxSet> {
        if scales.len() != self.dim || offsets.len() != self.dim {
            return Err(Error::input("linear_image: dimension mismatch"));
        }
        if scales.iter().any(|&s| s == 0.0 || !s.is_finite()) {
            return Err(Error::input("linear_image: scale coordinates must be finite and nonzero"));
        }
        let boxes = self
            .boxes
            .iter()
            .map(|b| {
                AxisBox::new(
                    b.sides
                        .iter()
                        .zip(scales.iter().zip(offsets))
                        .map(|(s, (&l, &t))| s.affine_image(l, t))
                        .collect(),
                )
            })
            .collect();
        Ok(BoxSet {
            dim: self.dim,
            boxes,
        })
    }

    /// Reorders axes: output axis `i` is input axis `perm[i]`.
    pub fn permute_axes(&self, perm: &[usize]) -> BoxSet {
        let boxes = self
            .boxes
            .iter()
            .map(|b| AxisBox::new(perm.iter().map(|&j| b.sides[j]).collect()))
            .collect();
        BoxSet {
            dim: self.dim,
            boxes,
        }
    }

    /// Grows every side by `rho` (the result may overlap; used only for
    /// containment checks).
    pub fn inflate(&self, rho: f64) -> BoxSet {
        let boxes = self
            .boxes
            .iter()
            .map(|b| {
                AxisBox::new(
                    b.sides
                        .iter()
                        .map(|s| Interval::new(s.center, s.radius + rho))
                        .collect(),
                )
            })
            .collect();
        BoxSet {
            dim: self.dim,
            boxes,
        }
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        p.dim() == self.dim && self.boxes.iter().any(|b| b.contains(p))
    }

    /// Exact containment test on box endpoints. Each box of `self` is split
    /// along every endpoint of `other` into elementary cells; an open cell
    /// either lies in a closed box of `other` or misses it, so testing one
    /// interior point per cell decides coverage of its closure.
    pub fn is_subset_of(&self, other: &BoxSet) -> bool {
        if self.dim != other.dim {
            return false;
        }
        self.boxes.iter().all(|a| {
            if other.boxes.iter().any(|b| a.is_subset_of(b)) {
                return true;
            }
            let reps: Vec<Vec<f64>> = (0..self.dim)
                .map(|i| {
                    let (lo, hi) = (a.sides[i].lo(), a.sides[i].hi());
                    if lo == hi {
                        return vec![lo];
                    }
                    let mut cuts = vec![lo, hi];
                    for b in &other.boxes {
                        for v in [b.sides[i].lo(), b.sides[i].hi()] {
                            if lo < v && v < hi {
                                cuts.push(v);
                            }
                        }
                    }
                    cuts.sort_by(f64::total_cmp);
                    cuts.dedup();
                    cuts.windows(2).map(|w| 0.5 * w[0] + 0.5 * w[1]).collect()
                })
                .collect();
            let mut idx = vec![0usize; self.dim];
            loop {
                let p = Point::from_vec((0..self.dim).map(|i| reps[i][idx[i]]).collect());
                if !other.contains_point(&p) {
                    return false;
                }
                let mut axis = 0;
                loop {
                    if axis == self.dim {
                        return true;
                    }
                    idx[axis] += 1;
                    if idx[axis] < reps[axis].len() {
                        break;
                    }
                    idx[axis] = 0;
                    axis += 1;
                }
            }
        })
    }

    /// JSON form: an array of boxes, each an array of per-coordinate
    /// `[lo, hi]` pairs.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.boxes
                .iter()
                .map(|b| serde_json::json!(b.bounds()))
                .collect(),
        )
    }
}

impl Serialize for BoxSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

/// Lebesgue measure on `R^n`, optionally pulled back through a diagonal
/// linear map `h`: `h*(mu)(A) = mu(h^-1(A))`.
#[derive(Clone, Debug, PartialEq)]
pub struct LebesgueMeasure {
    dim: usize,
    pullback_scales: Option<Vec<f64>>,
}

impl LebesgueMeasure {
    pub fn new(dim: usize) -> Self {
        LebesgueMeasure {
            dim,
            pullback_scales: None,
        }
    }

    pub fn pullback(dim: usize, scales: Vec<f64>) -> Result<Self> {
        if scales.len() != dim || scales.iter().any(|&s| s == 0.0 || !s.is_finite()) {
            return Err(Error::input("pullback needs one finite nonzero scale per coordinate"));
        }
        Ok(LebesgueMeasure {
            dim,
            pullback_scales: Some(scales),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn volume(&self, set: &BoxSet) -> Result<f64> {
        if set.dim != self.dim {
            return Err(Error::input("measure and box set dimensions differ"));
        }
        Ok(set
            .boxes
            .iter()
            .map(|b| match &self.pullback_scales {
                None => b.lebesgue(),
                Some(scales) => b
                    .sides
                    .iter()
                    .zip(scales)
                    .map(|(s, l)| 2.0 * (s.radius / l.abs()))
                    .product(),
            })
            .sum())
    }

    /// Every singleton is null.
    pub fn point_mass(&self, _p: &Point) -> f64 {
        0.0
    }
}
