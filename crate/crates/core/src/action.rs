//! Group actions on `R^n` given by invertible generator maps.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Budget, CayleyBall, Gen, GeneratingSet, GroupElement, NormalForm};
use crate::uniformity::{BoxSet, Point};

/// `x_i -> scale_i x_i + amplitude_i sin(frequency_i x_i + phase_i)`.
///
/// Invertible with `|amplitude_i * frequency_i| < |scale_i| - margin`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineMap {
    pub scales: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub phases: Vec<f64>,
    pub margin: f64,
}

impl SineMap {
    pub fn new(
        scales: Vec<f64>,
        amplitudes: Vec<f64>,
        frequencies: Vec<f64>,
        phases: Vec<f64>,
        margin: f64,
    ) -> Result<Self> {
        let n = scales.len();
        if amplitudes.len() != n || frequencies.len() != n || phases.len() != n {
            return Err(Error::input("sine perturbation: coordinate counts differ"));
        }
        for i in 0..n {
            let slope = (amplitudes[i] * frequencies[i]).abs();
            if !(slope < scales[i].abs() - margin) {
                return Err(Error::input(format!(
                    "perturbation slope {slope} violates the invertibility margin on coordinate {i} \
                     (|scale| = {}, margin = {margin})",
                    scales[i].abs()
                )));
            }
        }
        Ok(SineMap {
            scales,
            amplitudes,
            frequencies,
            phases,
            margin,
        })
    }

    fn forward(&self, i: usize, x: f64) -> f64 {
        self.scales[i] * x + self.amplitudes[i] * (self.frequencies[i] * x + self.phases[i]).sin()
    }

    fn slope(&self, i: usize, x: f64) -> f64 {
        self.scales[i]
            + self.amplitudes[i] * self.frequencies[i] * (self.frequencies[i] * x + self.phases[i]).cos()
    }

    /// Solves `forward(y) = x` by safeguarded Newton iteration. The solution
    /// lies within `|amplitude / scale|` of `x / scale`.
    fn backward(&self, i: usize, x: f64) -> Result<f64> {
        let lambda = self.scales[i];
        let guess = x / lambda;
        let spread = (self.amplitudes[i] / lambda).abs();
        if spread == 0.0 {
            return Ok(guess);
        }
        let residual = |y: f64| self.forward(i, y) - x;
        let (mut lo, mut hi) = (guess - spread, guess + spread);
        // residual is monotone with the sign of lambda
        let increasing = lambda > 0.0;
        let mut y = guess;
        for _ in 0..200 {
            let r = residual(y);
            if r == 0.0 {
                return Ok(y);
            }
            if (r > 0.0) == increasing {
                hi = y;
            } else {
                lo = y;
            }
            let mut next = y - r / self.slope(i, y);
            if !(next > lo && next < hi) {
                next = 0.5 * lo + 0.5 * hi;
            }
            if next == y || hi - lo <= f64::EPSILON * y.abs().max(f64::MIN_POSITIVE) {
                y = next;
                break;
            }
            y = next;
        }
        let r = residual(y);
        let tol = 1e-12 * x.abs().max(1.0);
        if r.abs() <= tol {
            Ok(y)
        } else {
            Err(Error::Numeric {
                context: format!("inverse of sine perturbation at {x}"),
                residual: r.abs(),
            })
        }
    }

    fn lipschitz(&self) -> f64 {
        (0..self.scales.len())
            .map(|i| self.scales[i].abs() + (self.amplitudes[i] * self.frequencies[i]).abs())
            .fold(0.0, f64::max)
    }

    fn inverse_lipschitz(&self) -> f64 {
        (0..self.scales.len())
            .map(|i| 1.0 / (self.scales[i].abs() - (self.amplitudes[i] * self.frequencies[i]).abs()))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorMap {
    DiagonalLinear { scales: Vec<f64> },
    Affine1D { scale: f64, offset: f64 },
    Perturbed(SineMap),
    /// Inverse of a [`SineMap`], evaluated iteratively.
    PerturbedInverse(SineMap),
    /// Composite `m_0 o m_1 o ... o m_k` (the last map is applied first),
    /// the image of a word over another generating set.
    Composite(Vec<GeneratorMap>),
}

impl GeneratorMap {
    pub fn diagonal(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() || scales.iter().any(|&s| s == 0.0 || !s.is_finite()) {
            return Err(Error::input("diagonal scales must be finite and nonzero"));
        }
        Ok(GeneratorMap::DiagonalLinear { scales })
    }

    pub fn affine(scale: f64, offset: f64) -> Result<Self> {
        if scale == 0.0 || !scale.is_finite() || !offset.is_finite() {
            return Err(Error::input("affine scale must be finite and nonzero"));
        }
        Ok(GeneratorMap::Affine1D { scale, offset })
    }

    pub fn dim(&self) -> usize {
        match self {
            GeneratorMap::DiagonalLinear { scales } => scales.len(),
            GeneratorMap::Affine1D { .. } => 1,
            GeneratorMap::Perturbed(s) | GeneratorMap::PerturbedInverse(s) => s.scales.len(),
            GeneratorMap::Composite(maps) => maps.first().map_or(0, GeneratorMap::dim),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            GeneratorMap::DiagonalLinear { scales } => {
                Ok(x.iter().zip(scales).map(|(a, l)| a * l).collect())
            }
            GeneratorMap::Affine1D { scale, offset } => Ok(vec![scale * x[0] + offset]),
            GeneratorMap::Perturbed(s) => Ok((0..x.len()).map(|i| s.forward(i, x[i])).collect()),
            GeneratorMap::PerturbedInverse(s) => (0..x.len()).map(|i| s.backward(i, x[i])).collect(),
            GeneratorMap::Composite(maps) => {
                let mut y = x.to_vec();
                for m in maps.iter().rev() {
                    y = m.apply(&y)?;
                }
                Ok(y)
            }
        }
    }

    pub fn inverse(&self) -> GeneratorMap {
        match self {
            GeneratorMap::DiagonalLinear { scales } => GeneratorMap::DiagonalLinear {
                scales: scales.iter().map(|l| 1.0 / l).collect(),
            },
            GeneratorMap::Affine1D { scale, offset } => GeneratorMap::Affine1D {
                scale: 1.0 / scale,
                offset: -offset / scale,
            },
            GeneratorMap::Perturbed(s) => GeneratorMap::PerturbedInverse(s.clone()),
            GeneratorMap::PerturbedInverse(s) => GeneratorMap::Perturbed(s.clone()),
            GeneratorMap::Composite(maps) => {
                GeneratorMap::Composite(maps.iter().rev().map(GeneratorMap::inverse).collect())
            }
        }
    }

    /// Global Lipschitz constant for the max-metric.
    pub fn lipschitz(&self) -> f64 {
        match self {
            GeneratorMap::DiagonalLinear { scales } => {
                scales.iter().map(|l| l.abs()).fold(0.0, f64::max)
            }
            GeneratorMap::Affine1D { scale, .. } => scale.abs(),
            GeneratorMap::Perturbed(s) => s.lipschitz(),
            GeneratorMap::PerturbedInverse(s) => s.inverse_lipschitz(),
            GeneratorMap::Composite(maps) => maps.iter().map(GeneratorMap::lipschitz).product(),
        }
    }

    pub fn as_diagonal(&self) -> Option<&[f64]> {
        match self {
            GeneratorMap::DiagonalLinear { scales } => Some(scales),
            _ => None,
        }
    }

    /// Analytic bound on `sup_x |self(x) - other(x)|`, when one exists.
    pub fn certified_distance(&self, other: &GeneratorMap) -> Option<f64> {
        use GeneratorMap::*;
        if self == other {
            return Some(0.0);
        }
        let amp = |s: &SineMap| s.amplitudes.iter().map(|a| a.abs()).fold(0.0, f64::max);
        let amp_over_scale = |s: &SineMap| {
            s.amplitudes
                .iter()
                .zip(&s.scales)
                .map(|(a, l)| (a / l).abs())
                .fold(0.0, f64::max)
        };
        match (self, other) {
            (Perturbed(s), DiagonalLinear { scales }) | (DiagonalLinear { scales }, Perturbed(s))
                if s.scales == *scales =>
            {
                Some(amp(s))
            }
            (PerturbedInverse(s), DiagonalLinear { scales })
            | (DiagonalLinear { scales }, PerturbedInverse(s))
                if s.scales.iter().zip(scales).all(|(a, b)| 1.0 / a == *b) =>
            {
                Some(amp_over_scale(s))
            }
            (Perturbed(a), Perturbed(b)) if a.scales == b.scales => Some(amp(a) + amp(b)),
            (PerturbedInverse(a), PerturbedInverse(b)) if a.scales == b.scales => {
                Some(amp_over_scale(a) + amp_over_scale(b))
            }
            (Affine1D { scale: a, offset: s }, Affine1D { scale: b, offset: t }) if a == b => {
                Some((s - t).abs())
            }
            _ => None,
        }
    }
}

/// An action of a finitely generated group on `R^n`, given by one map per
/// generator of a symmetric generating set.
#[derive(Clone, Debug, PartialEq)]
pub struct Action {
    genset: GeneratingSet,
    maps: Vec<GeneratorMap>,
    dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActionReport {
    pub max_relation_defect: f64,
    pub max_inverse_defect: f64,
    pub relation_pairs_checked: usize,
    pub samples: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Sine perturbation applied to selected generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub amplitude: f64,
    #[serde(default = "one")]
    pub frequency: f64,
    /// Fixed phase; drawn uniformly from `[0, 2 pi)` per coordinate when absent.
    #[serde(default)]
    pub phase: Option<f64>,
    /// Generator names to perturb; empty means the first of each inverse pair.
    #[serde(default)]
    pub generators: Vec<String>,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn one() -> f64 {
    1.0
}

fn default_margin() -> f64 {
    0.1
}

impl PerturbationSpec {
    pub fn sine(amplitude: f64, frequency: f64, phase: f64, generators: &[&str]) -> Self {
        PerturbationSpec {
            amplitude,
            frequency,
            phase: Some(phase),
            generators: generators.iter().map(|s| s.to_string()).collect(),
            margin: default_margin(),
        }
    }
}

/// Coordinate change `h(x)_i = scales_i * x_{perm_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateChange {
    pub perm: Vec<usize>,
    pub scales: Vec<f64>,
}

impl CoordinateChange {
    pub fn new(perm: Vec<usize>, scales: Vec<f64>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::input("coordinate change: perm is not a permutation"));
            }
        }
        if scales.len() != n || scales.iter().any(|&s| s == 0.0 || !s.is_finite()) {
            return Err(Error::input("coordinate change is singular"));
        }
        Ok(CoordinateChange { perm, scales })
    }

    pub fn scaling(scales: Vec<f64>) -> Result<Self> {
        Self::new((0..scales.len()).collect(), scales)
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn apply(&self, x: &Point) -> Point {
        Point::from_vec(
            self.perm
                .iter()
                .zip(&self.scales)
                .map(|(&j, c)| c * x.coords()[j])
                .collect(),
        )
    }

    pub fn inverse(&self) -> CoordinateChange {
        let n = self.dim();
        let mut perm = vec![0; n];
        let mut scales = vec![0.0; n];
        for i in 0..n {
            perm[self.perm[i]] = i;
            scales[self.perm[i]] = 1.0 / self.scales[i];
        }
        CoordinateChange { perm, scales }
    }

    pub fn lipschitz(&self) -> f64 {
        self.scales.iter().map(|c| c.abs()).fold(0.0, f64::max)
    }

    pub fn apply_set(&self, set: &BoxSet) -> Result<BoxSet> {
        set.permute_axes(&self.perm)
            .linear_image(&self.scales, &vec![0.0; self.dim()])
    }

    /// `h o m o h^-1`.
    fn conjugate_map(&self, m: &GeneratorMap) -> Result<GeneratorMap> {
        Ok(match m {
            GeneratorMap::DiagonalLinear { scales } => GeneratorMap::DiagonalLinear {
                scales: self.perm.iter().map(|&j| scales[j]).collect(),
            },
            GeneratorMap::Affine1D { scale, offset } => GeneratorMap::Affine1D {
                scale: *scale,
                offset: self.scales[0] * offset,
            },
            GeneratorMap::Perturbed(s) => GeneratorMap::Perturbed(self.conjugate_sine(s)?),
            GeneratorMap::PerturbedInverse(s) => {
                GeneratorMap::PerturbedInverse(self.conjugate_sine(s)?)
            }
            GeneratorMap::Composite(maps) => GeneratorMap::Composite(
                maps.iter()
                    .map(|m| self.conjugate_map(m))
                    .collect::<Result<_>>()?,
            ),
        })
    }

    fn conjugate_sine(&self, s: &SineMap) -> Result<SineMap> {
        let pick = |v: &[f64]| self.perm.iter().map(|&j| v[j]).collect::<Vec<f64>>();
        let c = &self.scales;
        SineMap::new(
            pick(&s.scales),
            pick(&s.amplitudes).iter().zip(c).map(|(a, c)| a * c).collect(),
            pick(&s.frequencies).iter().zip(c).map(|(w, c)| w / c).collect(),
            pick(&s.phases),
            s.margin,
        )
    }
}

impl Action {
    pub fn new(genset: GeneratingSet, maps: Vec<GeneratorMap>) -> Result<Self> {
        if maps.len() != genset.len() {
            return Err(Error::input(format!(
                "{} generators but {} maps",
                genset.len(),
                maps.len()
            )));
        }
        let dim = maps[0].dim();
        if dim == 0 || maps.iter().any(|m| m.dim() != dim) {
            return Err(Error::input("generator maps have inconsistent dimensions"));
        }
        Ok(Action { genset, maps, dim })
    }

    /// Builds the action from maps for the named generators; the inverse
    /// generators receive the inverse maps.
    pub fn from_generators(genset: GeneratingSet, maps: Vec<(&str, GeneratorMap)>) -> Result<Self> {
        let mut slots: Vec<Option<GeneratorMap>> = vec![None; genset.len()];
        for (name, m) in maps {
            let s = genset
                .index_of(name)
                .ok_or_else(|| Error::input(format!("unknown generator {name}")))?;
            slots[genset.inverse_of(s)] = Some(m.inverse());
            slots[s] = Some(m);
        }
        let maps = slots
            .into_iter()
            .enumerate()
            .map(|(s, m)| {
                m.ok_or_else(|| {
                    Error::input(format!("no map for generator {}", genset.generator(s).name))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Action::new(genset, maps)
    }

    pub fn genset(&self) -> &GeneratingSet {
        &self.genset
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn maps(&self) -> &[GeneratorMap] {
        &self.maps
    }

    pub fn map(&self, s: Gen) -> &GeneratorMap {
        &self.maps[s]
    }

    pub fn is_diagonal_linear(&self) -> bool {
        self.maps.iter().all(|m| m.as_diagonal().is_some())
    }

    pub fn lipschitz_max(&self) -> f64 {
        self.maps.iter().map(GeneratorMap::lipschitz).fold(0.0, f64::max)
    }

    pub fn apply_generator(&self, s: Gen, x: &Point) -> Result<Point> {
        self.maps[s].apply(x.coords()).map(Point::from_vec)
    }

    /// `Phi_{s_1} o ... o Phi_{s_k}` applied to `x` (last letter first).
    pub fn apply_word(&self, word: &[Gen], x: &Point) -> Result<Point> {
        x.check_dim(self.dim)?;
        let mut y = x.coords().to_vec();
        for &s in word.iter().rev() {
            y = self.maps[s].apply(&y)?;
        }
        Ok(Point::from_vec(y))
    }

    /// Composite scales of `g` for diagonal-linear actions: diagonal maps
    /// commute, so the composite is the product of per-generator powers.
    pub fn diagonal_scales(&self, g: &GroupElement) -> Option<Vec<f64>> {
        if !self.is_diagonal_linear() {
            return None;
        }
        let mut counts = vec![0i32; self.maps.len()];
        for &s in g.word() {
            counts[s] += 1;
        }
        let mut out = vec![1.0; self.dim];
        for (s, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let scales = self.maps[s].as_diagonal().unwrap();
            for (o, l) in out.iter_mut().zip(scales) {
                *o *= l.powi(c);
            }
        }
        Some(out)
    }

    /// `Phi_g(x)`, with `g` built from this action's generating set.
    pub fn evaluate(&self, g: &GroupElement, x: &Point) -> Result<Point> {
        x.check_dim(self.dim)?;
        if let Some(scales) = self.diagonal_scales(g) {
            return Ok(Point::from_vec(
                x.coords().iter().zip(&scales).map(|(a, l)| a * l).collect(),
            ));
        }
        if self
            .maps
            .iter()
            .all(|m| matches!(m, GeneratorMap::Affine1D { .. }))
        {
            let (mut a, mut b) = (1.0, 0.0);
            for &s in g.word() {
                if let GeneratorMap::Affine1D { scale, offset } = self.maps[s] {
                    // (a, b) o (scale, offset)
                    b += a * offset;
                    a *= scale;
                }
            }
            return Ok(Point::scalar(a * x.coords()[0] + b));
        }
        self.apply_word(g.word(), x)
    }

    /// `Phi_g(x)` for every element of `ball`, propagated along the
    /// breadth-first tree: `Phi_{s g}(x) = Phi_s(Phi_g(x))`.
    pub fn orbit(&self, ball: &CayleyBall, x: &Point) -> Result<Vec<Point>> {
        self.check_ball(ball)?;
        x.check_dim(self.dim)?;
        let mut out: Vec<Point> = Vec::with_capacity(ball.len());
        for e in ball.elements() {
            let p = match e.parent {
                None => x.clone(),
                Some((parent, s)) => self.apply_generator(s, &out[parent])?,
            };
            out.push(p);
        }
        Ok(out)
    }

    pub(crate) fn check_ball(&self, ball: &CayleyBall) -> Result<()> {
        if ball.genset() == &self.genset {
            Ok(())
        } else {
            Err(Error::input("ball and action use different generating sets"))
        }
    }

    /// Checks inverse consistency and every relation visible among freely
    /// reduced words of length at most `word_len`: words with equal normal
    /// forms must induce equal maps on the samples.
    pub fn validate(&self, samples: &[Point], tol: f64, word_len: usize) -> Result<ActionReport> {
        if samples.is_empty() {
            return Err(Error::input("validate_action needs at least one sample"));
        }
        for x in samples {
            x.check_dim(self.dim)?;
        }
        let mut inverse_defect: f64 = 0.0;
        for s in 0..self.maps.len() {
            let t = self.genset.inverse_of(s);
            for x in samples {
                let y = self.apply_word(&[t, s], x)?;
                inverse_defect = inverse_defect.max(y.distance(x));
            }
        }

        let mut words: Vec<Vec<Gen>> = vec![Vec::new()];
        let mut frontier: Vec<Vec<Gen>> = vec![Vec::new()];
        for _ in 0..word_len {
            let mut next = Vec::new();
            for w in &frontier {
                for s in 0..self.maps.len() {
                    if w.last().map(|&t| self.genset.inverse_of(t)) == Some(s) {
                        continue;
                    }
                    let mut v = w.clone();
                    v.push(s);
                    next.push(v);
                }
            }
            words.extend(next.iter().cloned());
            frontier = next;
        }
        let mut classes: BTreeMap<NormalForm, Vec<Vec<Gen>>> = BTreeMap::new();
        for w in words {
            let g = self.genset.reduce(&w)?;
            classes.entry(g.normal_form().clone()).or_default().push(w);
        }
        let mut relation_defect: f64 = 0.0;
        let mut pairs = 0;
        for class in classes.values().filter(|c| c.len() > 1) {
            for x in samples {
                let base = self.apply_word(&class[0], x)?;
                for w in &class[1..] {
                    relation_defect = relation_defect.max(self.apply_word(w, x)?.distance(&base));
                }
            }
            pairs += class.len() - 1;
        }
        Ok(ActionReport {
            max_relation_defect: relation_defect,
            max_inverse_defect: inverse_defect,
            relation_pairs_checked: pairs,
            samples: samples.len(),
            tolerance: tol,
            passed: relation_defect <= tol && inverse_defect <= tol,
        })
    }

    /// Replaces the selected diagonal generators by sine perturbations and
    /// returns the perturbed action with its certified generator distance.
    pub fn perturb(&self, spec: &PerturbationSpec, seed: u64) -> Result<(Action, f64)> {
        if !(spec.amplitude >= 0.0) || !spec.amplitude.is_finite() {
            return Err(Error::input("perturbation amplitude must be a finite nonnegative number"));
        }
        if spec.amplitude == 0.0 {
            return Ok((self.clone(), 0.0));
        }
        let targets: Vec<Gen> = if spec.generators.is_empty() {
            (0..self.maps.len())
                .filter(|&s| s < self.genset.inverse_of(s))
                .collect()
        } else {
            spec.generators
                .iter()
                .map(|name| {
                    self.genset
                        .index_of(name)
                        .ok_or_else(|| Error::input(format!("unknown generator {name}")))
                })
                .collect::<Result<_>>()?
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut maps = self.maps.clone();
        for s in targets {
            let scales = self.maps[s]
                .as_diagonal()
                .ok_or_else(|| Error::input("only diagonal-linear generators can be perturbed"))?
                .to_vec();
            let n = scales.len();
            let phases = (0..n)
                .map(|_| {
                    spec.phase
                        .unwrap_or_else(|| rng.gen_range(0.0..std::f64::consts::TAU))
                })
                .collect();
            let sine = SineMap::new(
                scales,
                vec![spec.amplitude; n],
                vec![spec.frequency; n],
                phases,
                spec.margin,
            )?;
            maps[self.genset.inverse_of(s)] = GeneratorMap::PerturbedInverse(sine.clone());
            maps[s] = GeneratorMap::Perturbed(sine);
        }
        let psi = Action::new(self.genset.clone(), maps)?;
        let bound = psi.certified_distance(self)?;
        Ok((psi, bound))
    }

    /// Certified bound on `sup_{x, s} |Psi_s(x) - Phi_s(x)|`.
    pub fn certified_distance(&self, other: &Action) -> Result<f64> {
        if self.genset != other.genset {
            return Err(Error::input("actions use different generating sets"));
        }
        self.maps
            .iter()
            .zip(&other.maps)
            .map(|(a, b)| {
                a.certified_distance(b)
                    .ok_or_else(|| Error::Unsupported("no analytic distance between these generator maps".into()))
            })
            .try_fold(0.0f64, |acc, d| Ok(acc.max(d?)))
    }

    /// Per-generator certified distances, by generator name.
    pub fn generator_distances(&self, other: &Action) -> Vec<(String, Option<f64>)> {
        self.maps
            .iter()
            .zip(&other.maps)
            .enumerate()
            .map(|(s, (a, b))| (self.genset.generator(s).name.clone(), a.certified_distance(b)))
            .collect()
    }

    /// `h o Phi_g o h^-1` for every generator.
    pub fn conjugate(&self, h: &CoordinateChange) -> Result<Action> {
        if h.dim() != self.dim {
            return Err(Error::input("coordinate change dimension differs from the action"));
        }
        let maps = self
            .maps
            .iter()
            .map(|m| h.conjugate_map(m))
            .collect::<Result<Vec<_>>>()?;
        Action::new(self.genset.clone(), maps)
    }

    /// The same action presented over another generating set: each new
    /// generator acts by the composite along a geodesic word over the
    /// current set.
    pub fn regenerate(&self, target: &GeneratingSet, budget: Budget) -> Result<Action> {
        if target.family() != self.genset.family() {
            return Err(Error::input("generating sets of different groups"));
        }
        let maps = target
            .generators()
            .iter()
            .map(|g| {
                let word = self.genset.rewrite(&g.value, budget)?;
                let parts: Vec<GeneratorMap> = word.iter().map(|&s| self.maps[s].clone()).collect();
                Ok(compose_maps(parts))
            })
            .collect::<Result<Vec<_>>>()?;
        Action::new(target.clone(), maps)
    }
}

fn compose_maps(parts: Vec<GeneratorMap>) -> GeneratorMap {
    if parts.len() == 1 {
        return parts.into_iter().next().unwrap();
    }
    if parts.iter().all(|m| m.as_diagonal().is_some()) {
        let n = parts[0].dim();
        let mut scales = vec![1.0; n];
        for m in &parts {
            for (o, l) in scales.iter_mut().zip(m.as_diagonal().unwrap()) {
                *o *= l;
            }
        }
        return GeneratorMap::DiagonalLinear { scales };
    }
    GeneratorMap::Composite(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupFamily;
    use crate::models;

    fn samples_1d() -> Vec<Point> {
        [-3.0, -1.25, -0.5, 0.0, 0.3, 1.0, 2.5, 7.0].iter().map(|&x| Point::scalar(x)).collect()
    }

    #[test]
    fn identity_acts_trivially() {
        let phi = models::example_3_6(2.0, 2).unwrap();
        let x = Point::new(vec![1.5, -2.0]).unwrap();
        let e = phi.genset().identity();
        assert_eq!(phi.evaluate(&e, &x).unwrap(), x);
    }

    #[test]
    fn example_3_7_evaluation() {
        let phi = models::example_3_7(2.0).unwrap();
        let g = phi.genset().reduce_str("b^3").unwrap();
        assert_eq!(phi.evaluate(&g, &Point::scalar(0.5)).unwrap(), Point::scalar(4.0));
    }

    #[test]
    fn closed_form_matches_word_composition() {
        let phi = models::example_3_6(2.0, 1).unwrap();
        let x = Point::scalar(1.0);
        for w in ["b^-1 a", "b a b^-1 a^-1", "a a b b b^-1 a^-1"] {
            let g = phi.genset().reduce_str(w).unwrap();
            let closed = phi.evaluate(&g, &x).unwrap();
            let along = phi.apply_word(g.word(), &x).unwrap();
            assert_eq!(closed, along, "{w}");
        }
        // Faithful affine representation: closed-form affine composite.
        let aff = models::solvable_affine().unwrap();
        let g = aff.genset().reduce_str("b^-1 a").unwrap();
        let y = aff.evaluate(&g, &x).unwrap();
        assert_eq!(y, aff.apply_word(g.word(), &x).unwrap());
        assert_eq!(y, Point::scalar(1.0));
    }

    #[test]
    fn validation_reports() {
        let z2 = models::example_2_2(2).unwrap();
        let s2: Vec<Point> = (0..5).map(|i| Point::new(vec![i as f64 - 2.0, 0.5 * i as f64]).unwrap()).collect();
        let r = z2.validate(&s2, 1e-12, 3).unwrap();
        assert_eq!((r.max_relation_defect, r.max_inverse_defect), (0.0, 0.0));
        assert!(r.relation_pairs_checked > 0 && r.passed);

        let bs = models::example_3_6(2.0, 1).unwrap();
        let r = bs.validate(&samples_1d(), 1e-12, 3).unwrap();
        assert_eq!(r.max_relation_defect, 0.0);
        assert!(r.passed);

        let aff = models::solvable_affine().unwrap();
        let r = aff.validate(&samples_1d(), 1e-12, 3).unwrap();
        assert!(r.passed && r.max_relation_defect <= 1e-12);

        let genset = GeneratingSet::standard_named(GroupFamily::FreeAbelian { rank: 1 }, &["b"]).unwrap();
        let wrong = Action::new(
            genset,
            vec![GeneratorMap::diagonal(vec![2.0]).unwrap(), GeneratorMap::diagonal(vec![0.4]).unwrap()],
        )
        .unwrap();
        let r = wrong.validate(&samples_1d(), 1e-12, 3).unwrap();
        let expected = samples_1d().iter().map(|x| (0.8 * x.coords()[0] - x.coords()[0]).abs()).fold(0.0, f64::max);
        assert!((r.max_inverse_defect - expected).abs() < 1e-12);
        assert!(!r.passed);
        assert!(bs.validate(&[], 1e-9, 2).is_err());
    }

    #[test]
    fn perturbation_bounds() {
        let phi = models::example_3_7(2.0).unwrap();
        let (same, bound) = phi.perturb(&PerturbationSpec::sine(0.0, 1.0, 0.0, &["b"]), 7).unwrap();
        assert_eq!(same, phi);
        assert_eq!(bound, 0.0);

        let (psi, bound) = phi.perturb(&PerturbationSpec::sine(0.01, 1.0, 0.0, &["b"]), 7).unwrap();
        assert_eq!(bound, 0.01);
        let b = psi.genset().index_of("b").unwrap();
        let binv = psi.genset().inverse_of(b);
        let mut sampled: f64 = 0.0;
        for i in 0..2001 {
            let x = Point::scalar(-10.0 + 0.01 * i as f64);
            for s in [b, binv] {
                let d = psi.apply_generator(s, &x).unwrap().distance(&phi.apply_generator(s, &x).unwrap());
                sampled = sampled.max(d);
            }
        }
        assert!(sampled <= bound && sampled > 0.0099);

        let bs = models::example_3_6(2.0, 1).unwrap();
        let (psi, _) = bs.perturb(&PerturbationSpec::sine(0.01, 1.0, 0.3, &["a"]), 1).unwrap();
        let d: BTreeMap<String, Option<f64>> = psi.generator_distances(&bs).into_iter().collect();
        assert_eq!(d["b"], Some(0.0));
        assert_eq!(d["b^-1"], Some(0.0));
        assert_eq!(d["a"], Some(0.01));

        let too_big = PerturbationSpec::sine(1.95, 1.0, 0.0, &["b"]);
        assert!(matches!(phi.perturb(&too_big, 0), Err(Error::Input(_))));
    }

    #[test]
    fn perturbed_inverse_roundtrip() {
        let phi = models::example_3_7(2.0).unwrap();
        let (psi, _) = phi.perturb(&PerturbationSpec::sine(0.01, 1.0, 0.0, &["b"]), 0).unwrap();
        let g = psi.genset().reduce_str("b^5").unwrap();
        let ginv = psi.genset().reduce_str("b^-5").unwrap();
        for x in samples_1d() {
            let y = psi.evaluate(&g, &x).unwrap();
            let back = psi.evaluate(&ginv, &y).unwrap();
            assert!(back.distance(&x) <= 1e-12 * (1.0 + x.coords()[0].abs()));
        }
        let r = psi.validate(&samples_1d(), 1e-10, 2).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn conjugation() {
        let phi = models::example_3_7(2.0).unwrap();
        let id = CoordinateChange::scaling(vec![1.0]).unwrap();
        assert_eq!(phi.conjugate(&id).unwrap(), phi);
        let h = CoordinateChange::scaling(vec![3.0]).unwrap();
        let psi = phi.conjugate(&h).unwrap();
        let g = psi.genset().reduce_str("b^4").unwrap();
        assert_eq!(psi.evaluate(&g, &Point::scalar(0.75)).unwrap(), Point::scalar(12.0));

        let z2 = models::example_2_2(2).unwrap();
        let swap = CoordinateChange::new(vec![1, 0], vec![1.0, 1.0]).unwrap();
        let swapped = z2.conjugate(&swap).unwrap();
        assert_eq!(swapped.map(0).as_diagonal().unwrap(), &[1.0, 2.0]);
        assert_eq!(swapped.map(1).as_diagonal().unwrap(), &[2.0, 1.0]);
        assert!(CoordinateChange::scaling(vec![0.0]).is_err());
        assert!(CoordinateChange::new(vec![0, 0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn conjugation_commutes_with_the_perturbed_action() {
        let phi = models::example_3_7(2.0).unwrap();
        let (psi, _) = phi.perturb(&PerturbationSpec::sine(0.01, 1.0, 0.2, &["b"]), 0).unwrap();
        let h = CoordinateChange::scaling(vec![3.0]).unwrap();
        let conj = psi.conjugate(&h).unwrap();
        for x in samples_1d() {
            for s in 0..2 {
                let lhs = h.apply(&psi.apply_generator(s, &x).unwrap());
                let rhs = conj.apply_generator(s, &h.apply(&x)).unwrap();
                assert!(lhs.distance(&rhs) <= 1e-12 * (1.0 + lhs.coords()[0].abs()));
            }
        }
        let back = conj.conjugate(&h.inverse()).unwrap();
        for x in samples_1d() {
            for s in 0..2 {
                let d = back.apply_generator(s, &x).unwrap().distance(&psi.apply_generator(s, &x).unwrap());
                assert!(d <= 1e-12 * (1.0 + x.coords()[0].abs()));
            }
        }
    }

    #[test]
    fn regenerated_action_agrees() {
        let phi = models::example_2_2(2).unwrap();
        let fam = GroupFamily::FreeAbelian { rank: 2 };
        let t = GeneratingSet::from_elements(
            fam,
            vec![
                ("u".into(), NormalForm::Abelian(vec![1, 0])),
                ("w".into(), NormalForm::Abelian(vec![1, 1])),
            ],
            Budget::default(),
        )
        .unwrap();
        let phi_t = phi.regenerate(&t, Budget::default()).unwrap();
        let w = t.index_of("w").unwrap();
        assert_eq!(phi_t.map(w).as_diagonal().unwrap(), &[2.0, 2.0]);
        let back = phi_t.regenerate(phi.genset(), Budget::default()).unwrap();
        assert_eq!(back.maps(), phi.maps());
    }
}
