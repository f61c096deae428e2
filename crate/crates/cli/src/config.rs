//! Experiment configuration. TOML is the primary encoding; a file ending in
//! `.json` is read as JSON with the same schema.

use std::path::Path;

use actstab::action::{Action, CoordinateChange, GeneratorMap, PerturbationSpec};
use actstab::group::{GeneratingSet, GroupFamily};
use actstab::models;
use actstab::shadowing::{GridSpec, Solver};
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Shadowing,
    Persistence,
    Expansivity,
    MuExpansivity,
    Stability,
    MuStability,
    GensetConversion,
    ConjugacyTransport,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Shadowing => "shadowing",
            ExperimentKind::Persistence => "persistence",
            ExperimentKind::Expansivity => "expansivity",
            ExperimentKind::MuExpansivity => "mu-expansivity",
            ExperimentKind::Stability => "stability",
            ExperimentKind::MuStability => "mu-stability",
            ExperimentKind::GensetConversion => "genset-conversion",
            ExperimentKind::ConjugacyTransport => "conjugacy-transport",
        }
    }

    fn needs_perturbation(self) -> bool {
        matches!(
            self,
            ExperimentKind::Persistence | ExperimentKind::Stability | ExperimentKind::MuStability
        )
    }
}

/// Which action to run. `diagonal` builds a custom diagonal-linear action
/// from one scale vector per positive generator of `family`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<GroupFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<Vec<f64>>>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            name: "example-3.7".into(),
            k: None,
            m: None,
            n: None,
            lambda: None,
            family: None,
            scales: None,
        }
    }
}

impl ModelSpec {
    fn resolve(&mut self) -> Result<(), RunError> {
        match self.name.as_str() {
            "example-2.2" => {
                self.k.get_or_insert(2);
            }
            "example-3.6" => {
                self.m.get_or_insert(2.0);
                self.n.get_or_insert(1);
            }
            "example-3.7" => {
                self.lambda.get_or_insert(2.0);
            }
            "isometric" => {
                self.n.get_or_insert(1);
            }
            "diagonal" => {
                if self.family.is_none() || self.scales.is_none() {
                    return Err(RunError::Config("model `diagonal` needs `family` and `scales`".into()));
                }
            }
            other => return Err(RunError::Config(format!("unknown model `{other}`"))),
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Action, RunError> {
        Ok(match self.name.as_str() {
            "example-2.2" => models::example_2_2(self.k.unwrap_or(2))?,
            "example-3.6" => models::example_3_6(self.m.unwrap_or(2.0), self.n.unwrap_or(1))?,
            "example-3.7" => models::example_3_7(self.lambda.unwrap_or(2.0))?,
            "isometric" => models::isometric(self.n.unwrap_or(1))?,
            "diagonal" => {
                let family = self.family.ok_or_else(|| RunError::Config("missing family".into()))?;
                let scales = self.scales.as_ref().ok_or_else(|| RunError::Config("missing scales".into()))?;
                let genset = GeneratingSet::standard(family);
                let positives: Vec<String> = genset
                    .generators()
                    .iter()
                    .filter(|g| !g.name.ends_with("^-1"))
                    .map(|g| g.name.clone())
                    .collect();
                if positives.len() != scales.len() {
                    return Err(RunError::Config(format!(
                        "family has {} generators but {} scale vectors were given",
                        positives.len(),
                        scales.len()
                    )));
                }
                let maps = positives
                    .iter()
                    .zip(scales)
                    .map(|(n, s)| Ok((n.as_str(), GeneratorMap::diagonal(s.clone())?)))
                    .collect::<Result<Vec<_>, actstab::Error>>()?;
                Action::from_generators(genset, maps)?
            }
            other => return Err(RunError::Config(format!("unknown model `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entourages {
    #[serde(default = "one")]
    pub eps_d: f64,
    #[serde(default = "default_eps_e")]
    pub eps_e: f64,
    #[serde(default = "default_eps_e_prime")]
    pub eps_e_prime: f64,
}

impl Default for Entourages {
    fn default() -> Self {
        Entourages {
            eps_d: one(),
            eps_e: default_eps_e(),
            eps_e_prime: default_eps_e_prime(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    #[serde(default = "default_count")]
    pub count: usize,
    /// Box corners; a single entry is repeated across dimensions.
    #[serde(default = "default_low")]
    pub low: Vec<f64>,
    #[serde(default = "default_high")]
    pub high: Vec<f64>,
    /// Separation gaps are drawn log-uniformly from this range.
    #[serde(default = "default_gap")]
    pub gap: [f64; 2],
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            count: default_count(),
            low: default_low(),
            high: default_high(),
            gap: default_gap(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_audit")]
    pub audit: f64,
    #[serde(default = "default_equivariance")]
    pub equivariance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            audit: default_audit(),
            equivariance: default_equivariance(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Auto,
    ClosedForm,
    BruteForce,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_solver_kind")]
    pub kind: SolverKind,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_factor")]
    pub factor: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            kind: default_solver_kind(),
            cells: default_cells(),
            rounds: default_rounds(),
            factor: default_factor(),
        }
    }
}

impl SolverSpec {
    pub fn solver(&self) -> Solver {
        let grid = GridSpec {
            cells: self.cells,
            rounds: self.rounds,
            factor: self.factor,
        };
        match self.kind {
            SolverKind::Auto => Solver::Auto(grid),
            SolverKind::ClosedForm => Solver::ClosedForm,
            SolverKind::BruteForce => Solver::BruteForce(grid),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: Option<u64>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
    #[serde(default = "default_ball_radius")]
    pub ball_radius: usize,
    /// Declared epsilon of sampled pseudo-orbits.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub entourages: Entourages,
    #[serde(default)]
    pub samples: SampleSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub solver: SolverSpec,
    /// Window radii for H maps and dynamical balls.
    #[serde(default)]
    pub radii: Vec<usize>,
    /// Words over the model's generators used as `h` in equivariance checks.
    #[serde(default)]
    pub test_elements: Vec<String>,
    /// Words over the model's generators forming the source generating set
    /// for genset-conversion.
    #[serde(default)]
    pub source_generators: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinate_change: Option<CoordinateChange>,
    /// Volume threshold for mu-expansivity.
    #[serde(default = "default_threshold")]
    pub volume_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

fn one() -> f64 {
    1.0
}
fn default_eps_e() -> f64 {
    0.011
}
fn default_eps_e_prime() -> f64 {
    0.02
}
fn default_count() -> usize {
    100
}
fn default_low() -> Vec<f64> {
    vec![-2.0]
}
fn default_high() -> Vec<f64> {
    vec![2.0]
}
fn default_gap() -> [f64; 2] {
    [1e-6, 1.0]
}
fn default_audit() -> f64 {
    1e-9
}
fn default_equivariance() -> f64 {
    1e-6
}
fn default_solver_kind() -> SolverKind {
    SolverKind::Auto
}
fn default_cells() -> usize {
    64
}
fn default_rounds() -> usize {
    4
}
fn default_factor() -> f64 {
    8.0
}
fn default_ball_radius() -> usize {
    20
}
fn default_delta() -> f64 {
    1e-3
}
fn default_threshold() -> f64 {
    1e-2
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    /// Fills every default that depends on the model or experiment and
    /// validates the result. The resolved config is what reports embed.
    pub fn resolve(mut self) -> Result<Self, RunError> {
        let bad = |m: &str| Err(RunError::Config(m.to_string()));
        if self.seed.is_none() {
            return bad("a seed is required (set `seed` or pass --seed)");
        }
        self.model.resolve()?;
        let phi = self.model.build()?;
        let dim = phi.dim();
        if self.ball_radius == 0 {
            return bad("ball_radius must be positive");
        }
        for (name, v) in [
            ("delta", self.delta),
            ("entourages.eps_d", self.entourages.eps_d),
            ("entourages.eps_e", self.entourages.eps_e),
            ("entourages.eps_e_prime", self.entourages.eps_e_prime),
            ("tolerances.audit", self.tolerances.audit),
            ("tolerances.equivariance", self.tolerances.equivariance),
            ("volume_threshold", self.volume_threshold),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(&format!("{name} must be positive and finite"));
            }
        }
        if self.samples.count == 0 {
            return bad("samples.count must be at least 1");
        }
        for corner in [&mut self.samples.low, &mut self.samples.high] {
            if corner.len() == 1 && dim > 1 {
                *corner = vec![corner[0]; dim];
            }
            if corner.len() != dim {
                return bad(&format!("sample box corners need {dim} coordinates"));
            }
        }
        if self
            .samples
            .low
            .iter()
            .zip(&self.samples.high)
            .any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite())
        {
            return bad("sample box needs finite low <= high");
        }
        let [g0, g1] = self.samples.gap;
        if !(g0 > 0.0 && g0 <= g1 && g1.is_finite()) {
            return bad("samples.gap needs 0 < lo <= hi");
        }
        if self.solver.cells == 0 || self.solver.rounds == 0 || !(self.solver.factor > 1.0) {
            return bad("solver grid needs cells >= 1, rounds >= 1, factor > 1");
        }

        if self.perturbation.is_none() && self.experiment.needs_perturbation() {
            self.perturbation = Some(PerturbationSpec::sine(0.01, 1.0, 0.0, &[]));
        }
        if let Some(p) = &self.perturbation {
            phi.perturb(p, self.seed.unwrap())?;
        }
        if self.radii.is_empty() {
            self.radii = match self.experiment {
                ExperimentKind::MuExpansivity => (1..=8).collect(),
                _ => (0..=12).collect(),
            };
        }
        self.radii.sort_unstable();
        self.radii.dedup();
        if self.experiment == ExperimentKind::MuStability && *self.radii.last().unwrap() > self.ball_radius {
            return bad("radii must not exceed ball_radius");
        }
        if self.test_elements.is_empty() {
            let first = phi
                .genset()
                .generators()
                .iter()
                .rev()
                .find(|g| !g.name.ends_with("^-1"))
                .map(|g| g.name.clone())
                .unwrap();
            self.test_elements = if self.experiment == ExperimentKind::MuStability {
                vec![first.clone(), format!("{first} {first}")]
            } else {
                vec![first.clone(), format!("{first}^-1"), format!("{first} {first}")]
            };
        }
        for w in &self.test_elements {
            phi.genset().reduce_str(w)?;
        }
        if self.experiment == ExperimentKind::GensetConversion {
            if self.source_generators.is_empty() {
                let names: Vec<String> = phi
                    .genset()
                    .generators()
                    .iter()
                    .filter(|g| !g.name.ends_with("^-1"))
                    .map(|g| g.name.clone())
                    .collect();
                // Default: s_1, s_1 s_2, .., s_1 s_k (generates whenever S does).
                self.source_generators = names
                    .iter()
                    .enumerate()
                    .map(|(i, n)| if i == 0 { n.clone() } else { format!("{} {n}", names[0]) })
                    .collect();
            }
            for w in &self.source_generators {
                phi.genset().reduce_str(w)?;
            }
        }
        if self.experiment == ExperimentKind::ConjugacyTransport {
            let h = self
                .coordinate_change
                .get_or_insert_with(|| CoordinateChange::scaling(vec![3.0; dim]).unwrap());
            let h = CoordinateChange::new(h.perm.clone(), h.scales.clone())?;
            if h.dim() != dim {
                return bad("coordinate_change dimension differs from the model");
            }
        }
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn source_genset(&self, phi: &Action) -> Result<GeneratingSet, RunError> {
        let elements = self
            .source_generators
            .iter()
            .enumerate()
            .map(|(i, w)| Ok((format!("t{}", i + 1), phi.genset().reduce_str(w)?.normal_form().clone())))
            .collect::<Result<Vec<_>, actstab::Error>>()?;
        Ok(GeneratingSet::from_elements(
            phi.genset().family(),
            elements,
            actstab::Budget::default(),
        )?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_resolves() {
        let c = ExperimentConfig::from_toml("experiment = \"shadowing\"\nseed = 1\n")
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(c.model.lambda, Some(2.0));
        assert_eq!(c.test_elements, ["b", "b^-1", "b b"]);
        assert_eq!(c.radii.len(), 13);
        let again = ExperimentConfig::from_toml(&c.to_toml()).unwrap().resolve().unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn validation_errors() {
        let no_seed = ExperimentConfig::from_toml("experiment = \"shadowing\"\n").unwrap();
        assert!(matches!(no_seed.resolve(), Err(RunError::Config(m)) if m.contains("seed")));
        for bad in [
            "experiment = \"shadowing\"\nseed = 1\nball_radius = 0\n",
            "experiment = \"shadowing\"\nseed = 1\n[samples]\ncount = 0\n",
            "experiment = \"shadowing\"\nseed = 1\n[entourages]\neps_e = -1.0\n",
            "experiment = \"shadowing\"\nseed = 1\n[model]\nname = \"example-3.6\"\nm = 1.0\n",
            "experiment = \"shadowing\"\nseed = 1\n[model]\nname = \"nope\"\n",
        ] {
            let c = ExperimentConfig::from_toml(bad).unwrap();
            assert!(c.resolve().is_err(), "{bad}");
        }
        assert!(ExperimentConfig::from_toml("experiment = \"unknown\"\nseed = 1\n").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"shadowing\"\nseed = 1\ntypo = 3\n").is_err());
    }

    #[test]
    fn json_is_an_alternative_encoding() {
        let j = ExperimentConfig::from_json(r#"{"experiment": "genset-conversion", "seed": 4, "model": {"name": "example-2.2"}}"#)
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(j.source_generators, ["e1", "e1 e2"]);
        assert_eq!(j.samples.low, [-2.0, -2.0]);
    }

    #[test]
    fn custom_diagonal_model() {
        let c = ExperimentConfig::from_toml(
            "experiment = \"expansivity\"\nseed = 1\n[model]\nname = \"diagonal\"\nfamily = { family = \"free-abelian\", rank = 1 }\nscales = [[3.0, 0.5]]\n",
        )
        .unwrap()
        .resolve()
        .unwrap();
        assert_eq!(c.model.build().unwrap().dim(), 2);
    }
}
