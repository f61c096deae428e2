//! Builtin example systems.

use serde::Serialize;

use crate::action::{Action, GeneratorMap};
use crate::error::{Error, Result};
use crate::group::{GeneratingSet, GroupFamily};

/// `Z^k` acting on `R^k` by `(n_1, .., n_k) . x = (2^{n_1} x_1, .., 2^{n_k} x_k)`.
pub fn example_2_2(k: usize) -> Result<Action> {
    if k == 0 {
        return Err(Error::input("rank must be at least 1"));
    }
    let genset = GeneratingSet::standard(GroupFamily::FreeAbelian { rank: k });
    let names: Vec<String> = (1..=k).map(|i| format!("e{i}")).collect();
    let maps = (0..k)
        .map(|i| {
            let mut scales = vec![1.0; k];
            scales[i] = 2.0;
            Ok((names[i].as_str(), GeneratorMap::diagonal(scales)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Action::from_generators(genset, maps)
}

/// `Z^k` acting on `R` by `(n_1, .., n_k) . x = lambda^{n_1 + .. + n_k} x`.
pub fn example_2_2_sum(k: usize, lambda: f64) -> Result<Action> {
    if k == 0 {
        return Err(Error::input("rank must be at least 1"));
    }
    let genset = GeneratingSet::standard(GroupFamily::FreeAbelian { rank: k });
    let names: Vec<String> = (1..=k).map(|i| format!("e{i}")).collect();
    let maps = names
        .iter()
        .map(|n| Ok((n.as_str(), GeneratorMap::diagonal(vec![lambda])?)))
        .collect::<Result<Vec<_>>>()?;
    Action::from_generators(genset, maps)
}

/// `<a, b | ba = a^2 b>` acting on `R^n` with `a` trivial and `b` scaling by `m > 1`.
pub fn example_3_6(m: f64, n: usize) -> Result<Action> {
    if !(m > 1.0) || !m.is_finite() {
        return Err(Error::input(format!("example-3.6 needs m > 1, got {m}")));
    }
    if n == 0 {
        return Err(Error::input("dimension must be at least 1"));
    }
    Action::from_generators(
        GeneratingSet::standard(GroupFamily::SolvableBs),
        vec![
            ("a", GeneratorMap::diagonal(vec![1.0; n])?),
            ("b", GeneratorMap::diagonal(vec![m; n])?),
        ],
    )
}

/// `Z` acting on `R` by powers of `x -> lambda x`; the generator is named `b`.
pub fn example_3_7(lambda: f64) -> Result<Action> {
    let genset = GeneratingSet::standard_named(GroupFamily::FreeAbelian { rank: 1 }, &["b"])?;
    Action::from_generators(genset, vec![("b", GeneratorMap::diagonal(vec![lambda])?)])
}

/// `Z` acting on `R^n` by the identity; expands nothing.
pub fn isometric(n: usize) -> Result<Action> {
    let genset = GeneratingSet::standard_named(GroupFamily::FreeAbelian { rank: 1 }, &["b"])?;
    Action::from_generators(genset, vec![("b", GeneratorMap::diagonal(vec![1.0; n])?)])
}

/// The faithful affine action of the solvable group on `R`:
/// `a = (x -> x + 1)`, `b = (x -> 2x)`.
pub fn solvable_affine() -> Result<Action> {
    Action::from_generators(
        GeneratingSet::standard(GroupFamily::SolvableBs),
        vec![
            ("a", GeneratorMap::affine(1.0, 1.0)?),
            ("b", GeneratorMap::affine(2.0, 0.0)?),
        ],
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelInfo {
    pub name: &'static str,
    pub group: &'static str,
    pub description: &'static str,
    pub parameters: Vec<(&'static str, String)>,
    pub experiments: Vec<&'static str>,
}

pub fn catalog() -> Vec<ModelInfo> {
    vec![
        ModelInfo {
            name: "example-2.2",
            group: "Z^k",
            description: "(n_1..n_k) acts by x_i -> 2^{n_i} x_i on R^k with the max-metric",
            parameters: vec![("k", "rank, default 2".into())],
            experiments: vec![
                "shadowing",
                "expansivity",
                "mu-expansivity",
                "genset-conversion",
                "conjugacy-transport",
            ],
        },
        ModelInfo {
            name: "example-3.6",
            group: "<a,b | ba = a^2 b>",
            description: "a acts trivially, b scales R^n by m",
            parameters: vec![
                ("m", "scale factor, m > 1, default 2".into()),
                ("n", "dimension, default 1".into()),
            ],
            experiments: vec!["shadowing", "persistence", "expansivity", "mu-expansivity"],
        },
        ModelInfo {
            name: "example-3.7",
            group: "Z",
            description: "n acts by f^n with f(x) = lambda x on R",
            parameters: vec![("lambda", "expansion, default 2".into())],
            experiments: vec![
                "shadowing",
                "persistence",
                "expansivity",
                "mu-expansivity",
                "stability",
                "mu-stability",
                "conjugacy-transport",
            ],
        },
    ]
}
