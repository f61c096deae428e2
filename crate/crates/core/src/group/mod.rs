//! Finitely generated groups given by a family-specific normal form and a
//! finite symmetric generating set.
//!
//! Three families are supported:
//!
//! * `FreeAbelian { rank }`: `Z^k`, normal form is the exponent vector.
//! * `Free { rank }`: the free group, normal form is the freely reduced word.
//! * `SolvableBs`: `<a, b | ba = a^2 b>`, represented faithfully by affine
//!   maps `x -> 2^k x + t` with `a = (x -> x + 1)` and `b = (x -> 2x)`. The
//!   translation part is an exact dyadic rational, so equality of elements is
//!   equality of `(k, t)` pairs.
//!
//! Products follow the composition convention `g * h = (x -> g(h(x)))`, which
//! is also the convention of actions: `Phi_{gh} = Phi_g o Phi_h`.

mod ball;
mod dyadic;

pub use ball::{BallElement, CayleyBall};
pub use dyadic::Dyadic;

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a generator inside its [`GeneratingSet`].
pub type Gen = usize;

/// Node budget for breadth-first searches and ball enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_nodes: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_nodes: 2_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum GroupFamily {
    FreeAbelian { rank: usize },
    Free { rank: usize },
    SolvableBs,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NormalForm {
    /// Exponent vector in `Z^k`.
    Abelian(Vec<i64>),
    /// Freely reduced word; letter `i + 1` is the i-th free generator and
    /// `-(i + 1)` its inverse.
    Free(Vec<i32>),
    /// The affine map `x -> 2^k x + t`.
    Affine { k: i32, t: Dyadic },
}

impl GroupFamily {
    pub fn identity(&self) -> NormalForm {
        match *self {
            GroupFamily::FreeAbelian { rank } => NormalForm::Abelian(vec![0; rank]),
            GroupFamily::Free { .. } => NormalForm::Free(Vec::new()),
            GroupFamily::SolvableBs => NormalForm::Affine {
                k: 0,
                t: Dyadic::ZERO,
            },
        }
    }

    pub fn multiply(&self, g: &NormalForm, h: &NormalForm) -> NormalForm {
        match (g, h) {
            (NormalForm::Abelian(a), NormalForm::Abelian(b)) => {
                NormalForm::Abelian(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            (NormalForm::Free(a), NormalForm::Free(b)) => {
                let mut out = a.clone();
                for &letter in b {
                    if out.last() == Some(&-letter) {
                        out.pop();
                    } else {
                        out.push(letter);
                    }
                }
                NormalForm::Free(out)
            }
            (NormalForm::Affine { k: kg, t: tg }, NormalForm::Affine { k: kh, t: th }) => {
                // g(h(x)) = 2^kg (2^kh x + th) + tg
                NormalForm::Affine {
                    k: kg + kh,
                    t: th.mul_pow2(*kg) + *tg,
                }
            }
            _ => panic!("normal forms from different families"),
        }
    }

    pub fn inverse(&self, g: &NormalForm) -> NormalForm {
        match g {
            NormalForm::Abelian(a) => NormalForm::Abelian(a.iter().map(|x| -x).collect()),
            NormalForm::Free(w) => NormalForm::Free(w.iter().rev().map(|l| -l).collect()),
            NormalForm::Affine { k, t } => NormalForm::Affine {
                k: -k,
                t: (-*t).mul_pow2(-k),
            },
        }
    }

    /// The positive standard generators, without inverses.
    pub fn standard_generators(&self) -> Vec<NormalForm> {
        match *self {
            GroupFamily::FreeAbelian { rank } => (0..rank)
                .map(|i| {
                    let mut v = vec![0; rank];
                    v[i] = 1;
                    NormalForm::Abelian(v)
                })
                .collect(),
            GroupFamily::Free { rank } => (0..rank)
                .map(|i| NormalForm::Free(vec![i as i32 + 1]))
                .collect(),
            GroupFamily::SolvableBs => vec![
                NormalForm::Affine {
                    k: 0,
                    t: Dyadic::from_int(1),
                },
                NormalForm::Affine {
                    k: 1,
                    t: Dyadic::ZERO,
                },
            ],
        }
    }

    fn standard_names(&self) -> Vec<String> {
        match *self {
            GroupFamily::FreeAbelian { rank } => (1..=rank).map(|i| format!("e{i}")).collect(),
            GroupFamily::Free { rank } => (1..=rank).map(|i| format!("x{i}")).collect(),
            GroupFamily::SolvableBs => vec!["a".into(), "b".into()],
        }
    }

    fn check(&self, g: &NormalForm) -> Result<()> {
        let ok = match (self, g) {
            (GroupFamily::FreeAbelian { rank }, NormalForm::Abelian(v)) => v.len() == *rank,
            (GroupFamily::Free { rank }, NormalForm::Free(w)) => w
                .iter()
                .all(|&l| l != 0 && l.unsigned_abs() as usize <= *rank),
            (GroupFamily::SolvableBs, NormalForm::Affine { .. }) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::input(format!("{g} is not an element of {self:?}")))
        }
    }
}

impl fmt::Display for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalForm::Abelian(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "({})", parts.join(","))
            }
            NormalForm::Free(w) if w.is_empty() => write!(f, "e"),
            NormalForm::Free(w) => {
                let parts: Vec<String> = w
                    .iter()
                    .map(|&l| {
                        if l > 0 {
                            format!("x{l}")
                        } else {
                            format!("x{}^-1", -l)
                        }
                    })
                    .collect();
                write!(f, "{}", parts.join(" "))
            }
            NormalForm::Affine { k, t } => write!(f, "(k={k},t={t})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    pub name: String,
    pub value: NormalForm,
    /// Index of the inverse generator.
    pub inverse: Gen,
}

/// A finite symmetric generating set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratingSet {
    family: GroupFamily,
    generators: Vec<Generator>,
    standard: bool,
}

impl GeneratingSet {
    /// Standard generators of the family, positives first then inverses:
    /// `e1, .., ek, e1^-1, .., ek^-1` or `a, b, a^-1, b^-1`.
    pub fn standard(family: GroupFamily) -> Self {
        let names = family.standard_names();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        Self::standard_named(family, &names).expect("standard names are valid")
    }

    /// Standard generators with caller-chosen names for the positive ones.
    pub fn standard_named(family: GroupFamily, names: &[&str]) -> Result<Self> {
        let values = family.standard_generators();
        if names.len() != values.len() {
            return Err(Error::input(format!(
                "{family:?} has {} standard generators, got {} names",
                values.len(),
                names.len()
            )));
        }
        let mut set = Self::build(
            family,
            names.iter().map(|n| n.to_string()).zip(values).collect(),
        )?;
        set.standard = true;
        Ok(set)
    }

    /// Symmetric closure of the given named elements. Fails if an element is
    /// the identity, names collide, or the set does not generate the group
    /// (checked by reaching every standard generator within `budget`).
    pub fn from_elements(
        family: GroupFamily,
        elements: Vec<(String, NormalForm)>,
        budget: Budget,
    ) -> Result<Self> {
        let set = Self::build(family, elements)?;
        for s in family.standard_generators() {
            set.geodesic(&s, budget).map_err(|e| match e {
                Error::Resource { .. } => Error::input(format!(
                    "generating set does not reach {s} within {} nodes",
                    budget.max_nodes
                )),
                other => other,
            })?;
        }
        let reference = Self::standard(family);
        let standard = set.len() == reference.len()
            && set
                .generators
                .iter()
                .zip(&reference.generators)
                .all(|(a, b)| a.value == b.value);
        Ok(GeneratingSet { standard, ..set })
    }

    fn build(family: GroupFamily, elements: Vec<(String, NormalForm)>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::input("generating set must be nonempty"));
        }
        let identity = family.identity();
        let mut generators: Vec<Generator> = Vec::new();
        for (name, value) in &elements {
            family.check(value)?;
            if *value == identity {
                return Err(Error::input(format!("generator {name} is the identity")));
            }
            if generators.iter().any(|g| g.value == *value) {
                continue;
            }
            generators.push(Generator {
                name: name.clone(),
                value: value.clone(),
                inverse: usize::MAX,
            });
        }
        let positives = generators.len();
        for i in 0..positives {
            let inv = family.inverse(&generators[i].value);
            match generators.iter().position(|g| g.value == inv) {
                Some(j) => generators[i].inverse = j,
                None => {
                    let j = generators.len();
                    generators[i].inverse = j;
                    generators.push(Generator {
                        name: format!("{}^-1", generators[i].name),
                        value: inv,
                        inverse: i,
                    });
                }
            }
        }
        for i in 0..generators.len() {
            if generators[i].inverse == usize::MAX {
                let inv = family.inverse(&generators[i].value);
                generators[i].inverse = generators.iter().position(|g| g.value == inv).unwrap();
            }
        }
        for (i, g) in generators.iter().enumerate() {
            if generators[..i].iter().any(|h| h.name == g.name) {
                return Err(Error::input(format!("duplicate generator name {}", g.name)));
            }
        }
        Ok(GeneratingSet {
            family,
            generators,
            standard: false,
        })
    }

    pub fn family(&self) -> GroupFamily {
        self.family
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn generator(&self, s: Gen) -> &Generator {
        &self.generators[s]
    }

    pub fn inverse_of(&self, s: Gen) -> Gen {
        self.generators[s].inverse
    }

    pub fn is_standard(&self) -> bool {
        self.standard
    }

    pub fn index_of(&self, name: &str) -> Option<Gen> {
        self.generators.iter().position(|g| g.name == name)
    }

    /// Parses a word such as `"b a^-1 b^2"`. Tokens are separated by
    /// whitespace, `*` or `·`; `name^k` repeats a generator (or its inverse
    /// for negative `k`). The empty string is the identity.
    pub fn parse_word(&self, text: &str) -> Result<Vec<Gen>> {
        let mut word = Vec::new();
        for token in text
            .split(|c: char| c.is_whitespace() || c == '*' || c == '·')
            .filter(|t| !t.is_empty())
        {
            if let Some(s) = self.index_of(token) {
                word.push(s);
                continue;
            }
            let (base, power) = token
                .rsplit_once('^')
                .ok_or_else(|| Error::input(format!("unknown generator symbol {token:?}")))?;
            let s = self
                .index_of(base)
                .ok_or_else(|| Error::input(format!("unknown generator symbol {base:?}")))?;
            let power: i64 = power
                .parse()
                .map_err(|_| Error::input(format!("bad exponent in {token:?}")))?;
            let letter = if power < 0 { self.inverse_of(s) } else { s };
            word.extend(std::iter::repeat_n(letter, power.unsigned_abs() as usize));
        }
        Ok(word)
    }

    /// Freely reduces `word` and evaluates its normal form.
    pub fn reduce(&self, word: &[Gen]) -> Result<GroupElement> {
        let mut reduced: Vec<Gen> = Vec::with_capacity(word.len());
        for &s in word {
            if s >= self.len() {
                return Err(Error::input(format!("unknown generator index {s}")));
            }
            if reduced.last().map(|&t| self.inverse_of(t)) == Some(s) {
                reduced.pop();
            } else {
                reduced.push(s);
            }
        }
        let nf = reduced.iter().fold(self.family.identity(), |acc, &s| {
            self.family.multiply(&acc, &self.generators[s].value)
        });
        Ok(GroupElement { nf, word: reduced })
    }

    pub fn reduce_str(&self, text: &str) -> Result<GroupElement> {
        self.reduce(&self.parse_word(text)?)
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement {
            nf: self.family.identity(),
            word: Vec::new(),
        }
    }

    /// Element with the given normal form, carrying a geodesic word.
    pub fn element(&self, nf: &NormalForm, budget: Budget) -> Result<GroupElement> {
        let word = self.geodesic(nf, budget)?;
        Ok(GroupElement {
            nf: nf.clone(),
            word,
        })
    }

    /// Word length of `g` with respect to this generating set.
    pub fn word_length(&self, g: &NormalForm, budget: Budget) -> Result<usize> {
        self.family.check(g)?;
        if self.standard {
            match g {
                NormalForm::Abelian(v) => return Ok(v.iter().map(|x| x.unsigned_abs() as usize).sum()),
                NormalForm::Free(w) => return Ok(w.len()),
                NormalForm::Affine { .. } => {}
            }
        }
        Ok(self.geodesic(g, budget)?.len())
    }

    /// A shortest word over this set whose product is `target`, found by
    /// breadth-first search in the Cayley graph keyed by normal form. Ties
    /// are broken by generator order.
    pub fn geodesic(&self, target: &NormalForm, budget: Budget) -> Result<Vec<Gen>> {
        self.family.check(target)?;
        let identity = self.family.identity();
        if *target == identity {
            return Ok(Vec::new());
        }
        // node -> (parent node, generator applied on the left)
        let mut nodes: Vec<(NormalForm, usize, Gen)> = vec![(identity.clone(), usize::MAX, 0)];
        let mut seen: HashMap<NormalForm, usize> = HashMap::from([(identity, 0)]);
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            for (s, gen) in self.generators.iter().enumerate() {
                let next = self.family.multiply(&gen.value, &nodes[i].0);
                if seen.contains_key(&next) {
                    continue;
                }
                if next == *target {
                    let mut word = vec![s];
                    let mut cur = i;
                    while cur != 0 {
                        word.push(nodes[cur].2);
                        cur = nodes[cur].1;
                    }
                    return Ok(word);
                }
                if nodes.len() >= budget.max_nodes {
                    return Err(Error::Resource {
                        what: format!("geodesic search for {target}"),
                        budget: budget.max_nodes,
                    });
                }
                seen.insert(next.clone(), nodes.len());
                queue.push_back(nodes.len());
                nodes.push((next, i, s));
            }
        }
        unreachable!("Cayley graph of an infinite group has no finite component")
    }

    /// Geodesic rewriting of an element (typically a generator of another
    /// set) over this generating set.
    pub fn rewrite(&self, s: &NormalForm, budget: Budget) -> Result<Vec<Gen>> {
        self.geodesic(s, budget)
    }

    pub fn word_to_string(&self, word: &[Gen]) -> String {
        if word.is_empty() {
            return "e".into();
        }
        word.iter()
            .map(|&s| self.generators[s].name.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// A group element: its normal form plus a reduced word over the
/// generating set it was built from. Equality and hashing use the normal
/// form only.
#[derive(Clone, Debug)]
pub struct GroupElement {
    nf: NormalForm,
    word: Vec<Gen>,
}

impl GroupElement {
    pub(crate) fn from_parts(nf: NormalForm, word: Vec<Gen>) -> Self {
        GroupElement { nf, word }
    }

    pub fn normal_form(&self) -> &NormalForm {
        &self.nf
    }

    pub fn word(&self) -> &[Gen] {
        &self.word
    }
}

impl PartialEq for GroupElement {
    fn eq(&self, other: &Self) -> bool {
        self.nf == other.nf
    }
}

impl Eq for GroupElement {}

impl std::hash::Hash for GroupElement {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.nf.hash(state)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.nf.fmt(f)
    }
}
