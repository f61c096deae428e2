use std::collections::HashMap;

use super::{Budget, Gen, GeneratingSet, GroupElement, NormalForm};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BallElement {
    pub element: GroupElement,
    /// Exact word length (breadth-first distance from the identity).
    pub length: usize,
    /// `(parent index, s)` with `element = s * parent`; `None` for the identity.
    pub parent: Option<(usize, Gen)>,
}

/// All elements of word length at most `radius`, in breadth-first order,
/// with the complete set of internal edges `(g, s g)`.
#[derive(Clone, Debug)]
pub struct CayleyBall {
    genset: GeneratingSet,
    radius: usize,
    elements: Vec<BallElement>,
    index: HashMap<NormalForm, usize>,
    /// `adjacency[i][s]` is the index of `s * g_i` when it lies in the ball.
    adjacency: Vec<Vec<Option<usize>>>,
}

impl CayleyBall {
    pub fn new(genset: &GeneratingSet, radius: usize, budget: Budget) -> Result<Self> {
        let family = genset.family();
        let identity = family.identity();
        let mut elements = vec![BallElement {
            element: GroupElement::from_parts(identity.clone(), Vec::new()),
            length: 0,
            parent: None,
        }];
        let mut index = HashMap::from([(identity, 0usize)]);
        let mut layer_start = 0;
        for length in 1..=radius {
            let layer_end = elements.len();
            for i in layer_start..layer_end {
                for (s, gen) in genset.generators().iter().enumerate() {
                    let nf = family.multiply(&gen.value, elements[i].element.normal_form());
                    if index.contains_key(&nf) {
                        continue;
                    }
                    if elements.len() >= budget.max_nodes {
                        return Err(Error::Resource {
                            what: format!("Cayley ball of radius {radius}"),
                            budget: budget.max_nodes,
                        });
                    }
                    let mut word = Vec::with_capacity(length);
                    word.push(s);
                    word.extend_from_slice(elements[i].element.word());
                    index.insert(nf.clone(), elements.len());
                    elements.push(BallElement {
                        element: GroupElement::from_parts(nf, word),
                        length,
                        parent: Some((i, s)),
                    });
                }
            }
            layer_start = layer_end;
        }
        let adjacency = elements
            .iter()
            .map(|e| {
                genset
                    .generators()
                    .iter()
                    .map(|gen| {
                        let nf = family.multiply(&gen.value, e.element.normal_form());
                        index.get(&nf).copied()
                    })
                    .collect()
            })
            .collect();
        Ok(CayleyBall {
            genset: genset.clone(),
            radius,
            elements,
            index,
            adjacency,
        })
    }

    pub fn genset(&self) -> &GeneratingSet {
        &self.genset
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[BallElement] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &BallElement {
        &self.elements[i]
    }

    pub fn find(&self, nf: &NormalForm) -> Option<usize> {
        self.index.get(nf).copied()
    }

    pub fn neighbor(&self, i: usize, s: Gen) -> Option<usize> {
        self.adjacency[i][s]
    }

    /// Every internal edge `(g, s g)` as `(index of g, s, index of s g)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, Gen, usize)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(s, j)| j.map(|j| (i, s, j)))
        })
    }

    /// Number of elements of length at most `r` (elements are sorted by length).
    pub fn prefix_len(&self, r: usize) -> usize {
        self.elements.partition_point(|e| e.length <= r)
    }
}
