//! Pseudo-orbit shadowing, expansivity and stability for actions of finitely
//! generated groups on `R^n` with the max-metric.
//!
//! The pieces, bottom up:
//!
//! * [`group`]: normal forms, generating sets and Cayley balls for `Z^k`,
//!   free groups and the solvable group `<a, b | ba = a^2 b>`.
//! * [`uniformity`]: points, metric entourages, exact box sets and Lebesgue
//!   volume.
//! * [`action`]: generator maps and group actions, perturbations,
//!   conjugation by coordinate changes.
//! * [`pseudo_orbit`], [`shadowing`], [`expansivity`], [`stability`]: the
//!   dynamical checks.

// `!(x > y)` comparisons are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod error;
pub mod expansivity;
pub mod group;
pub mod models;
pub mod pseudo_orbit;
pub mod shadowing;
pub mod stability;
pub mod uniformity;

pub use action::{Action, CoordinateChange, GeneratorMap, PerturbationSpec, SineMap};
pub use error::{Error, Result};
pub use group::{Budget, CayleyBall, GeneratingSet, GroupElement, GroupFamily, NormalForm};
pub use pseudo_orbit::PseudoOrbit;
pub use uniformity::{AxisBox, BoxSet, Interval, LebesgueMeasure, MetricEntourage, Point};
