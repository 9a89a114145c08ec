//! A self-healing tree overlay and a deterministic simulator to attack it.
//!
//! Nodes of a rooted spanning tree are deleted one at a time by an
//! adversary. After each deletion the neighbours of the victim rebuild the
//! tree from wills prepared in advance, so that no node's degree grows by
//! more than three and the diameter stays within a `log Δ` factor.
//!
//! ```
//! use forgiving_tree::experiments::TreeSpec;
//! use forgiving_tree::sim::{run, AdversarySpec, SimulationConfig, StrategyKind};
//!
//! let config = SimulationConfig::new(TreeSpec::Star { delta: 16 }, StrategyKind::ForgivingTree, AdversarySpec::MaxDegree, 1);
//! let report = run(&config).unwrap();
//! assert!(report.passed());
//! assert!(report.max_degree_increase() <= 3);
//! ```

pub mod adversary;
pub mod baselines;
pub mod experiments;
pub mod graph;
pub mod protocol;
pub mod sim;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/quickstart.md")]
mod book_quickstart {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/graphs.md")]
mod book_graphs {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/wills.md")]
mod book_wills {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/simulator.md")]
mod book_simulator {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/adversaries.md")]
mod book_adversaries {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/baselines.md")]
mod book_baselines {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
mod book_experiments {}
