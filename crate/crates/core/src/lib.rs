//! Approximation scheme for discrete k-median and k-means in low-dimensional
//! Euclidean space.
//!
//! The solver samples a randomly shifted quadtree with nested portal sets,
//! relocates clients whose neighbourhood is cut too high in the tree, and runs a
//! dynamic program over portal-distance configurations to find a cheap
//! portal-respecting solution. Alongside it the crate ships the exact and
//! constant-factor baselines it needs and a diagnostics harness that measures
//! the structural quantities (cut probabilities, budgets, the structured
//! solution) on concrete instances.
//!
//! ```
//! use portal_cluster::{Instance, Objective, Point, SolverParams};
//!
//! let clients = vec![Point::new(vec![0.0, 0.0]), Point::new(vec![10.0, 0.0])];
//! let candidates = vec![
//!     Point::new(vec![0.0, 0.0]),
//!     Point::new(vec![10.0, 0.0]),
//!     Point::new(vec![5.0, 0.0]),
//! ];
//! let instance = Instance::new(2, clients, candidates, 1, Objective::Means).unwrap();
//! let (solution, _report) = portal_cluster::solve(&instance, &SolverParams::new(0.3)).unwrap();
//! assert_eq!(solution.centers(), &[2]);
//! ```

pub mod badcut;
pub mod baseline;
pub mod diagnostics;
pub mod dp;
mod error;
pub mod geometry;
pub mod io;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod quadtree;

pub use badcut::{BadCutReport, BudgetBreakdown, CutParams};
pub use baseline::{baseline_solve, brute_force_opt, exhaustive_portal_opt, BaselineParams};
pub use error::{Error, Result};
pub use geometry::{squared_distance, Point};
pub use model::{cost, normalize, tilde_cost, Instance, Objective, Relocation, Solution};
pub use par::Execution;
pub use pipeline::{evaluate, solve, SolveReport, SolverParams};
pub use quadtree::{CutLevel, ShiftedGrid, ShiftedQuadtree};
