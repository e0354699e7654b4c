//! Portal-respecting dynamic program.

pub mod binary;
pub mod quantize;
mod solve;

pub use binary::{binarize, tree_points, BNode, BinaryTree};
pub use quantize::{cost_buckets, quantize, table_size_bound};
pub use solve::{portal_tilde_cost, solve_dp, DpMode, DpOutcome, DpParams, DpStats};
