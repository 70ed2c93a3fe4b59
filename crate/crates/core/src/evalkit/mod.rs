//! Synthetic benchmarks, exhaustive oracles and quality indicators.

mod generators;
mod indicators;
mod oracle;

pub use generators::{gen_ba_shapes, gen_tree_cycles, BaShapesConfig, TreeCyclesConfig};
pub use indicators::{nigd, nipf, nms};
pub use oracle::{
    brute_force_optimal, brute_force_space, brute_force_space_with, ds_objective, DEFAULT_GUARD,
};
