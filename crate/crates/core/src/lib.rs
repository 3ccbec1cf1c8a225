//! Progressive multi-resolution training (PMRT) toolkit.
//!
//! A training schedule that mixes voxel resolutions with per-epoch
//! probabilities, starting on coarse grids and annealing toward the finest
//! one, plus the numerics around it: signed-distance-field voxelization,
//! volumetric loss-weight fields, drag/field evaluation metrics,
//! point-cloud dataset diagnostics, and a desk-scale harness that trains a
//! toy surrogate under any schedule and logs simulated compute cost.
//!
//! Modules map one-to-one onto the pipeline stages:
//!
//! - [`schedule`] — the resolution-sampling schedule and its ablation variants
//! - [`grid`] — dense voxel grids on a Cartesian region of interest
//! - [`mesh`] — triangle meshes, STL/OBJ loading, procedural primitives
//! - [`sdf`] — mesh-to-SDF voxelization (BVH distance + winding-number sign)
//! - [`weights`] — combined distance/gradient loss-weight fields
//! - [`metrics`] — drag-count and relative-L2 metrics with group-balanced aggregation
//! - [`geomdiag`] — farthest-point sampling, NCND pairwise distances, field baselines
//! - [`harness`] — synthetic dataset, toy model, schedule comparison experiments

pub mod geomdiag;
pub mod grid;
pub mod harness;
pub mod mesh;
pub mod metrics;
pub mod numeric;
pub mod schedule;
pub mod sdf;
pub mod weights;
