//! Approach-conditioned grasp inference built on element decomposition.
//!
//! Objects are seen from above, split into up to three primitive elements,
//! and a grasp network combines the element crops with an oblique image of
//! the approaching gripper to regress one grasp rectangle.

pub mod dataset;
pub mod geometry;
pub mod nn;
pub mod augment;
pub mod raster;
pub mod train;
pub mod decomposer;
pub mod graspnet;
pub mod eval;
pub mod cli;
