//! Human-aware trajectory planning over 3D semantic scene graphs.
//!
//! The pipeline: load a scene graph, insert humans and their relations,
//! collect the objects near a trajectory, assign each a cost and clearance,
//! turn those into a planar cost field, rasterize it, and search the grid for
//! a minimum-cost path. [`scenario`] runs the whole chain for several graph
//! variants side by side.

pub mod cost_assessment;
pub mod cost_field;
pub mod geometry;
pub mod human_augmentation;
pub mod planner;
pub mod scenario;
pub mod scene_graph;
pub mod trajectory_context;
