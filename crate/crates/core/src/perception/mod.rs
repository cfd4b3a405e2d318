//! Cloud cleanup, segmentation, normals and the BVH spatial index.

pub mod bvh;
pub mod normals;
pub mod preprocess;
pub mod segment;

pub use bvh::{Bvh, BvhNode, Nearest, NodeKind, DEFAULT_LEAF_CAPACITY};
pub use normals::{estimate_normals, estimate_normals_with, NormalField};
pub use preprocess::{denoise_points, preprocess, ransac_plane, statistical_outliers, Plane, PreprocessConfig, Preprocessed, Removal};
pub use segment::{grow_region, seed_near, segment_region_growing, segmentation_accuracy};
