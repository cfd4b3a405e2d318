//! Fingertip trajectory search, endpoint scoring and whole-hand planning.

pub mod hand_plan;
pub mod rrt;
pub mod scoring;
pub mod select;

pub use hand_plan::{
    min_pairwise_separation, plan_hand, replan_relaxed, resample_seed, FailureStage, FingerFailure, FingerPlan, FingerTask, GraspHypothesis,
    HandPlanConfig, PlanningScene, Relaxation,
};
pub use rrt::{densify, path_length, rrt_star, segment_hits_box, Clearance, FingerTrajectory, GraspSeed, RrtConfig, RrtOutcome, RrtStats};
pub use scoring::{approach_frame, occluder_distance, score_endpoint, visibility_check, CandidateEndpoint, PlannerWeights};
pub use select::{select_endpoint, Selection};
