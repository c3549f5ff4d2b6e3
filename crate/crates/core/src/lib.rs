//! Event-driven simulation and analysis of fictitious-play best-response
//! dynamics in the 3x3 Shapley family.

pub mod analysis;
pub mod coding;
pub mod error;
pub mod flow;
pub mod game;
pub mod induced;
pub mod io;
pub mod jitter;
pub mod verify;

pub use coding::{DitherCode, Itinerary, Step};
pub use error::{Error, Result};
pub use flow::{Label, Limits, TargetPair, Trajectory, TrajectoryLeg};
pub use game::{GamePair, JointState, Landmarks, SimplexPoint, Vec3, SIGMA};
pub use induced::{BoundaryPoint, SectionHit, SectionKind, SectionSpec};
pub use jitter::{JitterModel, QuadPolar, QuadrantLinearMap};
