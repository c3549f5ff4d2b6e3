//! Quantitative checks built on the simulator: stability spectra, the
//! radial map on the jitter cone, quadrangle corners, winding counts,
//! parameter ratio tables and perturbation sweeps.

pub mod cone;
pub mod corners;
pub mod ratios;
pub mod robustness;
pub mod stability;
pub mod winding;

pub use cone::{cone_lift, moebius_cone_map, radial_map, ConeLift, RadialMap};
pub use corners::{game_jitter_model, verify_corner_tables, CornerTable};
pub use ratios::{ratio_claims, ratio_tables, RatioReport};
pub use robustness::{robustness_sweep, RobustnessReport};
pub use stability::{classify_stability, estimate_tau, Classification, OrbitId, StabilityReport};
pub use winding::{verify_winding, WindingModel};
