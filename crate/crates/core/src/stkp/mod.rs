//! Spatio-temporal keypoints: detection, view-invariant description and
//! adaptive support scales.

pub mod align;
pub mod detect;
pub mod scale;
pub mod surface;

pub use align::{align_support, AlignedPoint, AlignedSupport};
pub use detect::{candidate_filter, detect_stkp, quality, suppress, Candidate, DetectorParams, Keypoint, LocalityParams};
pub use scale::{adaptive_spatial_scale, adaptive_temporal_scale, ScaleParams};
pub use surface::{describe_keypoint, surface_descriptor, DescriptorBackend, SurfaceDescriptor, SurfaceGrid};
