//! Histogram of Oriented Principal Components (HOPC) descriptors for
//! sequences of 3D pointclouds, spatio-temporal keypoints with
//! view-invariant description, and bag-of-words / holistic action
//! classification.

pub mod eigen;
pub mod error;
pub mod geom;
pub mod hopc;
pub mod io;
pub mod learn;
pub mod stkp;

pub use error::{Error, Result};
