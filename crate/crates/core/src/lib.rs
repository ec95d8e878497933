//! Contour detection from per-pixel convolutional features.
//!
//! The pipeline runs in five stages, each in its own module:
//!
//! 1. [`convnet`] evaluates an AlexNet-shaped network and exposes the
//!    activation maps of its five convolutional stages.
//! 2. [`densefeat`] builds an image pyramid, stitches it into one plane,
//!    runs the net once, unstitches the descriptor maps and rescales them
//!    so every pixel carries a concatenated descriptor.
//! 3. [`edgesvm`] samples labelled pixels, trains a linear SVM and turns
//!    descriptors into soft edge maps, averaging detections made at the
//!    original and at double resolution.
//! 4. [`nms`] thins soft edge maps along the edge normal.
//! 5. [`bench`] scores edge maps against multi-annotator ground truth with
//!    the ODS / OIS / AP boundary measures.
//!
//! [`image`], [`pnm`] and [`tensor`] provide the shared value type and file
//! formats; [`synth`] generates labelled synthetic scenes.

pub mod bench;
pub mod convnet;
pub mod densefeat;
pub mod edgesvm;
mod error;
pub mod image;
pub mod nms;
pub mod pnm;
pub mod rng;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use image::{resize_bilinear, ImagePlane};
