//! Multi-user spread-transform dither modulation watermarking of grayscale images.
//!
//! Several users embed one bit each into every host vector of block-DCT
//! coefficients. Each user detects blindly with only their own keys.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod blockdct;
pub mod corpus;
pub mod error;
pub mod image;
pub mod keys;
mod linalg;
pub mod metrics;
pub mod multiwm;
pub mod optimizer;
pub mod pipeline;
pub mod prng;
pub mod quantizer;
pub mod sequential;
pub mod stdm;

pub use attacks::{AttackKind, AttackSpec};
pub use error::{Error, Result};
pub use image::GrayImage;
pub use keys::{derive_params, EmbedParams, GeneratorConfig, UserKeySet};
pub use linalg::DEPENDENCE_TOLERANCE;
pub use metrics::{ber, mse, psnr, DetectionReport};
pub use multiwm::{build_projection_system, detect_bit, Embedded, ProjectionSystem, TargetVector};
pub use optimizer::{embed_bits, Method, OptimizerConfig, PoptimConfig, QoptimConfig};
pub use pipeline::{
    detect_image, detect_image_with_ring, embed_image, tune_fidelity, EmbedJob, EmbedOutcome,
    Payload, Tuning, TuningConfig,
};
pub use quantizer::{DitherPair, LatticeWindow};
pub use sequential::{orthogonalize_against_public, sequential_embed, PublicKeyRing};
pub use stdm::HostVector;
