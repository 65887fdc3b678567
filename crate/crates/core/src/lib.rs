//! Two-stage multicast precoding for multibeam satellite downlinks.
//!
//! The crate builds a synthetic multibeam channel from geometry and a link
//! budget, designs precoders for it and evaluates the resulting multicast
//! throughput:
//!
//! * [`channel`]: beam layout, user placement, feed pattern, link budget,
//!   phase model and bounded CSI perturbations.
//! * [`precoding`]: inter-beam stage (MBIM or regularized zero forcing),
//!   intra-beam stage, power control and the two reference schemes
//!   (average MMSE and 4-colour frequency reuse).
//! * [`robust`]: worst-case variants of both stages driven by first-order
//!   eigen-perturbation bounds.
//! * [`grouping`]: nearest-neighbour user grouping, nominal and robust.
//! * [`gateway`]: multi-gateway partitioning, CSI sharing with overhead
//!   accounting and block-diagonal precoder assembly.
//! * [`evaluate`]: SINR, MODCOD mapping, Monte Carlo runner and statistics.
//! * [`io`]: plain-text tables and complex CSV dumps.
//!
//! All matrix math is generic over [`Real`] (`f32` or `f64`). The `*64`
//! aliases below name the double-precision instantiations used by the
//! simulator.

// Negated float comparisons are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod evaluate;
pub mod gateway;
pub mod grouping;
pub mod io;
pub mod linalg;
pub mod precoding;
pub mod robust;
pub mod scalar;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use scalar::{Real, CMat, CVec, Cx};

pub type ChannelMatrix64 = channel::ChannelMatrix<f64>;
pub type ChannelMatrix32 = channel::ChannelMatrix<f32>;
pub type Precoder64 = precoding::Precoder<f64>;
pub type Precoder32 = precoding::Precoder<f32>;
pub type PerturbationBounds64 = robust::PerturbationBounds<f64>;
pub type EigDecomposition64 = linalg::EigDecomposition<f64>;
pub type CMat64 = CMat<f64>;
pub type CMat32 = CMat<f32>;
