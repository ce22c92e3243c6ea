//! Geometry-level simulator for CNNs mapped onto RRAM crossbar arrays.
//!
//! The crate is `no_std` (it needs `alloc`). It covers:
//!
//! * [`ir`]: a DAG of convolution, merge, pooling and classifier nodes with
//!   shape inference and parameter counting, plus [`builders`] for the
//!   DenseNet, ResNet-style, depthwise-separable and fixed-channel
//!   concatenation architectures.
//! * [`mapper`]: the per-kernel-offset sub-matrix mapping of convolution
//!   weights onto crossbars and the resulting cell utilization.
//! * [`cost`]: an analytic, unit-free latency/energy model over a mapping.
//! * [`verify`]: integer-exact execution of a mapped layer on simulated
//!   crossbars, checked against direct convolution.
//! * [`rank`]: numerical rank profiles of feature maps.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod builders;
pub mod cost;
mod error;
pub mod ir;
pub mod mapper;
pub mod portion;
pub mod rank;
pub mod shape;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use shape::TensorShape;
