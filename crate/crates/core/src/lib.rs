//! Student-label mixing (SLaM) distillation at desk scale.
//!
//! The crate provides the label-space primitives (probability vectors,
//! top-k masks, margins), a structured noisy-teacher simulator, the
//! student-label mixing loss family, bounded isotonic regression for
//! estimating the teacher's accuracy statistics, linear/softmax students
//! with closed-form and analytic SLaM gradients, and an experiment
//! harness with a CLI (`slam`) that runs distillation benchmarks,
//! halfspace-RCN convergence studies, and sample-complexity scaling
//! studies.

pub mod error;
pub mod harness;
pub mod isotonic;
pub mod linear;
pub mod mixing;
pub mod oracle;
pub mod probvec;
mod vecops;

pub use error::{Error, Result};
