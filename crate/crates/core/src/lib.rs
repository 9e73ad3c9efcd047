//! Clutter suppression for airborne space-time adaptive processing (STAP).
//!
//! The estimator implemented here replaces the sample covariance of a training
//! window with a structured, screened average:
//!
//! 1. each training snapshot is turned into a Toeplitz Hermitian positive-definite
//!    covariance through regularized Burg reflection coefficients ([`thpd`]);
//! 2. Brauer eigenvalue discs flag training cells contaminated by targets
//!    ([`screening`]);
//! 3. the dominant subspaces of the remaining cells are averaged on the Grassmann
//!    manifold under the volume cross-correlation distance ([`grassmann`]);
//! 4. the recomposed covariance drives a standard minimum-variance filter
//!    ([`stap`]).
//!
//! [`sim`] generates side-looking array clutter with known ground truth, and
//! [`pipeline`] strings the stages together and writes CSV tables.
//!
//! ```no_run
//! use bgvcf_stap::pipeline::{run_pipeline, PipelineConfig, RunMode};
//!
//! let cfg = PipelineConfig { output_dir: "out".into(), ..PipelineConfig::default() };
//! let manifest = run_pipeline(&cfg, RunMode::Full)?;
//! println!("{} files written", manifest.outputs.len());
//! # Ok::<(), bgvcf_stap::error::StapError>(())
//! ```

// `!(x > 0.0)` is used throughout on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grassmann;
pub mod linalg;
pub mod pipeline;
pub mod screening;
pub mod sim;
pub mod stap;
pub mod thpd;
