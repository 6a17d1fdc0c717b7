//! Design, blinded sample size re-estimation and simulation of three-arm
//! "gold standard" non-inferiority trials with normally distributed outcomes.
//!
//! The crate is organised bottom-up:
//!
//! - [`statcore`]: normal, t and chi-squared laws, the trivariate normal CDF,
//!   quadrature and root finding.
//! - [`design`]: the fixed-design power approximation and minimal sample size.
//! - [`estimators`]: blinded and unblinded variance estimators and the sampling
//!   densities of the blinded ones.
//! - [`reestimate`]: the re-estimation rule, expected power of the adaptive
//!   design and the inflation factor for the block-sum estimator.
//! - [`simulate`]: a deterministic, parallel Monte Carlo engine.
//!
//! ```
//! use goldssr::design::{AllocationRatio, DesignSpec};
//!
//! let spec = DesignSpec::builder()
//!     .margins(0.3, 0.0, 0.0)
//!     .means(0.0, 0.0, 0.6)
//!     .sigma(1.0)
//!     .alloc(AllocationRatio::balanced())
//!     .build()
//!     .unwrap();
//! let n = goldssr::design::required_sample_size(&spec).unwrap();
//! assert_eq!(n.total, 525);
//! ```

// Domain checks are written `!(x > 0.0)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod error;
pub mod estimators;
pub mod presets;
pub mod reestimate;
pub mod simulate;
pub mod statcore;

pub use error::{Error, Result};
