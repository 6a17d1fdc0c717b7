//! Numerical kernel: distribution functions, quadrature and root finding.
//!
//! Everything here is a pure function of its arguments and safe to call from
//! any number of threads.

mod bvn;
mod chisq;
mod mvn3;
mod normal;
mod quadrature;
mod root;
mod special;
mod student_t;

pub use bvn::{bvn_cdf, bvn_upper};
pub use chisq::{chisq_cdf, chisq_noncentral_cdf, chisq_noncentral_pdf, chisq_pdf};
pub use mvn3::{mvn3_cdf, Corr3, PSD_TOLERANCE};
pub use normal::{norm_cdf, norm_pdf, norm_quantile};
pub use quadrature::{integrate, integrate_interval, integrate_piecewise, Integral, Quadrature, TailPolicy, Weight};
pub use root::{find_root, find_root_expanding};
pub use special::{beta_inc, gamma_p, gamma_q, ln_gamma};
pub use student_t::{t_cdf, t_pdf, t_quantile};
