//! Worst-case growth of the ADMM convergence measure over one iteration.
//!
//! * [`model`]: Gram lifting and the data of the semidefinite program.
//! * [`sdp`]: a dense primal-dual interior-point solver for it.
//! * [`certificate`]: the explicit rank-two optimum and its closed-form value.
//! * [`interpolate`]: cyclic monotonicity and max-affine interpolation.
//! * [`admm`]: a two-dimensional instance and an exact one-step replay.
//! * [`cli`]: the `admm-pep` command.
//!
//! ```
//! use admm_pep::admm::{admm_step, build_instance, measure_r};
//! use admm_pep::model::GammaContext;
//!
//! let ctx = GammaContext::new(1.8)?;
//! let inst = build_instance(&ctx)?;
//! let next = admm_step(&inst)?;
//! assert!(measure_r(&next, &inst.z_star, &ctx) > measure_r(&inst.state_k, &inst.z_star, &ctx));
//! # Ok::<(), admm_pep::error::Error>(())
//! ```

pub mod admm;
pub mod certificate;
pub mod cli;
pub mod error;
pub mod interpolate;
pub mod model;
pub mod sdp;

pub use error::{Error, Result};
pub use model::{GammaContext, GOLDEN_RATIO};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/measure.md")]
    mod measure {}
    #[doc = include_str!("../../../book/src/lifting.md")]
    mod lifting {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/certificate.md")]
    mod certificate {}
    #[doc = include_str!("../../../book/src/interpolation.md")]
    mod interpolation {}
    #[doc = include_str!("../../../book/src/counterexample.md")]
    mod counterexample {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
