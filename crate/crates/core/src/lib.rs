//! Invariant tori of conformally symplectic maps: an a-posteriori Newton
//! solver, Lindstedt series in the perturbation parameter `ε`, and the
//! geometry of the complex `ε` domain where the tori are analytic.
//!
//! The crate is organised bottom-up:
//!
//! * [`fourier`]: truncated Fourier series, grids and weighted norms,
//! * [`diophantine`]: small-divisor constants and the good sets,
//! * [`cohomology`]: the twisted cohomology equation,
//! * [`maps`]: map families evaluated on numbers or ε-jets,
//! * [`newton`]: the Newton method with the automatic reducibility frame,
//! * [`lindstedt`]: order-by-order and doubling Lindstedt expansions,
//! * [`atlas`]: excluded balls, domain classification and continuation.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atlas;
pub mod cohomology;
pub mod diophantine;
pub mod error;
pub(crate) mod field;
pub mod fourier;
pub mod lindstedt;
pub mod maps;
pub mod newton;

pub use num_complex::Complex64;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use diophantine::{golden_mean, Frequency, GoodSetParams};
pub use error::{KamError, Result};
pub use fourier::{FourierSeries, GridLayout, StripNorm};
pub use lindstedt::{EpsilonJet, Jet};
pub use maps::{ConformalFactor, DissipativeStandardMap, MapFamily};
pub use newton::{KamSolution, NewtonConfig, TorusEmbedding};
