//! Joint-sparse recovery from multiple measurement vectors (MMV).
//!
//! Recovers a row-sparse coefficient matrix `X` from noiseless measurements
//! `Y = Phi * X`, where the dictionary `Phi` has more atoms than measurement
//! rows. The crate covers:
//!
//! - rank-blind baselines: q-thresholding and simultaneous OMP ([`solvers::somp`]),
//! - rank-aware methods built on the range space of `Y`: MUSIC-style
//!   thresholding ([`solvers::ra_thresholding`]), RA-OMP and RA-ORMP,
//! - combinatorial searches: the exhaustive support oracle and the
//!   reduced-rank search over residual supports,
//! - identifiability diagnostics: spark, the exact recovery condition (ERC),
//!   and spark/rank uniqueness bounds ([`conditions`]),
//! - adversarial constructions: non-unique measurement pairs and instances
//!   that defeat SOMP's first selection regardless of its norm choice,
//! - a seeded Monte Carlo benchmark ([`bench`]) with CSV/JSON output, driven
//!   by the `mmvbench` binary.
//!
//! All randomness flows through explicit seeds, so every experiment is
//! reproducible bit-for-bit regardless of thread count.

pub mod bench;
pub mod conditions;
mod error;
pub mod numerics;
pub mod problem;
pub mod solvers;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Default relative singular-value cutoff for rank decisions.
///
/// The measurement model is noiseless, so the cutoff only has to reject
/// floating-point noise.
pub const DEFAULT_REL_TOL: f64 = 1e-10;
