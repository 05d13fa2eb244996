//! Geometric realizations of unitary-group representations of
//! finite-dimensional C*-algebras.
//!
//! Starting from a state `φ` on a block matrix algebra `A` and a unital
//! *-subalgebra `B`, the crate builds the GNS representation, the
//! homogeneous bundle `U_A ×_{U_B} H_φ`, its operator-valued reproducing
//! kernel and the realization operator that embeds the GNS space into the
//! sections of that bundle, together with the unitary × block-triangular
//! factorization used to put a complex structure on the base.
//!
//! Modules, bottom-up:
//! - [`algebra`]: block algebras, traces, spectra, commutants, centralizers.
//! - [`gns`]: GNS spaces, subalgebra compressions, conditional expectations.
//! - [`bundle`]: fiber vectors, the kernel, Gram matrices, realization checks.
//! - [`factorization`]: left supports, `g = uq`, the extension `ρ̃`, holomorphy.
//! - [`cli`]: configuration files, experiment drivers, reports.

// Links the system OpenBLAS, which provides LAPACK.
extern crate openblas_src;

pub mod algebra;
pub mod bundle;
pub mod cli;
pub mod config;
pub mod error;
pub mod factorization;
pub mod gns;
pub mod linalg;
pub mod par;
pub mod report;
pub mod rng;

pub use algebra::{spectral_decompose, AlgebraElement, AlgebraSpec, Functional, SpectralDecomposition};
pub use error::{Error, Result};
pub use par::Execution;
