//! Spectral theory of weighted cellular sheaves.
//!
//! A cellular sheaf attaches a vector space (a *stalk*) to every cell of a
//! regular cell complex and a linear *restriction map* to every incident
//! codimension-1 cell pair. The signed coboundary operators assembled from
//! these maps square to zero, so every sheaf carries Hodge Laplacians whose
//! kernels compute sheaf cohomology. This crate builds those operators as
//! dense matrices and implements the spectral machinery on top of them:
//!
//! * [`complex`]: regular cell complexes as graded face posets with signed
//!   incidence, built from graphs, simplicial data, deletions, and products.
//! * [`sheaf`]: weighted cellular sheaves, sheaf morphisms, cell maps, and
//!   the sheaf operations (sums, tensors, pullback, pushforward, products,
//!   orthogonal bundles).
//! * [`hodge`]: coboundaries, up/down/full Laplacians, harmonic cochains,
//!   relative cohomology, sheaf normalization, factor-width-two tests.
//! * [`harmonic`]: harmonic extension over a boundary, Kron reduction via
//!   Schur complements, and the maximum-modulus check for orthogonal bundles.
//! * [`spectral`]: spectra, eigenvalue interlacing under cell deletion,
//!   morphism/pushforward/covering/product spectral relations, frustration
//!   and threshold rounding.
//! * [`resistance`]: effective resistance between homologous cycles and the
//!   randomized spectral sparsifier.
//! * [`dynamics`]: Laplacian diffusion and approximations to the constant
//!   sheaf with their spectral bound.
//!
//! Everything is dense and double precision, sized for complexes with a few
//! thousand total stalk dimensions. All structures are immutable once built
//! and all operations are pure, so concurrent reads are safe.

pub mod complex;
pub mod dynamics;
mod error;
pub mod harmonic;
pub mod hodge;
pub mod linalg;
pub mod resistance;
pub mod sample;
pub mod sheaf;
pub mod spectral;

pub use complex::CellComplex;
pub use error::{Error, Result};
pub use hodge::{Cochain, LinearOperator};
pub use sheaf::{CellMap, CellularSheaf, SheafMorphism};
pub use spectral::Spectrum;
