//! Numerical toolkit for completely positive maps between matrix algebras:
//! Choi calculus, completely bounded norms, and constructive perturbation of
//! almost complete order embeddings into exact ones.

pub mod cbnorm;
pub mod counterexample;
pub mod cpmap;
pub mod error;
pub mod io;
pub mod matcore;
pub mod par;
pub mod perturb;
pub mod random;
pub mod splitting;
pub mod trials;

pub use cbnorm::NormEstimate;
pub use cpmap::{EmbeddingCertificate, KrausMap, LinearMap, MatLinMap, StinespringForm};
pub use error::{Error, Result};
pub use matcore::{CMatrix, CVector, Projection, C64};
