//! Numerical laboratory for non-abelian 2-forms.
//!
//! The crate is organised bottom-up:
//!
//! - [`poly`]: truncated bivariate polynomials with tensor slots, the field carrier.
//! - [`algebra`]: splittings, 2-forms, gauge transforms, the ω-exterior derivative and ω-bracket.
//! - [`transport`]: path-ordered exponentials and transport of splittings across a strip.
//! - [`fourier`] and [`disk`]: Fourier–Taylor fields on the unit disk and the obstruction solver.
//! - [`triangle`]: jets of ω-flat splittings and the infinitesimal triangle integrals.
//! - [`bch`]: the continuous Baker–Campbell–Hausdorff equation and its adjoint-log oracle.
//! - [`config`], [`experiment`]: the configuration format and experiment runner behind the CLI.

pub mod algebra;
pub mod bch;
pub mod config;
pub mod disk;
pub mod experiment;
pub mod fourier;
pub mod linalg;
pub mod poly;
pub mod rng;
pub mod transport;
pub mod triangle;

pub use algebra::{AnchoredSection, GaugeTransform, Splitting, TwoForm};
pub use poly::{Axis, PolyField};
