//! Hilbert von Neumann modules over finite-dimensional von Neumann algebras.
//!
//! The crate is layered bottom-up:
//!
//! * [`numlin`] — dense complex linear algebra: operator spans, spectral
//!   calculus, polar decomposition, positivity.
//! * [`algebra`] — finite-dimensional von Neumann algebras: closure under
//!   products and adjoints, commutants, center, block decomposition with
//!   matrix units, canonical trace, conditional expectations.
//! * [`gns`] — GNS representations of faithful states, modular conjugation,
//!   unitaries implementing automorphisms, intertwiners between
//!   representations.
//! * [`corner`] — (1,2) corners: ternary-closed operator spaces, support
//!   projections, polar membership.
//! * [`hvnmod`] — module structure on a corner: complements, the Riesz
//!   representation of module maps, right-algebra valued inner products,
//!   standardness, isomorphism checks between bimodules.
//! * [`cpmap`] — completely positive maps: block Choi positivity, central
//!   support of the image, Stinespring dilation and its uniqueness.
//! * [`fusion`] — relative tensor products of bimodules over the middle
//!   algebra, with independence of the auxiliary isometry.
//! * [`scenarios`] — worked constructions: inclusion bimodules with their
//!   projections, automorphism bimodules, their classification and fusion.
//! * [`sample`] — seeded random generators for algebras, states, corners,
//!   and completely positive maps, used by tests and benchmarks.

pub mod algebra;
pub mod corner;
pub mod cpmap;
pub mod fusion;
pub mod gns;
pub mod hvnmod;
pub mod numlin;
pub mod sample;
pub mod scenarios;

mod error;

pub use error::{Error, Result};
pub use numlin::{CMat, CVec, Complex, OperatorSpace, Tolerance};
