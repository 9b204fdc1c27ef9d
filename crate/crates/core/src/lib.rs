//! Core numerics for inertial-manifold diagnostics of the 2D hyperviscous
//! Navier-Stokes equations on the `2π`-periodic torus.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command-line interface live in the `hnse` crate.

#![no_std]
// `!(x > a)` rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod averaging;
pub mod dynamics;
pub mod exact;
pub mod lattice;
pub mod random;
pub mod spectral;
pub mod truncation;
