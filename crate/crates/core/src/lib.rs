//! Executable finite models of independent families of sets, the
//! permutation-extension step toward homogeneous families, the
//! dense-set construction over finite partial functions, and the
//! diagonalization argument that ties them together.
//!
//! Everything infinite is replaced by an explicit bound: a universe size
//! `N`, a size threshold `t` standing in for "infinite", a depth cap `d`
//! on Boolean combinations, and search bounds on enumeration indices.

pub mod cli;
pub mod codec;
pub mod diag;
pub mod extender;
pub mod finset;
pub mod generic;
