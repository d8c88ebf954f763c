//! Exponent lattices, the Taylor hierarchy of the scaled Ito map and the
//! iterated-integral expansion at the starting point.

mod chaos;
mod hierarchy;
mod lattice;

pub use chaos::{chaos_coefficients, iterated_integral, ChaosTerm};
pub use hierarchy::{phi_hierarchy, remainder, remainder_from, scaled_solution, ExpansionHierarchy};
pub use lattice::{build_lattice, ExponentLattice, LatticeExponent, LatticeKind, MERGE_TOL};
