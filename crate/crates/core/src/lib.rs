//! Reduced unit cell (rUC) analysis of periodic media.
//!
//! Equivalence relations `(T, o)` link sub-domains adjacent to a cell to the
//! cell itself. From them this crate decides which macro strains a reduced
//! cell can carry and with which load-reversal factors, pairs boundary nodes
//! of a mesh, emits the constraint equations
//! `u(A) − γ T u(Â) = −⟨ε⟩ T o`, and solves the constrained linear-elastic
//! problem to check that a reduced cell reproduces its full unit cell.

pub mod admissibility;
pub mod cellspec;
pub mod constraints;
pub mod equivalence;
pub mod fixtures;
pub mod mesh;
pub mod pairing;
pub mod microfem;
pub mod voigt;
