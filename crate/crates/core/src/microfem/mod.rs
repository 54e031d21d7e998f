//! Small-strain linear elasticity on Q4/H8 meshes with constraint elimination.

pub mod element;
pub mod homogenize;
pub mod ldl;
mod reduce;
mod solver;
pub mod sparse;
pub mod verify;

pub use homogenize::{homogenize, HomogenizedStiffness};
pub use reduce::{free_translations, Reduction};
pub use solver::{solve_ruc, solve_with_gammas, CaseSystem, FieldSolution, GaussSample, Model, SolveError, SolveOptions, SolutionSummary};
pub use verify::{assemble_uc, copy_map, verify_equivalence, EquivalenceReport, UcAssembly, UcLayout};
