//! P1 surface finite elements: assembly, linear solvers and eigenpairs.

pub mod assembly;
pub mod eigen;
pub mod solver;

pub use assembly::{
    assemble_mass, assemble_stiffness, assemble_weighted_mass, integrate, FemOperators, Pattern,
};
pub use eigen::{laplace_beltrami_eigs, EigenPairs};
pub use solver::{solve_nonsymmetric, BiCgStab, Preconditioner, SolveStats};
