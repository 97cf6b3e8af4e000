//! Reaction–diffusion model of a membrane-bound GTPase with a conserved
//! cytosolic pool, discretised with linear finite elements on closed surfaces.

pub mod analysis;
pub mod error;
pub mod fem;
pub mod kinetics;
pub mod mesh;
pub mod simulator;
pub mod sparse;
pub mod stability;

pub use error::{FemError, MeshError, ParameterError, SimError, StabilityError};
pub use kinetics::{DimensionalParameters, Parameters};
pub use mesh::{icosphere, load_off, parse_off, SurfaceMesh};
pub use sparse::SparseMatrix;
pub use simulator::{run, InitialCondition, RunConfig, State};
