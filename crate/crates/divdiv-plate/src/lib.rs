pub mod mesh;
pub mod poly;
pub mod quadrature;
pub mod jet;
pub mod spaces;
pub mod problems;
pub mod assembly;
pub mod solver;
pub mod postprocess;
pub mod estimator;
pub mod adapt;
pub mod verify;
pub mod cli;
