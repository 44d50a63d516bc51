//! Exact non-archimedean computation at desk scale.

pub mod cli;
pub mod corpus;
pub mod cubical_homology;
pub mod face_lifting;
pub mod implicit_solver;
pub mod linalg;
pub mod report;
pub mod tate_series;
pub mod tilt_engine;
pub mod valued_field;
