pub mod assembly;
pub mod config;
pub mod dsu;
pub mod fem;
pub mod group;
pub mod io;
pub mod mesh;
pub mod nodal;
pub mod pipeline;
pub mod plateau;
pub mod report;
pub mod sparse;
pub mod spectrum;
pub mod sphere;
pub mod verify;
