pub mod acceptance;
pub mod cli;
pub mod config;
pub mod constants;
pub mod diagnostics;
pub mod eigen;
pub mod error;
pub mod extension;
pub mod form;
pub mod grid;
pub mod io;
pub mod linsolve;
pub mod manifest;
pub mod shape_opt;
pub mod special;

pub use error::{Error, Result};
