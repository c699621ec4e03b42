//! Front end for the `spectra` engine: datum files in, canonical reports out.

pub mod commands;
pub mod datum;
pub mod render;

/// The worked unipotent example over `Q_p<T1, T2>`, as a datum file.
pub const WORKED_EXAMPLE: &str = include_str!("../data/unipotent.json");
