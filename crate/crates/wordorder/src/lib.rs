//! File formats, parallel decoding, benchmarking and the `wordorder`
//! command built on `wordorder-core`.

pub mod bench;
pub mod cli;
pub mod commands;
pub mod config;
pub mod container;
pub mod decode;
pub mod io;
pub mod scorers;
pub mod toy;
