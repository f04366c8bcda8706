pub mod config;
pub mod results;
pub mod svg;
