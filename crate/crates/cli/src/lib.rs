//! Command-line driver for `pointhom`: scenario files in, run directories
//! out, plus the acceptance suite behind `verify`.

pub mod commands;
pub mod manifest;
pub mod suite;
