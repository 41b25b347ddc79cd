//! Batch front end: configuration, experiment commands and CSV output.

mod commands;
mod config;
mod output;

pub use commands::*;
pub use config::{
    default_workers, lookup, parse_kv, parse_list, read_kv_file, read_metadata, Engine,
    InitialSpec, RunConfig, INFO_KEYS, WORKERS_ENV,
};
pub use output::{fmt_num, write_kv, CsvWriter};
