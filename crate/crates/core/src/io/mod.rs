//! Plain-text instance files, instance generators, run configuration and the
//! benchmark sweep.

mod bench;
mod config;
mod format;
mod generate;

pub use bench::{bench, run_instance, run_seed, seeded_rng, splitmix64, BenchGrid, RunOutcome};
pub use config::{OutputFormat, RunConfig};
pub use format::{format_number, parse_instance, serialize_instance, Instance, ParseError};
pub use generate::{generate_instance, GenerateError, InstanceKind};
