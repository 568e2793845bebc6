//! Germ parser, key-value reports and the command runner behind `parabolic`.

pub mod parse;
pub mod report;
pub mod run;

pub use parse::{parse_germ, print_germ, GermSource, ParsedGerm};
pub use report::{Report, Value};
pub use run::{run, Command, Options, Outcome};
