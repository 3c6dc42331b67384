//! Front end, decomposition and execution engines for the leakage language.

pub mod ast;
pub mod cfg;
pub mod decompose;
pub mod engine;
pub mod error;
pub mod lexer;
pub mod parser;
pub mod preprocess;
pub mod ranges;

pub use error::{LangError, Pos, Result};
pub use parser::{parse, parse_source};
