use thiserror::Error;

/// 1-based source position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LangError {
    #[error("{pos}: {message}")]
    Lex { pos: Pos, message: String },

    #[error("{pos}: {message}")]
    Parse { pos: Pos, message: String },

    #[error("constant {name} has no value (declare it with := or supply a definition)")]
    UnboundConst { name: String },

    #[error("{what} must be a constant expression")]
    NonConstantLoopBound { what: String },

    #[error("undeclared identifier {name}")]
    Undeclared { name: String },

    #[error("{name} is declared more than once")]
    Duplicate { name: String },

    #[error("{0}")]
    Semantic(String),

    #[error("division by zero in `{context}`")]
    DivisionByZero { context: String },

    #[error("integer overflow in `{context}`")]
    Overflow { context: String },

    #[error("index {index} out of bounds for array {array} of length {len}")]
    IndexOutOfBounds { array: String, index: i64, len: usize },

    #[error("random({lo}, {hi}) has an empty range")]
    EmptyRandomRange { lo: i64, hi: i64 },

    #[error("observable {name} = {value} does not fit its declared width of {width} bits")]
    ObservableOutOfRange { name: String, value: i64, width: u32 },

    #[error("precise analysis explored more than {cap} program states")]
    TraceBudgetExceeded { cap: u64 },

    #[error("a single execution exceeded {cap} steps")]
    RuntimeDivergenceGuard { cap: u64 },

    #[error("time limit reached after exploring {explored} program states")]
    Deadline { explored: u64 },
}

pub type Result<T> = std::result::Result<T, LangError>;
