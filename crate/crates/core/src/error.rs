use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("atom {atom} is not ground (variable {variable})")]
    NonGround { atom: String, variable: String },
    #[error("variable {0} is not bound by the substitution")]
    UnboundVariable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: unsafe rule `{rule}`: variable(s) {} not bound by a positive body literal", variables.join(", "))]
    Unsafe {
        line: usize,
        column: usize,
        rule: String,
        variables: Vec<String>,
    },
    #[error("{line}:{column}: %@rule_forget() is not followed by a rule")]
    DanglingRuleForget { line: usize, column: usize },
    #[error("{line}:{column}: {message}")]
    NotAFact {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: empty interval {lower}..{upper}")]
    EmptyInterval {
        line: usize,
        column: usize,
        lower: i64,
        upper: i64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("rule {0} is not deleted")]
    NotDeleted(usize),
    #[error("literal {position} of rule {rule} is not simplified")]
    NotSimplified { rule: usize, position: usize },
    #[error("no rule with index {0}")]
    NoSuchRule(usize),
    #[error("unknown forget type `{0}` (expected `r` or `p`)")]
    UnknownForgetMode(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("atom universe of {size} exceeds the exhaustive cap of {cap}; use the guess-restricted search mode")]
    UniverseTooLarge { size: usize, cap: usize },
    #[error("{size} guess atoms exceed the cap of {cap}")]
    TooManyGuesses { size: usize, cap: usize },
    #[error("Herbrand instantiation would produce {size} rules (cap {cap})")]
    HerbrandTooLarge { size: u128, cap: usize },
}
