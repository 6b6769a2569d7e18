//! Multi-shot answer set programming with incremental overgrounding and
//! tailoring.
//!
//! A fixed program is grounded once into an [`store::OvergroundStore`] that
//! only ever grows. Every shot supplies a new fact set; the
//! [`grounder::Grounder`] extends the stored ground program with instances
//! over unseen atoms, simplifies new rules against the facts that are
//! certainly true, and undoes earlier simplifications whose justification
//! went away. The [`solver`] then computes answer sets of the relevant part.

pub mod bench;
pub mod dependency;
pub mod engine;
pub mod error;
pub mod grounder;
pub mod model;
pub mod parser;
pub mod session;
pub mod solver;
pub mod store;

pub use engine::{Engine, EngineOptions, ShotReport};
pub use error::{ModelError, ParseError, SolveError, StoreError};
pub use model::{AtomId, AtomTable, Constant, GroundAtom, Predicate};
pub use parser::{parse_facts, parse_program, Program};
pub use solver::{AnswerSet, Count};
pub use store::{ForgetMode, OvergroundStore};
