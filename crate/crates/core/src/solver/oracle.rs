//! Reference semantics for testing: instantiate every rule over the whole
//! Herbrand universe, with no simplification and no incremental state, and
//! hand the result to the solver.

use std::collections::BTreeSet;

use crate::error::SolveError;
use crate::model::{apply_substitution, AtomTable, Constant, GroundAtom, RuleKind, Substitution, Term};
use crate::parser::Program;

use super::{answer_sets, AnswerSet, SearchMode, SolveRequest, SolverProgram, SolverRule};

/// Default bound on the number of ground rules the oracle will build.
pub const ORACLE_RULE_CAP: usize = 200_000;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub table: AtomTable,
    /// Every answer set with its cost, unoptimized.
    pub answers: Vec<AnswerSet>,
}

impl OracleResult {
    pub fn resolved(&self) -> BTreeSet<BTreeSet<GroundAtom>> {
        self.answers.iter().map(|a| a.resolve(&self.table)).collect()
    }
}

/// Answer sets of `program ∪ facts` by full Herbrand instantiation.
pub fn brute_force_oracle(program: &Program, facts: &[GroundAtom]) -> Result<OracleResult, SolveError> {
    let mut constants: BTreeSet<Constant> = BTreeSet::new();
    for f in program.facts.iter().chain(facts) {
        constants.extend(f.args.iter().cloned());
    }
    for rule in &program.rules {
        for a in rule.head.iter().chain(rule.body.iter().map(|l| &l.atom)) {
            for t in &a.terms {
                if let Term::Const(c) = t {
                    constants.insert(c.clone());
                }
            }
        }
    }
    let constants: Vec<Constant> = constants.into_iter().collect();

    let mut size: u128 = 0;
    for rule in &program.rules {
        size += (constants.len() as u128).pow(rule.variables().len() as u32);
    }
    if size > ORACLE_RULE_CAP as u128 {
        return Err(SolveError::HerbrandTooLarge {
            size,
            cap: ORACLE_RULE_CAP,
        });
    }

    let mut table = AtomTable::new();
    let mut ground = SolverProgram::default();
    for f in program.facts.iter().chain(facts) {
        let id = table.intern_ground(f.clone());
        if !ground.facts.contains(&id) {
            ground.facts.push(id);
        }
    }
    for rule in &program.rules {
        let vars: Vec<String> = rule.variables().into_iter().map(String::from).collect();
        let mut digits = vec![0usize; vars.len()];
        if !vars.is_empty() && constants.is_empty() {
            continue;
        }
        loop {
            let subst: Substitution = vars
                .iter()
                .zip(&digits)
                .map(|(v, &d)| (v.clone(), constants[d].clone()))
                .collect();
            let inst = apply_substitution(rule, &subst).expect("every variable is bound");
            let mut intern = |a: &crate::model::Atom| {
                table.intern(a).expect("instance is ground")
            };
            ground.rules.push(SolverRule {
                head: inst.head.iter().map(&mut intern).collect(),
                pos: inst.body.iter().filter(|l| !l.negated).map(|l| intern(&l.atom)).collect(),
                neg: inst.body.iter().filter(|l| l.negated).map(|l| intern(&l.atom)).collect(),
                weak: match inst.kind {
                    RuleKind::Weak { weight, level } => Some((weight, level)),
                    _ => None,
                },
            });
            if !advance(&mut digits, constants.len()) {
                break;
            }
        }
    }
    let answers = answer_sets(SolveRequest {
        optimize: false,
        mode: SearchMode::Guess,
        ..SolveRequest::new(&ground)
    })?;
    Ok(OracleResult { table, answers })
}

/// Odometer increment; false once every combination was produced.
fn advance(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}
