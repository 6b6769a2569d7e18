//! One fixed program evaluated over a sequence of fact sets.

use std::time::{Duration, Instant};

use crate::grounder::{GroundStats, Grounder};
use crate::model::{AtomTable, GroundAtom};
use crate::parser::Program;
use crate::solver::{answer_sets, AnswerSet, Count, SolveRequest, SolverProgram};
use crate::error::SolveError;
use crate::store::{ForgetMode, OvergroundStore, ShotDelta};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineOptions {
    /// Simplify new rules against certainly true atoms. Without it the
    /// stored program stays valid for every earlier fact set.
    pub tailoring: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { tailoring: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotReport {
    pub shot: u32,
    pub delta: ShotDelta,
    pub stats: GroundStats,
    pub ground_time: Duration,
}

#[derive(Debug, Clone)]
pub struct Engine {
    program: Program,
    grounder: Grounder,
    store: OvergroundStore,
}

impl Engine {
    pub fn new(program: Program, options: EngineOptions) -> Self {
        let mut store = OvergroundStore::new();
        let grounder = Grounder::new(&program, store.table_mut(), options.tailoring);
        Engine {
            program,
            grounder,
            store,
        }
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn grounder(&self) -> &Grounder {
        &self.grounder
    }

    pub fn store(&self) -> &OvergroundStore {
        &self.store
    }

    /// Direct access for fault injection in tests.
    pub fn store_mut(&mut self) -> &mut OvergroundStore {
        &mut self.store
    }

    pub fn table(&self) -> &AtomTable {
        self.store.table()
    }

    /// Starts a shot over the program's own facts plus `facts` and brings
    /// the stored ground program up to date.
    pub fn ground(&mut self, facts: &[GroundAtom]) -> ShotReport {
        let start = Instant::now();
        let mut all: Vec<GroundAtom> = self.program.facts.clone();
        for f in facts {
            if !all.contains(f) {
                all.push(f.clone());
            }
        }
        let delta = self.store.begin_shot(&all);
        let stats = self.grounder.incr_inst(&mut self.store, &delta);
        ShotReport {
            shot: self.store.shot(),
            delta,
            stats,
            ground_time: start.elapsed(),
        }
    }

    pub fn solver_view(&self) -> SolverProgram {
        self.store.extract_solver_view()
    }

    pub fn tailored_program(&self) -> SolverProgram {
        self.store.tailored_program()
    }

    pub fn solve(&self, count: Count) -> Result<Vec<AnswerSet>, SolveError> {
        let view = self.solver_view();
        answer_sets(SolveRequest {
            count,
            ..SolveRequest::new(&view)
        })
    }

    /// End-of-shot forgetting requested by annotations.
    pub fn finish_shot(&mut self) {
        self.store.apply_annotations(&self.program.annotations);
    }

    pub fn forget(&mut self, mode: ForgetMode) {
        self.store.forget(mode, &self.program);
    }

    /// Ground, solve and finish one shot.
    pub fn shot(&mut self, facts: &[GroundAtom], count: Count) -> Result<(ShotReport, Vec<AnswerSet>), SolveError> {
        let report = self.ground(facts);
        let answers = self.solve(count);
        self.finish_shot();
        Ok((report, answers?))
    }
}
