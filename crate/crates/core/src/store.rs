//! State kept alive across shots: the overgrounded program with its
//! tailoring metadata, the accumulated and persistent atom sets, the deleted
//! rule set and the indices the grounder works from.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::str::FromStr;

use indexmap::IndexSet;

use crate::error::StoreError;
use crate::model::{
    AtomId, AtomTable, GroundAtom, GroundRule, LiteralState, PredId, RuleId, RuleKey, RuleKind,
};
use crate::parser::{Annotation, Program};
use crate::solver::{SolverProgram, SolverRule};

pub type RuleIndex = usize;

/// Input change of one shot, computed before the accumulated sets are
/// updated.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ShotDelta {
    /// `F \ AF`: facts never seen among the accumulated atoms.
    pub new_facts: Vec<AtomId>,
    /// `PF \ F`: previously persistent facts missing from this shot.
    pub departed: Vec<AtomId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recorded {
    New(RuleIndex),
    Duplicate(RuleIndex),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForgetMode {
    /// Drop every ground rule, keep the accumulated atoms.
    Rules,
    /// Drop every ground rule and the accumulated atoms of all predicates
    /// occurring in the program's rules.
    Predicates,
}

impl FromStr for ForgetMode {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "r" => Ok(ForgetMode::Rules),
            "p" => Ok(ForgetMode::Predicates),
            other => Err(StoreError::UnknownForgetMode(other.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OvergroundStore {
    table: AtomTable,
    rules: Vec<GroundRule>,
    dedup: HashMap<RuleKey, RuleIndex>,
    accumulated: IndexSet<AtomId>,
    accumulated_by_pred: HashMap<PredId, Vec<AtomId>>,
    persistent: IndexSet<AtomId>,
    current: IndexSet<AtomId>,
    deleted: BTreeSet<RuleIndex>,
    tailored: BTreeSet<RuleIndex>,
    head_index: HashMap<AtomId, Vec<RuleIndex>>,
    body_index: HashMap<AtomId, Vec<(RuleIndex, usize)>>,
    shot: u32,
    reground_all: bool,
    stale: BTreeSet<RuleId>,
}

impl Default for OvergroundStore {
    fn default() -> Self {
        OvergroundStore {
            table: AtomTable::new(),
            rules: Vec::new(),
            dedup: HashMap::new(),
            accumulated: IndexSet::new(),
            accumulated_by_pred: HashMap::new(),
            persistent: IndexSet::new(),
            current: IndexSet::new(),
            deleted: BTreeSet::new(),
            tailored: BTreeSet::new(),
            head_index: HashMap::new(),
            body_index: HashMap::new(),
            shot: 0,
            reground_all: true,
            stale: BTreeSet::new(),
        }
    }
}

impl OvergroundStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn table(&self) -> &AtomTable {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut AtomTable {
        &mut self.table
    }

    /// Number of shots begun so far.
    pub fn shot(&self) -> u32 {
        self.shot
    }

    /// Registers the facts of a new shot and returns the `NF`/`OF` deltas.
    pub fn begin_shot(&mut self, facts: &[GroundAtom]) -> ShotDelta {
        let mut current = IndexSet::with_capacity(facts.len());
        for f in facts {
            current.insert(self.table.intern_ground(f.clone()));
        }
        let new_facts = current
            .iter()
            .copied()
            .filter(|a| !self.accumulated.contains(a))
            .collect();
        let departed = self
            .persistent
            .iter()
            .copied()
            .filter(|a| !current.contains(a))
            .collect();
        for &a in &current {
            self.accumulate(a);
        }
        if self.shot == 0 {
            self.persistent = current.clone();
        } else {
            self.persistent.retain(|a| current.contains(a));
        }
        self.current = current;
        self.shot += 1;
        ShotDelta {
            new_facts,
            departed,
        }
    }

    /// Adds `atom` to `AF`; true if it was not there yet.
    pub fn accumulate(&mut self, atom: AtomId) -> bool {
        if self.accumulated.insert(atom) {
            let pred = self.table.pred_of(atom);
            self.accumulated_by_pred.entry(pred).or_default().push(atom);
            true
        } else {
            false
        }
    }

    pub fn accumulated(&self) -> &IndexSet<AtomId> {
        &self.accumulated
    }

    pub fn accumulated_of(&self, pred: PredId) -> &[AtomId] {
        self.accumulated_by_pred
            .get(&pred)
            .map_or(&[][..], Vec::as_slice)
    }

    pub fn persistent(&self) -> &IndexSet<AtomId> {
        &self.persistent
    }

    pub fn current_facts(&self) -> &IndexSet<AtomId> {
        &self.current
    }

    pub fn rules(&self) -> &[GroundRule] {
        &self.rules
    }

    pub fn rule(&self, idx: RuleIndex) -> &GroundRule {
        &self.rules[idx]
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn deleted(&self) -> &BTreeSet<RuleIndex> {
        &self.deleted
    }

    /// Rules that are deleted or carry at least one simplified literal.
    pub fn tailored(&self) -> &BTreeSet<RuleIndex> {
        &self.tailored
    }

    pub fn rules_with_head(&self, atom: AtomId) -> &[RuleIndex] {
        self.head_index.get(&atom).map_or(&[][..], Vec::as_slice)
    }

    pub fn occurrences_in_bodies(&self, atom: AtomId) -> &[(RuleIndex, usize)] {
        self.body_index.get(&atom).map_or(&[][..], Vec::as_slice)
    }

    pub fn find(&self, key: &RuleKey) -> Option<RuleIndex> {
        self.dedup.get(key).copied()
    }

    /// True if instances of `rule` must be rebuilt from the whole of `AF`
    /// at the next shot (first shot, or after forgetting).
    pub fn is_stale(&self, rule: RuleId) -> bool {
        self.reground_all || self.stale.contains(&rule)
    }

    pub fn clear_stale(&mut self) {
        self.reground_all = false;
        self.stale.clear();
    }

    pub fn record_rule(&mut self, rule: GroundRule) -> Recorded {
        let key = rule.key();
        if let Some(&idx) = self.dedup.get(&key) {
            return Recorded::Duplicate(idx);
        }
        let idx = self.rules.len();
        self.dedup.insert(key, idx);
        self.index_rule(idx, &rule);
        self.rules.push(rule);
        Recorded::New(idx)
    }

    fn index_rule(&mut self, idx: RuleIndex, rule: &GroundRule) {
        for &h in &rule.head {
            self.head_index.entry(h).or_default().push(idx);
        }
        for (pos, l) in rule.body.iter().enumerate() {
            self.body_index.entry(l.atom).or_default().push((idx, pos));
        }
        if rule.is_deleted() {
            self.deleted.insert(idx);
        }
        if rule.is_tailored() {
            self.tailored.insert(idx);
        }
    }

    fn get_mut(&mut self, idx: RuleIndex) -> Result<&mut GroundRule, StoreError> {
        self.rules.get_mut(idx).ok_or(StoreError::NoSuchRule(idx))
    }

    /// Moves a deleted rule back into the program in its complete form.
    pub fn reinstate_rule(&mut self, idx: RuleIndex) -> Result<(), StoreError> {
        if !self.deleted.contains(&idx) {
            self.get_mut(idx)?;
            return Err(StoreError::NotDeleted(idx));
        }
        let rule = self.get_mut(idx)?;
        rule.deleted = None;
        for l in &mut rule.body {
            l.state = LiteralState::Active;
        }
        self.deleted.remove(&idx);
        self.tailored.remove(&idx);
        Ok(())
    }

    /// Marks a rule deleted because `reason` is certainly true.
    pub fn delete_rule(&mut self, idx: RuleIndex, reason: AtomId) -> Result<(), StoreError> {
        let rule = self.get_mut(idx)?;
        rule.deleted = Some(reason);
        self.deleted.insert(idx);
        self.tailored.insert(idx);
        Ok(())
    }

    pub fn restore_literal(&mut self, idx: RuleIndex, position: usize) -> Result<(), StoreError> {
        let rule = self.get_mut(idx)?;
        let lit = rule
            .body
            .get_mut(position)
            .ok_or(StoreError::NotSimplified {
                rule: idx,
                position,
            })?;
        if lit.is_active() {
            return Err(StoreError::NotSimplified {
                rule: idx,
                position,
            });
        }
        lit.state = LiteralState::Active;
        if !rule.is_tailored() {
            self.tailored.remove(&idx);
        }
        Ok(())
    }

    pub fn forget(&mut self, mode: ForgetMode, program: &Program) {
        self.rules.clear();
        self.reindex();
        if mode == ForgetMode::Predicates {
            let preds: HashSet<PredId> = program
                .rule_predicates()
                .iter()
                .filter_map(|p| self.table.find_predicate(p))
                .collect();
            self.forget_atoms(|a, table| preds.contains(&table.pred_of(a)));
        }
        self.reground_all = true;
    }

    /// End-of-shot forgetting requested by program annotations.
    pub fn apply_annotations(&mut self, annotations: &[Annotation]) {
        for ann in annotations {
            match ann {
                Annotation::GlobalForgetPredicate(pred) => {
                    let Some(pid) = self.table.find_predicate(pred) else {
                        continue;
                    };
                    let table = &self.table;
                    let removed = remove_rules(&mut self.rules, |r| {
                        r.head
                            .iter()
                            .chain(r.body.iter().map(|l| &l.atom))
                            .any(|&a| table.pred_of(a) == pid)
                    });
                    self.stale.extend(removed);
                    self.forget_atoms(|a, table| table.pred_of(a) == pid);
                }
                &Annotation::RuleForget(rule) => {
                    let removed = remove_rules(&mut self.rules, |r| r.origin == rule);
                    self.stale.extend(removed);
                }
            }
        }
        self.reindex();
    }

    fn forget_atoms(&mut self, drop: impl Fn(AtomId, &AtomTable) -> bool) {
        let table = &self.table;
        self.accumulated.retain(|&a| !drop(a, table));
        self.persistent.retain(|&a| !drop(a, table));
        for list in self.accumulated_by_pred.values_mut() {
            list.retain(|&a| !drop(a, table));
        }
    }

    fn reindex(&mut self) {
        self.dedup.clear();
        self.head_index.clear();
        self.body_index.clear();
        self.deleted.clear();
        self.tailored.clear();
        let rules = std::mem::take(&mut self.rules);
        for (idx, r) in rules.iter().enumerate() {
            self.dedup.insert(r.key(), idx);
            self.index_rule(idx, r);
        }
        self.rules = rules;
    }

    /// The tailored program: every non-deleted rule with its active literals,
    /// plus the current facts.
    pub fn tailored_program(&self) -> SolverProgram {
        SolverProgram {
            rules: self
                .rules
                .iter()
                .filter(|r| !r.is_deleted())
                .map(solver_rule)
                .collect(),
            facts: self.current.iter().copied().collect(),
        }
    }

    /// The part of the tailored program handed to the solver: rules whose
    /// positive active body can still be satisfied from the current facts.
    pub fn extract_solver_view(&self) -> SolverProgram {
        let closure = self.possibly_true();
        let rules = self
            .rules
            .iter()
            .filter(|r| !r.is_deleted())
            .filter(|r| {
                r.active_body()
                    .filter(|l| !l.negated)
                    .all(|l| closure.contains(&l.atom))
            })
            .map(solver_rule)
            .collect();
        SolverProgram {
            rules,
            facts: self.current.iter().copied().collect(),
        }
    }

    /// Least fixpoint of the current facts under the non-deleted rules,
    /// reading negative literals as satisfiable.
    fn possibly_true(&self) -> HashSet<AtomId> {
        let mut closure: HashSet<AtomId> = self.current.iter().copied().collect();
        let mut missing: Vec<usize> = vec![0; self.rules.len()];
        let mut watch: HashMap<AtomId, Vec<RuleIndex>> = HashMap::new();
        let mut queue: Vec<AtomId> = Vec::new();
        for (idx, r) in self.rules.iter().enumerate() {
            if r.is_deleted() || r.head.is_empty() {
                continue;
            }
            let mut need: Vec<AtomId> = r
                .active_body()
                .filter(|l| !l.negated && !closure.contains(&l.atom))
                .map(|l| l.atom)
                .collect();
            need.sort();
            need.dedup();
            missing[idx] = need.len();
            if need.is_empty() {
                queue.extend(r.head.iter().copied());
            }
            for a in need {
                watch.entry(a).or_default().push(idx);
            }
        }
        while let Some(a) = queue.pop() {
            if !closure.insert(a) {
                continue;
            }
            for &idx in watch.get(&a).map_or(&[][..], Vec::as_slice) {
                missing[idx] -= 1;
                if missing[idx] == 0 {
                    queue.extend(self.rules[idx].head.iter().copied());
                }
            }
        }
        closure
    }

    /// One line per non-deleted rule, struck literals omitted.
    pub fn render_tailored(&self) -> Vec<String> {
        self.rules
            .iter()
            .filter(|r| !r.is_deleted())
            .map(|r| r.render(&self.table, false))
            .collect()
    }
}

fn solver_rule(r: &GroundRule) -> SolverRule {
    let active: Vec<_> = r.active_body().collect();
    SolverRule {
        head: r.head.clone(),
        pos: active.iter().filter(|l| !l.negated).map(|l| l.atom).collect(),
        neg: active.iter().filter(|l| l.negated).map(|l| l.atom).collect(),
        weak: match r.kind {
            RuleKind::Weak { weight, level } => Some((weight, level)),
            _ => None,
        },
    }
}

/// Drops the rules matching `pred` and returns the origins that lost
/// instances.
fn remove_rules(rules: &mut Vec<GroundRule>, pred: impl Fn(&GroundRule) -> bool) -> Vec<RuleId> {
    let mut origins = Vec::new();
    rules.retain(|r| {
        let drop = pred(r);
        if drop && !origins.contains(&r.origin) {
            origins.push(r.origin);
        }
        !drop
    });
    origins
}
