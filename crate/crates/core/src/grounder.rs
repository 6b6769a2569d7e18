//! Incremental instantiation with tailoring. Each shot alternates a
//! desimplification pass over the stored rules with semi-naive
//! instantiation of every component, until neither changes anything.

use std::collections::{HashMap, HashSet};

use indexmap::IndexSet;

use crate::dependency::ComponentOrder;
use crate::model::{
    AtomId, AtomTable, Constant, GroundAtom, GroundLiteral, GroundRule, LiteralState, PredId,
    RuleId, RuleKind, SimplKind, Term,
};
use crate::parser::Program;
use crate::store::{OvergroundStore, Recorded, RuleIndex, ShotDelta};

/// Per-shot work counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GroundStats {
    pub instances_attempted: usize,
    pub instances_added: usize,
    pub literals_restored: usize,
    pub rules_reinstated: usize,
    pub rules_deleted: usize,
}

/// Atoms certainly true in the current shot: the facts plus heads of
/// definite rules whose bodies are certainly true.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CertainSet {
    atoms: HashSet<AtomId>,
}

impl CertainSet {
    pub fn contains(&self, atom: AtomId) -> bool {
        self.atoms.contains(&atom)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.atoms.iter().copied()
    }

    /// Adds `atom` and everything that follows from it through definite
    /// rules already in the store.
    pub fn derive(&mut self, store: &OvergroundStore, atom: AtomId) {
        let mut work = vec![atom];
        while let Some(a) = work.pop() {
            if !self.atoms.insert(a) {
                continue;
            }
            for &(idx, _) in store.occurrences_in_bodies(a) {
                let rule = store.rule(idx);
                if is_definite(rule)
                    && !self.atoms.contains(&rule.head[0])
                    && rule.body.iter().all(|l| self.atoms.contains(&l.atom))
                {
                    work.push(rule.head[0]);
                }
            }
        }
    }
}

fn is_definite(rule: &GroundRule) -> bool {
    rule.kind == RuleKind::Normal
        && rule.head.len() == 1
        && !rule.is_deleted()
        && rule.body.iter().all(|l| !l.negated)
}

pub fn compute_certain(store: &OvergroundStore) -> CertainSet {
    let mut ct = CertainSet::default();
    for &f in store.current_facts() {
        ct.derive(store, f);
    }
    ct
}

/// Builds the stored form of a fresh instance. Certainly true positive
/// literals are struck; a certainly true negated atom deletes the rule.
/// Weak constraints are left untouched.
pub fn simplify(
    origin: RuleId,
    kind: RuleKind,
    head: Vec<AtomId>,
    body: Vec<(AtomId, bool)>,
    ct: &CertainSet,
    generation: u32,
) -> GroundRule {
    let mut rule = GroundRule {
        origin,
        kind,
        head,
        body: body
            .into_iter()
            .map(|(a, neg)| GroundLiteral::new(a, neg))
            .collect(),
        deleted: None,
        generation,
    };
    if matches!(kind, RuleKind::Weak { .. }) {
        return rule;
    }
    rule.deleted = first_deleting_atom(&rule, ct);
    if rule.deleted.is_none() {
        for lit in &mut rule.body {
            if !lit.negated && ct.contains(lit.atom) {
                lit.state = LiteralState::Simplified {
                    reason: lit.atom,
                    kind: SimplKind::CertainlyTruePositive,
                };
            }
        }
    }
    rule
}

fn first_deleting_atom(rule: &GroundRule, ct: &CertainSet) -> Option<AtomId> {
    rule.body
        .iter()
        .find(|l| l.negated && ct.contains(l.atom))
        .map(|l| l.atom)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DesimplReport {
    pub literals_restored: usize,
    /// Rules taken out of the deleted set and kept out after the recheck.
    pub reinstated: Vec<RuleIndex>,
}

impl DesimplReport {
    pub fn is_noop(&self) -> bool {
        self.literals_restored == 0 && self.reinstated.is_empty()
    }
}

/// Undoes every simplification whose reason is no longer certainly true.
/// Reinstated rules come back complete and are only rechecked for deletion.
pub fn desimpl_step(store: &mut OvergroundStore, ct: &CertainSet) -> DesimplReport {
    let mut report = DesimplReport::default();
    let touched: Vec<RuleIndex> = store.tailored().iter().copied().collect();
    for idx in touched {
        let rule = store.rule(idx);
        if let Some(reason) = rule.deleted {
            if ct.contains(reason) {
                continue;
            }
            store.reinstate_rule(idx).expect("rule is in the deleted set");
            match first_deleting_atom(store.rule(idx), ct) {
                Some(again) => {
                    store.delete_rule(idx, again).expect("rule exists");
                }
                None => report.reinstated.push(idx),
            }
            continue;
        }
        let stale: Vec<usize> = rule
            .body
            .iter()
            .enumerate()
            .filter_map(|(pos, l)| match l.state {
                LiteralState::Simplified { reason, .. } if !ct.contains(reason) => Some(pos),
                _ => None,
            })
            .collect();
        for pos in stale {
            store.restore_literal(idx, pos).expect("literal is simplified");
            report.literals_restored += 1;
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Slot {
    Const(Constant),
    Var(usize),
}

#[derive(Debug, Clone)]
struct Pattern {
    pred: PredId,
    name: String,
    slots: Vec<Slot>,
}

#[derive(Debug, Clone)]
struct CompiledRule {
    origin: RuleId,
    kind: RuleKind,
    head: Vec<Pattern>,
    body: Vec<(Pattern, bool)>,
    /// Body positions of positive literals, in source order.
    positive: Vec<usize>,
    vars: usize,
}

type Binding = Vec<Option<Constant>>;

impl CompiledRule {
    fn instantiate(&self, pat: &Pattern, binding: &[Constant]) -> GroundAtom {
        GroundAtom::new(
            pat.name.clone(),
            pat.slots
                .iter()
                .map(|s| match s {
                    Slot::Const(c) => c.clone(),
                    Slot::Var(v) => binding[*v].clone(),
                })
                .collect(),
        )
    }
}

fn unify(pat: &Pattern, atom: &GroundAtom, binding: &mut Binding, trail: &mut Vec<usize>) -> bool {
    for (slot, value) in pat.slots.iter().zip(&atom.args) {
        match slot {
            Slot::Const(c) => {
                if c != value {
                    return false;
                }
            }
            Slot::Var(v) => match &binding[*v] {
                Some(bound) if bound != value => return false,
                Some(_) => {}
                None => {
                    binding[*v] = Some(value.clone());
                    trail.push(*v);
                }
            },
        }
    }
    true
}

/// Instantiates a fixed program against an [`OvergroundStore`].
#[derive(Debug, Clone)]
pub struct Grounder {
    rules: Vec<CompiledRule>,
    by_origin: HashMap<RuleId, usize>,
    order: ComponentOrder,
    tailoring: bool,
}

impl Grounder {
    pub fn new(program: &Program, table: &mut AtomTable, tailoring: bool) -> Self {
        let order = ComponentOrder::for_program(program);
        let mut rules = Vec::with_capacity(program.rules.len());
        let mut by_origin = HashMap::new();
        for rule in &program.rules {
            let mut vars: Vec<String> = Vec::new();
            let mut compile = |atom: &crate::model::Atom, table: &mut AtomTable| Pattern {
                pred: table.predicate_id(&atom.signature()),
                name: atom.predicate.clone(),
                slots: atom
                    .terms
                    .iter()
                    .map(|t| match t {
                        Term::Const(c) => Slot::Const(c.clone()),
                        Term::Var(v) => Slot::Var(match vars.iter().position(|x| x == v) {
                            Some(i) => i,
                            None => {
                                vars.push(v.clone());
                                vars.len() - 1
                            }
                        }),
                    })
                    .collect(),
            };
            // positive literals first so variables are numbered in join order
            let mut body: Vec<Option<(Pattern, bool)>> = vec![None; rule.body.len()];
            for (i, l) in rule.body.iter().enumerate().filter(|(_, l)| !l.negated) {
                body[i] = Some((compile(&l.atom, table), false));
            }
            for (i, l) in rule.body.iter().enumerate().filter(|(_, l)| l.negated) {
                body[i] = Some((compile(&l.atom, table), true));
            }
            let head = rule.head.iter().map(|a| compile(a, table)).collect();
            let body: Vec<(Pattern, bool)> = body.into_iter().flatten().collect();
            let positive = body
                .iter()
                .enumerate()
                .filter(|(_, (_, neg))| !neg)
                .map(|(i, _)| i)
                .collect();
            by_origin.insert(rule.id, rules.len());
            rules.push(CompiledRule {
                origin: rule.id,
                kind: rule.kind,
                head,
                body,
                positive,
                vars: vars.len(),
            });
        }
        Grounder {
            rules,
            by_origin,
            order,
            tailoring,
        }
    }

    pub fn order(&self) -> &ComponentOrder {
        &self.order
    }

    pub fn tailoring(&self) -> bool {
        self.tailoring
    }

    /// Runs one shot's instantiation after [`OvergroundStore::begin_shot`].
    pub fn incr_inst(&self, store: &mut OvergroundStore, delta: &ShotDelta) -> GroundStats {
        let mut stats = GroundStats::default();
        let mut ct = compute_certain(store);
        let mut frontier: Vec<AtomId> = delta.new_facts.clone();
        let mut first = true;
        loop {
            let report = if self.tailoring {
                desimpl_step(store, &ct)
            } else {
                DesimplReport::default()
            };
            stats.literals_restored += report.literals_restored;
            stats.rules_reinstated += report.reinstated.len();
            for &idx in &report.reinstated {
                for h in store.rule(idx).head.clone() {
                    if store.accumulate(h) {
                        frontier.push(h);
                    }
                }
            }
            if !first && report.is_noop() && frontier.is_empty() {
                break;
            }
            let added = self.delta_inst(store, &mut ct, std::mem::take(&mut frontier), &mut stats);
            first = false;
            if report.is_noop() && added == 0 {
                break;
            }
        }
        store.clear_stale();
        stats
    }

    /// Semi-naive instantiation of every component in order, followed by
    /// the constraints. Returns the number of rules added.
    fn delta_inst(
        &self,
        store: &mut OvergroundStore,
        ct: &mut CertainSet,
        frontier: Vec<AtomId>,
        stats: &mut GroundStats,
    ) -> usize {
        let before = stats.instances_added;
        let mut shot_new: IndexSet<AtomId> = frontier.into_iter().collect();
        for comp in &self.order.rules {
            let mut delta: Vec<AtomId> = shot_new.iter().copied().collect();
            let mut naive_pass = true;
            loop {
                let delta_map = group_by_pred(store.table(), &delta);
                let mut next = Vec::new();
                for &origin in comp {
                    let rule = &self.rules[self.by_origin[&origin]];
                    let naive = naive_pass && store.is_stale(origin);
                    let bindings = self.bindings(rule, store, &delta_map, naive);
                    for b in bindings {
                        self.emit(rule, &b, store, ct, stats, &mut next);
                    }
                }
                naive_pass = false;
                if next.is_empty() {
                    break;
                }
                shot_new.extend(next.iter().copied());
                delta = next;
            }
        }
        let delta: Vec<AtomId> = shot_new.iter().copied().collect();
        let delta_map = group_by_pred(store.table(), &delta);
        for &origin in &self.order.constraints {
            let rule = &self.rules[self.by_origin[&origin]];
            let naive = store.is_stale(origin);
            let bindings = self.bindings(rule, store, &delta_map, naive);
            let mut none = Vec::new();
            for b in bindings {
                self.emit(rule, &b, store, ct, stats, &mut none);
            }
        }
        stats.instances_added - before
    }

    /// Complete bindings of `rule`. In naive mode every positive literal is
    /// matched against all accumulated atoms; otherwise at least one literal
    /// must match an atom of `delta`.
    fn bindings(
        &self,
        rule: &CompiledRule,
        store: &OvergroundStore,
        delta: &HashMap<PredId, Vec<AtomId>>,
        naive: bool,
    ) -> IndexSet<Vec<Constant>> {
        let mut out = IndexSet::new();
        let mut binding: Binding = vec![None; rule.vars];
        if naive {
            self.join(rule, 0, None, delta, store, &mut binding, &mut out);
        } else {
            for (k, &pos) in rule.positive.iter().enumerate() {
                if delta.contains_key(&rule.body[pos].0.pred) {
                    self.join(rule, 0, Some(k), delta, store, &mut binding, &mut out);
                }
            }
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn join(
        &self,
        rule: &CompiledRule,
        depth: usize,
        delta_at: Option<usize>,
        delta: &HashMap<PredId, Vec<AtomId>>,
        store: &OvergroundStore,
        binding: &mut Binding,
        out: &mut IndexSet<Vec<Constant>>,
    ) {
        if depth == rule.positive.len() {
            out.insert(binding.iter().map(|c| c.clone().expect("safe rule")).collect());
            return;
        }
        // the delta literal is matched first, the rest left to right
        let k = match delta_at {
            Some(d) if depth == 0 => d,
            Some(d) if depth <= d => depth - 1,
            _ => depth,
        };
        let pat = &rule.body[rule.positive[k]].0;
        let candidates: &[AtomId] = if delta_at == Some(k) {
            delta.get(&pat.pred).map_or(&[][..], Vec::as_slice)
        } else {
            store.accumulated_of(pat.pred)
        };
        let mut trail = Vec::new();
        for &cand in candidates {
            if unify(pat, store.table().resolve(cand), binding, &mut trail) {
                self.join(rule, depth + 1, delta_at, delta, store, binding, out);
            }
            for v in trail.drain(..) {
                binding[v] = None;
            }
        }
    }

    fn emit(
        &self,
        rule: &CompiledRule,
        binding: &[Constant],
        store: &mut OvergroundStore,
        ct: &mut CertainSet,
        stats: &mut GroundStats,
        next: &mut Vec<AtomId>,
    ) {
        stats.instances_attempted += 1;
        let table = store.table_mut();
        let head: Vec<AtomId> = rule
            .head
            .iter()
            .map(|p| table.intern_ground(rule.instantiate(p, binding)))
            .collect();
        let body: Vec<(AtomId, bool)> = rule
            .body
            .iter()
            .map(|(p, neg)| (table.intern_ground(rule.instantiate(p, binding)), *neg))
            .collect();
        let empty = CertainSet::default();
        let certain = if self.tailoring { &*ct } else { &empty };
        let generation = store.shot();
        let ground = simplify(rule.origin, rule.kind, head, body, certain, generation);
        let Recorded::New(idx) = store.record_rule(ground) else {
            return;
        };
        stats.instances_added += 1;
        let stored = store.rule(idx);
        if stored.is_deleted() {
            stats.rules_deleted += 1;
        }
        let heads = stored.head.clone();
        let definite_head = (is_definite(stored)
            && stored.body.iter().all(|l| ct.contains(l.atom)))
        .then(|| stored.head[0]);
        for h in heads {
            if store.accumulate(h) {
                next.push(h);
            }
        }
        if let Some(h) = definite_head {
            if !ct.contains(h) {
                ct.derive(store, h);
            }
        }
    }
}

fn group_by_pred(table: &AtomTable, atoms: &[AtomId]) -> HashMap<PredId, Vec<AtomId>> {
    let mut map: HashMap<PredId, Vec<AtomId>> = HashMap::new();
    for &a in atoms {
        map.entry(table.pred_of(a)).or_default().push(a);
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_facts;

    const P_EX: &str = "r(X,Y) :- e(X,Y), not q(X).\nr(X,Z) | s(X,Z) :- e(X,Y), r(Y,Z).";

    fn shot(g: &Grounder, s: &mut OvergroundStore, facts: &str) -> GroundStats {
        let facts = parse_facts(facts).unwrap();
        let delta = s.begin_shot(&facts);
        g.incr_inst(s, &delta)
    }

    fn listing(s: &OvergroundStore) -> Vec<String> {
        let mut v: Vec<String> = s.rules().iter().map(|r| r.render_annotated(s.table())).collect();
        v.sort();
        v
    }

    fn setup(tailoring: bool) -> (Grounder, OvergroundStore) {
        let p = Program::parse(P_EX).unwrap();
        let mut s = OvergroundStore::new();
        let g = Grounder::new(&p, s.table_mut(), tailoring);
        (g, s)
    }

    #[test]
    fn certain_set_is_facts_without_definite_rules() {
        let (g, mut s) = setup(true);
        shot(&g, &mut s, "e(3,1). e(1,2). q(3).");
        let ct = compute_certain(&s);
        assert_eq!(ct.len(), 3);
        let mut empty = OvergroundStore::new();
        empty.begin_shot(&[]);
        assert!(compute_certain(&empty).is_empty());
    }

    #[test]
    fn certain_set_follows_definite_chains() {
        let p = Program::parse("b(X) :- a(X).\nc(X) :- b(X), a(X).\nd(X) :- c(X), not z(X).").unwrap();
        let mut s = OvergroundStore::new();
        let g = Grounder::new(&p, s.table_mut(), true);
        shot(&g, &mut s, "a(1).");
        let ct = compute_certain(&s);
        let names: std::collections::BTreeSet<String> =
            ct.iter().map(|a| s.table().resolve(a).to_string()).collect();
        assert_eq!(names, ["a(1)", "b(1)", "c(1)"].map(String::from).into());
    }

    #[test]
    fn first_shot_instances() {
        let (g, mut s) = setup(true);
        let stats = shot(&g, &mut s, "e(3,1). e(1,2). q(3).");
        assert_eq!(stats.instances_added, 3);
        assert_eq!(stats.rules_deleted, 1);
        assert_eq!(
            listing(&s),
            [
                "[deleted: q(3)] r(3,1) :- e(3,1), not q(3).",
                "r(1,2) :- [e(1,2)], not q(1).",
                "r(3,2) | s(3,2) :- [e(3,1)], r(1,2).",
            ]
        );
    }

    #[test]
    fn empty_frontier_attempts_nothing() {
        let (g, mut s) = setup(true);
        shot(&g, &mut s, "e(3,1). e(1,2). q(3).");
        let stats = shot(&g, &mut s, "e(3,1). e(1,2). q(3).");
        assert_eq!(stats, GroundStats::default());
    }

    #[test]
    fn simplify_then_desimplify_restores_instance() {
        let mut t = AtomTable::new();
        let e = t.intern_ground(GroundAtom::new("e", vec![Constant::Int(1)]));
        let q = t.intern_ground(GroundAtom::new("q", vec![Constant::Int(1)]));
        let r = t.intern_ground(GroundAtom::new("r", vec![Constant::Int(1)]));
        let mut ct = CertainSet::default();
        ct.atoms.insert(e);
        let body = vec![(e, false), (q, true)];
        let g = simplify(0, RuleKind::Normal, vec![r], body.clone(), &ct, 1);
        assert!(!g.body[0].is_active());
        let mut s = OvergroundStore::new();
        let Recorded::New(i) = s.record_rule(g) else { panic!() };
        let report = desimpl_step(&mut s, &CertainSet::default());
        assert_eq!(report.literals_restored, 1);
        assert_eq!(s.rule(i), &simplify(0, RuleKind::Normal, vec![r], body, &CertainSet::default(), 1));
        // idempotent
        assert!(desimpl_step(&mut s, &CertainSet::default()).is_noop());
    }

    #[test]
    fn reinstated_rule_is_redeleted_by_another_reason() {
        let mut t = AtomTable::new();
        let [a, b, h] = ["a", "b", "h"].map(|n| t.intern_ground(GroundAtom::new(n, vec![])));
        let mut ct = CertainSet::default();
        ct.atoms.extend([a, b]);
        let g = simplify(0, RuleKind::Normal, vec![h], vec![(a, true), (b, true)], &ct, 1);
        assert_eq!(g.deleted, Some(a));
        let mut s = OvergroundStore::new();
        s.record_rule(g);
        let mut only_b = CertainSet::default();
        only_b.atoms.insert(b);
        let report = desimpl_step(&mut s, &only_b);
        assert!(report.reinstated.is_empty());
        assert_eq!(s.rule(0).deleted, Some(b));
    }

    #[test]
    fn weak_constraints_are_never_simplified() {
        let mut t = AtomTable::new();
        let a = t.intern_ground(GroundAtom::new("a", vec![]));
        let mut ct = CertainSet::default();
        ct.atoms.insert(a);
        let kind = RuleKind::Weak { weight: 1, level: 1 };
        let g = simplify(0, kind, vec![], vec![(a, true)], &ct, 1);
        assert!(!g.is_tailored());
    }

    #[test]
    fn untailored_grounding_keeps_full_rules() {
        let (g, mut s) = setup(false);
        shot(&g, &mut s, "e(3,1). e(1,2). q(3).");
        assert!(s.rules().iter().all(|r| !r.is_tailored()));
        assert_eq!(s.len(), 3);
    }
}
