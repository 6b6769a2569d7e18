//! Desk-scale answer-set computation: candidates are enumerated, checked to
//! be classical models, then checked for minimality against their
//! Gelfond-Lifschitz reduct. Weak constraints are optimized lexicographically,
//! higher levels first.

pub mod oracle;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::error::SolveError;
use crate::model::{AtomId, AtomTable, GroundAtom, RuleKind};

pub use oracle::{brute_force_oracle, OracleResult};

/// Default bound on the number of atoms a search may branch over.
pub const DEFAULT_CAP: usize = 24;

/// A ground rule as the solver sees it: only active literals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SolverRule {
    pub head: Vec<AtomId>,
    pub pos: Vec<AtomId>,
    pub neg: Vec<AtomId>,
    /// `(weight, level)` for weak constraints.
    pub weak: Option<(i64, i64)>,
}

impl SolverRule {
    pub fn render(&self, table: &AtomTable) -> String {
        let head: Vec<String> = self.head.iter().map(|&a| table.resolve(a).to_string()).collect();
        let body: Vec<String> = self
            .pos
            .iter()
            .map(|&a| table.resolve(a).to_string())
            .chain(self.neg.iter().map(|&a| format!("not {}", table.resolve(a))))
            .collect();
        let kind = match self.weak {
            Some((weight, level)) => RuleKind::Weak { weight, level },
            None if self.head.is_empty() => RuleKind::Constraint,
            None => RuleKind::Normal,
        };
        crate::model::render_rule(&head, &body, kind)
    }

    fn body_true(&self, interp: &HashSet<AtomId>) -> bool {
        self.pos.iter().all(|a| interp.contains(a)) && !self.neg.iter().any(|a| interp.contains(a))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolverProgram {
    pub rules: Vec<SolverRule>,
    pub facts: Vec<AtomId>,
}

impl SolverProgram {
    /// Rules one per line, then the facts.
    pub fn render(&self, table: &AtomTable) -> Vec<String> {
        self.rules
            .iter()
            .map(|r| r.render(table))
            .chain(self.facts.iter().map(|&f| format!("{}.", table.resolve(f))))
            .collect()
    }

    pub fn has_weak(&self) -> bool {
        self.rules.iter().any(|r| r.weak.is_some())
    }

    fn strong(&self) -> impl Iterator<Item = &SolverRule> {
        self.rules.iter().filter(|r| r.weak.is_none())
    }

    /// Atoms that can be true in some answer set: least fixpoint of the
    /// facts under the rules with negation ignored.
    pub fn possibly_true(&self) -> HashSet<AtomId> {
        let mut closure: HashSet<AtomId> = self.facts.iter().copied().collect();
        loop {
            let mut changed = false;
            for r in self.strong() {
                if r.pos.iter().all(|a| closure.contains(a)) {
                    for &h in &r.head {
                        changed |= closure.insert(h);
                    }
                }
            }
            if !changed {
                return closure;
            }
        }
    }
}

/// Total weight per level.
pub type Cost = BTreeMap<i64, i64>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerSet {
    /// Sorted ascending.
    pub atoms: Vec<AtomId>,
    pub cost: Cost,
}

impl AnswerSet {
    pub fn resolve(&self, table: &AtomTable) -> BTreeSet<GroundAtom> {
        self.atoms.iter().map(|&a| table.resolve(a).clone()).collect()
    }

    /// `{a, b, ...}` with atoms sorted by predicate, then arguments.
    pub fn render(&self, table: &AtomTable) -> String {
        let atoms: Vec<String> = self.resolve(table).iter().map(GroundAtom::to_string).collect();
        format!("{{{}}}", atoms.join(", "))
    }

    /// `COST w@l ...` over nonzero levels, highest first; `None` when the
    /// program has no weak constraints.
    pub fn cost_line(&self) -> Option<String> {
        let top = *self.cost.keys().next_back()?;
        let parts: Vec<String> = self
            .cost
            .iter()
            .rev()
            .filter(|(_, &w)| w != 0)
            .map(|(l, w)| format!("{w}@{l}"))
            .collect();
        if parts.is_empty() {
            Some(format!("COST 0@{top}"))
        } else {
            Some(format!("COST {}", parts.join(" ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Count {
    All,
    First(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    /// Every subset of the candidate atoms.
    Exhaustive,
    /// Only disjunctive heads and negated atoms are guessed; the rest
    /// follows by positive fixpoint.
    Guess,
    /// Exhaustive when the candidates fit under the cap, otherwise guess.
    Auto,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveRequest<'a> {
    pub program: &'a SolverProgram,
    pub count: Count,
    pub optimize: bool,
    pub mode: SearchMode,
    pub cap: usize,
}

impl<'a> SolveRequest<'a> {
    pub fn new(program: &'a SolverProgram) -> Self {
        SolveRequest {
            program,
            count: Count::All,
            optimize: true,
            mode: SearchMode::Auto,
            cap: DEFAULT_CAP,
        }
    }
}

/// A negation-free ground rule; an empty head is a constraint.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PositiveRule {
    pub head: Vec<AtomId>,
    pub body: Vec<AtomId>,
}

/// Drops rules with a negated atom in `interp`, strips the remaining
/// negative literals and turns facts into bodiless rules. Weak constraints
/// do not take part.
pub fn gl_reduct(program: &SolverProgram, interp: &HashSet<AtomId>) -> Vec<PositiveRule> {
    program
        .facts
        .iter()
        .map(|&f| PositiveRule {
            head: vec![f],
            body: Vec::new(),
        })
        .chain(
            program
                .strong()
                .filter(|r| !r.neg.iter().any(|a| interp.contains(a)))
                .map(|r| PositiveRule {
                    head: r.head.clone(),
                    body: r.pos.clone(),
                }),
        )
        .collect()
}

fn satisfies(rules: &[PositiveRule], interp: &HashSet<AtomId>) -> bool {
    rules.iter().all(|r| {
        !r.body.iter().all(|a| interp.contains(a)) || r.head.iter().any(|h| interp.contains(h))
    })
}

/// True iff `interp` satisfies every rule and no proper subset does.
pub fn is_minimal_model(rules: &[PositiveRule], interp: &HashSet<AtomId>) -> bool {
    if !satisfies(rules, interp) {
        return false;
    }
    interp.iter().all(|&a| {
        let mut within = interp.clone();
        within.remove(&a);
        !model_within(rules, &within, HashSet::new())
    })
}

/// Searches for a model of `rules` inside `bound`, growing `partial` only
/// by atoms some violated rule forces or offers.
fn model_within(rules: &[PositiveRule], bound: &HashSet<AtomId>, mut partial: HashSet<AtomId>) -> bool {
    loop {
        let violated = rules.iter().find(|r| {
            r.body.iter().all(|a| partial.contains(a)) && !r.head.iter().any(|h| partial.contains(h))
        });
        let Some(rule) = violated else {
            return true;
        };
        let options: Vec<AtomId> = rule.head.iter().copied().filter(|h| bound.contains(h)).collect();
        match options.as_slice() {
            [] => return false,
            [only] => {
                partial.insert(*only);
            }
            _ => {
                return options.iter().any(|&o| {
                    let mut next = partial.clone();
                    next.insert(o);
                    model_within(rules, bound, next)
                })
            }
        }
    }
}

/// Classical model check over the strong rules and facts.
pub fn is_model(program: &SolverProgram, interp: &HashSet<AtomId>) -> bool {
    program.facts.iter().all(|f| interp.contains(f))
        && program
            .strong()
            .all(|r| !r.body_true(interp) || r.head.iter().any(|h| interp.contains(h)))
}

pub fn is_answer_set(program: &SolverProgram, interp: &HashSet<AtomId>) -> bool {
    is_model(program, interp) && is_minimal_model(&gl_reduct(program, interp), interp)
}

/// Weight per level of the weak constraints whose body holds. Every level
/// occurring in the program is present, possibly with weight 0.
pub fn cost_of(program: &SolverProgram, interp: &HashSet<AtomId>) -> Cost {
    let mut cost = Cost::new();
    for r in &program.rules {
        if let Some((weight, level)) = r.weak {
            let total = cost.entry(level).or_insert(0);
            if r.body_true(interp) {
                *total += weight;
            }
        }
    }
    cost
}

/// Lexicographic comparison, highest level first; missing levels count 0.
pub fn compare_cost(a: &Cost, b: &Cost) -> Ordering {
    let levels: BTreeSet<i64> = a.keys().chain(b.keys()).copied().collect();
    for l in levels.iter().rev() {
        let (x, y) = (a.get(l).unwrap_or(&0), b.get(l).unwrap_or(&0));
        match x.cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Keeps every answer set whose cost is minimal.
pub fn optimize(sets: Vec<AnswerSet>) -> Vec<AnswerSet> {
    let Some(best) = sets.iter().map(|s| &s.cost).min_by(|a, b| compare_cost(a, b)).cloned() else {
        return sets;
    };
    sets.into_iter()
        .filter(|s| compare_cost(&s.cost, &best) == Ordering::Equal)
        .collect()
}

/// Truth of an atom for the fast model check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Val {
    True,
    False,
    Var(usize),
}

/// Strong rules specialised to the candidate atoms: facts are true, atoms
/// outside the candidates are false.
struct Compiled {
    rules: Vec<(Vec<usize>, Vec<usize>, Vec<usize>)>,
}

impl Compiled {
    fn new(program: &SolverProgram, index: &HashMap<AtomId, usize>, facts: &HashSet<AtomId>) -> Self {
        let val = |a: &AtomId| {
            if facts.contains(a) {
                Val::True
            } else {
                index.get(a).map_or(Val::False, |&i| Val::Var(i))
            }
        };
        let mut rules = Vec::new();
        'rules: for r in program.strong() {
            let mut head = Vec::new();
            for h in &r.head {
                match val(h) {
                    Val::True => continue 'rules,
                    Val::False => {}
                    Val::Var(i) => head.push(i),
                }
            }
            let mut pos = Vec::new();
            for a in &r.pos {
                match val(a) {
                    Val::True => {}
                    Val::False => continue 'rules,
                    Val::Var(i) => pos.push(i),
                }
            }
            let mut neg = Vec::new();
            for a in &r.neg {
                match val(a) {
                    Val::True => continue 'rules,
                    Val::False => {}
                    Val::Var(i) => neg.push(i),
                }
            }
            rules.push((head, pos, neg));
        }
        Compiled { rules }
    }

    fn is_model(&self, truth: impl Fn(usize) -> bool) -> bool {
        self.rules.iter().all(|(head, pos, neg)| {
            !(pos.iter().all(|&i| truth(i)) && !neg.iter().any(|&i| truth(i)))
                || head.iter().any(|&i| truth(i))
        })
    }
}

pub fn answer_sets(req: SolveRequest<'_>) -> Result<Vec<AnswerSet>, SolveError> {
    let program = req.program;
    let facts: HashSet<AtomId> = program.facts.iter().copied().collect();
    let closure = program.possibly_true();
    let mut universe: Vec<AtomId> = closure.difference(&facts).copied().collect();
    universe.sort();
    let index: HashMap<AtomId, usize> = universe.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let compiled = Compiled::new(program, &index, &facts);

    let exhaustive = match req.mode {
        SearchMode::Exhaustive => {
            if universe.len() > req.cap {
                return Err(SolveError::UniverseTooLarge {
                    size: universe.len(),
                    cap: req.cap,
                });
            }
            true
        }
        SearchMode::Guess => false,
        SearchMode::Auto => universe.len() <= req.cap,
    };

    let mut found: Vec<HashSet<AtomId>> = Vec::new();
    if exhaustive {
        for mask in 0u64..(1u64 << universe.len()) {
            if !compiled.is_model(|i| mask >> i & 1 == 1) {
                continue;
            }
            let mut interp = facts.clone();
            interp.extend((0..universe.len()).filter(|i| mask >> i & 1 == 1).map(|i| universe[i]));
            if is_minimal_model(&gl_reduct(program, &interp), &interp) {
                found.push(interp);
            }
        }
    } else {
        let guess = guess_atoms(program, &index);
        if guess.len() > req.cap {
            return Err(SolveError::TooManyGuesses {
                size: guess.len(),
                cap: req.cap,
            });
        }
        let definite: Vec<&SolverRule> = program.strong().filter(|r| r.head.len() == 1).collect();
        for mask in 0u64..(1u64 << guess.len()) {
            let chosen: HashSet<AtomId> =
                (0..guess.len()).filter(|i| mask >> i & 1 == 1).map(|i| guess[i]).collect();
            let interp = complete(&facts, &chosen, &definite);
            let consistent = guess.iter().all(|g| interp.contains(g) == chosen.contains(g));
            if consistent && is_answer_set(program, &interp) {
                found.push(interp);
            }
        }
    }

    let mut sets: Vec<AnswerSet> = found
        .into_iter()
        .map(|interp| {
            let mut atoms: Vec<AtomId> = interp.iter().copied().collect();
            atoms.sort();
            AnswerSet {
                atoms,
                cost: cost_of(program, &interp),
            }
        })
        .collect();
    sets.sort_by(|a, b| a.atoms.cmp(&b.atoms));
    if req.optimize && program.has_weak() {
        sets = optimize(sets);
    }
    if let Count::First(n) = req.count {
        sets.truncate(n);
    }
    Ok(sets)
}

/// Candidate atoms that head a disjunctive rule or occur negated.
fn guess_atoms(program: &SolverProgram, index: &HashMap<AtomId, usize>) -> Vec<AtomId> {
    let mut guess = BTreeSet::new();
    for r in &program.rules {
        if r.weak.is_none() && r.head.len() > 1 {
            guess.extend(r.head.iter().filter(|a| index.contains_key(a)));
        }
        guess.extend(r.neg.iter().filter(|a| index.contains_key(a)));
    }
    guess.into_iter().collect()
}

/// Facts plus guessed atoms, closed under the single-head rules whose
/// negated atoms are all outside that base.
fn complete(facts: &HashSet<AtomId>, chosen: &HashSet<AtomId>, rules: &[&SolverRule]) -> HashSet<AtomId> {
    let mut interp: HashSet<AtomId> = facts.union(chosen).copied().collect();
    loop {
        let mut changed = false;
        for r in rules {
            if !r.neg.iter().any(|a| facts.contains(a) || chosen.contains(a))
                && r.pos.iter().all(|a| interp.contains(a))
            {
                changed |= interp.insert(r.head[0]);
            }
        }
        if !changed {
            return interp;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Constant;

    struct Fixture {
        table: AtomTable,
    }

    impl Fixture {
        fn new() -> Self {
            Fixture {
                table: AtomTable::new(),
            }
        }

        fn a(&mut self, name: &str) -> AtomId {
            self.table.intern_ground(GroundAtom::new(name, vec![]))
        }

        fn rule(&mut self, head: &[&str], pos: &[&str], neg: &[&str]) -> SolverRule {
            SolverRule {
                head: head.iter().map(|n| self.a(n)).collect(),
                pos: pos.iter().map(|n| self.a(n)).collect(),
                neg: neg.iter().map(|n| self.a(n)).collect(),
                weak: None,
            }
        }

        fn set(&mut self, names: &[&str]) -> HashSet<AtomId> {
            names.iter().map(|n| self.a(n)).collect()
        }

        fn names(&self, s: &AnswerSet) -> Vec<String> {
            s.resolve(&self.table).iter().map(|a| a.to_string()).collect()
        }
    }

    fn all(program: &SolverProgram, mode: SearchMode) -> Vec<AnswerSet> {
        answer_sets(SolveRequest {
            mode,
            ..SolveRequest::new(program)
        })
        .unwrap()
    }

    #[test]
    fn reduct_examples() {
        let mut t = AtomTable::new();
        let ga = |p: &str, args: &[i64]| GroundAtom::new(p, args.iter().map(|&i| Constant::Int(i)).collect());
        let r12 = t.intern_ground(ga("r", &[1, 2]));
        let e12 = t.intern_ground(ga("e", &[1, 2]));
        let q1 = t.intern_ground(ga("q", &[1]));
        let p = SolverProgram {
            rules: vec![SolverRule {
                head: vec![r12],
                pos: vec![e12],
                neg: vec![q1],
                weak: None,
            }],
            facts: vec![],
        };
        let reduct = gl_reduct(&p, &[e12].into_iter().collect());
        assert_eq!(reduct, vec![PositiveRule { head: vec![r12], body: vec![e12] }]);
        assert!(gl_reduct(&p, &[q1, e12].into_iter().collect()).is_empty());

        let positive = SolverProgram {
            rules: vec![SolverRule { head: vec![r12], pos: vec![e12], neg: vec![], weak: None }],
            facts: vec![],
        };
        for i in [HashSet::new(), [q1].into_iter().collect(), [r12, e12, q1].into_iter().collect()] {
            assert_eq!(gl_reduct(&positive, &i).len(), 1);
        }
    }

    #[test]
    fn minimal_model_examples() {
        let mut f = Fixture::new();
        let a = f.a("a");
        let b = f.a("b");
        let disj = vec![PositiveRule { head: vec![a, b], body: vec![] }];
        assert!(is_minimal_model(&disj, &f.set(&["a"])));
        assert!(!is_minimal_model(&disj, &f.set(&["a", "b"])));
        assert!(!is_minimal_model(&disj, &HashSet::new()));
        let imp = vec![PositiveRule { head: vec![a], body: vec![b] }];
        assert!(is_minimal_model(&imp, &HashSet::new()));
    }

    #[test]
    fn violated_constraint_has_no_answer_sets() {
        let mut f = Fixture::new();
        let c = f.rule(&[], &["a"], &[]);
        let a = f.a("a");
        let p = SolverProgram { rules: vec![c], facts: vec![a] };
        assert!(all(&p, SearchMode::Exhaustive).is_empty());
        assert!(all(&p, SearchMode::Guess).is_empty());
    }

    #[test]
    fn even_loop_and_disjunction() {
        let mut f = Fixture::new();
        let r1 = f.rule(&["a"], &[], &["b"]);
        let r2 = f.rule(&["b"], &[], &["a"]);
        let r3 = f.rule(&["c", "d"], &["a"], &[]);
        let p = SolverProgram { rules: vec![r1, r2, r3], facts: vec![] };
        for mode in [SearchMode::Exhaustive, SearchMode::Guess] {
            let sets: Vec<Vec<String>> = all(&p, mode).iter().map(|s| f.names(s)).collect();
            assert_eq!(sets.len(), 3);
            assert!(sets.contains(&vec!["b".to_string()]));
            assert!(sets.contains(&vec!["a".to_string(), "c".to_string()]));
            assert!(sets.contains(&vec!["a".to_string(), "d".to_string()]));
        }
    }

    #[test]
    fn odd_loop_and_unsupported_atoms() {
        let mut f = Fixture::new();
        let r = f.rule(&["a"], &[], &["a"]);
        let p = SolverProgram { rules: vec![r], facts: vec![] };
        assert!(all(&p, SearchMode::Exhaustive).is_empty());
        assert!(all(&p, SearchMode::Guess).is_empty());

        // positive loop is not self-supporting
        let r1 = f.rule(&["x"], &["y"], &[]);
        let r2 = f.rule(&["y"], &["x"], &[]);
        let p = SolverProgram { rules: vec![r1, r2], facts: vec![] };
        let sets = all(&p, SearchMode::Exhaustive);
        assert_eq!(sets.len(), 1);
        assert!(sets[0].atoms.is_empty());
    }

    #[test]
    fn weak_constraints_select_optima() {
        let mut f = Fixture::new();
        let choice = f.rule(&["x", "y", "z"], &[], &[]);
        let mut w1 = f.rule(&[], &[], &["x"]);
        w1.weak = Some((1, 1));
        let mut w2 = f.rule(&[], &["z"], &[]);
        w2.weak = Some((1, 1));
        let mut w3 = f.rule(&[], &["y"], &[]);
        w3.weak = Some((5, 0));
        let p = SolverProgram { rules: vec![choice, w1, w2, w3], facts: vec![] };
        let unopt = answer_sets(SolveRequest { optimize: false, ..SolveRequest::new(&p) }).unwrap();
        assert_eq!(unopt.len(), 3);
        let best = all(&p, SearchMode::Auto);
        assert_eq!(best.len(), 1);
        assert_eq!(f.names(&best[0]), ["x"]);
        assert_eq!(best[0].cost, Cost::from([(0, 0), (1, 0)]));
        assert_eq!(best[0].cost_line().unwrap(), "COST 0@1");
        let z = unopt.iter().find(|s| f.names(s) == ["z"]).unwrap();
        assert_eq!(z.cost, Cost::from([(0, 0), (1, 2)]));
        assert_eq!(z.cost_line().unwrap(), "COST 2@1");
    }

    #[test]
    fn cost_comparison_is_lexicographic_from_the_top() {
        let a = Cost::from([(1, 1), (0, 9)]);
        let b = Cost::from([(1, 2), (0, 0)]);
        assert_eq!(compare_cost(&a, &b), Ordering::Less);
        assert_eq!(compare_cost(&Cost::from([(2, 0)]), &Cost::new()), Ordering::Equal);
        let sets = vec![
            AnswerSet { atoms: vec![], cost: Cost::new() },
            AnswerSet { atoms: vec![AtomId(1)], cost: Cost::new() },
        ];
        assert_eq!(optimize(sets.clone()), sets);
        assert!(sets[0].cost_line().is_none());
    }

    #[test]
    fn caps_are_enforced() {
        let mut f = Fixture::new();
        let names: Vec<String> = (0..5).map(|i| format!("a{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let r = f.rule(&refs, &[], &[]);
        let p = SolverProgram { rules: vec![r], facts: vec![] };
        let req = SolveRequest { cap: 3, mode: SearchMode::Exhaustive, ..SolveRequest::new(&p) };
        assert_eq!(answer_sets(req), Err(SolveError::UniverseTooLarge { size: 5, cap: 3 }));
        let req = SolveRequest { cap: 3, mode: SearchMode::Guess, ..SolveRequest::new(&p) };
        assert_eq!(answer_sets(req), Err(SolveError::TooManyGuesses { size: 5, cap: 3 }));
        let req = SolveRequest { count: Count::First(2), ..SolveRequest::new(&p) };
        assert_eq!(answer_sets(req).unwrap().len(), 2);
    }

    #[test]
    fn empty_program_has_the_empty_answer_set() {
        let p = SolverProgram::default();
        let sets = all(&p, SearchMode::Auto);
        assert_eq!(sets, vec![AnswerSet { atoms: vec![], cost: Cost::new() }]);
    }
}
