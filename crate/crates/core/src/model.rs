//! Terms, atoms, rules and their ground counterparts.
//!
//! Ground atoms are interned into an [`AtomTable`] and referred to by dense
//! [`AtomId`]s everywhere below the parser. Ground rules keep their complete
//! body together with per-literal simplification metadata, so a tailored rule
//! can always be turned back into the instance it came from.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use indexmap::IndexSet;

use crate::error::ModelError;

/// A constant: integer or lowercase symbol. Integers order before symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constant {
    Int(i64),
    Sym(String),
}

impl Constant {
    pub fn sym(s: impl Into<String>) -> Self {
        Constant::Sym(s.into())
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Int(i) => write!(f, "{i}"),
            Constant::Sym(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(Constant),
    Var(String),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn sym(name: impl Into<String>) -> Self {
        Term::Const(Constant::Sym(name.into()))
    }

    pub fn int(i: i64) -> Self {
        Term::Const(Constant::Int(i))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => c.fmt(f),
            Term::Var(v) => f.write_str(v),
        }
    }
}

/// Predicate signature `name/arity`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    pub name: String,
    pub arity: usize,
}

impl Predicate {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        Predicate {
            name: name.into(),
            arity,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub terms: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, terms: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            terms,
        }
    }

    pub fn arity(&self) -> usize {
        self.terms.len()
    }

    pub fn signature(&self) -> Predicate {
        Predicate::new(self.predicate.clone(), self.terms.len())
    }

    pub fn is_ground(&self) -> bool {
        self.terms.iter().all(|t| !t.is_var())
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }

    /// Converts to a [`GroundAtom`], failing if any term is a variable.
    pub fn to_ground(&self) -> Result<GroundAtom, ModelError> {
        let mut args = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            match t {
                Term::Const(c) => args.push(c.clone()),
                Term::Var(v) => {
                    return Err(ModelError::NonGround {
                        atom: self.to_string(),
                        variable: v.clone(),
                    })
                }
            }
        }
        Ok(GroundAtom::new(self.predicate.clone(), args))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.terms.is_empty() {
            f.write_str("(")?;
            for (i, t) in self.terms.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{t}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// A variable-free atom. Ordering is by predicate name, then arguments,
/// which is also the order answer sets are printed in.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<Constant>,
}

impl GroundAtom {
    pub fn new(predicate: impl Into<String>, args: Vec<Constant>) -> Self {
        GroundAtom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn signature(&self) -> Predicate {
        Predicate::new(self.predicate.clone(), self.args.len())
    }

    pub fn to_atom(&self) -> Atom {
        Atom::new(
            self.predicate.clone(),
            self.args.iter().cloned().map(Term::Const).collect(),
        )
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, c) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{c}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomId(pub u32);

impl AtomId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredId(pub u32);

/// Append-only interning table for ground atoms.
#[derive(Debug, Default, Clone)]
pub struct AtomTable {
    atoms: Vec<GroundAtom>,
    preds_of: Vec<PredId>,
    index: HashMap<GroundAtom, AtomId>,
    predicates: IndexSet<Predicate>,
}

impl AtomTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, atom: &Atom) -> Result<AtomId, ModelError> {
        Ok(self.intern_ground(atom.to_ground()?))
    }

    pub fn intern_ground(&mut self, atom: GroundAtom) -> AtomId {
        if let Some(&id) = self.index.get(&atom) {
            return id;
        }
        let id = AtomId(self.atoms.len() as u32);
        let pred = self.predicate_id(&atom.signature());
        self.atoms.push(atom.clone());
        self.preds_of.push(pred);
        self.index.insert(atom, id);
        id
    }

    /// Interns the signature on first use.
    pub fn predicate_id(&mut self, pred: &Predicate) -> PredId {
        if let Some(i) = self.predicates.get_index_of(pred) {
            return PredId(i as u32);
        }
        let (i, _) = self.predicates.insert_full(pred.clone());
        PredId(i as u32)
    }

    pub fn find_predicate(&self, pred: &Predicate) -> Option<PredId> {
        self.predicates.get_index_of(pred).map(|i| PredId(i as u32))
    }

    pub fn predicate(&self, id: PredId) -> &Predicate {
        &self.predicates[id.0 as usize]
    }

    pub fn get(&self, atom: &GroundAtom) -> Option<AtomId> {
        self.index.get(atom).copied()
    }

    pub fn resolve(&self, id: AtomId) -> &GroundAtom {
        &self.atoms[id.index()]
    }

    pub fn pred_of(&self, id: AtomId) -> PredId {
        self.preds_of[id.index()]
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub atom: Atom,
    pub negated: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal {
            atom,
            negated: false,
        }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal {
            atom,
            negated: true,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("not ")?;
        }
        self.atom.fmt(f)
    }
}

/// Index of a rule within the fixed program.
pub type RuleId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleKind {
    Normal,
    Constraint,
    Weak { weight: i64, level: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub id: RuleId,
    pub head: Vec<Atom>,
    pub body: Vec<Literal>,
    pub kind: RuleKind,
}

impl Rule {
    pub fn variables(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        let atoms = self.head.iter().chain(self.body.iter().map(|l| &l.atom));
        for v in atoms.flat_map(Atom::variables) {
            if !seen.contains(&v) {
                seen.push(v);
            }
        }
        seen
    }

    pub fn is_ground(&self) -> bool {
        self.head.iter().all(Atom::is_ground) && self.body.iter().all(|l| l.atom.is_ground())
    }

    pub fn positive_body(&self) -> impl Iterator<Item = &Atom> {
        self.body.iter().filter(|l| !l.negated).map(|l| &l.atom)
    }
}

fn write_body(f: &mut fmt::Formatter<'_>, body: &[Literal]) -> fmt::Result {
    for (i, l) in body.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{l}")?;
    }
    Ok(())
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            RuleKind::Weak { weight, level } => {
                f.write_str(":~ ")?;
                write_body(f, &self.body)?;
                write!(f, ". [{weight}@{level}]")
            }
            RuleKind::Constraint => {
                f.write_str(":-")?;
                if !self.body.is_empty() {
                    f.write_str(" ")?;
                    write_body(f, &self.body)?;
                }
                f.write_str(".")
            }
            RuleKind::Normal => {
                for (i, h) in self.head.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" | ")?;
                    }
                    write!(f, "{h}")?;
                }
                if !self.body.is_empty() {
                    f.write_str(" :- ")?;
                    write_body(f, &self.body)?;
                }
                f.write_str(".")
            }
        }
    }
}

/// Variable binding; ordered so that printing is stable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Substitution(BTreeMap<String, Constant>);

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, var: impl Into<String>, value: Constant) -> &mut Self {
        self.0.insert(var.into(), value);
        self
    }

    pub fn get(&self, var: &str) -> Option<&Constant> {
        self.0.get(var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<(S, Constant)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (S, Constant)>>(iter: I) -> Self {
        Substitution(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

fn substitute_atom(atom: &Atom, s: &Substitution) -> Result<Atom, ModelError> {
    let terms = atom
        .terms
        .iter()
        .map(|t| match t {
            Term::Var(v) => s
                .get(v)
                .cloned()
                .map(Term::Const)
                .ok_or_else(|| ModelError::UnboundVariable(v.clone())),
            c => Ok(c.clone()),
        })
        .collect::<Result<_, _>>()?;
    Ok(Atom::new(atom.predicate.clone(), terms))
}

/// Replaces every variable of `rule` by its binding in `s`.
pub fn apply_substitution(rule: &Rule, s: &Substitution) -> Result<Rule, ModelError> {
    let head = rule
        .head
        .iter()
        .map(|a| substitute_atom(a, s))
        .collect::<Result<_, _>>()?;
    let body = rule
        .body
        .iter()
        .map(|l| {
            Ok(Literal {
                atom: substitute_atom(&l.atom, s)?,
                negated: l.negated,
            })
        })
        .collect::<Result<_, ModelError>>()?;
    Ok(Rule {
        id: rule.id,
        head,
        body,
        kind: rule.kind,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimplKind {
    CertainlyTruePositive,
    CertainlyFalseNegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LiteralState {
    Active,
    Simplified { reason: AtomId, kind: SimplKind },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroundLiteral {
    pub atom: AtomId,
    pub negated: bool,
    pub state: LiteralState,
}

impl GroundLiteral {
    pub fn new(atom: AtomId, negated: bool) -> Self {
        GroundLiteral {
            atom,
            negated,
            state: LiteralState::Active,
        }
    }

    pub fn is_active(&self) -> bool {
        self.state == LiteralState::Active
    }
}

/// Identity of a ground rule for deduplication; simplification state is
/// deliberately not part of it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RuleKey {
    pub origin: RuleId,
    pub head: Vec<AtomId>,
    pub body: Vec<(AtomId, bool)>,
}

/// A stored ground instance with its tailoring metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundRule {
    pub origin: RuleId,
    pub kind: RuleKind,
    pub head: Vec<AtomId>,
    pub body: Vec<GroundLiteral>,
    /// Set when the rule is deleted; holds the certainly-true atom that
    /// falsified one of its negative literals.
    pub deleted: Option<AtomId>,
    pub generation: u32,
}

impl GroundRule {
    pub fn key(&self) -> RuleKey {
        RuleKey {
            origin: self.origin,
            head: self.head.clone(),
            body: self.body.iter().map(|l| (l.atom, l.negated)).collect(),
        }
    }

    pub fn is_deleted(&self) -> bool {
        self.deleted.is_some()
    }

    pub fn is_tailored(&self) -> bool {
        self.deleted.is_some() || self.body.iter().any(|l| !l.is_active())
    }

    pub fn active_body(&self) -> impl Iterator<Item = &GroundLiteral> {
        self.body.iter().filter(|l| l.is_active())
    }

    pub fn mentions(&self, atom: AtomId) -> bool {
        self.head.contains(&atom) || self.body.iter().any(|l| l.atom == atom)
    }

    /// Renders the rule with struck literals omitted (or the full rule when
    /// `full` is set).
    pub fn render(&self, table: &AtomTable, full: bool) -> String {
        let body: Vec<String> = self
            .body
            .iter()
            .filter(|l| full || l.is_active())
            .map(|l| {
                let a = table.resolve(l.atom);
                if l.negated {
                    format!("not {a}")
                } else {
                    a.to_string()
                }
            })
            .collect();
        let head: Vec<String> = self
            .head
            .iter()
            .map(|&h| table.resolve(h).to_string())
            .collect();
        render_rule(&head, &body, self.kind)
    }

    /// Full rule with struck literals in brackets and a `[deleted: a]`
    /// prefix for deleted rules.
    pub fn render_annotated(&self, table: &AtomTable) -> String {
        let body: Vec<String> = self
            .body
            .iter()
            .map(|l| {
                let a = table.resolve(l.atom);
                let text = if l.negated {
                    format!("not {a}")
                } else {
                    a.to_string()
                };
                if l.is_active() {
                    text
                } else {
                    format!("[{text}]")
                }
            })
            .collect();
        let head: Vec<String> = self
            .head
            .iter()
            .map(|&h| table.resolve(h).to_string())
            .collect();
        let text = render_rule(&head, &body, self.kind);
        match self.deleted {
            Some(reason) => format!("[deleted: {}] {text}", table.resolve(reason)),
            None => text,
        }
    }
}

pub(crate) fn render_rule(head: &[String], body: &[String], kind: RuleKind) -> String {
    let body = body.join(", ");
    match kind {
        RuleKind::Weak { weight, level } => format!(":~ {body}. [{weight}@{level}]"),
        RuleKind::Constraint if body.is_empty() => ":-.".to_string(),
        RuleKind::Constraint => format!(":- {body}."),
        RuleKind::Normal if body.is_empty() => format!("{}.", head.join(" | ")),
        RuleKind::Normal => format!("{} :- {body}.", head.join(" | ")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ga(p: &str, args: &[i64]) -> GroundAtom {
        GroundAtom::new(p, args.iter().map(|&i| Constant::Int(i)).collect())
    }

    fn var(n: &str) -> Term {
        Term::var(n)
    }

    // r(X,Y) :- e(X,Y), not q(X).
    fn rule_a() -> Rule {
        Rule {
            id: 0,
            head: vec![Atom::new("r", vec![var("X"), var("Y")])],
            body: vec![
                Literal::pos(Atom::new("e", vec![var("X"), var("Y")])),
                Literal::neg(Atom::new("q", vec![var("X")])),
            ],
            kind: RuleKind::Normal,
        }
    }

    // r(X,Z) | s(X,Z) :- e(X,Y), r(Y,Z).
    fn rule_b() -> Rule {
        Rule {
            id: 1,
            head: vec![
                Atom::new("r", vec![var("X"), var("Z")]),
                Atom::new("s", vec![var("X"), var("Z")]),
            ],
            body: vec![
                Literal::pos(Atom::new("e", vec![var("X"), var("Y")])),
                Literal::pos(Atom::new("r", vec![var("Y"), var("Z")])),
            ],
            kind: RuleKind::Normal,
        }
    }

    #[test]
    fn interning_is_idempotent_and_injective() {
        let mut t = AtomTable::new();
        let a = t.intern_ground(ga("e", &[3, 1]));
        let b = t.intern_ground(ga("e", &[3, 1]));
        let c = t.intern_ground(ga("e", &[1, 2]));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn example_one_shot_one_atoms_get_seven_ids() {
        let mut t = AtomTable::new();
        let atoms = [
            ga("e", &[3, 1]),
            ga("e", &[1, 2]),
            ga("q", &[3]),
            ga("r", &[1, 2]),
            ga("r", &[3, 2]),
            ga("s", &[3, 2]),
            ga("r", &[3, 1]),
        ];
        for a in &atoms {
            t.intern_ground(a.clone());
        }
        // second pass must not grow the table
        for a in &atoms {
            t.intern_ground(a.clone());
        }
        assert_eq!(t.len(), 7);
    }

    #[test]
    fn interning_non_ground_atom_fails() {
        let mut t = AtomTable::new();
        let err = t.intern(&Atom::new("e", vec![var("X"), Term::int(1)]));
        assert!(matches!(err, Err(ModelError::NonGround { .. })));
        assert!(t.is_empty());
    }

    #[test]
    fn symbols_and_integers_are_distinct_constants() {
        let mut t = AtomTable::new();
        let a = t.intern_ground(GroundAtom::new("p", vec![Constant::Int(1)]));
        let b = t.intern_ground(GroundAtom::new("p", vec![Constant::sym("a")]));
        let c = t.intern_ground(GroundAtom::new("p", vec![Constant::sym("1")]));
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn substitution_on_rule_a() {
        let s: Substitution = [("X", Constant::Int(1)), ("Y", Constant::Int(2))]
            .into_iter()
            .collect();
        let g = apply_substitution(&rule_a(), &s).unwrap();
        assert_eq!(g.to_string(), "r(1,2) :- e(1,2), not q(1).");
    }

    #[test]
    fn substitution_on_rule_b() {
        let s: Substitution = [
            ("X", Constant::Int(3)),
            ("Y", Constant::Int(1)),
            ("Z", Constant::Int(2)),
        ]
        .into_iter()
        .collect();
        let g = apply_substitution(&rule_b(), &s).unwrap();
        assert_eq!(g.to_string(), "r(3,2) | s(3,2) :- e(3,1), r(1,2).");
    }

    #[test]
    fn substitution_identity_on_ground_rule() {
        let r = Rule {
            id: 4,
            head: vec![Atom::new("a", vec![])],
            body: vec![Literal::neg(Atom::new("b", vec![Term::sym("c")]))],
            kind: RuleKind::Normal,
        };
        assert_eq!(apply_substitution(&r, &Substitution::new()).unwrap(), r);
    }

    #[test]
    fn substitution_reports_unbound_variable() {
        let s: Substitution = [("X", Constant::Int(1))].into_iter().collect();
        match apply_substitution(&rule_a(), &s) {
            Err(ModelError::UnboundVariable(v)) => assert_eq!(v, "Y"),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn arb_constant() -> impl Strategy<Value = Constant> {
        prop_oneof![
            (-5i64..5).prop_map(Constant::Int),
            "[a-d]".prop_map(Constant::Sym),
        ]
    }

    proptest! {
        #[test]
        fn intern_resolve_round_trip(pred in "[p-s]", args in prop::collection::vec(arb_constant(), 0..3)) {
            let mut t = AtomTable::new();
            let a = GroundAtom::new(pred, args);
            let id = t.intern_ground(a.clone());
            prop_assert_eq!(t.resolve(id), &a);
            prop_assert_eq!(t.get(&a), Some(id));
        }

        #[test]
        fn substitution_preserves_shape(x in arb_constant(), y in arb_constant(), z in arb_constant()) {
            let s: Substitution = [("X", x), ("Y", y), ("Z", z)].into_iter().collect();
            for rule in [rule_a(), rule_b()] {
                let g = apply_substitution(&rule, &s).unwrap();
                prop_assert!(g.is_ground());
                prop_assert_eq!(g.head.len(), rule.head.len());
                prop_assert_eq!(g.body.len(), rule.body.len());
                for (l, m) in rule.body.iter().zip(&g.body) {
                    prop_assert_eq!(l.negated, m.negated);
                    prop_assert_eq!(&l.atom.predicate, &m.atom.predicate);
                    prop_assert_eq!(l.atom.arity(), m.atom.arity());
                }
            }
        }
    }
}
