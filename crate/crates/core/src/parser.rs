//! Reader for program and fact files.
//!
//! Accepted fragment: identifiers `[a-z][A-Za-z0-9_]*`, variables
//! `[A-Z][A-Za-z0-9_]*`, integers with an optional leading `-`, disjunctive
//! heads (`|`), `:-` rules and constraints, `not` for default negation and
//! weak constraints `:~ body. [w@l]`. `%` starts a line comment unless it is
//! the `%@` prefix of an annotation. Integer intervals `l..u` are accepted in
//! facts only and expanded on the spot.

use std::fmt;

use crate::error::ParseError;
use crate::model::{Atom, Constant, GroundAtom, Literal, Predicate, Rule, RuleId, RuleKind, Term};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Annotation {
    /// `%@global_forget_predicate(p/n).`
    GlobalForgetPredicate(Predicate),
    /// `%@rule_forget().`, bound to the rule that follows it.
    RuleForget(RuleId),
}

/// Result of parsing one file. Annotations are normalised: predicate
/// annotations first in source order, then rule annotations by rule id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedUnit {
    pub rules: Vec<Rule>,
    pub facts: Vec<GroundAtom>,
    pub annotations: Vec<Annotation>,
}

impl ParsedUnit {
    /// True if the unit holds anything besides plain facts.
    pub fn has_rules(&self) -> bool {
        !self.rules.is_empty() || !self.annotations.is_empty()
    }
}

impl fmt::Display for ParsedUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.annotations {
            if let Annotation::GlobalForgetPredicate(p) = a {
                writeln!(f, "%@global_forget_predicate({p}).")?;
            }
        }
        for r in &self.rules {
            if self.annotations.contains(&Annotation::RuleForget(r.id)) {
                writeln!(f, "%@rule_forget().")?;
            }
            writeln!(f, "{r}")?;
        }
        for fact in &self.facts {
            writeln!(f, "{fact}.")?;
        }
        Ok(())
    }
}

/// The fixed program: accumulated rules, fixed facts and annotations of all
/// rule files loaded before the first shot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub rules: Vec<Rule>,
    pub facts: Vec<GroundAtom>,
    pub annotations: Vec<Annotation>,
}

impl Program {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut p = Program::new();
        p.extend(parse_program(text)?);
        Ok(p)
    }

    /// Appends a unit, renumbering its rules after the ones already present.
    pub fn extend(&mut self, unit: ParsedUnit) {
        let offset = self.rules.len();
        self.rules.extend(unit.rules.into_iter().map(|mut r| {
            r.id += offset;
            r
        }));
        for f in unit.facts {
            if !self.facts.contains(&f) {
                self.facts.push(f);
            }
        }
        self.annotations
            .extend(unit.annotations.into_iter().map(|a| match a {
                Annotation::RuleForget(r) => Annotation::RuleForget(r + offset),
                g => g,
            }));
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty() && self.facts.is_empty()
    }

    /// Predicates occurring in any rule head or body.
    pub fn rule_predicates(&self) -> Vec<Predicate> {
        let mut preds: Vec<Predicate> = self
            .rules
            .iter()
            .flat_map(|r| r.head.iter().chain(r.body.iter().map(|l| &l.atom)))
            .map(Atom::signature)
            .collect();
        preds.sort();
        preds.dedup();
        preds
    }

    pub fn has_weak_constraints(&self) -> bool {
        self.rules
            .iter()
            .any(|r| matches!(r.kind, RuleKind::Weak { .. }))
    }
}

/// Returns the variables of `rule` that occur in no positive body literal.
pub fn check_safety(rule: &Rule) -> Result<(), Vec<String>> {
    let bound: Vec<&str> = rule.positive_body().flat_map(Atom::variables).collect();
    let unsafe_vars: Vec<String> = rule
        .variables()
        .into_iter()
        .filter(|v| !bound.contains(v))
        .map(str::to_string)
        .collect();
    if unsafe_vars.is_empty() {
        Ok(())
    } else {
        Err(unsafe_vars)
    }
}

pub fn parse_program(text: &str) -> Result<ParsedUnit, ParseError> {
    Parser::new(text)?.program()
}

/// Parses a file made of facts only.
pub fn parse_facts(text: &str) -> Result<Vec<GroundAtom>, ParseError> {
    let mut parser = Parser::new(text)?;
    let mut facts = Vec::new();
    while !parser.at(&Tok::Eof) {
        let (line, column) = parser.pos();
        match parser.statement()? {
            Statement::Fact(fs) => facts.extend(fs),
            Statement::Rule(r) => {
                return Err(ParseError::NotAFact {
                    line,
                    column,
                    message: format!("`{r}` is not a fact"),
                })
            }
            Statement::Annotation(_) => {
                return Err(ParseError::NotAFact {
                    line,
                    column,
                    message: "annotations are not allowed in fact files".into(),
                })
            }
        }
    }
    Ok(facts)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    LParen,
    RParen,
    Comma,
    Dot,
    DotDot,
    Pipe,
    If,
    WeakIf,
    LBracket,
    RBracket,
    At,
    Slash,
    Annot,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Var(s) => write!(f, "`{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::DotDot => f.write_str("`..`"),
            Tok::Pipe => f.write_str("`|`"),
            Tok::If => f.write_str("`:-`"),
            Tok::WeakIf => f.write_str("`:~`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::At => f.write_str("`@`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Annot => f.write_str("`%@`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };

    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let peek = chars.get(i + 1).copied();
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, c);
            continue;
        }
        if c == '%' {
            if peek == Some('@') {
                out.push(Spanned {
                    tok: Tok::Annot,
                    line: l0,
                    column: c0,
                });
                i += 2;
                col += 2;
            } else if peek == Some('*') {
                i += 2;
                col += 2;
                loop {
                    if i >= chars.len() {
                        return Err(syntax(l0, c0, "unterminated block comment"));
                    }
                    if chars[i] == '*' && chars.get(i + 1) == Some(&'%') {
                        i += 2;
                        col += 2;
                        break;
                    }
                    let ch = chars[i];
                    advance(&mut i, &mut line, &mut col, ch);
                }
            } else {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            continue;
        }
        let simple = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            '|' => Some(Tok::Pipe),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '@' => Some(Tok::At),
            '/' => Some(Tok::Slash),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Spanned {
                tok,
                line: l0,
                column: c0,
            });
            i += 1;
            col += 1;
            continue;
        }
        if c == '.' {
            let tok = if peek == Some('.') { Tok::DotDot } else { Tok::Dot };
            let n = if tok == Tok::DotDot { 2 } else { 1 };
            out.push(Spanned {
                tok,
                line: l0,
                column: c0,
            });
            i += n;
            col += n;
            continue;
        }
        if c == ':' {
            let tok = match peek {
                Some('-') => Tok::If,
                Some('~') => Tok::WeakIf,
                _ => return Err(syntax(l0, c0, "expected `:-` or `:~`")),
            };
            out.push(Spanned {
                tok,
                line: l0,
                column: c0,
            });
            i += 2;
            col += 2;
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && peek.is_some_and(|p| p.is_ascii_digit())) {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            let v = s
                .parse::<i64>()
                .map_err(|_| syntax(l0, c0, format!("integer `{s}` out of range")))?;
            out.push(Spanned {
                tok: Tok::Int(v),
                line: l0,
                column: c0,
            });
            continue;
        }
        if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = if c.is_ascii_uppercase() {
                Tok::Var(s)
            } else {
                Tok::Ident(s)
            };
            out.push(Spanned {
                tok,
                line: l0,
                column: c0,
            });
            continue;
        }
        return Err(syntax(l0, c0, format!("unexpected character `{c}`")));
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

#[derive(Debug, Clone)]
enum PTerm {
    Term(Term),
    Interval(i64, i64),
}

#[derive(Debug, Clone)]
struct PAtom {
    predicate: String,
    terms: Vec<PTerm>,
    line: usize,
    column: usize,
}

enum Statement {
    Rule(Rule),
    Fact(Vec<GroundAtom>),
    Annotation(PendingAnnotation),
}

enum PendingAnnotation {
    Global(Predicate),
    RuleForget,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn pos(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.column)
    }

    fn at(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if self.at(&t) {
            self.bump();
            Ok(())
        } else {
            let (l, c) = self.pos();
            Err(syntax(l, c, format!("expected {t}, found {}", self.peek())))
        }
    }

    fn program(&mut self) -> Result<ParsedUnit, ParseError> {
        let mut unit = ParsedUnit::default();
        let mut globals = Vec::new();
        let mut rule_forgets = Vec::new();
        let mut pending_forget: Option<(usize, usize)> = None;
        while !self.at(&Tok::Eof) {
            let (line, column) = self.pos();
            match self.statement()? {
                Statement::Annotation(PendingAnnotation::Global(p)) => {
                    globals.push(Annotation::GlobalForgetPredicate(p))
                }
                Statement::Annotation(PendingAnnotation::RuleForget) => {
                    if let Some((l, c)) = pending_forget {
                        return Err(ParseError::DanglingRuleForget { line: l, column: c });
                    }
                    pending_forget = Some((line, column));
                }
                Statement::Rule(mut r) => {
                    r.id = unit.rules.len();
                    if pending_forget.take().is_some() {
                        rule_forgets.push(Annotation::RuleForget(r.id));
                    }
                    unit.rules.push(r);
                }
                Statement::Fact(fs) => {
                    if let Some((l, c)) = pending_forget {
                        return Err(ParseError::DanglingRuleForget { line: l, column: c });
                    }
                    for f in fs {
                        if !unit.facts.contains(&f) {
                            unit.facts.push(f);
                        }
                    }
                }
            }
        }
        if let Some((line, column)) = pending_forget {
            return Err(ParseError::DanglingRuleForget { line, column });
        }
        unit.annotations = globals;
        unit.annotations.extend(rule_forgets);
        Ok(unit)
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        let (line, column) = self.pos();
        match self.peek().clone() {
            Tok::Annot => {
                self.bump();
                self.annotation().map(Statement::Annotation)
            }
            Tok::WeakIf => {
                self.bump();
                let body = self.body()?;
                self.expect(Tok::Dot)?;
                self.expect(Tok::LBracket)?;
                let weight = self.int()?;
                let level = if self.at(&Tok::At) {
                    self.bump();
                    self.int()?
                } else {
                    0
                };
                self.expect(Tok::RBracket)?;
                if weight < 0 {
                    return Err(syntax(line, column, "negative weights are not supported"));
                }
                self.finish_rule(Vec::new(), body, RuleKind::Weak { weight, level }, line, column)
            }
            Tok::If => {
                self.bump();
                let body = if self.at(&Tok::Dot) {
                    Vec::new()
                } else {
                    self.body()?
                };
                self.expect(Tok::Dot)?;
                self.finish_rule(Vec::new(), body, RuleKind::Constraint, line, column)
            }
            Tok::Ident(_) => {
                let mut head = vec![self.atom()?];
                while self.at(&Tok::Pipe) {
                    self.bump();
                    head.push(self.atom()?);
                }
                let body = if self.at(&Tok::If) {
                    self.bump();
                    if self.at(&Tok::Dot) {
                        Vec::new()
                    } else {
                        self.body()?
                    }
                } else {
                    Vec::new()
                };
                self.expect(Tok::Dot)?;
                if head.len() == 1 && body.is_empty() {
                    let atom = head.pop().expect("one head atom");
                    return self.fact(atom).map(Statement::Fact);
                }
                self.finish_rule(head, body, RuleKind::Normal, line, column)
            }
            other => Err(syntax(line, column, format!("unexpected {other}"))),
        }
    }

    fn finish_rule(
        &self,
        head: Vec<PAtom>,
        body: Vec<(PAtom, bool)>,
        kind: RuleKind,
        line: usize,
        column: usize,
    ) -> Result<Statement, ParseError> {
        let head = head
            .into_iter()
            .map(plain_atom)
            .collect::<Result<Vec<_>, _>>()?;
        let body = body
            .into_iter()
            .map(|(a, negated)| {
                Ok(Literal {
                    atom: plain_atom(a)?,
                    negated,
                })
            })
            .collect::<Result<Vec<_>, ParseError>>()?;
        let rule = Rule {
            id: 0,
            head,
            body,
            kind,
        };
        if let Err(variables) = check_safety(&rule) {
            return Err(ParseError::Unsafe {
                line,
                column,
                rule: rule.to_string(),
                variables,
            });
        }
        Ok(Statement::Rule(rule))
    }

    fn fact(&self, atom: PAtom) -> Result<Vec<GroundAtom>, ParseError> {
        let mut rows: Vec<Vec<Constant>> = vec![Vec::new()];
        for t in &atom.terms {
            match t {
                PTerm::Term(Term::Const(c)) => rows.iter_mut().for_each(|r| r.push(c.clone())),
                PTerm::Term(Term::Var(v)) => {
                    return Err(ParseError::Unsafe {
                        line: atom.line,
                        column: atom.column,
                        rule: format!("{}.", render_patom(&atom)),
                        variables: vec![v.clone()],
                    })
                }
                &PTerm::Interval(lower, upper) => {
                    if lower > upper {
                        return Err(ParseError::EmptyInterval {
                            line: atom.line,
                            column: atom.column,
                            lower,
                            upper,
                        });
                    }
                    rows = rows
                        .into_iter()
                        .flat_map(|r| {
                            (lower..=upper).map(move |v| {
                                let mut r = r.clone();
                                r.push(Constant::Int(v));
                                r
                            })
                        })
                        .collect();
                }
            }
        }
        Ok(rows
            .into_iter()
            .map(|args| GroundAtom::new(atom.predicate.clone(), args))
            .collect())
    }

    fn annotation(&mut self) -> Result<PendingAnnotation, ParseError> {
        let (line, column) = self.pos();
        let name = match self.bump() {
            Tok::Ident(s) => s,
            t => return Err(syntax(line, column, format!("expected annotation name, found {t}"))),
        };
        self.expect(Tok::LParen)?;
        let out = match name.as_str() {
            "global_forget_predicate" => {
                let (l, c) = self.pos();
                let pred = match self.bump() {
                    Tok::Ident(s) => s,
                    t => return Err(syntax(l, c, format!("expected predicate name, found {t}"))),
                };
                self.expect(Tok::Slash)?;
                let (l, c) = self.pos();
                let arity = self.int()?;
                if arity < 0 {
                    return Err(syntax(l, c, "arity must be non-negative"));
                }
                PendingAnnotation::Global(Predicate::new(pred, arity as usize))
            }
            "rule_forget" => PendingAnnotation::RuleForget,
            other => {
                return Err(syntax(line, column, format!("unknown annotation `{other}`")));
            }
        };
        self.expect(Tok::RParen)?;
        self.expect(Tok::Dot)?;
        Ok(out)
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        let (l, c) = self.pos();
        match self.bump() {
            Tok::Int(i) => Ok(i),
            t => Err(syntax(l, c, format!("expected integer, found {t}"))),
        }
    }

    fn body(&mut self) -> Result<Vec<(PAtom, bool)>, ParseError> {
        let mut out = vec![self.literal()?];
        while self.at(&Tok::Comma) {
            self.bump();
            out.push(self.literal()?);
        }
        Ok(out)
    }

    fn literal(&mut self) -> Result<(PAtom, bool), ParseError> {
        let is_not = matches!(self.peek(), Tok::Ident(s) if s == "not")
            && matches!(self.toks.get(self.pos + 1).map(|t| &t.tok), Some(Tok::Ident(_)));
        if is_not {
            self.bump();
        }
        Ok((self.atom()?, is_not))
    }

    fn atom(&mut self) -> Result<PAtom, ParseError> {
        let (line, column) = self.pos();
        let predicate = match self.bump() {
            Tok::Ident(s) => s,
            t => return Err(syntax(line, column, format!("expected atom, found {t}"))),
        };
        let mut terms = Vec::new();
        if self.at(&Tok::LParen) {
            self.bump();
            terms.push(self.term()?);
            while self.at(&Tok::Comma) {
                self.bump();
                terms.push(self.term()?);
            }
            self.expect(Tok::RParen)?;
        }
        Ok(PAtom {
            predicate,
            terms,
            line,
            column,
        })
    }

    fn term(&mut self) -> Result<PTerm, ParseError> {
        let (l, c) = self.pos();
        match self.bump() {
            Tok::Var(v) => Ok(PTerm::Term(Term::Var(v))),
            Tok::Ident(s) => Ok(PTerm::Term(Term::sym(s))),
            Tok::Int(i) => {
                if self.at(&Tok::DotDot) {
                    self.bump();
                    let u = self.int()?;
                    Ok(PTerm::Interval(i, u))
                } else {
                    Ok(PTerm::Term(Term::int(i)))
                }
            }
            t => Err(syntax(l, c, format!("expected term, found {t}"))),
        }
    }
}

fn plain_atom(a: PAtom) -> Result<Atom, ParseError> {
    let terms = a
        .terms
        .into_iter()
        .map(|t| match t {
            PTerm::Term(t) => Ok(t),
            PTerm::Interval(..) => Err(syntax(
                a.line,
                a.column,
                "intervals are only allowed in facts",
            )),
        })
        .collect::<Result<_, _>>()?;
    Ok(Atom::new(a.predicate, terms))
}

fn render_patom(a: &PAtom) -> String {
    let terms: Vec<String> = a
        .terms
        .iter()
        .map(|t| match t {
            PTerm::Term(t) => t.to_string(),
            PTerm::Interval(l, u) => format!("{l}..{u}"),
        })
        .collect();
    if terms.is_empty() {
        a.predicate.clone()
    } else {
        format!("{}({})", a.predicate, terms.join(","))
    }
}
