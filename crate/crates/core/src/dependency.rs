//! Predicate dependency graph and the component order used for grounding.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use crate::model::{Predicate, RuleId, RuleKind};
use crate::parser::Program;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Positive,
    Negative,
}

/// Edges run from body predicates to head predicates. Head predicates of a
/// disjunctive rule are additionally linked to each other, which places them
/// in one component.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredicateGraph {
    pub nodes: BTreeSet<Predicate>,
    pub edges: BTreeSet<(Predicate, Predicate, Polarity)>,
    pub head_links: BTreeSet<(Predicate, Predicate)>,
}

pub fn build_graph(program: &Program) -> PredicateGraph {
    let mut g = PredicateGraph::default();
    for f in &program.facts {
        g.nodes.insert(f.signature());
    }
    for rule in &program.rules {
        let heads: Vec<Predicate> = rule.head.iter().map(|a| a.signature()).collect();
        for a in rule.head.iter().chain(rule.body.iter().map(|l| &l.atom)) {
            g.nodes.insert(a.signature());
        }
        for lit in &rule.body {
            let polarity = if lit.negated {
                Polarity::Negative
            } else {
                Polarity::Positive
            };
            for h in &heads {
                g.edges.insert((lit.atom.signature(), h.clone(), polarity));
            }
        }
        for a in &heads {
            for b in &heads {
                if a != b {
                    g.head_links.insert((a.clone(), b.clone()));
                }
            }
        }
    }
    g
}

/// Components in evaluation order, with the rules each one defines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ComponentOrder {
    pub components: Vec<Vec<Predicate>>,
    pub rules: Vec<Vec<RuleId>>,
    /// Strong and weak constraints; grounded after every component.
    pub constraints: Vec<RuleId>,
}

impl ComponentOrder {
    pub fn for_program(program: &Program) -> Self {
        let mut order = condense(&build_graph(program));
        order.assign_rules(program);
        order
    }

    pub fn component_of(&self, pred: &Predicate) -> Option<usize> {
        self.components.iter().position(|c| c.contains(pred))
    }

    /// Assigns each rule with a head to the earliest component holding one
    /// of its head predicates.
    pub fn assign_rules(&mut self, program: &Program) {
        self.rules = vec![Vec::new(); self.components.len()];
        self.constraints.clear();
        for rule in &program.rules {
            if rule.head.is_empty() || matches!(rule.kind, RuleKind::Weak { .. }) {
                self.constraints.push(rule.id);
                continue;
            }
            let comp = rule
                .head
                .iter()
                .filter_map(|h| self.component_of(&h.signature()))
                .min()
                .expect("head predicates are graph nodes");
            self.rules[comp].push(rule.id);
        }
    }
}

impl fmt::Display for ComponentOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for comp in &self.components {
            let names: Vec<String> = comp.iter().map(Predicate::to_string).collect();
            writeln!(f, "{{{}}}", names.join(", "))?;
        }
        Ok(())
    }
}

/// Tarjan's SCC followed by a topological sort of the condensation. Among
/// components that are ready at the same time, the one whose smallest
/// predicate sorts first goes first.
pub fn condense(graph: &PredicateGraph) -> ComponentOrder {
    let nodes: Vec<&Predicate> = graph.nodes.iter().collect();
    let index_of: BTreeMap<&Predicate, usize> =
        nodes.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nodes.len()];
    for (from, to, _) in &graph.edges {
        succ[index_of[from]].insert(index_of[to]);
    }
    for (from, to) in &graph.head_links {
        succ[index_of[from]].insert(index_of[to]);
    }
    let succ: Vec<Vec<usize>> = succ.into_iter().map(|s| s.into_iter().collect()).collect();

    let comp_of = tarjan(&succ);
    let n_comps = comp_of.iter().copied().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<Predicate>> = vec![Vec::new(); n_comps];
    for (node, &c) in comp_of.iter().enumerate() {
        members[c].push(nodes[node].clone());
    }
    // nodes are visited in sorted order, so members are sorted already

    let mut comp_succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_comps];
    let mut indegree = vec![0usize; n_comps];
    for (u, outs) in succ.iter().enumerate() {
        for &v in outs {
            let (cu, cv) = (comp_of[u], comp_of[v]);
            if cu != cv && comp_succ[cu].insert(cv) {
                indegree[cv] += 1;
            }
        }
    }

    let mut ready: BinaryHeap<Reverse<(Predicate, usize)>> = BinaryHeap::new();
    for c in 0..n_comps {
        if indegree[c] == 0 {
            ready.push(Reverse((members[c][0].clone(), c)));
        }
    }
    let mut components = Vec::with_capacity(n_comps);
    while let Some(Reverse((_, c))) = ready.pop() {
        components.push(members[c].clone());
        for &d in &comp_succ[c] {
            indegree[d] -= 1;
            if indegree[d] == 0 {
                ready.push(Reverse((members[d][0].clone(), d)));
            }
        }
    }
    ComponentOrder {
        rules: vec![Vec::new(); components.len()],
        components,
        constraints: Vec::new(),
    }
}

/// Iterative Tarjan; returns the component index of every node.
fn tarjan(succ: &[Vec<usize>]) -> Vec<usize> {
    const UNVISITED: usize = usize::MAX;
    let n = succ.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![UNVISITED; n];
    let mut next_index = 0;
    let mut next_comp = 0;

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&(v, child)) = call.last() {
            if child < succ[v].len() {
                let w = succ[v][child];
                if let Some(top) = call.last_mut() {
                    top.1 += 1;
                }
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp[w] = next_comp;
                        if w == v {
                            break;
                        }
                    }
                    next_comp += 1;
                }
            }
        }
    }
    comp
}
