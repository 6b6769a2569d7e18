#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use overground::bench::Scenario;
use overground::model::{Constant, GroundAtom};
use overground::parser::{parse_facts, Program};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn scenario_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

pub fn load_scenario(name: &str) -> Scenario {
    let script = scenario_dir(name).join("script.txt");
    overground::bench::ShotScript::read(&script).unwrap().load().unwrap()
}

pub fn facts(text: &str) -> Vec<GroundAtom> {
    parse_facts(text).unwrap()
}

pub fn lines(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

struct Pred {
    name: String,
    arity: usize,
}

fn term<R: Rng>(rng: &mut R, vars: &[&str], consts: i64, var_bias: f64) -> String {
    if !vars.is_empty() && rng.gen_bool(var_bias) {
        vars.choose(rng).unwrap().to_string()
    } else {
        rng.gen_range(1..=consts).to_string()
    }
}

fn atom<R: Rng>(rng: &mut R, pred: &Pred, vars: &[&str], consts: i64, var_bias: f64) -> String {
    if pred.arity == 0 {
        return pred.name.clone();
    }
    let args: Vec<String> = (0..pred.arity).map(|_| term(rng, vars, consts, var_bias)).collect();
    format!("{}({})", pred.name, args.join(","))
}

/// A small random program (at most 3 predicates of arity at most 2, 4
/// constants, 6 rules) and a 5-shot fact sequence over the same symbols.
pub fn random_case<R: Rng>(rng: &mut R) -> (String, Scenario) {
    let n_preds = rng.gen_range(1..=3);
    let preds: Vec<Pred> = (0..n_preds)
        .map(|i| Pred {
            name: format!("p{i}"),
            arity: *[0usize, 1, 1, 2, 2].choose(rng).unwrap(),
        })
        .collect();
    let consts = rng.gen_range(2..=4i64);
    let pool = ["X", "Y", "Z"];
    let mut text = String::new();
    for _ in 0..rng.gen_range(1..=6) {
        let n_pos = rng.gen_range(0..=2);
        let mut pos = Vec::new();
        let mut bound: BTreeSet<&str> = BTreeSet::new();
        for _ in 0..n_pos {
            let p = preds.choose(rng).unwrap();
            let args: Vec<String> = (0..p.arity)
                .map(|_| {
                    if rng.gen_bool(0.75) {
                        let v = *pool.choose(rng).unwrap();
                        bound.insert(v);
                        v.to_string()
                    } else {
                        rng.gen_range(1..=consts).to_string()
                    }
                })
                .collect();
            pos.push(if p.arity == 0 {
                p.name.clone()
            } else {
                format!("{}({})", p.name, args.join(","))
            });
        }
        let vars: Vec<&str> = bound.into_iter().collect();
        let mut body = pos;
        if rng.gen_bool(0.4) {
            let p = preds.choose(rng).unwrap();
            body.push(format!("not {}", atom(rng, p, &vars, consts, 0.8)));
        }
        let body = body.join(", ");
        let roll: f64 = rng.gen();
        if roll < 0.15 && !body.is_empty() {
            text.push_str(&format!(":- {body}.\n"));
        } else if roll < 0.3 && !body.is_empty() {
            let w = rng.gen_range(1..=2);
            let l = rng.gen_range(0..=1);
            text.push_str(&format!(":~ {body}. [{w}@{l}]\n"));
        } else {
            let n_head = if rng.gen_bool(0.25) { 2 } else { 1 };
            let head: Vec<String> = (0..n_head)
                .map(|_| {
                    let p = preds.choose(rng).unwrap();
                    atom(rng, p, &vars, consts, 0.8)
                })
                .collect();
            if body.is_empty() {
                text.push_str(&format!("{}.\n", head.join(" | ")));
            } else {
                text.push_str(&format!("{} :- {body}.\n", head.join(" | ")));
            }
        }
    }
    let program = Program::parse(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));

    let mut ground_pool: Vec<GroundAtom> = Vec::new();
    for p in &preds {
        let combos = (consts as usize).pow(p.arity as u32);
        for k in 0..combos {
            let mut args = Vec::new();
            let mut rest = k;
            for _ in 0..p.arity {
                args.push(Constant::Int((rest % consts as usize) as i64 + 1));
                rest /= consts as usize;
            }
            ground_pool.push(GroundAtom::new(p.name.clone(), args));
        }
    }
    let shots = (0..5)
        .map(|_| {
            let n = rng.gen_range(0..=ground_pool.len().min(5));
            let mut f: Vec<GroundAtom> = ground_pool.choose_multiple(rng, n).cloned().collect();
            f.sort();
            f
        })
        .collect();
    (text, Scenario { program, shots })
}
