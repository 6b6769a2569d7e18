//! Multi-shot experiments: incremental versus from-scratch runs, cross-mode
//! equivalence checks against the Herbrand oracle, per-shot CSV metrics and
//! generated fact streams.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{Engine, EngineOptions};
use crate::error::{ParseError, SolveError};
use crate::model::{Constant, GroundAtom};
use crate::parser::{parse_facts, Program};
use crate::solver::{answer_sets, compare_cost, Cost, SolveRequest};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("script {0} lists no program")]
    EmptyScript(PathBuf),
    #[error("shot {shot}: {source}")]
    Solve { shot: usize, source: SolveError },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Incremental,
    /// A fresh store for every shot.
    Scratch,
}

/// A program and one fact set per shot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub program: Program,
    pub shots: Vec<Vec<GroundAtom>>,
}

/// Scenario file: the program path on the first line, then one fact file
/// per shot. Paths are relative to the script; `#` starts a comment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotScript {
    pub program: PathBuf,
    pub shots: Vec<PathBuf>,
}

impl ShotScript {
    pub fn read(path: &Path) -> Result<Self, BenchError> {
        let text = read(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| dir.join(l));
        let program = lines.next().ok_or_else(|| BenchError::EmptyScript(path.to_path_buf()))?;
        Ok(ShotScript {
            program,
            shots: lines.collect(),
        })
    }

    pub fn load(&self) -> Result<Scenario, BenchError> {
        let text = read(&self.program)?;
        let program = Program::parse(&text).map_err(|source| BenchError::Parse {
            path: self.program.clone(),
            source,
        })?;
        let shots = self
            .shots
            .iter()
            .map(|p| {
                parse_facts(&read(p)?).map_err(|source| BenchError::Parse {
                    path: p.clone(),
                    source,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Scenario { program, shots })
    }
}

fn read(path: &Path) -> Result<String, BenchError> {
    fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotMetrics {
    pub shot: usize,
    pub ground_ms: f64,
    pub solve_ms: f64,
    pub cumulative_ms: f64,
    pub instances_attempted: usize,
    pub instances_added: usize,
    pub rules_reinstated: usize,
    pub literals_restored: usize,
    pub rule_count: usize,
    pub atom_count: usize,
}

/// Every answer set of a shot with its cost, unoptimized. Levels of
/// weight 0 are dropped so that costs compare across ground programs.
pub type ShotAnswers = BTreeSet<(BTreeSet<GroundAtom>, Cost)>;

#[derive(Debug, Clone)]
pub struct RunResult {
    pub metrics: Vec<ShotMetrics>,
    pub answers: Vec<ShotAnswers>,
    /// Accumulated and persistent atom counts after each shot.
    pub accumulated: Vec<usize>,
    pub persistent: Vec<BTreeSet<GroundAtom>>,
}

pub fn run_multishot(scenario: &Scenario, mode: Mode, options: EngineOptions) -> Result<RunResult, BenchError> {
    run_with(scenario, mode, options, |_, _| {})
}

/// Like [`run_multishot`]; `tamper` sees the engine after grounding and
/// before solving each shot.
pub fn run_with(
    scenario: &Scenario,
    mode: Mode,
    options: EngineOptions,
    mut tamper: impl FnMut(usize, &mut Engine),
) -> Result<RunResult, BenchError> {
    let mut result = RunResult {
        metrics: Vec::new(),
        answers: Vec::new(),
        accumulated: Vec::new(),
        persistent: Vec::new(),
    };
    let mut engine = Engine::new(scenario.program.clone(), options);
    let mut cumulative = 0.0;
    for (i, facts) in scenario.shots.iter().enumerate() {
        let shot = i + 1;
        if mode == Mode::Scratch {
            engine = Engine::new(scenario.program.clone(), options);
        }
        let report = engine.ground(facts);
        tamper(shot, &mut engine);
        let start = Instant::now();
        let view = engine.solver_view();
        let sets = answer_sets(SolveRequest {
            optimize: false,
            ..SolveRequest::new(&view)
        })
        .map_err(|source| BenchError::Solve { shot, source })?;
        let solve_ms = start.elapsed().as_secs_f64() * 1e3;
        let ground_ms = report.ground_time.as_secs_f64() * 1e3;
        cumulative += ground_ms + solve_ms;
        let store = engine.store();
        result.metrics.push(ShotMetrics {
            shot,
            ground_ms,
            solve_ms,
            cumulative_ms: cumulative,
            instances_attempted: report.stats.instances_attempted,
            instances_added: report.stats.instances_added,
            rules_reinstated: report.stats.rules_reinstated,
            literals_restored: report.stats.literals_restored,
            rule_count: store.len(),
            atom_count: store.accumulated().len(),
        });
        result.answers.push(
            sets.iter()
                .map(|s| (s.resolve(engine.table()), nonzero(&s.cost)))
                .collect(),
        );
        result.accumulated.push(store.accumulated().len());
        result.persistent.push(
            store
                .persistent()
                .iter()
                .map(|&a| engine.table().resolve(a).clone())
                .collect(),
        );
        engine.finish_shot();
    }
    Ok(result)
}

fn nonzero(cost: &Cost) -> Cost {
    cost.iter().filter(|(_, w)| **w != 0).map(|(l, w)| (*l, *w)).collect()
}

/// Answer sets of the oracle for every shot, in the same form as
/// [`RunResult::answers`].
pub fn oracle_answers(scenario: &Scenario) -> Result<Vec<ShotAnswers>, BenchError> {
    scenario
        .shots
        .iter()
        .enumerate()
        .map(|(i, facts)| {
            let r = crate::solver::brute_force_oracle(&scenario.program, facts)
                .map_err(|source| BenchError::Solve { shot: i + 1, source })?;
            Ok(r.answers
                .iter()
                .map(|a| (a.resolve(&r.table), nonzero(&a.cost)))
                .collect())
        })
        .collect()
}

/// The optimal members of a shot's answers.
pub fn optimal(answers: &ShotAnswers) -> BTreeSet<BTreeSet<GroundAtom>> {
    let Some(best) = answers.iter().map(|(_, c)| c).min_by(|a, b| compare_cost(a, b)) else {
        return BTreeSet::new();
    };
    answers
        .iter()
        .filter(|(_, c)| compare_cost(c, best) == Ordering::Equal)
        .map(|(a, _)| a.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail {
        shot: usize,
        /// Which pipeline disagreed with the incremental one.
        against: &'static str,
        /// Answer sets only the incremental pipeline produced.
        extra: Vec<String>,
        /// Answer sets only the other side produced.
        missing: Vec<String>,
    },
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        *self == Verdict::Pass
    }
}

pub fn verify_equivalence(scenario: &Scenario) -> Result<Verdict, BenchError> {
    verify_equivalence_with(scenario, EngineOptions::default(), |_, _| {})
}

/// Compares incremental, scratch and oracle answer sets shot by shot.
pub fn verify_equivalence_with(
    scenario: &Scenario,
    options: EngineOptions,
    tamper: impl FnMut(usize, &mut Engine),
) -> Result<Verdict, BenchError> {
    let incremental = run_with(scenario, Mode::Incremental, options, tamper)?;
    let scratch = run_multishot(scenario, Mode::Scratch, options)?;
    let oracle = oracle_answers(scenario)?;
    for (i, inc) in incremental.answers.iter().enumerate() {
        for (against, other) in [("scratch", &scratch.answers[i]), ("oracle", &oracle[i])] {
            if inc != other {
                return Ok(Verdict::Fail {
                    shot: i + 1,
                    against,
                    extra: render(inc.difference(other)),
                    missing: render(other.difference(inc)),
                });
            }
        }
    }
    Ok(Verdict::Pass)
}

fn render<'a>(sets: impl Iterator<Item = &'a (BTreeSet<GroundAtom>, Cost)>) -> Vec<String> {
    sets.map(|(atoms, _)| {
        let atoms: Vec<String> = atoms.iter().map(GroundAtom::to_string).collect();
        format!("{{{}}}", atoms.join(", "))
    })
    .collect()
}

/// Header plus one row per shot.
pub fn emit_csv<W: Write>(metrics: &[ShotMetrics], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for m in metrics {
        w.serialize(m)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn atom(name: &str, args: &[i64]) -> GroundAtom {
    GroundAtom::new(name, args.iter().map(|&a| Constant::Int(a)).collect())
}

pub const CACHE_PROGRAM: &str = "\
keep(X) | drop(X) :- request(X).
hot(X) :- request(X), popular(X).
:- keep(X), keep(Y), conflict(X,Y).
:- hot(X), drop(X).
:~ drop(X). [1@1]
";

/// Requests slide over `items` objects, `window` at a time, wrapping
/// around. Every object has been requested once the window has passed all
/// of them, after which the accumulated atoms stop growing.
pub fn sliding_window(items: i64, window: i64, shots: usize) -> Scenario {
    let program = Program::parse(CACHE_PROGRAM).expect("bundled program parses");
    let static_facts: Vec<GroundAtom> = (0..items)
        .filter(|i| i % 3 == 0)
        .map(|i| atom("popular", &[i]))
        .chain((0..items).map(|i| atom("conflict", &[i, (i + 1) % items])))
        .collect();
    let shots = (0..shots as i64)
        .map(|s| {
            let mut f = static_facts.clone();
            f.extend((0..window).map(|k| atom("request", &[(s + k) % items])));
            f
        })
        .collect();
    Scenario { program, shots }
}

/// First shot after which a sliding-window stream requests nothing new.
pub fn sliding_window_convergence(items: i64, window: i64) -> usize {
    (items - window + 1).max(1) as usize
}

pub const THREE_COLOURING: &str = "\
col(X,red) | col(X,green) | col(X,blue) :- node(X).
:- edge(X,Y), col(X,C), col(Y,C).
:~ not col(1,red). [1@1]
:~ not col(2,green). [1@1]
";

/// Three-colouring over a graph whose edges churn from shot to shot.
pub fn dynamic_graph(nodes: i64, shots: usize, seed: u64) -> Scenario {
    let program = Program::parse(THREE_COLOURING).expect("bundled program parses");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all_edges: Vec<(i64, i64)> = (1..=nodes)
        .flat_map(|a| ((a + 1)..=nodes).map(move |b| (a, b)))
        .collect();
    let mut edges: BTreeSet<(i64, i64)> = BTreeSet::new();
    let shots = (0..shots)
        .map(|_| {
            for _ in 0..2 {
                let &e = all_edges.choose(&mut rng).expect("at least two nodes");
                if !edges.remove(&e) {
                    edges.insert(e);
                }
            }
            let active = rng.gen_range(nodes.min(3)..=nodes);
            (1..=active)
                .map(|n| atom("node", &[n]))
                .chain(
                    edges
                        .iter()
                        .filter(|(a, b)| *a <= active && *b <= active)
                        .map(|&(a, b)| atom("edge", &[a, b])),
                )
                .collect()
        })
        .collect();
    Scenario { program, shots }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("p.asp"), "b(X) :- a(X).").unwrap();
        fs::write(dir.path().join("f1.asp"), "a(1).").unwrap();
        fs::write(dir.path().join("f2.asp"), "a(1). a(2).").unwrap();
        let script = dir.path().join("s.txt");
        fs::write(&script, "# demo\np.asp\nf1.asp\n\nf2.asp # second\n").unwrap();
        let s = ShotScript::read(&script).unwrap();
        assert_eq!(s.shots.len(), 2);
        let scenario = s.load().unwrap();
        assert_eq!(scenario.shots[1].len(), 2);
        fs::write(&script, "# nothing\n").unwrap();
        assert!(matches!(ShotScript::read(&script), Err(BenchError::EmptyScript(_))));
    }

    #[test]
    fn csv_has_header_and_one_row_per_shot() {
        let scenario = sliding_window(4, 2, 3);
        let r = run_multishot(&scenario, Mode::Incremental, EngineOptions::default()).unwrap();
        let mut buf = Vec::new();
        emit_csv(&r.metrics, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[0],
            "shot,ground_ms,solve_ms,cumulative_ms,instances_attempted,instances_added,\
             rules_reinstated,literals_restored,rule_count,atom_count"
        );
        assert!(r.metrics.windows(2).all(|w| w[0].cumulative_ms <= w[1].cumulative_ms));
    }

    #[test]
    fn single_shot_modes_agree() {
        let scenario = dynamic_graph(4, 1, 7);
        let a = run_multishot(&scenario, Mode::Incremental, EngineOptions::default()).unwrap();
        let b = run_multishot(&scenario, Mode::Scratch, EngineOptions::default()).unwrap();
        assert_eq!(a.answers, b.answers);
        assert_eq!(a.metrics[0].instances_added, b.metrics[0].instances_added);
        assert_eq!(a.metrics[0].rule_count, b.metrics[0].rule_count);
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(dynamic_graph(5, 4, 3), dynamic_graph(5, 4, 3));
        assert_eq!(sliding_window_convergence(6, 3), 4);
        assert_eq!(sliding_window(6, 3, 5).shots.len(), 5);
    }

    #[test]
    fn optimal_subset() {
        let a: BTreeSet<GroundAtom> = [atom("a", &[])].into();
        let b: BTreeSet<GroundAtom> = [atom("b", &[])].into();
        let answers: ShotAnswers = [
            (a.clone(), Cost::from([(1, 0)])),
            (b.clone(), Cost::from([(1, 1)])),
        ]
        .into();
        assert_eq!(optimal(&answers), [a].into());
    }
}
