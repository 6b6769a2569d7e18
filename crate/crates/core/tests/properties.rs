mod common;

use std::collections::{BTreeSet, HashSet};
use std::fs;

use overground::bench::{self, Mode, Scenario, ShotAnswers};
use overground::grounder::compute_certain;
use overground::model::{AtomId, LiteralState};
use overground::session::{Session, SessionConfig};
use overground::solver::{answer_sets, brute_force_oracle, SolveRequest};
use overground::{Count, Engine, EngineOptions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn case(seed: u64) -> (String, Scenario) {
    common::random_case(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn within_cap(s: &Scenario) -> bool {
    bench::oracle_answers(s).is_ok()
}

fn oracle_shot(s: &Scenario, facts: &[overground::GroundAtom]) -> ShotAnswers {
    let r = brute_force_oracle(&s.program, facts).unwrap();
    r.answers
        .iter()
        .map(|a| (a.resolve(&r.table), nonzero(&a.cost)))
        .collect()
}

fn nonzero(cost: &overground::solver::Cost) -> overground::solver::Cost {
    cost.iter().filter(|(_, w)| **w != 0).map(|(l, w)| (*l, *w)).collect()
}

/// Struck literal positions and deletion reason of every stored rule.
fn simplification_state(e: &Engine) -> Vec<(BTreeSet<usize>, Option<AtomId>)> {
    e.store()
        .rules()
        .iter()
        .map(|r| {
            let struck = r.body.iter().enumerate().filter(|(_, l)| !l.is_active()).map(|(i, _)| i).collect();
            (struck, r.deleted)
        })
        .collect()
}

fn transcript(script: &[String], session: &mut Session) -> String {
    script
        .iter()
        .flat_map(|line| session.handle_line(line))
        .map(|r| r.text)
        .collect()
}

/// Writes the case to disk and returns the command script replaying it.
fn session_script(dir: &std::path::Path, text: &str, s: &Scenario) -> Vec<String> {
    fs::write(dir.join("p.asp"), text).unwrap();
    let mut script = vec![r#"<load path="p.asp"/>"#.to_string()];
    for (i, shot) in s.shots.iter().enumerate() {
        let body: String = shot.iter().map(|a| format!("{a}.\n")).collect();
        let name = format!("f{i}.asp");
        fs::write(dir.join(&name), body).unwrap();
        script.push(format!(r#"<load path="{name}"/>"#));
        script.push("<run/>".into());
    }
    script
}

fn config(dir: &std::path::Path) -> SessionConfig {
    SessionConfig {
        count: Count::All,
        base_dir: dir.to_path_buf(),
        ..SessionConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn incremental_matches_scratch_and_oracle(seed in any::<u64>()) {
        let (text, s) = case(seed);
        prop_assume!(within_cap(&s));
        let verdict = bench::verify_equivalence(&s).unwrap();
        prop_assert!(verdict.is_pass(), "{verdict:?}\n{text}");
    }

    #[test]
    fn untailored_program_serves_every_earlier_shot(seed in any::<u64>()) {
        let (text, s) = case(seed);
        prop_assume!(within_cap(&s));
        let mut e = Engine::new(s.program.clone(), EngineOptions { tailoring: false });
        for k in 0..s.shots.len() {
            e.ground(&s.shots[k]);
            for j in 0..=k {
                let mut view = e.tailored_program();
                view.facts = s.program.facts.iter().chain(&s.shots[j])
                    .map(|a| e.table().get(a).unwrap())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                let got: ShotAnswers = answer_sets(SolveRequest { optimize: false, ..SolveRequest::new(&view) })
                    .unwrap()
                    .iter()
                    .map(|a| (a.resolve(e.table()), nonzero(&a.cost)))
                    .collect();
                prop_assert_eq!(got, oracle_shot(&s, &s.shots[j]), "shots {} over {}\n{}", k + 1, j + 1, text);
            }
            e.finish_shot();
        }
    }

    #[test]
    fn stored_rules_are_never_simplified_further(seed in any::<u64>()) {
        let (_, s) = case(seed);
        let mut e = Engine::new(s.program.clone(), EngineOptions::default());
        let mut before: Vec<(BTreeSet<usize>, Option<AtomId>)> = Vec::new();
        for facts in &s.shots {
            e.ground(facts);
            let after = simplification_state(&e);
            for (i, ((struck0, del0), (struck1, del1))) in before.iter().zip(&after).enumerate() {
                if del0.is_none() {
                    prop_assert!(del1.is_none(), "rule {i} became deleted");
                    prop_assert!(struck1.is_subset(struck0), "rule {i} gained struck literals");
                }
            }
            before = after;
            e.finish_shot();
        }
    }

    #[test]
    fn every_simplification_has_a_certain_reason(seed in any::<u64>(), tailoring in any::<bool>()) {
        let (_, s) = case(seed);
        let mut e = Engine::new(s.program.clone(), EngineOptions { tailoring });
        for facts in &s.shots {
            e.ground(facts);
            let ct = compute_certain(e.store());
            for r in e.store().rules() {
                if let Some(reason) = r.deleted {
                    prop_assert!(tailoring && ct.contains(reason));
                }
                for l in &r.body {
                    if let LiteralState::Simplified { reason, .. } = l.state {
                        prop_assert!(tailoring && ct.contains(reason));
                    }
                }
            }
            e.finish_shot();
        }
    }

    #[test]
    fn session_replay_is_deterministic(seed in any::<u64>()) {
        let (text, s) = case(seed);
        prop_assume!(within_cap(&s));
        let dir = tempfile::tempdir().unwrap();
        let script = session_script(dir.path(), &text, &s);
        let a = transcript(&script, &mut Session::new(config(dir.path())));
        let b = transcript(&script, &mut Session::new(config(dir.path())));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn reset_isolates_sessions(seed in any::<u64>(), other in any::<u64>()) {
        let (text, s) = case(seed);
        let (noise_text, noise) = case(other);
        prop_assume!(within_cap(&s) && within_cap(&noise));
        let dir = tempfile::tempdir().unwrap();
        let noise_dir = dir.path().join("noise");
        fs::create_dir(&noise_dir).unwrap();
        let noise_script: Vec<String> = session_script(&noise_dir, &noise_text, &noise)
            .into_iter()
            .map(|l| l.replace("path=\"", "path=\"noise/"))
            .collect();
        let script = session_script(dir.path(), &text, &s);

        let fresh = transcript(&script, &mut Session::new(config(dir.path())));
        let mut reused = Session::new(config(dir.path()));
        transcript(&noise_script, &mut reused);
        reused.handle_line("<reset/>");
        prop_assert_eq!(transcript(&script, &mut reused), fresh);
    }

    #[test]
    fn scratch_ignores_shot_order(seed in any::<u64>()) {
        let (_, s) = case(seed);
        prop_assume!(within_cap(&s));
        let forward = bench::run_multishot(&s, Mode::Scratch, EngineOptions::default()).unwrap();
        let mut reversed = s.clone();
        reversed.shots.reverse();
        let mut backward = bench::run_multishot(&reversed, Mode::Scratch, EngineOptions::default()).unwrap();
        backward.answers.reverse();
        prop_assert_eq!(forward.answers, backward.answers);
    }
}

#[test]
fn solver_view_keeps_only_possibly_true_atoms() {
    let s = common::load_scenario("3col");
    let mut e = Engine::new(s.program.clone(), EngineOptions::default());
    e.ground(&s.shots[0]);
    let view = e.solver_view();
    let closure: HashSet<AtomId> = view.possibly_true();
    for r in &view.rules {
        assert!(r.pos.iter().all(|a| closure.contains(a)));
    }
}
