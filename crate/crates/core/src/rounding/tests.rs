use super::*;
use crate::lp::{build_lp, solve_lp, solve_lp_with, LpPoint};
use crate::model::{AgentSpec, BarterInstance, ItemSpec, TransferWeight};
use crate::oracle::{figure_one, gap_family, gkps_worst_case};
use crate::rational::{int, ratio};
use crate::vbm::{build_vbm, VertexId};

fn edge_id(g: &VbmGraph, left: &str, right: &str) -> EdgeId {
    g.edges()
        .iter()
        .position(|e| g.label(e.left) == left && g.label(e.right) == right)
        .unwrap_or_else(|| panic!("no edge {left} -> {right}"))
}

fn vertex_id(g: &VbmGraph, label: &str) -> VertexId {
    (0..g.vertices().len())
        .find(|&v| g.label(v) == label)
        .unwrap_or_else(|| panic!("no vertex {label}"))
}

/// Three-agent graph with one tiny edge on the valuable item and a split
/// cheap item: the first search closes a two-path cycle.
fn two_component_state(g: &VbmGraph) -> RoundingState<'_> {
    let mut x = vec![int(0); g.edges().len()];
    x[edge_id(g, "L:1:a", "R:2:a")] = ratio(1, 200);
    x[edge_id(g, "L:3:d", "R:1:d")] = ratio(1, 2);
    x[edge_id(g, "L:3:d", "R:2:d")] = ratio(1, 2);
    RoundingState::new(g, x).unwrap()
}

#[test]
fn two_path_cycle_and_its_coloring() {
    let g = build_vbm(&figure_one()).unwrap();
    let state = two_component_state(&g);
    let seq = find_ccc(&state).unwrap();
    assert_eq!(seq.kind, PathSeqKind::Ccc);
    let labels: Vec<(String, String)> = seq
        .endpoints()
        .iter()
        .map(|&(s, t)| (g.label(s), g.label(t)))
        .collect();
    assert_eq!(
        labels,
        vec![
            ("L:1:a".to_string(), "R:2:a".to_string()),
            ("R:2:d".to_string(), "R:1:d".to_string())
        ]
    );
    seq.validate(&state).unwrap();

    let col = roundable_coloring(&g, &seq).unwrap();
    assert_eq!(
        col.ends,
        vec![(Sign::Plus, Sign::Plus), (Sign::Minus, Sign::Plus)]
    );
    check_coloring(&g, &seq, &col).unwrap();
    // Both ends of the second path sit on the right, so they cannot share a color.
    let wrong = Coloring {
        ends: vec![(Sign::Plus, Sign::Plus), (Sign::Minus, Sign::Minus)],
        classes: vec![vec![Sign::Plus], vec![Sign::Minus, Sign::Plus]],
    };
    assert!(check_coloring(&g, &seq, &wrong)
        .unwrap_err()
        .contains("property (i)"));

    let m = compute_alpha_beta(&state, &seq, &col).unwrap();
    assert_eq!(m.alpha, ratio(1, 2));
    assert_eq!(m.beta, ratio(1, 2));
    let dirs = step_directions(&g, &seq, &col);
    assert_eq!(max_feasible_step(&state, &dirs), m.alpha);
    let back: Vec<_> = dirs.iter().map(|(e, d)| (*e, -d.clone())).collect();
    assert_eq!(max_feasible_step(&state, &back), m.beta);
}

#[test]
fn two_path_cycle_keeps_every_net_value() {
    let g = build_vbm(&figure_one()).unwrap();
    let state = two_component_state(&g);
    let before = state.net_values();
    let dist = enumerate_outcomes(
        &g,
        &state.x().to_vec().into_solution(),
        Algorithm::BarterDr,
        64,
    )
    .unwrap();
    assert_eq!(dist.total_probability(), int(1));
    for (x, _) in &dist.outcomes {
        assert!(x.is_integral());
    }
    // Marginals are preserved exactly.
    for e in 0..g.edges().len() {
        assert_eq!(dist.marginal(e), state.x()[e]);
    }
    assert_eq!(dist.expected_net(&g), before);
}

trait IntoSolution {
    fn into_solution(self) -> FractionalSolution;
}

impl IntoSolution for Vec<Rational> {
    fn into_solution(self) -> FractionalSolution {
        FractionalSolution { values: self }
    }
}

#[test]
fn worst_case_single_cycle() {
    let inst = gkps_worst_case();
    let g = build_vbm(&inst).unwrap();
    let lp = solve_lp_with(&build_lp(&g, &[]), LpPoint::Centroid).unwrap();
    assert_eq!(lp.x.values, vec![ratio(1, 2), ratio(1, 2), int(1), int(1)]);
    let exp = expand_floating(&g, &lp.x).unwrap();
    let state = RoundingState::new(&exp.unit_graph, exp.unit_x.values.clone()).unwrap();
    let seq = find_ccc(&state).unwrap();
    let ug = &exp.unit_graph;
    let labels: Vec<[String; 2]> = seq
        .endpoints()
        .iter()
        .map(|&(s, t)| [ug.label(s), ug.label(t)])
        .collect();
    assert_eq!(seq.kind, PathSeqKind::Ccc);
    assert_eq!(
        labels,
        vec![
            ["L:1:3#1".to_string(), "R:2:3#1".to_string()],
            ["R:2:4#1".to_string(), "L:1:4#1".to_string()]
        ]
    );
    let col = roundable_coloring(ug, &seq).unwrap();
    let m = compute_alpha_beta(&state, &seq, &col).unwrap();
    assert_eq!((m.alpha, m.beta), (int(10), int(10)));

    let dist = enumerate_outcomes(&g, &lp.x, Algorithm::BarterDr, 16).unwrap();
    assert_eq!(dist.outcomes.len(), 2);
    for (x, p) in &dist.outcomes {
        assert_eq!(p, &ratio(1, 2));
        assert!(x.net_values(&g).iter().all(|d| d.is_zero()));
        assert_eq!(x.objective(&g), int(3));
    }
}

#[test]
fn worst_case_baseline_can_lose_twenty() {
    let g = build_vbm(&gkps_worst_case()).unwrap();
    let lp = solve_lp_with(&build_lp(&g, &[]), LpPoint::Centroid).unwrap();
    let dist = enumerate_outcomes(&g, &lp.x, Algorithm::Gkps, 16).unwrap();
    let bad = dist.probability_of(|x| x.values == vec![int(0), int(0), int(1), int(1)]);
    assert_eq!(bad, ratio(1, 4));
    let lost = dist.probability_of(|x| x.net_values(&g).iter().any(|d| d.abs() == int(20)));
    assert_eq!(lost, ratio(1, 2));
    for e in 0..4 {
        assert_eq!(dist.marginal(e), lp.x.values[e]);
    }
}

#[test]
fn gap_family_branches() {
    for n in [2i64, 4, 100] {
        let g = build_vbm(&gap_family(n as u32)).unwrap();
        let lp = solve_lp(&build_lp(&g, &[])).unwrap();
        let dist = enumerate_outcomes(&g, &lp.x, Algorithm::BarterDr, 16).unwrap();
        assert_eq!(dist.outcomes.len(), 2);
        let swap = dist.probability_of(|x| x.values.iter().all(|v| v == &int(1)));
        assert_eq!(swap, ratio(1, n));
        let d1: Vec<Rational> = dist
            .outcomes
            .iter()
            .map(|(x, _)| x.net_values(&g)[0].clone())
            .collect();
        assert!(d1.contains(&ratio(n - 1, n)));
        assert!(d1.contains(&ratio(-1, n)));
        assert_eq!(dist.expected_net(&g), vec![int(0), int(0)]);
        assert_eq!(
            dist.expectation(|x| x.objective(&g)),
            lp.objective,
            "n = {n}"
        );
    }
}

#[test]
fn gap_family_walk_magnitudes() {
    let g = build_vbm(&gap_family(4)).unwrap();
    let lp = solve_lp(&build_lp(&g, &[])).unwrap();
    let exp = expand_floating(&g, &lp.x).unwrap();
    assert_eq!(exp.unit_graph.edges().len(), 1);
    let state = RoundingState::new(&exp.unit_graph, exp.unit_x.values.clone()).unwrap();
    let seq = find_ccc(&state).unwrap();
    assert_eq!(seq.kind, PathSeqKind::Ccw);
    seq.validate(&state).unwrap();
    let col = roundable_coloring(&exp.unit_graph, &seq).unwrap();
    let m = compute_alpha_beta(&state, &seq, &col).unwrap();
    assert_eq!(
        (m.alpha.clone(), m.beta.clone()),
        (ratio(1, 4), ratio(3, 4))
    );
    assert_eq!(m.alpha_probability(), ratio(3, 4));
}

fn one_item_market(owners: usize, wishers: usize) -> BarterInstance {
    let mut agents = Vec::new();
    for k in 0..owners {
        agents.push(AgentSpec {
            id: format!("o{k}").as_str().into(),
            have: [("x".into(), 1)].into(),
            wish: Default::default(),
        });
    }
    for k in 0..wishers {
        agents.push(AgentSpec {
            id: format!("w{k}").as_str().into(),
            have: Default::default(),
            wish: [("x".into(), 1)].into(),
        });
    }
    BarterInstance {
        items: vec![ItemSpec {
            id: "x".into(),
            value: int(1),
        }],
        agents,
        weights: TransferWeight::Unit,
        fairness: Vec::new(),
    }
}

#[test]
fn cycles_are_removed_without_moving_degrees() {
    for n in [2usize, 3] {
        let g = build_vbm(&one_item_market(n, n)).unwrap();
        let mut x = vec![int(0); g.edges().len()];
        // Cycle o0-w0-o1-w1-...-o{n-1}-w{n-1}-o0.
        for k in 0..n {
            let o = format!("L:o{k}:x");
            x[edge_id(&g, &o, &format!("R:w{k}:x"))] = ratio(1, 2);
            x[edge_id(&g, &o, &format!("R:w{}:x", (k + n - 1) % n))] = ratio(1, 2);
        }
        let mut state = RoundingState::new(&g, x).unwrap();
        let degrees: Vec<Rational> = (0..g.vertices().len())
            .map(|v| state.degree(v).clone())
            .collect();
        assert_eq!(state.snapshot().find_cycle(&g).unwrap().len(), 2 * n);
        let mut trace = Vec::new();
        preprocess_cycles(&mut state, &mut SeededBranches::new(3), Some(&mut trace)).unwrap();
        assert!(state.snapshot().find_cycle(&g).is_none());
        assert_eq!(trace.len(), 1);
        assert_eq!(trace[0].phase, StepPhase::Cycle);
        assert!(!state.has_floating_edges());
        for (v, d) in degrees.iter().enumerate() {
            assert_eq!(state.degree(v), d);
        }
    }
}

#[test]
fn lonely_vertices_are_reported() {
    let g = build_vbm(&one_item_market(1, 2)).unwrap();
    let mut x = vec![int(0); g.edges().len()];
    x[edge_id(&g, "L:o0:x", "R:w0:x")] = ratio(1, 3);
    x[edge_id(&g, "L:o0:x", "R:w1:x")] = ratio(1, 3);
    let state = RoundingState::new(&g, x).unwrap();
    // Every vertex is partnerless, so the first search yields a single-path walk.
    let seq = find_ccc(&state).unwrap();
    assert_eq!(seq.kind, PathSeqKind::Ccw);
    assert_eq!(seq.paths.len(), 1);
    assert_eq!(seq.paths[0].start, vertex_id(&g, "L:o0:x"));
}

#[test]
fn seeded_runs_are_reproducible() {
    let g = build_vbm(&figure_one()).unwrap();
    let state = two_component_state(&g);
    let x = state.x().to_vec().into_solution();
    let run = |seed| {
        round_solution(
            &g,
            &x,
            Algorithm::BarterDr,
            &mut SeededBranches::new(seed),
            RoundingOptions { record_trace: true },
        )
        .unwrap()
    };
    let (a, b) = (run(9), run(9));
    assert_eq!(a.x, b.x);
    assert_eq!(to_json_lines(&a.trace), to_json_lines(&b.trace));
    assert!(to_json_lines(&a.trace).contains("\"phase\":\"ccc\""));
    let t1 = SeededBranches::for_trial(5, 1);
    let t2 = SeededBranches::for_trial(5, 2);
    let draw = |mut s: SeededBranches| {
        (0..8)
            .map(|_| s.take_alpha(&ratio(1, 2)))
            .collect::<Vec<_>>()
    };
    assert_ne!(draw(t1.clone()), draw(t2));
    assert_eq!(draw(t1.clone()), draw(t1));
}

#[test]
fn thresholds_are_exact() {
    assert_eq!(threshold(&int(0)), 0);
    assert_eq!(threshold(&int(1)), 1u128 << 64);
    assert_eq!(threshold(&ratio(1, 2)), 1u128 << 63);
    let mut always = SeededBranches::new(0);
    assert!((0..100).all(|_| always.take_alpha(&int(1))));
    assert!((0..100).all(|_| !always.take_alpha(&int(0))));
}

#[test]
fn rejects_out_of_range_input() {
    let g = build_vbm(&gap_family(2)).unwrap();
    assert!(matches!(
        RoundingState::new(&g, vec![ratio(3, 2), int(0)]),
        Err(RoundingError::NotUnit { edge: 0, .. })
    ));
    let bad = FractionalSolution {
        values: vec![int(2), int(0)],
    };
    assert!(matches!(
        round_solution(
            &g,
            &bad,
            Algorithm::BarterDr,
            &mut SeededBranches::new(0),
            RoundingOptions::default()
        ),
        Err(RoundingError::Input(_))
    ));
}

mod properties {
    use super::*;
    use crate::oracle::{random_instance, transfer_count, RandomSpec, RandomWeights};
    use proptest::prelude::*;

    fn instance_strategy() -> impl Strategy<Value = BarterInstance> {
        (
            2usize..=5,
            2usize..=5,
            1u32..=4,
            1u32..=3,
            any::<u64>(),
            any::<bool>(),
        )
            .prop_filter_map(
                "instance too large for a quick test",
                |(agents, items, max_value, max_cap, seed, unit)| {
                    let spec = RandomSpec {
                        agents,
                        items,
                        density: 0.5,
                        values: (1, max_value),
                        caps: (1, max_cap),
                        weights: if unit {
                            RandomWeights::Unit
                        } else {
                            RandomWeights::ItemValue
                        },
                    };
                    let inst = random_instance(&spec, seed).ok()?;
                    (transfer_count(&inst) <= 20).then_some(inst)
                },
            )
    }

    /// Drives one run by hand so every intermediate object can be checked.
    fn stepwise(g: &VbmGraph, x: &FractionalSolution, seed: u64) -> Result<(), TestCaseError> {
        let exp = expand_floating(g, x).unwrap();
        let ug = &exp.unit_graph;
        let mut state = RoundingState::new(ug, exp.unit_x.values.clone()).unwrap();
        let mut source = SeededBranches::new(seed);
        preprocess_cycles(&mut state, &mut source, None).unwrap();
        prop_assert!(state.snapshot().find_cycle(ug).is_none());
        let budget = ug.vertices().len() + ug.edges().len();
        while state.has_floating_edges() {
            let seq = find_ccc(&state).unwrap();
            seq.validate(&state).unwrap();
            let col = roundable_coloring(ug, &seq).unwrap();
            check_coloring(ug, &seq, &col).unwrap();
            let m = compute_alpha_beta(&state, &seq, &col).unwrap();
            let dirs = step_directions(ug, &seq, &col);
            let back: Vec<_> = dirs.iter().map(|(e, d)| (*e, -d.clone())).collect();
            prop_assert_eq!(&max_feasible_step(&state, &dirs), &m.alpha);
            prop_assert_eq!(&max_feasible_step(&state, &back), &m.beta);
            // Partner endpoints cancel in the barter sums, so the step is
            // value-neutral for every agent that has two endpoints on it.
            let before = state.net_values();
            let step = if source.take_alpha(&m.alpha_probability()) {
                m.alpha.clone()
            } else {
                -m.beta.clone()
            };
            state.apply(&dirs, &step).unwrap();
            let after = state.net_values();
            let ends = seq.endpoint_set();
            for agent in 0..ug.agents().len() {
                let hits = ends.iter().filter(|&&v| state.agent_of(v) == agent).count();
                let walk_end = seq.kind == PathSeqKind::Ccw
                    && [ends[0], ends[ends.len() - 1]]
                        .iter()
                        .any(|&v| state.agent_of(v) == agent);
                if hits > 0 && !walk_end {
                    prop_assert_eq!(&before[agent], &after[agent]);
                }
            }
            prop_assert!(state.iteration() <= budget);
        }
        Ok(())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn steps_match_independent_bounds(inst in instance_strategy(), seed in any::<u64>()) {
            let g = build_vbm(&inst).unwrap();
            let lp = solve_lp(&build_lp(&g, &[])).unwrap();
            stepwise(&g, &lp.x, seed)?;
        }

        #[test]
        fn outputs_keep_degrees_and_bound_losses(inst in instance_strategy(), seed in any::<u64>()) {
            let g = build_vbm(&inst).unwrap();
            let lp = solve_lp(&build_lp(&g, &[])).unwrap();
            let out = barter_dr(&g, &lp, seed).unwrap();
            prop_assert!(out.x.is_integral());
            let d0 = lp.x.degrees(&g);
            for (d, d0) in out.x.degrees(&g).iter().zip(&d0) {
                prop_assert!(d >= &d0.floor() && d <= &d0.ceil());
            }
            for (i, d) in out.x.net_values(&g).iter().enumerate() {
                prop_assert!(d.is_zero() || d.abs() < g.max_value(i));
            }
            prop_assert!(crate::oracle::check_rounded(&inst, &out.allocation).is_ok());
        }

        #[test]
        fn replay_preserves_marginals_exactly(inst in instance_strategy()) {
            let g = build_vbm(&inst).unwrap();
            let lp = solve_lp(&build_lp(&g, &[])).unwrap();
            let Ok(dist) = enumerate_outcomes(&g, &lp.x, Algorithm::BarterDr, 512) else {
                return Ok(());
            };
            prop_assert_eq!(dist.total_probability(), int(1));
            for e in 0..g.edges().len() {
                prop_assert_eq!(&dist.marginal(e), &lp.x.values[e]);
            }
            prop_assert!(dist.expected_net(&g).iter().all(|d| d.is_zero()));
            prop_assert_eq!(dist.expectation(|x| x.objective(&g)), lp.objective);
        }
    }
}
