//! Protocol-level guarantees of the parallel iteration on planted data.

mod common;

use common::{agents_for, coeffs, planted, random_strong_digraph};
use koopman_pssd::linalg;
use koopman_pssd::network::{analyze, is_jointly_strongly_connected, path_digraph, ring_digraph, Digraph, DigraphSchedule};
use koopman_pssd::pssd::{check_consensus, pssd_round, run_pssd, AgentState, PssdOptions, StepKind, StopRule};
use koopman_pssd::ssd::ssd;
use koopman_pssd::{CoefficientMatrix, RngSeed, Tolerances};

const N: usize = 6;
const S: usize = 2;

fn oracle_for(seed: u64, rows: usize) -> (common::Planted, CoefficientMatrix) {
    let p = planted(seed, N, S, rows);
    let (c, _) = ssd(&p.dx, &p.dy, &Tolerances::default()).unwrap();
    assert_eq!(c.ncols(), S);
    (p, c)
}

fn matches(c: &CoefficientMatrix, oracle: &CoefficientMatrix) -> bool {
    linalg::range_equal(c.span(), oracle.span(), 1e-8)
}

fn rounds(agents: Vec<AgentState>, g: &Digraph, count: usize) -> Vec<Vec<AgentState>> {
    let tol = Tolerances::default();
    let mut out = vec![agents];
    for _ in 0..count {
        let next = pssd_round(out.last().unwrap(), g, &tol, StepKind::Exact).unwrap().agents;
        out.push(next);
    }
    out
}

#[test]
fn strongly_connected_digraphs_meet_the_round_bounds() {
    let tol = Tolerances::default();
    for trial in 0..50u64 {
        let mut rng = RngSeed(trial).substream("graph").rng();
        let m = 2 + (trial as usize % 7);
        let g = random_strong_digraph(&mut rng, m, 0.2);
        let diameter = analyze(&g).diameter.expect("strongly connected");
        let (p, oracle) = oracle_for(trial, 12 * m + N + 1);
        let schedule = DigraphSchedule::Static { graph: g };
        let opts = PssdOptions::for_schedule(&schedule, 100);
        let rep = run_pssd(agents_for(&p.dx, &p.dy, m, N + 1, true), &schedule, &tol, &opts, Some(&oracle)).unwrap();
        let consensus = rep.consensus_round.expect("consensus reached");
        let done = rep.termination_round.expect("flags set");
        assert!(consensus <= diameter + 1, "trial {trial}: consensus {consensus}, diameter {diameter}");
        assert!(done <= diameter + 2, "trial {trial}: flags {done}, diameter {diameter}");
        assert!(rep.final_coeffs.iter().all(|c| matches(c, &oracle)), "trial {trial}");
    }
}

#[test]
fn sink_of_a_path_matches_the_oracle() {
    for m in 2..=6 {
        let (p, oracle) = oracle_for(100 + m as u64, 10 * m + N + 1);
        let g = path_digraph(m).unwrap();
        let l = analyze(&g).max_in_distance[m - 1].unwrap();
        assert_eq!(l, m - 1);
        let h = rounds(agents_for(&p.dx, &p.dy, m, N + 1, true), &g, l + 4);
        for round in &h[l + 1..] {
            assert!(matches(&round[m - 1].c, &oracle), "M = {m}");
        }
    }
}

#[test]
fn containment_propagates_along_ring_paths() {
    let m = 5;
    let (p, _) = oracle_for(7, 8 * m + N + 1);
    let g = ring_digraph(m).unwrap();
    let h = rounds(agents_for(&p.dx, &p.dy, m, N + 1, true), &g, 2 * m);
    for k in 0..h.len() {
        for j in 0..m {
            for l in 0..m {
                let i = (j + l) % m;
                for q in (k + l)..h.len() {
                    let r = linalg::containment_residual(h[q][i].c.span(), h[k][j].c.span()).unwrap();
                    assert!(r < 1e-8, "k {k} j {j} i {i} q {q}: {r}");
                }
            }
        }
    }
}

#[test]
fn column_total_falls_while_flags_are_down() {
    for seed in 0..10u64 {
        let m = 4;
        let (p, _) = oracle_for(200 + seed, 6 * m + N + 1);
        let mut rng = RngSeed(seed).substream("graph").rng();
        let g = random_strong_digraph(&mut rng, m, 0.1);
        let h = rounds(agents_for(&p.dx, &p.dy, m, N + 1, true), &g, m * N + 2);
        let total = |r: &[AgentState]| r.iter().map(|a| a.c.ncols()).sum::<usize>();
        let mut unflagged = 0;
        for k in 1..h.len() {
            if h[k].iter().any(|a| !a.flag) {
                unflagged += 1;
                assert!(total(&h[k]) < total(&h[k - 1]), "seed {seed} round {k}");
            }
        }
        assert!(unflagged <= m * N);
    }
}

#[test]
fn all_flags_freeze_the_state() {
    for seed in 0..10u64 {
        let m = 5;
        let (p, _) = oracle_for(300 + seed, 6 * m + N + 1);
        let mut rng = RngSeed(seed).substream("graph").rng();
        let g = random_strong_digraph(&mut rng, m, 0.3);
        let h = rounds(agents_for(&p.dx, &p.dy, m, N + 1, true), &g, m * N + 4);
        let l = (1..h.len()).find(|&k| h[k].iter().all(|a| a.flag)).expect("flags set");
        for later in &h[l..] {
            for (a, b) in later.iter().zip(&h[l - 1]) {
                assert_eq!(a.c, b.c, "seed {seed}");
            }
        }
    }
}

#[test]
fn packet_drops_still_reach_the_oracle() {
    let tol = Tolerances::default();
    let m = 5;
    for (t, p_drop) in [0.0, 0.3, 0.6, 0.9].into_iter().enumerate() {
        for seed in 0..3u64 {
            let (p, oracle) = oracle_for(400 + seed, 8 * m + N + 1);
            let schedule = DigraphSchedule::Dropped {
                graph: ring_digraph(m).unwrap(),
                p: p_drop,
                seed: RngSeed(seed).indexed(t as u64),
            };
            let mut opts = PssdOptions::for_schedule(&schedule, 500);
            opts.stop = StopRule::Consensus;
            let rep = run_pssd(agents_for(&p.dx, &p.dy, m, N + 1, true), &schedule, &tol, &opts, Some(&oracle)).unwrap();
            assert!(rep.consensus_round.is_some(), "p {p_drop} seed {seed}");
            assert!(rep.final_coeffs.iter().all(|c| matches(c, &oracle)));
        }
    }
}

#[test]
fn jointly_connected_sequence_reaches_the_oracle() {
    let tol = Tolerances::default();
    let m = 4;
    let graphs = vec![
        Digraph::new(m, [(0, 1), (1, 0), (2, 1), (3, 2)]).unwrap(),
        Digraph::new(m, [(0, 2), (1, 3), (2, 0), (2, 1)]).unwrap(),
    ];
    assert!(is_jointly_strongly_connected(&graphs).unwrap());
    assert!(graphs.iter().all(|g| !analyze(g).strongly_connected));
    let (p, oracle) = oracle_for(500, 8 * m + N + 1);
    let schedule = DigraphSchedule::Sequence { graphs };
    let opts = PssdOptions::for_schedule(&schedule, 200);
    let rep = run_pssd(agents_for(&p.dx, &p.dy, m, N + 1, true), &schedule, &tol, &opts, Some(&oracle)).unwrap();
    assert!(rep.consensus_round.is_some());
    assert!(check_consensus(&rep.final_coeffs.iter().collect::<Vec<_>>(), &oracle, 1e-8));
}

#[test]
fn equal_inputs_give_equal_reports() {
    let tol = Tolerances::default();
    let m = 6;
    let (p, oracle) = oracle_for(600, 8 * m + N + 1);
    let schedule = DigraphSchedule::Dropped {
        graph: ring_digraph(m).unwrap(),
        p: 0.4,
        seed: RngSeed(9),
    };
    let opts = PssdOptions::for_schedule(&schedule, 500);
    let run = || run_pssd(agents_for(&p.dx, &p.dy, m, N + 1, true), &schedule, &tol, &opts, Some(&oracle)).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn factorization_reuse_does_not_change_iterates() {
    let m = 4;
    let (p, _) = oracle_for(700, 8 * m + N + 1);
    let g = ring_digraph(m).unwrap();
    let with = rounds(agents_for(&p.dx, &p.dy, m, N + 1, true), &g, m + 2);
    let without = rounds(agents_for(&p.dx, &p.dy, m, N + 1, false), &g, m + 2);
    for (x, y) in with.iter().zip(&without) {
        let cx = coeffs(x);
        let cy = coeffs(y);
        for (a, b) in cx.iter().zip(&cy) {
            assert!(linalg::range_equal(a.span(), b.span(), 1e-10));
        }
    }
}
