//! Stopping methods checked against values frozen from independent
//! reference computations.

use pstop::methods::{find_knee, knee_stop, poisson_stop_traced, PoissonExit};
use pstop::{oracle_stop, MethodParams, Topic};

fn fixture(name: &str) -> Topic {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().map(|l| l.trim().parse::<usize>().unwrap());
    let n = lines.next().unwrap();
    let ranks: Vec<usize> = lines.collect();
    Topic::from_relevant_ranks(name, n, &ranks).unwrap()
}

// (fixture, total relevant, stop rank) from tests/fixtures/reference_pp.py
const PP_REFERENCE: &[(&str, usize, usize)] = &[
    ("pp_exponential_2000.txt", 108, 600),
    ("pp_shallow_5000.txt", 90, 2286),
    ("pp_step_3000.txt", 83, 1950),
];

#[test]
fn poisson_matches_reference_loop() {
    let params = MethodParams::default();
    for &(name, total, stop) in PP_REFERENCE {
        let topic = fixture(name);
        assert_eq!(topic.total_relevant(), total, "{name}");
        let (out, trace) = poisson_stop_traced(&topic, &params);
        assert_eq!(out.stop_rank, stop, "{name}: {trace:#?}");
        assert!(out.predicted);
        assert_eq!(trace.exit, PoissonExit::Reached);
        assert!(out.relevant_found as f64 >= 0.7 * total as f64, "{name}");
    }
}

/// Direct evaluation of the knee rule at every batch boundary.
fn brute_force_knee(flags: &[bool], alpha: usize, beta: usize, epsilon: usize) -> usize {
    let n = flags.len();
    let cum: Vec<usize> = std::iter::once(0)
        .chain(flags.iter().scan(0, |acc, &f| {
            *acc += usize::from(f);
            Some(*acc)
        }))
        .collect();
    let rel = |r: usize| cum[r];
    let mut end = alpha;
    loop {
        let total = rel(end);
        if total > 0 {
            let mut best = 0.0;
            let mut knee = None;
            for s in 1..end {
                let diff = rel(s) as f64 / total as f64 - s as f64 / end as f64;
                if diff > best {
                    best = diff;
                    knee = Some(s);
                }
            }
            if let Some(s) = knee {
                let ratio = (rel(s) as f64 / s as f64) / ((total - rel(s) + 1) as f64 / (end - s) as f64);
                let threshold = (epsilon + 6 - total.min(epsilon)) as f64;
                if ratio >= threshold {
                    return end;
                }
            }
        }
        if end == n {
            return n;
        }
        end = (end + beta).min(n);
    }
}

#[test]
fn knee_on_convex_gain_curve() {
    // 50 relevant spread evenly over ranks 1..=100, none after, n = 1000
    let ranks: Vec<usize> = (1..=50).map(|i| 2 * i).collect();
    let topic = Topic::from_relevant_ranks("convex", 1000, &ranks).unwrap();
    let params = MethodParams {
        epsilon: 50,
        ..MethodParams::default()
    };
    let flags: Vec<bool> = topic.docs().iter().map(|d| d.relevant).collect();
    let expected = brute_force_knee(&flags, 300, 50, 50);
    assert_eq!(expected, 300);
    let out = knee_stop(&topic, &params);
    assert_eq!(out.stop_rank, expected);
    assert!(out.predicted);
    assert_eq!(find_knee(&topic, 300), Some(100));
}

#[test]
fn knee_matches_brute_force_on_fixtures() {
    for &(name, _, _) in PP_REFERENCE {
        let topic = fixture(name);
        let flags: Vec<bool> = topic.docs().iter().map(|d| d.relevant).collect();
        let n = topic.len();
        for eps in [0, 25, 50, 100, 150, 200] {
            let params = MethodParams {
                epsilon: eps,
                ..MethodParams::default()
            };
            let expected = brute_force_knee(&flags, params.alpha_size(n), params.beta_size(n), eps);
            assert_eq!(knee_stop(&topic, &params).stop_rank, expected, "{name} eps {eps}");
        }
    }
}

#[test]
fn oracle_on_fixtures_enumerates_prefix_recall() {
    let params = MethodParams::default();
    for &(name, total, _) in PP_REFERENCE {
        let topic = fixture(name);
        let need = (0.7 * total as f64 - 1e-9).ceil() as usize;
        let expected = topic.relevant_ranks()[need - 1];
        assert_eq!(oracle_stop(&topic, &params).unwrap().stop_rank, expected);
    }
}
