//! Monte Carlo estimates checked against exhaustive enumeration, exact
//! distributions and closed-form arithmetic.

use dcn_robust::analytic::{normalized_time, normalized_time_at_fer, FailureType};
use dcn_robust::simulation::{
    classed_sweep, confidence_interval, element_universe, first_disconnection, first_disconnection_by_traversal,
    sample_removals, simulate_nmttf, sub_seed, survival_sweep, survival_sweep_2d, ElementClass, ExperimentPlan,
    Interval, Metric, MetricSample,
};
use dcn_robust::topology::{build, TopologyParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn within(ci: &Interval, x: f64) -> bool {
    ci.half_width.is_some_and(|h| (x - ci.mean).abs() <= h + 1e-12)
}

fn for_each_permutation(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        for_each_permutation(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Exact NMTTF: average over every removal order of the normalized time at
/// the first disconnection, found by re-checking after each removal.
fn exhaustive_nmttf(params: &TopologyParams, failure: FailureType) -> f64 {
    let topo = build(params).unwrap();
    let mut universe = element_universe(&topo, failure);
    let total = universe.len() as u64;
    let (mut sum, mut count) = (0.0, 0u64);
    for_each_permutation(&mut universe, 0, &mut |order| {
        let f = first_disconnection_by_traversal(&topo, failure, order);
        sum += normalized_time(f as u64, total).unwrap();
        count += 1;
    });
    sum / count as f64
}

#[test]
fn bcube_2_1_link_nmttf_matches_permutation_average() {
    let params = TopologyParams::bcube(2, 1);
    let oracle = exhaustive_nmttf(&params, FailureType::Link);
    let plan = ExperimentPlan::reliability(params, FailureType::Link)
        .with_samples(2000)
        .with_seed(11);
    let r = simulate_nmttf(&plan).unwrap();
    assert_eq!(r.elements, 8);
    assert!(within(&r.nmttf_sim, oracle), "oracle {oracle} vs {:?}", r.nmttf_sim);
}

#[test]
fn tiny_topologies_match_permutation_average() {
    let cases = [
        (TopologyParams::bcube(2, 1), FailureType::Switch),
        (TopologyParams::dcell(2, 1), FailureType::Switch),
        (TopologyParams::fat_tree(2), FailureType::Link),
        (TopologyParams::fat_tree(2), FailureType::Switch),
        (TopologyParams::three_layer(1, 1, 1), FailureType::Switch),
        (TopologyParams::three_layer(1, 2, 1), FailureType::Switch),
    ];
    for (i, (params, failure)) in cases.into_iter().enumerate() {
        let oracle = exhaustive_nmttf(&params, failure);
        let plan = ExperimentPlan::reliability(params, failure)
            .with_samples(3000)
            .with_seed(100 + i as u64);
        let r = simulate_nmttf(&plan).unwrap();
        assert!(r.elements <= 8);
        assert!(
            within(&r.nmttf_sim, oracle),
            "{} {failure}: oracle {oracle} vs {:?}",
            params.label(),
            r.nmttf_sim
        );
    }
}

#[test]
fn reverse_union_find_equals_forward_recheck_on_random_orders() {
    for params in [TopologyParams::fat_tree(4), TopologyParams::bcube(3, 1), TopologyParams::dcell(3, 1)] {
        let topo = build(&params).unwrap();
        for failure in [FailureType::Link, FailureType::Switch] {
            let universe = element_universe(&topo, failure);
            for k in 0..50u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(9, &[k]));
                let order: Vec<usize> = sample_removals(&mut rng, universe.len(), universe.len())
                    .into_iter()
                    .map(|i| universe[i])
                    .collect();
                assert_eq!(
                    first_disconnection(&topo, failure, &order),
                    first_disconnection_by_traversal(&topo, failure, &order),
                    "{} {failure}",
                    params.label()
                );
            }
        }
    }
}

#[test]
fn removal_subsets_are_uniform() {
    // all 10 subsets of size 2 out of 5, 20000 draws: chi-square with 9
    // degrees of freedom, 0.1% critical value 27.88
    let draws = 20_000u64;
    let mut counts = [0u64; 10];
    let index = |a: usize, b: usize| {
        let (a, b) = (a.min(b), a.max(b));
        (0..a).map(|i| 4 - i).sum::<usize>() + (b - a - 1)
    };
    for k in 0..draws {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(77, &[k]));
        let s = sample_removals(&mut rng, 5, 2);
        counts[index(s[0], s[1])] += 1;
    }
    let expected = draws as f64 / 10.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < 27.88, "chi-square {chi2}, counts {counts:?}");
}

#[test]
fn marked_elements_follow_hypergeometric_law() {
    // 3 draws from 5 with elements {0, 1} marked: P(X = x) = C(2,x) C(3,3-x) / C(5,3)
    let probs = [1.0 / 10.0, 6.0 / 10.0, 3.0 / 10.0];
    let draws = 20_000u64;
    let mut counts = [0u64; 3];
    for k in 0..draws {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(78, &[k]));
        let x = sample_removals(&mut rng, 5, 3).into_iter().filter(|&i| i < 2).count();
        counts[x] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, p)| {
            let e = p * draws as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    // 2 degrees of freedom, 0.1% critical value 13.82
    assert!(chi2 < 13.82, "chi-square {chi2}, counts {counts:?}");
}

#[test]
fn interval_arithmetic() {
    let mut xs = vec![0.0; 1000];
    xs.extend(vec![1.0; 1000]);
    let ci = confidence_interval(&xs).unwrap();
    assert_eq!(ci.mean, 0.5);
    assert!((ci.half_width.unwrap() - 1.96 * 0.5 / 2000f64.sqrt()).abs() < 1e-4);
}

fn point(rows: &[MetricSample], failure: FailureType, fer: f64) -> &MetricSample {
    rows.iter()
        .find(|r| r.fer(failure).is_some_and(|x| (x - fer).abs() < 1e-12))
        .unwrap()
}

#[test]
fn fat_tree_link_ratio_removes_same_share_of_servers() {
    let plan = ExperimentPlan::sweep(TopologyParams::fat_tree(24), FailureType::Link, vec![0.0, 0.3])
        .with_samples(100)
        .with_seed(5);
    let rows = survival_sweep(&plan, None).unwrap();
    assert_eq!(point(&rows, FailureType::Link, 0.0).mean, Some(1.0));
    let asr = point(&rows, FailureType::Link, 0.3).mean.unwrap();
    assert!((asr - 0.7).abs() <= 0.01, "{asr}");
}

#[test]
fn zero_ratio_keeps_every_server_connected() {
    for params in [
        TopologyParams::three_layer(2, 3, 2),
        TopologyParams::fat_tree(4),
        TopologyParams::bcube(3, 2),
        TopologyParams::dcell(3, 2),
    ] {
        for failure in [FailureType::Link, FailureType::Switch, FailureType::Server] {
            let plan = ExperimentPlan::sweep(params, failure, vec![0.0])
                .with_samples(3)
                .with_metrics(vec![Metric::Asr, Metric::Sc]);
            for row in survival_sweep(&plan, None).unwrap() {
                assert_eq!(row.mean, Some(1.0), "{} {failure} {}", params.label(), row.metric);
            }
        }
    }
}

#[test]
fn two_dimensional_sweep_agrees_with_marginals() {
    let params = TopologyParams::dcell(8, 1);
    let grid = vec![0.0, 0.2, 0.4];
    let plan_2d = ExperimentPlan::sweep_2d(params, (FailureType::Link, grid.clone()), (FailureType::Switch, grid.clone()))
        .with_samples(200)
        .with_seed(3);
    let surface = survival_sweep_2d(&plan_2d, None).unwrap();
    assert_eq!(surface.len(), 9);
    let origin = surface
        .iter()
        .find(|r| r.fer_link == Some(0.0) && r.fer_switch == Some(0.0))
        .unwrap();
    assert_eq!(origin.mean, Some(1.0));
    for failure in [FailureType::Link, FailureType::Switch] {
        let plan = ExperimentPlan::sweep(params, failure, grid.clone())
            .with_samples(200)
            .with_seed(4);
        let line = survival_sweep(&plan, None).unwrap();
        for &s in &grid {
            let other = if failure == FailureType::Link { FailureType::Switch } else { FailureType::Link };
            let cell = surface
                .iter()
                .find(|r| r.fer(failure) == Some(s) && r.fer(other) == Some(0.0))
                .unwrap();
            let one = point(&line, failure, s);
            let gap = (cell.mean.unwrap() - one.mean.unwrap()).abs();
            let slack = cell.ci95_half.unwrap() + one.ci95_half.unwrap() + 1e-12;
            assert!(gap <= slack, "{failure} {s}: {gap} > {slack}");
        }
    }
}

#[test]
fn five_interface_bcube_is_bounded_by_port_isolation() {
    // a server drops out once all 5 of its ports are dead, a port being dead
    // when its link or its switch failed; the largest component cannot
    // hold an isolated server
    let grid: Vec<f64> = (0..=4).map(|k| f64::from(k) * 0.1).collect();
    let plan = ExperimentPlan::sweep_2d(
        TopologyParams::bcube(5, 4),
        (FailureType::Link, grid.clone()),
        (FailureType::Switch, grid),
    )
    .with_samples(20)
    .with_seed(8);
    for row in survival_sweep_2d(&plan, None).unwrap() {
        let (pl, ps) = (row.fer_link.unwrap(), row.fer_switch.unwrap());
        let isolated = (1.0 - (1.0 - pl) * (1.0 - ps)).powi(5);
        let mean = row.mean.unwrap();
        assert!(mean <= 1.0 - isolated + 3.0 * row.ci95_half.unwrap() + 0.002, "{row:?}");
        assert!(mean >= 1.0 - isolated - 0.025, "{row:?}");
        if pl + ps <= 0.2 + 1e-12 {
            assert!(mean > 0.99, "{row:?}");
        }
    }
}

#[test]
fn classed_sweeps_on_three_layer() {
    let params = TopologyParams::three_layer(12, 48, 6);
    let plan = ExperimentPlan::sweep(params, FailureType::Switch, vec![0.0])
        .with_samples(200)
        .with_seed(21);
    let grid = [0.0, 0.1, 0.2, 0.3, 0.4];

    let zero = classed_sweep(
        &plan,
        ElementClass::EdgeSwitch,
        &[0.0],
        &[(ElementClass::AggSwitch, 0.0), (ElementClass::CoreSwitch, 0.0), (ElementClass::CoreLink, 0.0)],
        None,
    )
    .unwrap();
    assert_eq!(zero[0].mean, Some(1.0));

    // edge switches carry equal server shares, so ASR ~ 1 - ⌊fer·72⌋/72
    let edge_only = classed_sweep(&plan, ElementClass::EdgeSwitch, &grid, &[(ElementClass::AggSwitch, 0.0)], None).unwrap();
    for row in &edge_only {
        let fer = row.fer_switch.unwrap();
        let expected = 1.0 - (fer * 72.0 + 1e-9).floor() / 72.0;
        assert!((row.mean.unwrap() - expected).abs() < 1e-12, "{fer}: {row:?}");
    }

    // one surviving core switch keeps the fabric connected
    let half_core = classed_sweep(&plan, ElementClass::EdgeSwitch, &grid, &[(ElementClass::CoreSwitch, 0.5)], None).unwrap();
    let no_core = classed_sweep(&plan, ElementClass::EdgeSwitch, &grid, &[(ElementClass::CoreSwitch, 0.0)], None).unwrap();
    for (a, b) in half_core.iter().zip(&no_core) {
        let gap = (a.mean.unwrap() - b.mean.unwrap()).abs();
        assert!(gap <= a.ci95_half.unwrap() + b.ci95_half.unwrap() + 1e-12, "{a:?} vs {b:?}");
    }
}

#[test]
fn classed_sweep_rejects_other_topologies() {
    let plan = ExperimentPlan::sweep(TopologyParams::fat_tree(4), FailureType::Switch, vec![0.0]);
    let err = classed_sweep(&plan, ElementClass::EdgeSwitch, &[0.1], &[], None).unwrap_err();
    assert!(err.to_string().contains("three-layer"), "{err}");
}

#[test]
fn normalized_time_hardly_depends_on_population() {
    let times: Vec<f64> = [759u64, 5133, 16380]
        .into_iter()
        .map(|f| normalized_time_at_fer(0.4, f).unwrap())
        .collect();
    let (lo, hi) = times.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    assert!((hi - lo) / hi < 1e-3, "{times:?}");
}

#[test]
fn dcell2_switch_nmttf_is_exact() {
    // any two failed switches cut the single link between their cells
    let plan = ExperimentPlan::reliability(TopologyParams::dcell(58, 1), FailureType::Switch)
        .with_samples(2000)
        .with_seed(12);
    let r = simulate_nmttf(&plan).unwrap();
    let exact = (4.0f64 * 3422.0 + 1.0).sqrt() / 3422.0;
    assert!(within(&r.nmttf_sim, exact), "{:?} vs {exact}", r.nmttf_sim);
    assert!(r.nmttf_sim.half_width.unwrap() < 0.05 * exact);
    assert!((r.nmttf_theoretical.unwrap() - exact).abs() < 1e-15);
}

#[test]
fn fat_tree_link_nmttf_tracks_closed_form() {
    let plan = ExperimentPlan::reliability(TopologyParams::fat_tree(24), FailureType::Link)
        .with_samples(2000)
        .with_seed(7);
    let r = simulate_nmttf(&plan).unwrap();
    assert!((r.nmttf_theoretical.unwrap() - 1.0 / 3456.0).abs() < 1e-15);
    assert!(r.relative_error.unwrap() < 0.10);
    assert!((r.critical_fer * r.elements as f64 - r.critical_points.iter().sum::<usize>() as f64 / 2000.0).abs() < 1e-9);
}
