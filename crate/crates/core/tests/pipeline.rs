//! Cross-module behavior: shadow concentration against oracle ground truth,
//! retention/quality trade-off, heatmap fidelity, and flow round-trips on
//! solved instances.

use mapf_mmot_core::bench::plot;
use mapf_mmot_core::exact;
use mapf_mmot_core::instance::{generate_grid, CostModel, Instance};
use mapf_mmot_core::oracle;
use mapf_mmot_core::project::{self, P3Params, RetentionPolicy};
use mapf_mmot_core::sinkhorn::{self, SinkhornParams};
use mapf_mmot_core::timeexp;

/// At low temperature nearly all shadow mass must ride arcs that some
/// minimum-cost plan actually uses.
#[test]
fn cold_shadow_concentrates_on_optimal_corridors() {
    let inst = generate_grid(3, 3, 0, 1, 5).unwrap().with_horizon(4);
    let horizon = 4;
    let optimal = oracle::optimal_arc_union(&inst, horizon).unwrap();
    let shadow = sinkhorn::run(
        &inst,
        horizon,
        SinkhornParams {
            epsilon: 0.05,
            max_sweeps: 4000,
            tol: 1e-6,
            ..Default::default()
        },
    )
    .unwrap();
    let mut on_optimal = 0.0;
    let mut total = 0.0;
    for t in 1..=horizon {
        for (e, &(i, j)) in inst.edges().iter().enumerate() {
            let mass = shadow.slice(t)[e];
            total += mass;
            if optimal.contains(&(t, i, j)) {
                on_optimal += mass;
            }
        }
    }
    let share = on_optimal / total;
    assert!(
        share >= 0.90,
        "only {:.1}% of shadow mass on optimal arcs",
        100.0 * share
    );
}

/// Average cost gap may not grow when more arcs are retained.
#[test]
fn gap_is_monotone_in_retention_on_average() {
    let keeps = [0.25, 0.5, 1.0];
    let horizon = 10;
    let mut means = Vec::new();
    for &keep in &keeps {
        let mut gaps = Vec::new();
        for seed in 1..=10u64 {
            let inst = generate_grid(10, 10, 5, 6, seed).unwrap().with_horizon(horizon);
            let (_, p1) = exact::solve_p1(&inst, horizon).unwrap();
            let shadow = sinkhorn::run(
                &inst,
                horizon,
                SinkhornParams {
                    max_sweeps: 250,
                    ..Default::default()
                },
            )
            .unwrap();
            let (_, p3) = project::solve_p3(
                &inst,
                &shadow,
                P3Params {
                    lambda: 0.0,
                    delta: 1e-6,
                    retention: RetentionPolicy::KeepFraction(keep),
                },
            )
            .unwrap();
            gaps.push(100.0 * (p3.cost.to_f64() - p1.cost.to_f64()) / p1.cost.to_f64());
        }
        means.push(gaps.iter().sum::<f64>() / gaps.len() as f64);
    }
    assert!(
        means[0] >= means[1] && means[1] >= means[2],
        "gap means {means:?} not monotone in retention"
    );
    assert!(means[2].abs() < 1e-9, "full retention must recover the optimum");
}

/// The heatmap's stroke opacities must be proportional to aggregated mass,
/// with the densest arcs sitting on oracle-optimal corridors.
#[test]
fn shadow_heatmap_opacity_tracks_mass() {
    let inst = generate_grid(3, 3, 0, 1, 5).unwrap().with_horizon(4);
    let shadow = sinkhorn::run(
        &inst,
        4,
        SinkhornParams {
            epsilon: 0.05,
            max_sweeps: 3000,
            tol: 1e-6,
            ..Default::default()
        },
    )
    .unwrap();
    let svg = plot::plot_shadow_svg(&inst, &shadow);

    // Parse back the emitted opacities and masses.
    let mut parsed: Vec<(usize, usize, f64, f64)> = Vec::new();
    for line in svg.lines() {
        if !line.contains("data-from") {
            continue;
        }
        let grab = |key: &str| -> f64 {
            let tag = format!("{key}=\"");
            let start = line.find(&tag).unwrap() + tag.len();
            let end = line[start..].find('"').unwrap() + start;
            line[start..end].parse().unwrap()
        };
        parsed.push((
            grab("data-from") as usize,
            grab("data-to") as usize,
            grab("stroke-opacity"),
            grab("data-mass"),
        ));
    }
    assert!(!parsed.is_empty());

    // Proportionality: opacity == mass / max_mass within print precision.
    let max_mass = parsed.iter().map(|p| p.3).fold(0.0f64, f64::max);
    for &(_, _, opacity, mass) in &parsed {
        assert!((opacity - mass / max_mass).abs() < 2e-3, "{opacity} vs {mass}");
    }

    // The darkest arc lies on an oracle-optimal corridor.
    let optimal = oracle::optimal_arc_union(&inst, 4).unwrap();
    let optimal_edges: std::collections::HashSet<(usize, usize)> =
        optimal.iter().map(|&(_, i, j)| (i, j)).collect();
    let darkest = parsed
        .iter()
        .max_by(|a, b| a.2.total_cmp(&b.2))
        .unwrap();
    assert!(
        optimal_edges.contains(&(darkest.0, darkest.1)),
        "darkest arc {darkest:?} off the optimal corridors"
    );
}

/// Flow representation round-trips through the plan on solved instances.
#[test]
fn solved_plans_round_trip_through_flows() {
    let mut round_trips = 0;
    for seed in 0..20u64 {
        let inst = generate_grid(4, 4, 2, 3, seed).unwrap();
        let horizon = 7;
        let Ok((plan, _)) = exact::solve_p1(&inst, horizon) else {
            continue;
        };
        let teg = timeexp::build(&inst, horizon).unwrap();
        let flows = timeexp::plan_to_flow(&teg, &plan).unwrap();
        let back = timeexp::flow_to_plan(&teg, &flows).unwrap();
        assert_eq!(plan, back, "seed {seed}");
        round_trips += 1;
    }
    assert!(round_trips >= 15);
}

/// Waits cost nothing at targets, so arriving early and waiting matches the
/// minimum move count under the min-move cost regime.
#[test]
fn min_move_regime_matches_oracle_move_counts() {
    for seed in [0u64, 3, 7, 12, 19] {
        let inst = generate_grid(3, 3, 1, 2, seed).unwrap();
        let horizon = 4;
        // Small positive wait cost, unit moves: optimal plans minimize moves.
        let edge_count = inst.edge_count() as f64;
        let tiny_wait = 1.0 / (2.0 * edge_count * horizon as f64);
        let inst = inst
            .with_cost_model(CostModel::Uniform {
                move_cost: 1.0,
                wait_nontarget: tiny_wait,
                wait_target: 0.0,
            })
            .unwrap();
        let (Ok(min_moves), Ok((plan, _))) = (
            oracle::brute_force_min_moves(&inst, horizon),
            exact::solve_p1(&inst, horizon),
        ) else {
            continue;
        };
        assert_eq!(plan.move_count(), min_moves, "seed {seed}");
    }
}

/// Cross-check of a fixed makespan-vs-cost scenario: a corridor with tolled
/// interior forces the min-cost route around the boundary when time allows
/// and through the toll when it does not.
#[test]
fn tolled_interior_trades_cost_for_makespan() {
    // 1x5 path with an expensive shortcut edge overlaid as a metric table.
    let mut edges = vec![(0usize, 0usize)];
    for v in 1..5usize {
        edges.push((v, v));
        edges.push((v - 1, v));
        edges.push((v, v - 1));
    }
    // Shortcut 0 -> 4 directly, priced above the four-step path.
    edges.push((0, 4));
    edges.sort_unstable();
    let lengths: Vec<mapf_mmot_core::instance::EdgeLength> = edges
        .iter()
        .filter(|&&(i, j)| i != j)
        .map(|&(i, j)| mapf_mmot_core::instance::EdgeLength {
            from: i,
            to: j,
            length: if (i, j) == (0, 4) { 10.0 } else { 1.0 },
        })
        .collect();
    let inst = Instance::new(
        5,
        edges,
        vec![],
        vec![0],
        vec![4],
        6,
        CostModel::Metric {
            lengths,
            wait_nontarget: 0.25,
            wait_target: 0.0,
        },
        None,
        None,
    )
    .unwrap();

    // Enough time: walk the cheap path, cost 4.
    let (_, relaxed) = exact::solve_p1(&inst, 5).unwrap();
    assert_eq!(relaxed.cost.to_f64(), 4.0);
    // One step only: forced through the toll edge.
    let (_, rushed) = exact::solve_p1(&inst, 1).unwrap();
    assert_eq!(rushed.cost.to_f64(), 10.0);
    // The minimum makespan is still 1 thanks to the shortcut.
    let (t_star, _, _) = exact::min_makespan_search(&inst).unwrap();
    assert_eq!(t_star, 1);
}
