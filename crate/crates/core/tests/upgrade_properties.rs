use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use srspmd_core::dispatch::SimParams;
use srspmd_core::mincover::min_fleet_weighted;
use srspmd_core::pathnet::SpeedProfile;
use srspmd_core::shareability::{build_graph, ConnectionLimit};
use srspmd_core::synthetic::{grid_network, random_trips, TripGenParams};
use srspmd_core::upgrade::{
    bt_value, evaluate_upgrades, fill_bt, fixed_route_benefit, frontier, legs, EdgeUsage, EvalMode,
    DEFAULT_FRACTIONS,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn frontier_and_rerouting_bounds(seed in any::<u64>()) {
        let net = grid_network(8, 8, 100);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trips = random_trips(&mut rng, &net, &TripGenParams { n_trips: 80, max_length_m: 1000.0, ..TripGenParams::default() });
        let base = SpeedProfile::uniform(2.5);
        let g = build_graph(&trips, &net, &base, ConnectionLimit::Unlimited);
        let sol = min_fleet_weighted(&g, &trips);
        let all = legs(&trips, Some(&sol), &net, &base);
        let usage = EdgeUsage::from_legs(&all, &net);

        let routed: f64 = all.iter().map(|l| l.path.length).sum();
        prop_assert!((usage.weighted_total(&net) - routed).abs() <= 1e-6 * routed);
        let trip_m: f64 = trips.iter().map(|t| t.route_length().unwrap()).sum();
        prop_assert!((routed - trip_m - sol.total_relocation_m).abs() <= 1e-6 * routed);

        let mut plan = frontier(&usage.combined(), &net);
        for w in plan.usage.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        for w in plan.cum_length.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
        for w in plan.b_star.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        prop_assert_eq!(*plan.b_star.last().unwrap(), 1.0);
        prop_assert_eq!(plan.step(plan.total_length()), 1.0);
        let mut last = 0.0;
        for k in 0..=40 {
            let v = plan.step(plan.total_length() * k as f64 / 40.0);
            prop_assert!(v >= last);
            last = v;
        }

        let tier = SpeedProfile::two_tier(2.5, 15.0);
        fill_bt(&mut plan, &DEFAULT_FRACTIONS, &all, &net, &tier);
        for &(k, bt) in &plan.b_t {
            let star = fixed_route_benefit(&plan.flags(k), &all, &net);
            prop_assert!((star - plan.b_star_at(k)).abs() <= 1e-9);
            prop_assert!(bt >= star - 1e-9, "B^T {} < B* {} at {}", bt, star, k);
        }
        prop_assert_eq!(bt_value(&plan.flags(plan.len()), &all, &net, &tier), 1.0);
    }
}

#[test]
fn upgrades_never_enlarge_oracle_fleet() {
    for seed in 0..4 {
        let net = grid_network(8, 8, 100);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trips = random_trips(&mut rng, &net, &TripGenParams { n_trips: 100, max_length_m: 1000.0, ..TripGenParams::default() });
        let base = SpeedProfile::uniform(1.0);
        let g = build_graph(&trips, &net, &base, ConnectionLimit::Unlimited);
        let sol = min_fleet_weighted(&g, &trips);
        let plan = frontier(&EdgeUsage::from_legs(&legs(&trips, Some(&sol), &net, &base), &net).combined(), &net);
        let mut fractions = vec![0.0];
        fractions.extend(DEFAULT_FRACTIONS);
        fractions.push(1.0);
        let params = SimParams::online(base);
        let rows = evaluate_upgrades(&trips, &net, &plan, &fractions, 1.0, 15.0, EvalMode::Oracle, &params).unwrap();
        assert_eq!(rows[0].utilization_ratio, 1.0);
        assert_eq!(rows[0].upgraded_fleet, sol.fleet_size);
        for row in &rows {
            assert_eq!(row.baseline_fleet, sol.fleet_size);
            assert!(row.upgraded_fleet <= row.baseline_fleet);
            assert!(row.utilization_ratio >= 1.0);
        }
        let uniform_fast = {
            let g = build_graph(&trips, &net, &SpeedProfile::uniform(15.0), ConnectionLimit::Unlimited);
            min_fleet_weighted(&g, &trips).fleet_size
        };
        assert_eq!(rows.last().unwrap().upgraded_fleet, uniform_fast);
    }
}

#[test]
fn online_upgrade_evaluation_runs() {
    let net = grid_network(8, 8, 100);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trips = random_trips(&mut rng, &net, &TripGenParams { n_trips: 60, max_length_m: 1000.0, ..TripGenParams::default() });
    let base = SpeedProfile::uniform(2.5);
    let plan = frontier(&EdgeUsage::from_legs(&legs(&trips, None, &net, &base), &net).combined(), &net);
    let params = SimParams::online(base);
    let rows = evaluate_upgrades(&trips, &net, &plan, &[0.0, 1.0], 2.5, 15.0, EvalMode::Online, &params).unwrap();
    assert_eq!(rows[0].fleet_reduction, 0.0);
    assert_eq!(rows[0].utilization_ratio, 1.0);
    assert_eq!(rows[1].upgraded_edges, plan.len());
}
