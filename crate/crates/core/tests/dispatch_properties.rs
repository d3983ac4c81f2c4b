use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use srspmd_core::dispatch::{
    batch_assign, feasible_pairs, find_double_booking, fleet_for_service_level, max_simultaneous_commitments,
    simulate_lookahead, simulate_online_fixed, simulate_online_growth, Caches, IdleVehicle, Outcome, Request,
    SimParams,
};
use srspmd_core::mincover::min_fleet_weighted;
use srspmd_core::pathnet::{PathNetwork, SpeedProfile};
use srspmd_core::shareability::{build_graph, ConnectionLimit};
use srspmd_core::synthetic::{grid_network, random_trips, TripGenParams};
use srspmd_core::trips::Trip;

fn day(seed: u64, n: usize) -> (PathNetwork, Vec<Trip>) {
    let net = grid_network(10, 10, 100);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trips = random_trips(
        &mut rng,
        &net,
        &TripGenParams {
            n_trips: n,
            max_length_m: 1200.0,
            ..TripGenParams::default()
        },
    );
    (net, trips)
}

fn check_log(records: &[srspmd_core::dispatch::RequestRecord], t_w: f64) {
    assert_eq!(find_double_booking(records), None);
    for r in records {
        if let Some(w) = r.wait_s() {
            assert!(w >= 0.0 && w <= t_w + 1e-6, "wait {w} exceeds limit");
            assert_eq!(r.pickup_s.unwrap() - r.request_s, w);
        } else {
            assert_eq!(r.outcome, Outcome::Dropped);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn online_runs_are_consistent(seed in any::<u64>(), speed in prop::sample::select(vec![1.0, 2.5, 5.0, 10.0]), walk in prop::sample::select(vec![0.0, 100.0, 200.0])) {
        let (net, trips) = day(seed, 120);
        let mut p = SimParams::online(SpeedProfile::uniform(speed));
        p.d_walk = walk;
        p.seed = seed;
        let growth = simulate_online_growth(&trips, &net, &p).unwrap();
        check_log(&growth.records, p.t_w);
        prop_assert_eq!(growth.dropped, 0);
        prop_assert!(growth.fleet_size >= max_simultaneous_commitments(&growth.records));
        prop_assert_eq!(&growth, &simulate_online_growth(&trips, &net, &p).unwrap());

        let fixed = simulate_online_fixed(&trips, &net, 20, &p).unwrap();
        check_log(&fixed.records, p.t_w);
        prop_assert_eq!(fixed.spawned, 0);
        prop_assert!((0.0..=1.0).contains(&fixed.served_within_tw_fraction));
        prop_assert_eq!(&fixed, &simulate_online_fixed(&trips, &net, 20, &p).unwrap());
    }

    #[test]
    fn walking_never_shrinks_pair_set(seed in any::<u64>(), now_offset in 0.0..300.0f64) {
        let (net, trips) = day(seed, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        use rand::Rng;
        let now = trips[0].start_time + now_offset;
        let pending: Vec<Request> = trips.iter().enumerate().take(10).map(|(i, t)| Request { trip: i, request_s: t.start_time.min(now), node: t.start_node }).collect();
        let idle: Vec<IdleVehicle> = (0..15).map(|v| IdleVehicle { vehicle_id: v, node: rng.gen_range(0..net.node_count()) }).collect();
        let mut last: Option<std::collections::HashSet<(usize, usize)>> = None;
        for walk in [0.0, 50.0, 100.0, 300.0] {
            let mut p = SimParams::online(SpeedProfile::uniform(5.0));
            p.d_walk = walk;
            let mut caches = Caches::new(&p);
            let pairs: std::collections::HashSet<(usize, usize)> = feasible_pairs(&pending, &idle, now, &p, &net, &mut caches)
                .iter().map(|c| (c.request, c.vehicle_id)).collect();
            if let Some(prev) = &last {
                prop_assert!(prev.is_subset(&pairs));
            }
            let assigned = batch_assign(&pending, &idle, now, &p, &net, &mut caches);
            let mut vs: Vec<usize> = assigned.iter().map(|c| c.vehicle_id).collect();
            vs.sort_unstable();
            vs.dedup();
            prop_assert_eq!(vs.len(), assigned.len());
            last = Some(pairs);
        }
    }
}

/// Exhaustive batch optimum of (served count, total wait in ms).
fn brute_batch(n_req: usize, cands: &[(usize, usize, i64)]) -> (usize, i64) {
    fn rec(r: usize, n_req: usize, cands: &[(usize, usize, i64)], used: &mut Vec<usize>, size: usize, cost: i64, best: &mut (usize, i64)) {
        if r == n_req {
            if size > best.0 || (size == best.0 && cost < best.1) {
                *best = (size, cost);
            }
            return;
        }
        rec(r + 1, n_req, cands, used, size, cost, best);
        for &(_, v, w) in cands.iter().filter(|c| c.0 == r) {
            if !used.contains(&v) {
                used.push(v);
                rec(r + 1, n_req, cands, used, size + 1, cost + w, best);
                used.pop();
            }
        }
    }
    let mut best = (0, 0);
    rec(0, n_req, cands, &mut Vec::new(), 0, 0, &mut best);
    best
}

#[test]
fn batch_assignment_is_lexicographically_optimal() {
    let net = grid_network(6, 6, 100);
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let now = 1000.0;
        let n_req = rng.gen_range(0..6);
        let pending: Vec<Request> = (0..n_req)
            .map(|i| Request { trip: i, request_s: now - f64::from(rng.gen_range(0..200u32)), node: rng.gen_range(0..36) })
            .collect();
        let idle: Vec<IdleVehicle> = (0..rng.gen_range(0..6)).map(|v| IdleVehicle { vehicle_id: v, node: rng.gen_range(0..36) }).collect();
        let p = SimParams::online(SpeedProfile::uniform(5.0));
        let mut caches = Caches::new(&p);
        let cands: Vec<(usize, usize, i64)> = feasible_pairs(&pending, &idle, now, &p, &net, &mut caches)
            .iter()
            .map(|c| (c.request, c.vehicle_id, ((c.pickup_s - pending[c.request].request_s) * 1000.0).round() as i64))
            .collect();
        let got = batch_assign(&pending, &idle, now, &p, &net, &mut caches);
        let cost: i64 = got.iter().map(|c| ((c.pickup_s - pending[c.request].request_s) * 1000.0).round() as i64).sum();
        assert_eq!((got.len(), cost), brute_batch(n_req, &cands));
    }
}

#[test]
fn walking_lowers_growth_fleet_on_average() {
    let mut fleets = [0usize; 2];
    for seed in 0..5 {
        let (net, trips) = day(seed, 150);
        for (k, walk) in [0.0, 100.0].into_iter().enumerate() {
            let mut p = SimParams::online(SpeedProfile::uniform(1.0));
            p.d_walk = walk;
            fleets[k] += simulate_online_growth(&trips, &net, &p).unwrap().fleet_size;
        }
    }
    assert!(fleets[1] < fleets[0], "{fleets:?}");
}

#[test]
fn full_day_lookahead_matches_oracle_utilization() {
    for seed in 0..5 {
        let (net, trips) = day(seed, 50);
        let profile = SpeedProfile::uniform(2.5);
        let g = build_graph(&trips, &net, &profile, ConnectionLimit::Unlimited);
        let oracle = min_fleet_weighted(&g, &trips).fleet_size;
        let la = simulate_lookahead(&trips, &net, &SimParams::lookahead(profile, 86_400.0)).unwrap();
        check_log(&la.records, 0.0);
        assert_eq!(la.spawned, la.fleet_size);
        let ratio = oracle as f64 / la.fleet_size as f64;
        assert!(ratio >= 0.95, "seed {seed}: oracle {oracle}, look-ahead {}", la.fleet_size);
    }
}

#[test]
fn short_window_far_trips_need_one_vehicle_each() {
    let net = grid_network(20, 1, 100);
    let trips: Vec<Trip> = (0..5)
        .map(|i| {
            let (s, e) = (4 * i as usize, 4 * i as usize + 1);
            Trip::between_nodes(&net, i, i as f64 * 120.0, i as f64 * 120.0 + 60.0, s, e)
        })
        .collect();
    let la = simulate_lookahead(&trips, &net, &SimParams::lookahead(SpeedProfile::uniform(1.0), 300.0)).unwrap();
    assert_eq!(la.fleet_size, 5);
}

#[test]
fn bisection_brackets_target() {
    let (net, trips) = day(3, 100);
    let p = SimParams::online(SpeedProfile::uniform(5.0));
    let target = 0.6;
    let fleet = fleet_for_service_level(&trips, &net, &p, target, 1).unwrap();
    let at = simulate_online_fixed(&trips, &net, fleet, &p).unwrap().served_within_tw_fraction;
    let below = simulate_online_fixed(&trips, &net, fleet - 1, &p).unwrap().served_within_tw_fraction;
    assert!(at >= target);
    assert!(below < target);
}
