use statrs::distribution::{ChiSquared, ContinuousCDF};

use srspmd_core::demand::{replaceable_share, sample_trips, BusOdTable, DayType, DemandParams};
use srspmd_core::synthetic::grid_network;

fn table(net: &srspmd_core::pathnet::PathNetwork) -> BusOdTable {
    let stops: Vec<(String, f64, f64)> = (0..6).map(|i| (format!("S{i}"), (i % 3) as f64 * 400.0, (i / 3) as f64 * 400.0)).collect();
    let buildings: Vec<(f64, f64)> = (0..40).map(|k| ((k % 8) as f64 * 110.0, (k / 8) as f64 * 110.0)).collect();
    let mut records = Vec::new();
    for o in 0..6 {
        for d in 0..6 {
            if o == d {
                continue;
            }
            for hour in [7, 8, 9, 12, 17, 18, 21] {
                let count = f64::from(((o * 7 + d * 3 + hour) % 11) as u32) * 22.0;
                records.push((format!("S{o}"), format!("S{d}"), DayType::Workday, hour as i64, count));
            }
            records.push((format!("S{o}"), format!("S{d}"), DayType::Weekend, 10, 8.0));
        }
    }
    BusOdTable::new(net, &stops, &buildings, records).unwrap()
}

#[test]
fn hourly_counts_follow_rates() {
    let net = grid_network(10, 6, 100);
    let t = table(&net);
    let base = DemandParams {
        n_t: 1000,
        max_route_m: 1500.0,
        ..DemandParams::default()
    };
    let cells = srspmd_core::demand::eligible_rates(&t, &net, &base);
    let mut expected = [0.0f64; 24];
    for c in &cells {
        expected[c.hour as usize] += c.rate;
    }
    let total: f64 = expected.iter().sum();
    let mut observed = [0usize; 24];
    let mut n = 0usize;
    for seed in 0..100 {
        let trips = sample_trips(&t, &net, &DemandParams { seed, ..base }).unwrap();
        for trip in &trips {
            let hour = (trip.start_time / 3600.0).floor() as usize;
            assert!(expected[hour] > 0.0);
            assert!(trip.route_length().unwrap() <= base.max_route_m);
            observed[hour] += 1;
            n += 1;
        }
    }
    let mut stat = 0.0;
    let mut dof = 0;
    for h in 0..24 {
        if expected[h] > 0.0 {
            let e = n as f64 * expected[h] / total;
            stat += (observed[h] as f64 - e).powi(2) / e;
            dof += 1;
        }
    }
    let p = 1.0 - ChiSquared::new(f64::from(dof - 1)).unwrap().cdf(stat);
    assert!(p > 0.01, "chi-square p = {p}");
}

#[test]
fn start_times_inside_hour_and_deterministic() {
    let net = grid_network(10, 6, 100);
    let t = table(&net);
    let p = DemandParams {
        n_t: 300,
        seed: 42,
        ..DemandParams::default()
    };
    let a = sample_trips(&t, &net, &p).unwrap();
    assert_eq!(a, sample_trips(&t, &net, &p).unwrap());
    assert_ne!(a, sample_trips(&t, &net, &DemandParams { seed: 43, ..p }).unwrap());
    for w in a.windows(2) {
        assert!(w[0].start_time <= w[1].start_time);
    }
    for trip in &a {
        let hour = (trip.start_time / 3600.0).floor();
        assert!([7.0, 8.0, 9.0, 12.0, 17.0, 18.0, 21.0].contains(&hour));
        assert!(trip.end_time > trip.start_time);
    }
}

#[test]
fn share_is_monotone_in_limit() {
    let net = grid_network(10, 6, 100);
    let t = table(&net);
    let limits = [0.0, 300.0, 500.0, 800.0, 1000.0, 1500.0, 5000.0, f64::INFINITY];
    let shares = replaceable_share(&t, &net, &limits, DayType::Workday, &DemandParams::default());
    assert_eq!(shares[0], 0.0);
    for w in shares.windows(2) {
        assert!(w[0] <= w[1]);
    }
    assert!((shares[limits.len() - 1] - 1.0).abs() < 1e-12);
}
