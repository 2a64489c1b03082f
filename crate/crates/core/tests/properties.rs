//! Property tests over random inputs.

mod common;

use std::collections::BTreeMap;

use common::*;
use firegrid::demographics::{assign_tracts, bus_features, group_fractions, AssignOptions, TractRecord, POPULATION};
use firegrid::geo::LatLon;
use firegrid::grid::ModelId;
use firegrid::model::{MilpModel, Sense, Tag, VarKind};
use firegrid::risk::{classify, line_day_risk, threshold_value, Category, PixelGrid, PixelStats, RasterMeta};
use firegrid::solve::mps::{parse_mps, write_mps};
use firegrid::solve::{relative_gap, solve_model, verify, MicrolpBackend, SolveRequest};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = LatLon> {
    (29.5..30.5f64, -100.5..-99.5f64).prop_map(|(a, b)| LatLon::new(a, b))
}

fn tracts_and_buses() -> impl Strategy<Value = (Vec<TractRecord>, Vec<(String, LatLon)>)> {
    let tract = (point(), 1.0..5000.0f64, 0.0..1.0f64);
    (
        prop::collection::vec(tract, 1..8),
        prop::collection::vec(point(), 1..10),
    )
        .prop_map(|(ts, bs)| {
            let tracts = ts
                .into_iter()
                .enumerate()
                .map(|(i, (center, pop, a))| TractRecord {
                    gidtr: format!("t{i}"),
                    center,
                    features: [
                        (POPULATION.into(), pop),
                        ("A".into(), a * pop),
                        ("B".into(), (1.0 - a) * pop),
                    ]
                    .into(),
                    percentiles: BTreeMap::new(),
                    vuln_flags: BTreeMap::new(),
                })
                .collect();
            let buses = bs.into_iter().enumerate().map(|(i, p)| (format!("b{i}"), p)).collect();
            (tracts, buses)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn assignment_rows_are_distributions((tracts, buses) in tracts_and_buses(), inverse in any::<bool>()) {
        let a = assign_tracts(&tracts, &buses, AssignOptions { inverse_distance: inverse }).unwrap();
        prop_assert!(a.unassigned_tracts.is_empty());
        prop_assert_eq!(a.buses_covered().len(), buses.len());
        for c in 0..tracts.len() {
            let w: Vec<f64> = a.tract_weights(c).map(|(_, w)| w).collect();
            prop_assert!(!w.is_empty());
            prop_assert!(w.iter().all(|x| *x > 0.0 && *x <= 1.0 + 1e-12));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
        let pop_in: f64 = tracts.iter().map(|t| t.population()).sum();
        let pop_out: f64 = bus_features(&tracts, &a).iter().map(|f| f.population()).sum();
        prop_assert!((pop_in - pop_out).abs() <= 1e-9 * pop_in);
    }

    #[test]
    fn group_fractions_ignore_feature_scale((tracts, buses) in tracts_and_buses(), k in 0.01..100.0f64) {
        let a = assign_tracts(&tracts, &buses, AssignOptions::default()).unwrap();
        let ids: Vec<String> = buses.iter().map(|b| b.0.clone()).collect();
        let scaled: Vec<TractRecord> = tracts
            .iter()
            .map(|t| TractRecord { features: t.features.iter().map(|(n, v)| (n.clone(), v * k)).collect(), ..t.clone() })
            .collect();
        let (f1, _) = group_fractions(&bus_features(&tracts, &a), &ids);
        let (f2, _) = group_fractions(&bus_features(&scaled, &a), &ids);
        for (x, y) in f1.iter().zip(&f2) {
            for (g, v) in &x.group_fractions {
                prop_assert!((v - y.group_fractions[g]).abs() <= 1e-9, "{} {} vs {}", g, v, y.group_fractions[g]);
            }
            let sum: f64 = x.group_fractions.values().sum();
            prop_assert!(x.population == 0.0 || (sum - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn category_is_monotone_in_risk(a in 0.0..3e6f64, b in 0.0..3e6f64) {
        let (lo, hi) = (a.min(b), a.max(b));
        let ids = vec!["x".to_string(), "y".to_string()];
        let cls = classify(&ids, &[vec![lo], vec![hi]], 1e6, 1.0).unwrap();
        let rank = |c: Category| match c { Category::Low => 0, Category::Med => 1, Category::High => 2 };
        prop_assert!(rank(cls.matrix[0][0]) <= rank(cls.matrix[1][0]));
    }

    #[test]
    fn threshold_keeps_or_zeroes(v in 0.0..247.0f64, mean in 0.0..200.0f64, sd in 0.0..60.0f64) {
        let s = PixelStats { mean, std_dev: sd };
        let t = threshold_value(v, &s);
        prop_assert!(t == v || t == 0.0);
        prop_assert_eq!(t == v && v != 0.0, v >= mean + sd && v != 0.0);
        prop_assert_eq!(threshold_value(t, &s), t);
    }

    #[test]
    fn line_risk_is_linear_in_pixels(
        vals in prop::collection::vec(0.0..100.0f64, 16),
        k in 0.0..2.4f64,
        p in (30.0..30.04f64, -100.0..-99.96f64),
        q in (30.0..30.04f64, -100.0..-99.96f64),
    ) {
        let meta = RasterMeta { origin_lat: 30.04, origin_lon: -100.0, cell_size_deg: 0.01, rows: 4, cols: 4 };
        let grid = PixelGrid::new(meta, [(7, vals)].into()).unwrap();
        let path = vec![LatLon::new(p.0, p.1), LatLon::new(q.0, q.1)];
        let base = line_day_risk(&path, &grid, 7);
        let scaled = line_day_risk(&path, &grid.scaled(k).unwrap(), 7);
        prop_assert!((scaled - k * base).abs() <= 1e-9 * (1.0 + base));
        // Reversing the path changes nothing.
        let rev: Vec<LatLon> = path.iter().rev().copied().collect();
        prop_assert!((line_day_risk(&rev, &grid, 7) - base).abs() <= 1e-9 * (1.0 + base));
    }

    #[test]
    fn relative_gap_is_nonnegative(obj in -1e6..1e6f64, d in -10.0..10.0f64) {
        let g = relative_gap(obj, obj - d);
        prop_assert!(g >= 0.0);
        prop_assert_eq!(g == 0.0, d <= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mps_round_trip_is_stable(seed in 0u64..5000, k in 0usize..11, budget in 0u8..4) {
        let fx = random_fixture(seed, 12, f64::from(budget));
        let id = ModelId::ALL[k];
        if let Ok(m) = build(&fx, id, f64::from(budget), 1e-4) {
            let text = write_mps(&m).unwrap();
            let back = parse_mps(&text).unwrap();
            prop_assert_eq!(back.vars.len(), m.vars.len());
            prop_assert_eq!(back.rows.len(), m.rows.len());
            for (a, b) in back.vars.iter().zip(&m.vars) {
                prop_assert_eq!(&a.name, &b.name);
                prop_assert_eq!(a.kind, b.kind);
                prop_assert_eq!(a.lower.to_bits(), b.lower.to_bits());
                prop_assert_eq!(a.upper.to_bits(), b.upper.to_bits());
            }
            prop_assert_eq!(write_mps(&back).unwrap().replacen(&back.meta.scenario, &m.meta.scenario, 1), text);
        }
    }

    #[test]
    fn backend_points_verify(seed in 0u64..5000, k in 0usize..11) {
        let fx = random_fixture(seed, 10, 2.0);
        if let Ok(m) = build(&fx, ModelId::ALL[k], 2.0, 1e-4) {
            let mut req = SolveRequest::new(&m);
            req.mip_gap = 1e-4;
            let sol = solve_model(&MicrolpBackend, &req);
            prop_assert!(sol.status.as_str() != "error", "{:?}", sol.message);
            if sol.status.has_solution() {
                let v = verify(&m, &sol.dense(&m));
                prop_assert!(v.feasible, "{:?}", v);
                prop_assert!(balance_residual(&fx.net, &sol.values) <= 1e-8);
            }
        }
    }
}

#[test]
fn writer_matches_hand_written_mps() {
    let mut m = MilpModel::new("tiny");
    let x = m.add_var("x".into(), VarKind::Continuous, 0.0, 4.0, None).unwrap();
    let y = m
        .add_var("y".into(), VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY, None)
        .unwrap();
    let b = m.add_var("b".into(), VarKind::Binary, 0.0, 1.0, None).unwrap();
    m.add_row(
        "cap".into(),
        Tag::Unspecified,
        vec![(x, 1.0), (b, -4.0)],
        Sense::Le,
        0.5,
    );
    m.add_row(
        "link".into(),
        Tag::Unspecified,
        vec![(x, 1.0), (y, -1.0)],
        Sense::Eq,
        1.0,
    );
    m.objective = vec![(x, -1.0), (b, 3.0)];
    let want = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/tiny.mps")).unwrap();
    assert_eq!(write_mps(&m).unwrap(), want);
    let back = parse_mps(&want).unwrap();
    assert_eq!(back.vars, m.vars);
    assert_eq!(back.objective, m.objective);
    assert_eq!(
        back.rows.iter().map(|r| (&r.name, r.sense, r.rhs)).collect::<Vec<_>>(),
        vec![
            (&"cap".to_string(), Sense::Le, 0.5),
            (&"link".to_string(), Sense::Eq, 1.0)
        ]
    );
    // x = 4, b = 1 at the optimum: -4 + 3 = -1.
    let sol = solve_model(&MicrolpBackend, &SolveRequest::new(&back));
    assert!((sol.objective.unwrap() + 1.0).abs() < 1e-9, "{:?}", sol.objective);
}
