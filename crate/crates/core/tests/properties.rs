use std::f64::consts::PI;

use lppl_core::model::{LinearParams, Model, NonlinearParams};
use lppl_core::timeseries::{from_decimal_years, moving_average, slice, to_decimal_years, TimeSeries, Window};
use proptest::prelude::*;

fn series(values: Vec<f64>) -> TimeSeries {
    let times = (0..values.len()).map(|i| 2000.0 + i as f64 / 52.0).collect();
    TimeSeries::new(times, values, "p").unwrap()
}

fn bubble(nl: &NonlinearParams, lin: &LinearParams, n: usize) -> TimeSeries {
    let model = Model::default();
    let times: Vec<f64> = (0..n).map(|i| nl.tc - 1.05 + i as f64 / 52.0).collect();
    let values = times.iter().map(|&t| model.value(nl, lin, t).unwrap()).collect();
    TimeSeries::new(times, values, "bubble").unwrap()
}

fn nl_strategy() -> impl Strategy<Value = NonlinearParams> {
    (2008.0..2009.0f64, 0.1..0.9f64, 4.0..14.0f64, 0.1..6.0f64)
        .prop_map(|(tc, m, omega, phi)| NonlinearParams::new(tc, m, omega, phi))
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moving_average_commutes_with_affine_maps(
        values in prop::collection::vec(-100.0..100.0f64, 13..60),
        a in -5.0..5.0f64,
        b in -50.0..50.0f64,
        len in 1usize..13,
    ) {
        let scale = a.abs() * values.iter().fold(0.0f64, |m, v| m.max(v.abs())) + b.abs();
        let s = series(values);
        let lhs = moving_average(&s.map_values(|v| a * v + b).unwrap(), len).unwrap();
        let rhs = moving_average(&s, len).unwrap().map_values(|v| a * v + b).unwrap();
        prop_assert_eq!(lhs.times(), rhs.times());
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * scale, "{} vs {}", x, y);
        }
    }

    #[test]
    fn moving_average_of_length_one_is_identity(values in prop::collection::vec(-1e6..1e6f64, 1..40)) {
        let s = series(values);
        prop_assert_eq!(moving_average(&s, 1).unwrap(), s);
    }

    #[test]
    fn decimal_years_monotone_and_round_trip(days in 0i64..20_000, gap in 1i64..400) {
        let base = chrono_date(days);
        let later = chrono_date(days + gap);
        prop_assert!(to_decimal_years(base) < to_decimal_years(later));
        prop_assert_eq!(from_decimal_years(to_decimal_years(base)), base);
    }

    #[test]
    fn slice_is_idempotent(n in 20usize..80, lo in 0usize..5, width in 8usize..15) {
        let s = series((0..n).map(|i| i as f64).collect());
        let w = Window::new(s.times()[lo], s.times()[lo + width]).unwrap();
        let once = slice(&s, &w).unwrap();
        prop_assert_eq!(slice(&once, &w).unwrap(), once.clone());
        prop_assert_eq!(once.len(), width + 1);
    }

    #[test]
    fn slaved_fit_beats_any_other_linear_triple(
        nl in nl_strategy(),
        probe in nl_strategy(),
        da in -1.0..1.0f64, db in -1.0..1.0f64, dc in -1.0..1.0f64,
    ) {
        let data = bubble(&nl, &LinearParams::new(10.0, -2.0, 0.3), 50);
        let probe = NonlinearParams { tc: nl.tc, ..probe };
        let model = Model::default();
        let slaved = model.slave_linear(&probe, &data).unwrap().lin;
        let other = LinearParams::new(slaved.a + da, slaved.b + db, slaved.c + dc);
        let best: f64 = model.residuals_with(&probe, &slaved, &data).unwrap().iter().map(|r| r * r).sum();
        let worse: f64 = model.residuals_with(&probe, &other, &data).unwrap().iter().map(|r| r * r).sum();
        prop_assert!(best <= worse * (1.0 + 1e-12));
    }

    #[test]
    fn phase_is_two_pi_periodic(nl in nl_strategy()) {
        let data = bubble(&nl, &LinearParams::new(1.0, -0.5, 0.2), 40);
        let model = Model::default();
        let shifted = NonlinearParams { phi: nl.phi + 2.0 * PI, ..nl };
        let probe = NonlinearParams { m: nl.m * 1.1, ..nl };
        let probe_shifted = NonlinearParams { phi: probe.phi + 2.0 * PI, ..probe };
        prop_assert!(close(model.objective(&probe, &data).unwrap(), model.objective(&probe_shifted, &data).unwrap(), 1e-10));
        let a = model.slave_linear(&nl, &data).unwrap().lin;
        let b = model.slave_linear(&shifted, &data).unwrap().lin;
        prop_assert!(close(a.c, b.c, 1e-8));
    }

    #[test]
    fn half_turn_phase_flips_c(nl in nl_strategy(), c in 0.05..0.5f64) {
        let model = Model::default();
        let lin = LinearParams::new(3.0, -1.0, c);
        let turned = NonlinearParams { phi: nl.phi + PI, ..nl };
        let flipped = LinearParams::new(3.0, -1.0, -c);
        for k in 1..20 {
            let t = nl.tc - k as f64 * 0.03;
            let x = model.value(&nl, &lin, t).unwrap();
            let y = model.value(&turned, &flipped, t).unwrap();
            prop_assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn scaling_data_scales_linear_params_and_ssr(nl in nl_strategy(), k in 0.01..100.0f64) {
        let data = bubble(&nl, &LinearParams::new(10.0, -2.0, 0.3), 45);
        let probe = NonlinearParams { omega: nl.omega + 0.5, ..nl };
        let scaled = data.map_values(|v| k * v).unwrap();
        let model = Model::default();
        let a = model.slave_linear(&probe, &data).unwrap().lin;
        let b = model.slave_linear(&probe, &scaled).unwrap().lin;
        prop_assert!(close(b.a, k * a.a, 1e-10));
        prop_assert!(close(b.b, k * a.b, 1e-10));
        prop_assert!(close(b.c, k * a.c, 1e-10));
        let fa = model.objective(&probe, &data).unwrap();
        let fb = model.objective(&probe, &scaled).unwrap();
        prop_assert!(close(fb, k * k * fa, 1e-10));
    }
}

fn chrono_date(days: i64) -> chrono::NaiveDate {
    chrono::NaiveDate::from_ymd_opt(1970, 1, 1).unwrap() + chrono::Duration::days(days)
}
