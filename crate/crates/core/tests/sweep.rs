use std::io::Cursor;

use oamlink::experiment::{csv_string, emit_csv, parse_csv, run_sweep, run_sweep_with_workers, CSV_HEADER};
use oamlink::{CorrectionKind, LinkConfig, Profile};

/// A sweep small enough for a unit-test budget.
fn tiny() -> LinkConfig {
    LinkConfig {
        grid_n: 64,
        cn2_list: vec![2e-14, 1.5e-13],
        l0_list: vec![1, 2],
        realizations: 6,
        bootstrap_resamples: 100,
        master_seed: 314,
        ..LinkConfig::profile(Profile::Desk)
    }
}

#[test]
fn rows_follow_the_configuration_order() {
    let cfg = tiny();
    let rows = run_sweep(&cfg).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 3);
    let mut it = rows.iter();
    for &cn2 in &cfg.cn2_list {
        for &l0 in &cfg.l0_list {
            for &sc in &cfg.scenarios {
                let r = it.next().unwrap();
                assert_eq!((r.cn2, r.l0, r.scenario), (cn2, l0, sc));
                assert!(r.is_ok(), "{:?}", r.error);
                assert_eq!(r.realizations, 6);
                assert!((0.0..=1.0).contains(&r.concurrence));
                assert!(r.trace > 0.0 && r.trace <= 1.0);
                assert!((0.0..=1.0).contains(&r.qber));
            }
        }
    }
    assert!((rows.last().unwrap().w0_over_r0 - 2.01).abs() < 0.01);
}

#[test]
fn output_does_not_depend_on_worker_count() {
    let cfg = tiny();
    let one = run_sweep_with_workers(&cfg, 1, true).unwrap();
    let three = run_sweep_with_workers(&cfg, 3, true).unwrap();
    assert_eq!(csv_string(&one.rows), csv_string(&three.rows));
    assert_eq!(one.ensembles, three.ensembles);

    let other = LinkConfig { master_seed: 315, ..cfg };
    assert_ne!(csv_string(&run_sweep(&other).unwrap()), csv_string(&one.rows));
}

#[test]
fn no_turbulence_gives_perfect_rows() {
    let cfg = LinkConfig {
        cn2_list: vec![0.0],
        ..tiny()
    };
    for r in run_sweep(&cfg).unwrap() {
        assert!(r.concurrence > 0.999 && r.qber < 1e-6, "{r:?}");
        assert_eq!(r.w0_over_r0, 0.0);
    }
}

#[test]
fn unpaired_screens_run_every_scenario() {
    let cfg = LinkConfig {
        paired_screens: false,
        scenarios: vec![CorrectionKind::None, CorrectionKind::Ideal],
        cn2_list: vec![5e-14],
        l0_list: vec![1],
        ..tiny()
    };
    let rows = run_sweep(&cfg).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.is_ok()));
}

#[test]
fn csv_round_trips() {
    let rows = run_sweep(&LinkConfig {
        cn2_list: vec![7e-14],
        ..tiny()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    emit_csv(&rows, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    assert!(lines.all(|l| l.split(',').count() == 12));

    let back = parse_csv(Cursor::new(text.as_bytes())).unwrap();
    assert_eq!(back.len(), rows.len());
    for (a, b) in back.iter().zip(&rows) {
        let pairs = [
            (a.cn2, b.cn2),
            (a.w0_over_r0, b.w0_over_r0),
            (a.concurrence, b.concurrence),
            (a.concurrence_err, b.concurrence_err),
            (a.trace, b.trace),
            (a.trace_err, b.trace_err),
            (a.qber, b.qber),
            (a.qber_err, b.qber_err),
        ];
        for (x, y) in pairs {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!((a.l0, a.scenario, a.realizations, a.seed), (b.l0, b.scenario, b.realizations, b.seed));
    }
    assert_eq!(csv_string(&back), text);
}
