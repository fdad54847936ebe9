//! Published trial durations (three runs per cell) and the summary figures
//! derived from them.

use mutagrid::metrics::{percent_improvement, trial_stats, TrialSet};

fn stats(d: [f64; 3]) -> (f64, f64) {
    let s = trial_stats(&TrialSet {
        label: String::new(),
        durations: d.to_vec(),
    })
    .unwrap();
    (s.mean, s.stddev)
}

#[test]
fn sample_stddev_matches_printed_cells() {
    // (trials, printed mean, printed stddev)
    let cells = [
        ([737997.0, 720419.0, 735444.0], 731287.0, 9497.8),
        ([434117.0, 433479.0, 446328.0], 437975.0, 7241.2),
        ([198710.0, 215928.0, 198961.0], 204533.0, 9869.2),
        ([634838.0, 619086.0, 630645.0], 628190.0, 8158.0),
        ([252129.0, 249744.0, 259585.0], 253819.0, 5133.6),
        ([332000.0, 344000.0, 351000.0], 342333.0, 9609.0),
        ([1081200.0, 1087000.0, 1081300.0], 1083167.0, 3320.1),
        ([513000.0, 514000.0, 512000.0], 513000.0, 1000.0),
    ];
    for (trials, mean, sd) in cells {
        let (m, s) = stats(trials);
        assert!((m - mean).abs() <= 0.5, "{trials:?}: mean {m}");
        assert!((s - sd).abs() <= 0.1, "{trials:?}: stddev {s} vs {sd}");
    }
}

#[test]
fn gson_by_operator_cell() {
    // Printed as 11634.0; the trials themselves give 11634.249 (hand
    // computation: deviations 6336, -13427, 7091; ss 270711506; /2; sqrt).
    let (m, s) = stats([219561.0, 199798.0, 220316.0]);
    assert_eq!(m, 213225.0);
    assert!((s - 11_634.249_137_782_8).abs() < 1e-6, "{s}");
}

#[test]
fn by_class_improvement_over_unmodified() {
    for (baseline, treatment, expected) in [
        (342333.0, 204533.0, 0.40),
        (1083167.0, 628190.0, 0.42),
        (513000.0, 253819.0, 0.505),
    ] {
        let v = percent_improvement(baseline, treatment).unwrap();
        assert!((v - expected).abs() <= 0.005, "{v} vs {expected}");
    }
}
