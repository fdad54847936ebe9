use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Repeated measurements of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub label: String,
    pub durations: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub stddev: f64,
}

/// Durations of one strategy at several cluster sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingCurve {
    pub strategy: String,
    /// (P, duration), P ascending and distinct.
    pub points: Vec<(u32, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// S_P = D_1 / D_P for every point of the curve.
pub fn speedup(curve: &ScalingCurve) -> Result<Vec<(u32, f64)>, MetricsError> {
    let d1 = curve
        .points
        .iter()
        .find(|(p, _)| *p == 1)
        .map(|&(_, d)| d)
        .ok_or(MetricsError::MissingBaseline)?;
    if curve.points.iter().any(|&(_, d)| d <= 0.0) {
        return Err(MetricsError::ZeroDuration);
    }
    Ok(curve.points.iter().map(|&(p, d)| (p, d1 / d)).collect())
}

/// Fractional reduction of `treatment` relative to `baseline`.
pub fn percent_improvement(baseline: f64, treatment: f64) -> Result<f64, MetricsError> {
    if baseline <= 0.0 || baseline.is_nan() {
        return Err(MetricsError::NonPositiveBaseline);
    }
    Ok(1.0 - treatment / baseline)
}

pub fn trial_stats(trials: &TrialSet) -> Result<TrialStats, MetricsError> {
    let n = trials.durations.len();
    if n < 2 {
        return Err(MetricsError::TooFewTrials(n));
    }
    let mean = trials.durations.iter().sum::<f64>() / n as f64;
    let ss: f64 = trials.durations.iter().map(|d| (d - mean).powi(2)).sum();
    Ok(TrialStats {
        mean,
        stddev: (ss / (n - 1) as f64).sqrt(),
    })
}

/// Ordinary least squares. r² is 1 − SS_res/SS_tot, taken as 0 when every
/// y is equal (SS_tot = 0).
pub fn linear_fit(points: &[(f64, f64)]) -> Result<FitResult, MetricsError> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(MetricsError::DegenerateFit);
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(MetricsError::DegenerateFit);
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        0.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
    })
}

/// Sample coefficient of variation, stddev / mean; 0 for a zero mean.
pub fn coefficient_of_variation(values: &[f64]) -> Result<f64, MetricsError> {
    let s = trial_stats(&TrialSet {
        label: String::new(),
        durations: values.to_vec(),
    })?;
    Ok(if s.mean == 0.0 {
        0.0
    } else {
        s.stddev / s.mean
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(points: &[(u32, f64)]) -> ScalingCurve {
        ScalingCurve {
            strategy: "x".into(),
            points: points.to_vec(),
        }
    }

    #[test]
    fn speedup_examples() {
        assert_eq!(
            speedup(&curve(&[(1, 100.0), (2, 50.0)])).unwrap(),
            vec![(1, 1.0), (2, 2.0)]
        );
        assert_eq!(speedup(&curve(&[(1, 100.0)])).unwrap(), vec![(1, 1.0)]);
        assert_eq!(
            speedup(&curve(&[(2, 100.0)])),
            Err(MetricsError::MissingBaseline)
        );
        assert_eq!(
            speedup(&curve(&[(1, 10.0), (2, 0.0)])),
            Err(MetricsError::ZeroDuration)
        );
    }

    #[test]
    fn improvement_examples() {
        assert_eq!(percent_improvement(100.0, 100.0).unwrap(), 0.0);
        assert_eq!(percent_improvement(100.0, 60.0).unwrap(), 0.4);
        assert!(percent_improvement(0.0, 1.0).is_err());
        assert!(percent_improvement(-1.0, 1.0).is_err());
    }

    #[test]
    fn trial_stats_examples() {
        let s = trial_stats(&TrialSet {
            label: "c".into(),
            durations: vec![5.0, 5.0, 5.0],
        })
        .unwrap();
        assert_eq!((s.mean, s.stddev), (5.0, 0.0));
        // Hand computation: mean 2, deviations (-1, 0, 1), ss 2, n−1 = 2.
        let s = trial_stats(&TrialSet {
            label: "c".into(),
            durations: vec![1.0, 2.0, 3.0],
        })
        .unwrap();
        assert_eq!((s.mean, s.stddev), (2.0, 1.0));
        assert_eq!(
            trial_stats(&TrialSet {
                label: "c".into(),
                durations: vec![1.0]
            }),
            Err(MetricsError::TooFewTrials(1))
        );
    }

    #[test]
    fn fit_examples() {
        let f = linear_fit(&[(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && f.intercept.abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let f = linear_fit(&[(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]).unwrap();
        assert_eq!((f.slope, f.r_squared), (0.0, 0.0));
        assert_eq!(
            linear_fit(&[(1.0, 1.0), (1.0, 2.0)]),
            Err(MetricsError::DegenerateFit)
        );
    }

    proptest! {
        #[test]
        fn collinear_points_fit_exactly(
            slope in -100.0f64..100.0,
            intercept in -1000.0f64..1000.0,
            xs in prop::collection::btree_set(-1000i32..1000, 2..30),
        ) {
            prop_assume!(slope.abs() > 1e-3);
            let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x as f64, slope * x as f64 + intercept)).collect();
            let f = linear_fit(&pts).unwrap();
            prop_assert!((f.r_squared - 1.0).abs() < 1e-12, "{f:?}");
        }

        #[test]
        fn r_squared_in_unit_interval(pts in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..40)) {
            if let Ok(f) = linear_fit(&pts) {
                prop_assert!((0.0..=1.0).contains(&f.r_squared));
            }
        }

        #[test]
        fn speedup_of_baseline_is_one(d in 1e-3f64..1e9, rest in prop::collection::vec(1e-3f64..1e9, 0..5)) {
            let mut pts = vec![(1, d)];
            pts.extend(rest.iter().enumerate().map(|(i, &x)| (i as u32 + 2, x)));
            prop_assert_eq!(speedup(&curve(&pts)).unwrap()[0], (1, 1.0));
        }

        #[test]
        fn no_improvement_against_itself(d in 1e-6f64..1e12) {
            prop_assert_eq!(percent_improvement(d, d).unwrap(), 0.0);
        }
    }
}
