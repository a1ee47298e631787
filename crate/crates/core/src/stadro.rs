//! Robustness estimation against distributional shift.
//!
//! The pipeline builds one `(sdd, performance)` point per validation
//! segment, fits a degree-2 polynomial through the points, inverts the curve
//! at a required minimum performance to obtain the distance threshold
//! `d_pmin`, and issues a boolean verdict per instance: robust iff
//! `d_instance / d_pmin <= 1`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::distance::{DistanceError, DistanceMeasure};
use crate::forecast::{metrics, ForecastError, PredictionRecord};
use crate::num::{count, lit, Scalar};
use crate::series::{Segment, SeriesError, TimeSeries};

#[derive(Debug, Error)]
pub enum StadroError {
    #[error("segment starting at offset {segment_start} has no prediction for tick {tick}")]
    PredictionGap { segment_start: usize, tick: i64 },
    #[error("quadratic fit needs at least 3 points, got {n}")]
    TooFewPoints { n: usize },
    #[error("quadratic fit needs at least 3 distinct sdd values, got {distinct}")]
    RankDeficient { distinct: usize },
    #[error("point at offset {start} has no MAPE value to fit against")]
    MissingMape { start: usize },
    #[error("curve never reaches performance {p_min} at a non-negative distance")]
    NoRoot { p_min: f64 },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
}

/// One validation segment's statistical distance from the training set,
/// paired with the model's observed performance on that segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfSddPoint<T> {
    pub start: usize,
    pub end: usize,
    pub sdd: T,
    pub rmse: T,
    pub mape: Option<T>,
}

/// Which performance metric a curve maps distances onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetricTag {
    #[default]
    Rmse,
    Mape,
}

impl fmt::Display for MetricTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricTag::Rmse => "rmse",
            MetricTag::Mape => "mape",
        })
    }
}

impl FromStr for MetricTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rmse" => Ok(MetricTag::Rmse),
            "mape" => Ok(MetricTag::Mape),
            other => Err(format!("unknown metric `{other}` (expected rmse or mape)")),
        }
    }
}

/// Builds the per-segment curve points: the validation series is cut into
/// length-`l` segments, each segment's distance from the pooled training
/// values is measured, and its performance is computed from the prediction
/// records covering the segment's ticks.
pub fn build_curve_points<T: Scalar>(
    train: &TimeSeries<T>,
    validation: &TimeSeries<T>,
    predictions: &[PredictionRecord<T>],
    l: usize,
    measure: DistanceMeasure,
) -> Result<Vec<PerfSddPoint<T>>, StadroError> {
    let segments = validation.segments(l)?;
    let by_tick: HashMap<i64, &PredictionRecord<T>> =
        predictions.iter().map(|r| (r.time, r)).collect();
    let mut points = Vec::with_capacity(segments.len());
    for segment in &segments {
        let mut records = Vec::with_capacity(segment.len());
        for offset in segment.start..segment.end() {
            let tick = validation.tick_at(offset);
            let record = by_tick.get(&tick).ok_or(StadroError::PredictionGap {
                segment_start: segment.start,
                tick,
            })?;
            records.push(**record);
        }
        let perf = metrics(&records)?;
        let sdd = measure.distance(train.values(), &segment.values)?;
        points.push(PerfSddPoint {
            start: segment.start,
            end: segment.end(),
            sdd,
            rmse: perf.rmse,
            mape: perf.mape,
        });
    }
    Ok(points)
}

/// A least-squares degree-2 polynomial `c0 + c1*d + c2*d^2` mapping
/// statistical distance to expected performance error, with the fitted
/// domain and residual sum of squares.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedCurve<T> {
    pub metric: MetricTag,
    pub coeffs: [T; 3],
    pub domain: (T, T),
    pub rss: T,
    pub n_points: usize,
}

impl<T: Scalar> FittedCurve<T> {
    pub fn evaluate(&self, d: T) -> T {
        self.coeffs[0] + self.coeffs[1] * d + self.coeffs[2] * d * d
    }

    fn derivative(&self, d: T) -> T {
        self.coeffs[1] + lit::<T>(2.0) * self.coeffs[2] * d
    }
}

/// Fits the degree-2 least-squares polynomial through the points for the
/// chosen metric. The solve runs in distance coordinates centered on their
/// mean and the coefficients are expanded back afterwards.
pub fn fit_quadratic<T: Scalar>(
    points: &[PerfSddPoint<T>],
    metric: MetricTag,
) -> Result<FittedCurve<T>, StadroError> {
    if points.len() < 3 {
        return Err(StadroError::TooFewPoints { n: points.len() });
    }
    let ys: Vec<T> = points
        .iter()
        .map(|p| match metric {
            MetricTag::Rmse => Ok(p.rmse),
            MetricTag::Mape => p.mape.ok_or(StadroError::MissingMape { start: p.start }),
        })
        .collect::<Result<_, _>>()?;
    let ds: Vec<T> = points.iter().map(|p| p.sdd).collect();

    let mut distinct = ds.to_vec();
    distinct.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(StadroError::RankDeficient {
            distinct: distinct.len(),
        });
    }

    let n = count::<T>(ds.len());
    let mean: T = ds.iter().copied().sum::<T>() / n;
    let mut s = [T::zero(); 5];
    let mut t = [T::zero(); 3];
    for (&d, &y) in ds.iter().zip(&ys) {
        let u = d - mean;
        let u2 = u * u;
        s[0] = s[0] + T::one();
        s[1] = s[1] + u;
        s[2] = s[2] + u2;
        s[3] = s[3] + u2 * u;
        s[4] = s[4] + u2 * u2;
        t[0] = t[0] + y;
        t[1] = t[1] + y * u;
        t[2] = t[2] + y * u2;
    }
    let mut a = [
        s[0], s[1], s[2], //
        s[1], s[2], s[3], //
        s[2], s[3], s[4],
    ];
    let mut b = t;
    let beta = solve3(&mut a, &mut b).ok_or(StadroError::RankDeficient {
        distinct: distinct.len(),
    })?;

    // Expand from centered coordinates u = d - mean back to d.
    let two = lit::<T>(2.0);
    let c2 = beta[2];
    let c1 = beta[1] - two * beta[2] * mean;
    let c0 = beta[0] - beta[1] * mean + beta[2] * mean * mean;
    let coeffs = [c0, c1, c2];

    let curve = FittedCurve {
        metric,
        coeffs,
        domain: (distinct[0], distinct[distinct.len() - 1]),
        rss: T::zero(),
        n_points: points.len(),
    };
    let rss = ds
        .iter()
        .zip(&ys)
        .map(|(&d, &y)| {
            let r = y - curve.evaluate(d);
            r * r
        })
        .fold(T::zero(), |acc, r| acc + r);
    Ok(FittedCurve { rss, ..curve })
}

/// Gaussian elimination with partial pivoting on a 3x3 system.
fn solve3<T: Scalar>(a: &mut [T; 9], b: &mut [T; 3]) -> Option<[T; 3]> {
    let tiny = lit::<T>(1e-12);
    for col in 0..3 {
        let mut pivot = col;
        for r in col + 1..3 {
            if a[r * 3 + col].abs() > a[pivot * 3 + col].abs() {
                pivot = r;
            }
        }
        if a[pivot * 3 + col].abs() <= tiny {
            return None;
        }
        if pivot != col {
            for c in 0..3 {
                a.swap(col * 3 + c, pivot * 3 + c);
            }
            b.swap(col, pivot);
        }
        for r in col + 1..3 {
            let factor = a[r * 3 + col] / a[col * 3 + col];
            for c in col..3 {
                a[r * 3 + c] = a[r * 3 + c] - factor * a[col * 3 + c];
            }
            b[r] = b[r] - factor * b[col];
        }
    }
    let mut x = [T::zero(); 3];
    for col in (0..3).rev() {
        let mut acc = b[col];
        for c in col + 1..3 {
            acc = acc - a[col * 3 + c] * x[c];
        }
        x[col] = acc / a[col * 3 + col];
    }
    Some(x)
}

/// Result of inverting a curve at a required performance. The warning marks
/// a root where the fitted curve is locally decreasing (a non-monotone fit),
/// which callers may want to surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveInversion<T> {
    pub d_pmin: T,
    pub monotone_warning: bool,
}

/// Smallest non-negative distance `d` with `curve(d) = p_min`.
///
/// Root selection: solve `c2*d^2 + c1*d + (c0 - p_min) = 0`; among the real
/// non-negative roots prefer the smallest at which the curve is
/// non-decreasing (performance error grows with distance, so the first
/// crossing from below is the operational threshold). If only a decreasing
/// crossing exists it is returned with `monotone_warning` set. When `c2` is
/// zero within 1e-12 the linear part is solved instead.
pub fn invert_curve<T: Scalar>(
    curve: &FittedCurve<T>,
    p_min: T,
) -> Result<CurveInversion<T>, StadroError> {
    let [c0, c1, c2] = curve.coeffs;
    let tiny = lit::<T>(1e-12);
    let no_root = || StadroError::NoRoot {
        p_min: p_min.to_f64().unwrap_or(f64::NAN),
    };

    let mut roots: Vec<T> = Vec::with_capacity(2);
    if c2.abs() <= tiny {
        if c1.abs() <= tiny {
            return Err(no_root());
        }
        roots.push((p_min - c0) / c1);
    } else {
        let c = c0 - p_min;
        let disc = c1 * c1 - lit::<T>(4.0) * c2 * c;
        if disc < T::zero() {
            return Err(no_root());
        }
        let sqrt_disc = disc.sqrt();
        // Numerically stable pairing: q carries the large-magnitude sum.
        let q = if c1 >= T::zero() {
            -(c1 + sqrt_disc) / lit::<T>(2.0)
        } else {
            -(c1 - sqrt_disc) / lit::<T>(2.0)
        };
        roots.push(q / c2);
        if q != T::zero() {
            roots.push(c / q);
        } else {
            roots.push(-c1 / (lit::<T>(2.0) * c2));
        }
        roots.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    }

    let eps = lit::<T>(1e-12);
    let candidates: Vec<T> = roots
        .into_iter()
        .filter(|&r| r >= -eps)
        .map(|r| r.max(T::zero()))
        .collect();
    if candidates.is_empty() {
        return Err(no_root());
    }
    let (root, monotone_warning) = match candidates
        .iter()
        .copied()
        .find(|&r| curve.derivative(r) >= T::zero())
    {
        Some(r) => (r, false),
        None => (candidates[0], true),
    };

    // A couple of Newton steps absorb cancellation in the closed form.
    let mut d = root;
    for _ in 0..2 {
        let slope = curve.derivative(d);
        if slope == T::zero() {
            break;
        }
        let next = d - (curve.evaluate(d) - p_min) / slope;
        if next >= T::zero()
            && (curve.evaluate(next) - p_min).abs() < (curve.evaluate(d) - p_min).abs()
        {
            d = next;
        } else {
            break;
        }
    }

    Ok(CurveInversion {
        d_pmin: d,
        monotone_warning,
    })
}

/// Robustness verdict for one instance at a required minimum performance.
/// `ratio = d_instance / d_pmin` and `robust` holds iff the ratio is at most
/// one. `extrapolated` marks instances whose distance falls outside the
/// fitted curve's domain.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessVerdict<T> {
    pub start: usize,
    pub end: usize,
    pub p_min: T,
    pub d_pmin: T,
    pub d_instance: T,
    pub ratio: T,
    pub robust: bool,
    pub extrapolated: bool,
}

impl<T: Scalar> RobustnessVerdict<T> {
    /// Builds the verdict from already-measured distances.
    pub fn from_distances(
        start: usize,
        end: usize,
        p_min: T,
        d_pmin: T,
        d_instance: T,
        domain: (T, T),
    ) -> Self {
        let ratio = d_instance / d_pmin;
        Self {
            start,
            end,
            p_min,
            d_pmin,
            d_instance,
            ratio,
            robust: ratio <= T::one(),
            extrapolated: d_instance < domain.0 || d_instance > domain.1,
        }
    }
}

/// Measures an instance segment's distance from the pooled training values
/// and issues the verdict against the curve's threshold at `p_min`.
pub fn stadro<T: Scalar>(
    train: &TimeSeries<T>,
    instance: &Segment<T>,
    curve: &FittedCurve<T>,
    p_min: T,
    measure: DistanceMeasure,
) -> Result<RobustnessVerdict<T>, StadroError> {
    let inversion = invert_curve(curve, p_min)?;
    let d_instance = measure.distance(train.values(), &instance.values)?;
    Ok(RobustnessVerdict::from_distances(
        instance.start,
        instance.end(),
        p_min,
        inversion.d_pmin,
        d_instance,
        curve.domain,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::PredictionRecord;

    fn curve(coeffs: [f64; 3]) -> FittedCurve<f64> {
        FittedCurve {
            metric: MetricTag::Rmse,
            coeffs,
            domain: (0.0, 10.0),
            rss: 0.0,
            n_points: 5,
        }
    }

    fn point(start: usize, sdd: f64, y: f64) -> PerfSddPoint<f64> {
        PerfSddPoint {
            start,
            end: start + 10,
            sdd,
            rmse: y,
            mape: Some(y * 2.0),
        }
    }

    #[test]
    fn curve_points_cover_segments_with_perfect_predictions() {
        // Period 5 divides both the train length and the segment length, so
        // every segment carries the training distribution exactly.
        let train = TimeSeries::from_values((0..40).map(|i| (i % 5) as f64).collect()).unwrap();
        let validation = TimeSeries::new(
            (40..60).collect(),
            (40..60).map(|i| (i % 5) as f64).collect(),
        )
        .unwrap();
        let predictions: Vec<PredictionRecord<f64>> = (40..60)
            .map(|i| PredictionRecord {
                time: i as i64,
                actual: (i % 5) as f64,
                predicted: (i % 5) as f64,
            })
            .collect();
        let points =
            build_curve_points(&train, &validation, &predictions, 10, DistanceMeasure::Wasserstein)
                .unwrap();
        assert_eq!(points.len(), 2);
        for p in &points {
            assert_eq!(p.rmse, 0.0);
            assert_eq!(p.sdd, 0.0);
        }
    }

    #[test]
    fn eleven_segments_from_a_770_tick_validation() {
        let train = TimeSeries::from_values(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let validation = TimeSeries::new(
            (100..870).collect(),
            (0..770).map(|i| (i as f64 * 0.11).sin()).collect(),
        )
        .unwrap();
        let predictions: Vec<PredictionRecord<f64>> = validation
            .ticks()
            .iter()
            .zip(validation.values())
            .map(|(&t, &v)| PredictionRecord {
                time: t,
                actual: v,
                predicted: v + 0.1,
            })
            .collect();
        let points =
            build_curve_points(&train, &validation, &predictions, 70, DistanceMeasure::Wasserstein)
                .unwrap();
        assert_eq!(points.len(), 11);
        assert_eq!((points[0].start, points[0].end), (0, 70));
        assert_eq!((points[10].start, points[10].end), (700, 770));
    }

    #[test]
    fn prediction_gaps_are_rejected() {
        let train = TimeSeries::from_values(vec![1.0, 2.0]).unwrap();
        let validation =
            TimeSeries::new((10..20).collect(), (0..10).map(|i| i as f64).collect()).unwrap();
        let predictions: Vec<PredictionRecord<f64>> = (10..15)
            .map(|t| PredictionRecord {
                time: t,
                actual: 1.0,
                predicted: 1.0,
            })
            .collect();
        let err =
            build_curve_points(&train, &validation, &predictions, 10, DistanceMeasure::Wasserstein)
                .unwrap_err();
        assert!(matches!(err, StadroError::PredictionGap { segment_start: 0, tick: 15 }));
    }

    #[test]
    fn exact_quadratic_is_recovered() {
        let points: Vec<PerfSddPoint<f64>> = [0.0, 1.0, 2.0, 3.0, 4.5]
            .iter()
            .enumerate()
            .map(|(i, &d)| point(i * 10, d, 2.0 + 3.0 * d + d * d))
            .collect();
        let fitted = fit_quadratic(&points, MetricTag::Rmse).unwrap();
        assert!((fitted.coeffs[0] - 2.0).abs() < 1e-9);
        assert!((fitted.coeffs[1] - 3.0).abs() < 1e-9);
        assert!((fitted.coeffs[2] - 1.0).abs() < 1e-9);
        assert!(fitted.rss < 1e-9);
        assert_eq!(fitted.domain, (0.0, 4.5));
        assert_eq!(fitted.n_points, 5);
    }

    #[test]
    fn degenerate_designs_are_rejected() {
        let points: Vec<PerfSddPoint<f64>> =
            (0..5).map(|i| point(i, 2.0, i as f64)).collect();
        assert!(matches!(
            fit_quadratic(&points, MetricTag::Rmse),
            Err(StadroError::RankDeficient { distinct: 1 })
        ));
        let two = vec![point(0, 1.0, 1.0), point(1, 2.0, 2.0)];
        assert!(matches!(
            fit_quadratic(&two, MetricTag::Rmse),
            Err(StadroError::TooFewPoints { n: 2 })
        ));
    }

    #[test]
    fn residuals_are_orthogonal_to_the_design() {
        let points: Vec<PerfSddPoint<f64>> = (0..20)
            .map(|i| {
                let d = i as f64 * 0.25;
                let y = 1.5 + 0.8 * d + 0.2 * d * d + ((i * 37) as f64).sin() * 0.3;
                point(i, d, y)
            })
            .collect();
        let fitted = fit_quadratic(&points, MetricTag::Rmse).unwrap();
        let mut dot = [0.0_f64; 3];
        for p in &points {
            let r = p.rmse - fitted.evaluate(p.sdd);
            dot[0] += r;
            dot[1] += r * p.sdd;
            dot[2] += r * p.sdd * p.sdd;
        }
        for d in dot {
            assert!(d.abs() < 1e-8, "residual dot {d}");
        }
    }

    #[test]
    fn mape_curve_requires_mape_values() {
        let mut points: Vec<PerfSddPoint<f64>> =
            (0..4).map(|i| point(i, i as f64, i as f64)).collect();
        points[2].mape = None;
        assert!(matches!(
            fit_quadratic(&points, MetricTag::Mape),
            Err(StadroError::MissingMape { start: 2 })
        ));
    }

    #[test]
    fn pure_square_curve_inverts_analytically() {
        let c = curve([0.0, 0.0, 1.0]);
        let inv = invert_curve(&c, 4.0).unwrap();
        assert!((inv.d_pmin - 2.0).abs() < 1e-12);
        assert!(!inv.monotone_warning);
        assert!((c.evaluate(inv.d_pmin) - 4.0).abs() <= 1e-9);
    }

    #[test]
    fn flat_curve_cannot_reach_higher_performance() {
        let c = curve([1.0, 0.0, 0.0]);
        assert!(matches!(invert_curve(&c, 2.0), Err(StadroError::NoRoot { .. })));
    }

    #[test]
    fn linear_fallback_and_negative_roots() {
        let c = curve([1.0, 2.0, 0.0]);
        let inv = invert_curve(&c, 5.0).unwrap();
        assert!((inv.d_pmin - 2.0).abs() < 1e-12);
        // Target below the intercept lies at negative distance.
        assert!(matches!(invert_curve(&c, 0.5), Err(StadroError::NoRoot { .. })));
    }

    #[test]
    fn decreasing_crossing_is_flagged() {
        // Downward parabola from 1: only decreasing crossings exist.
        let c = curve([1.0, 0.0, -1.0]);
        let inv = invert_curve(&c, 0.75).unwrap();
        assert!((inv.d_pmin - 0.5).abs() < 1e-9);
        assert!(inv.monotone_warning);
    }

    #[test]
    fn smallest_increasing_root_is_selected() {
        // Upward parabola with vertex at d=2 below zero: roots 1 and 3,
        // derivative negative at 1, positive at 3.
        let c = curve([3.0, -4.0, 1.0]);
        let inv = invert_curve(&c, 0.0).unwrap();
        assert!((inv.d_pmin - 3.0).abs() < 1e-9);
        assert!(!inv.monotone_warning);
    }

    #[test]
    fn verdict_boundaries_follow_the_ratio() {
        let make = |d_instance: f64, d_pmin: f64| {
            RobustnessVerdict::from_distances(0, 70, 500.0, d_pmin, d_instance, (0.0, 1.0e9))
        };
        let v = make(0.39 * 1630.0, 1630.0);
        assert!(v.robust);
        let v = make(1.07 * 1630.0, 1630.0);
        assert!(!v.robust);
        let v = make(1630.0, 1630.0);
        assert!(v.robust, "ratio exactly 1 is robust");
        assert_eq!(v.ratio, 1.0);
    }

    #[test]
    fn stadro_measures_the_instance_distance() {
        let train = TimeSeries::from_values((0..100).map(|i| (i % 10) as f64).collect()).unwrap();
        let c = curve([0.0, 1.0, 0.0]);
        let instance = Segment {
            start: 0,
            values: (0..10).map(|i| (i % 10) as f64 + 5.0).collect(),
        };
        let verdict = stadro(&train, &instance, &c, 2.0, DistanceMeasure::Wasserstein).unwrap();
        assert!((verdict.d_pmin - 2.0).abs() < 1e-12);
        assert!((verdict.d_instance - 5.0).abs() < 1e-9);
        assert!((verdict.ratio - 2.5).abs() < 1e-9);
        assert!(!verdict.robust);
    }

    #[test]
    fn verdict_monotonicity_in_the_instance_distance() {
        let domain = (0.0, 100.0);
        let a = RobustnessVerdict::from_distances(0, 1, 1.0, 10.0, 4.0, domain);
        let b = RobustnessVerdict::from_distances(0, 1, 1.0, 10.0, 9.0, domain);
        assert!(b.robust);
        assert!(a.robust, "closer instance must stay robust when a farther one is");
    }
}
