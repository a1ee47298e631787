//! Baseline forecasters, ingestion of externally produced predictions, and
//! performance metrics.
//!
//! The forecasters here are deliberately simple stand-ins for whatever model
//! is being monitored: they make the pipeline runnable end to end without an
//! external model. Externally produced predictions enter through the same
//! `tick,actual,predicted` record schema that the built-in forecasters emit.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::io::{self, IngestError};
use crate::num::{count, lit, Scalar};
use crate::series::TimeSeries;

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("prediction requires a non-empty history")]
    EmptyHistory,
    #[error("history of {got} values is shorter than the model order {need}")]
    HistoryTooShort { need: usize, got: usize },
    #[error("forecaster must be fitted before predicting")]
    NotFitted,
    #[error("autoregressive order must be at least 1")]
    BadOrder,
    #[error("ridge penalty must be non-negative")]
    BadRidge,
    #[error("training series of {len} points is too short for order {order}")]
    TrainTooShort { order: usize, len: usize },
    #[error("normal equations are singular; add a ridge penalty or more data")]
    SingularSystem,
    #[error("metrics require at least one prediction record")]
    EmptyRecords,
}

/// One-step-ahead forecaster over normalized values. `fit` mutates the
/// forecaster privately; afterwards `predict_next` is read-only and
/// thread-safe.
pub trait Forecaster<T: Scalar>: Send {
    fn fit(&mut self, train: &TimeSeries<T>) -> Result<(), ForecastError>;

    /// Predicts the value at the tick immediately following `history`.
    fn predict_next(&self, history: &[T]) -> Result<T, ForecastError>;
}

/// Predicts the last observed value. Exact on constant series; the baseline
/// every other forecaster is judged against.
#[derive(Debug, Clone, Copy, Default)]
pub struct PersistenceForecaster;

pub fn persistence_forecaster() -> PersistenceForecaster {
    PersistenceForecaster
}

impl<T: Scalar> Forecaster<T> for PersistenceForecaster {
    fn fit(&mut self, _train: &TimeSeries<T>) -> Result<(), ForecastError> {
        Ok(())
    }

    fn predict_next(&self, history: &[T]) -> Result<T, ForecastError> {
        history.last().copied().ok_or(ForecastError::EmptyHistory)
    }
}

/// Linear autoregression of a given order with an intercept, fitted by
/// ridge-regularized least squares on the training split. The penalty
/// applies to the lag coefficients only, never to the intercept.
#[derive(Debug, Clone)]
pub struct ArForecaster<T> {
    order: usize,
    ridge: T,
    /// `coeffs[0]` is the intercept, `coeffs[j]` the weight of lag `j`.
    coeffs: Option<Vec<T>>,
}

pub fn ar_forecaster<T: Scalar>(order: usize, ridge: T) -> Result<ArForecaster<T>, ForecastError> {
    if order == 0 {
        return Err(ForecastError::BadOrder);
    }
    if ridge < T::zero() {
        return Err(ForecastError::BadRidge);
    }
    Ok(ArForecaster {
        order,
        ridge,
        coeffs: None,
    })
}

impl<T: Scalar> ArForecaster<T> {
    pub fn coefficients(&self) -> Option<&[T]> {
        self.coeffs.as_deref()
    }
}

impl<T: Scalar> Forecaster<T> for ArForecaster<T> {
    fn fit(&mut self, train: &TimeSeries<T>) -> Result<(), ForecastError> {
        let v = train.values();
        let p = self.order;
        if v.len() <= p {
            return Err(ForecastError::TrainTooShort {
                order: p,
                len: v.len(),
            });
        }
        // Normal equations for rows [1, y_{t-1}, ..., y_{t-p}] -> y_t.
        let k = p + 1;
        let mut ata = vec![T::zero(); k * k];
        let mut atb = vec![T::zero(); k];
        let mut row = vec![T::zero(); k];
        for t in p..v.len() {
            row[0] = T::one();
            for j in 1..=p {
                row[j] = v[t - j];
            }
            let y = v[t];
            for r in 0..k {
                for c in 0..k {
                    ata[r * k + c] = ata[r * k + c] + row[r] * row[c];
                }
                atb[r] = atb[r] + row[r] * y;
            }
        }
        for j in 1..k {
            ata[j * k + j] = ata[j * k + j] + self.ridge;
        }
        let coeffs = solve_dense(&mut ata, &mut atb, k).ok_or(ForecastError::SingularSystem)?;
        self.coeffs = Some(coeffs);
        Ok(())
    }

    fn predict_next(&self, history: &[T]) -> Result<T, ForecastError> {
        let coeffs = self.coeffs.as_ref().ok_or(ForecastError::NotFitted)?;
        if history.len() < self.order {
            return Err(ForecastError::HistoryTooShort {
                need: self.order,
                got: history.len(),
            });
        }
        let mut y = coeffs[0];
        for j in 1..=self.order {
            y = y + coeffs[j] * history[history.len() - j];
        }
        Ok(y)
    }
}

/// Gaussian elimination with partial pivoting on a dense `k x k` system.
/// Returns `None` when a pivot degenerates.
fn solve_dense<T: Scalar>(a: &mut [T], b: &mut [T], k: usize) -> Option<Vec<T>> {
    let tiny = lit::<T>(1e-12);
    for col in 0..k {
        let mut pivot = col;
        for r in col + 1..k {
            if a[r * k + col].abs() > a[pivot * k + col].abs() {
                pivot = r;
            }
        }
        if a[pivot * k + col].abs() <= tiny {
            return None;
        }
        if pivot != col {
            for c in 0..k {
                a.swap(col * k + c, pivot * k + c);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * k + col];
        for r in col + 1..k {
            let factor = a[r * k + col] / diag;
            if factor == T::zero() {
                continue;
            }
            for c in col..k {
                a[r * k + c] = a[r * k + c] - factor * a[col * k + c];
            }
            b[r] = b[r] - factor * b[col];
        }
    }
    let mut x = vec![T::zero(); k];
    for col in (0..k).rev() {
        let mut acc = b[col];
        for c in col + 1..k {
            acc = acc - a[col * k + c] * x[c];
        }
        x[col] = acc / a[col * k + col];
    }
    Some(x)
}

/// One prediction at one tick, in domain units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRecord<T> {
    pub time: i64,
    pub actual: T,
    pub predicted: T,
}

/// Aggregate performance over a set of prediction records. `mape` is `None`
/// when every record had a zero actual; `mape_skipped` counts the records
/// excluded from the MAPE mean because their actual was exactly zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfMetrics<T> {
    pub mse: T,
    pub rmse: T,
    pub mape: Option<T>,
    pub mape_skipped: usize,
}

/// MSE, RMSE and MAPE (percent) over the records.
pub fn metrics<T: Scalar>(records: &[PredictionRecord<T>]) -> Result<PerfMetrics<T>, ForecastError> {
    if records.is_empty() {
        return Err(ForecastError::EmptyRecords);
    }
    let n = count::<T>(records.len());
    let mut sq = T::zero();
    let mut ape = T::zero();
    let mut used = 0usize;
    for r in records {
        let e = r.actual - r.predicted;
        sq = sq + e * e;
        if r.actual != T::zero() {
            ape = ape + (e / r.actual).abs();
            used += 1;
        }
    }
    let mse = sq / n;
    let mape = if used > 0 {
        Some(lit::<T>(100.0) * ape / count::<T>(used))
    } else {
        None
    };
    Ok(PerfMetrics {
        mse,
        rmse: mse.sqrt(),
        mape,
        mape_skipped: records.len() - used,
    })
}

/// Reads a `tick,actual,predicted` CSV into records sorted by tick.
/// Duplicate ticks and non-finite values are rejected with line numbers.
pub fn import_predictions<T: Scalar>(path: &Path) -> Result<Vec<PredictionRecord<T>>, IngestError> {
    let text = io::read_file(path)?;
    parse_predictions(&text)
}

pub fn parse_predictions<T: Scalar>(text: &str) -> Result<Vec<PredictionRecord<T>>, IngestError> {
    let rows = io::parse_rows(text, "tick,actual,predicted")?;
    let mut seen: HashMap<i64, usize> = HashMap::with_capacity(rows.len());
    let mut records = Vec::with_capacity(rows.len());
    for row in &rows {
        let tick: i64 = row.fields[0].parse().map_err(|_| IngestError::Row {
            line: row.line,
            reason: format!("cannot parse tick `{}` as an integer", row.fields[0]),
        })?;
        if let Some(first) = seen.insert(tick, row.line) {
            return Err(IngestError::Row {
                line: row.line,
                reason: format!("duplicate tick {} (first seen on line {})", tick, first),
            });
        }
        let actual = io::parse_finite(row.line, "actual", row.fields[1])?;
        let predicted = io::parse_finite(row.line, "predicted", row.fields[2])?;
        let to_scalar = |v: f64| {
            T::from_f64(v).ok_or(IngestError::Row {
                line: row.line,
                reason: format!("value {} does not fit the scalar type", v),
            })
        };
        records.push(PredictionRecord {
            time: tick,
            actual: to_scalar(actual)?,
            predicted: to_scalar(predicted)?,
        });
    }
    records.sort_by_key(|r| r.time);
    Ok(records)
}

/// Writes records in the same schema `import_predictions` reads.
pub fn write_predictions<T: Scalar, W: Write>(
    out: &mut W,
    records: &[PredictionRecord<T>],
) -> std::io::Result<()> {
    writeln!(out, "tick,actual,predicted")?;
    for r in records {
        writeln!(out, "{},{},{}", r.time, r.actual, r.predicted)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: Vec<f64>) -> TimeSeries<f64> {
        TimeSeries::from_values(values).unwrap()
    }

    #[test]
    fn persistence_returns_last_value() {
        let f = persistence_forecaster();
        assert_eq!(Forecaster::<f64>::predict_next(&f, &[0.1, 0.2, 0.4]).unwrap(), 0.4);
        assert!(matches!(
            Forecaster::<f64>::predict_next(&f, &[]),
            Err(ForecastError::EmptyHistory)
        ));
    }

    #[test]
    fn persistence_is_exact_on_constants() {
        let f = persistence_forecaster();
        let values = vec![2.5; 40];
        for t in 1..values.len() {
            let pred = f.predict_next(&values[..t]).unwrap();
            assert_eq!(pred, values[t]);
        }
    }

    #[test]
    fn ar_recovers_noiseless_coefficient() {
        let mut values = vec![1.0_f64];
        for _ in 1..60 {
            values.push(0.9 * values.last().unwrap());
        }
        let mut f = ar_forecaster(1, 0.0).unwrap();
        f.fit(&series(values)).unwrap();
        let coeffs = f.coefficients().unwrap();
        assert!((coeffs[1] - 0.9).abs() < 1e-6, "a1 = {}", coeffs[1]);
        assert!(coeffs[0].abs() < 1e-6, "c0 = {}", coeffs[0]);
    }

    #[test]
    fn huge_ridge_collapses_to_the_intercept() {
        let values: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin()).collect();
        let targets: Vec<f64> = values[2..].to_vec();
        let mut f = ar_forecaster(2, 1e12).unwrap();
        f.fit(&series(values.clone())).unwrap();
        let coeffs = f.coefficients().unwrap();
        assert!(coeffs[1].abs() < 1e-9 && coeffs[2].abs() < 1e-9);
        let mean: f64 = targets.iter().sum::<f64>() / targets.len() as f64;
        let pred = f.predict_next(&values).unwrap();
        assert!((pred - mean).abs() < 1e-6, "pred {pred} vs target mean {mean}");
    }

    #[test]
    fn ar_coefficients_match_direct_normal_equations() {
        // Independent oracle: accumulate the same least-squares system and
        // solve it by explicit 3x3 inversion (order 2 + intercept).
        let values: Vec<f64> = (0..80)
            .map(|i| {
                let x = i as f64;
                (0.3 * x).sin() + 0.01 * x
            })
            .collect();
        let p = 2;
        let k = p + 1;
        let mut ata = [[0.0_f64; 3]; 3];
        let mut atb = [0.0_f64; 3];
        for t in p..values.len() {
            let row = [1.0, values[t - 1], values[t - 2]];
            for r in 0..k {
                for c in 0..k {
                    ata[r][c] += row[r] * row[c];
                }
                atb[r] += row[r] * values[t];
            }
        }
        let det3 = |m: &[[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let det = det3(&ata);
        let mut expected = [0.0_f64; 3];
        for col in 0..3 {
            let mut m = ata;
            for r in 0..3 {
                m[r][col] = atb[r];
            }
            expected[col] = det3(&m) / det;
        }

        let mut f = ar_forecaster(2, 0.0).unwrap();
        f.fit(&series(values)).unwrap();
        let got = f.coefficients().unwrap();
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 1e-8, "{g} vs {e}");
        }
    }

    #[test]
    fn ar_singular_system_without_ridge_errors() {
        // Constant series makes the lag column collinear with the intercept.
        let mut f = ar_forecaster(1, 0.0).unwrap();
        let err = f.fit(&series(vec![1.0; 30])).unwrap_err();
        assert!(matches!(err, ForecastError::SingularSystem));
        let mut f = ar_forecaster(1, 0.1).unwrap();
        f.fit(&series(vec![1.0; 30])).unwrap();
        assert!(f.coefficients().unwrap().iter().all(|c| c.is_finite()));
    }

    #[test]
    fn metrics_on_perfect_and_hand_computed_records() {
        let perfect: Vec<PredictionRecord<f64>> = (0..5)
            .map(|t| PredictionRecord {
                time: t,
                actual: 1.5,
                predicted: 1.5,
            })
            .collect();
        let m = metrics(&perfect).unwrap();
        assert_eq!((m.rmse, m.mse), (0.0, 0.0));
        assert_eq!(m.mape, Some(0.0));

        let records: [PredictionRecord<f64>; 2] = [
            PredictionRecord { time: 0, actual: 2.0, predicted: 1.0 },
            PredictionRecord { time: 1, actual: 4.0, predicted: 5.0 },
        ];
        let m = metrics(&records).unwrap();
        assert_eq!(m.mse, 1.0);
        assert_eq!(m.rmse, 1.0);
        assert!((m.mape.unwrap() - 37.5).abs() < 1e-12);
        assert_eq!(m.mape_skipped, 0);
    }

    #[test]
    fn mape_skips_zero_actuals() {
        let records: [PredictionRecord<f64>; 2] = [
            PredictionRecord { time: 0, actual: 0.0, predicted: 1.0 },
            PredictionRecord { time: 1, actual: 2.0, predicted: 1.0 },
        ];
        let m = metrics(&records).unwrap();
        assert_eq!(m.mape_skipped, 1);
        assert!((m.mape.unwrap() - 50.0).abs() < 1e-12);

        let all_zero = [PredictionRecord::<f64> { time: 0, actual: 0.0, predicted: 1.0 }];
        let m = metrics(&all_zero).unwrap();
        assert_eq!(m.mape, None);
        assert_eq!(m.mape_skipped, 1);
        assert_eq!(m.mse, 1.0);
    }

    #[test]
    fn predictions_round_trip_and_reject_duplicates() {
        let records = vec![
            PredictionRecord { time: 3, actual: 1.25, predicted: 1.3 },
            PredictionRecord { time: 5, actual: 0.1, predicted: 0.09999999999999999 },
            PredictionRecord { time: 9, actual: -2.0, predicted: -1.75 },
        ];
        let mut buf = Vec::new();
        write_predictions(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back: Vec<PredictionRecord<f64>> = parse_predictions(&text).unwrap();
        assert_eq!(back, records);

        let err = parse_predictions::<f64>("tick,actual,predicted\n1,1,1\n1,2,2\n").unwrap_err();
        assert!(matches!(err, IngestError::Row { line: 3, .. }), "{err}");
    }

    #[test]
    fn unsorted_predictions_come_back_sorted() {
        let text = "tick,actual,predicted\n9,1,1\n3,2,2\n5,4,4\n";
        let records: Vec<PredictionRecord<f64>> = parse_predictions(text).unwrap();
        let ticks: Vec<i64> = records.iter().map(|r| r.time).collect();
        assert_eq!(ticks, vec![3, 5, 9]);
    }
}
