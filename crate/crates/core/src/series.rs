//! Time-series containers and preprocessing: train/validation splitting,
//! min-max normalization, sliding windows and contiguous segments.
//!
//! All types are immutable after construction and all operations are pure,
//! so values can be shared freely across threads.

use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

use crate::io::{self, IngestError};
use crate::num::Scalar;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("series must contain at least one point")]
    Empty,
    #[error("ticks must be strictly increasing (violation at position {position})")]
    NonMonotonicTicks { position: usize },
    #[error("value at position {position} is not finite")]
    NonFiniteValue { position: usize },
    #[error("ticks and values differ in length ({ticks} vs {values})")]
    LengthMismatch { ticks: usize, values: usize },
    #[error("split ratio must lie strictly between 0 and 1, got {ratio}")]
    SplitRatio { ratio: f64 },
    #[error("cannot split {len} points at ratio {ratio}: both parts must be non-empty")]
    Split { len: usize, ratio: f64 },
    #[error("cannot normalize a constant series (all values equal {value})")]
    ConstantSeries { value: f64 },
    #[error("normalizer target bounds must satisfy lo < hi")]
    BadTargetRange,
    #[error("window length and stride must be positive")]
    BadWindowParams,
    #[error("window length {w} exceeds series length {len}")]
    WindowTooLong { w: usize, len: usize },
    #[error("segment length must be positive")]
    BadSegmentLength,
    #[error("segment length {l} exceeds series length {len}")]
    SegmentTooLong { l: usize, len: usize },
}

/// A univariate series: strictly increasing integer ticks with one finite
/// value per tick. Calendar dates are mapped to consecutive ticks at
/// ingestion; gaps (weekends, holidays) are not modeled.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    ticks: Vec<i64>,
    values: Vec<T>,
}

impl<T: Scalar> TimeSeries<T> {
    pub fn new(ticks: Vec<i64>, values: Vec<T>) -> Result<Self, SeriesError> {
        if ticks.len() != values.len() {
            return Err(SeriesError::LengthMismatch {
                ticks: ticks.len(),
                values: values.len(),
            });
        }
        if values.is_empty() {
            return Err(SeriesError::Empty);
        }
        for (position, pair) in ticks.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(SeriesError::NonMonotonicTicks { position: position + 1 });
            }
        }
        for (position, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(SeriesError::NonFiniteValue { position });
            }
        }
        Ok(Self { ticks, values })
    }

    /// Builds a series on the consecutive ticks `0..n`.
    pub fn from_values(values: Vec<T>) -> Result<Self, SeriesError> {
        let ticks = (0..values.len() as i64).collect();
        Self::new(ticks, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ticks(&self) -> &[i64] {
        &self.ticks
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn tick_at(&self, position: usize) -> i64 {
        self.ticks[position]
    }

    pub fn value_at(&self, position: usize) -> T {
        self.values[position]
    }

    /// Splits into a contiguous train prefix of `floor(ratio * len)` points
    /// and the remaining validation suffix.
    pub fn split(&self, ratio: f64) -> Result<DatasetSplit<T>, SeriesError> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(SeriesError::SplitRatio { ratio });
        }
        let n = self.len();
        let n_train = (ratio * n as f64).floor() as usize;
        if n_train < 1 || n - n_train < 1 {
            return Err(SeriesError::Split { len: n, ratio });
        }
        let train = Self {
            ticks: self.ticks[..n_train].to_vec(),
            values: self.values[..n_train].to_vec(),
        };
        let validation = Self {
            ticks: self.ticks[n_train..].to_vec(),
            values: self.values[n_train..].to_vec(),
        };
        Ok(DatasetSplit {
            train,
            validation,
            ratio,
        })
    }

    /// All length-`w` windows at starts `0, stride, 2*stride, ...`.
    pub fn sliding_windows(&self, w: usize, stride: usize) -> Result<Vec<Window<T>>, SeriesError> {
        if w == 0 || stride == 0 {
            return Err(SeriesError::BadWindowParams);
        }
        if w > self.len() {
            return Err(SeriesError::WindowTooLong { w, len: self.len() });
        }
        let windows = (0..=self.len() - w)
            .step_by(stride)
            .map(|start| Window {
                start,
                values: self.values[start..start + w].to_vec(),
            })
            .collect();
        Ok(windows)
    }

    /// Consecutive non-overlapping length-`l` segments covering a prefix of
    /// the series; a trailing remainder shorter than `l` is dropped.
    pub fn segments(&self, l: usize) -> Result<Vec<Segment<T>>, SeriesError> {
        if l == 0 {
            return Err(SeriesError::BadSegmentLength);
        }
        if l > self.len() {
            return Err(SeriesError::SegmentTooLong { l, len: self.len() });
        }
        let segments = (0..self.len() / l)
            .map(|i| {
                let start = i * l;
                Segment {
                    start,
                    values: self.values[start..start + l].to_vec(),
                }
            })
            .collect();
        Ok(segments)
    }

    /// Reads a `date,value` CSV. The date column holds either plain integer
    /// ticks (used as-is) or ISO-8601 dates (mapped to consecutive ticks
    /// `0..n` in file order); both must be strictly increasing.
    pub fn read_csv(path: &Path) -> Result<Self, IngestError> {
        let text = io::read_file(path)?;
        Self::parse_csv(&text)
    }

    pub fn parse_csv(text: &str) -> Result<Self, IngestError> {
        let rows = io::parse_rows(text, "date,value")?;
        let mut ticks = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len());
        let mut date_mode: Option<bool> = None;
        let mut prev_date: Option<NaiveDate> = None;
        for row in &rows {
            let field = row.fields[0];
            let as_int = field.parse::<i64>();
            let is_date = *date_mode.get_or_insert(as_int.is_err());
            if is_date {
                let date = NaiveDate::parse_from_str(field, "%Y-%m-%d").map_err(|_| {
                    IngestError::Row {
                        line: row.line,
                        reason: format!("cannot parse date `{}` (expected YYYY-MM-DD or integer tick)", field),
                    }
                })?;
                if let Some(prev) = prev_date {
                    if date <= prev {
                        return Err(IngestError::Row {
                            line: row.line,
                            reason: format!("date `{}` does not increase over the previous row", field),
                        });
                    }
                }
                prev_date = Some(date);
                ticks.push(ticks.len() as i64);
            } else {
                let tick = as_int.map_err(|_| IngestError::Row {
                    line: row.line,
                    reason: format!("cannot parse tick `{}` as an integer", field),
                })?;
                if let Some(&prev) = ticks.last() {
                    if tick <= prev {
                        return Err(IngestError::Row {
                            line: row.line,
                            reason: format!("tick {} does not increase over the previous row", tick),
                        });
                    }
                }
                ticks.push(tick);
            }
            let value = io::parse_finite(row.line, "value", row.fields[1])?;
            values.push(T::from_f64(value).ok_or(IngestError::Row {
                line: row.line,
                reason: format!("value `{}` does not fit the scalar type", row.fields[1]),
            })?);
        }
        Ok(Self { ticks, values })
    }
}

/// Contiguous temporal split: the train part strictly precedes validation
/// and the two concatenate back to the original series.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<T> {
    pub train: TimeSeries<T>,
    pub validation: TimeSeries<T>,
    pub ratio: f64,
}

/// Affine min-max map fitted on training data only. Values outside the
/// fitted range extrapolate past the target bounds; there is no clamping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer<T> {
    min: T,
    max: T,
    target_lo: T,
    target_hi: T,
}

impl<T: Scalar> Normalizer<T> {
    /// Fits on the training series, mapping `[min, max]` onto `[lo, hi]`.
    pub fn fit(train: &TimeSeries<T>, lo: T, hi: T) -> Result<Self, SeriesError> {
        if !(lo < hi) {
            return Err(SeriesError::BadTargetRange);
        }
        let mut min = train.values[0];
        let mut max = train.values[0];
        for &v in &train.values {
            if v < min {
                min = v;
            }
            if v > max {
                max = v;
            }
        }
        if !(max > min) {
            return Err(SeriesError::ConstantSeries {
                value: min.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self {
            min,
            max,
            target_lo: lo,
            target_hi: hi,
        })
    }

    pub fn apply(&self, x: T) -> T {
        self.target_lo + (x - self.min) * (self.target_hi - self.target_lo) / (self.max - self.min)
    }

    pub fn invert(&self, y: T) -> T {
        self.min + (y - self.target_lo) * (self.max - self.min) / (self.target_hi - self.target_lo)
    }

    pub fn apply_series(&self, series: &TimeSeries<T>) -> TimeSeries<T> {
        TimeSeries {
            ticks: series.ticks.clone(),
            values: series.values.iter().map(|&v| self.apply(v)).collect(),
        }
    }

    pub fn min(&self) -> T {
        self.min
    }

    pub fn max(&self) -> T {
        self.max
    }
}

/// A fixed-length view copied out of a parent series; doubles as the data
/// instance handed to reliability estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct Window<T> {
    /// Offset of the first element in the parent series.
    pub start: usize,
    pub values: Vec<T>,
}

impl<T> Window<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One element of a non-overlapping segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<T> {
    /// Offset of the first element in the parent series.
    pub start: usize,
    pub values: Vec<T>,
}

impl<T> Segment<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One past the last covered offset.
    pub fn end(&self) -> usize {
        self.start + self.values.len()
    }
}
