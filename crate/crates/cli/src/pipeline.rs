//! Subcommand implementations tying the library pipeline together.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use stadr_core::cluster::{
    self, CentroidSummary, ClusterModel, ClusterSelection, KScore,
};
use stadr_core::distance::DtwParams;
use stadr_core::forecast::{
    ar_forecaster, import_predictions, metrics, persistence_forecaster, Forecaster,
    PredictionRecord,
};
use stadr_core::seed::{derive_seed, STREAM_CLUSTER, STREAM_NEIGHBOR};
use stadr_core::series::{DatasetSplit, Normalizer, SeriesError, TimeSeries, Window};
use stadr_core::stadre::{stadre, ReliabilityError, StadreParams};
use stadr_core::stadro::{build_curve_points, fit_quadratic, invert_curve, stadro, FittedCurve, MetricTag};

use crate::config::{ForecasterSpec, RunConfig};
use crate::files::{
    self, provenance_line, CurveFile, JsonlHeader, KScoreFile, ModelFile, ReliabilityLine,
    SelectionFile,
};
use crate::CliError;

const KMEANS_MAX_ITER: usize = 50;

type Series = TimeSeries<f64>;

pub struct Pipeline {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

fn ingest_error(e: impl std::fmt::Display) -> CliError {
    CliError::Ingest(e.to_string())
}

fn compute_error(e: impl std::fmt::Display) -> CliError {
    CliError::Compute(e.to_string())
}

impl Pipeline {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn load_series(&self) -> Result<Series, CliError> {
        Series::read_csv(&self.cfg.input_path).map_err(ingest_error)
    }

    fn split(&self, series: &Series) -> Result<DatasetSplit<f64>, CliError> {
        series.split(self.cfg.split_ratio).map_err(|e| {
            CliError::Config(format!(
                "split_ratio {} does not fit the {} input points: {e}",
                self.cfg.split_ratio,
                series.len()
            ))
        })
    }

    /// Constant training data cannot be normalized; that is an input-data
    /// defect, so it lands in the ingest error family.
    fn normalizer(&self, train: &Series) -> Result<Normalizer<f64>, CliError> {
        match Normalizer::fit(train, -1.0, 1.0) {
            Ok(n) => Ok(n),
            Err(e @ SeriesError::ConstantSeries { .. }) => Err(ingest_error(e)),
            Err(e) => Err(compute_error(e)),
        }
    }

    fn dtw_params(&self) -> DtwParams {
        DtwParams {
            cost: self.cfg.dtw_cost,
            band: None,
        }
    }

    fn check_window_size(&self, train: &Series) -> Result<(), CliError> {
        if self.cfg.window_size > train.len() {
            return Err(CliError::Config(format!(
                "window_size {} exceeds the {}-point training split",
                self.cfg.window_size,
                train.len()
            )));
        }
        Ok(())
    }

    fn check_segment_length(&self, validation: &Series) -> Result<(), CliError> {
        if self.cfg.segment_length > validation.len() {
            return Err(CliError::Config(format!(
                "segment_length {} exceeds the {}-point validation split",
                self.cfg.segment_length,
                validation.len()
            )));
        }
        Ok(())
    }

    fn training_windows(&self, normalizer: &Normalizer<f64>, train: &Series) -> Result<Vec<Window<f64>>, CliError> {
        let normalized = normalizer.apply_series(train);
        normalized
            .sliding_windows(self.cfg.window_size, 1)
            .map_err(compute_error)
    }

    pub fn cmd_ingest(&self) -> Result<(), CliError> {
        let series = self.load_series()?;
        let digest = self.cfg.digest();
        let mut text = String::new();
        let _ = writeln!(text, "{}", provenance_line(&digest));
        let _ = writeln!(text, "date,value");
        for i in 0..series.len() {
            let _ = writeln!(text, "{},{}", series.tick_at(i), series.value_at(i));
        }
        let path = self.path("series.csv");
        files::write_text(&path, &text)?;
        let lo = series.values().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = series.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "ingested {} points from {} (ticks {}..{}, values {}..{})",
            series.len(),
            self.cfg.input_path.display(),
            series.tick_at(0),
            series.tick_at(series.len() - 1),
            lo,
            hi
        );
        println!("wrote {}", path.display());
        Ok(())
    }

    pub fn cmd_sdd(&self) -> Result<(), CliError> {
        let series = self.load_series()?;
        let split = self.split(&series)?;
        self.check_segment_length(&split.validation)?;
        let segments = split
            .validation
            .segments(self.cfg.segment_length)
            .map_err(compute_error)?;
        let mut text = String::new();
        let _ = writeln!(text, "{}", provenance_line(&self.cfg.digest()));
        let _ = writeln!(text, "start,end,sdd");
        for seg in &segments {
            let d = self
                .cfg
                .measure
                .distance(split.train.values(), &seg.values)
                .map_err(compute_error)?;
            let _ = writeln!(text, "{},{},{}", seg.start, seg.end(), d);
        }
        let path = self.path("sdd.csv");
        files::write_text(&path, &text)?;
        println!("wrote {} ({} segments)", path.display(), segments.len());
        Ok(())
    }

    pub fn cmd_cluster(&self) -> Result<(), CliError> {
        let series = self.load_series()?;
        let split = self.split(&series)?;
        self.check_window_size(&split.train)?;
        let normalizer = self.normalizer(&split.train)?;
        let windows = self.training_windows(&normalizer, &split.train)?;
        let params = self.dtw_params();
        let cluster_seed = derive_seed(self.cfg.seed, STREAM_CLUSTER);

        let (selection, model) = match self.cfg.k_override {
            Some(k) => {
                if windows.len() < k {
                    return Err(CliError::Config(format!(
                        "k {} exceeds the {} training windows",
                        k,
                        windows.len()
                    )));
                }
                let model =
                    cluster::kmeans_dtw_with(&windows, k, cluster_seed, KMEANS_MAX_ITER, params)
                        .map_err(compute_error)?;
                let selection = ClusterSelection {
                    k_min: k,
                    k_max: k,
                    step: 1,
                    scores: vec![KScore {
                        k,
                        silhouette: model.silhouette(),
                        centroids: model.centroids().iter().map(|c| summarize(c)).collect(),
                    }],
                    chosen_k: k,
                };
                (selection, model)
            }
            None => {
                if windows.len() < self.cfg.k_max {
                    return Err(CliError::Config(format!(
                        "k_max {} exceeds the {} training windows",
                        self.cfg.k_max,
                        windows.len()
                    )));
                }
                cluster::select_clusters_with(
                    &windows,
                    self.cfg.k_min,
                    self.cfg.k_max,
                    self.cfg.k_step,
                    cluster_seed,
                    params,
                )
                .map_err(compute_error)?
            }
        };

        for score in &selection.scores {
            println!("k={} silhouette={}", score.k, score.silhouette);
            for (idx, c) in score.centroids.iter().enumerate() {
                println!(
                    "  centroid {idx}: len={} mean={} min={} max={}",
                    c.len, c.mean, c.min, c.max
                );
            }
        }
        println!("chosen k={}", selection.chosen_k);

        let model_file = ModelFile {
            version: files::VERSION.to_string(),
            config_digest: self.cfg.digest(),
            k: model.k(),
            w: model.window_len(),
            seed: model.seed(),
            dtw_cost: self.cfg.dtw_cost.to_string(),
            dtw_band: params.band,
            silhouette: model.silhouette(),
            sizes: model.sizes().to_vec(),
            centroids: model.centroids().to_vec(),
            selection: SelectionFile {
                k_min: selection.k_min,
                k_max: selection.k_max,
                k_step: selection.step,
                chosen_k: selection.chosen_k,
                scores: selection
                    .scores
                    .iter()
                    .map(|s| KScoreFile {
                        k: s.k,
                        silhouette: s.silhouette,
                    })
                    .collect(),
            },
        };
        let path = self.path("model.json");
        files::write_json(&path, &model_file)?;
        println!("wrote {}", path.display());
        Ok(())
    }

    /// Walks the validation split one step at a time with the configured
    /// internal forecaster, recording domain-scale predictions.
    fn internal_predictions(
        &self,
        series: &Series,
        split: &DatasetSplit<f64>,
    ) -> Result<Vec<PredictionRecord<f64>>, CliError> {
        let normalizer = self.normalizer(&split.train)?;
        let normalized = normalizer.apply_series(series);
        let norm_train = normalizer.apply_series(&split.train);

        let mut forecaster: Box<dyn Forecaster<f64>> = match &self.cfg.forecaster {
            ForecasterSpec::Persistence => Box::new(persistence_forecaster()),
            ForecasterSpec::Ar { order, ridge } => {
                Box::new(ar_forecaster(*order, *ridge).map_err(|e| CliError::Config(e.to_string()))?)
            }
            ForecasterSpec::External(_) => unreachable!("external predictions are imported"),
        };
        forecaster.fit(&norm_train).map_err(compute_error)?;

        let n_train = split.train.len();
        let mut records = Vec::with_capacity(split.validation.len());
        for offset in 0..split.validation.len() {
            let idx = n_train + offset;
            let history = &normalized.values()[..idx];
            let predicted_norm = forecaster.predict_next(history).map_err(compute_error)?;
            records.push(PredictionRecord {
                time: series.tick_at(idx),
                actual: series.value_at(idx),
                predicted: normalizer.invert(predicted_norm),
            });
        }
        Ok(records)
    }

    /// Prediction records for the validation span: imported when the
    /// forecaster is external, computed (and exported) otherwise.
    fn predictions(
        &self,
        series: &Series,
        split: &DatasetSplit<f64>,
        export: bool,
    ) -> Result<Vec<PredictionRecord<f64>>, CliError> {
        match &self.cfg.forecaster {
            ForecasterSpec::External(path) => import_predictions(path).map_err(ingest_error),
            _ => {
                let records = self.internal_predictions(series, split)?;
                if export {
                    let mut text = format!("{}\n", provenance_line(&self.cfg.digest()));
                    let mut body = Vec::new();
                    stadr_core::forecast::write_predictions(&mut body, &records)
                        .map_err(compute_error)?;
                    text.push_str(&String::from_utf8(body).expect("ascii records"));
                    let path = self.path("predictions.csv");
                    files::write_text(&path, &text)?;
                    println!("wrote {}", path.display());
                }
                Ok(records)
            }
        }
    }

    /// Previously exported predictions, for subcommands that consume rather
    /// than produce them.
    fn stored_predictions(&self) -> Result<Vec<PredictionRecord<f64>>, CliError> {
        match &self.cfg.forecaster {
            ForecasterSpec::External(path) => import_predictions(path).map_err(ingest_error),
            _ => {
                let path = self.path("predictions.csv");
                if !path.exists() {
                    return Err(CliError::Config(format!(
                        "{} not found; run `stadr curve` first (it exports the forecaster's predictions)",
                        path.display()
                    )));
                }
                import_predictions(&path).map_err(compute_error)
            }
        }
    }

    pub fn cmd_curve(&self) -> Result<(), CliError> {
        let series = self.load_series()?;
        let split = self.split(&series)?;
        self.check_segment_length(&split.validation)?;
        let records = self.predictions(&series, &split, true)?;
        let points = build_curve_points(
            &split.train,
            &split.validation,
            &records,
            self.cfg.segment_length,
            self.cfg.measure,
        )
        .map_err(compute_error)?;
        let curve = fit_quadratic(&points, self.cfg.metric).map_err(compute_error)?;

        let curve_file = CurveFile {
            version: files::VERSION.to_string(),
            config_digest: self.cfg.digest(),
            metric: curve.metric.to_string(),
            coeffs: curve.coeffs,
            domain: [curve.domain.0, curve.domain.1],
            rss: curve.rss,
            n_points: curve.n_points,
        };
        let path = self.path("curve.json");
        files::write_json(&path, &curve_file)?;
        println!("wrote {}", path.display());

        // Plot data: raw columns plus per-axis 0-1 min-max twins.
        let sdd_norm = minmax_norm(points.iter().map(|p| Some(p.sdd)).collect());
        let rmse_norm = minmax_norm(points.iter().map(|p| Some(p.rmse)).collect());
        let mape_norm = minmax_norm(points.iter().map(|p| p.mape).collect());
        let mut text = String::new();
        let _ = writeln!(text, "{}", provenance_line(&self.cfg.digest()));
        let _ = writeln!(text, "sdd,rmse,mape,sdd_norm,rmse_norm,mape_norm");
        for (i, p) in points.iter().enumerate() {
            let _ = writeln!(
                text,
                "{},{},{},{},{},{}",
                p.sdd,
                p.rmse,
                opt_str(p.mape),
                opt_str(sdd_norm[i]),
                opt_str(rmse_norm[i]),
                opt_str(mape_norm[i]),
            );
        }
        let path = self.path("curve_points.csv");
        files::write_text(&path, &text)?;
        println!("wrote {} ({} points)", path.display(), points.len());
        Ok(())
    }

    fn load_curve(&self) -> Result<FittedCurve<f64>, CliError> {
        let file: CurveFile = files::read_json(&self.path("curve.json"), "curve")?;
        let metric: MetricTag = file
            .metric
            .parse()
            .map_err(|e: String| compute_error(format!("curve.json: {e}")))?;
        Ok(FittedCurve {
            metric,
            coeffs: file.coeffs,
            domain: (file.domain[0], file.domain[1]),
            rss: file.rss,
            n_points: file.n_points,
        })
    }

    fn required_p_min(&self) -> Result<f64, CliError> {
        self.cfg.p_min.ok_or_else(|| {
            CliError::Config("p_min is required (config key p_min or --p-min)".to_string())
        })
    }

    pub fn cmd_stadro(&self) -> Result<(), CliError> {
        let series = self.load_series()?;
        let split = self.split(&series)?;
        self.check_segment_length(&split.validation)?;
        let curve = self.load_curve()?;
        let p_min = self.required_p_min()?;
        let records = self.stored_predictions()?;
        let by_tick: HashMap<i64, &PredictionRecord<f64>> =
            records.iter().map(|r| (r.time, r)).collect();
        let segments = split
            .validation
            .segments(self.cfg.segment_length)
            .map_err(compute_error)?;

        let mut text = String::new();
        let _ = writeln!(text, "{}", provenance_line(&self.cfg.digest()));
        let _ = writeln!(text, "start,end,metric_value,sdd,ratio,robust");
        let mut robust_count = 0usize;
        let mut d_pmin = None;
        for seg in &segments {
            let mut seg_records = Vec::with_capacity(seg.len());
            for offset in seg.start..seg.end() {
                let tick = split.validation.tick_at(offset);
                let record = by_tick.get(&tick).ok_or_else(|| {
                    compute_error(format!(
                        "segment starting at offset {} has no prediction for tick {tick}",
                        seg.start
                    ))
                })?;
                seg_records.push(**record);
            }
            let perf = metrics(&seg_records).map_err(compute_error)?;
            let metric_value = match self.cfg.metric {
                MetricTag::Rmse => Some(perf.rmse),
                MetricTag::Mape => perf.mape,
            };
            let verdict = stadro(&split.train, seg, &curve, p_min, self.cfg.measure)
                .map_err(compute_error)?;
            if verdict.robust {
                robust_count += 1;
            }
            d_pmin.get_or_insert(verdict.d_pmin);
            let _ = writeln!(
                text,
                "{},{},{},{},{},{}",
                verdict.start,
                verdict.end,
                opt_str(metric_value),
                verdict.d_instance,
                verdict.ratio,
                verdict.robust
            );
        }
        let path = self.path("verdicts.csv");
        files::write_text(&path, &text)?;
        println!(
            "wrote {} ({} robust of {} instances, d_pmin={})",
            path.display(),
            robust_count,
            segments.len(),
            d_pmin.map_or("n/a".to_string(), |d| d.to_string())
        );
        Ok(())
    }

    pub fn cmd_stadre(&self) -> Result<(), CliError> {
        let series = self.load_series()?;
        let split = self.split(&series)?;
        self.check_window_size(&split.train)?;
        let w = self.cfg.window_size;

        let model_file: ModelFile = files::read_json(&self.path("model.json"), "cluster")?;
        if model_file.w != w {
            return Err(CliError::Config(format!(
                "model.json was built with window_size {}, configured {}; re-run `stadr cluster`",
                model_file.w, w
            )));
        }
        let params = DtwParams {
            cost: model_file
                .dtw_cost
                .parse()
                .map_err(|e: String| compute_error(format!("model.json: {e}")))?,
            band: model_file.dtw_band,
        };

        let normalizer = self.normalizer(&split.train)?;
        let windows = self.training_windows(&normalizer, &split.train)?;
        let total_members: usize = model_file.sizes.iter().sum();
        if windows.len() != total_members {
            return Err(CliError::Config(format!(
                "model.json covers {} windows but the configured input yields {}; re-run `stadr cluster`",
                total_members,
                windows.len()
            )));
        }
        let assignments: Vec<usize> = windows
            .iter()
            .map(|win| cluster::nearest_centroid(&model_file.centroids, &win.values, &params).0)
            .collect();
        let mut sizes = vec![0usize; model_file.k];
        for &a in &assignments {
            sizes[a] += 1;
        }
        if sizes != model_file.sizes {
            return Err(CliError::Config(
                "model.json cluster sizes do not match reassigned windows; the input or \
                 configuration changed since `stadr cluster` ran"
                    .to_string(),
            ));
        }
        let model = ClusterModel::from_parts(
            model_file.centroids,
            assignments,
            model_file.silhouette,
            model_file.seed,
            params,
        )
        .map_err(compute_error)?;

        let errors = self.per_window_errors(&series, &split, &normalizer, &windows)?;

        let normalized = normalizer.apply_series(&series);
        let neighbor_seed = derive_seed(self.cfg.seed, STREAM_NEIGHBOR);
        let stadre_params = StadreParams {
            measure: self.cfg.measure,
            repr: self.cfg.cluster_repr,
            seed: neighbor_seed,
        };

        let n_train = split.train.len();
        let mut lines = Vec::new();
        let mut start = n_train;
        while start + w <= series.len() {
            let instance = Window {
                start,
                values: normalized.values()[start..start + w].to_vec(),
            };
            let report = stadre(&instance, &model, &windows, &errors, &stadre_params)
                .map_err(|e| match e {
                    ReliabilityError::MissingError { window } => compute_error(format!(
                        "no prediction error for training window {window}; external prediction \
                         files must also cover training ticks for reliability estimation"
                    )),
                    other => compute_error(other),
                })?;
            lines.push(ReliabilityLine {
                instance_start: report.instance_start,
                cluster_id: report.cluster_id,
                m: report.m,
                mean_sq_error: report.mean_sq_error,
                d_instance: report.d_instance,
                d_origin: report.d_origin,
                confine: report.confine,
                stadre: report.stadre,
                seed: self.cfg.seed,
                out_of_range: report.out_of_range,
            });
            start += w;
        }

        let header = JsonlHeader {
            version: files::VERSION.to_string(),
            config_digest: self.cfg.digest(),
        };
        let mut text = serde_json::to_string(&header).map_err(compute_error)?;
        text.push('\n');
        for line in &lines {
            text.push_str(&serde_json::to_string(line).map_err(compute_error)?);
            text.push('\n');
        }
        let path = self.path("reliability.jsonl");
        files::write_text(&path, &text)?;
        println!("wrote {} ({} instances)", path.display(), lines.len());
        Ok(())
    }

    /// One-step prediction error per training window, on the normalized
    /// scale, at the tick immediately following the window.
    fn per_window_errors(
        &self,
        series: &Series,
        split: &DatasetSplit<f64>,
        normalizer: &Normalizer<f64>,
        windows: &[Window<f64>],
    ) -> Result<HashMap<usize, f64>, CliError> {
        let normalized = normalizer.apply_series(series);
        let w = self.cfg.window_size;
        let mut errors = HashMap::with_capacity(windows.len());
        match &self.cfg.forecaster {
            ForecasterSpec::External(path) => {
                let records = import_predictions::<f64>(path).map_err(ingest_error)?;
                let by_tick: HashMap<i64, &PredictionRecord<f64>> =
                    records.iter().map(|r| (r.time, r)).collect();
                for (i, win) in windows.iter().enumerate() {
                    let tick = series.tick_at(win.start + w);
                    if let Some(r) = by_tick.get(&tick) {
                        let err = normalizer.apply(r.predicted) - normalizer.apply(r.actual);
                        errors.insert(i, err);
                    }
                }
            }
            _ => {
                let norm_train = normalizer.apply_series(&split.train);
                let mut forecaster: Box<dyn Forecaster<f64>> = match &self.cfg.forecaster {
                    ForecasterSpec::Persistence => Box::new(persistence_forecaster()),
                    ForecasterSpec::Ar { order, ridge } => {
                        if *order > w {
                            return Err(CliError::Config(format!(
                                "forecaster ar order {} exceeds window_size {}",
                                order, w
                            )));
                        }
                        Box::new(
                            ar_forecaster(*order, *ridge)
                                .map_err(|e| CliError::Config(e.to_string()))?,
                        )
                    }
                    ForecasterSpec::External(_) => unreachable!(),
                };
                forecaster.fit(&norm_train).map_err(compute_error)?;
                for (i, win) in windows.iter().enumerate() {
                    let predicted = forecaster.predict_next(&win.values).map_err(compute_error)?;
                    let actual = normalized.value_at(win.start + w);
                    errors.insert(i, predicted - actual);
                }
            }
        }
        Ok(errors)
    }

    pub fn cmd_report(&self) -> Result<(), CliError> {
        let series = self.load_series()?;
        let split = self.split(&series)?;
        let model_file: ModelFile = files::read_json(&self.path("model.json"), "cluster")?;
        let curve = self.load_curve()?;
        let verdicts = files::read_verdicts(&self.path("verdicts.csv"))?;
        let reliability = files::read_reliability(&self.path("reliability.jsonl"))?;
        let p_min = self.required_p_min()?;
        let inversion = invert_curve(&curve, p_min).map_err(compute_error)?;

        let robust_count = verdicts.iter().filter(|v| v.robust).count();
        let extrapolated_count = verdicts
            .iter()
            .filter(|v| v.sdd < curve.domain.0 || v.sdd > curve.domain.1)
            .count();
        let smallest = model_file.sizes.iter().copied().min().unwrap_or(0);
        let stadres: Vec<f64> = reliability.iter().map(|l| l.stadre).collect();
        let reliability_summary = files::ReliabilitySummary {
            instances: stadres.len(),
            mean_stadre: mean(&stadres),
            min_stadre: stadres.iter().copied().reduce(f64::min),
            max_stadre: stadres.iter().copied().reduce(f64::max),
            out_of_range_count: reliability.iter().filter(|l| l.out_of_range).count(),
        };

        let report = files::ReportFile {
            version: files::VERSION.to_string(),
            config_digest: self.cfg.digest(),
            input: files::InputSummary {
                path: self.cfg.input_path.display().to_string(),
                points: series.len(),
                train_points: split.train.len(),
                validation_points: split.validation.len(),
            },
            cluster: files::ClusterSummary {
                k: model_file.k,
                silhouette: model_file.silhouette,
                sizes: model_file.sizes.clone(),
                smallest_cluster_size: smallest,
            },
            curve: files::CurveSummary {
                metric: curve.metric.to_string(),
                coeffs: curve.coeffs,
                domain: [curve.domain.0, curve.domain.1],
                rss: curve.rss,
                n_points: curve.n_points,
            },
            robustness: files::RobustnessSummary {
                p_min,
                d_pmin: inversion.d_pmin,
                instances: verdicts.len(),
                robust_count,
                extrapolated_count,
                max_ratio: verdicts.iter().map(|v| v.ratio).reduce(f64::max),
            },
            reliability: reliability_summary,
        };
        let path = self.path("report.json");
        files::write_json(&path, &report)?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn summarize(values: &[f64]) -> CentroidSummary<f64> {
    let mut min = values[0];
    let mut max = values[0];
    let mut sum = 0.0;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    CentroidSummary {
        len: values.len(),
        mean: sum / values.len() as f64,
        min,
        max,
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn opt_str(value: Option<f64>) -> String {
    value.map_or(String::new(), |v| v.to_string())
}

/// Per-column min-max normalization to 0-1; a constant column maps to 0 and
/// missing entries stay missing.
fn minmax_norm(values: Vec<Option<f64>>) -> Vec<Option<f64>> {
    let present: Vec<f64> = values.iter().filter_map(|v| *v).collect();
    if present.is_empty() {
        return values;
    }
    let lo = present.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = present.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    values
        .into_iter()
        .map(|v| {
            v.map(|x| {
                if hi > lo {
                    (x - lo) / (hi - lo)
                } else {
                    0.0
                }
            })
        })
        .collect()
}
