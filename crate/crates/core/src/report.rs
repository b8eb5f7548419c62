//! Run reports (JSON) and the flat CSV exports that go with them.
//!
//! A selection report only holds values that are fixed by the input and the
//! configuration, so identical runs produce identical bytes. Wall-clock
//! timings are written to a separate file.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::classify::KnnConfig;
use crate::dataio::LabelColumn;
use crate::pipeline::{KneeSource, MssCurve, PipelineConfig, SelectionResult, SweepPoint};
use crate::separability::SeparabilityMatrix;
use crate::{Error, Result};

pub const SELECTION_FORMAT: &str = "gbafs-selection/1";

/// Where the training data came from and how it was prepared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataEcho {
    pub input: String,
    pub label_column: LabelColumn,
    pub normalized: bool,
    /// `None` when the whole file was used for selection.
    pub train_fraction: Option<f64>,
    pub split_seed: u64,
    pub n_instances: usize,
    pub n_features: usize,
    pub class_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFeature {
    pub index: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub format: String,
    pub data: DataEcho,
    pub config: PipelineConfig,
    pub k_min: usize,
    pub knee_source: KneeSource,
    pub selected: Vec<SelectedFeature>,
    pub curve: MssCurve,
    /// Indices of the final embedding at each curve `k`, when computed.
    #[serde(default)]
    pub sweep: Vec<SweepPoint>,
}

impl SelectionReport {
    pub fn new(data: DataEcho, result: &SelectionResult, sweep: Vec<SweepPoint>) -> Self {
        let selected = result
            .selected_features
            .iter()
            .zip(&result.selected_names)
            .map(|(&index, name)| SelectedFeature { index, name: name.clone() })
            .collect();
        Self {
            format: SELECTION_FORMAT.into(),
            data,
            config: result.config.clone(),
            k_min: result.k_min,
            knee_source: result.knee_source,
            selected,
            curve: result.curve.clone(),
            sweep,
        }
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        self.selected.iter().map(|f| f.index).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses and checks a report produced by [`SelectionReport::to_json`].
    pub fn from_json(text: &str) -> Result<Self> {
        let report: SelectionReport = serde_json::from_str(text)?;
        report.check()?;
        Ok(report)
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDataset(format!("report: {msg}")));
        if self.format != SELECTION_FORMAT {
            return bad(format!("unknown format '{}'", self.format));
        }
        if self.selected.len() != self.k_min {
            return bad(format!("{} selected features for k_min {}", self.selected.len(), self.k_min));
        }
        let m = self.data.n_features;
        let mut seen = vec![false; m];
        for f in &self.selected {
            if f.index >= m {
                return bad(format!("feature {} out of range for {m} features", f.index));
            }
            if std::mem::replace(&mut seen[f.index], true) {
                return bad(format!("feature {} selected twice", f.index));
            }
        }
        let c = &self.curve;
        if c.averaged.len() != c.ks.len() || c.fold_values.iter().any(|f| f.len() != c.ks.len()) {
            return bad("curve lengths disagree".into());
        }
        Ok(())
    }
}

/// Wall-clock timings of one run, kept out of the deterministic report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub threads: usize,
    pub stages: Vec<(String, f64)>,
}

impl Timings {
    pub fn record(&mut self, stage: &str, seconds: f64) {
        self.stages.push((stage.to_string(), seconds));
    }
}

/// Mean metrics of one method over repeated splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub k: usize,
    pub accuracy: f64,
    pub balanced_f: f64,
    /// Mean KNN prediction time over the repetitions.
    pub predict_seconds: f64,
    pub per_repetition_accuracy: Vec<f64>,
    pub per_repetition_balanced_f: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingComparison {
    pub subset_seconds: f64,
    pub all_features_seconds: f64,
    /// `1 - subset / all`.
    pub saved_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub data: DataEcho,
    pub knn: KnnConfig,
    pub repetitions: usize,
    pub seed: u64,
    pub k_min: usize,
    pub methods: Vec<MethodSummary>,
    /// Absent when either GB-AFS or the all-features run was skipped.
    pub timing: Option<TimingComparison>,
}

fn csv_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// `k,silhouette,ss,mss,cv_mss`; blank cells are undefined values. Rows
/// follow the curve's `k` values, with sweep values joined in by `k`.
pub fn write_curve_csv<W: Write>(out: W, curve: &MssCurve, sweep: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "silhouette", "ss", "mss", "cv_mss"])?;
    let mut ks: Vec<usize> = curve.ks.iter().copied().chain(sweep.iter().map(|p| p.k)).collect();
    ks.sort_unstable();
    ks.dedup();
    for k in ks {
        let p = sweep.iter().find(|p| p.k == k);
        let cv = curve.ks.iter().position(|&c| c == k).and_then(|j| curve.averaged[j]);
        w.write_record([
            k.to_string(),
            csv_cell(p.and_then(|p| p.silhouette)),
            csv_cell(p.and_then(|p| p.simplified_silhouette)),
            csv_cell(p.and_then(|p| p.mss)),
            csv_cell(cv),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `feature_name,x,y`, one row per feature.
pub fn write_embedding_csv<W: Write>(out: W, names: &[String], coords: &ndarray::Array2<f64>) -> Result<()> {
    if coords.nrows() != names.len() || coords.ncols() < 2 {
        return Err(Error::InvalidParameter(format!(
            "{} names for a {}x{} embedding",
            names.len(),
            coords.nrows(),
            coords.ncols()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature_name", "x", "y"])?;
    for (name, row) in names.iter().zip(coords.rows()) {
        w.write_record([name.clone(), row[0].to_string(), row[1].to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `feature_name,pair_1_1,...,pair_C_C`, one row per feature.
pub fn write_feature_space_csv<W: Write>(out: W, names: &[String], z: &SeparabilityMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["feature_name".to_string()];
    header.extend(z.column_names());
    w.write_record(&header)?;
    for (f, name) in names.iter().enumerate() {
        let mut rec = vec![name.clone()];
        rec.extend(z.row(f).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
