//! Derived tables: accuracy relative to a baseline and per-variant timing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};
use crate::experiment::{MetricsRow, Variant};

/// One point of a relative-accuracy series. `epoch` is the cumulative
/// number of weak-learner epochs, which puts ensembles and single models on
/// a common axis; `step` is the variant's own round or epoch index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub variant: String,
    pub step: usize,
    pub epoch: usize,
    pub test_acc: f64,
    /// Accuracy minus the baseline's accuracy at the same epoch.
    pub relative_acc: f64,
    /// Accuracy minus this variant's first recorded accuracy.
    pub improvement: f64,
}

fn variant_of(rows: &[MetricsRow]) -> Result<Variant> {
    let first = rows.first().ok_or_else(|| domain("empty metrics series"))?;
    if rows.iter().any(|r| r.variant != first.variant) {
        return Err(domain("a metrics series mixes several variants"));
    }
    first.variant.parse()
}

/// Piecewise-linear interpolation, constant beyond the end points.
fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let (first, last) = (points[0], points[points.len() - 1]);
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let i = points.partition_point(|p| p.0 <= x);
    let (a, b) = (points[i - 1], points[i]);
    a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
}

/// Relative-accuracy and improvement series for each metrics series.
pub fn plot_data(
    series: &[Vec<MetricsRow>],
    baseline: &[MetricsRow],
    epochs_per_learner: usize,
) -> Result<Vec<PlotRow>> {
    if baseline.is_empty() {
        return Err(domain("missing baseline metrics"));
    }
    let base_variant = variant_of(baseline)?;
    let mut base_points: Vec<(f64, f64)> = baseline
        .iter()
        .map(|r| (base_variant.cumulative_epochs(r.step, epochs_per_learner) as f64, r.test_acc))
        .collect();
    base_points.sort_by(|a, b| a.0.total_cmp(&b.0));
    base_points.dedup_by(|a, b| a.0 == b.0);

    let mut out = Vec::new();
    for rows in series {
        let variant = variant_of(rows)?;
        let start = rows[0].test_acc;
        for r in rows {
            let epoch = variant.cumulative_epochs(r.step, epochs_per_learner);
            out.push(PlotRow {
                variant: r.variant.clone(),
                step: r.step,
                epoch,
                test_acc: r.test_acc,
                relative_acc: r.test_acc - interpolate(&base_points, epoch as f64),
                improvement: r.test_acc - start,
            });
        }
    }
    Ok(out)
}

pub fn plot_csv(rows: &[PlotRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

/// Total wall-clock seconds per dataset (rows) and variant (columns).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimingTable {
    cells: BTreeMap<String, BTreeMap<Variant, f64>>,
    order: Vec<String>,
}

impl TimingTable {
    /// Adds every variant found in `rows` under `dataset`; a run's total is
    /// its largest cumulative `elapsed_s`.
    pub fn add(&mut self, dataset: &str, rows: &[MetricsRow]) -> Result<()> {
        let mut totals: BTreeMap<Variant, f64> = BTreeMap::new();
        for r in rows {
            let v: Variant = r.variant.parse()?;
            let t = totals.entry(v).or_insert(0.0);
            *t = t.max(r.elapsed_s);
        }
        if !self.cells.contains_key(dataset) {
            self.order.push(dataset.to_string());
        }
        let row = self.cells.entry(dataset.to_string()).or_default();
        for (v, t) in totals {
            if row.insert(v, t).is_some() {
                return Err(config(format!("two runs of {v} for dataset {dataset}")));
            }
        }
        Ok(())
    }

    pub fn get(&self, dataset: &str, variant: Variant) -> Option<f64> {
        self.cells.get(dataset)?.get(&variant).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// CSV with one column per variant; missing runs are empty cells.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        if self.is_empty() {
            return Err(domain("no metrics to tabulate"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["dataset".to_string()];
        header.extend(Variant::ALL.iter().map(|v| v.name().to_string()));
        w.write_record(&header)?;
        for dataset in &self.order {
            let mut record = vec![dataset.clone()];
            for v in Variant::ALL {
                record.push(self.get(dataset, v).map(|t| format!("{t:.1}")).unwrap_or_default());
            }
            w.write_record(&record)?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(variant: &str, accs: &[f64]) -> Vec<MetricsRow> {
        accs.iter()
            .enumerate()
            .map(|(i, &a)| MetricsRow {
                variant: variant.into(),
                step: i + 1,
                train_acc: a,
                test_acc: a,
                risk: 1.0,
                elapsed_s: (i + 1) as f64 * 2.05,
            })
            .collect()
    }

    #[test]
    fn identical_to_baseline_is_zero() {
        let base = rows("vanilla", &[0.6, 0.7, 0.8]);
        let out = plot_data(&[base.clone()], &base, 5).unwrap();
        assert!(out.iter().all(|r| r.relative_acc == 0.0));
        assert_eq!(out[0].improvement, 0.0);
    }

    #[test]
    fn relative_accuracy_on_epoch_axis() {
        let base = rows("vanilla", &[0.8; 10]);
        let boost = rows("boost", &[0.85, 0.9]);
        let out = plot_data(&[boost], &base, 5).unwrap();
        assert_eq!(out[0].epoch, 5);
        assert_eq!(out[1].epoch, 10);
        assert!((out[0].relative_acc - 0.05).abs() < 1e-12);
        assert!((out[1].improvement - 0.05).abs() < 1e-12);
    }

    #[test]
    fn interpolates_between_baseline_epochs() {
        let base = vec![
            MetricsRow { step: 2, ..rows("vanilla", &[0.6])[0].clone() },
            MetricsRow { step: 4, ..rows("vanilla", &[0.8])[0].clone() },
        ];
        assert!((interpolate(&[(2.0, 0.6), (4.0, 0.8)], 3.0) - 0.7).abs() < 1e-12);
        assert!(plot_data(&[], &base, 5).unwrap().is_empty());
    }

    #[test]
    fn missing_baseline_is_an_error() {
        assert!(plot_data(&[rows("boost", &[0.5])], &[], 5).is_err());
    }

    #[test]
    fn timing_table_shape() {
        let mut t = TimingTable::default();
        assert!(t.to_csv().is_err());
        let mut run = rows("boost", &[0.5, 0.5, 0.5, 0.5, 0.5, 0.5]);
        run.last_mut().unwrap().elapsed_s = 12.3;
        t.add("synthetic", &run).unwrap();
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "dataset,vanilla,subseq-vanilla,boost,subseq-boost,is-boost,subseq-is-boost"
        );
        assert_eq!(lines[1], "synthetic,,,12.3,,,");
        assert!(t.add("synthetic", &run).is_err());
    }
}
