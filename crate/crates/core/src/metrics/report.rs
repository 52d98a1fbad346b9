use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::rouge::{RougeScore, SummaryScores};
use super::stats::{paired_t_test, TestResult};
use super::MetricsError;

/// Significance threshold used when marking comparison rows.
pub const SIGNIFICANCE_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleScores {
    pub example_id: String,
    #[serde(flatten)]
    pub scores: SummaryScores,
}

/// The scalar ROUGE fields compared between reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricField {
    #[serde(rename = "rouge1_f1")]
    Rouge1F1,
    #[serde(rename = "rouge2_f1")]
    Rouge2F1,
    #[serde(rename = "rougeL_f1")]
    RougeLF1,
    #[serde(rename = "rouge_avg")]
    RougeAvg,
}

impl MetricField {
    pub const ALL: [MetricField; 4] = [
        MetricField::Rouge1F1,
        MetricField::Rouge2F1,
        MetricField::RougeLF1,
        MetricField::RougeAvg,
    ];

    pub fn get(self, s: &SummaryScores) -> f64 {
        match self {
            MetricField::Rouge1F1 => s.rouge1.f1,
            MetricField::Rouge2F1 => s.rouge2.f1,
            MetricField::RougeLF1 => s.rouge_l.f1,
            MetricField::RougeAvg => s.rouge_avg,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricField::Rouge1F1 => "rouge1_f1",
            MetricField::Rouge2F1 => "rouge2_f1",
            MetricField::RougeLF1 => "rougeL_f1",
            MetricField::RougeAvg => "rouge_avg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceRow {
    pub metric: MetricField,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Mean of per-example `b - a`.
    pub mean_delta: f64,
    pub test: TestResult,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_example: Vec<ExampleScores>,
    pub aggregate: SummaryScores,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub significance: Vec<SignificanceRow>,
}

fn mean_score(items: &[&RougeScore]) -> RougeScore {
    let n = items.len().max(1) as f64;
    RougeScore {
        precision: items.iter().map(|s| s.precision).sum::<f64>() / n,
        recall: items.iter().map(|s| s.recall).sum::<f64>() / n,
        f1: items.iter().map(|s| s.f1).sum::<f64>() / n,
    }
}

/// Field-wise arithmetic mean; all zeros for an empty slice.
pub fn mean_scores(scores: &[SummaryScores]) -> SummaryScores {
    let n = scores.len().max(1) as f64;
    SummaryScores {
        rouge1: mean_score(&scores.iter().map(|s| &s.rouge1).collect::<Vec<_>>()),
        rouge2: mean_score(&scores.iter().map(|s| &s.rouge2).collect::<Vec<_>>()),
        rouge_l: mean_score(&scores.iter().map(|s| &s.rouge_l).collect::<Vec<_>>()),
        rouge_avg: scores.iter().map(|s| s.rouge_avg).sum::<f64>() / n,
    }
}

impl MetricReport {
    pub fn new(per_example: Vec<ExampleScores>) -> Self {
        let scores: Vec<SummaryScores> = per_example.iter().map(|e| e.scores).collect();
        Self {
            aggregate: mean_scores(&scores),
            per_example,
            significance: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.per_example.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_example.is_empty()
    }

    /// Pair this report's examples with `other`'s by id, in this report's order.
    fn paired<'a>(
        &'a self,
        other: &'a MetricReport,
    ) -> Result<Vec<(&'a SummaryScores, &'a SummaryScores)>, MetricsError> {
        if self.len() != other.len() {
            return Err(MetricsError::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        let lookup: HashMap<&str, &SummaryScores> = other
            .per_example
            .iter()
            .map(|e| (e.example_id.as_str(), &e.scores))
            .collect();
        self.per_example
            .iter()
            .map(|e| {
                lookup
                    .get(e.example_id.as_str())
                    .map(|o| (&e.scores, *o))
                    .ok_or_else(|| MetricsError::UnpairedExample(e.example_id.clone()))
            })
            .collect()
    }

    /// Per-example `self - baseline` for one field.
    pub fn deltas(
        &self,
        baseline: &MetricReport,
        field: MetricField,
    ) -> Result<Vec<f64>, MetricsError> {
        Ok(baseline
            .paired(self)?
            .into_iter()
            .map(|(base, this)| field.get(this) - field.get(base))
            .collect())
    }

    /// Per-metric paired t-tests of `b` against `a`.
    pub fn compare(
        a: &MetricReport,
        b: &MetricReport,
    ) -> Result<Vec<SignificanceRow>, MetricsError> {
        let pairs = a.paired(b)?;
        MetricField::ALL
            .iter()
            .map(|&metric| {
                let xs: Vec<f64> = pairs.iter().map(|(x, _)| metric.get(x)).collect();
                let ys: Vec<f64> = pairs.iter().map(|(_, y)| metric.get(y)).collect();
                let test = paired_t_test(&ys, &xs)?;
                let n = xs.len() as f64;
                let mean_a = xs.iter().sum::<f64>() / n;
                let mean_b = ys.iter().sum::<f64>() / n;
                let mean_delta = ys.iter().zip(&xs).map(|(y, x)| y - x).sum::<f64>() / n;
                Ok(SignificanceRow {
                    metric,
                    mean_a,
                    mean_b,
                    mean_delta,
                    significant: test.p_value < SIGNIFICANCE_LEVEL,
                    test,
                })
            })
            .collect()
    }

    /// Per-example rows followed by one `mean` row.
    pub fn write_csv(&self, writer: impl Write) -> Result<(), MetricsError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "example_id",
            "rouge1_p",
            "rouge1_r",
            "rouge1_f1",
            "rouge2_p",
            "rouge2_r",
            "rouge2_f1",
            "rougeL_p",
            "rougeL_r",
            "rougeL_f1",
            "rouge_avg",
        ])?;
        let row = |id: &str, s: &SummaryScores| {
            let mut r = vec![id.to_string()];
            for v in [s.rouge1, s.rouge2, s.rouge_l] {
                r.extend([v.precision, v.recall, v.f1].map(|x| x.to_string()));
            }
            r.push(s.rouge_avg.to_string());
            r
        };
        for e in &self.per_example {
            w.write_record(row(&e.example_id, &e.scores))?;
        }
        w.write_record(row("mean", &self.aggregate))?;
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, writer: impl Write) -> Result<(), MetricsError> {
        serde_json::to_writer_pretty(writer, self).map_err(|e| MetricsError::Io(e.into()))
    }
}
