use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub node: usize,
    pub aleatoric: f64,
    pub epistemic: f64,
    pub is_ood: bool,
    pub is_correct: bool,
}

/// Per-node uncertainty scores with ground-truth flags.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    /// Builds a table, rejecting non-finite scores and length mismatches.
    pub fn new(
        nodes: &[usize],
        aleatoric: &[f64],
        epistemic: &[f64],
        is_ood: &[bool],
        is_correct: &[bool],
    ) -> Result<Self> {
        let n = nodes.len();
        if [aleatoric.len(), epistemic.len(), is_ood.len(), is_correct.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::shape("score_table", "columns of different lengths".to_string()));
        }
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            if !aleatoric[i].is_finite() || !epistemic[i].is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite score for node {}", nodes[i])));
            }
            rows.push(ScoreRow {
                node: nodes[i],
                aleatoric: aleatoric[i],
                epistemic: epistemic[i],
                is_ood: is_ood[i],
                is_correct: is_correct[i],
            });
        }
        Ok(ScoreTable { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn aleatoric(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.aleatoric).collect()
    }

    pub fn epistemic(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.epistemic).collect()
    }

    pub fn ood_flags(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.is_ood).collect()
    }

    /// Rows of in-distribution nodes only.
    pub fn in_distribution(&self) -> ScoreTable {
        ScoreTable {
            rows: self.rows.iter().filter(|r| !r.is_ood).cloned().collect(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        if self.rows.is_empty() {
            w.write_record(["node", "aleatoric", "epistemic", "is_ood", "is_correct"])?;
        }
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let rows = r.deserialize().collect::<std::result::Result<Vec<ScoreRow>, _>>()?;
        Ok(ScoreTable { rows })
    }
}
