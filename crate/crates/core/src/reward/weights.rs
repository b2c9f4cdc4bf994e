use super::program::RewardProgram;

/// Term-by-stage weight table in the order terms first appear.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub terms: Vec<String>,
    /// `raw[term][stage]`.
    pub raw: Vec<Vec<f64>>,
    /// Columns scaled to unit L1 norm; degenerate columns stay zero.
    pub normalized: Vec<Vec<f64>>,
    /// Stages whose weights are all zero.
    pub degenerate: Vec<bool>,
}

impl WeightMatrix {
    pub fn stages(&self) -> usize {
        self.degenerate.len()
    }

    pub fn column_sum(&self, stage: usize) -> f64 {
        self.normalized.iter().map(|row| row[stage]).sum()
    }
}

pub fn weight_matrix(history: &[RewardProgram]) -> WeightMatrix {
    let mut terms: Vec<String> = Vec::new();
    for p in history {
        for t in &p.terms {
            if !terms.contains(&t.name) {
                terms.push(t.name.clone());
            }
        }
    }
    let stages = history.len();
    let raw: Vec<Vec<f64>> = terms
        .iter()
        .map(|name| history.iter().map(|p| p.weight(name).unwrap_or(0.0)).collect())
        .collect();
    let mut normalized = raw.clone();
    let mut degenerate = vec![false; stages];
    for s in 0..stages {
        let total: f64 = raw.iter().map(|row| row[s].abs()).sum();
        if total > 0.0 {
            for row in normalized.iter_mut() {
                row[s] /= total;
            }
        } else {
            degenerate[s] = true;
        }
    }
    WeightMatrix { terms, raw, normalized, degenerate }
}
