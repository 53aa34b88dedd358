//! Pearson chi-square tests over field-valued samples.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

fn p_value(statistic: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    ChiSquared::new(df as f64)
        .expect("positive degrees of freedom")
        .sf(statistic)
}

/// Goodness of fit against the uniform distribution on `counts.len()` cells.
pub fn uniformity(counts: &[u64]) -> ChiSquare {
    let total: u64 = counts.iter().sum();
    let cells = counts.len();
    if total == 0 || cells < 2 {
        return ChiSquare {
            statistic: 0.0,
            df: 0,
            p_value: 1.0,
        };
    }
    let expected = total as f64 / cells as f64;
    let statistic = counts
        .iter()
        .map(|&c| {
            let diff = c as f64 - expected;
            diff * diff / expected
        })
        .sum();
    let df = cells - 1;
    ChiSquare {
        statistic,
        df,
        p_value: p_value(statistic, df),
    }
}

/// Two-sample homogeneity test on a 2 x cells contingency table. Cells
/// empty in both samples are dropped.
pub fn homogeneity(a: &[u64], b: &[u64]) -> ChiSquare {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let total = (na + nb) as f64;
    if na == 0 || nb == 0 {
        return ChiSquare {
            statistic: 0.0,
            df: 0,
            p_value: 1.0,
        };
    }
    let mut statistic = 0.0;
    let mut used = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        used += 1;
        for (obs, n) in [(x, na), (y, nb)] {
            let e = n as f64 * col / total;
            let diff = obs as f64 - e;
            statistic += diff * diff / e;
        }
    }
    let df = used.saturating_sub(1);
    ChiSquare {
        statistic,
        df,
        p_value: p_value(statistic, df),
    }
}

/// A family of tests judged jointly with a Bonferroni-corrected threshold.
#[derive(Clone, Debug, Default)]
pub struct Battery {
    tests: Vec<(String, ChiSquare)>,
}

impl Battery {
    pub fn push(&mut self, label: impl Into<String>, t: ChiSquare) {
        self.tests.push((label.into(), t));
    }

    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    /// Per-test threshold `alpha / len`.
    pub fn threshold(&self, alpha: f64) -> f64 {
        alpha / self.tests.len().max(1) as f64
    }

    /// The test with the smallest p-value.
    pub fn worst(&self) -> Option<&(String, ChiSquare)> {
        self.tests
            .iter()
            .min_by(|a, b| a.1.p_value.total_cmp(&b.1.p_value))
    }

    pub fn passes(&self, alpha: f64) -> bool {
        let th = self.threshold(alpha);
        self.tests.iter().all(|(_, t)| t.p_value >= th)
    }

    pub fn failures(&self, alpha: f64) -> usize {
        let th = self.threshold(alpha);
        self.tests.iter().filter(|(_, t)| t.p_value < th).count()
    }
}
