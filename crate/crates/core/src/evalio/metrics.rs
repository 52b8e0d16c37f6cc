use std::cmp::Ordering;

use num_rational::Ratio;

use super::{EvalError, Result};

/// Binary labels with one score each.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScores<T> {
    scores: Vec<T>,
    labels: Vec<u8>,
}

/// Positive/negative pair tallies behind the AUC.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    /// Pairs where the positive outscores the negative.
    pub concordant: u64,
    /// Pairs with equal scores.
    pub tied: u64,
    /// `positives * negatives`.
    pub total: u64,
}

impl PairCounts {
    /// `(concordant + tied / 2) / total` as an exact fraction.
    pub fn auc_exact(&self) -> Ratio<u64> {
        Ratio::new(2 * self.concordant + self.tied, 2 * self.total)
    }

    pub fn auc(&self) -> f64 {
        (2 * self.concordant + self.tied) as f64 / (2 * self.total) as f64
    }
}

impl<T: PartialOrd + Copy> LabeledScores<T> {
    pub fn new(scores: Vec<T>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(EvalError::LengthMismatch {
                scores: scores.len(),
                labels: labels.len(),
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l > 1) {
            return Err(EvalError::NonBinaryLabel(l));
        }
        #[allow(clippy::eq_op)]
        if scores.iter().any(|s| s.partial_cmp(s).is_none()) {
            return Err(EvalError::UnorderedScore);
        }
        Ok(Self { scores, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn scores(&self) -> &[T] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    fn class_sizes(&self) -> (u64, u64) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count() as u64;
        (pos, self.labels.len() as u64 - pos)
    }

    fn require_both_classes(&self) -> Result<(u64, u64)> {
        let (pos, neg) = self.class_sizes();
        if pos == 0 || neg == 0 {
            return Err(EvalError::SingleClass);
        }
        Ok((pos, neg))
    }

    /// Indices sorted by score, grouped into runs of equal scores.
    fn tie_groups(&self, descending: bool) -> Vec<(u64, u64)> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        let cmp = |a: &usize, b: &usize| {
            let o = self.scores[*a].partial_cmp(&self.scores[*b]).unwrap_or(Ordering::Equal);
            if descending {
                o.reverse()
            } else {
                o
            }
        };
        order.sort_by(cmp);
        let mut groups = Vec::new();
        let mut k = 0;
        while k < order.len() {
            let mut pos = 0;
            let mut neg = 0;
            let head = self.scores[order[k]];
            while k < order.len() && self.scores[order[k]].partial_cmp(&head) == Some(Ordering::Equal) {
                if self.labels[order[k]] == 1 {
                    pos += 1;
                } else {
                    neg += 1;
                }
                k += 1;
            }
            groups.push((pos, neg));
        }
        groups
    }

    /// Mann-Whitney pair tallies from one sort.
    pub fn pair_counts(&self) -> Result<PairCounts> {
        let (pos, neg) = self.require_both_classes()?;
        let mut concordant = 0;
        let mut tied = 0;
        let mut neg_below = 0;
        for (p, n) in self.tie_groups(false) {
            concordant += p * neg_below;
            tied += p * n;
            neg_below += n;
        }
        Ok(PairCounts {
            concordant,
            tied,
            total: pos * neg,
        })
    }

    /// Exact area under the ROC curve; ties count half.
    pub fn auc_exact(&self) -> Result<Ratio<u64>> {
        Ok(self.pair_counts()?.auc_exact())
    }

    pub fn auc(&self) -> Result<f64> {
        Ok(self.pair_counts()?.auc())
    }

    /// ROC vertices from `(0, 0)` to `(1, 1)`, one per distinct score, with
    /// collinear vertical and horizontal runs merged.
    pub fn roc_points(&self) -> Result<Vec<(f64, f64)>> {
        let (pos, neg) = self.require_both_classes()?;
        let mut counts = vec![(0u64, 0u64)];
        let (mut tp, mut fp) = (0, 0);
        for (p, n) in self.tie_groups(true) {
            tp += p;
            fp += n;
            counts.push((fp, tp));
        }
        let mut kept: Vec<(u64, u64)> = Vec::with_capacity(counts.len());
        for c in counts {
            if kept.len() >= 2 {
                let a = kept[kept.len() - 2];
                let b = kept[kept.len() - 1];
                if (a.0 == b.0 && b.0 == c.0) || (a.1 == b.1 && b.1 == c.1) {
                    kept.pop();
                }
            }
            kept.push(c);
        }
        Ok(kept
            .into_iter()
            .map(|(f, t)| (f as f64 / neg as f64, t as f64 / pos as f64))
            .collect())
    }
}

impl<T: PartialOrd + Copy + Into<f64>> LabeledScores<T> {
    /// Fraction of samples where `score >= threshold` agrees with the label.
    /// A score equal to the threshold predicts the positive class.
    pub fn accuracy(&self, threshold: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(EvalError::EmptyInput);
        }
        let correct = self
            .scores
            .iter()
            .zip(&self.labels)
            .filter(|(&s, &l)| u8::from(s.into() >= threshold) == l)
            .count();
        Ok(correct as f64 / self.len() as f64)
    }
}

/// Trapezoidal area under a polyline.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}
