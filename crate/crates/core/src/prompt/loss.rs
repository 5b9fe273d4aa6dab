use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    /// The gold token has zero mass; `loss` carries the +inf sentinel.
    #[error("gold token at position {position} has probability 0")]
    ZeroGoldProbability { position: usize, loss: f64 },
}

/// Per-position predicted distributions and the gold token at each position.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    probs: Vec<Vec<f64>>,
    gold: Vec<u32>,
}

const SUM_TOLERANCE: f64 = 1e-6;

impl TokenDistribution {
    pub fn new(probs: Vec<Vec<f64>>, gold: Vec<u32>) -> Result<Self, LossError> {
        let bad = |m: String| Err(LossError::InvalidDistribution(m));
        if probs.len() != gold.len() {
            return bad(format!(
                "{} probability vectors for {} gold tokens",
                probs.len(),
                gold.len()
            ));
        }
        if probs.is_empty() {
            return bad("no positions".into());
        }
        for (i, (p, &g)) in probs.iter().zip(&gold).enumerate() {
            if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return bad(format!("position {i} has a negative or non-finite entry"));
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return bad(format!("position {i} sums to {sum}"));
            }
            if g as usize >= p.len() {
                return bad(format!("gold id {g} outside vector of length {}", p.len()));
            }
        }
        Ok(TokenDistribution { probs, gold })
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn gold(&self) -> &[u32] {
        &self.gold
    }

    pub fn len(&self) -> usize {
        self.gold.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gold.is_empty()
    }
}

/// Mean over positions of `-ln p[gold]`.
pub fn token_cross_entropy(td: &TokenDistribution) -> Result<f64, LossError> {
    let mut total = 0.0;
    for (position, (p, &g)) in td.probs.iter().zip(&td.gold).enumerate() {
        let pg = p[g as usize];
        if pg == 0.0 {
            return Err(LossError::ZeroGoldProbability {
                position,
                loss: f64::INFINITY,
            });
        }
        total -= pg.ln();
    }
    Ok(total / td.len() as f64)
}

/// Like [`token_cross_entropy`] but maps a zero gold probability to +inf.
pub fn token_cross_entropy_or_inf(td: &TokenDistribution) -> f64 {
    match token_cross_entropy(td) {
        Ok(l) => l,
        Err(LossError::ZeroGoldProbability { loss, .. }) => loss,
        Err(LossError::InvalidDistribution(_)) => unreachable!("validated at construction"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_cases() {
        let one_hot = TokenDistribution::new(vec![vec![0.0, 1.0, 0.0]], vec![1]).unwrap();
        assert_eq!(token_cross_entropy(&one_hot).unwrap(), 0.0);

        let uniform = TokenDistribution::new(vec![vec![0.25; 4]], vec![2]).unwrap();
        assert!((token_cross_entropy(&uniform).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!((token_cross_entropy(&uniform).unwrap() - 1.386294).abs() < 1e-6);

        let half = TokenDistribution::new(vec![vec![0.5, 0.25, 0.25]], vec![0]).unwrap();
        assert!((token_cross_entropy(&half).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn averages_over_positions() {
        let td = TokenDistribution::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]], vec![0, 1]).unwrap();
        assert!((token_cross_entropy(&td).unwrap() - 2f64.ln() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_gold_gives_infinite_sentinel() {
        let td = TokenDistribution::new(vec![vec![1.0, 0.0]], vec![1]).unwrap();
        assert_eq!(
            token_cross_entropy(&td),
            Err(LossError::ZeroGoldProbability {
                position: 0,
                loss: f64::INFINITY
            })
        );
        assert_eq!(token_cross_entropy_or_inf(&td), f64::INFINITY);
    }

    #[test]
    fn invalid_inputs() {
        assert!(TokenDistribution::new(vec![vec![0.5, 0.4]], vec![0]).is_err());
        assert!(TokenDistribution::new(vec![vec![1.5, -0.5]], vec![0]).is_err());
        assert!(TokenDistribution::new(vec![vec![1.0]], vec![1]).is_err());
        assert!(TokenDistribution::new(vec![vec![1.0]], vec![]).is_err());
        assert!(TokenDistribution::new(vec![], vec![]).is_err());
    }
}
