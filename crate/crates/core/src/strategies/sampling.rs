use rand::Rng;

use crate::error::SelectionError;
use crate::netmodel::RelayId;

/// Cumulative-weight table for repeated proportional draws.
#[derive(Debug, Clone)]
pub struct WeightedTable {
    ids: Vec<RelayId>,
    cumulative: Vec<f64>,
}

impl WeightedTable {
    pub fn new(ids: Vec<RelayId>, weights: &[f64]) -> Result<Self, SelectionError> {
        if ids.len() != weights.len() {
            return Err(SelectionError::LengthMismatch {
                candidates: ids.len(),
                weights: weights.len(),
            });
        }
        if ids.is_empty() {
            return Err(SelectionError::NoCandidates);
        }
        let mut total = 0.0;
        let mut cumulative = Vec::with_capacity(weights.len());
        for (index, &weight) in weights.iter().enumerate() {
            if !(weight.is_finite() && weight > 0.0) {
                return Err(SelectionError::InvalidWeight { index, weight });
            }
            total += weight;
            cumulative.push(total);
        }
        Ok(WeightedTable { ids, cumulative })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[RelayId] {
        &self.ids
    }

    pub fn total(&self) -> f64 {
        *self.cumulative.last().expect("table is nonempty")
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> RelayId {
        let u = rng.random::<f64>() * self.total();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.ids[idx.min(self.ids.len() - 1)]
    }
}

/// Draws one candidate with probability `weights[i] / sum(weights)`.
pub fn weighted_sample<R: Rng + ?Sized>(
    candidates: &[RelayId],
    weights: &[f64],
    rng: &mut R,
) -> Result<RelayId, SelectionError> {
    Ok(WeightedTable::new(candidates.to_vec(), weights)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frequencies(candidates: &[RelayId], weights: &[f64], draws: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let table = WeightedTable::new(candidates.to_vec(), weights).unwrap();
        let mut counts = vec![0usize; candidates.len()];
        for _ in 0..draws {
            let id = table.sample(&mut rng);
            counts[candidates.iter().position(|&c| c == id).unwrap()] += 1;
        }
        counts.iter().map(|&c| c as f64 / draws as f64).collect()
    }

    #[test]
    fn proportional_frequencies() {
        let f = frequencies(&[4, 9, 2], &[100.0, 300.0, 600.0], 100_000);
        for (got, want) in f.iter().zip([0.1, 0.3, 0.6]) {
            assert!((got - want).abs() < 0.01, "{got} vs {want}");
        }
    }

    #[test]
    fn equal_weights_are_uniform() {
        let ids: Vec<RelayId> = (0..7).collect();
        let f = frequencies(&ids, &[2.5; 7], 100_000);
        for got in f {
            assert!((got - 1.0 / 7.0).abs() < 0.01, "{got}");
        }
    }

    #[test]
    fn single_candidate_always_wins() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(weighted_sample(&[17], &[0.001], &mut rng).unwrap(), 17);
        }
    }

    #[test]
    fn error_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            weighted_sample(&[], &[], &mut rng),
            Err(SelectionError::NoCandidates)
        );
        assert!(matches!(
            weighted_sample(&[1, 2], &[1.0], &mut rng),
            Err(SelectionError::LengthMismatch { .. })
        ));
        assert!(matches!(
            weighted_sample(&[1, 2], &[1.0, 0.0], &mut rng),
            Err(SelectionError::InvalidWeight { index: 1, .. })
        ));
    }
}
