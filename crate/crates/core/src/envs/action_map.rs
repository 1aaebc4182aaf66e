use serde::{Deserialize, Serialize};

use crate::stochmax::ActionId;
use crate::{Error, Result};

/// Grid of `i` evenly spaced values per dimension over `d` dimensions,
/// indexed row-major (dimension 0 most significant), `n = i^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedActionMap {
    granularity: usize,
    bounds: Vec<(f64, f64)>,
    n: usize,
}

impl DiscretizedActionMap {
    pub fn new(granularity: usize, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if granularity < 2 {
            return Err(Error::InvalidGranularity(granularity));
        }
        if bounds.is_empty() {
            return Err(Error::InvalidSpec(
                "action map needs at least one dimension".into(),
            ));
        }
        if let Some(&(lo, hi)) = bounds
            .iter()
            .find(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite())
        {
            return Err(Error::InvalidSpec(format!(
                "bad action bounds [{lo}, {hi}]"
            )));
        }
        let d = u32::try_from(bounds.len())
            .map_err(|_| Error::InvalidSpec("too many dimensions".into()))?;
        let n = granularity
            .checked_pow(d)
            .ok_or_else(|| Error::InvalidSpec(format!("{granularity}^{d} actions overflow")))?;
        Ok(Self {
            granularity,
            bounds,
            n,
        })
    }

    /// Same bounds on each of `dims` dimensions.
    pub fn uniform(dims: usize, granularity: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(granularity, vec![(lower, upper); dims])
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn granularity(&self) -> usize {
        self.granularity
    }

    pub fn n_actions(&self) -> usize {
        self.n
    }

    /// Per-dimension grid digits of `index`.
    pub fn digits(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.n {
            return Err(Error::IndexOutOfRange {
                index,
                size: self.n,
            });
        }
        let mut digits = vec![0; self.dims()];
        let mut rest = index;
        for slot in digits.iter_mut().rev() {
            *slot = rest % self.granularity;
            rest /= self.granularity;
        }
        Ok(digits)
    }

    /// Physical action values of `action`.
    pub fn decode(&self, action: ActionId) -> Result<Vec<f64>> {
        let step = (self.granularity - 1) as f64;
        Ok(self
            .digits(action.index())?
            .into_iter()
            .zip(&self.bounds)
            .map(|(digit, &(lo, hi))| lo + digit as f64 * (hi - lo) / step)
            .collect())
    }

    /// Index of the grid point nearest to `values`.
    pub fn encode(&self, values: &[f64]) -> Result<ActionId> {
        if values.len() != self.dims() {
            return Err(Error::ShapeMismatch {
                expected: self.dims(),
                got: values.len(),
            });
        }
        let step = (self.granularity - 1) as f64;
        let mut index = 0;
        for (&v, &(lo, hi)) in values.iter().zip(&self.bounds) {
            let digit = ((v - lo) / (hi - lo) * step).round().clamp(0.0, step) as usize;
            index = index * self.granularity + digit;
        }
        Ok(ActionId(index))
    }

    /// Grid position of each dimension rescaled to `[-1, 1]`.
    pub fn scaled(&self, action: ActionId) -> Result<Vec<f64>> {
        let step = (self.granularity - 1) as f64;
        Ok(self
            .digits(action.index())?
            .into_iter()
            .map(|d| -1.0 + 2.0 * d as f64 / step)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_point_line() {
        let m = DiscretizedActionMap::uniform(1, 3, -1.0, 1.0).unwrap();
        let v: Vec<f64> = (0..3).map(|i| m.decode(ActionId(i)).unwrap()[0]).collect();
        assert_eq!(v, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn sizes() {
        assert_eq!(
            DiscretizedActionMap::uniform(2, 4, -1.0, 1.0)
                .unwrap()
                .n_actions(),
            16
        );
        assert_eq!(
            DiscretizedActionMap::uniform(6, 4, -1.0, 1.0)
                .unwrap()
                .n_actions(),
            4096
        );
        assert_eq!(
            DiscretizedActionMap::uniform(1, 512, -3.0, 3.0)
                .unwrap()
                .n_actions(),
            512
        );
    }

    #[test]
    fn errors() {
        assert_eq!(
            DiscretizedActionMap::uniform(1, 1, -1.0, 1.0),
            Err(Error::InvalidGranularity(1))
        );
        let m = DiscretizedActionMap::uniform(2, 4, -1.0, 1.0).unwrap();
        assert_eq!(
            m.decode(ActionId(16)),
            Err(Error::IndexOutOfRange {
                index: 16,
                size: 16
            })
        );
        assert!(DiscretizedActionMap::uniform(1, 4, 1.0, -1.0).is_err());
    }

    #[test]
    fn row_major_order() {
        let m = DiscretizedActionMap::new(3, vec![(0.0, 2.0), (10.0, 12.0)]).unwrap();
        assert_eq!(m.decode(ActionId(1)).unwrap(), vec![0.0, 11.0]);
        assert_eq!(m.decode(ActionId(3)).unwrap(), vec![1.0, 10.0]);
    }

    #[test]
    fn exhaustive_roundtrip() {
        for (d, i) in [(1, 512), (2, 17), (3, 10), (6, 4), (5, 9)] {
            let m = DiscretizedActionMap::uniform(d, i, -3.0, 3.0).unwrap();
            for idx in 0..m.n_actions() {
                let a = ActionId(idx);
                assert_eq!(m.encode(&m.decode(a).unwrap()).unwrap(), a);
            }
        }
    }

    proptest! {
        #[test]
        fn sampled_roundtrip_large(d in 1usize..8, i in 2usize..12, idx_frac in 0.0f64..1.0) {
            let m = DiscretizedActionMap::uniform(d, i, -2.5, 4.0).unwrap();
            let a = ActionId(((m.n_actions() as f64) * idx_frac) as usize % m.n_actions());
            let values = m.decode(a).unwrap();
            prop_assert!(values.iter().all(|v| (-2.5..=4.0).contains(v)));
            prop_assert_eq!(m.encode(&values).unwrap(), a);
            prop_assert!(m.scaled(a).unwrap().iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }
}
