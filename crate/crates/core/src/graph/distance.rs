use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};

/// `sqrt(2 (1 - lambda))`, mapping tail dependence in [0, 1] to [0, sqrt 2].
pub fn mantegna_distance(lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::domain("lambda", format!("{lambda} not in [0, 1]")));
    }
    Ok((2.0 * (1.0 - lambda)).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    tickers: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    /// Symmetric, zero diagonal, entries in `[0, sqrt 2]`.
    pub fn new(tickers: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let k = tickers.len();
        if values.len() != k || values.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidData(format!("distance matrix must be {k}x{k}")));
        }
        for i in 0..k {
            if values[i][i] != 0.0 {
                return Err(Error::InvalidData(format!("non-zero diagonal at {i}")));
            }
            for j in 0..k {
                let d = values[i][j];
                if d.is_nan() || d != values[j][i] {
                    return Err(Error::InvalidData(format!("asymmetric entry ({i}, {j})")));
                }
                if d.is_finite() && !(0.0..=SQRT_2 + 1e-12).contains(&d) {
                    return Err(Error::InvalidData(format!("distance {d} outside [0, sqrt 2]")));
                }
            }
        }
        Ok(DistanceMatrix { tickers, values })
    }

    /// Distances from a symmetric tail-dependence matrix.
    pub fn from_tail_dependence(tickers: Vec<String>, lambda: &[Vec<f64>]) -> Result<Self> {
        let k = tickers.len();
        let mut values = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    values[i][j] = mantegna_distance(lambda[i][j])?;
                }
            }
        }
        Self::new(tickers, values)
    }

    pub fn k(&self) -> usize {
        self.tickers.len()
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        assert_eq!(mantegna_distance(1.0).unwrap(), 0.0);
        assert!((mantegna_distance(0.0).unwrap() - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!((mantegna_distance(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!(mantegna_distance(1.01).is_err());
        assert!(mantegna_distance(-0.1).is_err());
    }

    #[test]
    fn strictly_decreasing() {
        let mut prev = f64::INFINITY;
        for i in 0..=100 {
            let d = mantegna_distance(i as f64 / 100.0).unwrap();
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn matrix_validation() {
        let t = vec!["a".to_string(), "b".to_string()];
        assert!(DistanceMatrix::new(t.clone(), vec![vec![0.0, 0.5], vec![0.4, 0.0]]).is_err());
        assert!(DistanceMatrix::new(t.clone(), vec![vec![0.1, 0.5], vec![0.5, 0.0]]).is_err());
        assert!(DistanceMatrix::new(t.clone(), vec![vec![0.0, 2.0], vec![2.0, 0.0]]).is_err());
        assert!(DistanceMatrix::new(t, vec![vec![0.0, 0.5], vec![0.5, 0.0]]).is_ok());
    }
}
