//! Affine quantization of real feature vectors onto register rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::DiscreteFunction;

/// Per-feature `[lo, hi]` bounds of the linear map onto `[0, rows - 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Quantizer {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Domain(format!(
                "quantizer bounds differ in length: {} lo, {} hi",
                lo.len(),
                hi.len()
            )));
        }
        if let Some(i) = lo
            .iter()
            .zip(&hi)
            .position(|(l, h)| l.partial_cmp(h).is_none_or(|o| o.is_gt()))
        {
            return Err(Error::Domain(format!(
                "quantizer bound {i}: lo {} exceeds hi {}",
                lo[i], hi[i]
            )));
        }
        Ok(Quantizer { lo, hi })
    }

    /// Column-wise minimum and maximum of `rows`.
    pub fn fit<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut rows = rows.into_iter();
        let first = rows
            .next()
            .ok_or_else(|| Error::Domain("cannot fit a quantizer on zero rows".into()))?;
        let mut lo = first.to_vec();
        let mut hi = first.to_vec();
        for row in rows {
            if row.len() != lo.len() {
                return Err(Error::LengthMismatch {
                    expected: lo.len(),
                    got: row.len(),
                });
            }
            for (i, &x) in row.iter().enumerate() {
                lo[i] = lo[i].min(x);
                hi[i] = hi[i].max(x);
            }
        }
        Ok(Quantizer { lo, hi })
    }

    pub fn n(&self) -> usize {
        self.lo.len()
    }

    /// Rounds the affine image of each feature half-up and clamps it into
    /// `[0, rows - 1]`. Constant features map to 0.
    pub fn quantize(&self, x: &[f64], rows: usize) -> Result<DiscreteFunction> {
        self.check_len(x.len())?;
        check_rows(rows)?;
        let top = (rows - 1) as f64;
        let values = x
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&x, (&lo, &hi))| {
                if hi == lo {
                    return 0;
                }
                let t = (x - lo) / (hi - lo) * top;
                (t + 0.5).floor().clamp(0.0, top) as usize
            })
            .collect();
        Ok(DiscreteFunction::total(values))
    }

    /// Maps grid values back onto feature space. For a single-row grid every
    /// feature maps to the midpoint of its bounds.
    pub fn dequantize(&self, f: &DiscreteFunction, rows: usize) -> Result<Vec<f64>> {
        self.check_len(f.len())?;
        check_rows(rows)?;
        let values = f.to_total()?;
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, &v)| v >= rows) {
            return Err(Error::ValueOutOfRange {
                attribute: i,
                value: v,
                rows,
            });
        }
        Ok(values
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&lo, &hi))| {
                if rows == 1 {
                    (lo + hi) / 2.0
                } else {
                    lo + v as f64 / (rows - 1) as f64 * (hi - lo)
                }
            })
            .collect())
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                got,
            });
        }
        Ok(())
    }
}

fn check_rows(rows: usize) -> Result<()> {
    if rows == 0 {
        return Err(Error::InvalidShape { n: 1, rows });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(n: usize) -> Quantizer {
        Quantizer::new(vec![0.0; n], vec![1.0; n]).unwrap()
    }

    #[test]
    fn fit_single_row() {
        let q = Quantizer::fit([[1.5, -2.0].as_slice()]).unwrap();
        assert_eq!(q.lo, vec![1.5, -2.0]);
        assert_eq!(q.hi, vec![1.5, -2.0]);
    }

    #[test]
    fn fit_two_rows() {
        let q = Quantizer::fit([[0.0, 10.0].as_slice(), [4.0, 2.0].as_slice()]).unwrap();
        assert_eq!(q.lo, vec![0.0, 2.0]);
        assert_eq!(q.hi, vec![4.0, 10.0]);
    }

    #[test]
    fn fit_empty_errors() {
        let rows: Vec<&[f64]> = Vec::new();
        assert!(matches!(Quantizer::fit(rows), Err(Error::Domain(_))));
    }

    #[test]
    fn new_rejects_inverted_bounds() {
        assert!(Quantizer::new(vec![1.0], vec![0.0]).is_err());
        assert!(Quantizer::new(vec![0.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn endpoints_and_half_up() {
        let q = unit(3);
        let f = q.quantize(&[0.0, 1.0, 0.5], 64).unwrap();
        assert_eq!(f.to_total().unwrap(), vec![0, 63, 32]);
    }

    #[test]
    fn out_of_range_values_clamp() {
        let q = unit(2);
        let f = q.quantize(&[-3.0, 7.0], 16).unwrap();
        assert_eq!(f.to_total().unwrap(), vec![0, 15]);
    }

    #[test]
    fn single_row_grid_maps_to_zero() {
        let q = Quantizer::new(vec![-1.0, 0.0], vec![1.0, 5.0]).unwrap();
        let f = q.quantize(&[0.7, 4.9], 1).unwrap();
        assert_eq!(f.to_total().unwrap(), vec![0, 0]);
        assert_eq!(q.dequantize(&f, 1).unwrap(), vec![0.0, 2.5]);
    }

    #[test]
    fn constant_feature_maps_to_zero() {
        let q = Quantizer::new(vec![2.0], vec![2.0]).unwrap();
        assert_eq!(q.quantize(&[9.0], 64).unwrap().to_total().unwrap(), vec![0]);
        assert_eq!(
            q.dequantize(&DiscreteFunction::total(vec![0]), 64).unwrap(),
            vec![2.0]
        );
    }

    #[test]
    fn dequantize_endpoints_and_partial_error() {
        let q = Quantizer::new(vec![-2.0], vec![6.0]).unwrap();
        assert_eq!(q.dequantize(&vec![0].into(), 9).unwrap(), vec![-2.0]);
        assert_eq!(q.dequantize(&vec![8].into(), 9).unwrap(), vec![6.0]);
        let partial = DiscreteFunction::partial(vec![None]);
        assert!(matches!(
            q.dequantize(&partial, 9),
            Err(Error::PartialFunction { attribute: 0 })
        ));
    }

    fn bounds_and_point() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<f64>)> {
        prop::collection::vec((-100.0..100.0f64, 0.001..50.0f64, 0.0..=1.0f64), 1..16).prop_map(
            |v| {
                let bounds = v.iter().map(|&(lo, w, _)| (lo, lo + w)).collect();
                let x = v.iter().map(|&(lo, w, t)| lo + t * w).collect();
                (bounds, x)
            },
        )
    }

    proptest! {
        #[test]
        fn grid_round_trip(m in 0u32..10, seed in prop::collection::vec(0usize..1024, 1..16)) {
            let rows = 1usize << m;
            let n = seed.len();
            let q = Quantizer::new(
                (0..n).map(|i| i as f64 - 3.0).collect(),
                (0..n).map(|i| 2.0 * i as f64 + 0.25).collect(),
            ).unwrap();
            let f = DiscreteFunction::total(seed.iter().map(|v| v % rows).collect());
            let x = q.dequantize(&f, rows).unwrap();
            prop_assert_eq!(q.quantize(&x, rows).unwrap(), f);
        }

        #[test]
        fn error_at_most_half_bin((bounds, x) in bounds_and_point(), m in 1u32..10) {
            let rows = 1usize << m;
            let (lo, hi): (Vec<_>, Vec<_>) = bounds.into_iter().unzip();
            let q = Quantizer::new(lo.clone(), hi.clone()).unwrap();
            let back = q.dequantize(&q.quantize(&x, rows).unwrap(), rows).unwrap();
            for i in 0..x.len() {
                let half_bin = (hi[i] - lo[i]) / (2.0 * (rows - 1) as f64);
                prop_assert!((back[i] - x[i]).abs() <= half_bin * (1.0 + 1e-9));
            }
        }

        #[test]
        fn monotone(a in -5.0..5.0f64, b in -5.0..5.0f64, m in 0u32..10) {
            let rows = 1usize << m;
            let q = Quantizer::new(vec![-2.0], vec![3.0]).unwrap();
            let (x, y) = if a <= b { (a, b) } else { (b, a) };
            let vx = q.quantize(&[x], rows).unwrap().get(0).unwrap();
            let vy = q.quantize(&[y], rows).unwrap().get(0).unwrap();
            prop_assert!(vx <= vy);
        }
    }
}
