//! Parameter-free building blocks and their adjoints.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

#[inline]
pub fn leaky_relu_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

/// Half-open channel ranges of the contiguous pooling groups.
///
/// Group `g` covers `[floor(g * c_in / c_out), floor((g + 1) * c_in / c_out))`.
pub fn squeeze_groups(c_in: usize, c_out: usize) -> Vec<(usize, usize)> {
    (0..c_out)
        .map(|g| (g * c_in / c_out, (g + 1) * c_in / c_out))
        .collect()
}

fn check_widths(c_in: usize, c_out: usize) -> Result<()> {
    if c_out == 0 || c_out > c_in {
        return Err(Error::Schedule(format!(
            "cannot squeeze {c_in} channels into {c_out}"
        )));
    }
    Ok(())
}

/// Average-pools a feature vector into `c_out` contiguous groups.
pub fn channel_squeeze(h: &[f64], c_out: usize) -> Result<Vec<f64>> {
    check_widths(h.len(), c_out)?;
    Ok(squeeze_groups(h.len(), c_out)
        .into_iter()
        .map(|(s, e)| h[s..e].iter().sum::<f64>() / (e - s) as f64)
        .collect())
}

/// Row-wise [`channel_squeeze`].
pub fn squeeze_rows(x: ArrayView2<'_, f64>, c_out: usize) -> Result<Array2<f64>> {
    let c_in = x.ncols();
    check_widths(c_in, c_out)?;
    if c_out == c_in {
        return Ok(x.to_owned());
    }
    let groups = squeeze_groups(c_in, c_out);
    let mut out = Array2::zeros((x.nrows(), c_out));
    for (row, mut dst) in x.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
        for (g, &(s, e)) in groups.iter().enumerate() {
            let mut acc = 0.0;
            for c in s..e {
                acc += row[c];
            }
            dst[g] = acc / (e - s) as f64;
        }
    }
    Ok(out)
}

/// Adjoint of [`squeeze_rows`]: spreads each group gradient evenly over its members.
pub fn squeeze_rows_backward(dy: ArrayView2<'_, f64>, c_in: usize) -> Array2<f64> {
    let c_out = dy.ncols();
    if c_out == c_in {
        return dy.to_owned();
    }
    let groups = squeeze_groups(c_in, c_out);
    let mut dx = Array2::zeros((dy.nrows(), c_in));
    for (row, mut dst) in dy.axis_iter(Axis(0)).zip(dx.axis_iter_mut(Axis(0))) {
        for (g, &(s, e)) in groups.iter().enumerate() {
            let share = row[g] / (e - s) as f64;
            for c in s..e {
                dst[c] = share;
            }
        }
    }
    dx
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn squeeze_examples() {
        assert_eq!(channel_squeeze(&[1.0, 3.0, 5.0, 7.0], 2).unwrap(), vec![2.0, 6.0]);
        assert_eq!(channel_squeeze(&[0.0, 2.0, 4.0, 6.0, 8.0], 2).unwrap(), vec![1.0, 6.0]);
        let v = [0.5, -1.0, 2.0];
        assert_eq!(channel_squeeze(&v, 3).unwrap(), v.to_vec());
        assert!(matches!(channel_squeeze(&v, 4), Err(Error::Schedule(_))));
        assert!(matches!(channel_squeeze(&v, 0), Err(Error::Schedule(_))));
    }

    #[test]
    fn squeeze_adjoint_spreads_by_group_size() {
        let dy = array![[1.0, 3.0]];
        let dx = squeeze_rows_backward(dy.view(), 5);
        assert_eq!(dx, array![[0.5, 0.5, 1.0, 1.0, 1.0]]);
    }

    #[test]
    fn leaky_relu_slope() {
        assert_eq!(leaky_relu(-1.0, 0.2), -0.2);
        assert_eq!(leaky_relu(3.0, 0.2), 3.0);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
    }

    proptest! {
        #[test]
        fn squeeze_preserves_mean_when_divisible(
            groups in 1usize..8, per in 1usize..6, seed in proptest::collection::vec(-5.0f64..5.0, 48)
        ) {
            let c_in = groups * per;
            let h = &seed[..c_in];
            let out = channel_squeeze(h, groups).unwrap();
            let m_in = h.iter().sum::<f64>() / c_in as f64;
            let m_out = out.iter().sum::<f64>() / groups as f64;
            prop_assert!((m_in - m_out).abs() < 1e-12);
        }

        #[test]
        fn squeeze_backward_is_the_adjoint(
            c_in in 1usize..20, frac in 0.0f64..1.0,
            x in proptest::collection::vec(-3.0f64..3.0, 20),
            y in proptest::collection::vec(-3.0f64..3.0, 20),
        ) {
            let c_out = ((frac * c_in as f64) as usize).clamp(1, c_in);
            let xs = Array2::from_shape_vec((1, c_in), x[..c_in].to_vec()).unwrap();
            let ys = Array2::from_shape_vec((1, c_out), y[..c_out].to_vec()).unwrap();
            let lhs = (&squeeze_rows(xs.view(), c_out).unwrap() * &ys).sum();
            let rhs = (&xs * &squeeze_rows_backward(ys.view(), c_in)).sum();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn softmax_sums_to_one(z in proptest::collection::vec(-50.0f64..50.0, 1..6)) {
            let p = softmax(&z);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
