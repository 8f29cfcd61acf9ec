use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Window geometry for the autoencoder mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub width: usize,
    pub stride: usize,
    /// Adds one final window flush with the end of the series when the
    /// regular stride would leave trailing samples uncovered.
    pub cover_tail: bool,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            width: 32,
            stride: 8,
            cover_tail: true,
        }
    }
}

impl WindowConfig {
    pub fn starts(&self, len: usize) -> Result<Vec<usize>> {
        window_starts(len, self.width, self.stride, self.cover_tail)
    }

    pub fn apply<T: Scalar>(&self, series: &[T]) -> Result<(Array2<T>, Vec<usize>)> {
        let starts = self.starts(series.len())?;
        Ok((gather(series, self.width, &starts), starts))
    }
}

pub fn window_starts(len: usize, width: usize, stride: usize, cover_tail: bool) -> Result<Vec<usize>> {
    if width == 0 || stride == 0 {
        return Err(Error::InvalidArgument(
            "window width and stride must be at least 1".into(),
        ));
    }
    if width > len {
        return Err(Error::InvalidArgument(format!(
            "window width {width} exceeds series length {len}"
        )));
    }
    let mut starts: Vec<usize> = (0..=len - width).step_by(stride).collect();
    if cover_tail && *starts.last().unwrap() + width < len {
        starts.push(len - width);
    }
    Ok(starts)
}

fn gather<T: Scalar>(series: &[T], width: usize, starts: &[usize]) -> Array2<T> {
    Array2::from_shape_fn((starts.len(), width), |(i, j)| series[starts[i] + j])
}

/// Consecutive windows of `width` samples taken every `stride` samples,
/// one per row.
pub fn window<T: Scalar>(series: &[T], width: usize, stride: usize) -> Result<Array2<T>> {
    let starts = window_starts(series.len(), width, stride, false)?;
    Ok(gather(series, width, &starts))
}

/// Averages overlapping windows back onto a sequence of length `len`.
/// Every sample must be covered by at least one window.
pub fn dewindow<T: Scalar>(windows: ArrayView2<T>, starts: &[usize], len: usize) -> Result<Vec<T>> {
    if windows.nrows() != starts.len() {
        return Err(Error::DimensionMismatch {
            expected: starts.len(),
            got: windows.nrows(),
            context: "window rows vs starts",
        });
    }
    let width = windows.ncols();
    let mut sum = vec![T::zero(); len];
    let mut count = vec![0usize; len];
    for (row, &start) in windows.rows().into_iter().zip(starts) {
        if start + width > len {
            return Err(Error::InvalidArgument(format!(
                "window at {start} runs past length {len}"
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            sum[start + j] += v;
            count[start + j] += 1;
        }
    }
    if let Some(t) = count.iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!("sample {t} is not covered by any window")));
    }
    Ok(sum
        .into_iter()
        .zip(count)
        .map(|(s, c)| s / T::of(c as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counting() {
        let x = [0.0f64, 1.0, 2.0, 3.0, 4.0];
        let w = window(&x, 3, 1).unwrap();
        assert_eq!(w.nrows(), 3);
        assert_eq!(w.row(0).to_vec(), vec![0.0, 1.0, 2.0]);
        assert_eq!(w.row(2).to_vec(), vec![2.0, 3.0, 4.0]);
        assert!(window(&x, 6, 1).is_err());
        assert!(window(&x, 2, 0).is_err());
    }

    #[test]
    fn tiling_when_stride_equals_width() {
        let x: Vec<f64> = (0..12).map(f64::from).collect();
        let w = window(&x, 4, 4).unwrap();
        assert_eq!(w.nrows(), 3);
        assert_eq!(w.iter().copied().collect::<Vec<_>>(), x);
    }

    #[test]
    fn tail_cover() {
        assert_eq!(window_starts(10, 4, 4, false).unwrap(), vec![0, 4]);
        assert_eq!(window_starts(10, 4, 4, true).unwrap(), vec![0, 4, 6]);
        assert_eq!(window_starts(12, 4, 4, true).unwrap(), vec![0, 4, 8]);
    }

    #[test]
    fn uncovered_samples_are_rejected() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let w = window(&x, 4, 4).unwrap();
        assert!(dewindow(w.view(), &[0, 4], 10).is_err());
    }

    proptest! {
        #[test]
        fn dewindow_inverts_window(
            x in proptest::collection::vec(-100.0f64..100.0, 8..80),
            width in 1usize..8,
            stride in 1usize..8,
        ) {
            let cfg = WindowConfig { width, stride, cover_tail: true };
            prop_assume!(stride <= width);
            let (w, starts) = cfg.apply(&x).unwrap();
            let back = dewindow(w.view(), &starts, x.len()).unwrap();
            for (a, b) in back.iter().zip(&x) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}
