//! Event-segmented time series: the data model, normalization, event-based
//! splitting, windowing and seeded synthetic generators.

mod csv_io;
mod generate;
mod normalize;
mod window;

pub use csv_io::{load_series_csv, read_series_csv, save_series_csv, write_series_csv, CSV_HEADER};
pub use generate::{gen_engine_like, gen_engine_like_with_law, gen_sinc, EngineLaw, GenConfig};
pub use normalize::{ChannelNorm, NormParams};
pub use window::{dewindow, window, window_starts, WindowConfig};

use std::ops::Range;

use crate::{Error, Result, Scalar};

/// Paired input/output samples cut into consecutive events.
///
/// `event_ends` holds the index of the last sample of every event; it is
/// strictly increasing and its final entry is `len - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct EventSeries<T: Scalar> {
    pub name: String,
    input: Vec<T>,
    output: Vec<T>,
    event_ends: Vec<usize>,
}

impl<T: Scalar> EventSeries<T> {
    pub fn new(
        name: impl Into<String>,
        input: Vec<T>,
        output: Vec<T>,
        event_ends: Vec<usize>,
    ) -> Result<Self> {
        if input.len() != output.len() {
            return Err(Error::InvalidSeries(format!(
                "input has {} samples but output has {}",
                input.len(),
                output.len()
            )));
        }
        if input.is_empty() {
            return Err(Error::InvalidSeries("series is empty".into()));
        }
        if event_ends.is_empty() {
            return Err(Error::InvalidSeries("no event boundaries".into()));
        }
        if event_ends.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSeries(
                "event ends must be strictly increasing".into(),
            ));
        }
        if *event_ends.last().unwrap() != input.len() - 1 {
            return Err(Error::InvalidSeries(format!(
                "last event must end at sample {}, ends at {}",
                input.len() - 1,
                event_ends.last().unwrap()
            )));
        }
        Ok(Self {
            name: name.into(),
            input,
            output,
            event_ends,
        })
    }

    pub fn len(&self) -> usize {
        self.input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }

    pub fn input(&self) -> &[T] {
        &self.input
    }

    pub fn output(&self) -> &[T] {
        &self.output
    }

    pub fn event_ends(&self) -> &[usize] {
        &self.event_ends
    }

    pub fn n_events(&self) -> usize {
        self.event_ends.len()
    }

    pub fn event_range(&self, event: usize) -> Range<usize> {
        let start = if event == 0 {
            0
        } else {
            self.event_ends[event - 1] + 1
        };
        start..self.event_ends[event] + 1
    }

    pub fn event_ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.n_events()).map(|e| self.event_range(e))
    }

    /// Number of samples covered by the first `n_events` events.
    pub fn samples_in_first(&self, n_events: usize) -> usize {
        if n_events == 0 {
            0
        } else {
            self.event_ends[n_events - 1] + 1
        }
    }

    /// Event index of every sample.
    pub fn event_labels(&self) -> Vec<usize> {
        let mut labels = Vec::with_capacity(self.len());
        for (e, r) in self.event_ranges().enumerate() {
            labels.extend(std::iter::repeat_n(e, r.len()));
        }
        labels
    }

    /// Applies `f_in` to the input channel and `f_out` to the output channel.
    pub fn map_channels(&self, f_in: impl Fn(T) -> T, f_out: impl Fn(T) -> T) -> Self {
        Self {
            name: self.name.clone(),
            input: self.input.iter().map(|&v| f_in(v)).collect(),
            output: self.output.iter().map(|&v| f_out(v)).collect(),
            event_ends: self.event_ends.clone(),
        }
    }

    /// Appends `other` after `self`, shifting its event boundaries.
    pub fn concat(&self, other: &Self) -> Self {
        let offset = self.len();
        Self {
            name: self.name.clone(),
            input: [self.input.as_slice(), other.input.as_slice()].concat(),
            output: [self.output.as_slice(), other.output.as_slice()].concat(),
            event_ends: self
                .event_ends
                .iter()
                .copied()
                .chain(other.event_ends.iter().map(|e| e + offset))
                .collect(),
        }
    }
}

/// Splits into the first `n_train_events` events and the remainder.
pub fn split_by_events<T: Scalar>(
    series: &EventSeries<T>,
    n_train_events: usize,
) -> Result<(EventSeries<T>, EventSeries<T>)> {
    if n_train_events == 0 || n_train_events >= series.n_events() {
        return Err(Error::InvalidArgument(format!(
            "n_train_events must lie in 1..{}, got {n_train_events}",
            series.n_events()
        )));
    }
    let cut = series.samples_in_first(n_train_events);
    let train = EventSeries {
        name: format!("{}[train]", series.name),
        input: series.input[..cut].to_vec(),
        output: series.output[..cut].to_vec(),
        event_ends: series.event_ends[..n_train_events].to_vec(),
    };
    let test = EventSeries {
        name: format!("{}[test]", series.name),
        input: series.input[cut..].to_vec(),
        output: series.output[cut..].to_vec(),
        event_ends: series.event_ends[n_train_events..]
            .iter()
            .map(|e| e - cut)
            .collect(),
    };
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(lengths: &[usize]) -> EventSeries<f64> {
        let n: usize = lengths.iter().sum();
        let mut ends = Vec::new();
        let mut acc = 0;
        for &l in lengths {
            acc += l;
            ends.push(acc - 1);
        }
        let input = (0..n).map(|i| i as f64).collect();
        let output = (0..n).map(|i| -(i as f64)).collect();
        EventSeries::new("toy", input, output, ends).unwrap()
    }

    #[test]
    fn validation() {
        assert!(EventSeries::new("a", vec![1.0], vec![1.0, 2.0], vec![0]).is_err());
        assert!(EventSeries::<f64>::new("a", vec![], vec![], vec![]).is_err());
        assert!(EventSeries::new("a", vec![1.0, 2.0], vec![1.0, 2.0], vec![0]).is_err());
        assert!(EventSeries::new("a", vec![1.0; 3], vec![1.0; 3], vec![1, 1, 2]).is_err());
        assert!(EventSeries::new("a", vec![1.0; 3], vec![1.0; 3], vec![]).is_err());
    }

    #[test]
    fn ranges_and_labels() {
        let s = toy(&[2, 3, 1]);
        assert_eq!(s.event_range(0), 0..2);
        assert_eq!(s.event_range(1), 2..5);
        assert_eq!(s.event_range(2), 5..6);
        assert_eq!(s.event_labels(), vec![0, 0, 1, 1, 1, 2]);
    }

    #[test]
    fn contiguous_event_split() {
        let s = toy(&[200; 32]);
        let (train, test) = split_by_events(&s, 15).unwrap();
        assert_eq!(train.n_events(), 15);
        assert_eq!(test.n_events(), 17);
        assert_eq!(train.len(), s.event_ends()[14] + 1);
        assert!(split_by_events(&s, 32).is_err());
        assert!(split_by_events(&s, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_then_concat_is_identity(
            lengths in proptest::collection::vec(1usize..20, 2..12),
            k in 1usize..11,
        ) {
            let s = toy(&lengths);
            prop_assume!(k < s.n_events());
            let (a, b) = split_by_events(&s, k).unwrap();
            let joined = a.concat(&b);
            prop_assert_eq!(joined.input(), s.input());
            prop_assert_eq!(joined.output(), s.output());
            prop_assert_eq!(joined.event_ends(), s.event_ends());
        }
    }
}
