//! Event-time containers for temporal point processes.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sorted event times of one marginal point process observed on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSeries<S> {
    times: Vec<S>,
    horizon: S,
}

impl<S: Scalar> EventSeries<S> {
    /// Build a series, validating ordering and range.
    pub fn new(times: Vec<S>, horizon: S) -> Result<Self> {
        if !(horizon > S::zero()) {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        for w in times.windows(2) {
            if w[1] < w[0] {
                return Err(Error::Domain("event times must be nondecreasing".into()));
            }
        }
        if let (Some(&first), Some(&last)) = (times.first(), times.last()) {
            if first < S::zero() || last > horizon {
                return Err(Error::Domain(format!(
                    "event times must lie in [0, {horizon}]"
                )));
            }
        }
        Ok(EventSeries { times, horizon })
    }

    pub fn empty(horizon: S) -> Result<Self> {
        Self::new(Vec::new(), horizon)
    }

    #[inline]
    pub fn times(&self) -> &[S] {
        &self.times
    }

    #[inline]
    pub fn horizon(&self) -> S {
        self.horizon
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.times.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of events strictly before `t`.
    pub fn count_before(&self, t: S) -> usize {
        self.times.partition_point(|&x| x < t)
    }

    /// Restrict to events in `[from, to)`, re-anchored so `from` becomes 0.
    pub fn window(&self, from: S, to: S) -> Result<EventSeries<S>> {
        if !(from >= S::zero() && to > from && to <= self.horizon) {
            return Err(Error::Domain(format!(
                "window [{from}, {to}) must lie within [0, {}]",
                self.horizon
            )));
        }
        let times = self
            .times
            .iter()
            .filter(|&&t| t >= from && t < to)
            .map(|&t| t - from)
            .collect();
        EventSeries::new(times, to - from)
    }
}

/// A collection of marginal series sharing one observation horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiProcess<S> {
    series: Vec<EventSeries<S>>,
    horizon: S,
}

impl<S: Scalar> MultiProcess<S> {
    pub fn new(series: Vec<EventSeries<S>>) -> Result<Self> {
        let horizon = match series.first() {
            Some(s) => s.horizon(),
            None => return Err(Error::Domain("multi-process needs at least one series".into())),
        };
        for (idx, s) in series.iter().enumerate() {
            if s.horizon() != horizon {
                return Err(Error::DimMismatch(format!(
                    "series {idx} horizon {} differs from shared horizon {horizon}",
                    s.horizon()
                )));
            }
        }
        Ok(MultiProcess { series, horizon })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.series.len()
    }

    #[inline]
    pub fn horizon(&self) -> S {
        self.horizon
    }

    #[inline]
    pub fn series(&self, j: usize) -> &EventSeries<S> {
        &self.series[j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &EventSeries<S>> {
        self.series.iter()
    }

    /// Total event count across marginals.
    pub fn total_events(&self) -> usize {
        self.series.iter().map(|s| s.len()).sum()
    }

    /// Restrict every marginal to `[from, to)`, re-anchored at 0.
    pub fn window(&self, from: S, to: S) -> Result<MultiProcess<S>> {
        let series = self
            .series
            .iter()
            .map(|s| s.window(from, to))
            .collect::<Result<Vec<_>>>()?;
        MultiProcess::new(series)
    }
}
