use crate::error::{Error, Result};

/// Observation times with their responses. Times are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch {
                times: times.len(),
                values: values.len(),
            });
        }
        if times.is_empty() {
            return Err(Error::EmptySeries);
        }
        for (index, (t, y)) in times.iter().zip(&values).enumerate() {
            if !t.is_finite() || !y.is_finite() {
                return Err(Error::NonFinite { index });
            }
        }
        for (index, pair) in times.windows(2).enumerate() {
            if pair[1] == pair[0] {
                return Err(Error::DuplicateTime {
                    index: index + 1,
                    time: pair[1],
                });
            }
            if pair[1] < pair[0] {
                return Err(Error::NotIncreasing {
                    index: index + 1,
                    time: pair[1],
                    previous: pair[0],
                });
            }
        }
        Ok(Self { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same design points with different responses.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.times.clone(), values)
    }

    pub fn mean_gap(&self) -> f64 {
        if self.times.len() < 2 {
            1.0
        } else {
            (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
        }
    }

    /// Location of the unobserved initial knot in the caller's time units.
    ///
    /// The process starts at zero when every observation lies after it; otherwise
    /// the initial knot sits one mean gap before the first observation.
    pub fn origin(&self) -> f64 {
        let first = self.times[0];
        if first > 0.0 {
            0.0
        } else {
            first - self.mean_gap()
        }
    }

    /// Observation times measured from [`TimeSeries::origin`]; all strictly positive.
    pub fn shifted_times(&self) -> Vec<f64> {
        let origin = self.origin();
        self.times.iter().map(|t| t - origin).collect()
    }
}
