use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::predictors::PredictionInterval;

/// Median with the even-count rule: the mean of the two middle values, or
/// `∞` if either is infinite. `NaN` for an empty sequence.
pub fn median_accuracy(lengths: &[f64]) -> f64 {
    let mut sorted = lengths.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        middle_mean(sorted[n / 2 - 1], sorted[n / 2])
    }
}

fn middle_mean(a: f64, b: f64) -> f64 {
    if a.is_infinite() || b.is_infinite() {
        f64::INFINITY
    } else {
        0.5 * (a + b)
    }
}

/// Streaming median over two heaps; `low` holds the smaller half and is at
/// most one element larger than `high`.
#[derive(Debug, Clone, Default)]
pub struct RunningMedian {
    low: BinaryHeap<OrderedFloat<f64>>,
    high: BinaryHeap<Reverse<OrderedFloat<f64>>>,
}

impl RunningMedian {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        let x = OrderedFloat(x);
        if self.low.peek().is_none_or(|&top| x <= top) {
            self.low.push(x);
        } else {
            self.high.push(Reverse(x));
        }
        if self.low.len() > self.high.len() + 1 {
            let moved = self.low.pop().expect("low is non-empty");
            self.high.push(Reverse(moved));
        } else if self.high.len() > self.low.len() {
            let Reverse(moved) = self.high.pop().expect("high is non-empty");
            self.low.push(moved);
        }
    }

    pub fn len(&self) -> usize {
        self.low.len() + self.high.len()
    }

    pub fn is_empty(&self) -> bool {
        self.low.is_empty()
    }

    pub fn median(&self) -> f64 {
        match (self.low.peek(), self.high.peek()) {
            (None, _) => f64::NAN,
            (Some(a), Some(Reverse(b))) if self.low.len() == self.high.len() => middle_mean(a.0, b.0),
            (Some(a), _) => a.0,
        }
    }
}

/// Per-level error bits, cumulative error counts, interval lengths and
/// running medians of the lengths. Level `j` is `levels[j]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OnlineLedger {
    pub predictor: String,
    pub levels: Vec<f64>,
    errors: Vec<Vec<bool>>,
    cumulative: Vec<Vec<u64>>,
    #[serde(with = "extended_reals")]
    lengths: Vec<Vec<f64>>,
    #[serde(with = "extended_reals")]
    medians: Vec<Vec<f64>>,
    #[serde(skip)]
    running: Vec<RunningMedian>,
}

impl PartialEq for OnlineLedger {
    fn eq(&self, other: &Self) -> bool {
        self.predictor == other.predictor
            && self.levels == other.levels
            && self.errors == other.errors
            && self.cumulative == other.cumulative
            && self.lengths == other.lengths
            && self.medians == other.medians
    }
}

impl OnlineLedger {
    pub fn new(predictor: &str, levels: Vec<f64>) -> Self {
        let k = levels.len();
        Self {
            predictor: predictor.to_string(),
            levels,
            errors: vec![Vec::new(); k],
            cumulative: vec![Vec::new(); k],
            lengths: vec![Vec::new(); k],
            medians: vec![Vec::new(); k],
            running: vec![RunningMedian::new(); k],
        }
    }

    /// Records one step. An empty interval always errs and has length 0.
    pub fn record(&mut self, intervals: &[PredictionInterval<f64>], response: f64) {
        assert_eq!(intervals.len(), self.levels.len(), "one interval per level");
        if self.running.len() != self.levels.len() {
            self.rebuild_running();
        }
        for (j, interval) in intervals.iter().enumerate() {
            let err = !interval.contains(response);
            let previous = self.cumulative[j].last().copied().unwrap_or(0);
            self.errors[j].push(err);
            self.cumulative[j].push(previous + u64::from(err));
            let length = interval.length();
            self.lengths[j].push(length);
            self.running[j].push(length);
            self.medians[j].push(self.running[j].median());
        }
    }

    fn rebuild_running(&mut self) {
        self.running = self
            .lengths
            .iter()
            .map(|ls| {
                let mut m = RunningMedian::new();
                ls.iter().for_each(|&l| m.push(l));
                m
            })
            .collect();
    }

    pub fn steps(&self) -> usize {
        self.errors.first().map_or(0, Vec::len)
    }

    pub fn errors(&self, level: usize) -> &[bool] {
        &self.errors[level]
    }

    pub fn cumulative(&self, level: usize) -> &[u64] {
        &self.cumulative[level]
    }

    pub fn lengths(&self, level: usize) -> &[f64] {
        &self.lengths[level]
    }

    pub fn medians(&self, level: usize) -> &[f64] {
        &self.medians[level]
    }
}

/// Extended reals in JSON: finite values as numbers, `±∞` as `"inf"` and
/// `"-inf"`.
mod extended_reals {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Token {
        Number(f64),
        Text(String),
    }

    fn encode(x: f64) -> Token {
        if x.is_finite() {
            Token::Number(x)
        } else {
            Token::Text(x.to_string())
        }
    }

    fn decode<E: serde::de::Error>(t: Token) -> Result<f64, E> {
        match t {
            Token::Number(x) => Ok(x),
            Token::Text(s) => s.parse().map_err(|_| E::custom(format!("invalid extended real {s:?}"))),
        }
    }

    pub fn serialize<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let tokens: Vec<Vec<Token>> = rows.iter().map(|r| r.iter().map(|&x| encode(x)).collect()).collect();
        tokens.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let tokens = Vec::<Vec<Token>>::deserialize(d)?;
        tokens
            .into_iter()
            .map(|r| r.into_iter().map(decode::<D::Error>).collect())
            .collect::<Result<_, _>>()
            .map_err(D::Error::custom)
    }
}
