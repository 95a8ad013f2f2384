//! Observation records, the state-space time layout and CSV input/output.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sde::SegmentSpec;

/// How observation columns are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadKind {
    Real,
    /// Non-negative integer counts.
    Counts,
}

/// Observation times `t_1 < … < t_k` with one payload vector per time.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ObservationSet {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::precondition("no observations"));
        }
        if times.len() != values.len() {
            return Err(Error::precondition("times and values differ in length"));
        }
        if let Some(k) = times.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::precondition(format!(
                "observation times not strictly increasing at index {}",
                k + 1
            )));
        }
        let width = values[0].len();
        if width == 0 || values.iter().any(|v| v.len() != width) {
            return Err(Error::precondition("observation payloads must share one non-zero width"));
        }
        Ok(Self { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn width(&self) -> usize {
        self.values[0].len()
    }
}

/// Time layout of a state-space model: skeleton times `t_0 < … < t_T` and an
/// optional observation at each of them. Interval `k` (1-based) is
/// `[t_{k−1}, t_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceData {
    pub times: Vec<f64>,
    pub y: Vec<Option<Vec<f64>>>,
}

impl StateSpaceData {
    pub fn new(times: Vec<f64>, y: Vec<Option<Vec<f64>>>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::precondition("need at least one observation interval"));
        }
        if times.len() != y.len() {
            return Err(Error::precondition("times and observations differ in length"));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::precondition("skeleton times must be finite and strictly increasing"));
        }
        Ok(Self { times, y })
    }

    /// Skeleton starting at `t0`. An observation recorded exactly at `t0`
    /// attaches to the initial state.
    pub fn from_observations(t0: f64, obs: &ObservationSet) -> Result<Self> {
        let mut times = vec![t0];
        let mut y = vec![None];
        for (t, v) in obs.times.iter().zip(&obs.values) {
            if *t == t0 {
                y[0] = Some(v.clone());
            } else if *t < t0 {
                return Err(Error::precondition(format!(
                    "observation at {t} precedes the initial time {t0}"
                )));
            } else {
                times.push(*t);
                y.push(Some(v.clone()));
            }
        }
        Self::new(times, y)
    }

    /// Number of intervals `T`.
    pub fn n_intervals(&self) -> usize {
        self.times.len() - 1
    }

    /// Level-`l` grid of interval `k ∈ 1..=T`.
    pub fn segment(&self, k: usize, level: u32) -> SegmentSpec {
        SegmentSpec::at_level(self.times[k - 1], self.times[k], level)
            .expect("skeleton times validated at construction")
    }

    /// Total Euler cells over all intervals at level `l`.
    pub fn steps_at_level(&self, level: u32) -> usize {
        (1..=self.n_intervals())
            .map(|k| self.segment(k, level).n_steps)
            .sum()
    }
}

fn parse_err(row: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        row,
        msg: msg.into(),
    }
}

/// Read observations from CSV rows `time,y1[,y2,…]`. A first row whose time
/// field is not numeric is taken as a header. Row numbers in errors are
/// 1-based line positions in the input.
pub fn load_observations<R: Read>(source: R, kind: PayloadKind) -> Result<ObservationSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut width = None;
    for (idx, rec) in reader.records().enumerate() {
        let row = idx + 1;
        let rec = rec.map_err(|e| parse_err(row, e.to_string()))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let t = match rec.get(0).map(str::parse::<f64>) {
            Some(Ok(t)) => t,
            _ if row == 1 => continue,
            _ => return Err(parse_err(row, "time field is not a number")),
        };
        if !t.is_finite() {
            return Err(parse_err(row, "time is not finite"));
        }
        if rec.len() < 2 {
            return Err(parse_err(row, "expected time and at least one value"));
        }
        if *width.get_or_insert(rec.len() - 1) != rec.len() - 1 {
            return Err(parse_err(row, "inconsistent number of columns"));
        }
        if let Some(&prev) = times.last() {
            if !(t > prev) {
                return Err(parse_err(row, format!("time {t} does not exceed previous time {prev}")));
            }
        }
        let mut payload = Vec::with_capacity(rec.len() - 1);
        for field in rec.iter().skip(1) {
            let v = match kind {
                PayloadKind::Real => field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(row, format!("invalid value {field:?}")))?,
                PayloadKind::Counts => {
                    if field.starts_with('-') {
                        return Err(parse_err(row, format!("negative count {field:?}")));
                    }
                    field
                        .parse::<u64>()
                        .map_err(|_| parse_err(row, format!("invalid count {field:?}")))?
                        as f64
                }
            };
            payload.push(v);
        }
        times.push(t);
        values.push(payload);
    }
    if times.is_empty() {
        return Err(parse_err(0, "no observation rows"));
    }
    ObservationSet::new(times, values)
}

pub fn load_observations_path(path: &Path, kind: PayloadKind) -> Result<ObservationSet> {
    load_observations(std::fs::File::open(path)?, kind)
}

/// Write observations as headerless CSV. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_observations<W: Write>(obs: &ObservationSet, sink: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    for (t, v) in obs.times.iter().zip(&obs.values) {
        let mut row = vec![t.to_string()];
        row.extend(v.iter().map(|x| x.to_string()));
        w.write_record(&row).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}
