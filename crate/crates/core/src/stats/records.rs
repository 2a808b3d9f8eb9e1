use super::StatsError;
use crate::control::Method;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

/// One completed measured trial. CSV header:
/// `subject,method,trial,time_s,switches,spawn`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub subject: String,
    pub method: Method,
    pub trial: usize,
    pub time_s: f64,
    pub switches: u32,
    pub spawn: usize,
}

impl TrialRecord {
    fn validate(&self) -> Result<(), String> {
        if !(self.time_s.is_finite() && self.time_s > 0.0) {
            return Err(format!("time_s must be positive, got {}", self.time_s));
        }
        if self.subject.is_empty() {
            return Err("empty subject id".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Time,
    Switches,
}

impl Metric {
    pub fn of(self, r: &TrialRecord) -> f64 {
        match self {
            Metric::Time => r.time_s,
            Metric::Switches => r.switches as f64,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Time => "time",
            Metric::Switches => "switches",
        })
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "time" => Ok(Metric::Time),
            "switches" => Ok(Metric::Switches),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

pub fn write_csv<W: Write>(out: W, records: &[TrialRecord]) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(["subject", "method", "trial", "time_s", "switches", "spawn"])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<TrialRecord>, StatsError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize::<TrialRecord>() {
        let record = row.map_err(|e| StatsError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        record.validate().map_err(|message| StatsError::Parse {
            line: out.len() as u64 + 2,
            message,
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Subject × method matrix of per-cell means.
#[derive(Clone, Debug, PartialEq)]
pub struct SubjectMeans {
    pub subjects: Vec<String>,
    pub methods: Vec<Method>,
    /// `values[subject][method]`.
    pub values: Vec<Vec<f64>>,
}

impl SubjectMeans {
    pub fn column(&self, method_index: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[method_index]).collect()
    }

    /// Keeps only subjects for which `keep` is true.
    pub fn retain_subjects(&self, keep: impl Fn(usize) -> bool) -> SubjectMeans {
        let idx: Vec<usize> = (0..self.subjects.len()).filter(|&i| keep(i)).collect();
        SubjectMeans {
            subjects: idx.iter().map(|&i| self.subjects[i].clone()).collect(),
            methods: self.methods.clone(),
            values: idx.iter().map(|&i| self.values[i].clone()).collect(),
        }
    }
}

/// Mean of `metric` per (subject, method).
pub fn aggregate(records: &[TrialRecord], metric: Metric) -> Result<SubjectMeans, StatsError> {
    if records.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut cells: BTreeMap<(&str, Method), (f64, usize)> = BTreeMap::new();
    for r in records {
        let c = cells.entry((r.subject.as_str(), r.method)).or_insert((0.0, 0));
        c.0 += metric.of(r);
        c.1 += 1;
    }
    let mut subjects: Vec<String> = records.iter().map(|r| r.subject.clone()).collect();
    subjects.sort();
    subjects.dedup();
    let mut methods: Vec<Method> = records.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();

    let mut values = Vec::with_capacity(subjects.len());
    for s in &subjects {
        let mut row = Vec::with_capacity(methods.len());
        for &m in &methods {
            let (sum, n) = cells.get(&(s.as_str(), m)).ok_or_else(|| StatsError::Unbalanced {
                subject: s.clone(),
                method: m.to_string(),
            })?;
            row.push(sum / *n as f64);
        }
        values.push(row);
    }
    Ok(SubjectMeans {
        subjects,
        methods,
        values,
    })
}
