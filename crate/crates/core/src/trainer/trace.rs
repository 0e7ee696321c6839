use std::fmt::Write as _;
use std::path::Path;

use crate::gan::LossValues;
use crate::{Error, Result};

pub const TRACE_CSV_HEADER: &str = "iter,epoch,d_loss,g_adv,g_tv,g_total";

/// Losses observed at one generator update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: u64,
    /// 1-based index of the epoch the update belongs to.
    pub epoch: u64,
    pub losses: LossValues,
}

/// Per-iteration loss history, one record per generator update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    records: Vec<TraceRecord>,
}

impl LossTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: TraceRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.iteration <= last.iteration {
                return Err(Error::Data(format!(
                    "trace iteration {} does not follow {}",
                    record.iteration, last.iteration
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn extend(&mut self, other: &LossTrace) -> Result<()> {
        for r in &other.records {
            self.push(*r)?;
        }
        Ok(())
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Mean adversarial generator loss over the records of `epoch`.
    pub fn mean_g_adv(&self, epoch: u64) -> Option<f64> {
        let vals: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.epoch == epoch)
            .map(|r| r.losses.g_adv)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn all_finite(&self) -> bool {
        self.records.iter().all(|r| r.losses.is_finite())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let l = &r.losses;
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iteration, r.epoch, l.d_loss, l.g_adv, l.g_tv, l.g_total
            )
            .expect("write to string");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(TRACE_CSV_HEADER) {
            return Err(Error::Data(format!("trace CSV must start with `{TRACE_CSV_HEADER}`")));
        }
        let mut trace = LossTrace::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            let bad = || Error::Data(format!("malformed trace row {}: `{line}`", n + 2));
            if fields.len() != 6 {
                return Err(bad());
            }
            let f = |i: usize| fields[i].parse::<f64>().map_err(|_| bad());
            trace.push(TraceRecord {
                iteration: fields[0].parse().map_err(|_| bad())?,
                epoch: fields[1].parse().map_err(|_| bad())?,
                losses: LossValues {
                    d_loss: f(2)?,
                    g_adv: f(3)?,
                    g_tv: f(4)?,
                    g_total: f(5)?,
                },
            })?;
        }
        Ok(trace)
    }
}
