//! Per-step metric records and their JSONL wire format.

use crate::error::Result;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

/// One metric record per (round, local step), measured at the virtual
/// average of the client parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: u64,
    pub step: u64,
    pub loss: f64,
    pub grad_frobenius: f64,
    pub grad_trace: f64,
    pub grad_spectral: f64,
    /// Schatten norm at the effective exponent implied by the oracle config
    /// and the running kappa.
    pub grad_schatten_phat: f64,
    /// Smallest kappa seen over all oracle inputs so far; 1.0 before any
    /// matrix oracle call.
    pub running_kappa: f64,
    /// 0 unless wallclock capture is enabled, so default traces are
    /// byte-reproducible.
    pub wallclock_ns: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accuracy: Option<f64>,
}

impl RoundTrace {
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json_line(line: &str) -> Result<RoundTrace> {
        Ok(serde_json::from_str(line)?)
    }
}

pub fn write_jsonl(path: &Path, traces: &[RoundTrace]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for t in traces {
        writeln!(f, "{}", t.to_json_line()?)?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<RoundTrace>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(RoundTrace::from_json_line(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(accuracy: Option<f64>) -> RoundTrace {
        RoundTrace {
            round: 3,
            step: 1,
            loss: 0.15625,
            grad_frobenius: 0.25,
            grad_trace: 0.25,
            grad_spectral: 0.25,
            grad_schatten_phat: 0.25,
            running_kappa: 1.0,
            wallclock_ns: 0,
            accuracy,
        }
    }

    #[test]
    fn jsonl_roundtrip_all_fields() {
        for t in [sample(None), sample(Some(0.625))] {
            let line = t.to_json_line().unwrap();
            let back = RoundTrace::from_json_line(&line).unwrap();
            assert_eq!(t, back);
        }
    }

    #[test]
    fn jsonl_roundtrip_preserves_awkward_floats() {
        let mut t = sample(None);
        t.loss = 0.1 + 0.2;
        t.grad_frobenius = 1e-300;
        t.grad_trace = 12345.678901234567;
        let back = RoundTrace::from_json_line(&t.to_json_line().unwrap()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.jsonl");
        let traces = vec![sample(None), sample(Some(0.5))];
        write_jsonl(&path, &traces).unwrap();
        assert_eq!(read_jsonl(&path).unwrap(), traces);
    }
}
