//! File formats: per-iteration trace CSV, decision-vector snapshot CSV,
//! μ-sweep CSV, and the JSON run summary.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::solver::{Solution, Trace};

pub const TRACE_HEADER: [&str; 5] = ["iter", "cost", "hsq", "energy", "sigma"];
pub const SWEEP_HEADER: [&str; 3] = ["mu", "iter", "hsq"];

/// One parsed row of a trace CSV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub cost: f64,
    pub hsq: f64,
    pub energy: f64,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mu: f64,
    pub iter: usize,
    pub hsq: f64,
}

pub fn write_trace_csv<W: Write>(trace: &Trace, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        w.serialize(TraceRow {
            iter: r.iter,
            cost: r.cost,
            hsq: r.hsq,
            energy: r.energy,
            sigma: r.sigma,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> csv::Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().ne(TRACE_HEADER) {
        return Err(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("unexpected trace header: {headers:?}"),
        )));
    }
    r.deserialize().collect()
}

/// `iter,x_0,…,x_{n-1}` with one row per snapshot.
pub fn write_snapshots_csv<W: Write>(trace: &Trace, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let n = trace.snapshots.first().map_or(0, |s| s.xbar.len());
    let mut header = vec!["iter".to_string()];
    header.extend((0..n).map(|i| format!("x_{i}")));
    w.write_record(&header)?;
    for s in &trace.snapshots {
        let mut row = vec![s.iter.to_string()];
        row.extend(s.xbar.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv<'a, W: Write>(
    runs: impl IntoIterator<Item = (f64, &'a Trace)>,
    out: W,
) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for (mu, trace) in runs {
        for r in &trace.records {
            w.serialize(SweepRow {
                mu,
                iter: r.iter,
                hsq: r.hsq,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(input: R) -> csv::Result<Vec<SweepRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// JSON summary of one solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub solver: String,
    pub xbar: Vec<f64>,
    pub lambda: Vec<f64>,
    pub violation: f64,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub duration_ms: f64,
    pub config: serde_json::Value,
}

impl From<&Solution> for SolutionSummary {
    fn from(s: &Solution) -> Self {
        SolutionSummary {
            solver: s.solver.clone(),
            xbar: s.xbar.clone(),
            lambda: s.lambda.clone(),
            violation: s.violation,
            cost: s.cost,
            iterations: s.iterations,
            converged: s.converged,
            duration_ms: s.duration_ms(),
            config: s.config.clone(),
        }
    }
}

impl Solution {
    pub fn summary(&self) -> SolutionSummary {
        self.into()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&self.summary())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::toy_kkt_problem;
    use crate::solver::{solve, SolverConfig};

    fn small_run() -> Solution {
        let cfg = SolverConfig {
            iterations: 30,
            snapshot_stride: 10,
            ..SolverConfig::default()
        }
        .reanneal();
        solve(&toy_kkt_problem(), &[0.1, 0.2], &[0.0], &cfg).unwrap()
    }

    #[test]
    fn trace_csv_round_trips_exactly() {
        let sol = small_run();
        let mut buf = Vec::new();
        write_trace_csv(&sol.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("iter,cost,hsq,energy,sigma\n"));
        let rows = read_trace_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 30);
        for (row, rec) in rows.iter().zip(&sol.trace.records) {
            assert_eq!(row.iter, rec.iter);
            assert_eq!(row.cost.to_bits(), rec.cost.to_bits());
            assert_eq!(row.hsq.to_bits(), rec.hsq.to_bits());
            assert_eq!(row.energy.to_bits(), rec.energy.to_bits());
            assert_eq!(row.sigma.to_bits(), rec.sigma.to_bits());
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_trace_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn snapshots_and_sweep_layout() {
        let sol = small_run();
        let mut buf = Vec::new();
        write_snapshots_csv(&sol.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "iter,x_0,x_1");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("10,"));

        let mut buf = Vec::new();
        write_sweep_csv([(0.5, &sol.trace), (2.0, &sol.trace)], &mut buf).unwrap();
        let rows = read_sweep_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 60);
        assert_eq!(rows[30].mu, 2.0);
        assert_eq!(rows[30].iter, 0);
    }

    #[test]
    fn summary_json_fields() {
        let sol = small_run();
        let v: serde_json::Value = serde_json::from_str(&sol.to_json().unwrap()).unwrap();
        for key in ["xbar", "lambda", "violation", "cost", "duration_ms", "config"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["config"]["iterations"], 30);
        let back: SolutionSummary = serde_json::from_value(v).unwrap();
        assert_eq!(back.violation, sol.violation);
    }
}
