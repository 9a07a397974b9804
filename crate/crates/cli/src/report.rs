// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Benchmark CSV input/output and the scaling summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{CliError, Result};
use crate::tasks::BenchRecord;

pub fn write_records<W: Write>(out: W, records: &[BenchRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)
            .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<BenchRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, r) in rd.deserialize().enumerate() {
        let rec: BenchRecord =
            r.map_err(|e| CliError::MalformedCsv(format!("record {}: {e}", i + 1)))?;
        if !(rec.wall_ms.is_finite() && rec.comm_ms_max.is_finite() && rec.comp_ms_max.is_finite())
            || rec.p == 0
        {
            return Err(CliError::MalformedCsv(format!(
                "record {}: non-finite time or p = 0",
                i + 1
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

/// One row of the summary: all repeats of an operator at one parallelism.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub op: String,
    pub backend: String,
    pub p: usize,
    pub repeats: usize,
    pub median_wall_ms: f64,
    /// Median wall at p = 1 over median wall at this p; `None` without a
    /// p = 1 run.
    pub speedup: Option<f64>,
    /// Summed comm time over summed comm and comp time.
    pub comm_fraction: f64,
}

pub fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

pub fn comm_fraction(comm: f64, comp: f64) -> f64 {
    if comm + comp > 0.0 {
        comm / (comm + comp)
    } else {
        0.0
    }
}

pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String, usize), Vec<&BenchRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.op.clone(), r.backend.clone(), r.p))
            .or_default()
            .push(r);
    }
    let mut rows: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((op, backend, p), rs)| {
            let mut walls: Vec<f64> = rs.iter().map(|r| r.wall_ms).collect();
            let comm: f64 = rs.iter().map(|r| r.comm_ms_max).sum();
            let comp: f64 = rs.iter().map(|r| r.comp_ms_max).sum();
            SummaryRow {
                op,
                backend,
                p,
                repeats: rs.len(),
                median_wall_ms: median(&mut walls),
                speedup: None,
                comm_fraction: comm_fraction(comm, comp),
            }
        })
        .collect();
    let base: BTreeMap<(String, String), f64> = rows
        .iter()
        .filter(|r| r.p == 1)
        .map(|r| ((r.op.clone(), r.backend.clone()), r.median_wall_ms))
        .collect();
    for r in &mut rows {
        if let Some(b) = base.get(&(r.op.clone(), r.backend.clone())) {
            r.speedup = Some(if r.p == 1 { 1.0 } else { b / r.median_wall_ms });
        }
    }
    rows
}

/// Markdown table, one line per summary row.
pub fn render_markdown(rows: &[SummaryRow]) -> String {
    let mut s = String::from(
        "| op | backend | p | repeats | median wall (ms) | speedup | comm fraction |\n",
    );
    s.push_str("|---|---|---|---|---|---|---|\n");
    for r in rows {
        let sp = r.speedup.map_or("-".to_string(), |x| format!("{x:.3}"));
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {:.3} | {} | {:.4} |",
            r.op, r.backend, r.p, r.repeats, r.median_wall_ms, sp, r.comm_fraction
        );
    }
    s
}

/// Whitespace separated columns for plotting wall time against p.
pub fn render_plot_data(rows: &[SummaryRow]) -> String {
    let mut s = String::from("# op backend p median_wall_ms speedup comm_fraction\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {}",
            r.op,
            r.backend,
            r.p,
            r.median_wall_ms,
            r.speedup.map_or(f64::NAN, |x| x),
            r.comm_fraction
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(op: &str, p: usize, wall: f64, comm: f64, comp: f64) -> BenchRecord {
        BenchRecord {
            op: op.into(),
            backend: "inproc".into(),
            p,
            repeat: 0,
            wall_ms: wall,
            comm_ms_max: comm,
            comp_ms_max: comp,
            rows_in: 10,
            rows_out: 10,
            seed: 1,
        }
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn csv_round_trip() {
        let rs = vec![
            rec("join", 1, 10.0, 0.0, 9.0),
            rec("join", 2, 6.0, 2.0, 3.0),
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &rs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "op,backend,p,repeat,wall_ms,comm_ms_max,comp_ms_max,rows_in,rows_out,seed\n"
        ));
        assert_eq!(read_records(&buf[..]).unwrap(), rs);
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(
            read_records(&b"op,backend\njoin,x\n"[..]),
            Err(CliError::MalformedCsv(_))
        ));
        let bad = b"op,backend,p,repeat,wall_ms,comm_ms_max,comp_ms_max,rows_in,rows_out,seed\njoin,inproc,two,0,1,1,1,1,1,1\n";
        assert!(matches!(
            read_records(&bad[..]),
            Err(CliError::MalformedCsv(_))
        ));
    }

    #[test]
    fn speedup_is_relative_to_p1() {
        let rows = summarize(&[
            rec("join", 1, 10.0, 0.0, 9.0),
            rec("join", 4, 4.0, 1.0, 3.0),
        ]);
        assert_eq!(rows[0].speedup, Some(1.0));
        assert!((rows[1].speedup.unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(rows[1].comm_fraction, 0.25);
        assert_eq!(render_markdown(&rows).lines().count(), 4);
    }
}
