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

//! CSV reading and writing. The first record is a header; an empty field is null.

use std::io::{Read, Write};
use std::path::Path;

use crate::column::ColumnBuilder;
use crate::error::{Error, Result};
use crate::table::Table;
use crate::types::{Domain, Field, Schema, Value};

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

/// Read CSV from `input`. With `domains = None` each column's domain is
/// inferred: Int64, then Float64, then Boolean (`true`/`false`), else Utf8.
pub fn read_csv<R: Read>(input: R, domains: Option<&[Domain]>) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut raw: Vec<Vec<Option<String>>> = vec![Vec::new(); headers.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        for (i, field) in rec.iter().enumerate() {
            raw[i].push((!field.is_empty()).then(|| field.to_string()));
        }
    }
    let domains: Vec<Domain> = match domains {
        Some(d) if d.len() == headers.len() => d.to_vec(),
        Some(d) => {
            return Err(Error::SchemaMismatch(format!(
                "{} domains given for {} csv columns",
                d.len(),
                headers.len()
            )))
        }
        None => raw.iter().map(|c| infer_domain(c)).collect(),
    };
    let schema = Schema::new(
        headers
            .iter()
            .zip(&domains)
            .map(|(n, d)| Field::new(n.clone(), *d))
            .collect(),
    )?;
    let mut columns = Vec::with_capacity(headers.len());
    for (ci, (cells, domain)) in raw.iter().zip(&domains).enumerate() {
        let mut b = ColumnBuilder::new(*domain, cells.len());
        for (ri, cell) in cells.iter().enumerate() {
            let v = match cell {
                None => Value::Null,
                Some(s) => parse_cell(s, *domain).ok_or_else(|| {
                    Error::DomainMismatch(format!("row {ri} column {ci}: '{s}' is not {domain}"))
                })?,
            };
            b.push_value(&v)?;
        }
        columns.push(b.finish());
    }
    Table::try_new(schema, columns)
}

fn parse_cell(s: &str, domain: Domain) -> Option<Value> {
    Some(match domain {
        Domain::Int64 => Value::Int64(s.parse().ok()?),
        Domain::Float64 => Value::Float64(s.parse().ok()?),
        Domain::Boolean => Value::Boolean(match s {
            "true" | "True" | "TRUE" => true,
            "false" | "False" | "FALSE" => false,
            _ => return None,
        }),
        Domain::Utf8 => Value::Utf8(s.to_string()),
    })
}

fn infer_domain(cells: &[Option<String>]) -> Domain {
    let present = || cells.iter().flatten();
    for d in [Domain::Int64, Domain::Float64, Domain::Boolean] {
        if present().all(|s| parse_cell(s, d).is_some()) {
            return d;
        }
    }
    Domain::Utf8
}

/// Write `t` as CSV with a header row. Nulls become empty fields, so an
/// empty string reads back as null.
pub fn write_csv<W: Write>(t: &Table, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(t.schema().names()).map_err(csv_err)?;
    let mut record: Vec<String> = Vec::with_capacity(t.num_columns());
    for i in 0..t.num_rows() {
        record.clear();
        for c in t.columns() {
            record.push(match c.value(i) {
                Value::Null => String::new(),
                Value::Utf8(s) => s,
                v => v.to_string(),
            });
        }
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv_file(path: impl AsRef<Path>, domains: Option<&[Domain]>) -> Result<Table> {
    read_csv(std::fs::File::open(path)?, domains)
}

pub fn write_csv_file(path: impl AsRef<Path>, t: &Table) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_csv(t, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infers_and_round_trips() {
        let text = "k,x,name,flag\n1,0.5,\"a,b\",true\n2,,plain,\n,3,\"q\"\"uote\",false\n";
        let t = read_csv(text.as_bytes(), None).unwrap();
        let domains: Vec<Domain> = t.schema().domains().collect();
        assert_eq!(
            domains,
            vec![
                Domain::Int64,
                Domain::Float64,
                Domain::Utf8,
                Domain::Boolean
            ]
        );
        assert_eq!(t.num_rows(), 3);
        assert!(t.column(0).value(2).is_null());
        assert_eq!(t.column(2).value(2), Value::from("q\"uote"));
        let mut buf = Vec::new();
        write_csv(&t, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), Some(&domains)).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn explicit_domain_violation() {
        let err = read_csv("k\nabc\n".as_bytes(), Some(&[Domain::Int64])).unwrap_err();
        assert!(matches!(err, Error::DomainMismatch(_)));
    }
}
