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

use crate::column::Column;
use crate::column::ColumnData;
use crate::error::{Error, Result};
use crate::table::Table;
use crate::types::Scalar;

/// Add `s` to every present value of column `col`; nulls stay null.
pub fn add_scalar(t: &Table, col: usize, s: Scalar) -> Result<Table> {
    if col >= t.num_columns() {
        return Err(Error::OutOfBounds {
            index: col,
            len: t.num_columns(),
        });
    }
    let src = t.column(col);
    let data = match (src.data(), s) {
        (ColumnData::Int64(v), Scalar::Int64(x)) => {
            ColumnData::Int64(v.iter().map(|a| a.wrapping_add(x)).collect())
        }
        (ColumnData::Float64(v), Scalar::Float64(x)) => {
            ColumnData::Float64(v.iter().map(|a| a + x).collect())
        }
        (ColumnData::Float64(v), Scalar::Int64(x)) => {
            ColumnData::Float64(v.iter().map(|a| a + x as f64).collect())
        }
        (d, s) => {
            return Err(Error::DomainMismatch(format!(
                "cannot add {s:?} to a {} column",
                d.domain()
            )))
        }
    };
    t.with_column(col, Column::from_parts(src.validity().clone(), data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Domain, Schema, Value};

    fn t(vals: Vec<Value>) -> Table {
        Table::build(
            Schema::from_pairs([("v", Domain::Int64), ("s", Domain::Utf8)]).unwrap(),
            vec![vals.clone(), vals.iter().map(|_| "x".into()).collect()],
        )
        .unwrap()
    }

    #[test]
    fn adds_and_propagates_nulls() {
        let out = add_scalar(&t(vec![1i64.into(), 2i64.into()]), 0, Scalar::Int64(5)).unwrap();
        assert_eq!(out.column(0).i64_values().unwrap(), &[6, 7]);
        let same = t(vec![1i64.into()]);
        assert_eq!(add_scalar(&same, 0, Scalar::Int64(0)).unwrap(), same);
        let n = add_scalar(&t(vec![Value::Null]), 0, Scalar::Int64(5)).unwrap();
        assert!(n.column(0).value(0).is_null());
    }

    #[test]
    fn rejects_non_numeric() {
        let err = add_scalar(&t(vec![1i64.into()]), 1, Scalar::Int64(1)).unwrap_err();
        assert!(matches!(err, Error::DomainMismatch(_)));
        let err = add_scalar(&t(vec![1i64.into()]), 0, Scalar::Float64(1.5)).unwrap_err();
        assert!(matches!(err, Error::DomainMismatch(_)));
    }
}
