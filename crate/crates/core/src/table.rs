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

use std::fmt;
use std::sync::Arc;

use crate::column::{Column, ColumnBuilder};
use crate::error::{Error, Result};
use crate::types::{Schema, Value};

/// Immutable columnar table. Row labels are implicit positions `0..num_rows`.
///
/// Cloning is cheap: columns are reference counted and never mutated.
#[derive(Clone, Debug)]
pub struct Table {
    schema: Arc<Schema>,
    columns: Vec<Arc<Column>>,
    num_rows: usize,
}

impl Table {
    pub fn try_new(schema: Schema, columns: Vec<Column>) -> Result<Self> {
        Table::from_arcs(
            Arc::new(schema),
            columns.into_iter().map(Arc::new).collect(),
        )
    }

    pub fn from_arcs(schema: Arc<Schema>, columns: Vec<Arc<Column>>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "schema has {} columns, got {}",
                schema.len(),
                columns.len()
            )));
        }
        let num_rows = columns.first().map_or(0, |c| c.len());
        let t = Table {
            schema,
            columns,
            num_rows,
        };
        t.validate()?;
        Ok(t)
    }

    /// Build a table from per-column value lists (`Value::Null` for missing values).
    pub fn build(schema: Schema, columns: Vec<Vec<Value>>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "schema has {} columns, got {} value lists",
                schema.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        let mut built = Vec::with_capacity(columns.len());
        for (i, (values, field)) in columns.iter().zip(schema.fields()).enumerate() {
            if values.len() != n {
                return Err(Error::LengthMismatch {
                    column: i,
                    expected: n,
                    found: values.len(),
                });
            }
            let mut b = ColumnBuilder::new(field.domain, n);
            for v in values {
                b.push_value(v)?;
            }
            built.push(b.finish());
        }
        Table::try_new(schema, built)
    }

    pub fn empty(schema: Arc<Schema>) -> Self {
        let columns = schema
            .domains()
            .map(|d| Arc::new(Column::empty(d)))
            .collect();
        Table {
            schema,
            columns,
            num_rows: 0,
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_ref(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn is_empty(&self) -> bool {
        self.num_rows == 0
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, i: usize) -> &Column {
        &self.columns[i]
    }

    pub fn column_arc(&self, i: usize) -> &Arc<Column> {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[Arc<Column>] {
        &self.columns
    }

    pub fn row(&self, i: usize) -> Result<RowRef<'_>> {
        if i >= self.num_rows {
            return Err(Error::OutOfBounds {
                index: i,
                len: self.num_rows,
            });
        }
        Ok(RowRef {
            table: self,
            index: i,
        })
    }

    /// All rows as owned values, row-major. Intended for tests and small tables.
    pub fn to_rows(&self) -> Vec<Vec<Value>> {
        (0..self.num_rows)
            .map(|i| self.columns.iter().map(|c| c.value(i)).collect())
            .collect()
    }

    /// Check every table and column invariant.
    pub fn validate(&self) -> Result<()> {
        for (i, (col, field)) in self.columns.iter().zip(self.schema.fields()).enumerate() {
            if col.domain() != field.domain {
                return Err(Error::DomainMismatch(format!(
                    "column {i} ('{}') holds {} but schema says {}",
                    field.name,
                    col.domain(),
                    field.domain
                )));
            }
            if col.len() != self.num_rows {
                return Err(Error::LengthMismatch {
                    column: i,
                    expected: self.num_rows,
                    found: col.len(),
                });
            }
            col.validate()?;
        }
        Ok(())
    }

    pub fn slice(&self, start: usize, len: usize) -> Result<Table> {
        if start.checked_add(len).is_none_or(|end| end > self.num_rows) {
            return Err(Error::OutOfBounds {
                index: start.saturating_add(len),
                len: self.num_rows,
            });
        }
        if start == 0 && len == self.num_rows {
            return Ok(self.clone());
        }
        let columns = self
            .columns
            .iter()
            .map(|c| c.slice(start, len).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Ok(Table {
            schema: self.schema.clone(),
            columns,
            num_rows: len,
        })
    }

    pub fn take(&self, indices: &[usize]) -> Result<Table> {
        let columns = self
            .columns
            .iter()
            .map(|c| c.take(indices).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Ok(Table {
            schema: self.schema.clone(),
            columns,
            num_rows: indices.len(),
        })
    }

    /// Keep only the given columns, in the given order.
    pub fn project(&self, indices: &[usize]) -> Result<Table> {
        let schema = self.schema.project(indices)?;
        let columns = indices.iter().map(|&i| self.columns[i].clone()).collect();
        Ok(Table {
            schema: Arc::new(schema),
            columns,
            num_rows: self.num_rows,
        })
    }

    /// Concatenate tables sharing one schema, in list order.
    pub fn concat(parts: &[Table]) -> Result<Table> {
        let first = parts.first().ok_or_else(|| {
            Error::InvalidArgument("concat of an empty list needs a schema".into())
        })?;
        Table::concat_with_schema(first.schema.clone(), parts)
    }

    /// Concatenate tables, allowing an empty list.
    pub fn concat_with_schema(schema: Arc<Schema>, parts: &[Table]) -> Result<Table> {
        for p in parts {
            if *p.schema != *schema {
                return Err(Error::SchemaMismatch(format!(
                    "expected {}, found {}",
                    schema, p.schema
                )));
            }
        }
        let nonempty: Vec<&Table> = parts.iter().filter(|p| p.num_rows > 0).collect();
        match nonempty.len() {
            0 => return Ok(Table::empty(schema)),
            1 => return Ok(nonempty[0].clone()),
            _ => {}
        }
        let num_rows = nonempty.iter().map(|p| p.num_rows).sum();
        let mut columns = Vec::with_capacity(schema.len());
        for i in 0..schema.len() {
            let cols: Vec<&Column> = nonempty.iter().map(|p| p.column(i)).collect();
            columns.push(Arc::new(Column::concat(&cols)?));
        }
        Ok(Table {
            schema,
            columns,
            num_rows,
        })
    }

    /// Replace column `i`, keeping the rest.
    pub fn with_column(&self, i: usize, column: Column) -> Result<Table> {
        let mut columns = self.columns.clone();
        if i >= columns.len() {
            return Err(Error::OutOfBounds {
                index: i,
                len: columns.len(),
            });
        }
        columns[i] = Arc::new(column);
        Table::from_arcs(self.schema.clone(), columns)
    }

    pub fn byte_size(&self) -> usize {
        self.columns.iter().map(|c| c.byte_size()).sum()
    }
}

/// Value equality: same schema and identical cells under the total order.
impl PartialEq for Table {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema
            && self.num_rows == other.num_rows
            && self
                .columns
                .iter()
                .zip(&other.columns)
                .all(|(a, b)| (0..self.num_rows).all(|i| a.eq_at(i, b, i)))
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} ({} rows)", self.schema, self.num_rows)?;
        for i in 0..self.num_rows.min(20) {
            let cells: Vec<String> = self
                .columns
                .iter()
                .map(|c| c.value(i).to_string())
                .collect();
            writeln!(f, "  {}", cells.join(", "))?;
        }
        if self.num_rows > 20 {
            writeln!(f, "  ...")?;
        }
        Ok(())
    }
}

/// A borrowed row of a table.
#[derive(Clone, Copy, Debug)]
pub struct RowRef<'a> {
    table: &'a Table,
    index: usize,
}

impl<'a> RowRef<'a> {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn get(&self, col: usize) -> Value {
        self.table.column(col).value(self.index)
    }

    pub fn values(&self) -> Vec<Value> {
        (0..self.table.num_columns()).map(|c| self.get(c)).collect()
    }
}
