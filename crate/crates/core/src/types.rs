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

//! Schema, domain and scalar value types.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

/// Value domain of a column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Int64,
    Float64,
    Utf8,
    Boolean,
}

impl Domain {
    pub const ALL: [Domain; 4] = [
        Domain::Int64,
        Domain::Float64,
        Domain::Utf8,
        Domain::Boolean,
    ];

    /// Tag byte used by the binary table format.
    pub fn tag(self) -> u8 {
        match self {
            Domain::Int64 => 0,
            Domain::Float64 => 1,
            Domain::Utf8 => 2,
            Domain::Boolean => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Domain> {
        Some(match tag {
            0 => Domain::Int64,
            1 => Domain::Float64,
            2 => Domain::Utf8,
            3 => Domain::Boolean,
            _ => return None,
        })
    }

    /// Byte width of one value in the data buffer, `None` for variable width.
    pub fn width(self) -> Option<usize> {
        match self {
            Domain::Int64 | Domain::Float64 => Some(8),
            Domain::Boolean => Some(1),
            Domain::Utf8 => None,
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Domain::Int64 | Domain::Float64)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Domain::Int64 => "int64",
            Domain::Float64 => "float64",
            Domain::Utf8 => "utf8",
            Domain::Boolean => "bool",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "int64" | "i64" => Ok(Domain::Int64),
            "float64" | "f64" => Ok(Domain::Float64),
            "utf8" | "str" | "string" => Ok(Domain::Utf8),
            "bool" | "boolean" => Ok(Domain::Boolean),
            other => Err(Error::InvalidArgument(format!("unknown domain '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Field {
    pub name: String,
    pub domain: Domain,
}

impl Field {
    pub fn new(name: impl Into<String>, domain: Domain) -> Self {
        Field {
            name: name.into(),
            domain,
        }
    }
}

/// Ordered column domains and labels. Names are unique and nonempty.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Schema {
    fields: Vec<Field>,
}

impl Schema {
    pub fn new(fields: Vec<Field>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::InvalidSchema(
                "schema needs at least one column".into(),
            ));
        }
        let mut seen = HashSet::with_capacity(fields.len());
        for f in &fields {
            if f.name.is_empty() {
                return Err(Error::InvalidSchema("empty column name".into()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate column name '{}'",
                    f.name
                )));
            }
        }
        Ok(Schema { fields })
    }

    /// Convenience constructor from `(name, domain)` pairs.
    pub fn from_pairs<S: Into<String>>(
        pairs: impl IntoIterator<Item = (S, Domain)>,
    ) -> Result<Self> {
        Schema::new(pairs.into_iter().map(|(n, d)| Field::new(n, d)).collect())
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn field(&self, i: usize) -> &Field {
        &self.fields[i]
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn domains(&self) -> impl Iterator<Item = Domain> + '_ {
        self.fields.iter().map(|f| f.domain)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.fields.iter().map(|f| f.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    /// Sub-schema made of the given column indices.
    pub fn project(&self, indices: &[usize]) -> Result<Schema> {
        let mut fields = Vec::with_capacity(indices.len());
        for &i in indices {
            let f = self.fields.get(i).ok_or(Error::OutOfBounds {
                index: i,
                len: self.fields.len(),
            })?;
            fields.push(f.clone());
        }
        Schema::new(fields)
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, field) in self.fields.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}: {}", field.name, field.domain)?;
        }
        f.write_str("]")
    }
}

/// A single cell value, used for row-level construction and inspection.
#[derive(Clone, Debug)]
pub enum Value {
    Null,
    Int64(i64),
    Float64(f64),
    Utf8(String),
    Boolean(bool),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn domain(&self) -> Option<Domain> {
        match self {
            Value::Null => None,
            Value::Int64(_) => Some(Domain::Int64),
            Value::Float64(_) => Some(Domain::Float64),
            Value::Utf8(_) => Some(Domain::Utf8),
            Value::Boolean(_) => Some(Domain::Boolean),
        }
    }

    /// Total order: nulls last, floats by `total_cmp`. Values of different
    /// domains order by domain tag.
    pub fn total_cmp(&self, other: &Value) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match (self, other) {
            (Value::Null, Value::Null) => Ordering::Equal,
            (Value::Null, _) => Ordering::Greater,
            (_, Value::Null) => Ordering::Less,
            (Value::Int64(a), Value::Int64(b)) => a.cmp(b),
            (Value::Float64(a), Value::Float64(b)) => a.total_cmp(b),
            (Value::Utf8(a), Value::Utf8(b)) => a.as_bytes().cmp(b.as_bytes()),
            (Value::Boolean(a), Value::Boolean(b)) => a.cmp(b),
            (a, b) => a
                .domain()
                .map(Domain::tag)
                .cmp(&b.domain().map(Domain::tag)),
        }
    }
}

/// Equality under the total order (so `NaN == NaN` and `-0.0 != 0.0`).
impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.total_cmp(other).is_eq()
    }
}

impl Eq for Value {}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int64(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float64(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Boolean(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Utf8(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Utf8(v)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Null, Into::into)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Int64(v) => write!(f, "{v}"),
            Value::Float64(v) => write!(f, "{v}"),
            Value::Utf8(v) => write!(f, "{v:?}"),
            Value::Boolean(v) => write!(f, "{v}"),
        }
    }
}

/// Numeric scalar operand for elementwise kernels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scalar {
    Int64(i64),
    Float64(f64),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_rejects_duplicates_and_empty() {
        assert!(Schema::from_pairs([("a", Domain::Int64), ("a", Domain::Utf8)]).is_err());
        assert!(Schema::from_pairs([("", Domain::Int64)]).is_err());
        assert!(Schema::new(vec![]).is_err());
    }

    #[test]
    fn domain_tags_round_trip() {
        for d in Domain::ALL {
            assert_eq!(Domain::from_tag(d.tag()), Some(d));
        }
        assert_eq!(Domain::from_tag(9), None);
    }

    #[test]
    fn value_order_puts_nulls_last() {
        let mut v = vec![Value::Null, Value::Int64(3), Value::Int64(-1)];
        v.sort_by(Value::total_cmp);
        assert_eq!(v, vec![Value::Int64(-1), Value::Int64(3), Value::Null]);
    }
}
