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

use std::cmp::Ordering;

use crate::bitmap::Bitmap;
use crate::error::{Error, Result};
use crate::types::{Domain, Value};

/// Value buffers of a column. Null slots hold a zero/empty placeholder.
#[derive(Clone, Debug)]
pub enum ColumnData {
    Int64(Vec<i64>),
    Float64(Vec<f64>),
    /// `offsets` has `len + 1` entries delimiting slices of `bytes`.
    Utf8 {
        offsets: Vec<u64>,
        bytes: Vec<u8>,
    },
    /// One byte per slot, 0 or 1.
    Boolean(Vec<u8>),
}

impl ColumnData {
    pub fn domain(&self) -> Domain {
        match self {
            ColumnData::Int64(_) => Domain::Int64,
            ColumnData::Float64(_) => Domain::Float64,
            ColumnData::Utf8 { .. } => Domain::Utf8,
            ColumnData::Boolean(_) => Domain::Boolean,
        }
    }

    fn len(&self) -> usize {
        match self {
            ColumnData::Int64(v) => v.len(),
            ColumnData::Float64(v) => v.len(),
            ColumnData::Utf8 { offsets, .. } => offsets.len().saturating_sub(1),
            ColumnData::Boolean(v) => v.len(),
        }
    }
}

/// A typed column: data buffer(s) plus an always-materialized validity bitmap.
#[derive(Clone, Debug)]
pub struct Column {
    validity: Bitmap,
    data: ColumnData,
}

impl Column {
    /// Assemble a column from raw parts, checking buffer invariants.
    pub fn from_parts(validity: Bitmap, data: ColumnData) -> Result<Self> {
        let col = Column { validity, data };
        col.validate()?;
        Ok(col)
    }

    pub fn from_i64(values: Vec<i64>) -> Self {
        Column {
            validity: Bitmap::new_set(values.len()),
            data: ColumnData::Int64(values),
        }
    }

    pub fn from_f64(values: Vec<f64>) -> Self {
        Column {
            validity: Bitmap::new_set(values.len()),
            data: ColumnData::Float64(values),
        }
    }

    pub fn from_opt_i64(values: &[Option<i64>]) -> Self {
        let mut b = ColumnBuilder::new(Domain::Int64, values.len());
        for v in values {
            match v {
                Some(x) => b.push_i64(*x),
                None => b.push_null(),
            }
        }
        b.finish()
    }

    pub fn empty(domain: Domain) -> Self {
        ColumnBuilder::new(domain, 0).finish()
    }

    pub fn domain(&self) -> Domain {
        self.data.domain()
    }

    pub fn len(&self) -> usize {
        self.validity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validity(&self) -> &Bitmap {
        &self.validity
    }

    pub fn data(&self) -> &ColumnData {
        &self.data
    }

    #[inline]
    pub fn is_valid(&self, i: usize) -> bool {
        self.validity.get(i)
    }

    pub fn null_count(&self) -> usize {
        self.len() - self.validity.count_set()
    }

    /// Int64 buffer, if this is an Int64 column.
    pub fn i64_values(&self) -> Option<&[i64]> {
        match &self.data {
            ColumnData::Int64(v) => Some(v),
            _ => None,
        }
    }

    pub fn f64_values(&self) -> Option<&[f64]> {
        match &self.data {
            ColumnData::Float64(v) => Some(v),
            _ => None,
        }
    }

    /// Bytes of the string at slot `i` (empty for nulls).
    #[inline]
    pub fn utf8_bytes(&self, i: usize) -> &[u8] {
        match &self.data {
            ColumnData::Utf8 { offsets, bytes } => {
                &bytes[offsets[i] as usize..offsets[i + 1] as usize]
            }
            _ => &[],
        }
    }

    pub fn value(&self, i: usize) -> Value {
        if !self.is_valid(i) {
            return Value::Null;
        }
        match &self.data {
            ColumnData::Int64(v) => Value::Int64(v[i]),
            ColumnData::Float64(v) => Value::Float64(v[i]),
            ColumnData::Utf8 { .. } => {
                Value::Utf8(String::from_utf8_lossy(self.utf8_bytes(i)).into_owned())
            }
            ColumnData::Boolean(v) => Value::Boolean(v[i] != 0),
        }
    }

    /// Check buffer invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.validity.len();
        if self.data.len() != n {
            return Err(Error::CorruptPayload(format!(
                "data holds {} slots, validity covers {n}",
                self.data.len()
            )));
        }
        match &self.data {
            ColumnData::Utf8 { offsets, bytes } => {
                if offsets.first() != Some(&0) {
                    return Err(Error::CorruptPayload("utf8 offsets must start at 0".into()));
                }
                if offsets.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::CorruptPayload("utf8 offsets decrease".into()));
                }
                if *offsets.last().unwrap() as usize != bytes.len() {
                    return Err(Error::CorruptPayload(
                        "utf8 offsets do not cover data".into(),
                    ));
                }
                for i in 0..n {
                    if std::str::from_utf8(self.utf8_bytes(i)).is_err() {
                        return Err(Error::CorruptPayload(format!("invalid utf8 in slot {i}")));
                    }
                }
            }
            ColumnData::Boolean(v) if v.iter().any(|b| *b > 1) => {
                return Err(Error::CorruptPayload("boolean byte not 0/1".into()));
            }
            _ => {}
        }
        Ok(())
    }

    /// Gather rows by index.
    pub fn take(&self, indices: &[usize]) -> Result<Column> {
        let n = self.len();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::OutOfBounds { index: bad, len: n });
        }
        Ok(self.take_unchecked(indices.iter().map(|&i| Some(i)), indices.len()))
    }

    /// Gather rows by optional index; `None` yields a null slot.
    pub fn take_opt(&self, indices: &[Option<usize>]) -> Result<Column> {
        let n = self.len();
        if let Some(bad) = indices.iter().flatten().find(|&&i| i >= n) {
            return Err(Error::OutOfBounds {
                index: *bad,
                len: n,
            });
        }
        Ok(self.take_unchecked(indices.iter().copied(), indices.len()))
    }

    fn take_unchecked(&self, indices: impl Iterator<Item = Option<usize>>, count: usize) -> Column {
        let mut validity = Bitmap::with_capacity(count);
        let data = match &self.data {
            ColumnData::Int64(v) => ColumnData::Int64(
                indices
                    .map(|i| match i {
                        Some(i) => {
                            validity.push(self.validity.get(i));
                            v[i]
                        }
                        None => {
                            validity.push(false);
                            0
                        }
                    })
                    .collect(),
            ),
            ColumnData::Float64(v) => ColumnData::Float64(
                indices
                    .map(|i| match i {
                        Some(i) => {
                            validity.push(self.validity.get(i));
                            v[i]
                        }
                        None => {
                            validity.push(false);
                            0.0
                        }
                    })
                    .collect(),
            ),
            ColumnData::Boolean(v) => ColumnData::Boolean(
                indices
                    .map(|i| match i {
                        Some(i) => {
                            validity.push(self.validity.get(i));
                            v[i]
                        }
                        None => {
                            validity.push(false);
                            0
                        }
                    })
                    .collect(),
            ),
            ColumnData::Utf8 { .. } => {
                let mut offsets = Vec::with_capacity(count + 1);
                let mut bytes = Vec::new();
                offsets.push(0u64);
                for i in indices {
                    match i {
                        Some(i) => {
                            validity.push(self.validity.get(i));
                            bytes.extend_from_slice(self.utf8_bytes(i));
                        }
                        None => validity.push(false),
                    }
                    offsets.push(bytes.len() as u64);
                }
                ColumnData::Utf8 { offsets, bytes }
            }
        };
        Column { validity, data }
    }

    pub fn slice(&self, start: usize, len: usize) -> Result<Column> {
        let end =
            start
                .checked_add(len)
                .filter(|&e| e <= self.len())
                .ok_or(Error::OutOfBounds {
                    index: start.saturating_add(len),
                    len: self.len(),
                })?;
        let indices: Vec<usize> = (start..end).collect();
        self.take(&indices)
    }

    /// Concatenate same-domain columns.
    pub fn concat(parts: &[&Column]) -> Result<Column> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero columns".into()))?;
        let domain = first.domain();
        let total: usize = parts.iter().map(|c| c.len()).sum();
        let mut validity = Bitmap::with_capacity(total);
        for p in parts {
            if p.domain() != domain {
                return Err(Error::SchemaMismatch(format!(
                    "cannot concat {} with {}",
                    domain,
                    p.domain()
                )));
            }
            for i in 0..p.len() {
                validity.push(p.validity.get(i));
            }
        }
        let data = match domain {
            Domain::Int64 => {
                let mut out = Vec::with_capacity(total);
                for p in parts {
                    out.extend_from_slice(p.i64_values().unwrap());
                }
                ColumnData::Int64(out)
            }
            Domain::Float64 => {
                let mut out = Vec::with_capacity(total);
                for p in parts {
                    out.extend_from_slice(p.f64_values().unwrap());
                }
                ColumnData::Float64(out)
            }
            Domain::Boolean => {
                let mut out = Vec::with_capacity(total);
                for p in parts {
                    if let ColumnData::Boolean(v) = &p.data {
                        out.extend_from_slice(v);
                    }
                }
                ColumnData::Boolean(out)
            }
            Domain::Utf8 => {
                let mut offsets = Vec::with_capacity(total + 1);
                let mut bytes = Vec::new();
                offsets.push(0u64);
                for p in parts {
                    if let ColumnData::Utf8 {
                        offsets: po,
                        bytes: pb,
                    } = &p.data
                    {
                        let base = bytes.len() as u64;
                        offsets.extend(po[1..].iter().map(|o| o + base));
                        bytes.extend_from_slice(pb);
                    }
                }
                ColumnData::Utf8 { offsets, bytes }
            }
        };
        Ok(Column { validity, data })
    }

    /// Compare two present values. Both slots must be valid and domains equal.
    #[inline]
    pub fn cmp_present(&self, i: usize, other: &Column, j: usize) -> Ordering {
        match (&self.data, &other.data) {
            (ColumnData::Int64(a), ColumnData::Int64(b)) => a[i].cmp(&b[j]),
            (ColumnData::Float64(a), ColumnData::Float64(b)) => a[i].total_cmp(&b[j]),
            (ColumnData::Boolean(a), ColumnData::Boolean(b)) => a[i].cmp(&b[j]),
            (ColumnData::Utf8 { .. }, ColumnData::Utf8 { .. }) => {
                self.utf8_bytes(i).cmp(other.utf8_bytes(j))
            }
            _ => self.domain().tag().cmp(&other.domain().tag()),
        }
    }

    /// Total order with nulls last.
    #[inline]
    pub fn cmp_at(&self, i: usize, other: &Column, j: usize) -> Ordering {
        match (self.is_valid(i), other.is_valid(j)) {
            (true, true) => self.cmp_present(i, other, j),
            (false, false) => Ordering::Equal,
            (false, true) => Ordering::Greater,
            (true, false) => Ordering::Less,
        }
    }

    /// Equality where null equals null.
    #[inline]
    pub fn eq_at(&self, i: usize, other: &Column, j: usize) -> bool {
        self.cmp_at(i, other, j).is_eq()
    }

    /// Approximate in-memory footprint of the buffers.
    pub fn byte_size(&self) -> usize {
        self.validity.as_bytes().len()
            + match &self.data {
                ColumnData::Int64(v) => v.len() * 8,
                ColumnData::Float64(v) => v.len() * 8,
                ColumnData::Boolean(v) => v.len(),
                ColumnData::Utf8 { offsets, bytes } => offsets.len() * 8 + bytes.len(),
            }
    }
}

/// Single-owner builder for one column.
#[derive(Debug)]
pub struct ColumnBuilder {
    validity: Bitmap,
    data: ColumnData,
}

impl ColumnBuilder {
    pub fn new(domain: Domain, capacity: usize) -> Self {
        let data = match domain {
            Domain::Int64 => ColumnData::Int64(Vec::with_capacity(capacity)),
            Domain::Float64 => ColumnData::Float64(Vec::with_capacity(capacity)),
            Domain::Boolean => ColumnData::Boolean(Vec::with_capacity(capacity)),
            Domain::Utf8 => {
                let mut offsets = Vec::with_capacity(capacity + 1);
                offsets.push(0);
                ColumnData::Utf8 {
                    offsets,
                    bytes: Vec::new(),
                }
            }
        };
        ColumnBuilder {
            validity: Bitmap::with_capacity(capacity),
            data,
        }
    }

    pub fn domain(&self) -> Domain {
        self.data.domain()
    }

    pub fn push_null(&mut self) {
        self.validity.push(false);
        match &mut self.data {
            ColumnData::Int64(v) => v.push(0),
            ColumnData::Float64(v) => v.push(0.0),
            ColumnData::Boolean(v) => v.push(0),
            ColumnData::Utf8 { offsets, bytes } => offsets.push(bytes.len() as u64),
        }
    }

    pub fn push_i64(&mut self, x: i64) {
        match &mut self.data {
            ColumnData::Int64(v) => v.push(x),
            ColumnData::Float64(v) => v.push(x as f64),
            _ => panic!("push_i64 on {} column", self.data.domain()),
        }
        self.validity.push(true);
    }

    pub fn push_f64(&mut self, x: f64) {
        match &mut self.data {
            ColumnData::Float64(v) => v.push(x),
            _ => panic!("push_f64 on {} column", self.data.domain()),
        }
        self.validity.push(true);
    }

    pub fn push_opt_i64(&mut self, x: Option<i64>) {
        match x {
            Some(x) => self.push_i64(x),
            None => self.push_null(),
        }
    }

    pub fn push_opt_f64(&mut self, x: Option<f64>) {
        match x {
            Some(x) => self.push_f64(x),
            None => self.push_null(),
        }
    }

    /// Append a dynamically typed value, checking its domain.
    pub fn push_value(&mut self, v: &Value) -> Result<()> {
        match (&mut self.data, v) {
            (_, Value::Null) => {
                self.push_null();
                return Ok(());
            }
            (ColumnData::Int64(d), Value::Int64(x)) => d.push(*x),
            (ColumnData::Float64(d), Value::Float64(x)) => d.push(*x),
            (ColumnData::Boolean(d), Value::Boolean(x)) => d.push(*x as u8),
            (ColumnData::Utf8 { offsets, bytes }, Value::Utf8(s)) => {
                bytes.extend_from_slice(s.as_bytes());
                offsets.push(bytes.len() as u64);
            }
            (d, v) => {
                return Err(Error::DomainMismatch(format!(
                    "value {v} does not belong to domain {}",
                    d.domain()
                )))
            }
        }
        self.validity.push(true);
        Ok(())
    }

    /// Append slot `i` of a same-domain column.
    pub fn push_from(&mut self, col: &Column, i: usize) {
        if !col.is_valid(i) {
            self.push_null();
            return;
        }
        match (&mut self.data, &col.data) {
            (ColumnData::Int64(d), ColumnData::Int64(s)) => d.push(s[i]),
            (ColumnData::Float64(d), ColumnData::Float64(s)) => d.push(s[i]),
            (ColumnData::Boolean(d), ColumnData::Boolean(s)) => d.push(s[i]),
            (ColumnData::Utf8 { offsets, bytes }, ColumnData::Utf8 { .. }) => {
                bytes.extend_from_slice(col.utf8_bytes(i));
                offsets.push(bytes.len() as u64);
            }
            (d, s) => panic!("push_from {} into {}", s.domain(), d.domain()),
        }
        self.validity.push(true);
    }

    pub fn len(&self) -> usize {
        self.validity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.validity.is_empty()
    }

    pub fn finish(self) -> Column {
        Column {
            validity: self.validity,
            data: self.data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(vals: &[Option<&str>]) -> Column {
        let mut b = ColumnBuilder::new(Domain::Utf8, vals.len());
        for v in vals {
            b.push_value(&(*v).into()).unwrap();
        }
        b.finish()
    }

    #[test]
    fn utf8_take_and_concat() {
        let c = strings(&[Some("ab"), None, Some(""), Some("xyz")]);
        c.validate().unwrap();
        let t = c.take(&[3, 1, 0]).unwrap();
        t.validate().unwrap();
        assert_eq!(t.value(0), Value::from("xyz"));
        assert!(t.value(1).is_null());
        let cat = Column::concat(&[&c, &t]).unwrap();
        cat.validate().unwrap();
        assert_eq!(cat.len(), 7);
        assert_eq!(cat.value(4), Value::from("xyz"));
    }

    #[test]
    fn take_opt_inserts_nulls() {
        let c = Column::from_i64(vec![1, 2, 3]);
        let t = c.take_opt(&[Some(2), None]).unwrap();
        assert_eq!(t.value(0), Value::Int64(3));
        assert!(t.value(1).is_null());
        assert!(c.take(&[3]).is_err());
    }

    #[test]
    fn push_value_rejects_wrong_domain() {
        let mut b = ColumnBuilder::new(Domain::Int64, 1);
        assert!(matches!(
            b.push_value(&Value::from("x")),
            Err(Error::DomainMismatch(_))
        ));
    }

    #[test]
    fn validate_catches_bad_offsets() {
        let data = ColumnData::Utf8 {
            offsets: vec![0, 3, 2],
            bytes: b"abc".to_vec(),
        };
        assert!(Column::from_parts(Bitmap::new_set(2), data).is_err());
    }
}
