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

/// Validity bitmap, LSB-first within each byte. Bit set means the slot holds a value.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bitmap {
    bits: Vec<u8>,
    len: usize,
}

impl Bitmap {
    pub fn new_set(len: usize) -> Self {
        let mut bits = vec![0xFF; len.div_ceil(8)];
        if !len.is_multiple_of(8) {
            if let Some(last) = bits.last_mut() {
                *last = (1u8 << (len % 8)) - 1;
            }
        }
        Bitmap { bits, len }
    }

    pub fn with_capacity(cap: usize) -> Self {
        Bitmap {
            bits: Vec::with_capacity(cap.div_ceil(8)),
            len: 0,
        }
    }

    /// Rebuild from raw bytes. Bits past `len` must be zero.
    pub fn from_bytes(bits: Vec<u8>, len: usize) -> Option<Self> {
        if bits.len() != len.div_ceil(8) {
            return None;
        }
        if !len.is_multiple_of(8) {
            let last = *bits.last()?;
            if last >> (len % 8) != 0 {
                return None;
            }
        }
        Some(Bitmap { bits, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.bits[i >> 3] & (1 << (i & 7)) != 0
    }

    #[inline]
    pub fn push(&mut self, valid: bool) {
        if self.len.is_multiple_of(8) {
            self.bits.push(0);
        }
        if valid {
            self.bits[self.len >> 3] |= 1 << (self.len & 7);
        }
        self.len += 1;
    }

    pub fn count_set(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn all_set(&self) -> bool {
        self.count_set() == self.len
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_and_get() {
        let mut b = Bitmap::with_capacity(10);
        for i in 0..10 {
            b.push(i % 3 != 0);
        }
        assert_eq!(b.len(), 10);
        assert_eq!(b.as_bytes().len(), 2);
        for i in 0..10 {
            assert_eq!(b.get(i), i % 3 != 0);
        }
        assert_eq!(b.count_set(), 6);
    }

    #[test]
    fn new_set_masks_tail() {
        let b = Bitmap::new_set(11);
        assert!(b.all_set());
        assert_eq!(b.as_bytes(), &[0xFF, 0x07]);
        assert!(Bitmap::from_bytes(vec![0xFF, 0x0F], 11).is_none());
        assert!(Bitmap::from_bytes(vec![0xFF, 0x07], 11).is_some());
    }
}
