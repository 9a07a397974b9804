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

//! Wire frame: `u32 magic, u8 opcode, u32 seq, u32 src, u32 tag, u64 len`,
//! then `len` payload bytes. All integers little-endian.

use std::io::{Read, Write};

use crate::error::{CommError, Result};

pub const MAGIC: u32 = 0x4253_5046;
pub const HEADER_LEN: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Opcode {
    P2P = 0,
    AllToAll = 1,
    Gather = 2,
    AllGather = 3,
    Broadcast = 4,
    AllReduce = 5,
    Barrier = 6,
}

impl Opcode {
    pub fn from_u8(b: u8) -> Option<Opcode> {
        Some(match b {
            0 => Opcode::P2P,
            1 => Opcode::AllToAll,
            2 => Opcode::Gather,
            3 => Opcode::AllGather,
            4 => Opcode::Broadcast,
            5 => Opcode::AllReduce,
            6 => Opcode::Barrier,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Opcode::P2P => "p2p",
            Opcode::AllToAll => "all_to_all",
            Opcode::Gather => "gather",
            Opcode::AllGather => "allgather",
            Opcode::Broadcast => "broadcast",
            Opcode::AllReduce => "allreduce",
            Opcode::Barrier => "barrier",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub opcode: Opcode,
    pub seq: u32,
    pub src: u32,
    pub tag: u32,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn header(&self) -> [u8; HEADER_LEN] {
        let mut h = [0u8; HEADER_LEN];
        h[0..4].copy_from_slice(&MAGIC.to_le_bytes());
        h[4] = self.opcode as u8;
        h[5..9].copy_from_slice(&self.seq.to_le_bytes());
        h[9..13].copy_from_slice(&self.src.to_le_bytes());
        h[13..17].copy_from_slice(&self.tag.to_le_bytes());
        h[17..25].copy_from_slice(&(self.payload.len() as u64).to_le_bytes());
        h
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.header());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&self.header())?;
        w.write_all(&self.payload)?;
        w.flush()?;
        Ok(())
    }

    /// Reads one frame. `Ok(None)` means a clean end of stream before any
    /// header byte.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Option<Frame>> {
        let mut h = [0u8; HEADER_LEN];
        let mut filled = 0;
        while filled < HEADER_LEN {
            match r.read(&mut h[filled..]) {
                Ok(0) if filled == 0 => return Ok(None),
                Ok(0) => return Err(CommError::BadFrame("truncated header".into())),
                Ok(n) => filled += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        let (opcode, seq, src, tag, len) = parse_header(&h)?;
        let len =
            usize::try_from(len).map_err(|_| CommError::BadFrame("length overflow".into()))?;
        let mut payload = vec![0u8; len];
        r.read_exact(&mut payload)
            .map_err(|e| CommError::BadFrame(format!("truncated payload: {e}")))?;
        Ok(Some(Frame {
            opcode,
            seq,
            src,
            tag,
            payload,
        }))
    }

    pub fn decode(bytes: &[u8]) -> Result<Frame> {
        let mut cur = bytes;
        let f = Frame::read_from(&mut cur)?.ok_or_else(|| CommError::BadFrame("empty".into()))?;
        if !cur.is_empty() {
            return Err(CommError::BadFrame("trailing bytes".into()));
        }
        Ok(f)
    }
}

fn parse_header(h: &[u8; HEADER_LEN]) -> Result<(Opcode, u32, u32, u32, u64)> {
    let u32_at = |i: usize| u32::from_le_bytes(h[i..i + 4].try_into().unwrap());
    let magic = u32_at(0);
    if magic != MAGIC {
        return Err(CommError::BadFrame(format!("bad magic {magic:#010x}")));
    }
    let opcode =
        Opcode::from_u8(h[4]).ok_or_else(|| CommError::BadFrame(format!("opcode {}", h[4])))?;
    let len = u64::from_le_bytes(h[17..25].try_into().unwrap());
    Ok((opcode, u32_at(5), u32_at(9), u32_at(13), len))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_bit_exact() {
        let f = Frame {
            opcode: Opcode::Broadcast,
            seq: 0x0102_0304,
            src: 7,
            tag: 9,
            payload: vec![0xAB, 0xCD],
        };
        let b = f.encode();
        assert_eq!(
            b,
            vec![
                0x46, 0x50, 0x53, 0x42, 4, 4, 3, 2, 1, 7, 0, 0, 0, 9, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0,
                0, 0xAB, 0xCD
            ]
        );
        assert_eq!(Frame::decode(&b).unwrap(), f);
    }

    #[test]
    fn rejects_garbage() {
        let f = Frame {
            opcode: Opcode::P2P,
            seq: 0,
            src: 0,
            tag: 0,
            payload: vec![1, 2, 3],
        };
        let mut b = f.encode();
        assert!(Frame::decode(&b[..b.len() - 1]).is_err());
        assert!(Frame::decode(&b[..10]).is_err());
        b[4] = 42;
        assert!(Frame::decode(&b).is_err());
        b[4] = 0;
        b[0] = 0;
        assert!(Frame::decode(&b).is_err());
        assert_eq!(Frame::read_from(&mut &[][..]).unwrap(), None);
    }
}
