//! Compact mutant lists: each mutant is a LEB128 varint node id followed by
//! one operator byte, tagged with the content hash of the program they were
//! generated from.

use base64::prelude::{Engine, BASE64_STANDARD};
use serde::{Deserialize, Serialize};

use super::{mutant_catalog, Mutant, MutationError, MutationOperator};
use crate::minilang::SourceProgram;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompactMutants {
    pub program_hash: String,
    pub count: u32,
    /// Base64 of the packed (node id, operator) pairs.
    pub data: String,
}

impl CompactMutants {
    pub fn encode(program: &SourceProgram, mutants: &[Mutant]) -> Self {
        let mut bytes = Vec::with_capacity(mutants.len() * 3);
        for m in mutants {
            write_varint(&mut bytes, m.node_id);
            bytes.push(m.operator.id());
        }
        CompactMutants {
            program_hash: program.content_hash().to_string(),
            count: mutants.len() as u32,
            data: BASE64_STANDARD.encode(bytes),
        }
    }

    /// The raw (node id, operator) pairs.
    pub fn pairs(&self) -> Result<Vec<(u32, MutationOperator)>, MutationError> {
        let bytes = BASE64_STANDARD
            .decode(&self.data)
            .map_err(|e| MutationError::Encoding(e.to_string()))?;
        let mut out = Vec::with_capacity(self.count as usize);
        let mut pos = 0;
        while pos < bytes.len() {
            let node = read_varint(&bytes, &mut pos)?;
            let op_byte = *bytes
                .get(pos)
                .ok_or_else(|| MutationError::Encoding("truncated mutant record".into()))?;
            pos += 1;
            let op = MutationOperator::from_id(op_byte)
                .ok_or_else(|| MutationError::Encoding(format!("bad operator byte {op_byte}")))?;
            out.push((node, op));
        }
        if out.len() != self.count as usize {
            return Err(MutationError::Encoding(format!(
                "expected {} mutants, found {}",
                self.count,
                out.len()
            )));
        }
        Ok(out)
    }

    /// Rebuild full mutants against `program`, which must be the exact
    /// program the list was encoded from.
    pub fn decode(&self, program: &SourceProgram) -> Result<Vec<Mutant>, MutationError> {
        if self.program_hash != program.content_hash() {
            return Err(MutationError::HashMismatch {
                expected: self.program_hash.clone(),
                actual: program.content_hash().to_string(),
            });
        }
        let pairs = self.pairs()?;
        let catalog = mutant_catalog(program);
        pairs
            .into_iter()
            .map(|(node, op)| {
                catalog
                    .binary_search_by_key(&(node, op), |m| (m.node_id, m.operator))
                    .map(|i| catalog[i].clone())
                    .map_err(|_| MutationError::StaleMutant {
                        mutant_id: u32::MAX,
                        node_id: node,
                        reason: format!("{op} does not apply to node"),
                    })
            })
            .collect()
    }
}

fn write_varint(out: &mut Vec<u8>, mut v: u32) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

fn read_varint(bytes: &[u8], pos: &mut usize) -> Result<u32, MutationError> {
    let mut v: u64 = 0;
    for shift in (0..35).step_by(7) {
        let b = *bytes
            .get(*pos)
            .ok_or_else(|| MutationError::Encoding("truncated varint".into()))?;
        *pos += 1;
        v |= u64::from(b & 0x7f) << shift;
        if b & 0x80 == 0 {
            return u32::try_from(v).map_err(|_| MutationError::Encoding("varint overflow".into()));
        }
    }
    Err(MutationError::Encoding("varint too long".into()))
}
