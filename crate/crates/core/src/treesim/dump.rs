//! Binary tree dumps for cross-implementation golden tests.
//!
//! Format: little-endian u32 vertex count, then the parent array as
//! little-endian u32 with the root stored as `ROOT_SENTINEL`.

use super::sampler::PlaneTree;
use crate::error::Result;
use std::io::{Read, Write};

pub fn write_tree<W: Write>(mut w: W, tree: &PlaneTree) -> Result<()> {
    w.write_all(&(tree.parent.len() as u32).to_le_bytes())?;
    for &p in &tree.parent {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tree<R: Read>(mut r: R) -> Result<PlaneTree> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    let n = u32::from_le_bytes(buf) as usize;
    let mut parent = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        parent.push(u32::from_le_bytes(buf));
    }
    PlaneTree::from_parents(parent)
}
