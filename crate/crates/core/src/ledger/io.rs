//! Line-delimited JSON chain files: one block per line, fields in the order
//! `index, prev_digest, timestamp, transactions, digest`, byte fields hex.

use std::io::{BufRead, Write};

use super::{Block, Chain, LedgerError};

pub fn write_chain<W: Write>(chain: &Chain, out: &mut W) -> Result<(), LedgerError> {
    for block in chain.blocks() {
        serde_json::to_writer(&mut *out, block).map_err(|e| LedgerError::Format {
            line: block.index as usize + 1,
            message: e.to_string(),
        })?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads blocks without validating them.
pub fn read_blocks<R: BufRead>(input: R) -> Result<Vec<Block>, LedgerError> {
    let mut blocks = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let block = serde_json::from_str(&line).map_err(|e| LedgerError::Format {
            line: i + 1,
            message: e.to_string(),
        })?;
        blocks.push(block);
    }
    Ok(blocks)
}

/// Reads and replays a chain file, re-validating every block.
pub fn read_chain<R: BufRead>(input: R) -> Result<Chain, LedgerError> {
    Chain::from_blocks(read_blocks(input)?)
}
