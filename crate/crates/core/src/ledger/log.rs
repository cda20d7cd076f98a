use std::collections::HashMap;

use crate::crypto::{Key256, PublicKey};

/// One record on the bulletin board.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    pub key: Key256,
    pub value: Vec<u8>,
    pub height: u64,
    pub author: PublicKey,
}

impl LedgerEntry {
    pub(crate) fn encode_into(&self, buf: &mut Vec<u8>) {
        buf.extend_from_slice(&self.height.to_be_bytes());
        buf.extend_from_slice(&self.key.0);
        buf.extend_from_slice(&(self.value.len() as u32).to_be_bytes());
        buf.extend_from_slice(&self.value);
        buf.extend_from_slice(&self.author.0);
    }
}

/// Append-only entry history with a per-key index.
///
/// This is all an offline auditor needs; it can be rebuilt from a ledger
/// dump without any transactions or signatures.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntryLog {
    entries: Vec<LedgerEntry>,
    index: HashMap<Key256, Vec<usize>>,
}

impl EntryLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    /// Height of the newest entry.
    pub fn height(&self) -> u64 {
        self.entries.last().map(|e| e.height).unwrap_or(0)
    }

    /// Heights must be non-decreasing.
    pub(crate) fn append(&mut self, entry: LedgerEntry) {
        debug_assert!(entry.height >= self.height());
        self.index.entry(entry.key).or_default().push(self.entries.len());
        self.entries.push(entry);
    }

    pub fn get(&self, key: &Key256) -> Option<&[u8]> {
        self.latest(key).map(|e| e.value.as_slice())
    }

    pub fn latest(&self, key: &Key256) -> Option<&LedgerEntry> {
        self.index.get(key)?.last().map(|&i| &self.entries[i])
    }

    /// Value of the newest entry for `key` with height `<= height`.
    pub fn get_at(&self, key: &Key256, height: u64) -> Option<&[u8]> {
        let positions = self.index.get(key)?;
        let cut = positions.partition_point(|&i| self.entries[i].height <= height);
        cut.checked_sub(1).map(|k| self.entries[positions[k]].value.as_slice())
    }

    /// Every entry ever written under `key`, oldest first.
    pub fn history(&self, key: &Key256) -> Vec<&LedgerEntry> {
        self.index
            .get(key)
            .map(|v| v.iter().map(|&i| &self.entries[i]).collect())
            .unwrap_or_default()
    }

    pub(crate) fn flip_byte(&mut self, entry_index: usize, byte: usize) {
        let Some(e) = self.entries.get_mut(entry_index) else {
            return;
        };
        let klen = e.key.0.len();
        let vlen = e.value.len();
        if byte < klen {
            e.key.0[byte] ^= 1;
        } else if byte < klen + vlen {
            e.value[byte - klen] ^= 1;
        } else {
            let b = (byte - klen - vlen) % 32;
            e.author.0[b] ^= 1;
        }
    }
}
