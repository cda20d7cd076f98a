//! Text dump of the entry log.
//!
//! One entry per line, tab separated:
//! `height \t hex(key) \t base64(value) \t hex(author)`, each line ending in
//! `\n`. A file that does not end in a newline was cut short and is
//! rejected.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use thiserror::Error;

use super::log::{EntryLog, LedgerEntry};
use crate::crypto::{Key256, PublicKey};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DumpError {
    #[error("line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("dump is truncated (missing final newline)")]
    Truncated,
}

impl EntryLog {
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        for e in self.entries() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.height,
                e.key.to_hex(),
                STANDARD.encode(&e.value),
                e.author.to_hex()
            ));
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<EntryLog, DumpError> {
        if !text.is_empty() && !text.ends_with('\n') {
            return Err(DumpError::Truncated);
        }
        let mut log = EntryLog::default();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let corrupt = |reason: String| DumpError::Corrupt { line: lineno, reason };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(corrupt(format!("expected 4 fields, found {}", fields.len())));
            }
            let height: u64 = fields[0].parse().map_err(|_| corrupt(format!("bad height {:?}", fields[0])))?;
            if height < log.height() {
                return Err(corrupt(format!("height {height} goes backwards")));
            }
            let key = Key256::from_hex(fields[1]).map_err(|e| corrupt(format!("key: {e}")))?;
            let value = STANDARD.decode(fields[2]).map_err(|e| corrupt(format!("value: {e}")))?;
            let author = PublicKey::from_hex(fields[3]).map_err(|e| corrupt(format!("author: {e}")))?;
            log.append(LedgerEntry { key, value, height, author });
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{Keypair, Signer};
    use crate::ledger::{Ledger, Payload};

    #[test]
    fn dump_roundtrip_and_truncation() {
        let a = Keypair::from_seed([9; 32]);
        let mut l = Ledger::new(a.public_key(), &[]);
        for i in 0..3u8 {
            l.submit(&a, Payload::CommitmentPost { key: Key256::from_name("t"), value: vec![i, 0xff] })
                .unwrap();
        }
        let text = l.dump();
        let first = text.lines().next().unwrap();
        let parts: Vec<&str> = first.split('\t').collect();
        assert_eq!(parts[0], "1");
        assert_eq!(parts[1], Key256::from_name("t").to_hex());
        assert_eq!(parts[2], "AP8=");
        assert_eq!(parts[3], a.public_key().to_hex());

        let back = EntryLog::parse_dump(&text).unwrap();
        assert_eq!(back.entries(), l.log().entries());
        assert_eq!(back.history(&Key256::from_name("t")).len(), 3);

        assert_eq!(EntryLog::parse_dump(&text[..text.len() - 10]), Err(DumpError::Truncated));
        assert!(matches!(EntryLog::parse_dump("1\tzz\t\t00\n"), Err(DumpError::Corrupt { line: 1, .. })));
    }
}
