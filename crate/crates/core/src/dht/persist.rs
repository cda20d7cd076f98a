//! Node-local store file: `key(32) ∥ flags(1) ∥ len(4, BE) ∥ value`,
//! repeated.

use thiserror::Error;

use crate::crypto::Key256;

pub const FLAG_ENCRYPTED: u8 = 0x01;
pub const FLAG_RESTRICTED: u8 = 0x02;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PersistError {
    #[error("store file truncated at byte {0}")]
    Truncated(usize),
}

pub fn encode_records<'a>(records: impl IntoIterator<Item = (&'a Key256, u8, &'a [u8])>) -> Vec<u8> {
    let mut out = Vec::new();
    for (k, flags, v) in records {
        out.extend_from_slice(&k.0);
        out.push(flags);
        out.extend_from_slice(&(v.len() as u32).to_be_bytes());
        out.extend_from_slice(v);
    }
    out
}

pub fn decode_records(mut bytes: &[u8]) -> Result<Vec<(Key256, u8, Vec<u8>)>, PersistError> {
    let total = bytes.len();
    let mut out = Vec::new();
    while !bytes.is_empty() {
        let at = total - bytes.len();
        if bytes.len() < 37 {
            return Err(PersistError::Truncated(at));
        }
        let key = Key256(bytes[..32].try_into().unwrap());
        let flags = bytes[32];
        let len = u32::from_be_bytes(bytes[33..37].try_into().unwrap()) as usize;
        if bytes.len() < 37 + len {
            return Err(PersistError::Truncated(at));
        }
        out.push((key, flags, bytes[37..37 + len].to_vec()));
        bytes = &bytes[37 + len..];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let k = Key256([7; 32]);
        let enc = encode_records([(&k, FLAG_ENCRYPTED, &b"abc"[..])]);
        assert_eq!(enc.len(), 32 + 1 + 4 + 3);
        assert_eq!(&enc[32..37], &[1, 0, 0, 0, 3]);
        assert_eq!(decode_records(&enc).unwrap(), vec![(k, 1, b"abc".to_vec())]);
        assert_eq!(decode_records(&enc[..enc.len() - 1]), Err(PersistError::Truncated(0)));
        assert_eq!(decode_records(&[]).unwrap(), vec![]);
    }
}
