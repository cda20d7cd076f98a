//! Storing and loading data under a shared identity.
//!
//! The ledger holds the read predicate at `a_x = H(addr ∥ x)`; the DHT holds
//! the data. Without a read predicate the data is owner-only and sealed
//! under the writer's storage key before it leaves the client. With a read
//! predicate it is served to whoever satisfies it.

use crate::crypto::{self, hash, Key256, Keypair, Signer};
use crate::identity::{check_permission, lookup_acl, Predicate};
use crate::ledger::{Ledger, Payload};

use super::persist::FLAG_ENCRYPTED;
use super::DhtNetwork;

pub fn record_address(addr: &Key256, x: &[u8]) -> Key256 {
    hash(&[&addr.0, x])
}

/// Write permission is the writer's own ACL policy. Returns `None` (and
/// writes nothing) on denial or if either half of the write fails.
pub fn protocol_store(
    writer: &Keypair,
    addr: &Key256,
    x: &[u8],
    q_read: Option<&Predicate>,
    ledger: &mut Ledger,
    dht: &mut DhtNetwork,
) -> Option<Key256> {
    let pk = writer.public_key();
    let q_store = lookup_acl(addr, ledger)?.policy(&pk)?.clone();
    if !check_permission(&pk, addr, &q_store, ledger) {
        return None;
    }
    let a_x = record_address(addr, x);
    let (bytes, flags, q) = match q_read {
        None => {
            let nonce: [u8; 12] = a_x.0[..12].try_into().unwrap();
            (crypto::seal(&writer.storage_key(), nonce, x), FLAG_ENCRYPTED, Predicate::Keys(vec![pk]))
        }
        Some(q) => (x.to_vec(), 0, q.clone()),
    };
    dht.store(a_x, &bytes, flags).ok()?;
    if ledger.submit(writer, Payload::Put { key: a_x, value: q.to_string().into_bytes() }).is_err() {
        dht.rollback(&a_x);
        return None;
    }
    Some(a_x)
}

/// Returns the data iff the ledger predicate at `a_x` admits `reader`.
pub fn protocol_load(
    reader: &Keypair,
    addr: &Key256,
    a_x: &Key256,
    ledger: &Ledger,
    dht: &mut DhtNetwork,
) -> Option<Vec<u8>> {
    let q: Predicate = std::str::from_utf8(ledger.get(a_x)?).ok()?.parse().ok()?;
    if !check_permission(&reader.public_key(), addr, &q, ledger) {
        return None;
    }
    let (rec, _) = dht.lookup_record(a_x).ok()?;
    if rec.flags & super::FLAG_RESTRICTED != 0 {
        return None;
    }
    if rec.flags & FLAG_ENCRYPTED != 0 {
        crypto::open(&reader.storage_key(), &rec.value).ok()
    } else {
        Some(rec.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dht::DhtConfig;
    use crate::identity::gen_shared_identity;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn setup() -> (Ledger, DhtNetwork, crate::identity::SharedIdentity, Vec<Keypair>, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let mut ledger = Ledger::new(Keypair::from_seed([0xee; 32]).public_key(), &[]);
        let dht = DhtNetwork::random(16, DhtConfig::default(), &mut rng);
        let (id, keys) = gen_shared_identity(&[Predicate::Owner, Predicate::Owner], &mut ledger, &mut rng).unwrap();
        (ledger, dht, id, keys, rng)
    }

    fn contains(hay: &[u8], needle: &[u8]) -> bool {
        hay.windows(needle.len()).any(|w| w == needle)
    }

    #[test]
    fn key_list_round_trip() {
        let (mut ledger, mut dht, id, keys, mut rng) = setup();
        let reader = Keypair::generate(&mut rng);
        let outsider = Keypair::generate(&mut rng);
        let q = Predicate::Keys(vec![reader.public_key()]);
        let a = protocol_store(&keys[0], &id.addr, b"payload", Some(&q), &mut ledger, &mut dht).unwrap();
        assert_eq!(a, record_address(&id.addr, b"payload"));
        assert_eq!(protocol_load(&reader, &id.addr, &a, &ledger, &mut dht).unwrap(), b"payload");
        assert_eq!(protocol_load(&outsider, &id.addr, &a, &ledger, &mut dht), None);
        // Same data again: same address.
        assert_eq!(protocol_store(&keys[0], &id.addr, b"payload", Some(&q), &mut ledger, &mut dht), Some(a));
        // No predicate on the ledger: closed.
        assert_eq!(protocol_load(&reader, &id.addr, &Key256::from_name("nothing"), &ledger, &mut dht), None);
    }

    #[test]
    fn owner_only_is_sealed() {
        let (mut ledger, mut dht, id, keys, _) = setup();
        let secret = b"owner-only-secret-bytes";
        let a = protocol_store(&keys[0], &id.addr, secret, None, &mut ledger, &mut dht).unwrap();
        assert_eq!(protocol_load(&keys[0], &id.addr, &a, &ledger, &mut dht).unwrap(), secret);
        assert_eq!(protocol_load(&keys[1], &id.addr, &a, &ledger, &mut dht), None);
        for i in 0..dht.len() {
            assert!(!contains(dht.node(i).disk(), secret));
            assert!(dht.node(i).records().values().all(|r| !contains(&r.value, secret)));
        }
    }

    #[test]
    fn denied_store_writes_nothing() {
        let (mut ledger, mut dht, id, _, mut rng) = setup();
        let stranger = Keypair::generate(&mut rng);
        let h = ledger.height();
        assert_eq!(protocol_store(&stranger, &id.addr, b"x", None, &mut ledger, &mut dht), None);
        assert_eq!(ledger.height(), h);
        assert!(dht.holders(&record_address(&id.addr, b"x")).is_empty());
    }

    #[test]
    fn store_is_atomic() {
        let (mut ledger, mut dht, id, keys, _) = setup();
        // Party 1 takes the address first; party 2's ledger write must fail
        // and its DHT write must be rolled back.
        let a = record_address(&id.addr, b"dup");
        ledger.submit(&keys[0], Payload::Put { key: a, value: b"(any)".to_vec() }).unwrap();
        assert_eq!(protocol_store(&keys[1], &id.addr, b"dup", None, &mut ledger, &mut dht), None);
        assert!(dht.holders(&a).is_empty());
    }
}
