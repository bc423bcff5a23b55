//! Transactional storage for agent records on top of `redb`.

use std::path::Path;

use redb::{
    backends::InMemoryBackend, Database, MultimapTableDefinition, ReadableMultimapTable, ReadableTable,
    TableDefinition, WriteTransaction,
};
use thiserror::Error;

const AGENTS: TableDefinition<&str, &[u8]> = TableDefinition::new("agents");
const NAME_INDEX: MultimapTableDefinition<&str, &str> = MultimapTableDefinition::new("agents_by_name");
const CHALLENGES: TableDefinition<(&str, u64), &[u8]> = TableDefinition::new("challenges");
const META: TableDefinition<&str, &[u8]> = TableDefinition::new("meta");

pub const STORE_FILE: &str = "registry.redb";

#[derive(Debug, Error)]
#[error("storage failure: {0}")]
pub struct StoreError(pub String);

fn st<E: Into<redb::Error>>(e: E) -> StoreError {
    StoreError(e.into().to_string())
}

/// Agent records keyed by UUID with a secondary index on the lookup
/// four-tuple, plus challenge history and registry metadata.
pub struct Store {
    db: Database,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Store")
    }
}

impl Store {
    /// Opens `dir/registry.redb`, creating the directory and file if needed.
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir).map_err(|e| StoreError(e.to_string()))?;
        let db = Database::create(dir.join(STORE_FILE)).map_err(st)?;
        Store::init(db)
    }

    pub fn in_memory() -> Result<Self, StoreError> {
        let db = Database::builder()
            .create_with_backend(InMemoryBackend::new())
            .map_err(st)?;
        Store::init(db)
    }

    fn init(db: Database) -> Result<Self, StoreError> {
        let tx = db.begin_write().map_err(st)?;
        tx.open_table(AGENTS).map_err(st)?;
        tx.open_multimap_table(NAME_INDEX).map_err(st)?;
        tx.open_table(CHALLENGES).map_err(st)?;
        tx.open_table(META).map_err(st)?;
        tx.commit().map_err(st)?;
        Ok(Store { db })
    }

    pub fn get(&self, uuid: &str) -> Result<Option<Vec<u8>>, StoreError> {
        let tx = self.db.begin_read().map_err(st)?;
        let t = tx.open_table(AGENTS).map_err(st)?;
        Ok(t.get(uuid).map_err(st)?.map(|v| v.value().to_vec()))
    }

    pub fn ids_for(&self, index_key: &str) -> Result<Vec<String>, StoreError> {
        let tx = self.db.begin_read().map_err(st)?;
        let t = tx.open_multimap_table(NAME_INDEX).map_err(st)?;
        let mut out = Vec::new();
        for v in t.get(index_key).map_err(st)? {
            out.push(v.map_err(st)?.value().to_string());
        }
        Ok(out)
    }

    pub fn all_ids(&self) -> Result<Vec<String>, StoreError> {
        let tx = self.db.begin_read().map_err(st)?;
        let t = tx.open_table(AGENTS).map_err(st)?;
        let mut out = Vec::new();
        for item in t.iter().map_err(st)? {
            out.push(item.map_err(st)?.0.value().to_string());
        }
        Ok(out)
    }

    pub fn meta(&self, key: &str) -> Result<Option<Vec<u8>>, StoreError> {
        let tx = self.db.begin_read().map_err(st)?;
        let t = tx.open_table(META).map_err(st)?;
        Ok(t.get(key).map_err(st)?.map(|v| v.value().to_vec()))
    }

    /// Challenge outcomes for `uuid`, oldest first.
    pub fn challenges(&self, uuid: &str) -> Result<Vec<Vec<u8>>, StoreError> {
        let tx = self.db.begin_read().map_err(st)?;
        let t = tx.open_table(CHALLENGES).map_err(st)?;
        let mut out = Vec::new();
        for item in t.range((uuid, 0)..=(uuid, u64::MAX)).map_err(st)? {
            out.push(item.map_err(st)?.1.value().to_vec());
        }
        Ok(out)
    }

    /// Runs `f` inside one write transaction, committing only on success.
    pub fn write<T, E>(&self, f: impl FnOnce(&mut StoreTx<'_>) -> Result<T, E>) -> Result<T, E>
    where
        E: From<StoreError>,
    {
        let tx = self.db.begin_write().map_err(st)?;
        let out = f(&mut StoreTx { tx: &tx })?;
        tx.commit().map_err(st)?;
        Ok(out)
    }

    /// Overwrites stored record bytes without touching the index or the
    /// audit trail, as an attacker with disk access would.
    pub fn overwrite_raw(&self, uuid: &str, bytes: &[u8]) -> Result<(), StoreError> {
        self.write(|tx| {
            let mut t = tx.tx.open_table(AGENTS).map_err(st)?;
            t.insert(uuid, bytes).map_err(st)?;
            Ok::<_, StoreError>(())
        })
    }
}

/// Operations available inside [`Store::write`].
pub struct StoreTx<'a> {
    tx: &'a WriteTransaction,
}

impl StoreTx<'_> {
    pub fn get(&self, uuid: &str) -> Result<Option<Vec<u8>>, StoreError> {
        let t = self.tx.open_table(AGENTS).map_err(st)?;
        let v = t.get(uuid).map_err(st)?.map(|v| v.value().to_vec());
        Ok(v)
    }

    pub fn ids_for(&self, index_key: &str) -> Result<Vec<String>, StoreError> {
        let t = self.tx.open_multimap_table(NAME_INDEX).map_err(st)?;
        let mut out = Vec::new();
        for v in t.get(index_key).map_err(st)? {
            out.push(v.map_err(st)?.value().to_string());
        }
        Ok(out)
    }

    pub fn put(&mut self, uuid: &str, index_key: &str, bytes: &[u8]) -> Result<(), StoreError> {
        self.tx
            .open_table(AGENTS)
            .map_err(st)?
            .insert(uuid, bytes)
            .map_err(st)?;
        self.tx
            .open_multimap_table(NAME_INDEX)
            .map_err(st)?
            .insert(index_key, uuid)
            .map_err(st)?;
        Ok(())
    }

    pub fn put_meta(&mut self, key: &str, bytes: &[u8]) -> Result<(), StoreError> {
        self.tx.open_table(META).map_err(st)?.insert(key, bytes).map_err(st)?;
        Ok(())
    }

    /// Appends to the challenge history and returns the entry's sequence.
    pub fn append_challenge(&mut self, uuid: &str, bytes: &[u8]) -> Result<u64, StoreError> {
        let mut t = self.tx.open_table(CHALLENGES).map_err(st)?;
        let next = t
            .range((uuid, 0)..=(uuid, u64::MAX))
            .map_err(st)?
            .next_back()
            .transpose()
            .map_err(st)?
            .map(|(k, _)| k.value().1 + 1)
            .unwrap_or(0);
        t.insert((uuid, next), bytes).map_err(st)?;
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_get_index() {
        let s = Store::in_memory().unwrap();
        s.write(|tx| {
            tx.put("u1", "mcp://a.b.c", b"one")?;
            tx.put("u2", "mcp://a.b.c", b"two")?;
            tx.put("u3", "a2a://x.y.z", b"three")
        })
        .unwrap();
        assert_eq!(s.get("u2").unwrap().as_deref(), Some(&b"two"[..]));
        let mut ids = s.ids_for("mcp://a.b.c").unwrap();
        ids.sort();
        assert_eq!(ids, vec!["u1", "u2"]);
        assert!(s.ids_for("acp://n.o.p").unwrap().is_empty());
        assert_eq!(s.all_ids().unwrap().len(), 3);
    }

    #[test]
    fn failed_write_rolls_back() {
        let s = Store::in_memory().unwrap();
        let r: Result<(), StoreError> = s.write(|tx| {
            tx.put("u1", "k", b"v")?;
            Err(StoreError("boom".into()))
        });
        assert!(r.is_err());
        assert_eq!(s.get("u1").unwrap(), None);
    }

    #[test]
    fn challenge_history_appends_in_order() {
        let s = Store::in_memory().unwrap();
        for i in 0..3u8 {
            let seq = s.write(|tx| tx.append_challenge("u", &[i])).unwrap();
            assert_eq!(seq, u64::from(i));
        }
        s.write(|tx| tx.append_challenge("v", b"x")).unwrap();
        assert_eq!(s.challenges("u").unwrap(), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn persists_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        {
            let s = Store::open(dir.path()).unwrap();
            s.write(|tx| tx.put_meta("k", b"v")).unwrap();
        }
        let s = Store::open(dir.path()).unwrap();
        assert_eq!(s.meta("k").unwrap().as_deref(), Some(&b"v"[..]));
    }
}
