use std::collections::BTreeMap;
use std::io;
use std::path::PathBuf;

use parking_lot::Mutex;
use sha2::{Digest, Sha256};

use crate::value::DocRef;

/// Content-addressed blob storage keyed by SHA-256.
#[derive(Debug)]
pub enum DocumentStore {
    Memory(Mutex<BTreeMap<String, Vec<u8>>>),
    Dir(PathBuf),
}

pub fn digest(bytes: &[u8]) -> DocRef {
    DocRef::from_digest_hex(&hex::encode(Sha256::digest(bytes)))
}

impl DocumentStore {
    pub fn in_memory() -> DocumentStore {
        DocumentStore::Memory(Mutex::new(BTreeMap::new()))
    }

    pub fn dir(path: PathBuf) -> io::Result<DocumentStore> {
        std::fs::create_dir_all(&path)?;
        Ok(DocumentStore::Dir(path))
    }

    pub fn put(&self, bytes: &[u8]) -> io::Result<DocRef> {
        let r = digest(bytes);
        match self {
            DocumentStore::Memory(m) => {
                m.lock().entry(r.digest_hex().to_string()).or_insert_with(|| bytes.to_vec());
            }
            DocumentStore::Dir(dir) => {
                let path = dir.join(r.digest_hex());
                if !path.exists() {
                    let tmp = dir.join(format!("{}.tmp", r.digest_hex()));
                    std::fs::write(&tmp, bytes)?;
                    std::fs::rename(tmp, path)?;
                }
            }
        }
        Ok(r)
    }

    pub fn get(&self, r: &DocRef) -> Option<Vec<u8>> {
        match self {
            DocumentStore::Memory(m) => m.lock().get(r.digest_hex()).cloned(),
            DocumentStore::Dir(dir) => std::fs::read(dir.join(r.digest_hex())).ok(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_bytes_identical_reference() {
        let s = DocumentStore::in_memory();
        let a = s.put(b"hello").unwrap();
        let b = s.put(b"hello").unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.as_str(),
            "sha256:2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
        assert_eq!(s.get(&a).unwrap(), b"hello");
    }
}
