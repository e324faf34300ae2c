//! Record store: a key-value interface with staged writes and atomic
//! commit, backed either by memory or by a single append-only file.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub trait Storage: Send + Sync {
    /// Reads a key, seeing writes staged since the last commit.
    fn get(&self, key: &[u8]) -> Result<Option<Vec<u8>>>;
    /// Stages a write; it becomes durable at the next `commit`.
    fn put(&mut self, key: &[u8], value: &[u8]) -> Result<()>;
    /// All committed and staged entries whose key starts with `prefix`, in key order.
    fn scan(&self, prefix: &[u8]) -> Result<Vec<(Vec<u8>, Vec<u8>)>>;
    /// Makes staged writes durable as one unit. On failure they are
    /// discarded and the committed state is unchanged.
    fn commit(&mut self) -> Result<()>;
}

#[derive(Default)]
struct Tables {
    committed: BTreeMap<Vec<u8>, Vec<u8>>,
    staged: BTreeMap<Vec<u8>, Vec<u8>>,
}

impl Tables {
    fn get(&self, key: &[u8]) -> Option<Vec<u8>> {
        self.staged.get(key).or_else(|| self.committed.get(key)).cloned()
    }

    fn scan(&self, prefix: &[u8]) -> Vec<(Vec<u8>, Vec<u8>)> {
        let mut merged: BTreeMap<&[u8], &[u8]> = BTreeMap::new();
        for (k, v) in self.committed.range(prefix.to_vec()..).take_while(|(k, _)| k.starts_with(prefix)) {
            merged.insert(k, v);
        }
        for (k, v) in self.staged.range(prefix.to_vec()..).take_while(|(k, _)| k.starts_with(prefix)) {
            merged.insert(k, v);
        }
        merged.into_iter().map(|(k, v)| (k.to_vec(), v.to_vec())).collect()
    }
}

#[derive(Default)]
pub struct MemoryStorage {
    tables: Tables,
}

impl MemoryStorage {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Storage for MemoryStorage {
    fn get(&self, key: &[u8]) -> Result<Option<Vec<u8>>> {
        Ok(self.tables.get(key))
    }

    fn put(&mut self, key: &[u8], value: &[u8]) -> Result<()> {
        self.tables.staged.insert(key.to_vec(), value.to_vec());
        Ok(())
    }

    fn scan(&self, prefix: &[u8]) -> Result<Vec<(Vec<u8>, Vec<u8>)>> {
        Ok(self.tables.scan(prefix))
    }

    fn commit(&mut self) -> Result<()> {
        let staged = std::mem::take(&mut self.tables.staged);
        self.tables.committed.extend(staged);
        Ok(())
    }
}

const MAGIC: &[u8; 8] = b"NUGSTOR1";
const TAG_PUT: u8 = 1;
const TAG_COMMIT: u8 = 2;

/// Single-file store. Frames are `tag u8 | key_len u32 | val_len u32 |
/// key | value`; a commit frame closes a batch. On open, frames after the
/// last commit frame are discarded.
pub struct FileStorage {
    path: PathBuf,
    file: File,
    tables: Tables,
    live_bytes: u64,
    file_bytes: u64,
}

impl FileStorage {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(&path)?;
        let len = file.metadata()?.len();
        let mut tables = Tables::default();
        let mut end = MAGIC.len() as u64;
        if len == 0 {
            file.write_all(MAGIC)?;
            file.sync_data()?;
        } else {
            let mut reader = BufReader::new(&mut file);
            let mut magic = [0u8; 8];
            reader.read_exact(&mut magic).map_err(|_| Error::Storage(format!("{}: not a nugget store", path.display())))?;
            if &magic != MAGIC {
                return Err(Error::Storage(format!("{}: not a nugget store", path.display())));
            }
            let mut pending = Vec::new();
            let mut pos = end;
            while let Some((tag, key, value, size)) = read_frame(&mut reader)? {
                pos += size;
                match tag {
                    TAG_PUT => pending.push((key, value)),
                    TAG_COMMIT => {
                        tables.committed.extend(pending.drain(..));
                        end = pos;
                    }
                    _ => break,
                }
            }
            if end < len {
                log::warn!("{}: discarding {} bytes of uncommitted writes", path.display(), len - end);
                file.set_len(end)?;
            }
        }
        file.seek(SeekFrom::Start(end))?;
        let live_bytes = tables.committed.iter().map(|(k, v)| frame_len(k, v)).sum::<u64>() + MAGIC.len() as u64;
        let mut store = Self {
            path,
            file,
            tables,
            live_bytes,
            file_bytes: end,
        };
        if store.file_bytes > 2 * store.live_bytes + (1 << 20) {
            store.compact()?;
        }
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Size of the backing file in bytes.
    pub fn size_bytes(&self) -> u64 {
        self.file_bytes
    }

    /// Rewrites the file with only the live entries.
    pub fn compact(&mut self) -> Result<()> {
        let tmp = self.path.with_extension("compact");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            w.write_all(MAGIC)?;
            for (k, v) in &self.tables.committed {
                write_frame(&mut w, TAG_PUT, k, v)?;
            }
            write_frame(&mut w, TAG_COMMIT, &[], &[])?;
            w.flush()?;
            w.get_ref().sync_data()?;
        }
        std::fs::rename(&tmp, &self.path)?;
        self.file = OpenOptions::new().read(true).write(true).open(&self.path)?;
        self.file_bytes = self.file.seek(SeekFrom::End(0))?;
        self.live_bytes = self.file_bytes;
        Ok(())
    }

    fn append_staged(&mut self) -> Result<u64> {
        let mut buf = Vec::new();
        for (k, v) in &self.tables.staged {
            write_frame(&mut buf, TAG_PUT, k, v)?;
        }
        write_frame(&mut buf, TAG_COMMIT, &[], &[])?;
        self.file.write_all(&buf)?;
        self.file.sync_data()?;
        Ok(buf.len() as u64)
    }
}

fn frame_len(key: &[u8], value: &[u8]) -> u64 {
    9 + key.len() as u64 + value.len() as u64
}

fn write_frame(w: &mut impl Write, tag: u8, key: &[u8], value: &[u8]) -> Result<()> {
    w.write_all(&[tag])?;
    w.write_all(&(key.len() as u32).to_le_bytes())?;
    w.write_all(&(value.len() as u32).to_le_bytes())?;
    w.write_all(key)?;
    w.write_all(value)?;
    Ok(())
}

type Frame = (u8, Vec<u8>, Vec<u8>, u64);

fn read_frame(r: &mut impl Read) -> Result<Option<Frame>> {
    let mut head = [0u8; 9];
    if read_full(r, &mut head)? < head.len() {
        return Ok(None);
    }
    let klen = u32::from_le_bytes(head[1..5].try_into().expect("4 bytes")) as usize;
    let vlen = u32::from_le_bytes(head[5..9].try_into().expect("4 bytes")) as usize;
    let mut key = vec![0u8; klen];
    let mut value = vec![0u8; vlen];
    if read_full(r, &mut key)? < klen || read_full(r, &mut value)? < vlen {
        return Ok(None);
    }
    let size = frame_len(&key, &value);
    Ok(Some((head[0], key, value, size)))
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..])? {
            0 => break,
            k => n += k,
        }
    }
    Ok(n)
}

impl Storage for FileStorage {
    fn get(&self, key: &[u8]) -> Result<Option<Vec<u8>>> {
        Ok(self.tables.get(key))
    }

    fn put(&mut self, key: &[u8], value: &[u8]) -> Result<()> {
        self.tables.staged.insert(key.to_vec(), value.to_vec());
        Ok(())
    }

    fn scan(&self, prefix: &[u8]) -> Result<Vec<(Vec<u8>, Vec<u8>)>> {
        Ok(self.tables.scan(prefix))
    }

    fn commit(&mut self) -> Result<()> {
        if self.tables.staged.is_empty() {
            return Ok(());
        }
        match self.append_staged() {
            Ok(written) => {
                self.file_bytes += written;
                let staged = std::mem::take(&mut self.tables.staged);
                for (k, v) in staged {
                    let added = frame_len(&k, &v);
                    if let Some(old) = self.tables.committed.insert(k.clone(), v) {
                        self.live_bytes -= frame_len(&k, &old);
                    }
                    self.live_bytes += added;
                }
                Ok(())
            }
            Err(e) => {
                self.tables.staged.clear();
                // drop whatever part of the batch reached the file
                let _ = self.file.set_len(self.file_bytes);
                let _ = self.file.seek(SeekFrom::Start(self.file_bytes));
                Err(Error::Storage(format!("commit failed: {e}")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memory_staging_and_scan() {
        let mut s = MemoryStorage::new();
        s.put(b"n/1", b"a").unwrap();
        s.put(b"d/1", b"b").unwrap();
        assert_eq!(s.get(b"n/1").unwrap().as_deref(), Some(&b"a"[..]));
        s.commit().unwrap();
        s.put(b"n/2", b"c").unwrap();
        let keys: Vec<_> = s.scan(b"n/").unwrap().into_iter().map(|(k, _)| k).collect();
        assert_eq!(keys, vec![b"n/1".to_vec(), b"n/2".to_vec()]);
    }

    #[test]
    fn file_round_trip_and_uncommitted_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.db");
        {
            let mut s = FileStorage::open(&path).unwrap();
            s.put(b"n/1", b"one").unwrap();
            s.commit().unwrap();
            s.put(b"n/1", b"uno").unwrap();
            s.put(b"n/2", b"two").unwrap();
            s.commit().unwrap();
            s.put(b"n/3", b"lost").unwrap();
        }
        // simulate a torn write after the last commit
        {
            let mut f = OpenOptions::new().append(true).open(&path).unwrap();
            write_frame(&mut f, TAG_PUT, b"n/4", b"torn").unwrap();
            f.write_all(&[TAG_PUT, 9, 0]).unwrap();
        }
        let s = FileStorage::open(&path).unwrap();
        assert_eq!(s.get(b"n/1").unwrap().as_deref(), Some(&b"uno"[..]));
        assert_eq!(s.get(b"n/2").unwrap().as_deref(), Some(&b"two"[..]));
        assert_eq!(s.get(b"n/3").unwrap(), None);
        assert_eq!(s.get(b"n/4").unwrap(), None);
    }

    #[test]
    fn compaction_keeps_live_entries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.db");
        let mut s = FileStorage::open(&path).unwrap();
        for i in 0..50u8 {
            s.put(b"k", &[i; 100]).unwrap();
            s.commit().unwrap();
        }
        let before = s.size_bytes();
        s.compact().unwrap();
        assert!(s.size_bytes() < before);
        drop(s);
        let s = FileStorage::open(&path).unwrap();
        assert_eq!(s.get(b"k").unwrap(), Some(vec![49; 100]));
    }

    #[test]
    fn rejects_foreign_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x");
        std::fs::write(&path, b"hello world, not a store").unwrap();
        assert!(matches!(FileStorage::open(&path), Err(Error::Storage(_))));
    }
}
