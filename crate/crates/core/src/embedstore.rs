//! Binary store of per-layer span embeddings and layer pooling.
//!
//! Layout (little-endian):
//!
//! ```text
//! header:  b"LMSE" | version u16 | layer_count u32 | dim u32 | record_count u64
//!          | tag_len u16 | model_tag (UTF-8)
//! record:  key_len u16 | key (UTF-8) | layer_count * dim f32 (row-major, row 0 = INIT)
//! ```
//!
//! Keys are instance ids, or `gloss::<sense id>` for gloss-template records.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::profiles::SenseProfile;

pub const MAGIC: &[u8; 4] = b"LMSE";
pub const VERSION: u16 = 1;
pub const GLOSS_PREFIX: &str = "gloss::";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not an embedding store (bad magic)")]
    BadMagic,
    #[error("unsupported store version {0}")]
    UnsupportedVersion(u16),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("file truncated")]
    TruncatedFile,
    #[error("non-finite value in record {0}")]
    NonFinite(String),
    #[error("profile has {profile} layers but record has {record}")]
    LayerCountMismatch { profile: usize, record: usize },
    #[error("cannot average an empty list of vectors")]
    EmptyInput,
    #[error("missing record {0}")]
    MissingRecord(String),
}

fn eof_as_truncated(e: io::Error) -> StoreError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        StoreError::TruncatedFile
    } else {
        StoreError::Io(e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoreHeader {
    pub version: u16,
    /// Number of layers including the initialization layer.
    pub layer_count: u32,
    pub dim: u32,
    pub record_count: u64,
    pub model_tag: String,
}

impl StoreHeader {
    pub fn new(model_tag: impl Into<String>, layer_count: usize, dim: usize) -> Result<Self, StoreError> {
        if layer_count < 2 || dim < 1 {
            return Err(StoreError::ShapeMismatch(format!(
                "need at least 2 layers and 1 dimension, got {layer_count}x{dim}"
            )));
        }
        Ok(StoreHeader {
            version: VERSION,
            layer_count: layer_count as u32,
            dim: dim as u32,
            record_count: 0,
            model_tag: model_tag.into(),
        })
    }

    pub fn layers(&self) -> usize {
        self.layer_count as usize
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    /// Encoded size of the header in bytes.
    pub fn encoded_len(&self) -> usize {
        4 + 2 + 4 + 4 + 8 + 2 + self.model_tag.len()
    }

    fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.version.to_le_bytes())?;
        w.write_all(&self.layer_count.to_le_bytes())?;
        w.write_all(&self.dim.to_le_bytes())?;
        w.write_all(&self.record_count.to_le_bytes())?;
        write_str(w, &self.model_tag)
    }

    fn read_from(r: &mut impl Read) -> Result<Self, StoreError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(eof_as_truncated)?;
        if &magic != MAGIC {
            return Err(StoreError::BadMagic);
        }
        let version = read_u16(r)?;
        if version != VERSION {
            return Err(StoreError::UnsupportedVersion(version));
        }
        let layer_count = read_u32(r)?;
        let dim = read_u32(r)?;
        let record_count = read_u64(r)?;
        let model_tag = read_str(r)?;
        if layer_count < 2 || dim < 1 {
            return Err(StoreError::ShapeMismatch(format!("invalid header shape {layer_count}x{dim}")));
        }
        Ok(StoreHeader { version, layer_count, dim, record_count, model_tag })
    }
}

pub(crate) fn write_str(w: &mut impl Write, s: &str) -> io::Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "string longer than 65535 bytes"))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(s.as_bytes())
}

pub(crate) fn read_u16(r: &mut impl Read) -> Result<u16, StoreError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b).map_err(eof_as_truncated)?;
    Ok(u16::from_le_bytes(b))
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32, StoreError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(eof_as_truncated)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64(r: &mut impl Read) -> Result<u64, StoreError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(eof_as_truncated)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_str(r: &mut impl Read) -> Result<String, StoreError> {
    let len = read_u16(r)? as usize;
    let mut bytes = vec![0u8; len];
    r.read_exact(&mut bytes).map_err(eof_as_truncated)?;
    String::from_utf8(bytes).map_err(|e| StoreError::ShapeMismatch(format!("key is not UTF-8: {e}")))
}

/// One span's layer-by-dimension matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerRecord {
    pub key: String,
    layers: usize,
    dim: usize,
    data: Vec<f32>,
}

impl LayerRecord {
    pub fn new(key: impl Into<String>, layers: usize, dim: usize, data: Vec<f32>) -> Result<Self, StoreError> {
        let key = key.into();
        if data.len() != layers * dim {
            return Err(StoreError::ShapeMismatch(format!("record {key}: {} values for {layers}x{dim}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(StoreError::NonFinite(key));
        }
        Ok(LayerRecord { key, layers, dim, data })
    }

    /// Builds a record from rows (row 0 = INIT).
    pub fn from_rows(key: impl Into<String>, rows: &[Vec<f32>]) -> Result<Self, StoreError> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(StoreError::ShapeMismatch("ragged rows".into()));
        }
        Self::new(key, rows.len(), dim, rows.concat())
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, layer: usize) -> &[f32] {
        &self.data[layer * self.dim..(layer + 1) * self.dim]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Streaming writer; the record count is patched into the header on `finish`.
pub struct StoreWriter<W: Write + Seek> {
    inner: BufWriter<W>,
    header: StoreHeader,
}

impl StoreWriter<File> {
    pub fn create(path: impl AsRef<Path>, header: StoreHeader) -> Result<Self, StoreError> {
        Self::new(File::create(path)?, header)
    }
}

impl<W: Write + Seek> StoreWriter<W> {
    pub fn new(inner: W, mut header: StoreHeader) -> Result<Self, StoreError> {
        header.record_count = 0;
        let mut inner = BufWriter::new(inner);
        header.write_to(&mut inner)?;
        Ok(StoreWriter { inner, header })
    }

    pub fn write(&mut self, record: &LayerRecord) -> Result<(), StoreError> {
        if record.layers != self.header.layers() || record.dim != self.header.dim() {
            return Err(StoreError::ShapeMismatch(format!(
                "record {} is {}x{}, store is {}x{}",
                record.key, record.layers, record.dim, self.header.layer_count, self.header.dim
            )));
        }
        write_str(&mut self.inner, &record.key)?;
        let mut bytes = Vec::with_capacity(record.data.len() * 4);
        for v in &record.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        self.inner.write_all(&bytes)?;
        self.header.record_count += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<StoreHeader, StoreError> {
        self.inner.flush()?;
        let mut inner = self.inner.into_inner().map_err(|e| e.into_error())?;
        // record_count sits after magic, version, layer_count and dim
        inner.seek(SeekFrom::Start(4 + 2 + 4 + 4))?;
        inner.write_all(&self.header.record_count.to_le_bytes())?;
        inner.seek(SeekFrom::End(0))?;
        inner.flush()?;
        Ok(self.header)
    }
}

pub fn write_store<'a>(
    path: impl AsRef<Path>,
    header: StoreHeader,
    records: impl IntoIterator<Item = &'a LayerRecord>,
) -> Result<StoreHeader, StoreError> {
    let mut writer = StoreWriter::create(path, header)?;
    for record in records {
        writer.write(record)?;
    }
    writer.finish()
}

/// Sequential reader yielding records in write order.
pub struct StoreReader<R: Read> {
    inner: R,
    header: StoreHeader,
    remaining: u64,
}

impl StoreReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::new(BufReader::with_capacity(1 << 20, File::open(path)?))
    }
}

impl<R: Read> StoreReader<R> {
    pub fn new(mut inner: R) -> Result<Self, StoreError> {
        let header = StoreHeader::read_from(&mut inner)?;
        Ok(StoreReader { remaining: header.record_count, inner, header })
    }

    pub fn header(&self) -> &StoreHeader {
        &self.header
    }

    fn read_record(&mut self) -> Result<LayerRecord, StoreError> {
        let key = read_str(&mut self.inner)?;
        let n = self.header.layers() * self.header.dim();
        let mut bytes = vec![0u8; n * 4];
        self.inner.read_exact(&mut bytes).map_err(eof_as_truncated)?;
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        LayerRecord::new(key, self.header.layers(), self.header.dim(), data)
    }
}

impl<R: Read> Iterator for StoreReader<R> {
    type Item = Result<LayerRecord, StoreError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let record = self.read_record();
        if record.is_err() {
            self.remaining = 0;
        }
        Some(record)
    }
}

pub fn read_store(path: impl AsRef<Path>) -> Result<(StoreHeader, StoreReader<BufReader<File>>), StoreError> {
    let reader = StoreReader::open(path)?;
    Ok((reader.header().clone(), reader))
}

enum Backing {
    Memory { records: Vec<LayerRecord>, index: HashMap<String, usize> },
    Files(Vec<PathBuf>),
}

/// A store that is either held in memory or streamed from one or more files
/// sharing the same shape.
pub struct LayerStore {
    header: StoreHeader,
    backing: Backing,
}

impl LayerStore {
    pub fn in_memory(header: StoreHeader, records: Vec<LayerRecord>) -> Result<Self, StoreError> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.layers != header.layers() || r.dim != header.dim() {
                return Err(StoreError::ShapeMismatch(format!("record {} does not match store shape", r.key)));
            }
            index.insert(r.key.clone(), i);
        }
        let mut header = header;
        header.record_count = records.len() as u64;
        Ok(LayerStore { header, backing: Backing::Memory { records, index } })
    }

    /// Reads a whole store file into memory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let reader = StoreReader::open(path)?;
        let header = reader.header().clone();
        let records = reader.collect::<Result<Vec<_>, _>>()?;
        Self::in_memory(header, records)
    }

    /// Streams records from the given files on every scan.
    pub fn open(paths: &[PathBuf]) -> Result<Self, StoreError> {
        let mut header: Option<StoreHeader> = None;
        let mut total = 0;
        for p in paths {
            let h = StoreReader::open(p)?.header;
            total += h.record_count;
            if let Some(first) = &header {
                if first.layer_count != h.layer_count || first.dim != h.dim {
                    return Err(StoreError::ShapeMismatch(format!("{} differs in shape", p.display())));
                }
            } else {
                header = Some(h);
            }
        }
        let mut header = header.ok_or_else(|| StoreError::ShapeMismatch("no store files given".into()))?;
        header.record_count = total;
        Ok(LayerStore { header, backing: Backing::Files(paths.to_vec()) })
    }

    pub fn header(&self) -> &StoreHeader {
        &self.header
    }

    /// Visits every record in storage order.
    pub fn scan<E: From<StoreError>>(&self, mut f: impl FnMut(&LayerRecord) -> Result<(), E>) -> Result<(), E> {
        match &self.backing {
            Backing::Memory { records, .. } => records.iter().try_for_each(f),
            Backing::Files(paths) => {
                for p in paths {
                    for record in StoreReader::open(p)? {
                        f(&record?)?;
                    }
                }
                Ok(())
            }
        }
    }

    /// Pools every record accepted by `keep`.
    pub fn pool_where(
        &self,
        profile: &SenseProfile,
        mut keep: impl FnMut(&str) -> bool,
    ) -> Result<HashMap<String, Vec<f64>>, StoreError> {
        let mut out = HashMap::new();
        self.scan(|r: &LayerRecord| {
            if keep(&r.key) {
                out.insert(r.key.clone(), pool_layers(r, profile)?);
            }
            Ok::<_, StoreError>(())
        })?;
        Ok(out)
    }

    pub fn get(&self, key: &str) -> Option<&LayerRecord> {
        match &self.backing {
            Backing::Memory { records, index } => index.get(key).map(|&i| &records[i]),
            Backing::Files(_) => None,
        }
    }
}

/// Weighted sum of layer rows, accumulated in f64.
pub fn pool_layers(record: &LayerRecord, profile: &SenseProfile) -> Result<Vec<f64>, StoreError> {
    pool_weighted(record, &profile.weights)
}

pub fn pool_weighted(record: &LayerRecord, weights: &[f64]) -> Result<Vec<f64>, StoreError> {
    if weights.len() != record.layers {
        return Err(StoreError::LayerCountMismatch { profile: weights.len(), record: record.layers });
    }
    let mut out = vec![0.0f64; record.dim];
    for (l, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(record.row(l)) {
            *o += w * v as f64;
        }
    }
    Ok(out)
}

/// Elementwise mean.
pub fn average_vectors<V: AsRef<[f64]>>(vs: &[V]) -> Result<Vec<f64>, StoreError> {
    let first = vs.first().ok_or(StoreError::EmptyInput)?.as_ref();
    let mut out = vec![0.0; first.len()];
    for v in vs {
        let v = v.as_ref();
        if v.len() != out.len() {
            return Err(StoreError::ShapeMismatch(format!("dimension {} vs {}", v.len(), out.len())));
        }
        for (o, x) in out.iter_mut().zip(v) {
            *o += x;
        }
    }
    let n = vs.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{ProfileKind, SenseProfile};
    use std::io::Cursor;

    fn profile(weights: Vec<f64>) -> SenseProfile {
        SenseProfile { model_tag: "t".into(), kind: ProfileKind::Wsd, temperature: None, weights }
    }

    fn record() -> LayerRecord {
        LayerRecord::from_rows("d0.s0.t0", &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let header = StoreHeader::new("toy", 3, 4).unwrap();
        let data: Vec<f32> =
            vec![0.1, -2.5, 3.25e-8, 1e30, f32::MIN_POSITIVE, -0.0, 7.0, 8.0, 9.5, 1.0 / 3.0, 11.0, 12.0];
        let rec = LayerRecord::new("gloss::race%2:33:00::", 3, 4, data.clone()).unwrap();
        let mut buf = Cursor::new(Vec::new());
        let mut w = StoreWriter::new(&mut buf, header).unwrap();
        w.write(&rec).unwrap();
        let h = w.finish().unwrap();
        assert_eq!(h.record_count, 1);
        let mut reader = StoreReader::new(Cursor::new(buf.into_inner())).unwrap();
        assert_eq!(reader.header().record_count, 1);
        let back = reader.next().unwrap().unwrap();
        assert!(reader.next().is_none());
        assert_eq!(back.key, rec.key);
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.data()), bits(&data));
    }

    #[test]
    fn empty_store_is_header_only() {
        let header = StoreHeader::new("bert-large-cased", 25, 1024).unwrap();
        let expected = header.encoded_len();
        let mut buf = Cursor::new(Vec::new());
        StoreWriter::new(&mut buf, header).unwrap().finish().unwrap();
        let bytes = buf.into_inner();
        assert_eq!(bytes.len(), expected);
        assert_eq!(bytes.len(), 24 + "bert-large-cased".len());
        let mut r = StoreReader::new(bytes.as_slice()).unwrap();
        assert!(r.next().is_none());
    }

    #[test]
    fn truncation_detected() {
        let header = StoreHeader::new("toy", 3, 2).unwrap();
        let mut buf = Cursor::new(Vec::new());
        let mut w = StoreWriter::new(&mut buf, header).unwrap();
        w.write(&record()).unwrap();
        w.write(&LayerRecord::from_rows("b", &[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap()).unwrap();
        w.finish().unwrap();
        let bytes = buf.into_inner();
        let cut = &bytes[..bytes.len() - 5];
        let results: Vec<_> = StoreReader::new(cut).unwrap().collect();
        assert_eq!(results.len(), 2);
        assert!(results[0].is_ok());
        assert!(matches!(results[1], Err(StoreError::TruncatedFile)));
        assert!(matches!(StoreReader::new(&bytes[..10]), Err(StoreError::TruncatedFile)));
    }

    #[test]
    fn bad_magic() {
        assert!(matches!(StoreReader::new(&b"NOPE\x01\x00"[..]), Err(StoreError::BadMagic)));
    }

    #[test]
    fn writer_rejects_wrong_shape() {
        let mut buf = Cursor::new(Vec::new());
        let mut w = StoreWriter::new(&mut buf, StoreHeader::new("toy", 2, 2).unwrap()).unwrap();
        assert!(matches!(w.write(&record()), Err(StoreError::ShapeMismatch(_))));
        assert!(matches!(LayerRecord::new("x", 2, 2, vec![0.0; 3]), Err(StoreError::ShapeMismatch(_))));
        assert!(matches!(LayerRecord::new("x", 1, 2, vec![f32::NAN, 0.0]), Err(StoreError::NonFinite(_))));
    }

    #[test]
    fn weighted_pooling() {
        let r = record();
        assert_eq!(pool_layers(&r, &profile(vec![0.2, 0.3, 0.5])).unwrap(), vec![0.7, 0.8]);
        // one-hot on the second-to-last layer
        assert_eq!(pool_layers(&r, &profile(vec![0.0, 1.0, 0.0])).unwrap(), vec![0.0, 1.0]);
        let third = 1.0 / 3.0;
        let mean = pool_layers(&r, &profile(vec![third; 3])).unwrap();
        assert!((mean[0] - 2.0 / 3.0).abs() < 1e-15 && (mean[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            pool_layers(&r, &profile(vec![0.5, 0.5])),
            Err(StoreError::LayerCountMismatch { profile: 2, record: 3 })
        ));
    }

    #[test]
    fn averaging() {
        assert_eq!(average_vectors(&[vec![1.0, 3.0], vec![3.0, 5.0]]).unwrap(), vec![2.0, 4.0]);
        assert_eq!(average_vectors(&[vec![0.5, -1.0]]).unwrap(), vec![0.5, -1.0]);
        assert_eq!(average_vectors(&[vec![0.5, -1.0], vec![-0.5, 1.0]]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(average_vectors::<Vec<f64>>(&[]), Err(StoreError::EmptyInput)));
    }
}
