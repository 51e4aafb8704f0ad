//! Time-indexed archive of trained frames.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! header   magic "WSPLTARC" | u32 version | u32 manifest_len | u64 frame_count | manifest JSON
//! record   i64 t | K * P f32 parameters | u64 CRC-64/XZ of the preceding record bytes
//! ```
//!
//! Records follow the header back to back with a constant stride, so the
//! record of time `t` sits at `header_len + slot(t) * record_size`. The frame
//! count is rewritten only after a record is fully on disk; readers never see
//! a record that has not been committed.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crc::{Crc, CRC_64_XZ};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{params_per_gaussian, GaussianFrame};
use crate::geometry::Camera;
use crate::render::{rasterize, ImageBuffer};
use crate::{ply, sh};

pub const MAGIC: &[u8; 8] = b"WSPLTARC";
pub const VERSION: u32 = 1;
const FIXED_HEADER: usize = 8 + 4 + 4 + 8;
const COUNT_OFFSET: u64 = 16;
/// Largest manifest accepted when decoding, to bound allocations on bad input.
pub const MAX_MANIFEST_BYTES: usize = 16 << 20;

const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveManifest {
    /// Gaussians per frame.
    pub k: usize,
    pub sh_degree: usize,
    /// Time index of the first stored record.
    pub t0: i64,
    /// `+1` for forward chains, `-1` for backward chains.
    pub t_step: i64,
    pub precision: String,
    #[serde(default)]
    pub dataset_fingerprint: String,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl ArchiveManifest {
    pub fn new(k: usize, sh_degree: usize, t0: i64, t_step: i64) -> Self {
        Self {
            k,
            sh_degree,
            t0,
            t_step,
            precision: "float32".into(),
            dataset_fingerprint: String::new(),
            config: serde_json::Value::Null,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::format("manifest K must be positive"));
        }
        if self.sh_degree > sh::MAX_SH_DEGREE {
            return Err(Error::format(format!("manifest SH degree {} is unsupported", self.sh_degree)));
        }
        if self.t_step != 1 && self.t_step != -1 {
            return Err(Error::format("manifest t_step must be 1 or -1"));
        }
        if self.precision != "float32" {
            return Err(Error::format(format!("unsupported precision {:?}", self.precision)));
        }
        self.k
            .checked_mul(params_per_gaussian(self.sh_degree))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::format("manifest K is too large"))?;
        Ok(())
    }

    pub fn params_per_gaussian(&self) -> usize {
        params_per_gaussian(self.sh_degree)
    }

    /// Bytes of learned parameters per record.
    pub fn payload_size(&self) -> usize {
        self.k * self.params_per_gaussian() * 4
    }

    /// Bytes per record: time stamp, payload and checksum.
    pub fn record_size(&self) -> usize {
        8 + self.payload_size() + 8
    }

    /// Time index held by record `slot`.
    pub fn time_of_slot(&self, slot: u64) -> i64 {
        self.t0 + self.t_step * slot as i64
    }

    /// Record slot of time `t`, if it lies on this archive's chain side.
    pub fn slot_of(&self, t: i64) -> Option<u64> {
        let d = (t.checked_sub(self.t0)?).checked_mul(self.t_step)?;
        u64::try_from(d).ok()
    }
}

/// Parsed fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveHeader {
    pub manifest: ArchiveManifest,
    pub frame_count: u64,
    pub header_len: usize,
}

pub fn encode_header(manifest: &ArchiveManifest, frame_count: u64) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(manifest).map_err(|e| Error::format(format!("manifest: {e}")))?;
    let mut out = Vec::with_capacity(FIXED_HEADER + json.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&frame_count.to_le_bytes());
    out.extend_from_slice(&json);
    Ok(out)
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn read_u64(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

/// Length of the whole header, read from its fixed prefix.
pub fn header_len_from_prefix(prefix: &[u8]) -> Result<usize> {
    if prefix.len() < FIXED_HEADER {
        return Err(Error::format("archive header is truncated"));
    }
    if &prefix[..8] != MAGIC {
        return Err(Error::format("not an archive (bad magic)"));
    }
    let version = read_u32(prefix, 8);
    if version != VERSION {
        return Err(Error::format(format!("unsupported archive version {version}")));
    }
    let len = read_u32(prefix, 12) as usize;
    if len > MAX_MANIFEST_BYTES {
        return Err(Error::format(format!("manifest length {len} exceeds limit")));
    }
    Ok(FIXED_HEADER + len)
}

/// Decodes the header at the start of `bytes`.
pub fn decode_header(bytes: &[u8]) -> Result<ArchiveHeader> {
    let header_len = header_len_from_prefix(bytes)?;
    if bytes.len() < header_len {
        return Err(Error::format("archive manifest is truncated"));
    }
    let manifest: ArchiveManifest = serde_json::from_slice(&bytes[FIXED_HEADER..header_len])
        .map_err(|e| Error::format(format!("manifest: {e}")))?;
    manifest.validate()?;
    Ok(ArchiveHeader {
        manifest,
        frame_count: read_u64(bytes, COUNT_OFFSET as usize),
        header_len,
    })
}

pub fn encode_record(frame: &GaussianFrame, manifest: &ArchiveManifest) -> Result<Vec<u8>> {
    if frame.len() != manifest.k || frame.sh_degree != manifest.sh_degree {
        return Err(Error::invalid(format!(
            "frame has K={} degree {}, archive expects K={} degree {}",
            frame.len(),
            frame.sh_degree,
            manifest.k,
            manifest.sh_degree
        )));
    }
    let mut out = Vec::with_capacity(manifest.record_size());
    out.extend_from_slice(&frame.t.to_le_bytes());
    for v in frame.to_flat() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let crc = CRC64.checksum(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Decodes one record, verifying its checksum.
pub fn decode_record(bytes: &[u8], manifest: &ArchiveManifest) -> Result<GaussianFrame> {
    if bytes.len() != manifest.record_size() {
        return Err(Error::format(format!(
            "record is {} bytes, expected {}",
            bytes.len(),
            manifest.record_size()
        )));
    }
    let body = &bytes[..bytes.len() - 8];
    let stored = read_u64(bytes, body.len());
    if CRC64.checksum(body) != stored {
        return Err(Error::Integrity("record checksum mismatch".into()));
    }
    let t = i64::from_le_bytes(body[..8].try_into().expect("8 bytes"));
    let flat: Vec<f64> = body[8..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let mut frame = GaussianFrame::new(t, manifest.sh_degree, vec![crate::gaussian::Gaussian::zeros(manifest.sh_degree); manifest.k])?;
    frame.set_from_flat(&flat);
    Ok(frame)
}

/// Single writer appending frames in chain order.
pub struct ArchiveWriter {
    file: File,
    path: PathBuf,
    header: ArchiveHeader,
}

impl ArchiveWriter {
    pub fn create(path: impl AsRef<Path>, manifest: ArchiveManifest) -> Result<Self> {
        manifest.validate().map_err(|e| Error::invalid(e.to_string()))?;
        let path = path.as_ref().to_path_buf();
        let bytes = encode_header(&manifest, 0)?;
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        file.write_all(&bytes).map_err(|e| Error::io(&path, e))?;
        file.sync_data().map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            file,
            path,
            header: ArchiveHeader {
                manifest,
                frame_count: 0,
                header_len: bytes.len(),
            },
        })
    }

    /// Reopens an existing archive to continue its chain.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new().read(true).write(true).open(&path).map_err(|e| Error::io(&path, e))?;
        let header = read_header(&mut file, &path)?;
        Ok(Self { file, path, header })
    }

    pub fn manifest(&self) -> &ArchiveManifest {
        &self.header.manifest
    }

    pub fn len(&self) -> u64 {
        self.header.frame_count
    }

    pub fn is_empty(&self) -> bool {
        self.header.frame_count == 0
    }

    /// Time index the next appended frame must carry.
    pub fn next_t(&self) -> i64 {
        self.header.manifest.time_of_slot(self.header.frame_count)
    }

    pub fn append_frame(&mut self, frame: &GaussianFrame) -> Result<()> {
        if frame.t != self.next_t() {
            return Err(Error::invalid(format!("expected frame t={}, got t={}", self.next_t(), frame.t)));
        }
        let record = encode_record(frame, &self.header.manifest)?;
        let rs = record.len() as u64;
        let at = self.header.header_len as u64 + self.header.frame_count * rs;
        let p = &self.path;
        self.file.seek(SeekFrom::Start(at)).map_err(|e| Error::io(p, e))?;
        self.file.write_all(&record).map_err(|e| Error::io(p, e))?;
        self.file.set_len(at + rs).map_err(|e| Error::io(p, e))?;
        self.file.sync_data().map_err(|e| Error::io(p, e))?;
        let count = self.header.frame_count + 1;
        self.file.seek(SeekFrom::Start(COUNT_OFFSET)).map_err(|e| Error::io(p, e))?;
        self.file.write_all(&count.to_le_bytes()).map_err(|e| Error::io(p, e))?;
        self.file.sync_data().map_err(|e| Error::io(p, e))?;
        self.header.frame_count = count;
        Ok(())
    }
}

fn read_header(file: &mut File, path: &Path) -> Result<ArchiveHeader> {
    let mut prefix = [0u8; FIXED_HEADER];
    file.seek(SeekFrom::Start(0)).map_err(|e| Error::io(path, e))?;
    file.read_exact(&mut prefix)
        .map_err(|_| Error::format(format!("{}: archive header is truncated", path.display())))?;
    let len = header_len_from_prefix(&prefix)?;
    let mut bytes = prefix.to_vec();
    bytes.resize(len, 0);
    file.read_exact(&mut bytes[FIXED_HEADER..])
        .map_err(|_| Error::format(format!("{}: archive manifest is truncated", path.display())))?;
    decode_header(&bytes)
}

/// Read side of an archive with constant-time access to any stored time.
pub struct Archive {
    path: PathBuf,
    file: Mutex<File>,
    header: ArchiveHeader,
}

impl Archive {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let header = read_header(&mut file, &path)?;
        let size = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        let need = header.header_len as u64 + header.frame_count * header.manifest.record_size() as u64;
        if size < need {
            return Err(Error::format(format!(
                "{}: {} frames need {need} bytes, file has {size}",
                path.display(),
                header.frame_count
            )));
        }
        Ok(Self {
            path,
            file: Mutex::new(file),
            header,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn manifest(&self) -> &ArchiveManifest {
        &self.header.manifest
    }

    pub fn header_len(&self) -> usize {
        self.header.header_len
    }

    pub fn len(&self) -> u64 {
        self.header.frame_count
    }

    pub fn is_empty(&self) -> bool {
        self.header.frame_count == 0
    }

    /// Stored time indices in ascending order.
    pub fn times(&self) -> Vec<i64> {
        let mut ts: Vec<i64> = (0..self.len()).map(|s| self.manifest().time_of_slot(s)).collect();
        ts.sort_unstable();
        ts
    }

    pub fn file_size(&self) -> u64 {
        self.header.header_len as u64 + self.len() * self.manifest().record_size() as u64
    }

    pub fn load_frame(&self, t: i64) -> Result<GaussianFrame> {
        let m = self.manifest();
        let slot = m.slot_of(t).filter(|&s| s < self.len()).ok_or(Error::NotFound(format!(
            "t={t} is not stored (archive holds {} frames from t={})",
            self.len(),
            m.t0
        )))?;
        let rs = m.record_size();
        let mut buf = vec![0u8; rs];
        {
            let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
            f.seek(SeekFrom::Start(self.header.header_len as u64 + slot * rs as u64))
                .map_err(|e| Error::io(&self.path, e))?;
            f.read_exact(&mut buf).map_err(|e| Error::io(&self.path, e))?;
        }
        let frame = decode_record(&buf, m)?;
        if frame.t != t {
            return Err(Error::Integrity(format!("record in slot {slot} holds t={}, expected t={t}", frame.t)));
        }
        Ok(frame)
    }

    pub fn render_query(&self, t: i64, camera: &Camera) -> Result<ImageBuffer> {
        rasterize(&self.load_frame(t)?, camera)
    }

    pub fn export_frame_ply(&self, t: i64, path: impl AsRef<Path>) -> Result<()> {
        ply::write_ply_file(&self.load_frame(t)?, path)
    }
}
