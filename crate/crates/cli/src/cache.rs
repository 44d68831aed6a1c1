//! On-disk cache of block-density eigensystems.
//!
//! One file per `(source fingerprint, n)`. Layout, all integers and floats little-endian:
//!
//! ```text
//! magic     8 bytes   "QSEIGEN\0"
//! version   u32
//! n         u64
//! dim       u64
//! source    32 bytes  SHA-256 of the canonical source JSON
//! values    dim × f64
//! vectors   dim × dim × (re f64, im f64), column-major
//! checksum  32 bytes  SHA-256 of everything above
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use qsource::{DensityMatrix, EigenSystem, SourceModel};
use qsource::num_complex::Complex64;
use sha2::{Digest, Sha256};

const MAGIC: &[u8; 8] = b"QSEIGEN\0";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 8 + 32;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug)]
pub enum CacheError {
    Io(io::Error),
    ChecksumMismatch,
    /// Intact file written for another source, block length or format version.
    Stale(String),
}

impl std::fmt::Display for CacheError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CacheError::Io(e) => write!(f, "cache i/o: {e}"),
            CacheError::ChecksumMismatch => f.write_str("cache checksum mismatch"),
            CacheError::Stale(why) => write!(f, "stale cache entry: {why}"),
        }
    }
}

impl std::error::Error for CacheError {}

impl From<io::Error> for CacheError {
    fn from(e: io::Error) -> Self {
        CacheError::Io(e)
    }
}

pub type Fingerprint = [u8; 32];

pub fn fingerprint(source: &SourceModel) -> Fingerprint {
    let json = source.to_json().expect("source models always serialize");
    Sha256::digest(json.as_bytes()).into()
}

pub fn encode(source: &Fingerprint, n: usize, eig: &EigenSystem) -> Vec<u8> {
    let dim = eig.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * dim + 16 * dim * dim + CHECKSUM_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(dim as u64).to_le_bytes());
    out.extend_from_slice(source);
    for v in &eig.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for z in eig.vectors.iter() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    let checksum = Sha256::digest(&out);
    out.extend_from_slice(&checksum);
    out
}

fn read_u64(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

fn read_f64(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

pub fn decode(bytes: &[u8], source: &Fingerprint, n: usize) -> Result<EigenSystem, CacheError> {
    if bytes.len() < HEADER_LEN + CHECKSUM_LEN {
        return Err(CacheError::ChecksumMismatch);
    }
    let (body, checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != checksum {
        return Err(CacheError::ChecksumMismatch);
    }
    if &body[..8] != MAGIC {
        return Err(CacheError::Stale("bad magic".into()));
    }
    let version = u32::from_le_bytes(body[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(CacheError::Stale(format!("format version {version}")));
    }
    if read_u64(body, 12) != n as u64 || &body[28..60] != source {
        return Err(CacheError::Stale("key does not match".into()));
    }
    let dim = read_u64(body, 20) as usize;
    let expected = dim
        .checked_mul(dim)
        .and_then(|dd| dd.checked_mul(16))
        .and_then(|v| v.checked_add(8 * dim + HEADER_LEN));
    if expected != Some(body.len()) {
        return Err(CacheError::Stale(format!("payload length for dim {dim}")));
    }
    let values = (0..dim).map(|k| read_f64(body, HEADER_LEN + 8 * k)).collect();
    let base = HEADER_LEN + 8 * dim;
    let entries: Vec<Complex64> = (0..dim * dim)
        .map(|k| Complex64::new(read_f64(body, base + 16 * k), read_f64(body, base + 16 * k + 8)))
        .collect();
    let vectors = qsource::CMatrix::from_vec(dim, dim, entries);
    Ok(EigenSystem { values, vectors })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Hit,
    Miss,
    /// A file was present but unusable; the spectrum was recomputed and the file replaced.
    Recomputed,
}

#[derive(Debug, Clone)]
pub struct EigenCache {
    dir: PathBuf,
    source: Fingerprint,
}

impl EigenCache {
    pub fn open(dir: &Path, source: &SourceModel) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            source: fingerprint(source),
        })
    }

    pub fn path(&self, n: usize) -> PathBuf {
        let hex: String = self.source[..16].iter().map(|b| format!("{b:02x}")).collect();
        self.dir.join(format!("{hex}-n{n}.eig"))
    }

    pub fn load(&self, n: usize) -> Result<Option<EigenSystem>, CacheError> {
        match fs::read(self.path(n)) {
            Ok(bytes) => decode(&bytes, &self.source, n).map(Some),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn store(&self, n: usize, eig: &EigenSystem) -> io::Result<()> {
        let path = self.path(n);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let mut file = fs::File::create(&tmp)?;
        file.write_all(&encode(&self.source, n, eig))?;
        file.sync_all()?;
        fs::rename(tmp, path)
    }

    /// Attach the cached spectrum to `d`, or compute and store it.
    pub fn fill(&self, d: &DensityMatrix) -> anyhow::Result<Lookup> {
        let n = d.n_sites();
        let status = match self.load(n) {
            Ok(Some(eig)) if eig.dim() == d.dim() => {
                d.attach_eigen(eig)?;
                return Ok(Lookup::Hit);
            }
            Ok(None) => Lookup::Miss,
            Ok(Some(_)) => Lookup::Recomputed,
            Err(CacheError::Io(e)) => return Err(e.into()),
            Err(e) => {
                eprintln!("warning: {} ({e}); recomputing", self.path(n).display());
                Lookup::Recomputed
            }
        };
        self.store(n, d.eigen()?.as_ref())?;
        Ok(status)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qsource::DEFAULT_SIZE_CAP;

    fn example_eigen(n: usize) -> (SourceModel, EigenSystem) {
        let s = SourceModel::example1();
        let d = s.density(n, DEFAULT_SIZE_CAP).unwrap();
        let eig = d.eigen().unwrap().as_ref().clone();
        (s, eig)
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let (s, eig) = example_eigen(4);
        let key = fingerprint(&s);
        let bytes = encode(&key, 4, &eig);
        let back = decode(&bytes, &key, 4).unwrap();
        assert!(back.values.iter().zip(&eig.values).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(back
            .vectors
            .iter()
            .zip(eig.vectors.iter())
            .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
        assert_eq!(encode(&key, 4, &back), bytes);
    }

    #[test]
    fn corruption_is_detected() {
        let (s, eig) = example_eigen(2);
        let key = fingerprint(&s);
        let mut bytes = encode(&key, 2, &eig);
        assert!(matches!(decode(&bytes[..bytes.len() - 5], &key, 2), Err(CacheError::ChecksumMismatch)));
        bytes[HEADER_LEN + 3] ^= 1;
        assert!(matches!(decode(&bytes, &key, 2), Err(CacheError::ChecksumMismatch)));
    }

    #[test]
    fn wrong_key_is_stale() {
        let (s, eig) = example_eigen(2);
        let bytes = encode(&fingerprint(&s), 2, &eig);
        assert!(matches!(decode(&bytes, &fingerprint(&s), 3), Err(CacheError::Stale(_))));
        let other = fingerprint(&SourceModel::maximally_mixed(3).unwrap());
        assert!(matches!(decode(&bytes, &other, 2), Err(CacheError::Stale(_))));
    }

    #[test]
    fn fingerprint_tracks_content() {
        assert_eq!(fingerprint(&SourceModel::example1()), fingerprint(&SourceModel::example1()));
        assert_ne!(
            fingerprint(&SourceModel::maximally_mixed(2).unwrap()),
            fingerprint(&SourceModel::maximally_mixed(3).unwrap())
        );
    }

    #[test]
    fn fill_recovers_from_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let s = SourceModel::example1();
        let cache = EigenCache::open(dir.path(), &s).unwrap();
        let d = s.density(3, DEFAULT_SIZE_CAP).unwrap();
        assert_eq!(cache.fill(&d).unwrap(), Lookup::Miss);

        let fresh = s.density(3, DEFAULT_SIZE_CAP).unwrap();
        assert_eq!(cache.fill(&fresh).unwrap(), Lookup::Hit);
        assert_eq!(*fresh.eigen().unwrap(), *d.eigen().unwrap());

        let bytes = fs::read(cache.path(3)).unwrap();
        fs::write(cache.path(3), &bytes[..bytes.len() / 2]).unwrap();
        let again = s.density(3, DEFAULT_SIZE_CAP).unwrap();
        assert_eq!(cache.fill(&again).unwrap(), Lookup::Recomputed);
        assert_eq!(fs::read(cache.path(3)).unwrap(), bytes);
    }
}
