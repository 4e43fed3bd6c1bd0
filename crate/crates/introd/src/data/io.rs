//! Versioned binary container for datasets.
//!
//! Layout (all integers little-endian, canonical field order so checksums
//! are stable): magic `IDSB`, format version, split tag, the full
//! `BiasConfig` echo, sample count, then per-sample records.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{BiasConfig, Dataset, Preset, Sample, Split};
use crate::error::{Error, Result};
use crate::num::ProbVector;

pub const DATASET_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"IDSB";

pub(crate) struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        ByteWriter { buf: Vec::new() }
    }

    pub fn bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn put_raw(&mut self, raw: &[u8]) {
        self.buf.extend_from_slice(raw);
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f64_slice(&mut self, vs: &[f64]) {
        self.put_u64(vs.len() as u64);
        for &v in vs {
            self.put_f64(v);
        }
    }
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format {
                offset: self.pos as u64,
                reason: format!("truncated while reading {what}"),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != magic {
            return Err(Error::Format {
                offset: 0,
                reason: format!("bad magic {got:?}"),
            });
        }
        Ok(())
    }

    pub fn get_u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn get_u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub fn get_u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn get_usize(&mut self, what: &str) -> Result<usize> {
        let v = self.get_u64(what)?;
        usize::try_from(v).map_err(|_| Error::Format {
            offset: self.pos as u64,
            reason: format!("{what} {v} does not fit usize"),
        })
    }

    pub fn get_f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn get_f64_vec(&mut self, what: &str) -> Result<Vec<f64>> {
        let len = self.get_usize(what)?;
        self.check_claimed_len(len, 8, what)?;
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(self.get_f64(what)?);
        }
        Ok(out)
    }

    /// Guards `Vec::with_capacity` against absurd lengths from corrupt files.
    pub fn check_claimed_len(&self, len: usize, elem_size: usize, what: &str) -> Result<()> {
        if len.saturating_mul(elem_size) > self.buf.len() - self.pos {
            return Err(Error::Format {
                offset: self.pos as u64,
                reason: format!("{what} length {len} exceeds remaining file size"),
            });
        }
        Ok(())
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format {
                offset: self.pos as u64,
                reason: format!("{} trailing bytes", self.buf.len() - self.pos),
            });
        }
        Ok(())
    }
}

fn write_bias_config(w: &mut ByteWriter, cfg: &BiasConfig) {
    w.put_u8(match cfg.preset {
        Preset::AnswerPrior => 0,
        Preset::Position => 1,
    });
    w.put_u64(cfg.n_types as u64);
    w.put_u64(cfg.n_answers as u64);
    w.put_f64(cfg.beta);
    w.put_f64(cfg.eta);
    w.put_f64(cfg.noise_sigma);
    w.put_u64(cfg.n_train as u64);
    w.put_u64(cfg.n_id_test as u64);
    w.put_u64(cfg.n_ood_test as u64);
    w.put_u64(cfg.seed);
    w.put_u64(cfg.slot_k as u64);
}

fn read_bias_config(r: &mut ByteReader<'_>) -> Result<BiasConfig> {
    let preset = match r.get_u8("preset")? {
        0 => Preset::AnswerPrior,
        1 => Preset::Position,
        other => {
            return Err(Error::Format {
                offset: r.offset(),
                reason: format!("unknown preset tag {other}"),
            })
        }
    };
    Ok(BiasConfig {
        preset,
        n_types: r.get_usize("n_types")?,
        n_answers: r.get_usize("n_answers")?,
        beta: r.get_f64("beta")?,
        eta: r.get_f64("eta")?,
        noise_sigma: r.get_f64("noise_sigma")?,
        n_train: r.get_usize("n_train")?,
        n_id_test: r.get_usize("n_id_test")?,
        n_ood_test: r.get_usize("n_ood_test")?,
        seed: r.get_u64("seed")?,
        slot_k: r.get_usize("slot_k")?,
    })
}

fn encode(d: &Dataset) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.put_raw(MAGIC);
    w.put_u32(d.format_version);
    w.put_u8(d.split.id() as u8);
    write_bias_config(&mut w, &d.bias_config);
    w.put_u64(d.samples.len() as u64);
    for s in &d.samples {
        w.put_u64(s.question_type as u64);
        w.put_f64_slice(&s.question_vec);
        w.put_f64_slice(&s.context_vec);
        w.put_u64(s.gt_answers.len() as u64);
        for &a in &s.gt_answers {
            w.put_u64(a as u64);
        }
        w.put_f64_slice(s.gt_dist.values());
    }
    w.bytes()
}

fn decode(bytes: &[u8]) -> Result<Dataset> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(MAGIC)?;
    let version = r.get_u32("format version")?;
    if version != DATASET_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: DATASET_FORMAT_VERSION,
        });
    }
    let split = match r.get_u8("split tag")? {
        0 => Split::Train,
        1 => Split::IdTest,
        2 => Split::OodTest,
        other => {
            return Err(Error::Format {
                offset: r.offset(),
                reason: format!("unknown split tag {other}"),
            })
        }
    };
    let bias_config = read_bias_config(&mut r)?;
    let n = r.get_usize("sample count")?;
    r.check_claimed_len(n, 8, "sample count")?;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let question_type = r.get_usize("question_type")?;
        let question_vec = r.get_f64_vec("question_vec")?;
        let context_vec = r.get_f64_vec("context_vec")?;
        let n_gt = r.get_usize("gt count")?;
        r.check_claimed_len(n_gt, 8, "gt count")?;
        let mut gt_answers = Vec::with_capacity(n_gt);
        for _ in 0..n_gt {
            gt_answers.push(r.get_usize("gt answer")?);
        }
        let dist = r.get_f64_vec("gt_dist")?;
        let gt_dist = ProbVector::new(dist).map_err(|e| Error::Format {
            offset: r.offset(),
            reason: format!("bad gt_dist: {e}"),
        })?;
        samples.push(Sample {
            question_type,
            question_vec,
            context_vec,
            gt_answers,
            gt_dist,
        });
    }
    r.expect_end()?;
    Ok(Dataset {
        samples,
        split,
        bias_config,
        format_version: version,
    })
}

pub fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, encode(d))?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    decode(&fs::read(path)?)
}

/// SHA-256 of the canonical serialization, as lowercase hex.
pub fn dataset_checksum(d: &Dataset) -> String {
    let mut hasher = Sha256::new();
    hasher.update(encode(d));
    hex_string(&hasher.finalize())
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_answer_prior;
    use crate::num::RngState;

    fn tiny_dataset() -> Dataset {
        let cfg = BiasConfig {
            n_train: 3,
            n_id_test: 1,
            n_ood_test: 1,
            ..BiasConfig::answer_prior_default(5)
        };
        gen_answer_prior(&cfg, Split::Train, &RngState::new(cfg.seed)).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let ds = tiny_dataset();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ds");
        save_dataset(&ds, &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let ds = tiny_dataset();
        let bytes = encode(&ds);
        for cut in [3, 10, bytes.len() / 2, bytes.len() - 1] {
            match decode(&bytes[..cut]) {
                Err(Error::Format { .. }) => {}
                other => panic!("cut at {cut}: expected format error, got {other:?}"),
            }
        }
    }

    #[test]
    fn version_mismatch_is_reported() {
        let ds = tiny_dataset();
        let mut bytes = encode(&ds);
        bytes[4] = 99;
        assert!(matches!(
            decode(&bytes),
            Err(Error::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn missing_file_is_reported() {
        assert!(matches!(
            load_dataset(Path::new("/nonexistent/x.ds")),
            Err(Error::MissingInput(_))
        ));
    }

    #[test]
    fn checksum_is_stable_across_generation_runs() {
        let cfg = BiasConfig {
            n_train: 20_000,
            ..BiasConfig::answer_prior_default(7)
        };
        let a = gen_answer_prior(&cfg, Split::Train, &RngState::new(cfg.seed)).unwrap();
        let b = gen_answer_prior(&cfg, Split::Train, &RngState::new(cfg.seed)).unwrap();
        assert_eq!(dataset_checksum(&a), dataset_checksum(&b));
        // 64 hex chars of sha256
        assert_eq!(dataset_checksum(&a).len(), 64);
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let ds = tiny_dataset();
        let mut bytes = encode(&ds);
        bytes.push(0);
        assert!(matches!(decode(&bytes), Err(Error::Format { .. })));
    }
}
