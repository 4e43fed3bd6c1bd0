//! Binary checkpoints for teachers and students. Header carries fusion,
//! debias, and dimensions; parameters follow as flat f64 arrays, so a
//! round-trip is bit-exact.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{CausalTeacher, Debias, Fusion, MainBranch, Mlp, ShortcutBranch, SlotScorer};
use crate::data::io::{hex_string, ByteReader, ByteWriter};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
const TEACHER_MAGIC: &[u8; 4] = b"ITCK";
const STUDENT_MAGIC: &[u8; 4] = b"ISCK";

fn write_main(w: &mut ByteWriter, main: &MainBranch) {
    match main {
        MainBranch::Dense(mlp) => {
            w.put_u8(0);
            w.put_u64(mlp.input_dim as u64);
            w.put_u64(mlp.hidden as u64);
            w.put_u64(mlp.out_dim as u64);
            w.put_f64_slice(&mlp.w1);
            w.put_f64_slice(&mlp.b1);
            w.put_f64_slice(&mlp.w2);
            w.put_f64_slice(&mlp.b2);
        }
        MainBranch::Slot(s) => {
            w.put_u8(1);
            w.put_u64(s.vocab as u64);
            w.put_u64(s.slots as u64);
            w.put_u64(s.hidden as u64);
            w.put_f64_slice(&s.w1);
            w.put_f64_slice(&s.b1);
            w.put_f64_slice(&s.w2);
            w.put_f64(s.b2);
        }
    }
}

fn read_main(r: &mut ByteReader<'_>) -> Result<MainBranch> {
    match r.get_u8("main branch kind")? {
        0 => {
            let input_dim = r.get_usize("input_dim")?;
            let hidden = r.get_usize("hidden")?;
            let out_dim = r.get_usize("out_dim")?;
            let mlp = Mlp {
                input_dim,
                hidden,
                out_dim,
                w1: r.get_f64_vec("w1")?,
                b1: r.get_f64_vec("b1")?,
                w2: r.get_f64_vec("w2")?,
                b2: r.get_f64_vec("b2")?,
            };
            if mlp.w1.len() != hidden * input_dim
                || mlp.b1.len() != hidden
                || mlp.w2.len() != out_dim * hidden
                || mlp.b2.len() != out_dim
            {
                return Err(Error::Format {
                    offset: r.offset(),
                    reason: "mlp parameter lengths disagree with header dims".into(),
                });
            }
            Ok(MainBranch::Dense(mlp))
        }
        1 => {
            let vocab = r.get_usize("vocab")?;
            let slots = r.get_usize("slots")?;
            let hidden = r.get_usize("hidden")?;
            let s = SlotScorer {
                vocab,
                slots,
                hidden,
                w1: r.get_f64_vec("w1")?,
                b1: r.get_f64_vec("b1")?,
                w2: r.get_f64_vec("w2")?,
                b2: r.get_f64("b2")?,
            };
            if s.w1.len() != hidden * (2 * vocab + slots)
                || s.b1.len() != hidden
                || s.w2.len() != hidden
            {
                return Err(Error::Format {
                    offset: r.offset(),
                    reason: "slot scorer parameter lengths disagree with header dims".into(),
                });
            }
            Ok(MainBranch::Slot(s))
        }
        other => Err(Error::Format {
            offset: r.offset(),
            reason: format!("unknown main branch kind {other}"),
        }),
    }
}

fn write_shortcut(w: &mut ByteWriter, shortcut: &ShortcutBranch) {
    match shortcut {
        ShortcutBranch::TypeEmbedding {
            n_types,
            n_answers,
            logits,
        } => {
            w.put_u8(0);
            w.put_u64(*n_types as u64);
            w.put_u64(*n_answers as u64);
            w.put_f64_slice(logits);
        }
        ShortcutBranch::SlotPrior { logits } => {
            w.put_u8(1);
            w.put_f64_slice(logits);
        }
    }
}

fn read_shortcut(r: &mut ByteReader<'_>) -> Result<ShortcutBranch> {
    match r.get_u8("shortcut kind")? {
        0 => {
            let n_types = r.get_usize("n_types")?;
            let n_answers = r.get_usize("n_answers")?;
            let logits = r.get_f64_vec("embedding logits")?;
            if logits.len() != n_types * n_answers {
                return Err(Error::Format {
                    offset: r.offset(),
                    reason: "embedding size disagrees with header dims".into(),
                });
            }
            Ok(ShortcutBranch::TypeEmbedding {
                n_types,
                n_answers,
                logits,
            })
        }
        1 => Ok(ShortcutBranch::SlotPrior {
            logits: r.get_f64_vec("slot prior logits")?,
        }),
        other => Err(Error::Format {
            offset: r.offset(),
            reason: format!("unknown shortcut kind {other}"),
        }),
    }
}

fn encode_teacher(t: &CausalTeacher) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.put_raw(TEACHER_MAGIC);
    w.put_u32(CHECKPOINT_FORMAT_VERSION);
    w.put_u8(match t.fusion {
        Fusion::Sum => 0,
        Fusion::Gate => 1,
    });
    w.put_u8(match t.debias {
        Debias::Nie => 0,
        Debias::Tie => 1,
    });
    w.put_f64(t.lambda_short);
    w.put_f64(t.cf_value);
    write_main(&mut w, &t.main);
    write_shortcut(&mut w, &t.shortcut);
    w.bytes()
}

fn decode_teacher(bytes: &[u8]) -> Result<CausalTeacher> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(TEACHER_MAGIC)?;
    let version = r.get_u32("format version")?;
    if version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: CHECKPOINT_FORMAT_VERSION,
        });
    }
    let fusion = match r.get_u8("fusion")? {
        0 => Fusion::Sum,
        1 => Fusion::Gate,
        other => {
            return Err(Error::Format {
                offset: r.offset(),
                reason: format!("unknown fusion tag {other}"),
            })
        }
    };
    let debias = match r.get_u8("debias")? {
        0 => Debias::Nie,
        1 => Debias::Tie,
        other => {
            return Err(Error::Format {
                offset: r.offset(),
                reason: format!("unknown debias tag {other}"),
            })
        }
    };
    let lambda_short = r.get_f64("lambda_short")?;
    let cf_value = r.get_f64("cf_value")?;
    let main = read_main(&mut r)?;
    let shortcut = read_shortcut(&mut r)?;
    r.expect_end()?;
    Ok(CausalTeacher {
        main,
        shortcut,
        fusion,
        debias,
        cf_value,
        lambda_short,
    })
}

pub fn save_teacher(t: &CausalTeacher, path: &Path) -> Result<()> {
    fs::write(path, encode_teacher(t))?;
    Ok(())
}

pub fn load_teacher(path: &Path) -> Result<CausalTeacher> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    decode_teacher(&fs::read(path)?)
}

/// SHA-256 of the canonical checkpoint encoding; used to prove the teacher
/// is untouched by distillation.
pub fn teacher_checksum(t: &CausalTeacher) -> String {
    let mut hasher = Sha256::new();
    hasher.update(encode_teacher(t));
    hex_string(&hasher.finalize())
}

fn encode_student(net: &MainBranch) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.put_raw(STUDENT_MAGIC);
    w.put_u32(CHECKPOINT_FORMAT_VERSION);
    write_main(&mut w, net);
    w.bytes()
}

pub fn save_student(net: &MainBranch, path: &Path) -> Result<()> {
    fs::write(path, encode_student(net))?;
    Ok(())
}

pub fn load_student(path: &Path) -> Result<MainBranch> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let bytes = fs::read(path)?;
    let mut r = ByteReader::new(&bytes);
    r.expect_magic(STUDENT_MAGIC)?;
    let version = r.get_u32("format version")?;
    if version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: CHECKPOINT_FORMAT_VERSION,
        });
    }
    let net = read_main(&mut r)?;
    r.expect_end()?;
    Ok(net)
}

pub fn student_checksum(net: &MainBranch) -> String {
    let mut hasher = Sha256::new();
    hasher.update(encode_student(net));
    hex_string(&hasher.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_position, BiasConfig, Split};
    use crate::num::RngState;
    use crate::teacher::TeacherConfig;

    fn position_teacher() -> CausalTeacher {
        let bias = BiasConfig {
            n_train: 50,
            n_id_test: 10,
            n_ood_test: 10,
            ..BiasConfig::position_default(4)
        };
        let train = gen_position(&bias, Split::Train, &RngState::new(bias.seed)).unwrap();
        CausalTeacher::new(
            &TeacherConfig {
                fusion: Fusion::Gate,
                debias: Debias::Tie,
                hidden: 6,
                ..TeacherConfig::default()
            },
            &bias,
            &train,
            &mut RngState::new(12),
        )
        .unwrap()
    }

    #[test]
    fn teacher_round_trip_is_bit_exact() {
        let mut t = position_teacher();
        t.cf_value = -0.37;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ck");
        save_teacher(&t, &path).unwrap();
        let back = load_teacher(&path).unwrap();
        assert_eq!(t, back);
        assert_eq!(teacher_checksum(&t), teacher_checksum(&back));
    }

    #[test]
    fn student_round_trip_is_bit_exact() {
        let t = position_teacher();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.ck");
        save_student(&t.main, &path).unwrap();
        let back = load_student(&path).unwrap();
        assert_eq!(t.main, back);
    }

    #[test]
    fn version_mismatch_is_detected() {
        let t = position_teacher();
        let mut bytes = encode_teacher(&t);
        bytes[4] = 9;
        assert!(matches!(
            decode_teacher(&bytes),
            Err(Error::VersionMismatch { found: 9, .. })
        ));
    }

    #[test]
    fn truncation_is_a_format_error() {
        let t = position_teacher();
        let bytes = encode_teacher(&t);
        assert!(matches!(
            decode_teacher(&bytes[..bytes.len() / 2]),
            Err(Error::Format { .. })
        ));
    }
}
