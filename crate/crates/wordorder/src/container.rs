//! Binary container for neural models.
//!
//! All integers are little-endian. The layout is:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0 | 8 | magic `WORDORD\0` |
//! | 8 | 4 | format version (`u32`, currently 1) |
//! | 12 | 1 | architecture tag: 1 nplm, 2 rnnlm, 3 bag2seq |
//! | 13 | 3 | zero padding |
//! | 16 | 20 | dimensions, five `u32`: vocabulary, embedding, hidden, annotation, context (0 when unused) |
//! | 36 | 8 | vocabulary fingerprint (`u64`) |
//! | 44 | 4 | tensor count (`u32`) |
//! | 48 | .. | tensors |
//!
//! Each tensor is `rows: u32`, `cols: u32`, then `rows * cols` `f32` values in
//! row-major order. Tensors appear in declaration order:
//!
//! * nplm: embedding, hidden weight, hidden bias, output weight, output bias
//! * rnnlm: embedding, LSTM weight, LSTM bias, output weight, output bias
//! * bag2seq: embedding, encoder weight, encoder bias, initial-state weight,
//!   initial-state bias, attention state projection, attention annotation
//!   projection, attention vector, LSTM weight, LSTM bias, output weight,
//!   output bias
//!
//! Training runs in `f64`; values are rounded to `f32` on disk.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;
use wordorder_core::neural::{
    AnyModel, Architecture, Bag2Seq, Bag2SeqParams, Nplm, NplmParams, Parameters, RnnLm, RnnLmParams, Tensor,
};
use wordorder_core::Vocabulary;

pub const MAGIC: &[u8; 8] = b"WORDORD\0";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 48;

#[derive(Debug, Error, PartialEq)]
pub enum ContainerError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("unknown architecture tag {0}")]
    Architecture(u8),
    #[error("file is truncated")]
    Truncated,
    #[error("{0} trailing bytes after the last tensor")]
    Trailing(usize),
    #[error("model was trained with vocabulary {expected:016x} but {found:016x} was supplied")]
    VocabMismatch { expected: u64, found: u64 },
    #[error("tensor {index} is {rows}x{cols}, expected {want_rows}x{want_cols}")]
    Shape {
        index: usize,
        rows: usize,
        cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("expected {expected} tensors, header declares {found}")]
    TensorCount { expected: usize, found: usize },
}

/// Dimensions written in the header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub annotation: usize,
    pub context: usize,
}

pub fn dims(model: &AnyModel) -> Dims {
    match model {
        AnyModel::Nplm(m) => Dims {
            vocab: m.params.vocab_size(),
            embed: m.params.embed_dim(),
            hidden: m.params.hidden_dim(),
            annotation: 0,
            context: m.params.context(),
        },
        AnyModel::Rnnlm(m) => Dims {
            vocab: m.params.vocab_size(),
            embed: m.params.embed_dim(),
            hidden: m.params.hidden_dim(),
            annotation: 0,
            context: 0,
        },
        AnyModel::Bag2Seq(m) => Dims {
            vocab: m.params.vocab_size(),
            embed: m.params.embed_dim(),
            hidden: m.params.hidden_dim(),
            annotation: m.params.annotation_dim(),
            context: 0,
        },
    }
}

pub fn write_model(model: &AnyModel, vocab: &Vocabulary) -> Vec<u8> {
    let d = dims(model);
    let tensors = model.tensors();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * tensors.iter().map(|(_, t)| t.len() + 2).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(model.architecture().tag());
    out.extend_from_slice(&[0; 3]);
    for v in [d.vocab, d.embed, d.hidden, d.annotation, d.context] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&vocab.fingerprint().to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (_, t) in tensors {
        out.extend_from_slice(&(t.rows as u32).to_le_bytes());
        out.extend_from_slice(&(t.cols as u32).to_le_bytes());
        for &x in &t.data {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out
}

pub fn is_model_file(bytes: &[u8]) -> bool {
    bytes.starts_with(MAGIC)
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ContainerError> {
        if self.bytes.len() < n {
            return Err(ContainerError::Truncated);
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, ContainerError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ContainerError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Header fields without the tensors.
pub fn read_header(bytes: &[u8]) -> Result<(Architecture, Dims, u64), ContainerError> {
    let mut r = Reader { bytes };
    if r.take(8).map_err(|_| ContainerError::BadMagic)? != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(ContainerError::Version(version));
    }
    let tag = r.take(4)?[0];
    let arch = Architecture::from_tag(tag).ok_or(ContainerError::Architecture(tag))?;
    let mut d = [0usize; 5];
    for v in &mut d {
        *v = r.u32()? as usize;
    }
    let dims = Dims {
        vocab: d[0],
        embed: d[1],
        hidden: d[2],
        annotation: d[3],
        context: d[4],
    };
    Ok((arch, dims, r.u64()?))
}

fn fill<P: Parameters>(params: &mut P, r: &mut Reader<'_>) -> Result<(), ContainerError> {
    let targets = params.tensors_mut();
    let count = r.u32()? as usize;
    if count != targets.len() {
        return Err(ContainerError::TensorCount {
            expected: targets.len(),
            found: count,
        });
    }
    for (index, t) in targets.into_iter().enumerate() {
        let (rows, cols) = (r.u32()? as usize, r.u32()? as usize);
        if (rows, cols) != (t.rows, t.cols) {
            return Err(ContainerError::Shape {
                index,
                rows,
                cols,
                want_rows: t.rows,
                want_cols: t.cols,
            });
        }
        let raw = r.take(4 * rows * cols)?;
        for (x, b) in t.data.iter_mut().zip(raw.chunks_exact(4)) {
            *x = f32::from_le_bytes(b.try_into().unwrap()) as f64;
        }
    }
    Ok(())
}

/// Parses a container written by [`write_model`] for use with `vocab`.
pub fn read_model(bytes: &[u8], vocab: &Vocabulary) -> Result<AnyModel, ContainerError> {
    let (arch, d, fingerprint) = read_header(bytes)?;
    if fingerprint != vocab.fingerprint() {
        return Err(ContainerError::VocabMismatch {
            expected: fingerprint,
            found: vocab.fingerprint(),
        });
    }
    let mut r = Reader {
        bytes: &bytes[HEADER_LEN - 4..],
    };
    // zero-scale init only allocates tensors of the right shapes
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (bos, eos) = (vocab.bos(), vocab.eos());
    let model = match arch {
        Architecture::Nplm => {
            let mut p = NplmParams::init(d.vocab, d.embed, d.hidden, d.context.max(1), 0.0, &mut rng);
            fill(&mut p, &mut r)?;
            AnyModel::Nplm(Nplm::new(p, bos, eos))
        }
        Architecture::Rnnlm => {
            let mut p = RnnLmParams::init(d.vocab, d.embed, d.hidden, 0.0, &mut rng);
            fill(&mut p, &mut r)?;
            AnyModel::Rnnlm(RnnLm::new(p, bos, eos))
        }
        Architecture::Bag2Seq => {
            let mut p = Bag2SeqParams::init(d.vocab, d.embed, d.annotation, d.hidden, 0.0, &mut rng);
            fill(&mut p, &mut r)?;
            AnyModel::Bag2Seq(Bag2Seq::new(p, vocab))
        }
    };
    if !r.bytes.is_empty() {
        return Err(ContainerError::Trailing(r.bytes.len()));
    }
    Ok(model)
}

/// Rounds every parameter to `f32`, giving the model exactly as it will be read back.
pub fn round_to_f32(model: &mut AnyModel) {
    let tensors: Vec<&mut Tensor> = match model {
        AnyModel::Nplm(m) => m.params.tensors_mut(),
        AnyModel::Rnnlm(m) => m.params.tensors_mut(),
        AnyModel::Bag2Seq(m) => m.params.tensors_mut(),
    };
    for t in tensors {
        t.data.iter_mut().for_each(|x| *x = *x as f32 as f64);
    }
}
