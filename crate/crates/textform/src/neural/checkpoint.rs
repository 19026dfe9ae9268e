//! Binary checkpoint format: a magic tag, a JSON header describing every
//! dimension, the vocabulary, and hyperparameters, followed by flat
//! little-endian f64 parameter arrays in declared traversal order. Loading
//! validates each array length against the header before accepting it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::{EncDec, GruLayer, ModelDims, ModelParams};
use super::predictor::{PredictorDims, PredictorParams, PredNet};
use super::tape::NeuralError;
use super::tensor::Tensor;
use crate::textcore::Vocabulary;

pub const MAGIC: &[u8; 4] = b"TFCK";
pub const FORMAT_VERSION: u32 = 1;

/// Full trainable state: the encoder-decoder, optionally the control
/// predictor, and the vocabulary both were built over.
#[derive(Debug, Clone)]
pub struct RunState {
    pub model: ModelParams,
    pub predictor: Option<PredictorParams>,
    pub vocab: Vocabulary,
    /// Opaque hyperparameter snapshot echoed back on load.
    pub hyper: serde_json::Value,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Header {
    format_version: u32,
    model_dims: ModelDims,
    predictor_dims: Option<PredictorDims>,
    vocab_tokens: Vec<String>,
    vocab_hash: u64,
    hyper: serde_json::Value,
    /// (rows, cols) per tensor, model first then predictor, traversal order.
    shapes: Vec<(usize, usize)>,
}

fn shapes_of(state: &RunState) -> Vec<(usize, usize)> {
    let mut shapes = Vec::new();
    state.model.tensors.for_each(&mut |t: &Tensor| shapes.push((t.rows, t.cols)));
    if let Some(p) = &state.predictor {
        p.tensors.for_each(&mut |t: &Tensor| shapes.push((t.rows, t.cols)));
    }
    shapes
}

pub fn save_checkpoint(state: &RunState, path: &Path) -> Result<(), NeuralError> {
    let header = Header {
        format_version: FORMAT_VERSION,
        model_dims: state.model.dims,
        predictor_dims: state.predictor.as_ref().map(|p| p.dims),
        vocab_tokens: state.vocab.tokens().to_vec(),
        vocab_hash: state.vocab.hash(),
        hyper: state.hyper.clone(),
        shapes: shapes_of(state),
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| NeuralError::Checkpoint { msg: format!("header encode: {e}") })?;

    let file = File::create(path).map_err(|e| NeuralError::Checkpoint {
        msg: format!("create {}: {e}", path.display()),
    })?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>, bytes: &[u8]| {
        w.write_all(bytes)
            .map_err(|e| NeuralError::Checkpoint { msg: format!("write {}: {e}", path.display()) })
    };
    write(&mut w, MAGIC)?;
    write(&mut w, &FORMAT_VERSION.to_le_bytes())?;
    write(&mut w, &(header_bytes.len() as u64).to_le_bytes())?;
    write(&mut w, &header_bytes)?;

    let mut io_err = None;
    let mut dump = |t: &Tensor| {
        if io_err.is_some() {
            return;
        }
        for v in &t.data {
            if let Err(e) = w.write_all(&v.to_le_bytes()) {
                io_err = Some(e);
                return;
            }
        }
    };
    state.model.tensors.for_each(&mut dump);
    if let Some(p) = &state.predictor {
        p.tensors.for_each(&mut dump);
    }
    if let Some(e) = io_err {
        return Err(NeuralError::Checkpoint { msg: format!("write {}: {e}", path.display()) });
    }
    w.flush()
        .map_err(|e| NeuralError::Checkpoint { msg: format!("flush {}: {e}", path.display()) })
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str, path: &Path) -> Result<(), NeuralError> {
    r.read_exact(buf).map_err(|e| NeuralError::Checkpoint {
        msg: format!("{}: truncated or unreadable {what}: {e}", path.display()),
    })
}

pub fn load_checkpoint(path: &Path) -> Result<RunState, NeuralError> {
    let file = File::open(path).map_err(|e| NeuralError::Checkpoint {
        msg: format!("open {}: {e}", path.display()),
    })?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic", path)?;
    if &magic != MAGIC {
        return Err(NeuralError::Checkpoint {
            msg: format!("{}: not a checkpoint (bad magic)", path.display()),
        });
    }
    let mut v4 = [0u8; 4];
    read_exact(&mut r, &mut v4, "version", path)?;
    let version = u32::from_le_bytes(v4);
    if version != FORMAT_VERSION {
        return Err(NeuralError::Checkpoint {
            msg: format!("{}: unsupported format version {version}", path.display()),
        });
    }
    let mut l8 = [0u8; 8];
    read_exact(&mut r, &mut l8, "header length", path)?;
    let header_len = u64::from_le_bytes(l8) as usize;
    let mut header_bytes = vec![0u8; header_len];
    read_exact(&mut r, &mut header_bytes, "header", path)?;
    let header: Header = serde_json::from_slice(&header_bytes).map_err(|e| {
        NeuralError::Checkpoint { msg: format!("{}: corrupted header: {e}", path.display()) }
    })?;

    let vocab = Vocabulary::from_tokens(header.vocab_tokens.clone());
    if vocab.hash() != header.vocab_hash {
        return Err(NeuralError::Checkpoint {
            msg: format!("{}: vocabulary hash mismatch", path.display()),
        });
    }
    if header.model_dims.vocab != vocab.size() {
        return Err(NeuralError::Checkpoint {
            msg: format!(
                "{}: model vocab dim {} does not match stored vocabulary size {}",
                path.display(),
                header.model_dims.vocab,
                vocab.size()
            ),
        });
    }

    let mut shapes = header.shapes.iter().copied();
    let mut read_tensor = |r: &mut BufReader<File>, rows: usize, cols: usize| {
        let declared = shapes.next().ok_or_else(|| NeuralError::Checkpoint {
            msg: format!("{}: header lists too few tensors", path.display()),
        })?;
        if declared != (rows, cols) {
            return Err(NeuralError::Checkpoint {
                msg: format!(
                    "{}: tensor shape {:?} in header, {:?} expected from dimensions",
                    path.display(),
                    declared,
                    (rows, cols)
                ),
            });
        }
        let mut data = vec![0.0f64; rows * cols];
        let mut b = [0u8; 8];
        for v in &mut data {
            read_exact(r, &mut b, "parameter data", path)?;
            *v = f64::from_le_bytes(b);
        }
        Ok(Tensor::from_vec(rows, cols, data))
    };

    let model_tensors = read_encdec(&mut r, &header.model_dims, &mut read_tensor)?;
    let predictor = match header.predictor_dims {
        Some(pd) => Some(PredictorParams {
            dims: pd,
            tensors: read_prednet(&mut r, &pd, &mut read_tensor)?,
        }),
        None => None,
    };

    // Anything left over means the file does not match its own header.
    let mut extra = [0u8; 1];
    if r.read(&mut extra).map_err(|e| NeuralError::Checkpoint {
        msg: format!("read {}: {e}", path.display()),
    })? != 0
    {
        return Err(NeuralError::Checkpoint {
            msg: format!("{}: trailing bytes after declared parameters", path.display()),
        });
    }

    Ok(RunState {
        model: ModelParams { dims: header.model_dims, tensors: model_tensors },
        predictor,
        vocab,
        hyper: header.hyper,
    })
}

type ReadTensor<'a> = dyn FnMut(&mut BufReader<File>, usize, usize) -> Result<Tensor, NeuralError> + 'a;

fn read_gru(
    r: &mut BufReader<File>,
    input: usize,
    hidden: usize,
    rt: &mut ReadTensor<'_>,
) -> Result<GruLayer<Tensor>, NeuralError> {
    Ok(GruLayer {
        wr: rt(r, input, hidden)?,
        ur: rt(r, hidden, hidden)?,
        br: rt(r, 1, hidden)?,
        wz: rt(r, input, hidden)?,
        uz: rt(r, hidden, hidden)?,
        bz: rt(r, 1, hidden)?,
        wh: rt(r, input, hidden)?,
        uh: rt(r, hidden, hidden)?,
        bh: rt(r, 1, hidden)?,
    })
}

fn read_encdec(
    r: &mut BufReader<File>,
    d: &ModelDims,
    rt: &mut impl FnMut(&mut BufReader<File>, usize, usize) -> Result<Tensor, NeuralError>,
) -> Result<EncDec<Tensor>, NeuralError> {
    let embedding = rt(r, d.vocab, d.emb)?;
    let enc_input = |l: usize| if l == 0 { d.emb } else { 2 * d.enc_hidden };
    let mut enc_fwd = Vec::new();
    for l in 0..d.enc_layers {
        enc_fwd.push(read_gru(r, enc_input(l), d.enc_hidden, rt)?);
    }
    let mut enc_bwd = Vec::new();
    for l in 0..d.enc_layers {
        enc_bwd.push(read_gru(r, enc_input(l), d.enc_hidden, rt)?);
    }
    let mut dec = Vec::new();
    for l in 0..d.dec_layers {
        let input = if l == 0 { d.emb + d.ctrl_dim } else { d.dec_hidden };
        dec.push(read_gru(r, input, d.dec_hidden, rt)?);
    }
    let ctrl_emb = rt(r, d.num_controls, d.ctrl_dim)?;
    let attn_w1 = rt(r, 2 * d.enc_hidden, d.attn_dim)?;
    let attn_w2 = rt(r, d.dec_hidden, d.attn_dim)?;
    let attn_v = rt(r, d.attn_dim, 1)?;
    let mut init_w = Vec::new();
    let mut init_b = Vec::new();
    for _ in 0..d.dec_layers {
        init_w.push(rt(r, 2 * d.enc_hidden, d.dec_hidden)?);
    }
    for _ in 0..d.dec_layers {
        init_b.push(rt(r, 1, d.dec_hidden)?);
    }
    let out_w = rt(r, d.dec_hidden + 2 * d.enc_hidden, d.vocab)?;
    let out_b = rt(r, 1, d.vocab)?;
    Ok(EncDec {
        embedding,
        enc_fwd,
        enc_bwd,
        dec,
        ctrl_emb,
        attn_w1,
        attn_w2,
        attn_v,
        init_w,
        init_b,
        out_w,
        out_b,
    })
}

fn read_prednet(
    r: &mut BufReader<File>,
    d: &PredictorDims,
    rt: &mut impl FnMut(&mut BufReader<File>, usize, usize) -> Result<Tensor, NeuralError>,
) -> Result<PredNet<Tensor>, NeuralError> {
    Ok(PredNet {
        embedding: rt(r, d.vocab, d.emb)?,
        gru_x: read_gru(r, d.emb, d.hidden, &mut |r, a, b| rt(r, a, b))?,
        gru_y: read_gru(r, d.emb, d.hidden, &mut |r, a, b| rt(r, a, b))?,
        w_h: rt(r, 2 * d.hidden, d.classifier_hidden)?,
        b_h: rt(r, 1, d.classifier_hidden)?,
        w_c: rt(r, d.classifier_hidden, d.num_controls)?,
        b_c: rt(r, 1, d.num_controls)?,
    })
}
