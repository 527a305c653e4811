//! Checkpoint files.
//!
//! A UTF-8 header of `key = value` lines ends at the first empty line. Binary
//! tensor records follow, all integers and floats little-endian:
//!
//! ```text
//! u32 tensor count
//! repeated:
//!   u32 name length, name bytes (UTF-8)
//!   u32 rank, rank x u64 dims
//!   f64 values, row-major
//! ```
//!
//! Model tensors use [`Model::tensor_names`]; Adam moments are stored as
//! `adam.m.<name>` and `adam.v.<name>` with the same shapes.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::Matrix;
use crate::training::{fmt_f64, AdamState, Checkpoint, EpochRecord, TrainConfig};

pub const MAGIC: &str = "lyricseq-checkpoint 1";

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(sink: W, ck: &Checkpoint) -> Result<()> {
    let mut w = BufWriter::new(sink);
    writeln!(w, "{MAGIC}")?;
    for (k, v) in ck.config.entries() {
        writeln!(w, "{k} = {v}")?;
    }
    writeln!(w, "epoch = {}", ck.epoch)?;
    writeln!(w, "adam-step = {}", ck.adam.t)?;
    for r in &ck.history {
        writeln!(w, "loss.{} = {} {}", r.epoch, fmt_f64(r.train_loss), fmt_f64(r.valid_loss))?;
    }
    writeln!(w)?;

    let names = ck.model.tensor_names();
    let tensors = ck.model.tensors();
    let total = ck.model.num_params();
    if ck.adam.m.len() != total || ck.adam.v.len() != total {
        return Err(bad("optimizer state does not match the model"));
    }
    w.write_all(&(3 * tensors.len() as u32).to_le_bytes())?;
    for (name, t) in names.iter().zip(&tensors) {
        write_tensor(&mut w, name, t.rows(), t.cols(), t.data())?;
    }
    for (prefix, moments) in [("adam.m.", &ck.adam.m), ("adam.v.", &ck.adam.v)] {
        let mut offset = 0;
        for (name, t) in names.iter().zip(&tensors) {
            let n = t.data().len();
            write_tensor(&mut w, &format!("{prefix}{name}"), t.rows(), t.cols(), &moments[offset..offset + n])?;
            offset += n;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_tensor<W: Write>(w: &mut W, name: &str, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&2u32.to_le_bytes())?;
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

struct RawTensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b).map_err(|_| bad("truncated tensor data"))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0; 8];
    r.read_exact(&mut b).map_err(|_| bad("truncated tensor data"))?;
    Ok(u64::from_le_bytes(b))
}

fn read_tensor<R: Read>(r: &mut R) -> Result<(String, RawTensor)> {
    let len = read_u32(r)? as usize;
    if len > 4096 {
        return Err(bad("tensor name too long"));
    }
    let mut name = vec![0; len];
    r.read_exact(&mut name).map_err(|_| bad("truncated tensor name"))?;
    let name = String::from_utf8(name).map_err(|_| bad("tensor name is not UTF-8"))?;
    let rank = read_u32(r)?;
    let (rows, cols) = match rank {
        1 => (read_u64(r)?, 1),
        2 => (read_u64(r)?, read_u64(r)?),
        _ => return Err(bad(format!("{name}: unsupported rank {rank}"))),
    };
    let n = rows
        .checked_mul(cols)
        .filter(|&n| n <= 1 << 34)
        .ok_or_else(|| bad(format!("{name}: implausible shape {rows}x{cols}")))? as usize;
    let mut bytes = vec![0; n * 8];
    r.read_exact(&mut bytes).map_err(|_| bad(format!("{name}: truncated values")))?;
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((
        name,
        RawTensor {
            rows: rows as usize,
            cols: cols as usize,
            data,
        },
    ))
}

pub fn read_checkpoint<R: Read>(source: R) -> Result<Checkpoint> {
    let mut r = BufReader::new(source);
    let mut line = String::new();
    let mut lineno = 1;
    fn next_line<B: BufRead>(r: &mut B, line: &mut String) -> Result<bool> {
        line.clear();
        let n = r.read_line(line).map_err(|_| bad("header is not UTF-8"))?;
        Ok(n > 0)
    }

    if !next_line(&mut r, &mut line)? || line.trim_end() != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let mut config = TrainConfig::default();
    let mut epoch = None;
    let mut adam_t = None;
    let mut history = Vec::new();
    loop {
        if !next_line(&mut r, &mut line)? {
            return Err(bad("header is not terminated"));
        }
        lineno += 1;
        let text = line.trim_end_matches(['\n', '\r']);
        if text.is_empty() {
            break;
        }
        let (key, value) = text
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| bad(format!("header line {lineno}: expected key = value")))?;
        let parse_err = |_: std::num::ParseIntError| bad(format!("header line {lineno}: bad value for {key}"));
        let float_err = |_: std::num::ParseFloatError| bad(format!("header line {lineno}: bad value for {key}"));
        if let Some(e) = key.strip_prefix("loss.") {
            let epoch: usize = e.parse().map_err(parse_err)?;
            let (a, b) = value.split_once(' ').ok_or_else(|| bad(format!("header line {lineno}: expected two losses")))?;
            history.push(EpochRecord {
                epoch,
                train_loss: a.parse().map_err(float_err)?,
                valid_loss: b.trim().parse().map_err(float_err)?,
            });
        } else if key == "epoch" {
            epoch = Some(value.parse().map_err(parse_err)?);
        } else if key == "adam-step" {
            adam_t = Some(value.parse().map_err(parse_err)?);
        } else if !config.set(key, value).map_err(|e| bad(format!("header line {lineno}: {e}")))? {
            return Err(bad(format!("header line {lineno}: unknown key {key}")));
        }
    }
    config.validate().map_err(|e| bad(e.to_string()))?;

    let count = read_u32(&mut r)?;
    let mut raw = HashMap::new();
    for _ in 0..count {
        let (name, t) = read_tensor(&mut r)?;
        if raw.insert(name.clone(), t).is_some() {
            return Err(bad(format!("duplicate tensor {name}")));
        }
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(bad("trailing bytes after tensors"));
    }

    let vocab = raw
        .get("embedding")
        .ok_or_else(|| bad("missing tensor embedding"))?
        .rows;
    let mut model = Model::zeros(config.variant, config.model_dims(vocab)).map_err(|e| bad(e.to_string()))?;
    let names = model.tensor_names();
    let mut m = Vec::with_capacity(model.num_params());
    let mut v = Vec::with_capacity(model.num_params());
    for (name, t) in names.iter().zip(model.tensors_mut()) {
        let (rows, cols) = (t.rows(), t.cols());
        let mut take = |key: &str| -> Result<Vec<f64>> {
            let src = raw.remove(key).ok_or_else(|| bad(format!("missing tensor {key}")))?;
            if (src.rows, src.cols) != (rows, cols) {
                return Err(bad(format!(
                    "{key}: shape {}x{} does not match config ({rows}x{cols})",
                    src.rows, src.cols
                )));
            }
            Ok(src.data)
        };
        *t = Matrix::from_vec(rows, cols, take(name)?)?;
        m.extend(take(&format!("adam.m.{name}"))?);
        v.extend(take(&format!("adam.v.{name}"))?);
    }
    if let Some(extra) = raw.keys().next() {
        return Err(bad(format!("unexpected tensor {extra}")));
    }

    Ok(Checkpoint {
        config,
        model,
        adam: AdamState {
            m,
            v,
            t: adam_t.ok_or_else(|| bad("missing adam-step"))?,
        },
        epoch: epoch.ok_or_else(|| bad("missing epoch"))?,
        history,
    })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ck: &Checkpoint) -> Result<()> {
    write_checkpoint(File::create(path)?, ck)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    read_checkpoint(File::open(path)?)
}
