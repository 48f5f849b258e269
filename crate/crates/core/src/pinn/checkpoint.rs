//! Plain-text weight checkpoints.
//!
//! ```text
//! palqo-mlp 1
//! sizes 3 8 8 3
//! w <row-major entries of layer 0>
//! b <entries of layer 0>
//! ...
//! ```
//! Floats are written in shortest round-trip form, so a load after a save
//! reproduces every bit.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::mlp::MlpParams;
use crate::error::{Error, Result};

const MAGIC: &str = "palqo-mlp";
const VERSION: u32 = 1;

pub fn to_text(w: &MlpParams) -> String {
    let mut s = format!("{MAGIC} {VERSION}\nsizes");
    for n in &w.sizes {
        let _ = write!(s, " {n}");
    }
    s.push('\n');
    for (wl, bl) in w.weights.iter().zip(&w.biases) {
        s.push('w');
        for r in 0..wl.nrows() {
            for c in 0..wl.ncols() {
                let _ = write!(s, " {}", wl[(r, c)]);
            }
        }
        s.push_str("\nb");
        for v in bl.iter() {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    s
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn numbers<'a>(line: Option<&'a str>, tag: &str) -> Result<Vec<&'a str>> {
    let line = line.ok_or_else(|| bad(format!("missing `{tag}` line")))?;
    let mut it = line.split_whitespace();
    if it.next() != Some(tag) {
        return Err(bad(format!("expected `{tag}` line, got `{line}`")));
    }
    Ok(it.collect())
}

fn parse_f64s(tokens: &[&str], expected: usize) -> Result<Vec<f64>> {
    if tokens.len() != expected {
        return Err(bad(format!("expected {expected} values, found {}", tokens.len())));
    }
    tokens
        .iter()
        .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad number `{t}`"))))
        .collect()
}

pub fn from_text(text: &str) -> Result<MlpParams> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty checkpoint"))?;
    if header.trim() != format!("{MAGIC} {VERSION}") {
        return Err(bad(format!("unsupported header `{header}`")));
    }
    let sizes = numbers(lines.next(), "sizes")?
        .iter()
        .map(|t| t.parse::<usize>().map_err(|_| bad(format!("bad size `{t}`"))))
        .collect::<Result<Vec<_>>>()?;
    let mut w = MlpParams::zeros(&sizes).map_err(|e| bad(e.to_string()))?;
    for l in 0..w.num_layers() {
        let (rows, cols) = (sizes[l + 1], sizes[l]);
        let ws = parse_f64s(&numbers(lines.next(), "w")?, rows * cols)?;
        w.weights[l] = DMatrix::from_row_slice(rows, cols, &ws);
        let bs = parse_f64s(&numbers(lines.next(), "b")?, rows)?;
        w.biases[l] = DVector::from_vec(bs);
    }
    Ok(w)
}

pub fn save(w: &MlpParams, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, to_text(w))?;
    Ok(())
}

pub fn load(path: &std::path::Path) -> Result<MlpParams> {
    from_text(&std::fs::read_to_string(path)?)
}
