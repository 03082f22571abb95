//! Per-chain storage of kept draws and its on-disk format.
//!
//! A draw file starts with the 9-byte magic `BRDRAWS1\n`, then the header
//! length as a little-endian `u64`, then a JSON header listing every
//! quantity's name, per-draw shape and draw count. The body holds each
//! quantity in header order as little-endian `f64`, draw-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 9] = b"BRDRAWS1\n";

/// One monitored quantity: `count` draws of an array with `shape`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantity {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Quantity {
    pub fn width(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn count(&self) -> usize {
        if self.width() == 0 {
            0
        } else {
            self.values.len() / self.width()
        }
    }

    pub fn draw(&self, s: usize) -> &[f64] {
        let w = self.width();
        &self.values[s * w..(s + 1) * w]
    }

    /// Series of element `k` across draws.
    pub fn element(&self, k: usize) -> Vec<f64> {
        let w = self.width();
        self.values.iter().skip(k).step_by(w).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct QuantityHeader {
    name: String,
    shape: Vec<usize>,
    count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    chain: usize,
    quantities: Vec<QuantityHeader>,
}

/// Kept draws of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    pub chain: usize,
    pub quantities: Vec<Quantity>,
}

impl ChainDraws {
    pub fn new(chain: usize) -> Self {
        Self {
            chain,
            quantities: Vec::new(),
        }
    }

    pub fn declare(&mut self, name: &str, shape: Vec<usize>, capacity: usize) {
        let width: usize = shape.iter().product();
        self.quantities.push(Quantity {
            name: name.to_string(),
            shape,
            values: Vec::with_capacity(width * capacity),
        });
    }

    pub fn get(&self, name: &str) -> Option<&Quantity> {
        self.quantities.iter().find(|q| q.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Quantity> {
        self.get(name)
            .ok_or_else(|| Error::InvalidData(format!("chain {}: no stored quantity {name}", self.chain)))
    }

    pub fn push(&mut self, index: usize, values: impl IntoIterator<Item = f64>) {
        self.quantities[index].values.extend(values);
    }

    pub fn n_draws(&self) -> usize {
        self.quantities.iter().map(Quantity::count).max().unwrap_or(0)
    }

    pub fn check_lengths(&self, expected: usize) -> Result<()> {
        for q in &self.quantities {
            if q.width() > 0 && q.count() != expected {
                return Err(Error::InvalidData(format!(
                    "chain {}: {} has {} draws, expected {expected}",
                    self.chain,
                    q.name,
                    q.count()
                )));
            }
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let header = Header {
            chain: self.chain,
            quantities: self
                .quantities
                .iter()
                .map(|q| QuantityHeader {
                    name: q.name.clone(),
                    shape: q.shape.clone(),
                    count: q.count(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&(json.len() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&json).map_err(io)?;
        for q in &self.quantities {
            for v in &q.values {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let io = |e| Error::io(path, e);
        let bad = |msg: &str| Error::parse(path, 0, msg.to_string());
        let mut r = BufReader::new(File::open(path).map_err(io)?);
        let mut magic = [0u8; 9];
        r.read_exact(&mut magic).map_err(|_| bad("truncated draw file"))?;
        if &magic != MAGIC {
            return Err(bad("not a draw file"));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(|_| bad("truncated header"))?;
        let len = u64::from_le_bytes(len) as usize;
        if len > 1 << 30 {
            return Err(bad("header length out of range"));
        }
        let mut json = vec![0u8; len];
        r.read_exact(&mut json).map_err(|_| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&json).map_err(|e| bad(&format!("bad header: {e}")))?;
        let mut out = ChainDraws::new(header.chain);
        let mut buf = [0u8; 8];
        for qh in header.quantities {
            let n = qh.count * qh.shape.iter().product::<usize>();
            let mut values = Vec::with_capacity(n);
            for _ in 0..n {
                r.read_exact(&mut buf).map_err(|_| bad(&format!("truncated data for {}", qh.name)))?;
                values.push(f64::from_le_bytes(buf));
            }
            out.quantities.push(Quantity {
                name: qh.name,
                shape: qh.shape,
                values,
            });
        }
        if r.read(&mut buf).map_err(io)? != 0 {
            return Err(bad("trailing bytes after draw data"));
        }
        Ok(out)
    }

    /// Wide CSV, one row per draw and one column per quantity element.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        let mut cols = vec!["draw".to_string()];
        for q in &self.quantities {
            if q.width() == 1 {
                cols.push(q.name.clone());
            } else {
                cols.extend((0..q.width()).map(|k| format!("{}[{k}]", q.name)));
            }
        }
        writeln!(w, "{}", cols.join(",")).map_err(io)?;
        for s in 0..self.n_draws() {
            write!(w, "{s}").map_err(io)?;
            for q in &self.quantities {
                for v in q.draw(s) {
                    write!(w, ",{v}").map_err(io)?;
                }
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}
