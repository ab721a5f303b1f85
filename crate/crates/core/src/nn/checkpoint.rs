//! Flat little-endian checkpoint format:
//!
//! ```text
//! "DOCKRL01" | layer_count: u32 | (rows: u32, cols: u32) * layer_count |
//! per layer: weights (rows*cols f32, row-major) then biases (rows f32)
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{DockError, Result};
use crate::nn::{Activation, Layer, MlpNet};

pub const MAGIC: &[u8; 8] = b"DOCKRL01";

pub fn encode(net: &MlpNet<f32>) -> Vec<u8> {
    let layers = net.layers();
    let mut out = Vec::with_capacity(12 + 8 * layers.len() + 4 * net.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for l in layers {
        out.extend_from_slice(&(l.rows as u32).to_le_bytes());
        out.extend_from_slice(&(l.cols as u32).to_le_bytes());
    }
    for l in layers {
        for v in l.weight.iter().chain(&l.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, field: &str) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(DockError::format(
                field,
                format!("file truncated at byte {} (needs {n} more)", self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, field: &str) -> Result<u32> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32(&mut self, field: &str) -> Result<f32> {
        let b = self.take(4, field)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode(bytes: &[u8], output: Activation) -> Result<MlpNet<f32>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err(DockError::format("magic", "expected \"DOCKRL01\""));
    }
    let count = r.u32("layer_count")? as usize;
    if count == 0 || count > 64 {
        return Err(DockError::format("layer_count", format!("implausible value {count}")));
    }
    let mut shapes = Vec::with_capacity(count);
    for i in 0..count {
        let rows = r.u32(&format!("layer[{i}].rows"))? as usize;
        let cols = r.u32(&format!("layer[{i}].cols"))? as usize;
        if rows == 0 || cols == 0 {
            return Err(DockError::format(format!("layer[{i}].rows"), "zero-sized layer"));
        }
        if i > 0 {
            let prev: (usize, usize) = shapes[i - 1];
            if prev.0 != cols {
                return Err(DockError::format(
                    format!("layer[{i}].cols"),
                    format!("{cols} does not match previous layer rows {}", prev.0),
                ));
            }
        }
        shapes.push((rows, cols));
    }
    let expected: usize = shapes.iter().map(|(r, c)| r * c + r).sum();
    let remaining = bytes.len() - r.pos;
    if remaining != 4 * expected {
        return Err(DockError::format(
            "parameters",
            format!("expected {} bytes of parameters, found {remaining}", 4 * expected),
        ));
    }
    let mut layers = Vec::with_capacity(count);
    for (i, &(rows, cols)) in shapes.iter().enumerate() {
        let mut layer = Layer::zeros(rows, cols);
        let field = format!("layer[{i}].parameters");
        for w in layer.weight.iter_mut() {
            *w = r.f32(&field)?;
        }
        for b in layer.bias.iter_mut() {
            *b = r.f32(&field)?;
        }
        if layer.weight.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
            return Err(DockError::format(field, "non-finite parameter"));
        }
        layers.push(layer);
    }
    MlpNet::from_layers(layers, output)
}

pub fn save(net: &MlpNet<f32>, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| DockError::io(path, e))?;
    f.write_all(&encode(net)).map_err(|e| DockError::io(path, e))
}

pub fn load(path: &Path, output: Activation) -> Result<MlpNet<f32>> {
    let bytes = fs::read(path).map_err(|e| DockError::io(path, e))?;
    decode(&bytes, output)
}
