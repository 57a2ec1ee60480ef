//! Versioned little-endian binary model files.
//!
//! ```text
//! magic    8 bytes  "CO2CALMD"
//! version  u16      FORMAT_VERSION
//! kind     u8       1 = forest, 2 = mlp, 3 = svr
//! payload  kind-specific, see the write_* functions
//! ```
//!
//! Every real number is stored as its IEEE-754 bit pattern, so a load
//! reproduces the saved parameters exactly. Trailing bytes are rejected.

use std::fs;
use std::io::{self, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{CalibratorModel, ForestModel, MlpModel, Network, Standardizer, SvrModel, TreeNode};
use crate::error::{Error, Result};
use crate::ingest::{FeatureRow, WINDOW_LEN};

pub const MAGIC: &[u8; 8] = b"CO2CALMD";
pub const FORMAT_VERSION: u16 = 1;

const KIND_FOREST: u8 = 1;
const KIND_MLP: u8 = 2;
const KIND_SVR: u8 = 3;

const NODE_LEAF: u8 = 0;
const NODE_SPLIT: u8 = 1;

// Writes into a Vec<u8> cannot fail.
const VEC_WRITE: &str = "writing to a Vec never fails";

pub fn save_model(model: &CalibratorModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.write_u16::<LE>(FORMAT_VERSION).expect(VEC_WRITE);
    match model {
        CalibratorModel::Forest(m) => {
            out.push(KIND_FOREST);
            write_forest(&mut out, m);
        }
        CalibratorModel::Mlp(m) => {
            out.push(KIND_MLP);
            write_mlp(&mut out, m);
        }
        CalibratorModel::Svr(m) => {
            out.push(KIND_SVR);
            write_svr(&mut out, m);
        }
    }
    out
}

pub fn load_model(bytes: &[u8]) -> Result<CalibratorModel> {
    let mut r = Reader { buf: bytes };
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::ModelFormat("bad magic bytes".into()));
    }
    let version = r.read_u16::<LE>().map_err(truncated)?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let model = match r.read_u8().map_err(truncated)? {
        KIND_FOREST => CalibratorModel::Forest(read_forest(&mut r)?),
        KIND_MLP => CalibratorModel::Mlp(read_mlp(&mut r)?),
        KIND_SVR => CalibratorModel::Svr(read_svr(&mut r)?),
        other => return Err(Error::ModelFormat(format!("unknown model kind {other}"))),
    };
    if !r.buf.is_empty() {
        return Err(Error::ModelFormat(format!("{} trailing bytes", r.buf.len())));
    }
    Ok(model)
}

pub fn write_model_file(path: &Path, model: &CalibratorModel) -> Result<()> {
    crate::pipeline::write_atomic(path, &save_model(model))
}

pub fn read_model_file(path: &Path) -> Result<CalibratorModel> {
    load_model(&fs::read(path)?)
}

fn truncated(_: io::Error) -> Error {
    Error::ModelFormat("truncated stream".into())
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl Read for Reader<'_> {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        self.buf.read(out)
    }
}

impl Reader<'_> {
    fn f64(&mut self) -> Result<f64> {
        self.read_f64::<LE>().map_err(truncated)
    }

    fn u32(&mut self) -> Result<u32> {
        self.read_u32::<LE>().map_err(truncated)
    }

    fn u64(&mut self) -> Result<u64> {
        self.read_u64::<LE>().map_err(truncated)
    }

    fn flag(&mut self) -> Result<bool> {
        match self.read_u8().map_err(truncated)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::ModelFormat(format!("invalid flag byte {v}"))),
        }
    }

    /// Reads a count and checks that at least `count * min_bytes` remain.
    fn count(&mut self, min_bytes: usize) -> Result<usize> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_bytes) > self.buf.len() {
            return Err(truncated(io::ErrorKind::UnexpectedEof.into()));
        }
        Ok(n)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn scaler(&mut self) -> Result<Standardizer> {
        let mean = self.f64()?;
        let sd = self.f64()?;
        if !(sd > 0.0) {
            return Err(Error::ModelFormat(format!("non-positive scale {sd}")));
        }
        Ok(Standardizer { mean, sd })
    }

    fn row(&mut self) -> Result<FeatureRow> {
        let mut r = [0.0; WINDOW_LEN];
        for v in &mut r {
            *v = self.f64()?;
        }
        Ok(r)
    }
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.write_f64::<LE>(v).expect(VEC_WRITE);
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("model dimensions fit in u32");
    out.write_u32::<LE>(v).expect(VEC_WRITE);
}

fn put_scaler(out: &mut Vec<u8>, s: &Standardizer) {
    put_f64(out, s.mean);
    put_f64(out, s.sd);
}

// forest: seed u64 | bootstrap u8 | n_trees u32 | trees in pre-order
// node:   0 value f64 | 1 feature u8 threshold f64 left right
fn write_forest(out: &mut Vec<u8>, m: &ForestModel) {
    out.write_u64::<LE>(m.seed).expect(VEC_WRITE);
    out.push(u8::from(m.bootstrap));
    put_u32(out, m.trees.len());
    for t in &m.trees {
        write_node(out, t);
    }
}

fn write_node(out: &mut Vec<u8>, node: &TreeNode) {
    match node {
        TreeNode::Leaf { value } => {
            out.push(NODE_LEAF);
            put_f64(out, *value);
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            out.push(NODE_SPLIT);
            out.push(*feature as u8);
            put_f64(out, *threshold);
            write_node(out, left);
            write_node(out, right);
        }
    }
}

fn read_forest(r: &mut Reader<'_>) -> Result<ForestModel> {
    let seed = r.u64()?;
    let bootstrap = r.flag()?;
    let n = r.count(9)?;
    if n == 0 {
        return Err(Error::ModelFormat("forest without trees".into()));
    }
    let trees = (0..n).map(|_| read_node(r)).collect::<Result<Vec<_>>>()?;
    Ok(ForestModel {
        trees,
        n_estimators: n,
        bootstrap,
        seed,
    })
}

fn read_node(r: &mut Reader<'_>) -> Result<TreeNode> {
    // Iterative pre-order decode so deep or hostile inputs cannot overflow the stack.
    enum Frame {
        Split { feature: usize, threshold: f64, left: Option<TreeNode> },
    }
    let mut stack: Vec<Frame> = Vec::new();
    loop {
        let mut node = match r.read_u8().map_err(truncated)? {
            NODE_LEAF => TreeNode::Leaf { value: r.f64()? },
            NODE_SPLIT => {
                let feature = r.read_u8().map_err(truncated)? as usize;
                if feature >= WINDOW_LEN {
                    return Err(Error::ModelFormat(format!("feature index {feature} out of range")));
                }
                let threshold = r.f64()?;
                stack.push(Frame::Split {
                    feature,
                    threshold,
                    left: None,
                });
                continue;
            }
            tag => return Err(Error::ModelFormat(format!("unknown node tag {tag}"))),
        };
        // Attach the finished node to its parents.
        loop {
            match stack.pop() {
                None => return Ok(node),
                Some(Frame::Split {
                    feature,
                    threshold,
                    left: None,
                }) => {
                    stack.push(Frame::Split {
                        feature,
                        threshold,
                        left: Some(node),
                    });
                    break;
                }
                Some(Frame::Split {
                    feature,
                    threshold,
                    left: Some(left),
                }) => {
                    node = TreeNode::Split {
                        feature,
                        threshold,
                        left: Box::new(left),
                        right: Box::new(node),
                    };
                }
            }
        }
    }
}

// mlp: n_inputs u32 | n_hidden u32 | input scalers | target scaler | params
fn write_mlp(out: &mut Vec<u8>, m: &MlpModel) {
    put_u32(out, m.network.n_inputs());
    put_u32(out, m.network.n_hidden());
    for s in &m.input_scalers {
        put_scaler(out, s);
    }
    put_scaler(out, &m.target_scaler);
    for p in m.network.params() {
        put_f64(out, *p);
    }
}

fn read_mlp(r: &mut Reader<'_>) -> Result<MlpModel> {
    let n_inputs = r.count(16)?;
    let n_hidden = r.count(8 * (n_inputs + 2))?;
    if n_inputs == 0 || n_hidden == 0 {
        return Err(Error::ModelFormat("empty network".into()));
    }
    let input_scalers = (0..n_inputs).map(|_| r.scaler()).collect::<Result<Vec<_>>>()?;
    let target_scaler = r.scaler()?;
    let params = r.f64s(Network::param_count(n_inputs, n_hidden))?;
    let network = Network::from_params(n_inputs, n_hidden, params)?;
    MlpModel::new(network, input_scalers, target_scaler)
}

// svr: gamma c epsilon bias (f64) | converged u8 | input scalers (6) |
//      target scaler | n_sv u32 | n_sv * (6 f64 row, f64 coeff)
fn write_svr(out: &mut Vec<u8>, m: &SvrModel) {
    for v in [m.gamma, m.c, m.epsilon, m.bias] {
        put_f64(out, v);
    }
    out.push(u8::from(m.converged));
    for s in &m.input_scalers {
        put_scaler(out, s);
    }
    put_scaler(out, &m.target_scaler);
    put_u32(out, m.support_vectors.len());
    for (sv, c) in m.support_vectors.iter().zip(&m.dual_coeffs) {
        for v in sv {
            put_f64(out, *v);
        }
        put_f64(out, *c);
    }
}

fn read_svr(r: &mut Reader<'_>) -> Result<SvrModel> {
    let gamma = r.f64()?;
    let c = r.f64()?;
    let epsilon = r.f64()?;
    let bias = r.f64()?;
    let converged = r.flag()?;
    let input_scalers = (0..WINDOW_LEN).map(|_| r.scaler()).collect::<Result<Vec<_>>>()?;
    let target_scaler = r.scaler()?;
    let n = r.count(8 * (WINDOW_LEN + 1))?;
    let mut support_vectors = Vec::with_capacity(n);
    let mut dual_coeffs = Vec::with_capacity(n);
    for _ in 0..n {
        support_vectors.push(r.row()?);
        dual_coeffs.push(r.f64()?);
    }
    Ok(SvrModel {
        support_vectors,
        dual_coeffs,
        bias,
        gamma,
        c,
        epsilon,
        input_scalers,
        target_scaler,
        converged,
    })
}
