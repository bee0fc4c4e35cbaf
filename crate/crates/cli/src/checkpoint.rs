//! Binary checkpoints: one text header line, then little-endian `f64` payload.
//!
//! Header: `QINSCH1 dim=<d> n=<n1,..> length=<L> t=<t> alpha=<a>
//! fields=phi,u1..ud,p0,mu_p0 mu_bar=<m>`. Fields follow in header order, each
//! in row-major grid order.

use qinsch::{MixtureState, ScalarField, TorusGrid, VectorField};
use thiserror::Error;

const MAGIC: &str = "QINSCH1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckpointError {
    #[error("malformed checkpoint header: {0}")]
    HeaderMismatch(String),
    #[error("payload truncated: expected {expected} bytes, got {got}")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("payload has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("checkpoint grid does not match the run grid")]
    GridMismatch,
    #[error("non-finite value in payload")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointHeader {
    pub dim: usize,
    pub n: Vec<usize>,
    pub length: f64,
    pub t: f64,
    pub alpha: f64,
    pub mu_bar: f64,
}

fn field_names(dim: usize) -> String {
    let mut v = vec!["phi".to_string()];
    v.extend((1..=dim).map(|i| format!("u{i}")));
    v.push("p0".into());
    v.push("mu_p0".into());
    v.join(",")
}

pub fn write_checkpoint(state: &MixtureState, alpha: f64) -> Vec<u8> {
    let g = state.grid();
    let n: Vec<String> = g.shape().iter().map(|v| v.to_string()).collect();
    let header = format!(
        "{MAGIC} dim={} n={} length={} t={} alpha={} fields={} mu_bar={}\n",
        g.dim(),
        n.join(","),
        g.length(),
        state.t,
        alpha,
        field_names(g.dim()),
        state.mu_bar
    );
    let mut out = header.into_bytes();
    out.reserve((g.dim() + 3) * g.len() * 8);
    let mut put = |f: &ScalarField| {
        for v in f.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    put(&state.phi);
    for c in state.u.components() {
        put(c);
    }
    put(&state.p0);
    put(&state.mu_p0);
    out
}

fn parse_header(line: &str) -> Result<CheckpointHeader, CheckpointError> {
    let bad = |m: &str| CheckpointError::HeaderMismatch(m.to_string());
    let mut parts = line.split(' ');
    if parts.next() != Some(MAGIC) {
        return Err(bad("missing magic"));
    }
    let mut get = |key: &str| -> Result<String, CheckpointError> {
        let tok = parts.next().ok_or_else(|| bad(&format!("missing {key}")))?;
        tok.strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| bad(&format!("expected {key}=, got {tok:?}")))
    };
    let num = |s: String, key: &str| -> Result<f64, CheckpointError> {
        s.parse().map_err(|_| bad(&format!("bad {key}")))
    };
    let dim: usize = get("dim")?.parse().map_err(|_| bad("bad dim"))?;
    let n: Vec<usize> = get("n")?
        .split(',')
        .map(|v| v.parse().map_err(|_| bad("bad n")))
        .collect::<Result<_, _>>()?;
    let length = num(get("length")?, "length")?;
    let t = num(get("t")?, "t")?;
    let alpha = num(get("alpha")?, "alpha")?;
    let fields = get("fields")?;
    let mu_bar = num(get("mu_bar")?, "mu_bar")?;
    if n.len() != dim {
        return Err(bad("n does not match dim"));
    }
    if fields != field_names(dim) {
        return Err(bad(&format!("fields={fields} does not match dim={dim}")));
    }
    Ok(CheckpointHeader {
        dim,
        n,
        length,
        t,
        alpha,
        mu_bar,
    })
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<(MixtureState, CheckpointHeader), CheckpointError> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CheckpointError::HeaderMismatch("no header line".into()))?;
    let line = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| CheckpointError::HeaderMismatch("header is not UTF-8".into()))?;
    let h = parse_header(line)?;
    let grid = TorusGrid::new(h.n.clone(), h.length)
        .map_err(|e| CheckpointError::HeaderMismatch(e.to_string()))?;
    let payload = &bytes[nl + 1..];
    let per = grid.len() * 8;
    let expected = (h.dim + 3) * per;
    if payload.len() < expected {
        return Err(CheckpointError::TruncatedPayload {
            expected,
            got: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(CheckpointError::TrailingBytes(payload.len() - expected));
    }
    let field = |i: usize| -> Result<ScalarField, CheckpointError> {
        let vals = payload[i * per..(i + 1) * per]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        ScalarField::new(grid.clone(), vals).map_err(|_| CheckpointError::NonFinite)
    };
    let phi = field(0)?;
    let u = VectorField::new((1..=h.dim).map(field).collect::<Result<_, _>>()?)
        .map_err(|e| CheckpointError::HeaderMismatch(e.to_string()))?;
    let state = MixtureState {
        t: h.t,
        u,
        phi,
        p0: field(h.dim + 1)?,
        mu_p0: field(h.dim + 2)?,
        mu_bar: h.mu_bar,
    };
    Ok((state, h))
}

/// Reads a checkpoint that must live on `grid`.
pub fn read_into(bytes: &[u8], grid: &TorusGrid) -> Result<MixtureState, CheckpointError> {
    let (state, _) = read_checkpoint(bytes)?;
    if state.grid() != grid {
        return Err(CheckpointError::GridMismatch);
    }
    Ok(state)
}
