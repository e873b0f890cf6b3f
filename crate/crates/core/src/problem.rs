//! Seeded construction of measurement matrices, sparse test signals, and
//! complete problem instances, plus a binary container format so instances
//! can be exported and re-run bit-identically.

use crate::error::{Error, Result};
use crate::linalg::{norm2, DenseMatrix, IndexSet};
use crate::rng::RngStream;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Distribution of the nonzero entries of a test signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    /// Standard normal nonzeros.
    Gaussian,
    /// Constant amplitude, random sign: every nonzero is +1 or -1. The
    /// empirically hardest class for greedy recovery.
    Cars,
    /// Caller-supplied values.
    Custom,
}

impl SignalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SignalKind::Gaussian => "gaussian",
            SignalKind::Cars => "cars",
            SignalKind::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(SignalKind::Gaussian),
            "cars" => Ok(SignalKind::Cars),
            "custom" => Ok(SignalKind::Custom),
            other => Err(Error::invalid(format!("unknown signal kind '{other}'"))),
        }
    }
}

/// A sparse vector with explicit support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseSignal {
    values: Vec<f64>,
    support: IndexSet,
    sparsity: usize,
    kind: SignalKind,
}

impl SparseSignal {
    /// Builds from a dense value vector; the support is the set of nonzeros.
    pub fn from_values(values: Vec<f64>, kind: SignalKind) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("signal entries must be finite"));
        }
        let support = IndexSet::new(
            values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, _)| i)
                .collect(),
        );
        if support.is_empty() {
            return Err(Error::invalid("signal must have at least one nonzero"));
        }
        if kind == SignalKind::Cars && support.iter().any(|i| values[i].abs() != 1.0) {
            return Err(Error::invalid("CARS signals must have +/-1 nonzeros"));
        }
        let sparsity = support.len();
        Ok(SparseSignal {
            values,
            support,
            sparsity,
            kind,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> &IndexSet {
        &self.support
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.values)
    }

    /// Smallest magnitude among the nonzero entries.
    pub fn min_nonzero_magnitude(&self) -> f64 {
        self.support
            .iter()
            .map(|i| self.values[i].abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// One measurement problem: matrix, observation, optional ground truth,
/// and the noise that was added.
#[derive(Clone, Debug)]
pub struct MeasurementInstance {
    pub phi: DenseMatrix,
    pub y: Vec<f64>,
    pub truth: Option<SparseSignal>,
    pub noise: Vec<f64>,
    pub seed: u64,
    pub noise_level: f64,
}

impl MeasurementInstance {
    pub fn rows(&self) -> usize {
        self.phi.rows()
    }

    pub fn cols(&self) -> usize {
        self.phi.cols()
    }

    /// Stable fingerprint of the numeric content (FNV-1a over the raw
    /// little-endian bytes); used to verify that paired trials feed the
    /// same instance to every algorithm.
    pub fn content_hash(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(&(self.rows() as u64).to_le_bytes());
        eat(&(self.cols() as u64).to_le_bytes());
        for v in self.phi.as_slice() {
            eat(&v.to_le_bytes());
        }
        for v in &self.y {
            eat(&v.to_le_bytes());
        }
        if let Some(t) = &self.truth {
            for v in t.values() {
                eat(&v.to_le_bytes());
            }
        }
        for v in &self.noise {
            eat(&v.to_le_bytes());
        }
        h
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let pstr = path.display().to_string();
        let file = File::create(path).map_err(|e| Error::io(&pstr, e))?;
        let mut w = BufWriter::new(file);
        let (m, n) = (self.rows(), self.cols());
        let (s, kind, x) = match &self.truth {
            Some(t) => (t.sparsity(), t.kind(), t.values().to_vec()),
            None => (0, SignalKind::Custom, vec![0.0; n]),
        };
        let header = ContainerHeader {
            m,
            n,
            s,
            kind: kind.as_str().to_string(),
            seed: self.seed,
            noise_level: self.noise_level,
        };
        let mut line = serde_json::to_string(&header)
            .map_err(|e| Error::format(&pstr, e.to_string()))?;
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| Error::io(&pstr, e))?;
        let mut dump = |vals: &[f64]| -> Result<()> {
            for v in vals {
                w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(&pstr, e))?;
            }
            Ok(())
        };
        dump(self.phi.as_slice())?;
        dump(&self.y)?;
        dump(&x)?;
        dump(&self.noise)?;
        w.flush().map_err(|e| Error::io(&pstr, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let pstr = path.display().to_string();
        let file = File::open(path).map_err(|e| Error::io(&pstr, e))?;
        let mut r = BufReader::new(file);
        let mut line = Vec::new();
        let mut byte = [0u8; 1];
        loop {
            r.read_exact(&mut byte)
                .map_err(|e| Error::io(&pstr, e))?;
            if byte[0] == b'\n' {
                break;
            }
            line.push(byte[0]);
            if line.len() > 1 << 16 {
                return Err(Error::format(&pstr, "header line too long"));
            }
        }
        let header: ContainerHeader = serde_json::from_slice(&line)
            .map_err(|e| Error::format(&pstr, format!("bad header: {e}")))?;
        let (m, n) = (header.m, header.n);
        if m == 0 || n == 0 {
            return Err(Error::format(&pstr, "dimensions must be positive"));
        }
        let mut slurp = |count: usize| -> Result<Vec<f64>> {
            let mut out = vec![0.0; count];
            let mut buf = [0u8; 8];
            for v in out.iter_mut() {
                r.read_exact(&mut buf).map_err(|e| Error::io(&pstr, e))?;
                *v = f64::from_le_bytes(buf);
            }
            Ok(out)
        };
        let phi_data = slurp(m * n)?;
        let y = slurp(m)?;
        let x = slurp(n)?;
        let noise = slurp(m)?;
        let phi = DenseMatrix::from_vec(m, n, phi_data)
            .map_err(|e| Error::format(&pstr, e.to_string()))?;
        let truth = if x.iter().all(|v| *v == 0.0) {
            None
        } else {
            let kind = SignalKind::parse(&header.kind)?;
            Some(SparseSignal::from_values(x, kind)?)
        };
        let inst = MeasurementInstance {
            phi,
            y,
            truth,
            noise,
            seed: header.seed,
            noise_level: header.noise_level,
        };
        inst.check_consistency()
            .map_err(|e| Error::format(&pstr, e.to_string()))?;
        Ok(inst)
    }

    /// Verifies y = Phi x + e when the truth is present.
    fn check_consistency(&self) -> Result<()> {
        if let Some(t) = &self.truth {
            let mut ax = self.phi.mul_sparse(t.support().as_slice(), t.values());
            for (a, e) in ax.iter_mut().zip(&self.noise) {
                *a += e;
            }
            let diff: f64 = self
                .y
                .iter()
                .zip(&ax)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let scale = norm2(&self.y).max(1e-300);
            if diff > 1e-12 * scale {
                return Err(Error::invalid(format!(
                    "observation inconsistent with truth: relative gap {:.3e}",
                    diff / scale
                )));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ContainerHeader {
    m: usize,
    n: usize,
    s: usize,
    kind: String,
    seed: u64,
    noise_level: f64,
}

/// `m x n` matrix with i.i.d. N(0, 1/m) entries, so columns have unit
/// expected norm. Requires undersampling (m < n).
pub fn gaussian_matrix(m: usize, n: usize, rng: RngStream) -> Result<DenseMatrix> {
    if m == 0 || m >= n {
        return Err(Error::invalid(format!(
            "gaussian matrix requires 0 < m < n, got {m}x{n}"
        )));
    }
    let scale = 1.0 / (m as f64).sqrt();
    let mut sampler = rng.sampler();
    let mut data = vec![0.0; m * n];
    for v in data.iter_mut() {
        *v = sampler.standard_normal() * scale;
    }
    DenseMatrix::from_vec(m, n, data)
}

/// Length-`n` signal with `s` nonzeros on a uniformly random support.
pub fn sparse_signal(n: usize, s: usize, kind: SignalKind, rng: RngStream) -> Result<SparseSignal> {
    if s == 0 || s > n {
        return Err(Error::invalid(format!(
            "sparsity {s} out of range for length {n}"
        )));
    }
    if kind == SignalKind::Custom {
        return Err(Error::invalid(
            "custom signals are caller-supplied, not generated",
        ));
    }
    let mut sampler = rng.sampler();
    // Partial Fisher-Yates: draw the support without replacement.
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..s {
        let j = i + sampler.index(n - i);
        pool.swap(i, j);
    }
    let support = IndexSet::new(pool[..s].to_vec());
    let mut values = vec![0.0; n];
    match kind {
        SignalKind::Gaussian => {
            for i in support.iter() {
                let mut z = sampler.standard_normal();
                // An exact zero would shrink the support (probability ~0);
                // regenerate deterministically from the same stream.
                while z == 0.0 {
                    z = sampler.standard_normal();
                }
                values[i] = z;
            }
        }
        SignalKind::Cars => {
            for i in support.iter() {
                values[i] = sampler.sign();
            }
        }
        SignalKind::Custom => unreachable!(),
    }
    SparseSignal::from_values(values, kind)
}

/// Builds a complete instance: fresh matrix, fresh signal, y = Phi x + e.
/// `noise_level` scales the noise so that ||e|| = noise_level * ||Phi x||
/// (zero gives an exactly noiseless instance). Matrix, signal, and noise
/// come from separate substreams so each component is independently
/// reproducible.
pub fn build_instance(
    m: usize,
    n: usize,
    s: usize,
    kind: SignalKind,
    noise_level: f64,
    rng: RngStream,
) -> Result<MeasurementInstance> {
    if s > m {
        return Err(Error::invalid(format!(
            "sparsity {s} exceeds measurement count {m}"
        )));
    }
    if noise_level.is_nan() || noise_level < 0.0 {
        return Err(Error::invalid("noise level must be nonnegative"));
    }
    let phi = gaussian_matrix(m, n, rng.substream(0))?;
    let signal = sparse_signal(n, s, kind, rng.substream(1))?;
    let clean = phi.mul_sparse(signal.support().as_slice(), signal.values());
    let mut noise = vec![0.0; m];
    if noise_level > 0.0 {
        let mut sampler = rng.substream(2).sampler();
        sampler.fill_standard_normal(&mut noise);
        let raw_norm = norm2(&noise);
        let target = noise_level * norm2(&clean);
        let scale = if raw_norm > 0.0 { target / raw_norm } else { 0.0 };
        for v in noise.iter_mut() {
            *v *= scale;
        }
    }
    let y: Vec<f64> = clean.iter().zip(&noise).map(|(a, e)| a + e).collect();
    Ok(MeasurementInstance {
        phi,
        y,
        truth: Some(signal),
        noise,
        seed: rng.master_seed(),
        noise_level,
    })
}
