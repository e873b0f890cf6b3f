//! Dense linear-algebra primitives shared by every recovery algorithm:
//! row-major matrices, sorted index sets, deterministic top-k magnitude
//! selection, and support-restricted least squares via column-pivoted
//! Householder QR (minimum-norm solution when the restricted columns are
//! numerically rank deficient).

use crate::error::{Error, Result};
use serde::Serialize;

/// Relative pivot threshold below which the restricted Gram matrix is
/// treated as numerically singular.
pub const RANK_PIVOT_TOL: f64 = 1e-12;

/// Dense row-major matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "entry count {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `A x` for a dense vector `x` of length `cols`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *o = acc;
        }
        out
    }

    /// `A x` exploiting that `x` is zero outside `support`.
    pub fn mul_sparse(&self, support: &[usize], x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for &j in support {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.data[i * self.cols + j] * xj;
            }
        }
        out
    }

    /// `A^T r`.
    pub fn transpose_mul(&self, r: &[f64]) -> Vec<f64> {
        debug_assert_eq!(r.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &ri) in r.iter().enumerate() {
            if ri == 0.0 {
                continue;
            }
            let row = self.row(i);
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * ri;
            }
        }
        out
    }

    /// Copies the listed columns into a column-major `rows x idx.len()` buffer.
    pub fn gather_columns(&self, idx: &[usize]) -> Vec<f64> {
        let m = self.rows;
        let mut out = vec![0.0; m * idx.len()];
        for (c, &j) in idx.iter().enumerate() {
            for i in 0..m {
                out[c * m + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Euclidean norm of each column.
    pub fn column_norms(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, a) in sums.iter_mut().zip(self.row(i)) {
                *s += a * a;
            }
        }
        sums.iter().map(|s| s.sqrt()).collect()
    }
}

/// Sorted set of distinct column indices. Serializes as a plain array.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct IndexSet {
    indices: Vec<usize>,
}

impl<'de> serde::Deserialize<'de> for IndexSet {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let raw = Vec::<usize>::deserialize(deserializer)?;
        Ok(IndexSet::new(raw))
    }
}

impl IndexSet {
    pub fn empty() -> Self {
        IndexSet {
            indices: Vec::new(),
        }
    }

    /// Builds from arbitrary indices; sorts and removes duplicates.
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        IndexSet { indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.indices.binary_search(&idx).is_ok()
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut merged = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (0, 0);
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => {
                    merged.push(self.indices[a]);
                    a += 1;
                }
                std::cmp::Ordering::Greater => {
                    merged.push(other.indices[b]);
                    b += 1;
                }
                std::cmp::Ordering::Equal => {
                    merged.push(self.indices[a]);
                    a += 1;
                    b += 1;
                }
            }
        }
        merged.extend_from_slice(&self.indices[a..]);
        merged.extend_from_slice(&other.indices[b..]);
        IndexSet { indices: merged }
    }

    /// Indices of `self` that are not in `other`.
    pub fn difference(&self, other: &IndexSet) -> IndexSet {
        IndexSet {
            indices: self
                .indices
                .iter()
                .copied()
                .filter(|i| !other.contains(*i))
                .collect(),
        }
    }

    /// Complement within `[0, n)`.
    pub fn complement(&self, n: usize) -> IndexSet {
        IndexSet {
            indices: (0..n).filter(|i| !self.contains(*i)).collect(),
        }
    }
}

/// Result of a support-restricted least-squares solve.
#[derive(Clone, Debug)]
pub struct RestrictedLsSolution {
    /// Length-`cols` estimate, zero outside the requested support.
    pub estimate: Vec<f64>,
    /// `y - A * estimate`.
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    /// Set when the restricted columns were numerically rank deficient;
    /// the minimum-norm solution is returned in that case.
    pub rank_deficient: bool,
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Indices of the `k` largest-magnitude entries of `v`; |v_i| ties are
/// broken toward the smaller index so selections are reproducible.
pub fn top_k_indices(v: &[f64], k: usize) -> Result<IndexSet> {
    if k == 0 || k > v.len() {
        return Err(Error::invalid(format!(
            "top-k width {k} out of range for vector of length {}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("top-k selection on non-finite entries"));
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    let better = |&a: &usize, &b: &usize| {
        let (ma, mb) = (v[a].abs(), v[b].abs());
        mb.partial_cmp(&ma)
            .expect("finite magnitudes")
            .then(a.cmp(&b))
    };
    if k < v.len() {
        order.select_nth_unstable_by(k - 1, better);
        order.truncate(k);
    }
    // The selected half is unordered beyond the pivot; re-rank so the tie
    // rule holds exactly, then return in ascending index order.
    order.sort_unstable_by(better);
    order.truncate(k);
    order.sort_unstable();
    Ok(IndexSet { indices: order })
}

/// Position of the single largest-magnitude entry (ties toward the
/// smaller index).
pub fn argmax_magnitude(v: &[f64]) -> usize {
    let mut best = 0;
    let mut best_mag = v[0].abs();
    for (i, x) in v.iter().enumerate().skip(1) {
        let m = x.abs();
        if m > best_mag {
            best = i;
            best_mag = m;
        }
    }
    best
}

/// `A^T r`, the correlation of every column with a residual.
pub fn correlate(phi: &DenseMatrix, r: &[f64]) -> Result<Vec<f64>> {
    if r.len() != phi.rows() {
        return Err(Error::invalid(format!(
            "correlate: vector length {} does not match {} rows",
            r.len(),
            phi.rows()
        )));
    }
    Ok(phi.transpose_mul(r))
}

/// Least-squares solve of `min ||y - A z||_2` over vectors supported on
/// `support`. Column-pivoted Householder QR; when the restricted columns
/// are rank deficient the minimum-norm solution is returned and flagged.
pub fn restricted_least_squares(
    phi: &DenseMatrix,
    y: &[f64],
    support: &IndexSet,
) -> Result<RestrictedLsSolution> {
    let m = phi.rows();
    if y.len() != m {
        return Err(Error::invalid(format!(
            "least squares: rhs length {} does not match {} rows",
            y.len(),
            m
        )));
    }
    if support.is_empty() {
        return Err(Error::invalid("least squares: empty support"));
    }
    if support.len() > m {
        return Err(Error::invalid(format!(
            "least squares: support size {} exceeds {} rows",
            support.len(),
            m
        )));
    }
    if let Some(&bad) = support.as_slice().iter().find(|&&j| j >= phi.cols()) {
        return Err(Error::invalid(format!(
            "least squares: support index {bad} out of range for {} columns",
            phi.cols()
        )));
    }

    let k = support.len();
    let mut a = phi.gather_columns(support.as_slice());
    let (coef, rank) = qr_solve_col_pivot(&mut a, m, k, y);

    let mut estimate = vec![0.0; phi.cols()];
    for (c, &j) in support.as_slice().iter().enumerate() {
        estimate[j] = coef[c];
    }
    let ax = phi.mul_sparse(support.as_slice(), &estimate);
    let residual: Vec<f64> = y.iter().zip(&ax).map(|(yi, ai)| yi - ai).collect();
    let residual_norm = norm2(&residual);
    Ok(RestrictedLsSolution {
        estimate,
        residual,
        residual_norm,
        rank_deficient: rank < k,
    })
}

/// Column-pivoted Householder QR least squares on a column-major `m x k`
/// buffer (`k <= m`). Returns the coefficient vector (in original column
/// order) and the numerical rank. Rank-deficient systems get the
/// minimum-norm solution via a complete orthogonal decomposition.
fn qr_solve_col_pivot(a: &mut [f64], m: usize, k: usize, y: &[f64]) -> (Vec<f64>, usize) {
    let mut jpvt: Vec<usize> = (0..k).collect();
    let mut tau = vec![0.0; k];
    let mut qty = y.to_vec();

    for j in 0..k {
        // Pivot: bring the remaining column with the largest trailing norm
        // to position j (ties toward the leftmost column).
        let mut best = j;
        let mut best_norm2 = trailing_norm2(a, m, j, j);
        for l in (j + 1)..k {
            let n2 = trailing_norm2(a, m, j, l);
            if n2 > best_norm2 {
                best = l;
                best_norm2 = n2;
            }
        }
        if best != j {
            for i in 0..m {
                a.swap(j * m + i, best * m + i);
            }
            jpvt.swap(j, best);
        }

        // Householder reflector zeroing a[j+1.., j].
        let alpha = a[j * m + j];
        let normx = trailing_norm2(a, m, j, j).sqrt();
        if normx == 0.0 {
            tau[j] = 0.0;
            continue;
        }
        let beta = if alpha >= 0.0 { -normx } else { normx };
        let scale = alpha - beta;
        for i in (j + 1)..m {
            a[j * m + i] /= scale;
        }
        a[j * m + j] = beta;
        tau[j] = (beta - alpha) / beta;

        // Apply the reflector to trailing columns and to the rhs.
        for l in (j + 1)..k {
            let mut w = a[l * m + j];
            for i in (j + 1)..m {
                w += a[j * m + i] * a[l * m + i];
            }
            w *= tau[j];
            a[l * m + j] -= w;
            for i in (j + 1)..m {
                let vij = a[j * m + i];
                a[l * m + i] -= w * vij;
            }
        }
        let mut w = qty[j];
        for i in (j + 1)..m {
            w += a[j * m + i] * qty[i];
        }
        w *= tau[j];
        qty[j] -= w;
        for i in (j + 1)..m {
            qty[i] -= w * a[j * m + i];
        }
    }

    // Numerical rank from the pivoted diagonal.
    let r00 = a[0].abs();
    let mut rank = 0;
    for j in 0..k {
        if a[j * m + j].abs() > RANK_PIVOT_TOL * r00 && r00 > 0.0 {
            rank += 1;
        } else {
            break;
        }
    }

    let mut permuted = vec![0.0; k];
    if rank == k {
        // Back substitution on R w = Q^T y.
        for j in (0..k).rev() {
            let mut acc = qty[j];
            for l in (j + 1)..k {
                acc -= a[l * m + j] * permuted[l];
            }
            permuted[j] = acc / a[j * m + j];
        }
    } else if rank > 0 {
        // Minimum-norm solution: QR of R_top^T completes the orthogonal
        // decomposition A P = Q [T 0; 0 0] Z^T.
        let r = rank;
        // t is k x r column-major, t[:, q] = row q of R_top.
        let mut t = vec![0.0; k * r];
        for q in 0..r {
            for p in q..k {
                t[q * k + p] = a[p * m + q];
            }
        }
        let mut tau2 = vec![0.0; r];
        for j in 0..r {
            let alpha = t[j * k + j];
            let mut n2 = 0.0;
            for i in j..k {
                n2 += t[j * k + i] * t[j * k + i];
            }
            let normx = n2.sqrt();
            if normx == 0.0 {
                tau2[j] = 0.0;
                continue;
            }
            let beta = if alpha >= 0.0 { -normx } else { normx };
            let scale = alpha - beta;
            for i in (j + 1)..k {
                t[j * k + i] /= scale;
            }
            t[j * k + j] = beta;
            tau2[j] = (beta - alpha) / beta;
            for l in (j + 1)..r {
                let mut w = t[l * k + j];
                for i in (j + 1)..k {
                    w += t[j * k + i] * t[l * k + i];
                }
                w *= tau2[j];
                t[l * k + j] -= w;
                for i in (j + 1)..k {
                    let vij = t[j * k + i];
                    t[l * k + i] -= w * vij;
                }
            }
        }
        // Forward substitution: R2^T u = (Q^T y)[0..r].
        let mut u = vec![0.0; r];
        for j in 0..r {
            let mut acc = qty[j];
            for l in 0..j {
                acc -= t[l * k + j] * u[l];
            }
            u[j] = acc / t[j * k + j];
        }
        // w = Q2 [u; 0]: apply reflectors in reverse order.
        let mut wvec = vec![0.0; k];
        wvec[..r].copy_from_slice(&u);
        for j in (0..r).rev() {
            if tau2[j] == 0.0 {
                continue;
            }
            let mut w = wvec[j];
            for i in (j + 1)..k {
                w += t[j * k + i] * wvec[i];
            }
            w *= tau2[j];
            wvec[j] -= w;
            for i in (j + 1)..k {
                wvec[i] -= w * t[j * k + i];
            }
        }
        permuted.copy_from_slice(&wvec);
    }

    let mut coef = vec![0.0; k];
    for j in 0..k {
        coef[jpvt[j]] = permuted[j];
    }
    (coef, rank)
}

fn trailing_norm2(a: &[f64], m: usize, from_row: usize, col: usize) -> f64 {
    let mut acc = 0.0;
    for i in from_row..m {
        let v = a[col * m + i];
        acc += v * v;
    }
    acc
}

/// Smallest and largest singular values of a column-major `m x k` buffer
/// (destroyed in place) via one-sided Jacobi orthogonalization.
pub(crate) fn extreme_singular_values(a: &mut [f64], m: usize, k: usize) -> (f64, f64) {
    debug_assert_eq!(a.len(), m * k);
    if k == 1 {
        let n = trailing_norm2(a, m, 0, 0).sqrt();
        return (n, n);
    }
    for _sweep in 0..40 {
        let mut max_cos = 0.0f64;
        for p in 0..k {
            for q in (p + 1)..k {
                let (mut app, mut aqq, mut apq) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let x = a[p * m + i];
                    let y = a[q * m + i];
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if app == 0.0 || aqq == 0.0 {
                    continue;
                }
                let denom = (app * aqq).sqrt();
                let cos_angle = apq.abs() / denom;
                max_cos = max_cos.max(cos_angle);
                if cos_angle <= 1e-15 {
                    continue;
                }
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let x = a[p * m + i];
                    let y = a[q * m + i];
                    a[p * m + i] = c * x - s * y;
                    a[q * m + i] = s * x + c * y;
                }
            }
        }
        if max_cos < 1e-14 {
            break;
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for p in 0..k {
        let n = trailing_norm2(a, m, 0, p).sqrt();
        lo = lo.min(n);
        hi = hi.max(n);
    }
    (lo, hi)
}
