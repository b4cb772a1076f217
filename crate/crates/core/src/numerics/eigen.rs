//! Dense symmetric eigensolver.
//!
//! Householder reduction to tridiagonal form followed by the implicit-shift
//! QL iteration. The full decomposition accumulates the orthogonal factor;
//! the partial path keeps only the reflectors, computes every eigenvalue of
//! the tridiagonal matrix, and recovers the requested eigenvectors by inverse
//! iteration followed by back-transformation. The partial path costs one
//! reduction plus O(n²) per vector, which is what the optimiser needs at
//! every objective evaluation.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Real symmetric matrix. Construction symmetrises its input, so
/// `m[[i, j]] == m[[j, i]]` holds bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(Array2<f64>);

impl SymmetricMatrix {
    pub fn new(m: Array2<f64>) -> Result<Self> {
        let (r, c) = m.dim();
        if r != c || r == 0 {
            return Err(Error::InvalidMatrix);
        }
        let mut m = m;
        for i in 0..r {
            for j in (i + 1)..r {
                let v = 0.5 * (m[[i, j]] + m[[j, i]]);
                m[[i, j]] = v;
                m[[j, i]] = v;
            }
        }
        Ok(Self(m))
    }

    /// Builds from the upper triangle of `f(i, j)` for `i <= j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m[[i, j]] = v;
                m[[j, i]] = v;
            }
        }
        Self(m)
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn check_finite(&self) -> Result<()> {
        if self.0.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidMatrix)
        }
    }
}

impl std::ops::Index<[usize; 2]> for SymmetricMatrix {
    type Output = f64;
    fn index(&self, idx: [usize; 2]) -> &f64 {
        &self.0[idx]
    }
}

/// Eigenvalues in ascending order; column `k` of `eigenvectors` pairs with
/// `eigenvalues[k]`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: Array2<f64>,
}

/// The whole spectrum plus eigenvectors for the lowest few eigenvalues.
#[derive(Debug, Clone)]
pub struct PartialEigen {
    pub eigenvalues: Array1<f64>,
    /// n × count, column k pairs with `eigenvalues[k]`.
    pub eigenvectors: Array2<f64>,
}

/// Full symmetric eigendecomposition.
pub fn sym_eig(m: &SymmetricMatrix) -> Result<EigenDecomposition> {
    m.check_finite()?;
    let n = m.order();
    let tri = Tridiagonal::reduce(m);
    let mut zt = tri.q_transposed();
    let mut d = tri.diag.clone();
    let mut e = tri.off.clone();
    ql_implicit(&mut d, &mut e, Some((&mut zt, n)))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let eigenvalues = Array1::from_iter(order.iter().map(|&k| d[k]));
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        for r in 0..n {
            eigenvectors[[r, col]] = zt[k * n + r];
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// All eigenvalues, plus orthonormal eigenvectors for the `count` smallest.
pub fn sym_eig_lowest(m: &SymmetricMatrix, count: usize) -> Result<PartialEigen> {
    sym_eig_lowest_by(m, |_| count)
}

/// As [`sym_eig_lowest`], with the vector count chosen from the ascending
/// spectrum.
pub fn sym_eig_lowest_by(m: &SymmetricMatrix, count: impl FnOnce(&[f64]) -> usize) -> Result<PartialEigen> {
    m.check_finite()?;
    let n = m.order();
    let tri = Tridiagonal::reduce(m);
    let mut d = tri.diag.clone();
    let mut e = tri.off.clone();
    ql_implicit(&mut d, &mut e, None)?;
    d.sort_by(|a, b| a.total_cmp(b));
    let count = count(&d).min(n);

    let vecs = tri.inverse_iteration(&d, count);
    let mut eigenvectors = Array2::zeros((n, count));
    for (k, mut y) in vecs.into_iter().enumerate() {
        tri.back_transform(&mut y);
        for r in 0..n {
            eigenvectors[[r, k]] = y[r];
        }
    }
    Ok(PartialEigen {
        eigenvalues: Array1::from(d),
        eigenvectors,
    })
}

/// A = Q T Qᵀ with Q = H₀ H₁ … stored as Householder vectors.
struct Tridiagonal {
    n: usize,
    diag: Vec<f64>,
    /// off[i] = T[i, i+1]; off[n-1] = 0.
    off: Vec<f64>,
    /// (tau, v) for reflector k acting on indices k+1..n, v[0] = 1.
    reflectors: Vec<(f64, Vec<f64>)>,
}

impl Tridiagonal {
    fn reduce(m: &SymmetricMatrix) -> Self {
        let n = m.order();
        // only the lower triangle is read and kept current
        let mut a: Vec<f64> = m.view().iter().copied().collect();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n];
        let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
        // rank-2 update A ← A − v wᵀ − w vᵀ not yet applied, on rows/cols ≥ offset
        let mut pending: Option<(Vec<f64>, Vec<f64>, usize)> = None;
        let mut p = vec![0.0; n];

        for k in 0..n.saturating_sub(2) {
            let s = k + 1;
            let len = n - s;
            if let Some((v, w, o)) = &pending {
                let (vk, wk) = (v[k - o], w[k - o]);
                for i in k..n {
                    a[i * n + k] -= v[i - o] * wk + w[i - o] * vk;
                }
            }
            diag[k] = a[k * n + k];
            let alpha = a[s * n + k];
            let xnorm = (s + 1..n).map(|i| a[i * n + k].powi(2)).sum::<f64>().sqrt();
            if xnorm == 0.0 {
                off[k] = alpha;
                reflectors.push((0.0, Vec::new()));
                if let Some((v, w, o)) = pending.take() {
                    for i in s..n {
                        let (vi, wi) = (v[i - o], w[i - o]);
                        let row = &mut a[i * n + s..=i * n + i];
                        for (r, j) in row.iter_mut().zip(s..) {
                            *r -= vi * w[j - o] + wi * v[j - o];
                        }
                    }
                }
                continue;
            }
            let beta = -alpha.signum() * alpha.hypot(xnorm);
            let tau = (beta - alpha) / beta;
            let scale = 1.0 / (alpha - beta);
            let mut v = Vec::with_capacity(len);
            v.push(1.0);
            v.extend((s + 1..n).map(|i| a[i * n + k] * scale));
            off[k] = beta;

            // one sweep: finish the pending update and form p = A22 v
            let p = &mut p[..len];
            p.iter_mut().for_each(|x| *x = 0.0);
            for ii in 0..len {
                let i = s + ii;
                let row = &mut a[i * n + s..=i * n + i];
                if let Some((pv, pw, o)) = &pending {
                    let (vi, wi) = (pv[i - o], pw[i - o]);
                    let (pv, pw) = (&pv[s - o..=i - o], &pw[s - o..=i - o]);
                    for ((r, &vj), &wj) in row.iter_mut().zip(pv).zip(pw) {
                        *r -= vi * wj + wi * vj;
                    }
                }
                let (lower, d) = row.split_at(ii);
                let vi = v[ii];
                p[ii] += d[0] * vi + symmetric_row(lower, &v[..ii], &mut p[..ii], vi);
            }
            p.iter_mut().for_each(|x| *x *= tau);
            let pv = dot(p, &v);
            let half = 0.5 * tau * pv;
            for (pi, vi) in p.iter_mut().zip(&v) {
                *pi -= half * vi;
            }
            let w = p.to_vec();
            reflectors.push((tau, v.clone()));
            pending = Some((v, w, s));
        }
        if let Some((v, w, o)) = pending.take() {
            for i in n.saturating_sub(2).max(o)..n {
                for j in n.saturating_sub(2).max(o)..=i {
                    a[i * n + j] -= v[i - o] * w[j - o] + w[i - o] * v[j - o];
                }
            }
        }
        if n >= 2 {
            diag[n - 2] = a[(n - 2) * n + (n - 2)];
            off[n - 2] = a[(n - 1) * n + (n - 2)];
        }
        diag[n - 1] = a[(n - 1) * n + (n - 1)];
        off[n - 1] = 0.0;
        Self {
            n,
            diag,
            off,
            reflectors,
        }
    }

    /// y ← Q y
    fn back_transform(&self, y: &mut [f64]) {
        for (k, (tau, v)) in self.reflectors.iter().enumerate().rev() {
            if *tau == 0.0 {
                continue;
            }
            let tail = &mut y[k + 1..];
            let f = tau * dot(tail, v);
            for (t, vi) in tail.iter_mut().zip(v) {
                *t -= f * vi;
            }
        }
    }

    /// Qᵀ stored row-major (row i = column i of Q).
    fn q_transposed(&self) -> Vec<f64> {
        let n = self.n;
        let mut qt = vec![0.0; n * n];
        for i in 0..n {
            let row = &mut qt[i * n..(i + 1) * n];
            row[i] = 1.0;
            self.back_transform(row);
        }
        qt
    }

    /// Eigenvectors of T for the `count` smallest of the sorted `evals`.
    fn inverse_iteration(&self, evals: &[f64], count: usize) -> Vec<Vec<f64>> {
        let n = self.n;
        let tnorm = self
            .diag
            .iter()
            .zip(&self.off)
            .map(|(d, e)| d.abs() + 2.0 * e.abs())
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let eps = f64::EPSILON;
        let cluster_gap = 1e-3 * tnorm;
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
        let mut seed = 0x9e37_79b9_7f4a_7c15_u64;
        let mut cluster_start = 0;
        for k in 0..count {
            if k > 0 && evals[k] - evals[k - 1] > cluster_gap {
                cluster_start = k;
            }
            // successive members of a cluster get slightly separated shifts
            let shift = evals[k] + (k - cluster_start) as f64 * 10.0 * eps * tnorm;
            let mut x: Vec<f64> = (0..n)
                .map(|_| {
                    seed = seed
                        .wrapping_mul(6_364_136_223_846_793_005)
                        .wrapping_add(1_442_695_040_888_963_407);
                    ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
                })
                .collect();
            let solver = ShiftedTridiagonal::factor(&self.diag, &self.off, shift, eps * tnorm);
            for _ in 0..4 {
                orthogonalize(&mut x, &out[cluster_start..k]);
                normalize(&mut x);
                solver.solve(&mut x);
            }
            orthogonalize(&mut x, &out[cluster_start..k]);
            normalize(&mut x);
            out.push(x);
        }
        out
    }
}

/// LU factorisation with partial pivoting of T − μI for a tridiagonal T.
struct ShiftedTridiagonal {
    // row i of U has entries u0[i] (diag), u1[i], u2[i] to the right
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    // multiplier and whether rows i, i+1 were swapped
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedTridiagonal {
    fn factor(diag: &[f64], off: &[f64], shift: f64, tiny: f64) -> Self {
        let n = diag.len();
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut mult = vec![0.0; n];
        let mut swapped = vec![false; n];

        // current row: (a, b, c) at columns i, i+1, i+2
        let mut a = diag[0] - shift;
        let mut b = if n > 1 { off[0] } else { 0.0 };
        for i in 0..n {
            if i + 1 == n {
                u0[i] = if a.abs() < tiny { tiny.copysign(a) } else { a };
                break;
            }
            // next row: (sub, d, sup)
            let sub = off[i];
            let d = diag[i + 1] - shift;
            let sup = if i + 2 < n { off[i + 1] } else { 0.0 };
            if sub.abs() > a.abs() {
                swapped[i] = true;
                let m = a / sub;
                u0[i] = sub;
                u1[i] = d;
                u2[i] = sup;
                mult[i] = m;
                a = b - m * d;
                b = -m * sup;
            } else {
                let piv = if a.abs() < tiny { tiny.copysign(a) } else { a };
                let m = sub / piv;
                u0[i] = piv;
                u1[i] = b;
                u2[i] = 0.0;
                mult[i] = m;
                a = d - m * b;
                b = sup;
            }
        }
        Self {
            u0,
            u1,
            u2,
            mult,
            swapped,
        }
    }

    fn solve(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= self.mult[i] * x[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * x[i + 2];
            }
            x[i] = s / self.u0[i];
        }
        // rescale to avoid overflow near exact eigenvalues
        let big = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if big > 0.0 && big.is_finite() {
            for v in x.iter_mut() {
                *v /= big;
            }
        }
    }
}

/// Implicit-shift QL on the symmetric tridiagonal (d, e), e[i] = T[i, i+1].
/// When `zt` is given, its rows (length n each) are rotated alongside.
fn ql_implicit(d: &mut [f64], e: &mut [f64], mut zt: Option<(&mut Vec<f64>, usize)>) -> Result<()> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::NoConvergence);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some((z, nz)) = zt.as_mut() {
                        let nz = *nz;
                        let (lo, hi) = z.split_at_mut((i + 1) * nz);
                        let row_i = &mut lo[i * nz..];
                        let row_j = &mut hi[..nz];
                        for (zi, zj) in row_i.iter_mut().zip(row_j.iter_mut()) {
                            let hh = *zj;
                            *zj = s * *zi + c * hh;
                            *zi = c * *zi - s * hh;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[inline]
/// Σ_j r_j v_j, while adding r_j·vi into p_j.
fn symmetric_row(r: &[f64], v: &[f64], p: &mut [f64], vi: f64) -> f64 {
    const W: usize = 8;
    let mut acc = [0.0; W];
    let mut rc = r.chunks_exact(W);
    let mut vc = v.chunks_exact(W);
    let mut pc = p.chunks_exact_mut(W);
    for ((rb, vb), pb) in (&mut rc).zip(&mut vc).zip(&mut pc) {
        for l in 0..W {
            acc[l] += rb[l] * vb[l];
            pb[l] += rb[l] * vi;
        }
    }
    let mut tail = 0.0;
    for ((&x, &y), q) in rc.remainder().iter().zip(vc.remainder()).zip(pc.into_remainder()) {
        tail += x * y;
        *q += x * vi;
    }
    acc.iter().sum::<f64>() + tail
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators so the loop vectorises
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn normalize(x: &mut [f64]) {
    let nrm = dot(x, x).sqrt();
    if nrm > 0.0 {
        for v in x.iter_mut() {
            *v /= nrm;
        }
    }
}

fn orthogonalize(x: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(x, b);
        for (xi, bi) in x.iter_mut().zip(b) {
            *xi -= c * bi;
        }
    }
}
