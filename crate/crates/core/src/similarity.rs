//! Kernel, constraint intervals, the distance-contracting transform and
//! affinity matrices.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::numerics::SymmetricMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityParams {
    pub sigma: f64,
    pub delta: f64,
    pub alpha: f64,
    /// `f64::INFINITY` gives an interval covering every projected point.
    pub beta: f64,
}

impl SimilarityParams {
    pub fn new(sigma: f64, delta: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 0.5], got {delta}")));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be nonnegative, got {alpha}")));
        }
        if !(beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be nonnegative, got {beta}")));
        }
        Ok(Self {
            sigma,
            delta,
            alpha,
            beta,
        })
    }
}

/// k(x) = (x/α + 1)^α e^{−x}; α = 0 gives e^{−x}.
pub fn kernel(x: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        (-x).exp()
    } else {
        (x / alpha + 1.0).powf(alpha) * (-x).exp()
    }
}

/// dk/dx = −(x/α)(x/α + 1)^{α−1} e^{−x}.
pub fn kernel_deriv(x: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        -(-x).exp()
    } else {
        let r = x / alpha;
        -r * (r + 1.0).powf(alpha - 1.0) * (-x).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintInterval {
    pub lo: f64,
    pub hi: f64,
}

/// Count-weighted moments of a projected row.
#[derive(Debug, Clone, Copy)]
struct Moments {
    total: f64,
    mean: f64,
    sd: f64,
}

fn moments(row: ArrayView1<'_, f64>, counts: &[usize]) -> Result<Moments> {
    let total: f64 = counts.iter().map(|&c| c as f64).sum();
    if total == 0.0 {
        return Err(Error::EmptyData);
    }
    let mean = row.iter().zip(counts).map(|(p, &n)| n as f64 * p).sum::<f64>() / total;
    let var = row
        .iter()
        .zip(counts)
        .map(|(p, &n)| n as f64 * (p - mean) * (p - mean))
        .sum::<f64>()
        / total;
    Ok(Moments {
        total,
        mean,
        sd: var.sqrt(),
    })
}

/// [μ − βσ, μ + βσ] from count-weighted mean and (population) sd.
pub fn constraint_interval(
    row: ArrayView1<'_, f64>,
    counts: &[usize],
    beta: f64,
) -> Result<ConstraintInterval> {
    if row.len() != counts.len() {
        return Err(Error::Dimension("row and counts differ in length".into()));
    }
    let m = moments(row, counts)?;
    if beta.is_infinite() {
        let (lo, hi) = min_max(row);
        return Ok(ConstraintInterval {
            lo: lo - 1.0,
            hi: hi + 1.0,
        });
    }
    Ok(ConstraintInterval {
        lo: m.mean - beta * m.sd,
        hi: m.mean + beta * m.sd,
    })
}

fn min_max(row: ArrayView1<'_, f64>) -> (f64, f64) {
    row.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

fn shape_constant(delta: f64) -> f64 {
    (delta * (1.0 - delta)).powf(1.0 / delta)
}

/// Coordinatewise transform t_Δ(z).
pub fn transform_scalar(z: f64, iv: ConstraintInterval, delta: f64) -> f64 {
    let c = shape_constant(delta);
    let offset = delta * c.powf(1.0 - delta);
    if z < iv.lo {
        -delta * (iv.lo - z + c).powf(1.0 - delta) + offset
    } else if z > iv.hi {
        delta * (z - iv.hi + c).powf(1.0 - delta) - offset + (iv.hi - iv.lo)
    } else {
        z - iv.lo
    }
}

/// Partial derivatives (∂t/∂z, ∂t/∂lo, ∂t/∂hi).
fn transform_partials(z: f64, iv: ConstraintInterval, delta: f64) -> (f64, f64, f64) {
    let c = shape_constant(delta);
    if z < iv.lo {
        let g = delta * (1.0 - delta) * (iv.lo - z + c).powf(-delta);
        (g, -g, 0.0)
    } else if z > iv.hi {
        let g = delta * (1.0 - delta) * (z - iv.hi + c).powf(-delta);
        (g, -1.0, 1.0 - g)
    } else {
        (1.0, -1.0, 0.0)
    }
}

pub fn transform(y: ArrayView1<'_, f64>, intervals: &[ConstraintInterval], delta: f64) -> Array1<f64> {
    Array1::from_iter(
        y.iter()
            .zip(intervals)
            .map(|(&z, &iv)| transform_scalar(z, iv, delta)),
    )
}

/// Intervals and transformed coordinates for every row of P (l×K).
pub fn transform_rows(
    p: ArrayView2<'_, f64>,
    counts: &[usize],
    beta: f64,
    delta: f64,
) -> Result<(Vec<ConstraintInterval>, Array2<f64>)> {
    let intervals: Vec<ConstraintInterval> = p
        .rows()
        .into_iter()
        .map(|r| constraint_interval(r, counts, beta))
        .collect::<Result<_>>()?;
    let mut t = Array2::zeros(p.dim());
    for (a, iv) in intervals.iter().enumerate() {
        for k in 0..p.ncols() {
            t[[a, k]] = transform_scalar(p[[a, k]], *iv, delta);
        }
    }
    Ok((intervals, t))
}

/// Factored Jacobian of one transformed row with respect to the projected
/// row: D[j, k] = dz[j]·[j = k] + dl[j]·dlo[k] + dh[j]·dhi[k].
#[derive(Debug, Clone)]
pub struct TransformJacobian {
    pub dz: Vec<f64>,
    pub dl: Vec<f64>,
    pub dh: Vec<f64>,
    pub dlo: Vec<f64>,
    pub dhi: Vec<f64>,
}

impl TransformJacobian {
    pub fn new(row: ArrayView1<'_, f64>, counts: &[usize], beta: f64, delta: f64) -> Result<Self> {
        let k = row.len();
        let iv = constraint_interval(row, counts, beta)?;
        let m = moments(row, counts)?;

        // ∂lo/∂P_k and ∂hi/∂P_k
        let (dlo, dhi): (Vec<f64>, Vec<f64>) = if beta.is_infinite() {
            let argmin = (0..k).min_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap_or(0);
            let argmax = (0..k)
                .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                .unwrap_or(0);
            (
                (0..k).map(|i| if i == argmin { 1.0 } else { 0.0 }).collect(),
                (0..k).map(|i| if i == argmax { 1.0 } else { 0.0 }).collect(),
            )
        } else if k == 1 {
            (vec![1.0], vec![1.0])
        } else {
            if beta > 0.0 && m.sd == 0.0 {
                return Err(Error::DegenerateProjection(0));
            }
            let dsd = |i: usize| {
                if beta == 0.0 {
                    0.0
                } else {
                    counts[i] as f64 * (row[i] - m.mean) / (m.total * m.sd)
                }
            };
            (0..k)
                .map(|i| {
                    let w = counts[i] as f64 / m.total;
                    (w - beta * dsd(i), w + beta * dsd(i))
                })
                .unzip()
        };

        let mut dz = Vec::with_capacity(k);
        let mut dl = Vec::with_capacity(k);
        let mut dh = Vec::with_capacity(k);
        for &z in row.iter() {
            let (a, b, c) = transform_partials(z, iv, delta);
            dz.push(a);
            dl.push(b);
            dh.push(c);
        }
        Ok(Self { dz, dl, dh, dlo, dhi })
    }

    /// gᵀD for a row vector g.
    pub fn apply_left(&self, g: ArrayView1<'_, f64>) -> Array1<f64> {
        let gl: f64 = g.iter().zip(&self.dl).map(|(a, b)| a * b).sum();
        let gh: f64 = g.iter().zip(&self.dh).map(|(a, b)| a * b).sum();
        Array1::from_iter((0..self.dz.len()).map(|k| g[k] * self.dz[k] + gl * self.dlo[k] + gh * self.dhi[k]))
    }

    /// D·p for a column vector p.
    pub fn apply_right(&self, p: ArrayView1<'_, f64>) -> Array1<f64> {
        let plo: f64 = p.iter().zip(&self.dlo).map(|(a, b)| a * b).sum();
        let phi: f64 = p.iter().zip(&self.dhi).map(|(a, b)| a * b).sum();
        Array1::from_iter((0..self.dz.len()).map(|j| self.dz[j] * p[j] + self.dl[j] * plo + self.dh[j] * phi))
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let k = self.dz.len();
        let mut out = Array2::zeros((k, k));
        for j in 0..k {
            for c in 0..k {
                out[[j, c]] = self.dl[j] * self.dlo[c] + self.dh[j] * self.dhi[c];
            }
            out[[j, j]] += self.dz[j];
        }
        out
    }
}

/// K×K Jacobian D[j, k] = ∂T_j/∂P_k for one projected row, including the
/// dependence of the interval on every P_k through the weighted mean and sd.
pub fn transform_deriv_matrix(
    row: ArrayView1<'_, f64>,
    counts: &[usize],
    beta: f64,
    delta: f64,
) -> Result<Array2<f64>> {
    Ok(TransformJacobian::new(row, counts, beta, delta)?.to_dense())
}

/// A_ij = k(‖t_i − t_j‖/σ) over the columns of T (l×K).
pub fn affinity(t: ArrayView2<'_, f64>, sigma: f64, alpha: f64) -> SymmetricMatrix {
    let dist = pairwise_distances(t);
    SymmetricMatrix::from_fn(t.ncols(), |i, j| {
        if i == j {
            1.0
        } else {
            kernel(dist[[i, j]] / sigma, alpha)
        }
    })
}

/// Euclidean distances between the columns of T.
pub fn pairwise_distances(t: ArrayView2<'_, f64>) -> Array2<f64> {
    let (l, k) = t.dim();
    let rows: Vec<Vec<f64>> = t.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut out = Array2::zeros((k, k));
    for i in 0..k {
        for j in (i + 1)..k {
            let mut s = 0.0;
            for row in rows.iter().take(l) {
                let d = row[i] - row[j];
                s += d * d;
            }
            let r = s.sqrt();
            out[[i, j]] = r;
            out[[j, i]] = r;
        }
    }
    out
}
