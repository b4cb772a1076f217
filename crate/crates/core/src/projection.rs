//! Polar-angle parameterisation of projection matrices.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// (d−1)×l matrix of polar angles, every entry in [0, π).
#[derive(Debug, Clone, PartialEq)]
pub struct Angles(Array2<f64>);

/// d×l matrix with unit-norm columns and nonnegative last row.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix(Array2<f64>);

impl Angles {
    /// Wraps each column into [0, π)^{d−1}.
    ///
    /// An angle leaving [0, π) is reduced modulo π and the angles before it
    /// are reflected (θ → π − θ), which negates the column of V. The objective
    /// is invariant to column sign, so the wrapped point is equivalent.
    pub fn new(mut values: Array2<f64>) -> Self {
        let (rows, cols) = values.dim();
        for j in 0..cols {
            for k in (0..rows).rev() {
                let v = values[[k, j]];
                let mut turns = (v / PI).floor();
                let mut w = v - turns * PI;
                if w >= PI {
                    w -= PI;
                    turns += 1.0;
                }
                values[[k, j]] = w.max(0.0);
                if (turns as i64).rem_euclid(2) == 1 {
                    for r in 0..k {
                        values[[r, j]] = PI - values[[r, j]];
                    }
                }
            }
        }
        Self(values)
    }

    pub fn from_columns(cols: &[Array1<f64>]) -> Result<Self> {
        let d1 = cols.first().map(|c| c.len()).unwrap_or(0);
        if d1 == 0 || cols.iter().any(|c| c.len() != d1) {
            return Err(Error::Dimension("angle columns must be nonempty and of equal length".into()));
        }
        let mut m = Array2::zeros((d1, cols.len()));
        for (j, c) in cols.iter().enumerate() {
            m.column_mut(j).assign(c);
        }
        Ok(Self::new(m))
    }

    /// Ambient dimension d.
    pub fn dim(&self) -> usize {
        self.0.nrows() + 1
    }

    /// Number of projection columns l.
    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

impl ProjectionMatrix {
    /// Checks unit-norm columns within 1e−8.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        for col in values.columns() {
            let nrm = col.dot(&col).sqrt();
            if (nrm - 1.0).abs() > 1e-8 {
                return Err(Error::NotNormalized(nrm));
            }
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

pub fn angles_to_matrix(theta: &Angles) -> ProjectionMatrix {
    let d = theta.dim();
    let l = theta.ncols();
    let th = theta.values();
    let mut v = Array2::zeros((d, l));
    for j in 0..l {
        let mut prod = 1.0;
        for i in 0..d - 1 {
            v[[i, j]] = th[[i, j]].cos() * prod;
            prod *= th[[i, j]].sin();
        }
        v[[d - 1, j]] = prod;
    }
    ProjectionMatrix(v)
}

/// Inverse of [`angles_to_matrix`] for one column, up to sign.
pub fn vector_to_angles(v: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let d = v.len();
    if d < 2 {
        return Err(Error::Dimension("need d >= 2".into()));
    }
    let nrm = v.dot(&v).sqrt();
    if (nrm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(nrm));
    }
    let sign = if v[d - 1] < 0.0 { -1.0 } else { 1.0 };
    let w: Vec<f64> = v.iter().map(|x| sign * x).collect();
    // suffix[i] = ‖(w_i, …, w_d)‖
    let mut suffix = vec![0.0_f64; d + 1];
    for i in (0..d).rev() {
        suffix[i] = suffix[i + 1].hypot(w[i]);
    }
    let mut out = Array1::zeros(d - 1);
    for i in 0..d - 1 {
        if suffix[i] < 1e-12 {
            break;
        }
        out[i] = (w[i] / suffix[i]).clamp(-1.0, 1.0).acos();
    }
    // acos can return exactly π only when the tail is zero; fold into range
    for x in out.iter_mut() {
        if *x >= PI {
            *x = 0.0;
        }
    }
    Ok(out)
}

/// Angles for each column of `v` (d×l).
pub fn matrix_to_angles(v: ArrayView2<'_, f64>) -> Result<Angles> {
    let cols: Vec<Array1<f64>> = v
        .columns()
        .into_iter()
        .map(vector_to_angles)
        .collect::<Result<_>>()?;
    Angles::from_columns(&cols)
}

/// d×(d−1) Jacobian of column `j` of V with respect to its angles.
#[allow(non_snake_case)]
pub fn dV_dtheta(theta: &Angles, j: usize) -> Array2<f64> {
    let d = theta.dim();
    let th = theta.values().column(j).to_vec();
    let s: Vec<f64> = th.iter().map(|t| t.sin()).collect();
    let c: Vec<f64> = th.iter().map(|t| t.cos()).collect();
    let mut out = Array2::zeros((d, d - 1));
    for col in 0..d - 1 {
        for r in col..d {
            // V_r = f_r · ∏_{k<r} s_k with f_r = c_r (r < d−1) or 1
            let mut val = 1.0;
            for k in 0..r.min(d - 1) {
                val *= if k == col { c[k] } else { s[k] };
            }
            if r < d - 1 {
                val *= if r == col { -s[r] } else { c[r] };
            }
            out[[r, col]] = val;
        }
    }
    out
}

/// P = VᵀX.
pub fn project(v: &ProjectionMatrix, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if v.0.nrows() != x.nrows() {
        return Err(Error::Dimension(format!(
            "projection has {} rows, data has {}",
            v.0.nrows(),
            x.nrows()
        )));
    }
    Ok(v.0.t().dot(&x))
}
