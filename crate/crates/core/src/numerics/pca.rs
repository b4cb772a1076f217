use ndarray::{Array2, ArrayView2, Axis};

use super::eigen::{sym_eig, SymmetricMatrix};
use crate::error::{Error, Result};

/// Top `l` eigenvectors of the sample covariance of `x` (d×N, one column per
/// observation), ordered by decreasing eigenvalue.
pub fn pca_components(x: ArrayView2<'_, f64>, l: usize) -> Result<Array2<f64>> {
    let (d, n) = x.dim();
    if l == 0 || l > d {
        return Err(Error::Dimension(format!("requested {l} components from {d} dimensions")));
    }
    if n < 2 {
        return Err(Error::TooSmall { needed: 2, got: n });
    }
    let cov = covariance(x);
    let eig = sym_eig(&SymmetricMatrix::new(cov)?)?;
    let mut out = Array2::zeros((d, l));
    for k in 0..l {
        out.column_mut(k).assign(&eig.eigenvectors.column(d - 1 - k));
    }
    Ok(out)
}

/// Sample covariance with the 1/(N−1) normalisation.
pub(crate) fn covariance(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.ncols();
    let mean = x.mean_axis(Axis(1)).expect("non-empty");
    let centered = &x - &mean.insert_axis(Axis(1));
    centered.dot(&centered.t()) / (n as f64 - 1.0)
}
