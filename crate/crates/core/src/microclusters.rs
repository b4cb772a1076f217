//! Microcluster summaries (centers, counts, radii) of a dataset.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::numerics::kmeans;
use crate::projection::{project, ProjectionMatrix};

/// Datasets up to this size get an exact O(N²) diameter.
const EXACT_DIAMETER_LIMIT: usize = 2000;

#[derive(Debug, Clone)]
pub struct MicroclusterSummary {
    /// d×K
    pub centers: Array2<f64>,
    pub counts: Vec<usize>,
    pub radii: Vec<f64>,
    pub diam_x: f64,
    /// Microcluster index of every observation.
    pub source_assignments: Vec<usize>,
}

impl MicroclusterSummary {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.centers.nrows()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Summary in which every observation is its own microcluster.
    pub fn exact(x: ArrayView2<'_, f64>) -> Self {
        let n = x.ncols();
        Self {
            centers: x.to_owned(),
            counts: vec![1; n],
            radii: vec![0.0; n],
            diam_x: diameter(x),
            source_assignments: (0..n).collect(),
        }
    }

    /// Builds the summary from a partition of the columns of `x`.
    pub fn from_assignments(x: ArrayView2<'_, f64>, assignments: Vec<usize>, k: usize) -> Result<Self> {
        let (d, n) = x.dim();
        if assignments.len() != n {
            return Err(Error::Dimension("one assignment per observation required".into()));
        }
        let mut counts = vec![0usize; k];
        let mut centers = Array2::<f64>::zeros((d, k));
        for (i, &a) in assignments.iter().enumerate() {
            if a >= k {
                return Err(Error::InvalidK { k: a + 1, n: k });
            }
            counts[a] += 1;
            let mut c = centers.column_mut(a);
            c += &x.column(i);
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::EmptyData);
        }
        for (a, mut c) in centers.columns_mut().into_iter().enumerate() {
            c /= counts[a] as f64;
        }
        let mut radii = vec![0.0_f64; k];
        for (i, &a) in assignments.iter().enumerate() {
            let r = dist(x.column(i).iter().copied(), centers.column(a).iter().copied());
            radii[a] = radii[a].max(r);
        }
        let diam_x = if n <= EXACT_DIAMETER_LIMIT {
            diameter(x)
        } else {
            diameter(centers.view()) + 2.0 * radii.iter().copied().fold(0.0, f64::max)
        };
        Ok(Self {
            centers,
            counts,
            radii,
            diam_x,
            source_assignments: assignments,
        })
    }
}

/// Default microcluster count: min(N, max(200, ⌈N/10⌉)).
pub fn default_microclusters(n: usize) -> usize {
    n.min(200.max(n.div_ceil(10)))
}

/// k-means summary of `x` (d×N) into `k` microclusters.
pub fn summarize(x: ArrayView2<'_, f64>, k: usize, seed: u64) -> Result<MicroclusterSummary> {
    let n = x.ncols();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    if k == n {
        return Ok(MicroclusterSummary::exact(x));
    }
    let km = kmeans(x, k, seed)?;
    MicroclusterSummary::from_assignments(x, km.assignments, k)
}

/// k-means on VᵀX; statistics of the resulting cells taken in the original space.
pub fn resummarize_projected(
    x: ArrayView2<'_, f64>,
    v: &ProjectionMatrix,
    k: usize,
    seed: u64,
) -> Result<MicroclusterSummary> {
    let n = x.ncols();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    if k == n {
        return Ok(MicroclusterSummary::exact(x));
    }
    let p = project(v, x)?;
    let km = kmeans(p.view(), k, seed)?;
    MicroclusterSummary::from_assignments(x, km.assignments, k)
}

fn dist(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> f64 {
    a.zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

/// Largest pairwise distance between columns.
pub fn diameter(x: ArrayView2<'_, f64>) -> f64 {
    let n = x.ncols();
    let cols: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
    let mut best = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.max(s);
        }
    }
    best.sqrt()
}
