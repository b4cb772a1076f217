//! Graph Laplacians, microcluster-reduced Laplacians, the second eigenpair
//! and the reduction error bound.

use ndarray::{s, Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::numerics::{sym_eig_lowest_by, SymmetricMatrix};
use crate::similarity::{affinity, transform_rows, SimilarityParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LaplacianKind {
    Standard,
    Normalized,
}

#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub lambda2: f64,
    /// Unit eigenvector for λ₂, largest-magnitude entry positive.
    pub u: Array1<f64>,
    pub multiplicity: usize,
    /// Orthonormal eigenvectors (columns) for the eigenvalues coalesced with λ₂.
    pub q: Array2<f64>,
    pub full_spectrum: Array1<f64>,
}

/// Relative tolerance under which eigenvalues count as coalesced with λ₂.
pub fn multiplicity_tolerance(lambda2: f64) -> f64 {
    1e-8 * lambda2.abs().max(1.0)
}

/// Coalescence tolerance for a Laplacian spectrum: relative 1e-8 in λ₂, but
/// never below the eigensolver's absolute error on a matrix of norm `norm`
/// and order `n`.
pub fn spectrum_tolerance(lambda2: f64, norm: f64, n: usize) -> f64 {
    let noise = 10.0 * (n as f64).sqrt() * f64::EPSILON * norm;
    (1e-8 * lambda2.abs()).max(noise).min(multiplicity_tolerance(lambda2))
}

/// L = D − A or D^{−1/2}(D − A)D^{−1/2}; degrees include the diagonal of A.
pub fn laplacian(a: &SymmetricMatrix, kind: LaplacianKind) -> Result<SymmetricMatrix> {
    let a = a.view();
    let deg: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
    if deg.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::DegenerateGraph);
    }
    Ok(match kind {
        LaplacianKind::Standard => SymmetricMatrix::from_fn(deg.len(), |i, j| {
            if i == j {
                deg[i] - a[[i, i]]
            } else {
                -a[[i, j]]
            }
        }),
        LaplacianKind::Normalized => {
            let inv: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
            SymmetricMatrix::from_fn(deg.len(), |i, j| {
                let l = if i == j { deg[i] - a[[i, i]] } else { -a[[i, j]] };
                l * inv[i] * inv[j]
            })
        }
    })
}

/// N − B for microcluster affinities `s` (K×K, unit diagonal) and counts.
pub fn reduced_standard_from_affinity(s: &SymmetricMatrix, counts: &[usize]) -> Result<SymmetricMatrix> {
    check_counts(s, counts)?;
    let s = s.view();
    let n: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let sq: Vec<f64> = n.iter().map(|x| x.sqrt()).collect();
    let diag: Vec<f64> = (0..n.len())
        .map(|i| (0..n.len()).map(|j| n[j] * s[[i, j]]).sum())
        .collect();
    Ok(SymmetricMatrix::from_fn(n.len(), |i, j| {
        let b = sq[i] * sq[j] * s[[i, j]];
        if i == j {
            diag[i] - b
        } else {
            -b
        }
    }))
}

/// Normalized Laplacian of the K-node graph with weights n_i n_j s_ij.
/// Returns the matrix and the weighted degrees.
pub fn reduced_normalized_from_affinity(
    s: &SymmetricMatrix,
    counts: &[usize],
) -> Result<(SymmetricMatrix, Vec<f64>)> {
    check_counts(s, counts)?;
    let k = counts.len();
    let n: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let w = Array2::from_shape_fn((k, k), |(i, j)| n[i] * n[j] * s[[i, j]]);
    let deg: Vec<f64> = w.rows().into_iter().map(|r| r.sum()).collect();
    let l = laplacian(&SymmetricMatrix::new(w)?, LaplacianKind::Normalized)?;
    Ok((l, deg))
}

fn check_counts(s: &SymmetricMatrix, counts: &[usize]) -> Result<()> {
    if s.order() != counts.len() {
        return Err(Error::Dimension(format!(
            "{} counts for a {}-node graph",
            counts.len(),
            s.order()
        )));
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::EmptyData);
    }
    Ok(())
}

fn reduced_affinity(pc: ArrayView2<'_, f64>, counts: &[usize], p: &SimilarityParams) -> Result<SymmetricMatrix> {
    let (_, t) = transform_rows(pc, counts, p.beta, p.delta)?;
    Ok(affinity(t.view(), p.sigma, p.alpha))
}

/// Reduced standard Laplacian of projected centers `pc` (l×K).
pub fn reduced_standard(pc: ArrayView2<'_, f64>, counts: &[usize], p: &SimilarityParams) -> Result<SymmetricMatrix> {
    reduced_standard_from_affinity(&reduced_affinity(pc, counts, p)?, counts)
}

/// Reduced normalized Laplacian of projected centers `pc` (l×K).
pub fn reduced_normalized(pc: ArrayView2<'_, f64>, counts: &[usize], p: &SimilarityParams) -> Result<SymmetricMatrix> {
    Ok(reduced_normalized_from_affinity(&reduced_affinity(pc, counts, p)?, counts)?.0)
}

pub fn second_eigenpair(l: &SymmetricMatrix) -> Result<SpectralResult> {
    let n = l.order();
    if n < 2 {
        return Err(Error::TooSmall { needed: 2, got: n });
    }
    // Gershgorin bound; exact for a Laplacian up to the factor 2
    let norm = 2.0 * (0..n).map(|i| l[[i, i]].abs()).fold(0.0, f64::max);
    let eig = sym_eig_lowest_by(l, |ev| 1 + coalesced(ev, norm, n))?;
    let t = coalesced(eig.eigenvalues.as_slice().expect("contiguous"), norm, n);
    let mut q = eig.eigenvectors.slice(s![.., 1..1 + t]).to_owned();
    for mut col in q.columns_mut() {
        let big = col.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if big < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
    Ok(SpectralResult {
        lambda2: eig.eigenvalues[1],
        u: q.column(0).to_owned(),
        multiplicity: t,
        q,
        full_spectrum: eig.eigenvalues,
    })
}

/// Number of eigenvalues at index ≥ 1 within tolerance of λ₂.
fn coalesced(ev: &[f64], norm: f64, n: usize) -> usize {
    let tol = spectrum_tolerance(ev[1], norm, n);
    ev[1..].iter().take_while(|&&x| x - ev[1] <= tol).count()
}

/// Upper bound on the relative λ₂ error of the reduced standard Laplacian.
pub fn error_bound(radii: &[f64], diam_x: f64, sigma: f64, alpha: f64) -> f64 {
    if radii.len() < 2 {
        return 0.0;
    }
    // the bound increases with ρ_i + ρ_j, so the two largest radii attain it
    let (mut a, mut b) = (0.0_f64, 0.0_f64);
    for &r in radii {
        if r > a {
            b = a;
            a = r;
        } else if r > b {
            b = r;
        }
    }
    let r = a + b;
    let shape = if alpha == 0.0 {
        1.0
    } else {
        ((diam_x + sigma * alpha) / (diam_x + r + sigma * alpha)).powf(alpha)
    };
    (shape * (r / sigma).exp() - 1.0).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn spectrum_tolerance_is_relative_above_rounding() {
        assert_eq!(spectrum_tolerance(2.0, 1.0, 10), 2e-8);
        let noise = 10.0 * 10f64.sqrt() * f64::EPSILON;
        assert_eq!(spectrum_tolerance(1e-100, 1.0, 10), noise);
        assert!(spectrum_tolerance(1e-3, 1e12, 10) <= multiplicity_tolerance(1e-3));
    }

    use crate::numerics::sym_eig;

    #[test]
    fn two_node_laplacians() {
        let s = (-1.0_f64).exp();
        let a = SymmetricMatrix::new(array![[1.0, s], [s, 1.0]]).unwrap();
        let l = laplacian(&a, LaplacianKind::Standard).unwrap();
        assert_eq!(l.view(), array![[s, -s], [-s, s]]);
        let ln = laplacian(&a, LaplacianKind::Normalized).unwrap();
        let w = s / (1.0 + s);
        assert!((&ln.view() - &array![[w, -w], [-w, w]]).iter().all(|x| x.abs() < 1e-15));
        let r = second_eigenpair(&ln).unwrap();
        assert!((r.lambda2 - 0.537_882_842_739_990_2).abs() < 1e-12);
    }

    #[test]
    fn second_eigenpair_two_by_two() {
        let s = (-1.0_f64).exp();
        let l = SymmetricMatrix::new(array![[s, -s], [-s, s]]).unwrap();
        let r = second_eigenpair(&l).unwrap();
        assert!((r.lambda2 - 2.0 * s).abs() < 1e-14);
        assert_eq!(r.multiplicity, 1);
        let h = 0.5_f64.sqrt();
        assert!((r.u[0].abs() - h).abs() < 1e-12 && (r.u[0] + r.u[1]).abs() < 1e-12);
        assert!(r.u.iter().any(|&x| (x - h).abs() < 1e-12));
    }

    #[test]
    fn complete_graph_multiplicity() {
        for n in [3usize, 5, 8] {
            let a = SymmetricMatrix::from_fn(n, |_, _| 1.0);
            let l = laplacian(&a, LaplacianKind::Standard).unwrap();
            let r = second_eigenpair(&l).unwrap();
            assert!((r.lambda2 - n as f64).abs() < 1e-10);
            assert_eq!(r.multiplicity, n - 1);
            let qtq = r.q.t().dot(&r.q);
            assert!((&qtq - &Array2::<f64>::eye(n - 1)).iter().all(|x| x.abs() < 1e-10));
        }
    }

    #[test]
    fn path_is_simple() {
        let t = array![[0.0, 1.0, 2.0]];
        let a = affinity(t.view(), 1.0, 0.1);
        let l = laplacian(&a, LaplacianKind::Standard).unwrap();
        let r = second_eigenpair(&l).unwrap();
        let full = sym_eig(&l).unwrap();
        assert_eq!(r.multiplicity, 1);
        assert!((r.lambda2 - full.eigenvalues[1]).abs() < 1e-12);
    }

    #[test]
    fn too_small_and_degenerate() {
        let l = SymmetricMatrix::new(array![[0.0]]).unwrap();
        assert!(matches!(second_eigenpair(&l), Err(Error::TooSmall { .. })));
        let a = SymmetricMatrix::new(array![[0.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(laplacian(&a, LaplacianKind::Standard), Err(Error::DegenerateGraph)));
    }

    fn params_inf() -> SimilarityParams {
        SimilarityParams::new(1.0, 0.01, 0.0, f64::INFINITY).unwrap()
    }

    #[test]
    fn reduced_standard_small_expansion() {
        let pc = array![[0.0, 1.0]];
        let red = reduced_standard(pc.view(), &[2, 1], &params_inf()).unwrap();
        let expanded = array![[0.0, 0.0, 1.0]];
        let full = laplacian(&affinity(expanded.view(), 1.0, 0.0), LaplacianKind::Standard).unwrap();
        let a = second_eigenpair(&red).unwrap().lambda2;
        let b = second_eigenpair(&full).unwrap().lambda2;
        assert!((a - b).abs() <= 1e-10 * b);
        // null vector (√n₁, …, √n_K)
        let v = array![2.0_f64.sqrt(), 1.0];
        assert!(red.view().dot(&v).iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn reduced_normalized_small_expansion() {
        let pc = array![[0.0, 1.0]];
        let red = reduced_normalized(pc.view(), &[2, 1], &params_inf()).unwrap();
        let expanded = array![[0.0, 0.0, 1.0]];
        let full = laplacian(&affinity(expanded.view(), 1.0, 0.0), LaplacianKind::Normalized).unwrap();
        let a = second_eigenpair(&red).unwrap();
        let b = second_eigenpair(&full).unwrap().lambda2;
        assert!((a.lambda2 - b).abs() <= 1e-10 * b);
        assert!(a.full_spectrum[0].abs() < 1e-10);
    }

    #[test]
    fn unit_counts_reduce_to_plain_laplacians() {
        let pc = array![[0.0, 1.0, 2.5, -0.7], [1.0, 0.3, -2.0, 0.0]];
        let p = SimilarityParams::new(0.8, 0.01, 0.1, 1.5).unwrap();
        let (_, t) = transform_rows(pc.view(), &[1; 4], p.beta, p.delta).unwrap();
        let a = affinity(t.view(), p.sigma, p.alpha);
        let std = reduced_standard(pc.view(), &[1; 4], &p).unwrap();
        let lap = laplacian(&a, LaplacianKind::Standard).unwrap();
        assert!((&std.view() - &lap.view()).iter().all(|x| x.abs() < 1e-15));
        let nrm = reduced_normalized(pc.view(), &[1; 4], &p).unwrap();
        let lapn = laplacian(&a, LaplacianKind::Normalized).unwrap();
        assert!((&nrm.view() - &lapn.view()).iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn error_bound_examples() {
        assert_eq!(error_bound(&[0.0, 0.0, 0.0], 3.0, 1.0, 0.1), 0.0);
        let b = error_bound(&[0.05, 0.05, 0.01], 3.0, 1.0, 0.0);
        assert!((b - (0.1_f64.exp() - 1.0)).abs() < 1e-15);
        assert!((b - 0.105_170_918_075_647_6).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn quadratic_form_and_null_vector(
            pts in prop::collection::vec(-3.0f64..3.0, 2..20),
            v in prop::collection::vec(-1.0f64..1.0, 20),
        ) {
            let n = pts.len();
            let t = Array2::from_shape_vec((1, n), pts).unwrap();
            let a = affinity(t.view(), 0.9, 0.1);
            let l = laplacian(&a, LaplacianKind::Standard).unwrap();
            let v = Array1::from(v[..n].to_vec());
            let lhs = v.dot(&l.view().dot(&v));
            let mut rhs = 0.0;
            for i in 0..n {
                for j in 0..n {
                    rhs += 0.5 * a[[i, j]] * (v[i] - v[j]).powi(2);
                }
            }
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
            for row in l.view().rows() {
                prop_assert!(row.sum().abs() < 1e-12);
            }
            let eig = sym_eig(&l).unwrap();
            prop_assert!(eig.eigenvalues[0].abs() < 1e-10);
            let c = eig.eigenvectors.column(0);
            let expect = 1.0 / (n as f64).sqrt();
            prop_assert!(c.iter().all(|x| (x.abs() - expect).abs() < 1e-8));
            // normalized: null vector ∝ D^{1/2}𝟏
            let ln = laplacian(&a, LaplacianKind::Normalized).unwrap();
            let d: Array1<f64> = a.view().rows().into_iter().map(|r| r.sum().sqrt()).collect();
            prop_assert!(ln.view().dot(&d).iter().all(|x| x.abs() < 1e-10 * d.sum()));
        }

        #[test]
        fn error_bound_monotone_in_sigma(
            radii in prop::collection::vec(0.0f64..0.5, 2..10),
            s1 in 0.1f64..5.0, ds in 0.0f64..5.0, alpha in 0.0f64..1.0,
        ) {
            let a = error_bound(&radii, 4.0, s1, alpha);
            let b = error_bound(&radii, 4.0, s1 + ds, alpha);
            prop_assert!(b <= a + 1e-15);
        }
    }
}
