//! Gradient of λ₂ of the reduced Laplacian with respect to the projection
//! angles, and the orthogonality/correlation penalty.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::microclusters::MicroclusterSummary;
use crate::numerics::SymmetricMatrix;
use crate::projection::{angles_to_matrix, dV_dtheta, project, Angles};
use crate::similarity::{affinity, pairwise_distances, transform_rows, SimilarityParams, TransformJacobian};
use crate::spectral::{
    reduced_normalized_from_affinity, reduced_standard_from_affinity, second_eigenpair, LaplacianKind,
    SpectralResult,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveSpec {
    pub kind: LaplacianKind,
    /// Penalty weight; positive favours orthogonal columns, negative correlated.
    pub omega: f64,
    pub dims: usize,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    /// λ₂ + penalty.
    pub value: f64,
    /// (d−1)×l
    pub grad: Array2<f64>,
    pub lambda2: f64,
    pub multiplicity: usize,
    pub spectral: SpectralResult,
}

/// Quantities derived from θ on the way to λ₂.
#[derive(Debug, Clone)]
pub struct ReducedState {
    /// l×K projected centers.
    pub p: Array2<f64>,
    /// l×K transformed centers.
    pub t: Array2<f64>,
    pub dist: Array2<f64>,
    pub affinity: SymmetricMatrix,
    pub laplacian: SymmetricMatrix,
    /// Weighted degrees n_i Σ_j n_j s_ij (used by the normalized kind).
    pub degrees: Vec<f64>,
}

impl ReducedState {
    pub fn new(
        theta: &Angles,
        summary: &MicroclusterSummary,
        kind: LaplacianKind,
        params: &SimilarityParams,
    ) -> Result<Self> {
        if theta.dim() != summary.dim() {
            return Err(Error::Dimension(format!(
                "angles describe dimension {}, data has {}",
                theta.dim(),
                summary.dim()
            )));
        }
        let v = angles_to_matrix(theta);
        let p = project(&v, summary.centers.view())?;
        Self::from_projected(p, &summary.counts, kind, params)
    }

    fn from_projected(
        p: Array2<f64>,
        counts: &[usize],
        kind: LaplacianKind,
        params: &SimilarityParams,
    ) -> Result<Self> {
        let (_, t) = transform_rows(p.view(), counts, params.beta, params.delta)?;
        let dist = pairwise_distances(t.view());
        let s = affinity(t.view(), params.sigma, params.alpha);
        let (laplacian, degrees) = match kind {
            LaplacianKind::Standard => {
                let l = reduced_standard_from_affinity(&s, counts)?;
                (l, weighted_degrees(&s, counts))
            }
            LaplacianKind::Normalized => reduced_normalized_from_affinity(&s, counts)?,
        };
        Ok(Self {
            p,
            t,
            dist,
            affinity: s,
            laplacian,
            degrees,
        })
    }
}

/// λ₂ at or below this fraction of λ₃ is recomputed by inverse iteration.
const TINY_RATIO: f64 = 1e-6;

const CERTIFY_DEPTH: usize = 3;
const CERTIFY_STEPS: usize = 100;
/// Largest λ₂/λ₃ accepted as simple when λ₃ is known only by its bound.
const CERTIFY_RATIO: f64 = 0.5;

/// Second eigenpair together with w, the eigenvector in the expanded
/// (mass-weighted) coordinates, and optionally the differences w_a − w_b
/// computed without cancellation.
pub(crate) struct Fiedler {
    pub spectral: SpectralResult,
    pub w: Vec<f64>,
    pub diff: Option<Array2<f64>>,
}

impl ReducedState {
    /// Second eigenpair with λ₂ recomputed as the Rayleigh quotient
    /// ½ Σ W_ab (w_a − w_b)² of the expanded graph, which keeps its relative
    /// accuracy when λ₂ is far below the eigensolver's absolute error.
    pub fn second_eigenpair(&self, counts: &[usize], kind: LaplacianKind) -> Result<SpectralResult> {
        Ok(self.fiedler(counts, kind)?.spectral)
    }

    fn mass(&self, n: &[f64], kind: LaplacianKind) -> Vec<f64> {
        match kind {
            LaplacianKind::Standard => n.to_vec(),
            LaplacianKind::Normalized => self.degrees.clone(),
        }
    }

    pub(crate) fn fiedler(&self, counts: &[usize], kind: LaplacianKind) -> Result<Fiedler> {
        let n: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let mass = self.mass(&n, kind);
        let k = n.len();
        let wt = Array2::from_shape_fn((k, k), |(a, b)| if a == b { 0.0 } else { n[a] * n[b] * self.affinity[[a, b]] });
        graph_fiedler(&self.laplacian, &wt, &mass, CERTIFY_DEPTH)
    }
}

/// Second eigenpair of G y = λ M y, G the Laplacian of the edge weights `wt`
/// and `lap` = M^{-1/2} G M^{-1/2}. λ₂ is recomputed as the Rayleigh quotient
/// ½ Σ W_ab (w_a − w_b)², which keeps its relative accuracy when λ₂ is far
/// below the eigensolver's absolute error. When λ₂ is tiny it is refined by
/// inverse iteration, and up to `certify` levels deep a λ₃ lost in rounding is replaced by
/// a lower bound from the two sides of the Fiedler split.
fn graph_fiedler(lap: &SymmetricMatrix, wt: &Array2<f64>, mass: &[f64], certify: usize) -> Result<Fiedler> {
    let mut sp = second_eigenpair(lap)?;
    let k = mass.len();
    let root: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
    let plain = |sp: SpectralResult| {
        let w = (0..k).map(|a| sp.u[a] / root[a]).collect();
        Fiedler { spectral: sp, w, diff: None }
    };
    let along = (0..k).map(|a| sp.u[a] * root[a]).sum::<f64>() / mass.iter().sum::<f64>();
    let mut u = sp.u.clone();
    for a in 0..k {
        u[a] -= along * root[a];
    }
    let len = u.dot(&u).sqrt();
    if !(len > 0.0) {
        return Ok(plain(sp));
    }
    u /= len;
    let w: Vec<f64> = (0..k).map(|a| u[a] / root[a]).collect();
    let lambda = rayleigh(wt, |a, b| w[a] - w[b]);
    sp.lambda2 = lambda;
    sp.u = u;
    sp.q.column_mut(0).assign(&sp.u);
    let third = sp.full_spectrum.get(2).copied().unwrap_or(f64::INFINITY);
    let accurate = |w: &[f64], sp: &mut SpectralResult| {
        let (w, diff, lambda) = inverse_step(wt, mass, w)?;
        sp.lambda2 = lambda;
        sp.u = Array1::from_iter((0..k).map(|a| w[a] * root[a]));
        Some(Fiedler {
            spectral: sp.clone(),
            w,
            diff: Some(diff),
        })
    };
    if sp.multiplicity == 1 && k > 2 && lambda <= TINY_RATIO * third {
        if let Some(mut f) = accurate(&w, &mut sp) {
            f.spectral.q.column_mut(0).assign(&f.spectral.u);
            return Ok(f);
        }
        return Ok(plain(sp));
    }
    let norm = 2.0 * (0..k).map(|i| lap[[i, i]].abs()).fold(0.0, f64::max);
    let noise = 10.0 * (k as f64).sqrt() * f64::EPSILON * norm;
    if certify > 0 && k > 3 && lambda <= noise {
        let mut trial = sp.clone();
        let mut f = accurate(&w, &mut trial);
        for _ in 0..CERTIFY_STEPS {
            let Some(prev) = &f else { break };
            let next = accurate(&prev.w, &mut trial);
            let settled = next
                .as_ref()
                .is_some_and(|n| (n.spectral.lambda2 - prev.spectral.lambda2).abs() <= 1e-13 * prev.spectral.lambda2);
            f = next;
            if settled {
                break;
            }
        }
        if let Some(f) = f {
            if let Some(bound) = third_lower_bound(wt, mass, &f.w, certify - 1) {
                if f.spectral.lambda2 <= CERTIFY_RATIO * bound {
                    let mut spectral = f.spectral;
                    spectral.multiplicity = 1;
                    spectral.q = spectral.u.clone().insert_axis(Axis(1));
                    for x in spectral.full_spectrum.iter_mut().skip(2) {
                        *x = x.max(bound);
                    }
                    return Ok(Fiedler { spectral, ..f });
                }
            }
        }
    }
    Ok(plain(sp))
}

/// ½ Σ W_ab d(a, b)².
fn rayleigh(wt: &Array2<f64>, d: impl Fn(usize, usize) -> f64) -> f64 {
    let k = wt.nrows();
    let mut lambda = 0.0;
    for a in 0..k {
        for b in a + 1..k {
            lambda += wt[[a, b]] * d(a, b).powi(2);
        }
    }
    lambda
}

/// Lower bound on λ₃: dropping the edges across the split of `w` at its
/// largest gap removes a positive semidefinite term, leaving a direct sum
/// whose third eigenvalue is the smaller λ₂ of the two sides.
fn third_lower_bound(wt: &Array2<f64>, mass: &[f64], w: &[f64], certify: usize) -> Option<f64> {
    let k = w.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| w[a].total_cmp(&w[b]));
    let cut = (1..k).max_by(|&i, &j| {
        (w[order[i]] - w[order[i - 1]]).total_cmp(&(w[order[j]] - w[order[j - 1]]))
    })?;
    let mut bound = f64::INFINITY;
    for side in [&order[..cut], &order[cut..]] {
        let m = side.len();
        if m < 2 {
            continue;
        }
        let sub = Array2::from_shape_fn((m, m), |(a, b)| wt[[side[a], side[b]]]);
        let sub_mass: Vec<f64> = side.iter().map(|&a| mass[a]).collect();
        let lap = SymmetricMatrix::from_fn(m, |a, b| {
            if a == b {
                sub.row(a).sum() / sub_mass[a]
            } else {
                -sub[[a, b]] / (sub_mass[a] * sub_mass[b]).sqrt()
            }
        });
        let f = graph_fiedler(&lap, &sub, &sub_mass, certify).ok()?;
        if f.spectral.multiplicity != 1 || !(f.spectral.lambda2 > 0.0) {
            return None;
        }
        bound = bound.min(f.spectral.lambda2);
    }
    bound.is_finite().then_some(bound)
}

/// One step of inverse iteration for G y = λ M y, with G the Laplacian of
/// the weights `wt`. The solve eliminates nodes by Schur complements whose
/// degrees are re-summed from the updated weights, so no step subtracts, and
/// differences of the solution are accumulated directly rather than formed
/// from its entries.
fn inverse_step(wt: &Array2<f64>, mass: &[f64], y0: &[f64]) -> Option<(Vec<f64>, Array2<f64>, f64)> {
    let k = mass.len();
    let edges = wt;
    let mut wt = wt.clone();
    let mut r: Vec<f64> = (0..k).map(|a| mass[a] * y0[a]).collect();
    let mut deg = vec![0.0; k];
    for e in 0..k - 1 {
        let d: f64 = (e + 1..k).map(|j| wt[[e, j]]).sum();
        if !(d > 0.0 && d.is_finite()) {
            return None;
        }
        deg[e] = d;
        for i in e + 1..k {
            let f = wt[[i, e]] / d;
            if f == 0.0 {
                continue;
            }
            r[i] += f * r[e];
            for j in e + 1..k {
                if j != i {
                    wt[[i, j]] += f * wt[[e, j]];
                }
            }
        }
    }
    // diff[[a, b]] = x_a − x_b
    let mut diff = Array2::<f64>::zeros((k, k));
    for e in (0..k - 1).rev() {
        let base = r[e] / deg[e];
        for m in e + 1..k {
            let mut v = base;
            for j in e + 1..k {
                if j != m {
                    v += wt[[e, j]] / deg[e] * diff[[j, m]];
                }
            }
            diff[[e, m]] = v;
            diff[[m, e]] = -v;
        }
    }
    let total: f64 = mass.iter().sum();
    let centred: Vec<f64> = (0..k)
        .map(|a| (0..k).map(|b| mass[b] * diff[[a, b]]).sum::<f64>() / total)
        .collect();
    let len = (0..k).map(|a| mass[a] * centred[a] * centred[a]).sum::<f64>().sqrt();
    if !(len > 0.0 && len.is_finite()) {
        return None;
    }
    diff /= len;
    let w: Vec<f64> = centred.iter().map(|c| c / len).collect();
    let lambda = rayleigh(edges, |a, b| diff[[a, b]]);
    (lambda.is_finite() && diff.iter().all(|v| v.is_finite())).then_some((w, diff, lambda))
}

fn weighted_degrees(s: &SymmetricMatrix, counts: &[usize]) -> Vec<f64> {
    let k = counts.len();
    (0..k)
        .map(|i| counts[i] as f64 * (0..k).map(|j| counts[j] as f64 * s[[i, j]]).sum::<f64>())
        .collect()
}

/// Symmetric K×K coefficients c with dλ = Σ_{i<j} c_ij ds_ij.
pub(crate) fn pair_coefficients(kind: LaplacianKind, lambda: f64, f: &Fiedler, counts: &[usize]) -> Array2<f64> {
    let k = counts.len();
    let n: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let w = &f.w;
    let d = |i: usize, j: usize| match &f.diff {
        Some(diff) => diff[[i, j]],
        None => w[i] - w[j],
    };
    match kind {
        LaplacianKind::Standard => Array2::from_shape_fn((k, k), |(i, j)| n[i] * n[j] * d(i, j).powi(2)),
        LaplacianKind::Normalized => Array2::from_shape_fn((k, k), |(i, j)| {
            n[i] * n[j] * (d(i, j).powi(2) - lambda * (w[i] * w[i] + w[j] * w[j]))
        }),
    }
}

/// ∂λ₂/∂T (l×K) for transformed coordinates T.
fn dlambda_dt(coef: &Array2<f64>, state: &ReducedState, params: &SimilarityParams) -> Array2<f64> {
    let (l, k) = state.t.dim();
    let sigma = params.sigma;
    let sa = sigma * params.alpha;
    let mut out = Array2::zeros((l, k));
    for m in 0..k {
        for j in 0..k {
            let r = state.dist[[m, j]];
            if j == m || r < 1e-14 {
                continue;
            }
            // k′(r/σ)/(σr) = −k(r/σ)/(σ(r + σα))
            let w = -coef[[m, j]] * state.affinity[[m, j]] / (sigma * (r + sa));
            for a in 0..l {
                out[[a, m]] += w * (state.t[[a, m]] - state.t[[a, j]]);
            }
        }
    }
    out
}

fn require_smooth_kernel(params: &SimilarityParams) -> Result<()> {
    if params.alpha == 0.0 {
        return Err(Error::InvalidParameter(
            "alpha = 0 makes the kernel nondifferentiable at 0; gradients need alpha > 0".into(),
        ));
    }
    Ok(())
}

fn dlambda_dp_unchecked(
    kind: LaplacianKind,
    f: &Fiedler,
    counts: &[usize],
    state: &ReducedState,
    params: &SimilarityParams,
) -> Result<Array2<f64>> {
    let coef = pair_coefficients(kind, f.spectral.lambda2, f, counts);
    let gt = dlambda_dt(&coef, state, params);
    let mut gp = Array2::zeros(gt.dim());
    for a in 0..gt.nrows() {
        let jac = TransformJacobian::new(state.p.row(a), counts, params.beta, params.delta)?;
        gp.row_mut(a).assign(&jac.apply_left(gt.row(a)));
    }
    Ok(gp)
}

/// ∂λ₂/∂P (l×K) of the reduced Laplacian built from projected centers `p`.
#[allow(non_snake_case)]
pub fn dlambda_dP(
    kind: LaplacianKind,
    p: ArrayView2<'_, f64>,
    counts: &[usize],
    params: &SimilarityParams,
) -> Result<(Array2<f64>, SpectralResult)> {
    require_smooth_kernel(params)?;
    let state = ReducedState::from_projected(p.to_owned(), counts, kind, params)?;
    let f = state.fiedler(counts, kind)?;
    if f.spectral.multiplicity > 1 {
        return Err(Error::NonSimpleEigenvalue(Box::new(f.spectral)));
    }
    let g = dlambda_dp_unchecked(kind, &f, counts, &state, params)?;
    Ok((g, f.spectral))
}

/// ω Σ_{i≠j}(V_iᵀV_j)² and its gradient over θ.
pub fn penalty_and_grad(theta: &Angles, omega: f64) -> (f64, Array2<f64>) {
    let l = theta.ncols();
    let mut grad = Array2::zeros((theta.dim() - 1, l));
    if l < 2 || omega == 0.0 {
        return (0.0, grad);
    }
    let v = angles_to_matrix(theta);
    let v = v.values();
    let gram = v.t().dot(&v);
    let mut value = 0.0;
    for i in 0..l {
        for j in 0..l {
            if i != j {
                value += gram[[i, j]].powi(2);
            }
        }
    }
    for i in 0..l {
        let mut dv = Array1::<f64>::zeros(v.nrows());
        for j in 0..l {
            if j != i {
                dv.scaled_add(4.0 * omega * gram[[i, j]], &v.column(j));
            }
        }
        let jac = dV_dtheta(theta, i);
        grad.column_mut(i).assign(&jac.t().dot(&dv));
    }
    (omega * value, grad)
}

fn check_spec(theta: &Angles, spec: &ObjectiveSpec) -> Result<()> {
    if theta.ncols() != spec.dims {
        return Err(Error::Dimension(format!(
            "angles have {} columns, objective expects {}",
            theta.ncols(),
            spec.dims
        )));
    }
    if !spec.omega.is_finite() {
        return Err(Error::InvalidParameter("omega must be finite".into()));
    }
    Ok(())
}

/// Objective value λ₂ + penalty and the spectral data, without gradients.
pub fn evaluate_value(
    theta: &Angles,
    summary: &MicroclusterSummary,
    spec: &ObjectiveSpec,
    params: &SimilarityParams,
) -> Result<(f64, SpectralResult)> {
    check_spec(theta, spec)?;
    let state = ReducedState::new(theta, summary, spec.kind, params)?;
    let spectral = state.second_eigenpair(&summary.counts, spec.kind)?;
    let (pen, _) = penalty_and_grad(theta, spec.omega);
    Ok((spectral.lambda2 + pen, spectral))
}

/// Value and gradient. When λ₂ is repeated the gradient is that of uᵀL(θ)u
/// for the reported eigenvector u, and `multiplicity` exceeds one.
pub fn evaluate_report(
    theta: &Angles,
    summary: &MicroclusterSummary,
    spec: &ObjectiveSpec,
    params: &SimilarityParams,
) -> Result<EvalReport> {
    check_spec(theta, spec)?;
    require_smooth_kernel(params)?;
    let state = ReducedState::new(theta, summary, spec.kind, params)?;
    let f = state.fiedler(&summary.counts, spec.kind)?;
    let gp = dlambda_dp_unchecked(spec.kind, &f, &summary.counts, &state, params)?;
    let spectral = f.spectral;

    let (pen, pen_grad) = penalty_and_grad(theta, spec.omega);
    let mut grad = pen_grad;
    let dlam_dv = summary.centers.dot(&gp.t()); // d×l
    for a in 0..theta.ncols() {
        let jac = dV_dtheta(theta, a);
        let mut col = grad.column_mut(a);
        col += &jac.t().dot(&dlam_dv.column(a));
    }
    Ok(EvalReport {
        value: spectral.lambda2 + pen,
        grad,
        lambda2: spectral.lambda2,
        multiplicity: spectral.multiplicity,
        spectral,
    })
}

/// Value and gradient; a repeated λ₂ is reported as an error carrying the
/// spectral data.
pub fn evaluate(
    theta: &Angles,
    summary: &MicroclusterSummary,
    spec: &ObjectiveSpec,
    params: &SimilarityParams,
) -> Result<EvalReport> {
    let r = evaluate_report(theta, summary, spec, params)?;
    if r.multiplicity > 1 {
        return Err(Error::NonSimpleEigenvalue(Box::new(r.spectral)));
    }
    Ok(r)
}
