//! Minimisation of the projection index over angles: steepest descent with
//! Armijo backtracking, and coordinate escapes at coalesced eigenvalues using
//! directional derivatives of the repeated eigenvalue.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::gradient::{evaluate_report, penalty_and_grad, EvalReport, ObjectiveSpec, ReducedState};
use crate::microclusters::MicroclusterSummary;
use crate::numerics::{sym_eig, SymmetricMatrix};
use crate::projection::{dV_dtheta, Angles};
use crate::similarity::{SimilarityParams, TransformJacobian};
use crate::spectral::{multiplicity_tolerance, LaplacianKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub max_iters: usize,
    /// Stop when ‖grad‖∞ ≤ grad_tol·max(1, |f|).
    pub grad_tol: f64,
    /// Largest angle change (radians) of the first trial step.
    pub step_init: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
    pub nonsmooth_line_search_points: usize,
    /// Stop when the last `ftol_window` accepted steps together lowered f by
    /// at most ftol·|f|.
    pub ftol: f64,
    pub ftol_window: usize,
    pub max_backtracks: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-6,
            step_init: 1.0,
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
            nonsmooth_line_search_points: 30,
            ftol: 1e-3,
            ftol_window: 5,
            max_backtracks: 50,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters > 0
            && self.grad_tol > 0.0
            && self.step_init > 0.0
            && self.backtrack_factor > 0.0
            && self.backtrack_factor < 1.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.nonsmooth_line_search_points >= 2
            && self.ftol >= 0.0
            && self.ftol_window > 0
            && self.max_backtracks > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid optimizer options {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerStatus {
    GradTol,
    FTol,
    MaxIters,
    /// The iterate has a repeated λ₂.
    NonSimple,
    /// No step satisfied the decrease condition.
    Stalled,
    /// Every QᵀL_ijQ vanished at a coalesced point.
    ZeroPencil,
}

/// Objective value and gradient at a point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub grad: Array2<f64>,
    /// False when the gradient is not defined (repeated eigenvalue).
    pub simple: bool,
}

pub trait Objective {
    fn evaluate(&mut self, theta: &Angles) -> Result<Evaluation>;
}

/// λ₂ + penalty over a microcluster summary.
pub struct SpectralObjective<'a> {
    pub summary: &'a MicroclusterSummary,
    pub spec: ObjectiveSpec,
    pub params: SimilarityParams,
    pub evaluations: usize,
}

impl<'a> SpectralObjective<'a> {
    pub fn new(summary: &'a MicroclusterSummary, spec: ObjectiveSpec, params: SimilarityParams) -> Self {
        Self {
            summary,
            spec,
            params,
            evaluations: 0,
        }
    }

    pub fn report(&mut self, theta: &Angles) -> Result<EvalReport> {
        self.evaluations += 1;
        evaluate_report(theta, self.summary, &self.spec, &self.params)
    }
}

impl Objective for SpectralObjective<'_> {
    fn evaluate(&mut self, theta: &Angles) -> Result<Evaluation> {
        let r = self.report(theta)?;
        Ok(Evaluation {
            value: r.value,
            grad: r.grad,
            simple: r.multiplicity == 1,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SmoothResult {
    pub theta: Angles,
    pub eval: Evaluation,
    pub status: OptimizerStatus,
    pub iterations: usize,
    /// Objective value at θ₀ followed by every accepted iterate.
    pub values: Vec<f64>,
}

fn linf(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Steepest descent with Armijo backtracking; angles are wrapped after every step.
pub fn minimize_smooth<O: Objective>(obj: &mut O, theta0: Angles, opts: &OptimizerOptions) -> Result<SmoothResult> {
    opts.validate()?;
    let mut theta = theta0;
    let mut cur = obj.evaluate(&theta)?;
    let mut values = vec![cur.value];
    let mut tau = opts.step_init;
    // the step grows again only after a first-try acceptance
    let mut grow = false;
    let finish = |theta, eval, status, iterations, values| {
        Ok(SmoothResult {
            theta,
            eval,
            status,
            iterations,
            values,
        })
    };
    if !cur.simple {
        return finish(theta, cur, OptimizerStatus::NonSimple, 0, values);
    }
    for iter in 0..opts.max_iters {
        let gnorm = linf(&cur.grad);
        if gnorm <= opts.grad_tol * cur.value.abs().max(1.0) {
            return finish(theta, cur, OptimizerStatus::GradTol, iter, values);
        }
        // unit-∞-norm descent direction; τ is then the largest angle change
        let dir = cur.grad.mapv(|g| -g / gnorm);
        let slope = -cur.grad.iter().map(|g| g * g).sum::<f64>() / gnorm;
        if grow {
            tau = (tau / opts.backtrack_factor).min(PI);
        }
        let mut accepted = None;
        grow = true;
        for _ in 0..opts.max_backtracks {
            let trial = Angles::new(&theta.values() + &(&dir * tau));
            if let Ok(e) = obj.evaluate(&trial) {
                if e.value <= cur.value + opts.armijo_c * tau * slope {
                    accepted = Some((trial, e));
                    break;
                }
            }
            tau *= opts.backtrack_factor;
            grow = false;
        }
        let Some((next, e)) = accepted else {
            return finish(theta, cur, OptimizerStatus::Stalled, iter, values);
        };
        theta = next;
        cur = e;
        values.push(cur.value);
        if !cur.simple {
            return finish(theta, cur, OptimizerStatus::NonSimple, iter + 1, values);
        }
        if values.len() > opts.ftol_window {
            let before = values[values.len() - 1 - opts.ftol_window];
            if before - cur.value <= opts.ftol * cur.value.abs() {
                return finish(theta, cur, OptimizerStatus::FTol, iter + 1, values);
            }
        }
    }
    let n = opts.max_iters;
    finish(theta, cur, OptimizerStatus::MaxIters, n, values)
}

/// Derivatives of the reduced Laplacian with respect to individual angles.
pub struct LaplacianDerivatives<'a> {
    theta: Angles,
    summary: &'a MicroclusterSummary,
    kind: LaplacianKind,
    params: SimilarityParams,
    state: ReducedState,
    jacobians: Vec<TransformJacobian>,
}

impl<'a> LaplacianDerivatives<'a> {
    pub fn new(
        theta: &Angles,
        summary: &'a MicroclusterSummary,
        kind: LaplacianKind,
        params: &SimilarityParams,
    ) -> Result<Self> {
        let state = ReducedState::new(theta, summary, kind, params)?;
        let jacobians = state
            .p
            .rows()
            .into_iter()
            .map(|r| TransformJacobian::new(r, &summary.counts, params.beta, params.delta))
            .collect::<Result<_>>()?;
        Ok(Self {
            theta: theta.clone(),
            summary,
            kind,
            params: *params,
            state,
            jacobians,
        })
    }

    pub fn laplacian(&self) -> &SymmetricMatrix {
        &self.state.laplacian
    }

    /// ∂L/∂θ_ij for angle `i` of column `j`.
    pub fn derivative(&self, i: usize, j: usize) -> SymmetricMatrix {
        let k = self.summary.len();
        let dv = dV_dtheta(&self.theta, j).column(i).to_owned();
        let dp = self.summary.centers.t().dot(&dv);
        let dt = self.jacobians[j].apply_right(dp.view());
        let t = self.state.t.row(j);
        let sigma = self.params.sigma;
        let sa = sigma * self.params.alpha;
        let ds = Array2::from_shape_fn((k, k), |(a, b)| {
            let r = self.state.dist[[a, b]];
            if a == b || r < 1e-14 {
                0.0
            } else {
                -self.state.affinity[[a, b]] / (sigma * (r + sa)) * (t[a] - t[b]) * (dt[a] - dt[b])
            }
        });
        let n: Vec<f64> = self.summary.counts.iter().map(|&c| c as f64).collect();
        match self.kind {
            LaplacianKind::Standard => {
                let diag: Vec<f64> = (0..k).map(|a| (0..k).map(|b| n[b] * ds[[a, b]]).sum()).collect();
                SymmetricMatrix::from_fn(k, |a, b| {
                    if a == b {
                        diag[a]
                    } else {
                        -(n[a] * n[b]).sqrt() * ds[[a, b]]
                    }
                })
            }
            LaplacianKind::Normalized => {
                let deg = &self.state.degrees;
                let s = &self.state.affinity;
                let dd: Vec<f64> = (0..k)
                    .map(|a| (0..k).map(|b| n[a] * n[b] * ds[[a, b]]).sum())
                    .collect();
                SymmetricMatrix::from_fn(k, |a, b| {
                    let root = (deg[a] * deg[b]).sqrt();
                    let w = n[a] * n[b] * s[[a, b]];
                    let dw = n[a] * n[b] * ds[[a, b]];
                    -dw / root + 0.5 * w / root * (dd[a] / deg[a] + dd[b] / deg[b])
                })
            }
        }
    }
}

/// ∂L/∂θ_ij of the reduced Laplacian.
#[allow(non_snake_case)]
pub fn dL_dtheta_ij(
    theta: &Angles,
    i: usize,
    j: usize,
    summary: &MicroclusterSummary,
    params: &SimilarityParams,
    kind: LaplacianKind,
) -> Result<SymmetricMatrix> {
    Ok(LaplacianDerivatives::new(theta, summary, kind, params)?.derivative(i, j))
}

/// Projected derivative matrices QᵀL_ijQ (plus the smooth penalty term) for
/// every angle, used for directional derivatives at a coalesced λ₂.
#[derive(Debug, Clone)]
pub struct Pencils {
    /// Indexed [i][j]; each t×t.
    pub projected: Vec<Vec<Array2<f64>>>,
    /// ‖L_ij‖_F
    pub norms: Vec<Vec<f64>>,
}

impl Pencils {
    pub fn new(
        theta: &Angles,
        summary: &MicroclusterSummary,
        spec: &ObjectiveSpec,
        params: &SimilarityParams,
        q: ArrayView2<'_, f64>,
    ) -> Result<Self> {
        let derivs = LaplacianDerivatives::new(theta, summary, spec.kind, params)?;
        let (_, pen) = penalty_and_grad(theta, spec.omega);
        let t = q.ncols();
        let rows = theta.dim() - 1;
        let mut projected = Vec::with_capacity(rows);
        let mut norms = Vec::with_capacity(rows);
        for i in 0..rows {
            let mut prow = Vec::with_capacity(theta.ncols());
            let mut nrow = Vec::with_capacity(theta.ncols());
            for j in 0..theta.ncols() {
                let lij = derivs.derivative(i, j);
                let mut m = q.t().dot(&lij.view().dot(&q));
                for d in 0..t {
                    m[[d, d]] += pen[[i, j]];
                }
                nrow.push(lij.frobenius_norm());
                prow.push(m);
            }
            projected.push(prow);
            norms.push(nrow);
        }
        Ok(Self { projected, norms })
    }

    /// True when every ‖QᵀL_ijQ‖_F ≤ 1e−10·max(1, ‖L_ij‖_F).
    pub fn all_vanish(&self) -> bool {
        self.projected.iter().zip(&self.norms).all(|(pr, nr)| {
            pr.iter().zip(nr).all(|(m, &n)| {
                let f = m.iter().map(|x| x * x).sum::<f64>().sqrt();
                f <= 1e-10 * n.max(1.0)
            })
        })
    }
}

/// Directional derivative of the repeated eigenvalue: the smallest
/// eigenvalue of Σ_ij direction_ij · QᵀL_ijQ.
pub fn nonsmooth_directional(direction: ArrayView2<'_, f64>, pencils: &Pencils) -> Result<f64> {
    let t = pencils.projected[0][0].nrows();
    let mut m = Array2::<f64>::zeros((t, t));
    for (i, row) in pencils.projected.iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            let w = direction[[i, j]];
            if w != 0.0 {
                m.scaled_add(w, p);
            }
        }
    }
    let eig = sym_eig(&SymmetricMatrix::new(m)?)?;
    Ok(eig.eigenvalues[0])
}

/// How the nonsmooth descent chose its coordinate direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordinateRule {
    /// λ_t(QᵀL_ijQ) > 0 and simple: move along −e_ij.
    LargestPositive,
    /// λ₁(QᵀL_ijQ) < 0 and simple: move along +e_ij.
    SmallestNegative,
    /// Neither exists: the coordinate maximising max{λ_t, −λ₁}.
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateChoice {
    pub i: usize,
    pub j: usize,
    /// −1 or +1.
    pub sign: f64,
    pub rule: CoordinateRule,
    /// Directional derivative along sign·e_ij.
    pub slope: f64,
}

/// Steps 6–10 of the coordinate selection, or None if no coordinate gives descent.
pub fn choose_coordinate(pencils: &Pencils) -> Result<Option<CoordinateChoice>> {
    let mut best6: Option<(f64, usize, usize)> = None;
    let mut best7: Option<(f64, usize, usize)> = None;
    let mut best8: Option<(f64, usize, usize, f64)> = None;
    for (i, row) in pencils.projected.iter().enumerate() {
        for (j, m) in row.iter().enumerate() {
            let ev = sym_eig(&SymmetricMatrix::new(m.clone())?)?.eigenvalues;
            let t = ev.len();
            let (lo, hi) = (ev[0], ev[t - 1]);
            let tol_hi = multiplicity_tolerance(hi);
            let tol_lo = multiplicity_tolerance(lo);
            let hi_simple = t == 1 || hi - ev[t - 2] > tol_hi;
            let lo_simple = t == 1 || ev[1] - lo > tol_lo;
            if hi > 0.0 && hi_simple && best6.map_or(true, |b| hi > b.0) {
                best6 = Some((hi, i, j));
            }
            if lo < 0.0 && lo_simple && best7.map_or(true, |b| -lo > b.0) {
                best7 = Some((-lo, i, j));
            }
            let (score, sign) = if hi > -lo { (hi, -1.0) } else { (-lo, 1.0) };
            if best8.map_or(true, |b| score > b.0) {
                best8 = Some((score, i, j, sign));
            }
        }
    }
    if let Some((v, i, j)) = best6 {
        return Ok(Some(CoordinateChoice {
            i,
            j,
            sign: -1.0,
            rule: CoordinateRule::LargestPositive,
            slope: -v,
        }));
    }
    if let Some((v, i, j)) = best7 {
        return Ok(Some(CoordinateChoice {
            i,
            j,
            sign: 1.0,
            rule: CoordinateRule::SmallestNegative,
            slope: -v,
        }));
    }
    Ok(best8.filter(|b| b.0 > 0.0).map(|(v, i, j, sign)| CoordinateChoice {
        i,
        j,
        sign,
        rule: CoordinateRule::Fallback,
        slope: -v,
    }))
}

#[derive(Debug, Clone)]
pub struct Algorithm1Result {
    pub theta: Angles,
    pub report: EvalReport,
    pub status: OptimizerStatus,
    /// Every accepted objective value, in order.
    pub values: Vec<f64>,
    pub nonsmooth_steps: Vec<CoordinateChoice>,
    pub evaluations: usize,
}

fn coordinate_point(theta: &Angles, c: &CoordinateChoice, gamma: f64) -> Angles {
    let mut raw = theta.values().to_owned();
    raw[[c.i, c.j]] += c.sign * gamma;
    Angles::new(raw)
}

/// Golden-section search over γ ∈ (0, π] along a signed coordinate, falling
/// back to halving from π when no sampled γ lowers the objective.
fn coordinate_line_search(
    obj: &mut SpectralObjective<'_>,
    theta: &Angles,
    choice: &CoordinateChoice,
    current: f64,
    require_simple: bool,
    points: usize,
) -> Option<(Angles, f64)> {
    let mut best: Option<(f64, f64)> = None;
    let mut f = |gamma: f64, best: &mut Option<(f64, f64)>| -> f64 {
        let p = coordinate_point(theta, choice, gamma);
        let v = match obj.report(&p) {
            Ok(r) if !(require_simple && r.multiplicity > 1) => r.value,
            _ => f64::INFINITY,
        };
        if v < current && best.map_or(true, |b| v < b.1) {
            *best = Some((gamma, v));
        }
        v
    };
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, PI);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = f(x1, &mut best);
    let mut f2 = f(x2, &mut best);
    for _ in 2..points {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1, &mut best);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2, &mut best);
        }
    }
    if best.is_none() {
        let mut gamma = PI;
        for _ in 0..50 {
            gamma *= 0.5;
            f(gamma, &mut best);
            if best.is_some() {
                break;
            }
        }
    }
    best.map(|(g, v)| (coordinate_point(theta, choice, g), v))
}

/// Smooth descent alternated with coordinate escapes at coalesced λ₂.
pub fn algorithm1(
    theta0: Angles,
    summary: &MicroclusterSummary,
    spec: &ObjectiveSpec,
    params: &SimilarityParams,
    opts: &OptimizerOptions,
) -> Result<Algorithm1Result> {
    opts.validate()?;
    let mut obj = SpectralObjective::new(summary, *spec, *params);
    let mut theta = theta0;
    let mut values = Vec::new();
    let mut steps = Vec::new();
    let mut outer = 0;
    loop {
        // step 2
        let smooth = minimize_smooth(&mut obj, theta, opts)?;
        if values.is_empty() {
            values.extend(smooth.values.iter().copied());
        } else {
            values.extend(smooth.values.iter().skip(1).copied());
        }
        theta = smooth.theta;
        outer += 1;
        // step 3
        if smooth.status != OptimizerStatus::NonSimple {
            let report = obj.report(&theta)?;
            return Ok(Algorithm1Result {
                theta,
                report,
                status: smooth.status,
                values,
                nonsmooth_steps: steps,
                evaluations: obj.evaluations,
            });
        }
        // steps 4–10; fallback steps return to step 4
        loop {
            let report = obj.report(&theta)?;
            let done = |status, report, theta, values, steps, evaluations| {
                Ok(Algorithm1Result {
                    theta,
                    report,
                    status,
                    values,
                    nonsmooth_steps: steps,
                    evaluations,
                })
            };
            if report.multiplicity == 1 {
                break;
            }
            if outer >= opts.max_iters {
                let e = obj.evaluations;
                return done(OptimizerStatus::MaxIters, report, theta, values, steps, e);
            }
            outer += 1;
            let pencils = Pencils::new(&theta, summary, spec, params, report.spectral.q.view())?;
            if pencils.all_vanish() {
                let e = obj.evaluations;
                return done(OptimizerStatus::ZeroPencil, report, theta, values, steps, e);
            }
            let Some(choice) = choose_coordinate(&pencils)? else {
                let e = obj.evaluations;
                return done(OptimizerStatus::ZeroPencil, report, theta, values, steps, e);
            };
            let require_simple = choice.rule != CoordinateRule::Fallback;
            let found = coordinate_line_search(
                &mut obj,
                &theta,
                &choice,
                report.value,
                require_simple,
                opts.nonsmooth_line_search_points,
            );
            let Some((next, value)) = found else {
                let e = obj.evaluations;
                return done(OptimizerStatus::Stalled, report, theta, values, steps, e);
            };
            theta = next;
            values.push(value);
            steps.push(choice);
            if require_simple {
                break;
            }
        }
    }
}
