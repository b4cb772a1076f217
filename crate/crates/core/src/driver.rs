//! Clustering policies: parameter heuristics, the β schedule, bipartitions,
//! recursive K-way clustering and σ-annealing for large margin separation.

use ndarray::{Array1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::gradient::{evaluate_value, ObjectiveSpec, ReducedState};
use crate::microclusters::{default_microclusters, resummarize_projected, summarize, MicroclusterSummary};
use crate::numerics::{covariance, pca_components, sym_eig, SymmetricMatrix};
use crate::optimizer::{algorithm1, Algorithm1Result, OptimizerOptions, OptimizerStatus};
use crate::projection::{angles_to_matrix, matrix_to_angles, Angles, ProjectionMatrix};
use crate::similarity::SimilarityParams;
use crate::spectral::LaplacianKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Standard Laplacian.
    Scpp,
    /// Normalized Laplacian.
    Scnpp,
    /// Standard Laplacian with σ annealed towards zero.
    Lmsc,
}

impl Method {
    pub fn laplacian(self) -> LaplacianKind {
        match self {
            Method::Scnpp => LaplacianKind::Normalized,
            Method::Scpp | Method::Lmsc => LaplacianKind::Standard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMode {
    Orthogonal,
    Correlated,
    Univariate,
}

impl ProjectionMode {
    pub fn default_dims(self) -> usize {
        match self {
            ProjectionMode::Orthogonal => 2,
            ProjectionMode::Correlated => 3,
            ProjectionMode::Univariate => 1,
        }
    }

    fn omega_sign(self) -> f64 {
        match self {
            ProjectionMode::Orthogonal => 1.0,
            ProjectionMode::Correlated => -1.0,
            ProjectionMode::Univariate => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MicroclusterCount {
    Auto,
    Fixed(usize),
}

impl MicroclusterCount {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            MicroclusterCount::Auto => default_microclusters(n),
            MicroclusterCount::Fixed(k) => k.min(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub method: Method,
    pub projection_mode: ProjectionMode,
    pub dims: usize,
    pub clusters: usize,
    pub beta_start: f64,
    pub sigma_multiplier: f64,
    pub seed: u64,
    pub microclusters: MicroclusterCount,
    /// Penalty weight; None picks |ω| = λ₂ at the initial projection.
    pub omega: Option<f64>,
    pub alpha: f64,
    pub optimizer: OptimizerOptions,
}

impl MethodConfig {
    pub fn new(method: Method, projection_mode: ProjectionMode, clusters: usize) -> Self {
        Self {
            method,
            projection_mode,
            dims: projection_mode.default_dims(),
            clusters,
            beta_start: 3.0,
            sigma_multiplier: 1.0,
            seed: 0,
            microclusters: MicroclusterCount::Auto,
            omega: None,
            alpha: 0.1,
            optimizer: OptimizerOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.method == Method::Lmsc && self.projection_mode == ProjectionMode::Correlated {
            return fail("the large margin method supports orthogonal or univariate projections only");
        }
        if self.dims == 0 {
            return fail("projection dimension must be positive");
        }
        if self.projection_mode == ProjectionMode::Univariate && self.dims != 1 {
            return fail("univariate projections have one dimension");
        }
        if self.clusters < 2 {
            return fail("at least two clusters required");
        }
        if !(self.beta_start >= 0.5 && self.beta_start.is_finite()) {
            return fail("beta start must be finite and at least 0.5");
        }
        if !(self.sigma_multiplier > 0.0 && self.sigma_multiplier.is_finite()) {
            return fail("sigma multiplier must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return fail("alpha must be positive");
        }
        if let Some(w) = self.omega {
            if !w.is_finite() {
                return fail("omega must be finite");
            }
        }
        if self.microclusters == MicroclusterCount::Fixed(0) {
            return fail("microcluster count must be positive");
        }
        self.optimizer.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// β values tried by a bipartition, largest first.
    pub fn beta_schedule(&self) -> Vec<f64> {
        let steps = ((self.beta_start - 0.5) / 0.5 + 1e-9).floor() as usize;
        (0..=steps).map(|i| self.beta_start - 0.5 * i as f64).collect()
    }
}

/// Outcome of one bipartition.
#[derive(Debug, Clone)]
pub struct SplitInfo {
    pub theta_star: Angles,
    pub projection: ProjectionMatrix,
    pub lambda2: f64,
    pub beta_used: f64,
    pub sigma_used: f64,
    pub omega: f64,
    pub balanced: bool,
    pub status: OptimizerStatus,
    /// (β, smaller side) for every β tried.
    pub attempts: Vec<(f64, usize)>,
    /// σ at every annealing stage (large margin method only).
    pub sigma_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PartitionNode {
    pub member_indices: Vec<usize>,
    pub child_left: Option<usize>,
    pub child_right: Option<usize>,
    /// None for leaves.
    pub split: Option<SplitInfo>,
}

#[derive(Debug, Clone)]
pub struct Clustering {
    /// One label in 0..K per observation.
    pub labels: Vec<usize>,
    /// Node 0 is the root; children are indices into this list.
    pub nodes: Vec<PartitionNode>,
    /// Node indices in the order they were split.
    pub split_order: Vec<usize>,
}

/// σ = √(l·λ_max)·N^{−1/5}, with λ_max the largest covariance eigenvalue.
pub fn default_sigma(x: ArrayView2<'_, f64>, l: usize) -> Result<f64> {
    let n = x.ncols();
    if n < 2 {
        return Err(Error::TooSmall { needed: 2, got: n });
    }
    let eig = sym_eig(&SymmetricMatrix::new(covariance(x))?)?;
    let top = *eig.eigenvalues.last().expect("non-empty");
    if !(top > 1e-300) {
        return Err(Error::DegenerateData("data have zero variance".into()));
    }
    Ok((l as f64 * top).sqrt() * (n as f64).powf(-0.2))
}

pub fn default_delta(sigma: f64) -> f64 {
    0.01_f64.min(sigma * sigma)
}

fn initial_angles(x: ArrayView2<'_, f64>, l: usize) -> Result<Angles> {
    matrix_to_angles(pca_components(x, l)?.view())
}

fn effective_dims(config: &MethodConfig, d: usize) -> Result<usize> {
    if d < 2 {
        return Err(Error::Dimension("at least two features required".into()));
    }
    let l = config.dims.min(d);
    if l < config.dims {
        log::warn!("projection dimension reduced from {} to {l}", config.dims);
    }
    Ok(l)
}

/// Runs the nonsmooth descent from θ₀ with a gradient tolerance relative to the
/// initial objective, so that tiny λ₂ at small σ is still optimized.
fn optimize(
    theta0: &Angles,
    summary: &MicroclusterSummary,
    kind: LaplacianKind,
    mode: ProjectionMode,
    omega: Option<f64>,
    params: &SimilarityParams,
    opts: &OptimizerOptions,
) -> Result<(Algorithm1Result, f64)> {
    let l = theta0.ncols();
    let bare = ObjectiveSpec { kind, omega: 0.0, dims: l };
    let (f0, _) = evaluate_value(theta0, summary, &bare, params)?;
    let omega = match omega {
        Some(w) => w,
        None if l > 1 => mode.omega_sign() * f0.abs(),
        None => 0.0,
    };
    let spec = ObjectiveSpec { omega, ..bare };
    let mut opts = *opts;
    opts.grad_tol *= f0.abs().clamp(f64::MIN_POSITIVE, 1.0);
    Ok((algorithm1(theta0.clone(), summary, &spec, params, &opts)?, omega))
}

/// Two-way split from the second eigenvector: microclusters are ordered by
/// their expanded eigenvector entry and cut where the ratio cut (standard) or
/// normalized cut (normalized) of the expanded graph is smallest. Ties go to
/// the widest gap in the eigenvector.
pub fn sweep_split(
    theta: &Angles,
    summary: &MicroclusterSummary,
    kind: LaplacianKind,
    params: &SimilarityParams,
    u: &Array1<f64>,
) -> Result<Vec<usize>> {
    let state = ReducedState::new(theta, summary, kind, params)?;
    let k = summary.len();
    let n: Vec<f64> = summary.counts.iter().map(|&c| c as f64).collect();
    let w = |a: usize, b: usize| n[a] * n[b] * state.affinity[[a, b]];
    let value: Vec<f64> = (0..k)
        .map(|a| match kind {
            LaplacianKind::Standard => u[a] / n[a].sqrt(),
            LaplacianKind::Normalized => u[a] / state.degrees[a].sqrt(),
        })
        .collect();
    let size: Vec<f64> = match kind {
        LaplacianKind::Standard => n.clone(),
        LaplacianKind::Normalized => state.degrees.clone(),
    };
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| value[a].total_cmp(&value[b]).then(a.cmp(&b)));
    let total: f64 = size.iter().sum();
    let mut in_left = vec![false; k];
    let (mut cut, mut left) = (0.0_f64, 0.0_f64);
    let mut best: Option<(f64, f64, usize)> = None;
    for (pos, &a) in order.iter().enumerate().take(k - 1) {
        for b in 0..k {
            if b != a {
                if in_left[b] {
                    cut -= w(a, b);
                } else {
                    cut += w(a, b);
                }
            }
        }
        in_left[a] = true;
        left += size[a];
        let score = cut.max(0.0) * (1.0 / left + 1.0 / (total - left));
        let gap = value[order[pos + 1]] - value[a];
        let better = match best {
            None => true,
            Some((s, g, _)) => score < s * (1.0 - 1e-12) || (score <= s * (1.0 + 1e-12) && gap > g),
        };
        if better {
            best = Some((score, gap, pos));
        }
    }
    let mut side = vec![1usize; k];
    if let Some((_, _, pos)) = best {
        for &a in &order[..=pos] {
            side[a] = 0;
        }
    }
    Ok(summary.source_assignments.iter().map(|&c| side[c]).collect())
}

fn smaller_side(labels: &[usize]) -> usize {
    let ones = labels.iter().filter(|&&b| b == 1).count();
    ones.min(labels.len() - ones)
}

/// Large margin projection: optimize θ, halve σ and re-summarize in the
/// projected space until the next stage would leave λ₂ unresolved.
#[derive(Debug, Clone)]
pub struct LmscResult {
    pub theta: Angles,
    pub sigma_trace: Vec<f64>,
    pub lambda2_trace: Vec<f64>,
    pub summary: MicroclusterSummary,
    pub last: Algorithm1Result,
    pub omega: f64,
    /// Parameters of the final stage.
    pub params: SimilarityParams,
}

/// `params` supplies β and α; σ and δ are set by the annealing schedule.
pub fn lmsc_projection(x: ArrayView2<'_, f64>, config: &MethodConfig, params: &SimilarityParams) -> Result<LmscResult> {
    config.validate()?;
    if config.projection_mode == ProjectionMode::Correlated {
        return Err(Error::Config("correlated projections are not used with annealing".into()));
    }
    let n = x.ncols();
    if n < 2 {
        return Err(Error::TooSmall { needed: 2, got: n });
    }
    let l = effective_dims(config, x.nrows())?;
    let sigma0 = default_sigma(x, l)? * config.sigma_multiplier;
    let k = config.microclusters.resolve(n);
    let mut summary = summarize(x, k, config.seed)?;
    let mut theta = initial_angles(x, l)?;
    let mut sigma = sigma0;
    let mut sigma_trace = Vec::new();
    let mut lambda2_trace = Vec::new();
    loop {
        let p = SimilarityParams::new(sigma, default_delta(sigma), params.alpha, params.beta)?;
        let (r, omega) = optimize(
            &theta,
            &summary,
            LaplacianKind::Standard,
            config.projection_mode,
            config.omega,
            &p,
            &config.optimizer,
        )?;
        sigma_trace.push(sigma);
        lambda2_trace.push(r.report.lambda2);
        theta = r.theta.clone();
        let v = angles_to_matrix(&theta);
        let mut done = sigma / 2.0 < sigma0 * 2f64.powi(-20);
        let mut next = None;
        if !done {
            let s = resummarize_projected(x, &v, k, config.seed)?;
            let half = SimilarityParams::new(sigma / 2.0, default_delta(sigma / 2.0), params.alpha, params.beta)?;
            let spec = ObjectiveSpec {
                kind: LaplacianKind::Standard,
                omega: 0.0,
                dims: l,
            };
            // stop once halving would leave λ₂ unresolved from λ₃
            let (start, sp) = evaluate_value(&theta, &s, &spec, &half)?;
            done = start <= LMSC_FLOOR || sp.multiplicity > 1;
            next = Some(s);
        }
        match next {
            Some(s) if !done => {
                sigma /= 2.0;
                summary = s;
            }
            _ => {
                return Ok(LmscResult {
                    theta,
                    sigma_trace,
                    lambda2_trace,
                    summary,
                    last: r,
                    omega,
                    params: p,
                })
            }
        }
    }
}

/// Annealing stops once λ₂ at the next σ would fall below this.
const LMSC_FLOOR: f64 = 1e-200;

/// Splits the columns of `x` in two. `n_total` is the size of the full
/// dataset, used for the balance threshold N/(2K).
pub fn bipartition(x: ArrayView2<'_, f64>, config: &MethodConfig, n_total: usize) -> Result<(Vec<usize>, PartitionNode)> {
    config.validate()?;
    let n = x.ncols();
    if n < 2 {
        return Err(Error::TooSmall { needed: 2, got: n });
    }
    let l = effective_dims(config, x.nrows())?;
    let threshold = n_total as f64 / (2.0 * config.clusters as f64);
    let kind = config.method.laplacian();

    let mut best: Option<(Vec<usize>, SplitInfo)> = None;
    let mut attempts = Vec::new();
    let (summary, theta0, sigma) = if config.method == Method::Lmsc {
        (None, None, 0.0)
    } else {
        let sigma = default_sigma(x, l)? * config.sigma_multiplier;
        let summary = summarize(x, config.microclusters.resolve(n), config.seed)?;
        (Some(summary), Some(initial_angles(x, l)?), sigma)
    };
    for beta in config.beta_schedule() {
        let (labels, info) = if config.method == Method::Lmsc {
            let params = SimilarityParams::new(1.0, 0.01, config.alpha, beta)?;
            let r = lmsc_projection(x, config, &params)?;
            let labels = sweep_split(&r.theta, &r.summary, LaplacianKind::Standard, &r.params, &r.last.report.spectral.u)?;
            let info = SplitInfo {
                projection: angles_to_matrix(&r.theta),
                theta_star: r.theta,
                lambda2: r.last.report.lambda2,
                beta_used: beta,
                sigma_used: *r.sigma_trace.last().expect("one stage"),
                omega: r.omega,
                balanced: false,
                status: r.last.status,
                attempts: Vec::new(),
                sigma_trace: r.sigma_trace,
            };
            (labels, info)
        } else {
            let summary = summary.as_ref().expect("summary");
            let theta0 = theta0.as_ref().expect("angles");
            let params = SimilarityParams::new(sigma, default_delta(sigma), config.alpha, beta)?;
            let (r, omega) = optimize(
                theta0,
                summary,
                kind,
                config.projection_mode,
                config.omega,
                &params,
                &config.optimizer,
            )?;
            let labels = sweep_split(&r.theta, summary, kind, &params, &r.report.spectral.u)?;
            let info = SplitInfo {
                projection: angles_to_matrix(&r.theta),
                theta_star: r.theta,
                lambda2: r.report.lambda2,
                beta_used: beta,
                sigma_used: sigma,
                omega,
                balanced: false,
                status: r.status,
                attempts: Vec::new(),
                sigma_trace: vec![sigma],
            };
            (labels, info)
        };
        let small = smaller_side(&labels);
        attempts.push((beta, small));
        log::debug!("beta {beta}: smaller side {small} (threshold {threshold})");
        let balanced = small > 0 && small as f64 >= threshold;
        best = Some((labels, SplitInfo { balanced, ..info }));
        if balanced {
            break;
        }
    }
    let (labels, mut info) = best.expect("schedule is never empty");
    info.attempts = attempts;
    let node = PartitionNode {
        member_indices: (0..n).collect(),
        child_left: None,
        child_right: None,
        split: Some(info),
    };
    Ok((labels, node))
}

/// K-way clustering by repeatedly splitting the largest cluster.
pub fn recursive_cluster(x: ArrayView2<'_, f64>, config: &MethodConfig) -> Result<Clustering> {
    config.validate()?;
    let n = x.ncols();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if config.clusters > n {
        return Err(Error::InvalidK { k: config.clusters, n });
    }
    let mut nodes = vec![PartitionNode {
        member_indices: (0..n).collect(),
        child_left: None,
        child_right: None,
        split: None,
    }];
    let mut leaves = vec![0usize];
    let mut split_order = Vec::new();
    while leaves.len() < config.clusters {
        // largest leaf; ties go to the earliest
        let (pos, &target) = leaves
            .iter()
            .enumerate()
            .max_by(|a, b| {
                let (sa, sb) = (nodes[*a.1].member_indices.len(), nodes[*b.1].member_indices.len());
                sa.cmp(&sb).then(b.0.cmp(&a.0))
            })
            .expect("at least one leaf");
        let members = nodes[target].member_indices.clone();
        let sub = x.select(Axis(1), &members);
        let (labels, node) = bipartition(sub.view(), config, n)?;
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for (&m, &b) in members.iter().zip(&labels) {
            if b == 0 {
                left.push(m);
            } else {
                right.push(m);
            }
        }
        if left.is_empty() || right.is_empty() {
            return Err(Error::DegenerateGraph);
        }
        let li = nodes.len();
        nodes.push(PartitionNode {
            member_indices: left,
            child_left: None,
            child_right: None,
            split: None,
        });
        nodes.push(PartitionNode {
            member_indices: right,
            child_left: None,
            child_right: None,
            split: None,
        });
        let t = &mut nodes[target];
        t.child_left = Some(li);
        t.child_right = Some(li + 1);
        t.split = node.split;
        split_order.push(target);
        leaves.splice(pos..=pos, [li, li + 1]);
    }
    // leaves labelled in order of their smallest member
    leaves.sort_by_key(|&i| nodes[i].member_indices.iter().min().copied());
    let mut labels = vec![0usize; n];
    for (label, &leaf) in leaves.iter().enumerate() {
        for &m in &nodes[leaf].member_indices {
            labels[m] = label;
        }
    }
    Ok(Clustering {
        labels,
        nodes,
        split_order,
    })
}
