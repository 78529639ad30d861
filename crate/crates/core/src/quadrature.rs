//! Product integration of the ψ-fractional integral
//! (1/Γ(α)) ∫ ψ′(s)(ψ(t) − ψ(s))^{α−1} F(s) ds on impulse-aligned meshes.
//!
//! All integrals are carried out in the transformed variable u = ψ(s) − ψ(0),
//! where the kernel is the pure power (U − u)^{α−1}. F is interpolated
//! piecewise linearly in u and each panel is integrated exactly against
//! the power.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use thiserror::Error;

use crate::psi::{PsiError, PsiFunction};
use crate::special::gamma;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("partition ordering violated: {0}")]
    Ordering(String),
    #[error("invalid mesh request: {0}")]
    InvalidMesh(String),
    #[error("{t} is not a mesh node")]
    NodeAlignment { t: f64 },
    #[error("integration limits out of order: lower {lower} >= upper {upper}")]
    Limits { lower: f64, upper: f64 },
    #[error("grid function has {values} values for {nodes} mesh nodes")]
    LengthMismatch { values: usize, nodes: usize },
    #[error("grid functions live on different meshes or representations")]
    MeshMismatch,
    #[error(transparent)]
    Psi(#[from] PsiError),
}

/// Which piece of J = [0, T] a node belongs to. Right endpoints are closed:
/// t₁ is in `Head`, sᵢ is in `Impulse(i)`, tᵢ₊₁ is in `Continuation(i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntervalTag {
    /// [0, t₁] (all of J when there are no impulses).
    Head,
    /// (tᵢ, sᵢ], 1-based.
    Impulse(usize),
    /// (sᵢ, tᵢ₊₁], 1-based.
    Continuation(usize),
}

/// Checks 0 < t₁, tᵢ ≤ sᵢ ≤ tᵢ₊₁, tᵢ < tᵢ₊₁, tₘ < T and sₘ ≤ T.
pub fn validate_partition(partition: &[(f64, f64)], horizon: f64) -> Result<(), QuadratureError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(QuadratureError::Ordering(format!(
            "horizon T = {horizon} must be positive and finite"
        )));
    }
    let mut prev_t = 0.0;
    let mut prev_s = 0.0;
    for (k, &(t, s)) in partition.iter().enumerate() {
        let i = k + 1;
        if !(t.is_finite() && s.is_finite()) {
            return Err(QuadratureError::Ordering(format!("t{i}, s{i} must be finite")));
        }
        if !(t > prev_t) {
            return Err(QuadratureError::Ordering(format!(
                "t{i} = {t} must exceed the previous impulse start {prev_t}"
            )));
        }
        if t < prev_s {
            return Err(QuadratureError::Ordering(format!(
                "t{i} = {t} precedes s{} = {prev_s}",
                i - 1
            )));
        }
        if s < t {
            return Err(QuadratureError::Ordering(format!(
                "s{i} = {s} precedes t{i} = {t}"
            )));
        }
        if !(t < horizon) || s > horizon {
            return Err(QuadratureError::Ordering(format!(
                "impulse ({t}, {s}] exceeds T = {horizon}"
            )));
        }
        prev_t = t;
        prev_s = s;
    }
    Ok(())
}

/// Impulse-aligned mesh on [0, T].
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<f64>,
    tags: Vec<IntervalTag>,
    grading: f64,
    n_per_interval: usize,
    partition: Vec<(f64, f64)>,
    horizon: f64,
    impulse_nodes: Vec<(usize, usize)>,
}

fn push_graded(nodes: &mut Vec<f64>, tags: &mut Vec<IntervalTag>, a: f64, b: f64, n: usize, r: f64, tag: IntervalTag) {
    for j in 1..=n {
        let x = if j == n {
            b
        } else {
            a + (b - a) * (j as f64 / n as f64).powf(r)
        };
        nodes.push(x);
        tags.push(tag);
    }
}

/// Builds a mesh covering [0, T] with every tᵢ and sᵢ as a node.
///
/// `[0, t₁]` and each `(sᵢ, tᵢ₊₁]` are graded toward their left endpoint as
/// a + (b − a)(j/n)^grading; impulse intervals `(tᵢ, sᵢ]` are uniform.
pub fn build_mesh(
    partition: &[(f64, f64)],
    horizon: f64,
    n_per_interval: usize,
    grading: f64,
) -> Result<Mesh, QuadratureError> {
    validate_partition(partition, horizon)?;
    if n_per_interval == 0 {
        return Err(QuadratureError::InvalidMesh(
            "n_per_interval must be at least 1".into(),
        ));
    }
    if !(grading >= 1.0 && grading.is_finite()) {
        return Err(QuadratureError::InvalidMesh(format!(
            "grading = {grading} must be >= 1"
        )));
    }
    let n = n_per_interval;
    let mut nodes = vec![0.0];
    let mut tags = vec![IntervalTag::Head];
    let first_end = partition.first().map_or(horizon, |p| p.0);
    push_graded(&mut nodes, &mut tags, 0.0, first_end, n, grading, IntervalTag::Head);

    let mut impulse_nodes = Vec::with_capacity(partition.len());
    for (k, &(t, s)) in partition.iter().enumerate() {
        let i = k + 1;
        let t_idx = nodes.len() - 1;
        if s > t {
            push_graded(&mut nodes, &mut tags, t, s, n, 1.0, IntervalTag::Impulse(i));
        }
        let s_idx = nodes.len() - 1;
        impulse_nodes.push((t_idx, s_idx));
        let next = partition.get(k + 1).map_or(horizon, |p| p.0);
        if next > s {
            push_graded(&mut nodes, &mut tags, s, next, n, grading, IntervalTag::Continuation(i));
        }
    }

    if nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(QuadratureError::InvalidMesh(
            "partition too fine for floating point node spacing".into(),
        ));
    }

    Ok(Mesh {
        nodes,
        tags,
        grading,
        n_per_interval,
        partition: partition.to_vec(),
        horizon,
        impulse_nodes,
    })
}

impl Mesh {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn tags(&self) -> &[IntervalTag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn n_per_interval(&self) -> usize {
        self.n_per_interval
    }

    pub fn partition(&self) -> &[(f64, f64)] {
        &self.partition
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Node indices of (tᵢ, sᵢ) for 1-based i.
    pub fn impulse_nodes(&self, i: usize) -> (usize, usize) {
        self.impulse_nodes[i - 1]
    }

    /// Index of the node equal to `t` (to within 1e-12 relative).
    pub fn index_of(&self, t: f64) -> Result<usize, QuadratureError> {
        let tol = 1e-12 * t.abs().max(1.0);
        let pos = self.nodes.partition_point(|&x| x < t - tol);
        match self.nodes.get(pos) {
            Some(&x) if (x - t).abs() <= tol => Ok(pos),
            _ => Err(QuadratureError::NodeAlignment { t }),
        }
    }

    /// The interval that starts at node `k`, when it differs from the
    /// interval containing `k`. Piecewise functions may jump there.
    pub fn interval_starting_at(&self, k: usize) -> Option<IntervalTag> {
        let next = *self.tags.get(k + 1)?;
        (next != self.tags[k]).then_some(next)
    }

    pub fn same_as(&self, other: &Mesh) -> bool {
        std::ptr::eq(self, other) || self == other
    }
}

/// Values of a piecewise trajectory on a mesh.
///
/// With `weighted_head` set, values on the head interval are stored as
/// (ψ(t) − ψ(0))^{1−γ}·x(t), which stays finite where x itself blows up
/// like (ψ(t) − ψ(0))^{γ−1}. Elsewhere values are raw. At nodes where a new
/// interval starts (the tᵢ), `right_limits` may hold the raw right limit
/// x(tᵢ⁺).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    mesh: Arc<Mesh>,
    psi: PsiFunction,
    gamma: f64,
    weighted_head: bool,
    values: Vec<f64>,
    right_limits: Vec<Option<f64>>,
}

impl GridFunction {
    /// Raw values everywhere, no jumps.
    pub fn raw(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self, QuadratureError> {
        Self::new(mesh, PsiFunction::Identity, 1.0, false, values)
    }

    pub fn new(
        mesh: Arc<Mesh>,
        psi: PsiFunction,
        gamma: f64,
        weighted_head: bool,
        values: Vec<f64>,
    ) -> Result<Self, QuadratureError> {
        if values.len() != mesh.len() {
            return Err(QuadratureError::LengthMismatch {
                values: values.len(),
                nodes: mesh.len(),
            });
        }
        let n = values.len();
        Ok(GridFunction {
            mesh,
            psi,
            gamma,
            weighted_head,
            values,
            right_limits: vec![None; n],
        })
    }

    /// Builds a function from its raw values at nodes t > 0 (and at t = 0
    /// when no weighting is needed) plus the weighted value at t = 0.
    pub fn from_raw_fn(
        mesh: Arc<Mesh>,
        psi: PsiFunction,
        gamma: f64,
        weighted_at_zero: f64,
        mut raw: impl FnMut(usize, f64) -> f64,
    ) -> Result<Self, QuadratureError> {
        let mut values = Vec::with_capacity(mesh.len());
        for (k, &t) in mesh.nodes().iter().enumerate() {
            let v = if mesh.tags()[k] == IntervalTag::Head && gamma < 1.0 {
                if k == 0 {
                    weighted_at_zero
                } else {
                    raw(k, t) * psi.offset(t)?.powf(1.0 - gamma)
                }
            } else {
                raw(k, t)
            };
            values.push(v);
        }
        Self::new(mesh, psi, gamma, true, values)
    }

    pub fn with_right_limits(mut self, right_limits: Vec<Option<f64>>) -> Result<Self, QuadratureError> {
        if right_limits.len() != self.values.len() {
            return Err(QuadratureError::LengthMismatch {
                values: right_limits.len(),
                nodes: self.values.len(),
            });
        }
        self.right_limits = right_limits;
        Ok(self)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn psi(&self) -> PsiFunction {
        self.psi
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn weighted_head(&self) -> bool {
        self.weighted_head
    }

    /// Stored values (weighted on the head interval when `weighted_head`).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn right_limits(&self) -> &[Option<f64>] {
        &self.right_limits
    }

    /// True when head values differ from raw values.
    pub fn head_is_singular(&self) -> bool {
        self.weighted_head && self.gamma < 1.0
    }

    /// Raw value at node k. At t = 0 with a singular head this is the IEEE
    /// result of weighted / 0 (±∞, or NaN when the weighted value is 0).
    pub fn raw_at(&self, k: usize) -> f64 {
        let v = self.values[k];
        if self.head_is_singular() && self.mesh.tags()[k] == IntervalTag::Head {
            let t = self.mesh.nodes()[k];
            let factor = self.psi.offset(t).map_or(f64::NAN, |u| u.powf(1.0 - self.gamma));
            v / factor
        } else {
            v
        }
    }

    /// Raw right limit at node k (equals `raw_at(k)` where there is no jump).
    pub fn raw_right_at(&self, k: usize) -> f64 {
        self.right_limits[k].unwrap_or_else(|| self.raw_at(k))
    }

    pub fn raw_values(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| self.raw_at(k)).collect()
    }

    /// Weighted value at a head node, raw value elsewhere.
    pub fn weighted_at(&self, k: usize) -> f64 {
        if self.weighted_head || self.mesh.tags()[k] != IntervalTag::Head || self.gamma >= 1.0 {
            self.values[k]
        } else {
            let t = self.mesh.nodes()[k];
            self.values[k] * self.psi.offset(t).map_or(f64::NAN, |u| u.powf(1.0 - self.gamma))
        }
    }

    pub fn compatible_with(&self, other: &GridFunction) -> bool {
        self.mesh.same_as(&other.mesh)
            && self.weighted_head == other.weighted_head
            && (!self.head_is_singular() || (self.gamma == other.gamma && self.psi == other.psi))
    }
}

// ---------------------------------------------------------------------------
// Panel integrals.

/// (1 + x)^p − 1 − p·x for x ≥ −1, without cancellation near x = 0.
fn taylor_remainder(x: f64, p: f64) -> f64 {
    if x.abs() < 0.125 {
        let mut term = 0.5 * p * (p - 1.0) * x * x;
        let mut sum = term;
        for k in 3..100 {
            term *= (p - (k as f64 - 1.0)) / k as f64 * x;
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        (p * x.ln_1p()).exp_m1() - p * x
    }
}

/// Exact integrals of (U − u)^{α−1} against the two hat functions of the
/// panel [ua, ub], ub ≤ U. Returns (weight on F(ua), weight on F(ub)),
/// both nonnegative, without the 1/Γ(α) factor.
pub fn panel_weights(target: f64, ua: f64, ub: f64, alpha: f64) -> (f64, f64) {
    let h = ub - ua;
    let a = target - ua;
    let b = target - ub;
    let p = alpha + 1.0;
    let scale = h * alpha * p;
    let left = a.powf(p) * taylor_remainder(-h / a, p) / scale;
    let right = if b <= 0.0 {
        h.powf(alpha) / (alpha * p)
    } else {
        b.powf(p) * taylor_remainder(h / b, p) / scale
    };
    (left.max(0.0), right.max(0.0))
}

const GAUSS_POINTS: usize = 32;

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn gauss32() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GAUSS_POINTS))
}

fn gauss_on(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss32();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter().zip(w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

/// Σⱼ cⱼ(p)·(xⱼ/(q + j)) with cⱼ(p) the coefficients of (1 − r)^{p−1} = Σ cⱼ rʲ,
/// evaluated for several ratios r at once. Requires every r ≤ 3/4.
fn binomial_series(p: f64, q: f64, ratios: &[(f64, f64)]) -> f64 {
    let mut c = 1.0;
    let mut powers: Vec<f64> = vec![1.0; ratios.len()];
    let mut sum = 0.0;
    for j in 0..2000 {
        let term: f64 = ratios
            .iter()
            .zip(&powers)
            .map(|(&(scale, _), &pw)| scale * pw)
            .sum::<f64>()
            * c
            / (q + j as f64);
        sum += term;
        if j > 0 && term.abs() <= 1e-17 * sum.abs() {
            break;
        }
        c *= (j as f64 + 1.0 - p) / (j as f64 + 1.0);
        for (pw, &(_, r)) in powers.iter_mut().zip(ratios) {
            *pw *= r;
        }
    }
    sum
}

/// ∫₀^{u₁} (U − u)^{α−1} u^{γ−1} du for U ≥ u₁ > 0.
///
/// The panel is split at a = u₁/2. On [0, a] the kernel is expanded in
/// powers of u/U ≤ 1/2 and integrated term by term against u^{γ−1}. On
/// [a, u₁] the same is done with v = U − u against v^{α−1} when U ≤ 2u₁;
/// further away the integrand is smooth and a 32-point Gauss panel is used.
pub fn head_panel_integral(target: f64, u1: f64, alpha: f64, gamma_order: f64) -> f64 {
    let a = 0.5 * u1;
    let left = target.powf(alpha - 1.0)
        * a.powf(gamma_order)
        * binomial_series(alpha, gamma_order, &[(1.0, a / target)]);
    let right = if target <= 2.0 * u1 {
        let v_lo = (target - u1).max(0.0);
        let v_hi = target - a;
        target.powf(gamma_order - 1.0)
            * binomial_series(
                gamma_order,
                alpha,
                &[
                    (v_hi.powf(alpha), v_hi / target),
                    (-v_lo.powf(alpha), v_lo / target),
                ],
            )
    } else {
        gauss_on(a, u1, |u| (target - u).powf(alpha - 1.0) * u.powf(gamma_order - 1.0))
    };
    left + right
}

/// Panel weights of the fractional integral for every target node of a mesh.
///
/// For target k the table holds, for each panel j < k, the weights on the
/// left and right panel endpoints, already divided by Γ(α). When the
/// integrand is singular at 0 like (ψ(s) − ψ(0))^{γ−1}, the first panel is
/// replaced by the exact head panel with the weighted integrand frozen at
/// its node-1 value.
#[derive(Debug, Clone)]
pub struct KernelWeights {
    psi: PsiFunction,
    alpha: f64,
    head_gamma: f64,
    offsets: Vec<f64>,
    panels: Vec<Vec<(f64, f64)>>,
    head: Vec<f64>,
}

impl KernelWeights {
    pub fn new(psi: &PsiFunction, alpha: f64, mesh: &Mesh, head_gamma: f64) -> Result<Self, QuadratureError> {
        let offsets = mesh
            .nodes()
            .iter()
            .map(|&t| psi.offset(t))
            .collect::<Result<Vec<_>, _>>()?;
        let inv_gamma = 1.0 / gamma(alpha);
        let panels: Vec<Vec<(f64, f64)>> = (0..offsets.len())
            .into_par_iter()
            .map(|k| {
                let target = offsets[k];
                (0..k)
                    .map(|j| {
                        let (l, r) = panel_weights(target, offsets[j], offsets[j + 1], alpha);
                        (l * inv_gamma, r * inv_gamma)
                    })
                    .collect()
            })
            .collect();
        let head = if head_gamma < 1.0 && offsets.len() > 1 {
            let u1 = offsets[1];
            let factor = u1.powf(1.0 - head_gamma) * inv_gamma;
            (0..offsets.len())
                .into_par_iter()
                .map(|k| {
                    if k == 0 {
                        0.0
                    } else {
                        head_panel_integral(offsets[k], u1, alpha, head_gamma) * factor
                    }
                })
                .collect()
        } else {
            vec![0.0; offsets.len()]
        };
        Ok(KernelWeights {
            psi: *psi,
            alpha,
            head_gamma,
            offsets,
            panels,
            head,
        })
    }

    pub fn psi(&self) -> PsiFunction {
        self.psi
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn head_gamma(&self) -> f64 {
        self.head_gamma
    }

    /// u = ψ(t) − ψ(0) at each node.
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// (1/Γ(α)) ∫ over nodes [lo, hi] of (U_k − u)^{α−1} F du, U_k the
    /// target node's offset, hi ≤ k. `left[j]` is the value F takes on the
    /// panel to the right of node j (its right limit), `right[j]` the value on
    /// the panel to its left. With `head_corrected` and lo = 0 the first
    /// panel uses the head panel weight on `right[1]`.
    pub fn integrate(
        &self,
        target: usize,
        lo: usize,
        hi: usize,
        left: &[f64],
        right: &[f64],
        head_corrected: bool,
    ) -> f64 {
        debug_assert!(hi <= target);
        if hi <= lo {
            return 0.0;
        }
        let row = &self.panels[target];
        let mut start = lo;
        let mut acc = 0.0;
        if head_corrected && lo == 0 && self.head_gamma < 1.0 {
            acc += self.head[target] * right[1];
            start = 1;
        }
        for j in start..hi {
            let (wl, wr) = row[j];
            acc += wl * left[j] + wr * right[j + 1];
        }
        acc
    }

    /// Dot-product weights on node values for ∫₀^{t_k} with a continuous integrand.
    pub fn dot_weights(&self, target: usize) -> Vec<f64> {
        let mut w = vec![0.0; target + 1];
        for (j, &(wl, wr)) in self.panels[target].iter().enumerate() {
            w[j] += wl;
            w[j + 1] += wr;
        }
        w
    }
}

/// Convolution weights so that ∫₀ᵗ equals a dot product with the node values
/// 0..=k of a continuous integrand, where t is node k.
pub fn precompute_weights(
    psi: &PsiFunction,
    alpha: f64,
    mesh: &Mesh,
    t: f64,
) -> Result<Vec<f64>, QuadratureError> {
    let k = mesh.index_of(t)?;
    let inv_gamma = 1.0 / gamma(alpha);
    let target = psi.offset(mesh.nodes()[k])?;
    let mut w = vec![0.0; k + 1];
    let mut ua = psi.offset(mesh.nodes()[0])?;
    for j in 0..k {
        let ub = psi.offset(mesh.nodes()[j + 1])?;
        let (l, r) = panel_weights(target, ua, ub, alpha);
        w[j] += l * inv_gamma;
        w[j + 1] += r * inv_gamma;
        ua = ub;
    }
    Ok(w)
}

/// I^{α,ψ}_{lower⁺} F (t) by product integration.
///
/// Both limits must be mesh nodes. For a singular weighted head the first
/// panel from 0 is integrated exactly against u^{γ−1}.
pub fn frac_integral_at(
    psi: &PsiFunction,
    alpha: f64,
    f: &GridFunction,
    lower: f64,
    t: f64,
) -> Result<f64, QuadratureError> {
    let mesh = f.mesh();
    let lo = mesh.index_of(lower)?;
    let hi = mesh.index_of(t)?;
    if lo >= hi {
        return Err(QuadratureError::Limits { lower, upper: t });
    }
    let inv_gamma = 1.0 / gamma(alpha);
    let nodes = mesh.nodes();
    let target = psi.offset(nodes[hi])?;
    let mut acc = 0.0;
    let mut start = lo;
    if lo == 0 && f.head_is_singular() {
        let u1 = psi.offset(nodes[1])?;
        let weighted = f.raw_at(1) * u1.powf(1.0 - f.gamma());
        acc += head_panel_integral(target, u1, alpha, f.gamma()) * weighted * inv_gamma;
        start = 1;
    }
    for j in start..hi {
        let ua = psi.offset(nodes[j])?;
        let ub = psi.offset(nodes[j + 1])?;
        let (l, r) = panel_weights(target, ua, ub, alpha);
        acc += (l * f.raw_right_at(j) + r * f.raw_at(j + 1)) * inv_gamma;
    }
    Ok(acc)
}
