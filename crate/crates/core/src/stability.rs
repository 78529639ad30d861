//! Contraction constant, H6 check, integral-inequality residuals and the
//! Ulam-Hyers-Rassias envelope.

use std::fmt;

use thiserror::Error;

use crate::expr::{EvalEnv, EvalError, Expr};
use crate::problem::{HypothesisData, ImpulsiveProblem};
use crate::psi::{FractionalOrder, PsiError, PsiFunction};
use crate::quadrature::{GridFunction, IntervalTag, KernelWeights, Mesh, QuadratureError};
use crate::solver::{continuation_memory, integrands, Discretization, SolverError};
use crate::special::gamma;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("contraction violated: Phi = {phi} >= 1, no envelope available")]
    ContractionViolation { phi: f64 },
    #[error("evaluating phi at t = {t}: {source}")]
    Phi { t: f64, source: EvalError },
    #[error("phi must be positive on (0, T], got {value} at t = {t}")]
    PhiNotPositive { t: f64, value: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Psi(#[from] PsiError),
    #[error("grid functions are not defined on a common mesh")]
    MeshMismatch,
}

/// Absolute slack for the residual inequalities.
pub const RESIDUAL_ABS_SLACK: f64 = 1e-8;
/// Slack relative to the right-hand side.
pub const RESIDUAL_REL_SLACK: f64 = 1e-6;

/// Φ = maxᵢ (L·C_φ + L·u^α/Γ(α+1) + 1)·L_{gᵢ} + (K̄·u^{2α}·C_φ²/Γ(α+1) + K̄·C_φ² + C_φ)·L_f
/// with u = ψ(T) − ψ(0). Without impulses the L_g term is zero.
pub fn phi_constant(h: &HypothesisData, order: FractionalOrder, psi: &PsiFunction, horizon: f64) -> Result<f64, PsiError> {
    let a = order.alpha();
    let u = psi.offset(horizon)?;
    let g1 = gamma(a + 1.0);
    let c = h.c_phi;
    let l = h.l_ell;
    let impulse = (l * c + l * u.powf(a) / g1 + 1.0) * h.l_g.iter().copied().fold(0.0, f64::max);
    let forcing = (h.k_bar * u.powf(2.0 * a) / g1 * c * c + h.k_bar * c * c + c) * h.l_f;
    Ok(impulse + forcing)
}

/// (1 + C_φ)/(1 − Φ).
pub fn envelope_coeff(phi_c: f64, c_phi: f64) -> Result<f64, StabilityError> {
    if phi_c < 1.0 {
        Ok((1.0 + c_phi) / (1.0 - phi_c))
    } else {
        Err(StabilityError::ContractionViolation { phi: phi_c })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    pub phi_constant: f64,
    pub contraction_ok: bool,
    /// Present only when `contraction_ok`.
    pub envelope_coeff: Option<f64>,
    pub c_phi_used: f64,
    pub delta: f64,
}

impl StabilityCertificate {
    pub fn new(problem: &ImpulsiveProblem, h: &HypothesisData) -> Result<Self, PsiError> {
        let phi = phi_constant(h, problem.order, &problem.psi, problem.horizon)?;
        let coeff = envelope_coeff(phi, h.c_phi).ok();
        Ok(StabilityCertificate {
            phi_constant: phi,
            contraction_ok: coeff.is_some(),
            envelope_coeff: coeff,
            c_phi_used: h.c_phi,
            delta: h.delta,
        })
    }
}

fn phi_values(phi: &Expr, env: &EvalEnv, nodes: &[f64]) -> Result<Vec<f64>, StabilityError> {
    nodes
        .iter()
        .map(|&t| phi.eval(env, t, 0.0, 0.0).map_err(|source| StabilityError::Phi { t, source }))
        .collect()
}

/// Numerical sup over nodes t > 0 of I^{α,ψ}φ(t)/φ(t).
pub fn verify_h6(psi: &PsiFunction, alpha: f64, phi: &Expr, mesh: &Mesh) -> Result<f64, StabilityError> {
    let env = EvalEnv::new(*psi);
    let values = phi_values(phi, &env, mesh.nodes())?;
    let weights = KernelWeights::new(psi, alpha, mesh, 1.0)?;
    let mut sup: f64 = 0.0;
    for k in 1..mesh.len() {
        let v = values[k];
        if !(v > 0.0) {
            return Err(StabilityError::PhiNotPositive { t: mesh.nodes()[k], value: v });
        }
        let integral = weights.integrate(k, 0, k, &values, &values, false);
        sup = sup.max(integral / v);
    }
    Ok(sup)
}

/// Which of the three integral inequalities an entry measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    /// |y − gᵢ(t, y, M)| ≤ δ on (tᵢ, sᵢ].
    Impulse,
    /// |y − Ψ^γ x₀ − I₀ f| ≤ I^{α,ψ}φ on [0, t₁].
    Head,
    /// |y − gᵢ(sᵢ, y(sᵢ), M̃) − I_{sᵢ} f| ≤ δ + I_{sᵢ}^{α,ψ}φ on (sᵢ, tᵢ₊₁].
    Continuation,
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Inequality::Impulse => "(4)",
            Inequality::Head => "(5)",
            Inequality::Continuation => "(6)",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualEntry {
    pub interval: IntervalTag,
    pub inequality: Inequality,
    /// Largest |left-hand side|.
    pub max_defect: f64,
    /// Largest left-hand side minus right-hand side.
    pub max_excess: f64,
    pub satisfied: bool,
}

/// Residuals of the integral inequalities, one entry per nonempty interval.
/// Head entries are measured in the weighted form, multiplying both sides
/// by (ψ(t) − ψ(0))^{1−γ}.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
    pub satisfied: bool,
}

impl ResidualReport {
    pub fn max_defect(&self) -> f64 {
        self.entries.iter().map(|e| e.max_defect).fold(0.0, f64::max)
    }

    pub fn max_excess(&self) -> f64 {
        self.entries.iter().map(|e| e.max_excess).fold(f64::NEG_INFINITY, f64::max)
    }
}

struct Accumulator {
    entries: Vec<ResidualEntry>,
}

impl Accumulator {
    fn push(&mut self, interval: IntervalTag, inequality: Inequality, lhs: f64, rhs: f64) {
        let excess = lhs - rhs;
        let ok = excess <= RESIDUAL_ABS_SLACK + RESIDUAL_REL_SLACK * rhs.abs();
        let entry = match self.entries.iter_mut().find(|e| e.interval == interval) {
            Some(e) => e,
            None => {
                self.entries.push(ResidualEntry {
                    interval,
                    inequality,
                    max_defect: 0.0,
                    max_excess: f64::NEG_INFINITY,
                    satisfied: true,
                });
                self.entries.last_mut().unwrap()
            }
        };
        entry.max_defect = entry.max_defect.max(lhs);
        entry.max_excess = entry.max_excess.max(excess);
        entry.satisfied &= ok && lhs.is_finite();
    }
}

/// Checks inequalities (4), (5) and (6) for a trajectory y on the problem mesh.
///
/// The initial datum in (5) is y's own, I^{1−γ,ψ}y(0).
pub fn residual_check(
    problem: &ImpulsiveProblem,
    h: &HypothesisData,
    y: &GridFunction,
) -> Result<ResidualReport, StabilityError> {
    let disc = Discretization::new(problem, y.mesh().clone())?;
    residual_check_with(problem, h, &disc, y)
}

pub fn residual_check_with(
    problem: &ImpulsiveProblem,
    h: &HypothesisData,
    disc: &Discretization,
    y: &GridFunction,
) -> Result<ResidualReport, StabilityError> {
    if !y.mesh().same_as(disc.mesh()) || !y.weighted_head() || y.gamma() != problem.order.gamma() {
        return Err(StabilityError::MeshMismatch);
    }
    let mesh = disc.mesh();
    let nodes = mesh.nodes();
    let env = problem.env();
    let singular = y.head_is_singular();
    let g_ord = problem.order.gamma();
    let data = integrands(problem, disc, y)?;
    let phi = phi_values(&h.phi, &env, nodes)?;
    let weights = disc.weights();
    let datum = if g_ord < 1.0 { y.values()[0] * gamma(g_ord) } else { y.values()[0] };
    let eval_g = |i: usize, k: usize, t: f64, x: f64, m: f64| {
        problem.impulses[i - 1]
            .eval(&env, t, x, m)
            .map_err(|source| SolverError::Eval {
                what: format!("g{i}"),
                node: k,
                t,
                source,
            })
    };
    let memory = |k: usize| weights.integrate(k, 0, k, &data.ell.left, &data.ell.right, singular);

    let mut acc = Accumulator { entries: Vec::new() };
    for k in 0..nodes.len() {
        let t = nodes[k];
        match mesh.tags()[k] {
            IntervalTag::Head => {
                if k == 0 {
                    continue;
                }
                let integral = weights.integrate(k, 0, k, &data.f.left, &data.f.right, singular);
                let rhs = weights.integrate(k, 0, k, &phi, &phi, false);
                let factor = disc.head_factor(k);
                let lhs = if g_ord < 1.0 {
                    (y.values()[k] - datum / gamma(g_ord) - factor * integral).abs()
                } else {
                    (y.values()[k] - datum - integral).abs()
                };
                acc.push(IntervalTag::Head, Inequality::Head, lhs, factor * rhs);
            }
            IntervalTag::Impulse(i) => {
                let lhs = (data.x[k] - eval_g(i, k, t, data.x[k], memory(k))?).abs();
                acc.push(IntervalTag::Impulse(i), Inequality::Impulse, lhs, h.delta);
            }
            IntervalTag::Continuation(i) => {
                let (_, s_idx) = mesh.impulse_nodes(i);
                let m = continuation_memory(problem, disc, &data.ell, singular, k, s_idx);
                let g = eval_g(i, k, nodes[s_idx], data.x[s_idx], m)?;
                let integral = weights.integrate(k, s_idx, k, &data.f.left, &data.f.right, false);
                let rhs = h.delta + weights.integrate(k, s_idx, k, &phi, &phi, false);
                let lhs = (data.x[k] - g - integral).abs();
                acc.push(IntervalTag::Continuation(i), Inequality::Continuation, lhs, rhs);
            }
        }
        match mesh.interval_starting_at(k) {
            Some(IntervalTag::Impulse(i)) => {
                let x = data.x_right[k];
                let lhs = (x - eval_g(i, k, t, x, memory(k))?).abs();
                acc.push(IntervalTag::Impulse(i), Inequality::Impulse, lhs, h.delta);
            }
            Some(IntervalTag::Continuation(i)) => {
                let g = eval_g(i, k, t, data.x[k], memory(k))?;
                let lhs = (data.x_right[k] - g).abs();
                acc.push(IntervalTag::Continuation(i), Inequality::Continuation, lhs, h.delta);
            }
            _ => {}
        }
    }
    let satisfied = acc.entries.iter().all(|e| e.satisfied);
    Ok(ResidualReport {
        entries: acc.entries,
        satisfied,
    })
}

/// y₀ + ε·(φ(t) + δ), at nodes and at stored right limits.
pub fn perturb(
    problem: &ImpulsiveProblem,
    h: &HypothesisData,
    y0: &GridFunction,
    epsilon: f64,
) -> Result<GridFunction, StabilityError> {
    let mesh = y0.mesh();
    let env = problem.env();
    let phi = phi_values(&h.phi, &env, mesh.nodes())?;
    let singular = y0.head_is_singular();
    let mut values = y0.values().to_vec();
    for (k, v) in values.iter_mut().enumerate() {
        let bump = epsilon * (phi[k] + h.delta);
        if singular && mesh.tags()[k] == IntervalTag::Head {
            if k > 0 {
                *v += bump * problem.psi.offset(mesh.nodes()[k])?.powf(1.0 - y0.gamma());
            }
        } else {
            *v += bump;
        }
    }
    let rights = y0
        .right_limits()
        .iter()
        .enumerate()
        .map(|(k, r)| r.map(|r| r + epsilon * (phi[k] + h.delta)))
        .collect();
    Ok(GridFunction::new(mesh.clone(), y0.psi(), y0.gamma(), y0.weighted_head(), values)?.with_right_limits(rights)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCheck {
    pub satisfied: bool,
    /// Largest positive |y − y₀| − bound; 0 when inside everywhere.
    pub max_violation: f64,
    /// Smallest bound − |y − y₀| over nodes t > 0.
    pub min_margin: f64,
    /// Bound (1 + C_φ)(φ(t) + δ)/(1 − Φ) at each node.
    pub envelope: Vec<f64>,
}

/// Checks |y(t) − y₀(t)| ≤ envelope_coeff·(φ(t) + δ) at every node t > 0,
/// comparing raw values (and right limits where stored).
pub fn verify_envelope(
    y: &GridFunction,
    y0: &GridFunction,
    cert: &StabilityCertificate,
    phi: &Expr,
    mesh: &Mesh,
) -> Result<EnvelopeCheck, StabilityError> {
    if !y.mesh().same_as(mesh) || !y0.mesh().same_as(mesh) {
        return Err(StabilityError::MeshMismatch);
    }
    let coeff = cert
        .envelope_coeff
        .ok_or(StabilityError::ContractionViolation { phi: cert.phi_constant })?;
    let env = EvalEnv::new(y0.psi());
    let phis = phi_values(phi, &env, mesh.nodes())?;
    let envelope: Vec<f64> = phis.iter().map(|p| coeff * (p + cert.delta)).collect();
    let mut max_violation: f64 = 0.0;
    let mut min_margin = f64::INFINITY;
    for k in 1..mesh.len() {
        let mut gaps = vec![(y.raw_at(k) - y0.raw_at(k)).abs()];
        if y.right_limits()[k].is_some() || y0.right_limits()[k].is_some() {
            gaps.push((y.raw_right_at(k) - y0.raw_right_at(k)).abs());
        }
        for gap in gaps {
            let margin = envelope[k] - gap;
            min_margin = min_margin.min(margin);
            max_violation = max_violation.max(-margin);
        }
    }
    Ok(EnvelopeCheck {
        satisfied: max_violation == 0.0 && min_margin.is_finite(),
        max_violation,
        min_margin,
        envelope,
    })
}
