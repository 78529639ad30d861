//! The mild-solution operator Ω and Picard iteration to its fixed point.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{EvalEnv, EvalError, Expr};
use crate::problem::{ImpulsiveProblem, MemoryAnchor};
use crate::psi::{singular_weight, PsiError};
use crate::quadrature::{GridFunction, IntervalTag, KernelWeights, Mesh, QuadratureError};
use crate::special::gamma;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("evaluating {what} at t = {t} (node {node}): {source}")]
    Eval {
        what: String,
        node: usize,
        t: f64,
        source: EvalError,
    },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Psi(#[from] PsiError),
    #[error("grid function is not defined on the problem mesh")]
    MeshMismatch,
    #[error("scalar impulse equation x = g_{impulse}(t, x, M) at t = {t} did not converge in {budget} steps (last step {last_step:e})")]
    ScalarNonConvergence {
        impulse: usize,
        t: f64,
        budget: usize,
        last_step: f64,
    },
    #[error("invalid solver option: {0}")]
    InvalidOption(String),
}

/// Stopping tolerance and step budget for the scalar impulse equation.
pub const SCALAR_TOL: f64 = 1e-15;
pub const SCALAR_BUDGET: usize = 500;

fn eval_at(e: &Expr, what: &str, env: &EvalEnv, node: usize, t: f64, x: f64, w: f64) -> Result<f64, SolverError> {
    e.eval(env, t, x, w).map_err(|source| SolverError::Eval {
        what: what.to_string(),
        node,
        t,
        source,
    })
}

/// Quadrature data for one problem on one mesh, reusable across iterations.
#[derive(Debug, Clone)]
pub struct Discretization {
    mesh: Arc<Mesh>,
    weights: KernelWeights,
    /// Ψ^γ(t, 0) on the head nodes (0 at t = 0 when γ < 1).
    head_weight: Vec<f64>,
    /// (ψ(t) − ψ(0))^{1−γ} at every node.
    head_factor: Vec<f64>,
}

impl Discretization {
    pub fn new(problem: &ImpulsiveProblem, mesh: Arc<Mesh>) -> Result<Self, SolverError> {
        if mesh.partition() != problem.partition.as_slice() || mesh.horizon() != problem.horizon {
            return Err(SolverError::MeshMismatch);
        }
        let g = problem.order.gamma();
        let weights = KernelWeights::new(&problem.psi, problem.order.alpha(), &mesh, g)?;
        let mut head_weight = Vec::with_capacity(mesh.len());
        let mut head_factor = Vec::with_capacity(mesh.len());
        for (k, &t) in mesh.nodes().iter().enumerate() {
            let u = weights.offsets()[k];
            head_factor.push(if g < 1.0 { u.powf(1.0 - g) } else { 1.0 });
            head_weight.push(if g < 1.0 && k == 0 {
                0.0
            } else {
                singular_weight(&problem.psi, g, t)?
            });
        }
        Ok(Discretization {
            mesh,
            weights,
            head_weight,
            head_factor,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn weights(&self) -> &KernelWeights {
        &self.weights
    }

    pub fn head_weight(&self, k: usize) -> f64 {
        self.head_weight[k]
    }

    pub fn head_factor(&self, k: usize) -> f64 {
        self.head_factor[k]
    }
}

/// Integrand values at every node, both at the node and as right limits.
#[derive(Debug, Clone)]
pub(crate) struct Sampled {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// The integrands of Ω for a given trajectory x.
#[derive(Debug, Clone)]
pub(crate) struct Integrands {
    pub x: Vec<f64>,
    pub x_right: Vec<f64>,
    pub f: Sampled,
    pub ell: Sampled,
}

fn sample(
    e: &Expr,
    what: &str,
    env: &EvalEnv,
    nodes: &[f64],
    x: &[f64],
    x_right: &[f64],
    w: Option<&[f64]>,
    skip_origin: bool,
) -> Result<Sampled, SolverError> {
    let n = nodes.len();
    let mut left = vec![0.0; n];
    let mut right = vec![0.0; n];
    for k in usize::from(skip_origin)..n {
        let wk = w.map_or(0.0, |w| w[k]);
        right[k] = eval_at(e, what, env, k, nodes[k], x[k], wk)?;
        left[k] = if x_right[k].to_bits() == x[k].to_bits() {
            right[k]
        } else {
            eval_at(e, what, env, k, nodes[k], x_right[k], wk)?
        };
    }
    Ok(Sampled { left, right })
}

pub(crate) fn integrands(
    problem: &ImpulsiveProblem,
    disc: &Discretization,
    x: &GridFunction,
) -> Result<Integrands, SolverError> {
    let env = problem.env();
    let mesh = disc.mesh();
    let nodes = mesh.nodes();
    let singular = x.head_is_singular();
    let xr = x.raw_values();
    let xr_right: Vec<f64> = (0..nodes.len()).map(|k| x.raw_right_at(k)).collect();
    let kern = sample(&problem.kernel, "K", &env, nodes, &xr, &xr_right, None, singular)?;
    let w: Vec<f64> = (0..nodes.len())
        .into_par_iter()
        .map(|k| disc.weights.integrate(k, 0, k, &kern.left, &kern.right, singular))
        .collect();
    let f = sample(&problem.f, "f", &env, nodes, &xr, &xr_right, Some(&w), singular)?;
    let ell = sample(&problem.ell, "ell", &env, nodes, &xr, &xr_right, None, singular)?;
    Ok(Integrands {
        x: xr,
        x_right: xr_right,
        f,
        ell,
    })
}

/// Memory argument of gᵢ on the continuation interval starting at node `s_idx`.
pub(crate) fn continuation_memory(
    problem: &ImpulsiveProblem,
    disc: &Discretization,
    ell: &Sampled,
    singular: bool,
    k: usize,
    s_idx: usize,
) -> f64 {
    let target = match problem.memory_anchor {
        MemoryAnchor::Evaluation => k,
        MemoryAnchor::ImpulseEnd => s_idx,
    };
    disc.weights
        .integrate(target, 0, s_idx, &ell.left, &ell.right, singular)
}

fn check_input(problem: &ImpulsiveProblem, disc: &Discretization, x: &GridFunction) -> Result<(), SolverError> {
    let ok = x.mesh().same_as(disc.mesh())
        && x.weighted_head()
        && x.psi() == problem.psi
        && x.gamma() == problem.order.gamma();
    if ok {
        Ok(())
    } else {
        Err(SolverError::MeshMismatch)
    }
}

/// Evaluation of Ω with precomputed quadrature data.
pub fn omega_apply_with(
    problem: &ImpulsiveProblem,
    disc: &Discretization,
    x: &GridFunction,
    implicit_impulse: bool,
) -> Result<GridFunction, SolverError> {
    check_input(problem, disc, x)?;
    let data = integrands(problem, disc, x)?;
    let mesh = disc.mesh();
    let nodes = mesh.nodes();
    let tags = mesh.tags();
    let singular = x.head_is_singular();
    let g_ord = problem.order.gamma();
    let env = problem.env();
    let gw0 = if g_ord < 1.0 { problem.x0 / gamma(g_ord) } else { problem.x0 };

    let impulse = |i: usize, k: usize, t: f64, xv: f64, m: f64| -> Result<f64, SolverError> {
        if implicit_impulse {
            impulse_fixed_point(problem, i, t, m, xv).map(|s| s.value)
        } else {
            eval_at(&problem.impulses[i - 1], &format!("g{i}"), &env, k, t, xv, m)
        }
    };
    let memory = |k: usize| disc.weights.integrate(k, 0, k, &data.ell.left, &data.ell.right, singular);

    let results: Vec<Result<(f64, Option<f64>), SolverError>> = (0..nodes.len())
        .into_par_iter()
        .map(|k| {
            let t = nodes[k];
            let value = match tags[k] {
                IntervalTag::Head => {
                    if k == 0 {
                        gw0
                    } else {
                        let integral = disc.weights.integrate(k, 0, k, &data.f.left, &data.f.right, singular);
                        if g_ord < 1.0 {
                            gw0 + disc.head_factor[k] * integral
                        } else {
                            problem.x0 + integral
                        }
                    }
                }
                IntervalTag::Impulse(i) => impulse(i, k, t, data.x[k], memory(k))?,
                IntervalTag::Continuation(i) => {
                    let (_, s_idx) = mesh.impulse_nodes(i);
                    let m = continuation_memory(problem, disc, &data.ell, singular, k, s_idx);
                    let g = eval_at(&problem.impulses[i - 1], &format!("g{i}"), &env, k, nodes[s_idx], data.x[s_idx], m)?;
                    g + disc.weights.integrate(k, s_idx, k, &data.f.left, &data.f.right, false)
                }
            };
            let right = match mesh.interval_starting_at(k) {
                Some(IntervalTag::Impulse(i)) => Some(impulse(i, k, t, data.x_right[k], memory(k))?),
                Some(IntervalTag::Continuation(i)) => Some(eval_at(
                    &problem.impulses[i - 1],
                    &format!("g{i}"),
                    &env,
                    k,
                    t,
                    data.x[k],
                    memory(k),
                )?),
                _ => None,
            };
            Ok((value, right))
        })
        .collect();

    let mut values = Vec::with_capacity(nodes.len());
    let mut rights = Vec::with_capacity(nodes.len());
    for r in results {
        let (v, rl) = r?;
        values.push(v);
        rights.push(rl);
    }
    Ok(GridFunction::new(mesh.clone(), problem.psi, g_ord, true, values)?.with_right_limits(rights)?)
}

/// (Ω x) at every node of x's mesh. Head values are returned weighted.
pub fn omega_apply(problem: &ImpulsiveProblem, x: &GridFunction) -> Result<GridFunction, SolverError> {
    let disc = Discretization::new(problem, x.mesh().clone())?;
    omega_apply_with(problem, &disc, x, false)
}

/// Ψ^γ(t, 0)x₀ on the head interval, zero elsewhere.
pub fn skeleton(problem: &ImpulsiveProblem, mesh: Arc<Mesh>) -> Result<GridFunction, SolverError> {
    let g = problem.order.gamma();
    let head = if g < 1.0 { problem.x0 / gamma(g) } else { problem.x0 };
    let values: Vec<f64> = mesh
        .tags()
        .iter()
        .map(|&tag| if tag == IntervalTag::Head { head } else { 0.0 })
        .collect();
    let rights: Vec<Option<f64>> = (0..mesh.len())
        .map(|k| mesh.interval_starting_at(k).map(|_| 0.0))
        .collect();
    Ok(GridFunction::new(mesh, problem.psi, g, true, values)?.with_right_limits(rights)?)
}

/// Sup over nodes (and stored right limits) of |a − b|, weighted on the head.
pub fn weighted_sup_distance(a: &GridFunction, b: &GridFunction) -> Result<f64, SolverError> {
    if !a.mesh().same_as(b.mesh()) {
        return Err(SolverError::MeshMismatch);
    }
    let mut sup: f64 = 0.0;
    for k in 0..a.mesh().len() {
        sup = sup.max((a.weighted_at(k) - b.weighted_at(k)).abs());
        if a.right_limits()[k].is_some() || b.right_limits()[k].is_some() {
            sup = sup.max((a.raw_right_at(k) - b.raw_right_at(k)).abs());
        }
    }
    Ok(sup)
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Solve x = gᵢ(t, x, M) pointwise on impulse intervals instead of
    /// substituting the previous iterate.
    pub implicit_impulse: bool,
    /// Starting iterate; the skeleton when absent.
    pub initial: Option<GridFunction>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iter: 200,
            implicit_impulse: false,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub y0: GridFunction,
    pub iterations: usize,
    pub diff_history: Vec<f64>,
    pub converged: bool,
}

impl SolveResult {
    pub fn final_diff(&self) -> f64 {
        self.diff_history.last().copied().unwrap_or(f64::NAN)
    }

    /// diff[k+1]/diff[k] for successive differences, skipping exact zeros.
    pub fn diff_ratios(&self) -> Vec<f64> {
        self.diff_history
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

/// Picard iteration xₙ₊₁ = Ω xₙ until the weighted sup distance between
/// successive iterates drops below `opts.tol`.
pub fn picard_solve_with(
    problem: &ImpulsiveProblem,
    disc: &Discretization,
    opts: &SolveOptions,
) -> Result<SolveResult, SolverError> {
    if !(opts.tol > 0.0) {
        return Err(SolverError::InvalidOption(format!("tol = {} must be positive", opts.tol)));
    }
    if opts.max_iter == 0 {
        return Err(SolverError::InvalidOption("max_iter must be at least 1".into()));
    }
    let mut x = match &opts.initial {
        Some(x) => x.clone(),
        None => skeleton(problem, disc.mesh().clone())?,
    };
    let mut diff_history = Vec::new();
    for n in 1..=opts.max_iter {
        let next = omega_apply_with(problem, disc, &x, opts.implicit_impulse)?;
        let d = weighted_sup_distance(&next, &x)?;
        diff_history.push(d);
        x = next;
        if d < opts.tol {
            return Ok(SolveResult {
                y0: x,
                iterations: n,
                diff_history,
                converged: true,
            });
        }
        if !d.is_finite() {
            break;
        }
    }
    Ok(SolveResult {
        y0: x,
        iterations: diff_history.len(),
        diff_history,
        converged: false,
    })
}

pub fn picard_solve(
    problem: &ImpulsiveProblem,
    mesh: Arc<Mesh>,
    opts: &SolveOptions,
) -> Result<SolveResult, SolverError> {
    let disc = Discretization::new(problem, mesh)?;
    picard_solve_with(problem, &disc, opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarSolution {
    pub value: f64,
    pub steps: usize,
    pub damped: bool,
}

/// Fixed point of x = g(x) by plain iteration from g(start).
///
/// Iteration switches permanently to x ← x + ½(g(x) − x) once it oscillates,
/// meaning two consecutive steps have opposite signs and the second is at
/// least as long as the first (a period-two cycle counts as oscillating).
/// `steps` counts iterates produced before |g(x) − x| ≤ tol·(1 + |x|).
pub fn scalar_fixed_point<E>(
    mut g: impl FnMut(f64) -> Result<f64, E>,
    start: f64,
    tol: f64,
    budget: usize,
) -> Result<Result<ScalarSolution, f64>, E> {
    let mut x = g(start)?;
    let mut steps = 1;
    let mut prev_step: Option<f64> = None;
    let mut damped = false;
    loop {
        let gx = g(x)?;
        let r = gx - x;
        if r.abs() <= tol * (1.0 + x.abs()) {
            return Ok(Ok(ScalarSolution { value: gx, steps, damped }));
        }
        if steps >= budget || !r.is_finite() {
            return Ok(Err(r));
        }
        if let Some(p) = prev_step {
            if !damped && p * r < 0.0 && r.abs() >= p.abs() {
                damped = true;
            }
        }
        x += if damped { 0.5 * r } else { r };
        prev_step = Some(r);
        steps += 1;
    }
}

fn impulse_fixed_point(
    problem: &ImpulsiveProblem,
    i: usize,
    t: f64,
    memory_m: f64,
    start: f64,
) -> Result<ScalarSolution, SolverError> {
    let Some(g) = problem.impulses.get(i.wrapping_sub(1)) else {
        return Err(SolverError::InvalidOption(format!(
            "impulse index {i} outside 1..={}",
            problem.impulses.len()
        )));
    };
    let env = problem.env();
    let what = format!("g{i}");
    let start = if start.is_finite() { start } else { 0.0 };
    let eval = |x: f64| {
        g.eval(&env, t, x, memory_m).map_err(|source| SolverError::Eval {
            what: what.clone(),
            node: 0,
            t,
            source,
        })
    };
    scalar_fixed_point(eval, start, SCALAR_TOL, SCALAR_BUDGET)?.map_err(|last_step| SolverError::ScalarNonConvergence {
        impulse: i,
        t,
        budget: SCALAR_BUDGET,
        last_step,
    })
}

/// Solves the implicit impulse equation x = gᵢ(t, x, M) for 1-based i.
pub fn impulse_pointwise_solve(
    problem: &ImpulsiveProblem,
    i: usize,
    t: f64,
    memory_m: f64,
) -> Result<f64, SolverError> {
    impulse_fixed_point(problem, i, t, memory_m, 0.0).map(|s| s.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::psi::{FractionalOrder, PsiFunction};

    fn problem(alpha: f64, beta: f64, t_end: f64, partition: Vec<(f64, f64)>, x0: f64, f: &str, g: &[&str]) -> ImpulsiveProblem {
        ImpulsiveProblem::new(
            FractionalOrder::new(alpha, beta).unwrap(),
            PsiFunction::Identity,
            t_end,
            partition,
            x0,
            Expr::parse(f).unwrap(),
            Expr::parse("0").unwrap(),
            Expr::parse("abs(x)/(15+t)").unwrap(),
            g.iter().map(|s| Expr::parse(s).unwrap()).collect(),
        )
        .unwrap()
    }

    fn ones(p: &ImpulsiveProblem, mesh: Arc<Mesh>) -> GridFunction {
        let n = mesh.len();
        let g = p.order.gamma();
        GridFunction::new(mesh, p.psi, g, true, vec![1.0; n]).unwrap()
    }

    #[test]
    fn zero_forcing_and_datum_give_zero() {
        let p = problem(0.5, 0.0, 1.0, vec![], 0.0, "0", &[]);
        let mesh = p.mesh(8, 2.0).unwrap();
        let out = omega_apply(&p, &ones(&p, mesh)).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_datum_with_gamma_one_is_constant() {
        let p = problem(0.7, 1.0, 1.0, vec![], 1.0, "0", &[]);
        let mesh = p.mesh(8, 1.0).unwrap();
        let out = omega_apply(&p, &ones(&p, mesh)).unwrap();
        assert!(out.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn linear_forcing_integrates_exactly() {
        let p = problem(1.0, 0.0, 1.0, vec![], 1.0, "x", &[]);
        let mesh = p.mesh(10, 1.5).unwrap();
        let out = omega_apply(&p, &ones(&p, mesh.clone())).unwrap();
        for (k, &t) in mesh.nodes().iter().enumerate() {
            assert!((out.values()[k] - (1.0 + t)).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_problem_converges_in_one_iteration() {
        let p = problem(0.5, 0.0, 1.0, vec![], 0.0, "0", &[]);
        let mesh = p.mesh(8, 2.0).unwrap();
        let opts = SolveOptions { tol: 1e-10, ..Default::default() };
        let r = picard_solve(&p, mesh, &opts).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert!(r.y0.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exponential_growth() {
        let p = problem(1.0, 0.0, 1.0, vec![], 1.0, "x", &[]);
        let mesh = p.mesh(64, 1.0).unwrap();
        let r = picard_solve(&p, mesh.clone(), &SolveOptions { tol: 1e-13, ..Default::default() }).unwrap();
        assert!(r.converged);
        for (k, &t) in mesh.nodes().iter().enumerate() {
            assert!((r.y0.values()[k] - t.exp()).abs() < 1e-3, "t = {t}");
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let p = problem(0.5, 0.0, 2.0, vec![(1.0, 2.0)], 1.0, "1/(5+t)*abs(x)", &["x/6"]);
        let mesh = p.mesh(8, 2.0).unwrap();
        let opts = SolveOptions { tol: 1e-14, max_iter: 1, ..Default::default() };
        let r = picard_solve(&p, mesh, &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.diff_history.len(), 1);
    }

    #[test]
    fn invalid_options() {
        let p = problem(0.5, 0.0, 1.0, vec![], 0.0, "0", &[]);
        let mesh = p.mesh(4, 2.0).unwrap();
        let bad_tol = SolveOptions { tol: 0.0, ..Default::default() };
        assert!(picard_solve(&p, mesh.clone(), &bad_tol).is_err());
        let bad_iter = SolveOptions { max_iter: 0, ..Default::default() };
        assert!(picard_solve(&p, mesh, &bad_iter).is_err());
    }

    #[test]
    fn evaluation_errors_carry_location() {
        let p = problem(1.0, 0.0, 1.0, vec![], 1.0, "1/(t-0.5)", &[]);
        let mesh = p.mesh(4, 1.0).unwrap();
        match omega_apply(&p, &ones(&p, mesh)) {
            Err(SolverError::Eval { what, node, t, .. }) => {
                assert_eq!(what, "f");
                assert_eq!(node, 2);
                assert_eq!(t, 0.5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scalar_constant_in_one_step() {
        let s = scalar_fixed_point(|_| Ok::<_, ()>(3.25), 0.0, 1e-15, 100).unwrap().unwrap();
        assert_eq!((s.value, s.steps), (3.25, 1));
    }

    #[test]
    fn scalar_half_plus_one() {
        let s = scalar_fixed_point(|x| Ok::<_, ()>(x / 2.0 + 1.0), 0.0, 1e-15, 200).unwrap().unwrap();
        assert!((s.value - 2.0).abs() < 1e-14);
        assert!(!s.damped);
    }

    #[test]
    fn scalar_oscillation_switches_to_damping() {
        // Plain iteration on x = 2 − x cycles between 0 and 2 forever.
        let s = scalar_fixed_point(|x| Ok::<_, ()>(2.0 - x), 0.0, 1e-15, 100).unwrap().unwrap();
        assert!(s.damped);
        assert!((s.value - 1.0).abs() < 1e-14);
        let e = scalar_fixed_point(|x| Ok::<_, ()>(x + 1.0), 0.0, 1e-15, 20).unwrap();
        assert!(e.is_err());
    }

    fn bisect(h: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if h(a) * h(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn example_impulse_fixed_points() {
        let s = crate::problem::builtin_scenario("example-rl").unwrap();
        let p = &s.problem;
        let v0 = impulse_pointwise_solve(p, 1, 1.5, 0.0).unwrap();
        assert_eq!(v0, 0.0);
        let v1 = impulse_pointwise_solve(p, 1, 1.5, 1.0).unwrap();
        let oracle = bisect(|x| x - (x.abs() + 1.0) / (6.5 * (1.0 + x.abs())), 0.0, 1.0);
        assert!((v1 - oracle).abs() < 1e-14);
        assert!((v1 - 2.0 / 13.0).abs() < 1e-14);
        assert!(impulse_pointwise_solve(p, 2, 1.5, 0.0).is_err());
    }

    #[test]
    fn distance_axioms() {
        let p = problem(0.5, 0.0, 1.0, vec![], 0.0, "0", &[]);
        let mesh = p.mesh(6, 2.0).unwrap();
        let n = mesh.len();
        let a = GridFunction::new(mesh.clone(), p.psi, 0.5, true, (0..n).map(|k| (k as f64).sin()).collect()).unwrap();
        let b = GridFunction::new(mesh.clone(), p.psi, 0.5, true, (0..n).map(|k| (k as f64 * 0.3).cos()).collect()).unwrap();
        assert_eq!(weighted_sup_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(weighted_sup_distance(&a, &b).unwrap(), weighted_sup_distance(&b, &a).unwrap());
        let one = GridFunction::raw(mesh.clone(), vec![1.0; n]).unwrap();
        let zero = GridFunction::raw(mesh, vec![0.0; n]).unwrap();
        assert_eq!(weighted_sup_distance(&one, &zero).unwrap(), 1.0);
        let other = p.mesh(5, 2.0).unwrap();
        let c = GridFunction::raw(other.clone(), vec![0.0; other.len()]).unwrap();
        assert!(matches!(weighted_sup_distance(&one, &c), Err(SolverError::MeshMismatch)));
    }

    #[test]
    fn impulse_and_continuation_pieces() {
        // x0 = 1, f = 0: head is 1, impulse g = 0.5 (constant), continuation
        // g(s1, x(s1), .) = 0.5 plus nothing.
        let p = problem(1.0, 0.0, 3.0, vec![(1.0, 2.0)], 1.0, "0", &["0.5"]);
        let mesh = p.mesh(4, 1.0).unwrap();
        let r = picard_solve(&p, mesh.clone(), &SolveOptions::default()).unwrap();
        assert!(r.converged);
        let (ti, si) = mesh.impulse_nodes(1);
        assert_eq!(r.y0.values()[ti], 1.0);
        assert_eq!(r.y0.right_limits()[ti], Some(0.5));
        for k in ti + 1..mesh.len() {
            assert_eq!(r.y0.values()[k], 0.5);
        }
        assert_eq!(r.y0.right_limits()[si], Some(0.5));
    }

    #[test]
    fn continuation_integrates_from_impulse_end() {
        // f = 1 and α = 1: on (s1, T], x(t) = g + (t − s1).
        let p = problem(1.0, 0.0, 3.0, vec![(1.0, 2.0)], 0.0, "1", &["0.25"]);
        let mesh = p.mesh(4, 2.0).unwrap();
        let r = picard_solve(&p, mesh.clone(), &SolveOptions::default()).unwrap();
        for (k, &t) in mesh.nodes().iter().enumerate() {
            if let IntervalTag::Continuation(_) = mesh.tags()[k] {
                assert!((r.y0.values()[k] - (0.25 + t - 2.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn anchors_agree_when_alpha_is_one() {
        let base = problem(1.0, 0.0, 3.0, vec![(1.0, 2.0)], 1.0, "abs(x)/(5+t)", &["(abs(x)+w)/(6*(1+abs(x)))"]);
        let mut other = base.clone();
        other.memory_anchor = MemoryAnchor::ImpulseEnd;
        let mesh = base.mesh(8, 1.0).unwrap();
        let a = picard_solve(&base, mesh.clone(), &SolveOptions::default()).unwrap();
        let b = picard_solve(&other, mesh, &SolveOptions::default()).unwrap();
        assert!(weighted_sup_distance(&a.y0, &b.y0).unwrap() < 1e-12);
    }

    #[test]
    fn anchors_differ_when_alpha_below_one() {
        let base = problem(0.5, 1.0, 3.0, vec![(1.0, 2.0)], 1.0, "abs(x)/(5+t)", &["(abs(x)+w)/(6*(1+abs(x)))"]);
        let mut other = base.clone();
        other.memory_anchor = MemoryAnchor::ImpulseEnd;
        let mesh = base.mesh(8, 1.0).unwrap();
        let a = picard_solve(&base, mesh.clone(), &SolveOptions::default()).unwrap();
        let b = picard_solve(&other, mesh, &SolveOptions::default()).unwrap();
        assert!(weighted_sup_distance(&a.y0, &b.y0).unwrap() > 1e-6);
    }

    #[test]
    fn implicit_and_explicit_impulse_share_the_fixed_point() {
        let s = crate::problem::builtin_scenario("example-integer").unwrap();
        let mesh = s.problem.mesh(16, 2.0).unwrap();
        let a = picard_solve(&s.problem, mesh.clone(), &SolveOptions { tol: 1e-13, ..Default::default() }).unwrap();
        let b = picard_solve(
            &s.problem,
            mesh,
            &SolveOptions { tol: 1e-13, implicit_impulse: true, ..Default::default() },
        )
        .unwrap();
        assert!(weighted_sup_distance(&a.y0, &b.y0).unwrap() < 1e-11);
        assert!(b.iterations <= a.iterations);
    }

    #[test]
    fn solve_is_deterministic() {
        let s = crate::problem::builtin_scenario("example-rl").unwrap();
        let mesh = s.problem.mesh(16, 2.0).unwrap();
        let a = picard_solve(&s.problem, mesh.clone(), &SolveOptions::default()).unwrap();
        let b = picard_solve(&s.problem, mesh, &SolveOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
