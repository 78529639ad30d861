//! Problem model, hypothesis constants, the config format, and the built-in
//! scenarios.
//!
//! The config format is TOML with five required sections and two optional
//! ones:
//!
//! ```toml
//! [order]
//! alpha = 0.5            # (0, 1]
//! beta = 0.0             # [0, 1]
//!
//! [psi]
//! kind = "identity"      # identity | power | log | exp
//! param = 2.0            # sigma for power, shift for log, rate for exp
//!
//! [partition]
//! T = 2.0
//! t = [1.0]              # impulse starts t_i
//! s = [2.0]              # impulse ends s_i
//!
//! [functions]
//! x0 = 0.0               # weighted initial datum, optional
//! f = "1/(5+psi(t))*(abs(x)+w)"
//! K = "abs(x)/(10+psi(t))"
//! ell = "abs(x)/(15+psi(t))"
//! g = ["1/((5+psi(t))*(1+abs(x)))*(abs(x)+w)"]
//!
//! [hypotheses]
//! L_f = "1/5"            # reals may be written as "p/q"
//! L_g = ["1/5"]
//! K_bar = "1/10"
//! L_ell = "1/15"
//! C_phi = 1.0
//! phi = "mitlef(0.5, t)"
//! delta = 1.0
//!
//! [solver]               # optional
//! memory_anchor = "t"    # t | s_i
//!
//! [reference]            # optional, reported values shown next to computed ones
//! phi = "3/8"
//! envelope = "54/19"
//! note = "..."
//! ```

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;
use toml::{Table, Value};

use crate::expr::{EvalEnv, Expr, ParseError, Var};
use crate::psi::{FractionalOrder, PsiError, PsiFunction};
use crate::quadrature::{build_mesh, validate_partition, Mesh, QuadratureError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("missing required keys: {}", .0.join(", "))]
    MissingKeys(Vec<String>),
    #[error("{key}: {message}")]
    InvalidValue { key: String, message: String },
    #[error("{key}: {source}")]
    Expression { key: String, source: ParseError },
    #[error(transparent)]
    Ordering(#[from] QuadratureError),
    #[error("unknown scenario '{0}' (known: example-rl, example-integer)")]
    UnknownScenario(String),
}

fn invalid(key: &str, message: impl Into<String>) -> ProblemError {
    ProblemError::InvalidValue {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Which kernel anchors the gᵢ memory term on (sᵢ, tᵢ₊₁].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MemoryAnchor {
    /// (1/Γ(α)) ∫₀^{sᵢ} N(t, s) ℓ(s, x(s)) ds, kernel at the evaluation point.
    #[default]
    Evaluation,
    /// (1/Γ(α)) ∫₀^{sᵢ} N(sᵢ, s) ℓ(s, x(s)) ds.
    ImpulseEnd,
}

impl MemoryAnchor {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "t" => Some(MemoryAnchor::Evaluation),
            "s_i" => Some(MemoryAnchor::ImpulseEnd),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MemoryAnchor::Evaluation => "t",
            MemoryAnchor::ImpulseEnd => "s_i",
        }
    }
}

/// Scalar impulsive problem on J = [0, T].
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulsiveProblem {
    pub order: FractionalOrder,
    pub psi: PsiFunction,
    pub horizon: f64,
    pub partition: Vec<(f64, f64)>,
    /// I^{1−γ,ψ} x(0).
    pub x0: f64,
    pub f: Expr,
    pub kernel: Expr,
    pub ell: Expr,
    pub impulses: Vec<Expr>,
    pub memory_anchor: MemoryAnchor,
}

impl ImpulsiveProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        order: FractionalOrder,
        psi: PsiFunction,
        horizon: f64,
        partition: Vec<(f64, f64)>,
        x0: f64,
        f: Expr,
        kernel: Expr,
        ell: Expr,
        impulses: Vec<Expr>,
    ) -> Result<Self, ProblemError> {
        let p = ImpulsiveProblem {
            order,
            psi,
            horizon,
            partition,
            x0,
            f,
            kernel,
            ell,
            impulses,
            memory_anchor: MemoryAnchor::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        validate_partition(&self.partition, self.horizon)?;
        if self.impulses.len() != self.partition.len() {
            return Err(invalid(
                "functions.g",
                format!(
                    "{} impulse functions given for {} impulse intervals",
                    self.impulses.len(),
                    self.partition.len()
                ),
            ));
        }
        if !self.x0.is_finite() {
            return Err(invalid("functions.x0", "must be finite"));
        }
        self.psi
            .offset(self.horizon)
            .map_err(|e| invalid("psi", e.to_string()))?;
        for (key, e) in [("functions.K", &self.kernel), ("functions.ell", &self.ell)] {
            if e.references(Var::W) {
                return Err(invalid(key, "may depend on t and x only"));
            }
        }
        Ok(())
    }

    pub fn impulse_count(&self) -> usize {
        self.partition.len()
    }

    pub fn env(&self) -> EvalEnv {
        EvalEnv::new(self.psi)
    }

    pub fn mesh(&self, n_per_interval: usize, grading: f64) -> Result<Arc<Mesh>, QuadratureError> {
        build_mesh(&self.partition, self.horizon, n_per_interval, grading).map(Arc::new)
    }
}

/// Lipschitz and weight data for the existence and stability hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisData {
    pub l_f: f64,
    pub l_g: Vec<f64>,
    pub k_bar: f64,
    pub l_ell: f64,
    pub c_phi: f64,
    pub phi: Expr,
    pub delta: f64,
}

/// Number of grid points used to check that φ is nondecreasing.
pub const PHI_CHECK_POINTS: usize = 200;

impl HypothesisData {
    /// Checks positivity of the constants and that φ is nonnegative and
    /// nondecreasing on a 200-point grid over [0, T].
    pub fn validate(&self, problem: &ImpulsiveProblem) -> Result<(), ProblemError> {
        let positive = [
            ("hypotheses.L_f", self.l_f),
            ("hypotheses.K_bar", self.k_bar),
            ("hypotheses.L_ell", self.l_ell),
            ("hypotheses.C_phi", self.c_phi),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(key, format!("{v} must be positive")));
            }
        }
        if self.l_g.len() != problem.impulse_count() {
            return Err(invalid(
                "hypotheses.L_g",
                format!(
                    "{} constants given for {} impulse intervals",
                    self.l_g.len(),
                    problem.impulse_count()
                ),
            ));
        }
        if let Some(v) = self.l_g.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(invalid("hypotheses.L_g", format!("{v} must be positive")));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(invalid("hypotheses.delta", "must be nonnegative"));
        }
        if self.phi.references(Var::X) || self.phi.references(Var::W) {
            return Err(invalid("hypotheses.phi", "may depend on t only"));
        }
        let env = problem.env();
        let mut prev = f64::NEG_INFINITY;
        for j in 0..PHI_CHECK_POINTS {
            let t = problem.horizon * j as f64 / (PHI_CHECK_POINTS - 1) as f64;
            let v = self
                .phi
                .eval(&env, t, 0.0, 0.0)
                .map_err(|e| invalid("hypotheses.phi", format!("at t = {t}: {e}")))?;
            if !(v >= 0.0) {
                return Err(invalid("hypotheses.phi", format!("negative at t = {t}")));
            }
            if v < prev - 1e-12 * prev.abs() {
                return Err(invalid(
                    "hypotheses.phi",
                    format!("not nondecreasing near t = {t}"),
                ));
            }
            prev = v;
        }
        Ok(())
    }

    pub fn phi_at(&self, env: &EvalEnv, t: f64) -> Result<f64, crate::expr::EvalError> {
        self.phi.eval(env, t, 0.0, 0.0)
    }
}

/// A value quoted in the literature next to which a computed one is shown.
#[derive(Debug, Clone, PartialEq)]
pub struct Reported {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferenceValues {
    pub phi: Option<Reported>,
    pub envelope: Option<Reported>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub problem: ImpulsiveProblem,
    pub hypotheses: HypothesisData,
    pub reference: ReferenceValues,
}

// ---------------------------------------------------------------------------
// Config reading

const SECTIONS: &[(&str, &[&str])] = &[
    ("order", &["alpha", "beta"]),
    ("psi", &["kind", "param"]),
    ("partition", &["T", "t", "s"]),
    ("functions", &["x0", "f", "K", "ell", "g"]),
    (
        "hypotheses",
        &["L_f", "L_g", "K_bar", "L_ell", "C_phi", "phi", "delta"],
    ),
    ("solver", &["memory_anchor"]),
    ("reference", &["phi", "envelope", "note"]),
];

const REQUIRED: &[&str] = &[
    "order.alpha",
    "order.beta",
    "psi.kind",
    "partition.T",
    "functions.f",
    "functions.K",
    "functions.ell",
    "hypotheses.L_f",
    "hypotheses.K_bar",
    "hypotheses.L_ell",
    "hypotheses.C_phi",
    "hypotheses.phi",
    "hypotheses.delta",
];

struct Doc {
    table: Table,
}

impl Doc {
    fn get(&self, dotted: &str) -> Option<&Value> {
        let (section, key) = dotted.split_once('.')?;
        self.table.get(section)?.as_table()?.get(key)
    }

    fn real(&self, key: &str) -> Result<Option<f64>, ProblemError> {
        self.get(key).map(|v| value_to_real(key, v)).transpose()
    }

    fn req_real(&self, key: &str) -> Result<f64, ProblemError> {
        self.real(key)?
            .ok_or_else(|| ProblemError::MissingKeys(vec![key.to_string()]))
    }

    fn reals(&self, key: &str) -> Result<Vec<f64>, ProblemError> {
        match self.get(key) {
            None => Ok(Vec::new()),
            Some(Value::Array(items)) => items.iter().map(|v| value_to_real(key, v)).collect(),
            Some(_) => Err(invalid(key, "expected an array of reals")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&str>, ProblemError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(invalid(key, "expected a quoted string")),
        }
    }

    fn expr(&self, key: &str) -> Result<Expr, ProblemError> {
        let src = self
            .string(key)?
            .ok_or_else(|| ProblemError::MissingKeys(vec![key.to_string()]))?;
        parse_expr(key, src)
    }

    fn exprs(&self, key: &str) -> Result<Vec<Expr>, ProblemError> {
        match self.get(key) {
            None => Ok(Vec::new()),
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, v)| match v {
                    Value::String(s) => parse_expr(&format!("{key}[{i}]"), s),
                    _ => Err(invalid(key, "expected an array of quoted expressions")),
                })
                .collect(),
            Some(_) => Err(invalid(key, "expected an array of quoted expressions")),
        }
    }
}

fn parse_expr(key: &str, src: &str) -> Result<Expr, ProblemError> {
    Expr::parse(src).map_err(|source| ProblemError::Expression {
        key: key.to_string(),
        source,
    })
}

/// Reads a real written as a TOML number or as a "p/q" / decimal string.
fn value_to_real(key: &str, v: &Value) -> Result<f64, ProblemError> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        Value::String(s) => parse_real(s).ok_or_else(|| invalid(key, format!("'{s}' is not a real"))),
        _ => Err(invalid(key, "expected a real number")),
    }
}

pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: f64 = p.trim().parse().ok()?;
        let q: f64 = q.trim().parse().ok()?;
        (q != 0.0).then_some(p / q)
    } else {
        s.parse().ok()
    }
}

fn parse_doc(text: &str) -> Result<Doc, ProblemError> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ProblemError::Syntax(e.to_string()))?;
    for (section, value) in &table {
        let allowed = SECTIONS
            .iter()
            .find(|(name, _)| name == section)
            .map(|(_, keys)| *keys)
            .ok_or_else(|| invalid(section, "unknown section"))?;
        let inner = value
            .as_table()
            .ok_or_else(|| invalid(section, "expected a [section]"))?;
        for key in inner.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(invalid(&format!("{section}.{key}"), "unknown key"));
            }
        }
    }
    let doc = Doc { table };
    let missing: Vec<String> = REQUIRED
        .iter()
        .filter(|k| doc.get(k).is_none())
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ProblemError::MissingKeys(missing));
    }
    Ok(doc)
}

fn read_psi(doc: &Doc) -> Result<PsiFunction, ProblemError> {
    let kind = doc.string("psi.kind")?.unwrap_or_default();
    let param = doc.real("psi.param")?;
    let need = |what: &str| {
        param.ok_or_else(|| invalid("psi.param", format!("{kind} needs {what}")))
    };
    let lift = |r: Result<PsiFunction, PsiError>| r.map_err(|e| invalid("psi.param", e.to_string()));
    match kind {
        "identity" => Ok(PsiFunction::Identity),
        "power" => lift(PsiFunction::power(need("sigma")?)),
        "log" => lift(PsiFunction::log(param.unwrap_or(1.0))),
        "exp" => lift(PsiFunction::exp(param.unwrap_or(1.0))),
        other => Err(invalid(
            "psi.kind",
            format!("unknown family '{other}' (identity | power | log | exp)"),
        )),
    }
}

fn read_problem(doc: &Doc) -> Result<ImpulsiveProblem, ProblemError> {
    let order = FractionalOrder::new(doc.req_real("order.alpha")?, doc.req_real("order.beta")?)
        .map_err(|e| invalid("order", e.to_string()))?;
    let psi = read_psi(doc)?;
    let horizon = doc.req_real("partition.T")?;
    let starts = doc.reals("partition.t")?;
    let ends = doc.reals("partition.s")?;
    if starts.len() != ends.len() {
        return Err(invalid(
            "partition",
            format!("{} impulse starts but {} ends", starts.len(), ends.len()),
        ));
    }
    let partition: Vec<(f64, f64)> = starts.into_iter().zip(ends).collect();
    let impulses = doc.exprs("functions.g")?;
    let mut problem = ImpulsiveProblem {
        order,
        psi,
        horizon,
        partition,
        x0: doc.real("functions.x0")?.unwrap_or(0.0),
        f: doc.expr("functions.f")?,
        kernel: doc.expr("functions.K")?,
        ell: doc.expr("functions.ell")?,
        impulses,
        memory_anchor: MemoryAnchor::default(),
    };
    if let Some(a) = doc.string("solver.memory_anchor")? {
        problem.memory_anchor = MemoryAnchor::parse(a)
            .ok_or_else(|| invalid("solver.memory_anchor", format!("'{a}' is not t or s_i")))?;
    }
    problem.validate()?;
    Ok(problem)
}

fn read_hypotheses(doc: &Doc, problem: &ImpulsiveProblem) -> Result<HypothesisData, ProblemError> {
    let h = HypothesisData {
        l_f: doc.req_real("hypotheses.L_f")?,
        l_g: doc.reals("hypotheses.L_g")?,
        k_bar: doc.req_real("hypotheses.K_bar")?,
        l_ell: doc.req_real("hypotheses.L_ell")?,
        c_phi: doc.req_real("hypotheses.C_phi")?,
        phi: doc.expr("hypotheses.phi")?,
        delta: doc.req_real("hypotheses.delta")?,
    };
    h.validate(problem)?;
    Ok(h)
}

fn read_reference(doc: &Doc) -> Result<ReferenceValues, ProblemError> {
    let reported = |key: &str| -> Result<Option<Reported>, ProblemError> {
        let Some(v) = doc.get(key) else {
            return Ok(None);
        };
        let label = match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        Ok(Some(Reported {
            value: value_to_real(key, v)?,
            label,
        }))
    };
    Ok(ReferenceValues {
        phi: reported("reference.phi")?,
        envelope: reported("reference.envelope")?,
        note: doc.string("reference.note")?.map(str::to_string),
    })
}

/// Parses and validates a problem and its hypothesis data.
pub fn load_problem(config_text: &str) -> Result<(ImpulsiveProblem, HypothesisData), ProblemError> {
    let s = load_scenario(config_text, "config")?;
    Ok((s.problem, s.hypotheses))
}

/// Like `load_problem`, keeping the optional [reference] section.
pub fn load_scenario(config_text: &str, name: &str) -> Result<Scenario, ProblemError> {
    let doc = parse_doc(config_text)?;
    let problem = read_problem(&doc)?;
    let hypotheses = read_hypotheses(&doc, &problem)?;
    let reference = read_reference(&doc)?;
    Ok(Scenario {
        name: name.to_string(),
        problem,
        hypotheses,
        reference,
    })
}

pub const SCENARIO_NAMES: [&str; 2] = ["example-rl", "example-integer"];

pub fn scenario_text(name: &str) -> Option<&'static str> {
    match name {
        "example-rl" => Some(include_str!("../scenarios/example-rl.toml")),
        "example-integer" => Some(include_str!("../scenarios/example-integer.toml")),
        _ => None,
    }
}

pub fn builtin_scenario(name: &str) -> Result<Scenario, ProblemError> {
    let text = scenario_text(name).ok_or_else(|| ProblemError::UnknownScenario(name.to_string()))?;
    load_scenario(text, name)
}

// ---------------------------------------------------------------------------
// Config writing

fn real(v: f64) -> String {
    // Debug formatting is the shortest representation that reads back to the same bits.
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'n', 'i']) {
        s
    } else {
        format!("{s}.0")
    }
}

fn reals(vs: impl IntoIterator<Item = f64>) -> String {
    let items: Vec<String> = vs.into_iter().map(real).collect();
    format!("[{}]", items.join(", "))
}

fn quoted(s: &str) -> String {
    Value::String(s.to_string()).to_string()
}

/// Serializes a problem (and optional reference block) back to config text.
pub fn to_config_text(
    problem: &ImpulsiveProblem,
    hypotheses: &HypothesisData,
    reference: Option<&ReferenceValues>,
) -> String {
    let mut out = String::new();
    let order = problem.order;
    let _ = writeln!(out, "[order]\nalpha = {}\nbeta = {}\n", real(order.alpha()), real(order.beta()));
    let _ = writeln!(out, "[psi]\nkind = {}", quoted(problem.psi.family()));
    match problem.psi {
        PsiFunction::Identity => {}
        PsiFunction::Power { sigma: p } | PsiFunction::Log { shift: p } | PsiFunction::Exp { rate: p } => {
            let _ = writeln!(out, "param = {}", real(p));
        }
    }
    let _ = writeln!(
        out,
        "\n[partition]\nT = {}\nt = {}\ns = {}\n",
        real(problem.horizon),
        reals(problem.partition.iter().map(|p| p.0)),
        reals(problem.partition.iter().map(|p| p.1)),
    );
    let g: Vec<String> = problem.impulses.iter().map(|e| quoted(&e.to_string())).collect();
    let _ = writeln!(
        out,
        "[functions]\nx0 = {}\nf = {}\nK = {}\nell = {}\ng = [{}]\n",
        real(problem.x0),
        quoted(&problem.f.to_string()),
        quoted(&problem.kernel.to_string()),
        quoted(&problem.ell.to_string()),
        g.join(", "),
    );
    let _ = writeln!(
        out,
        "[hypotheses]\nL_f = {}\nL_g = {}\nK_bar = {}\nL_ell = {}\nC_phi = {}\nphi = {}\ndelta = {}\n",
        real(hypotheses.l_f),
        reals(hypotheses.l_g.iter().copied()),
        real(hypotheses.k_bar),
        real(hypotheses.l_ell),
        real(hypotheses.c_phi),
        quoted(&hypotheses.phi.to_string()),
        real(hypotheses.delta),
    );
    let _ = writeln!(out, "[solver]\nmemory_anchor = {}", quoted(problem.memory_anchor.as_str()));
    if let Some(r) = reference {
        let mut block = String::new();
        if let Some(p) = &r.phi {
            let _ = writeln!(block, "phi = {}", quoted(&p.label));
        }
        if let Some(e) = &r.envelope {
            let _ = writeln!(block, "envelope = {}", quoted(&e.label));
        }
        if let Some(n) = &r.note {
            let _ = writeln!(block, "note = {}", quoted(n));
        }
        if !block.is_empty() {
            let _ = write!(out, "\n[reference]\n{block}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riemann_liouville_scenario_loads() {
        let s = builtin_scenario("example-rl").unwrap();
        let p = &s.problem;
        assert_eq!(p.order.alpha(), 0.5);
        assert_eq!(p.order.beta(), 0.0);
        assert_eq!(p.order.gamma(), 0.5);
        assert_eq!(p.psi, PsiFunction::Identity);
        assert_eq!(p.horizon, 2.0);
        assert_eq!(p.partition, vec![(1.0, 2.0)]);
        let h = &s.hypotheses;
        assert_eq!(
            (h.l_f, h.l_g[0], h.k_bar, h.l_ell, h.c_phi, h.delta),
            (1.0 / 5.0, 1.0 / 5.0, 1.0 / 10.0, 1.0 / 15.0, 1.0, 1.0)
        );
        assert_eq!(s.reference.phi.as_ref().unwrap().label, "3/8");
        assert_eq!(s.reference.phi.as_ref().unwrap().value, 0.375);
    }

    #[test]
    fn integer_scenario_loads() {
        let s = builtin_scenario("example-integer").unwrap();
        assert_eq!(s.problem.order.alpha(), 1.0);
        assert_eq!(s.problem.order.beta(), 0.5);
        assert_eq!(s.problem.order.gamma(), 1.0);
        let env = s.problem.env();
        for t in [0.0, 0.7, 2.0] {
            let phi = s.hypotheses.phi_at(&env, t).unwrap();
            assert!((phi - f64::exp(t)).abs() < 1e-13 * phi);
        }
        assert_eq!(s.reference.envelope.as_ref().unwrap().label, "50/11");
    }

    #[test]
    fn unknown_scenario() {
        assert!(matches!(
            builtin_scenario("example-zzz"),
            Err(ProblemError::UnknownScenario(_))
        ));
    }

    #[test]
    fn empty_config_lists_missing_keys_in_order() {
        match load_problem("") {
            Err(ProblemError::MissingKeys(keys)) => {
                assert_eq!(keys[0], "order.alpha");
                assert_eq!(keys.len(), REQUIRED.len());
            }
            other => panic!("{other:?}"),
        }
    }

    fn with_partition(t: &str, s: &str) -> String {
        scenario_text("example-integer")
            .unwrap()
            .replace("t = [1.0]", &format!("t = [{t}]"))
            .replace("s = [2.0]", &format!("s = [{s}]"))
    }

    #[test]
    fn ordering_violation() {
        let text = with_partition("1.5", "1.0");
        assert!(matches!(
            load_problem(&text),
            Err(ProblemError::Ordering(QuadratureError::Ordering(_)))
        ));
    }

    #[test]
    fn rejects_bad_configs() {
        let base = scenario_text("example-rl").unwrap();
        let cases = [
            base.replace("alpha = 0.5", "alpha = 1.5"),
            base.replace("kind = \"identity\"", "kind = \"cosh\""),
            base.replace("f = \"1/(5+psi(t))*(abs(x)+w)\"", "f = \"1/(5+\""),
            base.replace("K = \"abs(x)/(10+psi(t))\"", "K = \"w\""),
            base.replace("phi = \"mitlef(0.5, t)\"", "phi = \"1 - t\""),
            base.replace("C_phi = 1.0", "C_phi = -1.0"),
            base.replace("L_g = [\"1/5\"]", "L_g = []"),
            base.replace("[order]", "[order]\ngamma = 0.5"),
            base.replace("\ng = [", "\ng = [\"x\", "),
            format!("{base}\n[extra]\nfoo = 1\n"),
            base.replace("T = 2.0", "T = \"two\""),
            "alpha = = 1".to_string(),
        ];
        for (i, c) in cases.iter().enumerate() {
            assert!(load_problem(c).is_err(), "case {i} should fail");
        }
        let e = load_problem(&cases[2]).unwrap_err();
        match e {
            ProblemError::Expression { key, source } => {
                assert_eq!(key, "functions.f");
                assert_eq!(source.position, 5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn psi_families_from_config() {
        let base = scenario_text("example-integer").unwrap();
        let (p, _) = load_problem(&base.replace("kind = \"identity\"", "kind = \"power\"\nparam = 2")).unwrap();
        assert_eq!(p.psi, PsiFunction::Power { sigma: 2.0 });
        let (p, _) = load_problem(&base.replace("kind = \"identity\"", "kind = \"log\"")).unwrap();
        assert_eq!(p.psi, PsiFunction::Log { shift: 1.0 });
        assert!(load_problem(&base.replace("kind = \"identity\"", "kind = \"power\"")).is_err());
    }

    #[test]
    fn memory_anchor_switch() {
        let base = scenario_text("example-rl").unwrap();
        let (p, _) = load_problem(&format!("{base}\n[solver]\nmemory_anchor = \"s_i\"\n")).unwrap();
        assert_eq!(p.memory_anchor, MemoryAnchor::ImpulseEnd);
        assert!(load_problem(&format!("{base}\n[solver]\nmemory_anchor = \"u\"\n")).is_err());
    }

    #[test]
    fn rational_strings() {
        assert_eq!(parse_real("1/15"), Some(1.0 / 15.0));
        assert_eq!(parse_real(" 0.25 "), Some(0.25));
        assert_eq!(parse_real("1/0"), None);
        assert_eq!(parse_real("abc"), None);
    }

    fn assert_bit_equal(a: &ImpulsiveProblem, b: &ImpulsiveProblem, ha: &HypothesisData, hb: &HypothesisData) {
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        let bits = |v: f64| v.to_bits();
        assert_eq!(bits(a.order.alpha()), bits(b.order.alpha()));
        assert_eq!(bits(a.horizon), bits(b.horizon));
        assert_eq!(bits(a.x0), bits(b.x0));
        assert_eq!(bits(ha.l_ell), bits(hb.l_ell));
        assert_eq!(bits(ha.k_bar), bits(hb.k_bar));
        for (x, y) in a.partition.iter().zip(&b.partition) {
            assert_eq!((bits(x.0), bits(x.1)), (bits(y.0), bits(y.1)));
        }
    }

    #[test]
    fn config_round_trip() {
        for name in SCENARIO_NAMES {
            let s = builtin_scenario(name).unwrap();
            let text = to_config_text(&s.problem, &s.hypotheses, Some(&s.reference));
            let back = load_scenario(&text, name).unwrap();
            assert_bit_equal(&s.problem, &back.problem, &s.hypotheses, &back.hypotheses);
            assert_eq!(s.reference, back.reference);
        }
    }

    #[test]
    fn config_round_trip_with_awkward_reals() {
        let base = scenario_text("example-rl").unwrap();
        let text = base
            .replace("kind = \"identity\"", "kind = \"exp\"\nparam = 0.1")
            .replace("T = 2.0", "T = 2.0000000000000004")
            .replace("t = [1.0]", "t = [0.30000000000000004, 1.1]")
            .replace("s = [2.0]", "s = [0.7, 1.9]")
            .replace("\ng = [", "\ng = [\"pow(x, -1e-7)\", ")
            .replace("L_g = [\"1/5\"]", "L_g = [1e-300, \"1/3\"]")
            .replace("x0 = 1.0", "x0 = -0.1");
        let (p, h) = load_problem(&text).unwrap();
        let again = to_config_text(&p, &h, None);
        let (p2, h2) = load_problem(&again).unwrap();
        assert_bit_equal(&p, &p2, &h, &h2);
    }
}
