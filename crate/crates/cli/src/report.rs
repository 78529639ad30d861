//! Run summaries written to `report.txt` and printed by each command.

use std::fmt::Write as _;
use std::path::PathBuf;

use uhrfrac_core::stability::ResidualEntry;
use uhrfrac_core::{EnvelopeCheck, IntervalTag, ReferenceValues, ResidualReport, SolveResult, StabilityCertificate};

/// Format used for every real in CSV output: 17 significant digits.
pub fn csv_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// `v` with 12 significant digits, positional unless very large or small.
pub fn sig12(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.11e}");
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-5..15).contains(&exp) {
        let decimals = (11 - exp) as usize;
        format!("{v:.decimals$}")
    } else {
        sci
    }
}

fn interval_name(tag: IntervalTag) -> String {
    match tag {
        IntervalTag::Head => "[0, t1]".to_string(),
        IntervalTag::Impulse(i) => format!("(t{i}, s{i}]"),
        IntervalTag::Continuation(i) => format!("(s{i}, t{}]", i + 1),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateSummary {
    pub certificate: StabilityCertificate,
    pub reference: ReferenceValues,
    pub h6_sup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveSummary {
    pub converged: bool,
    pub iterations: usize,
    pub final_diff: f64,
    pub tol: f64,
    pub nodes: usize,
    pub max_ratio_after_3: Option<f64>,
}

impl SolveSummary {
    pub fn new(r: &SolveResult, tol: f64) -> Self {
        let max_ratio_after_3 = r
            .diff_history
            .windows(2)
            .skip(3)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .reduce(f64::max);
        SolveSummary {
            converged: r.converged,
            iterations: r.iterations,
            final_diff: r.final_diff(),
            tol,
            nodes: r.y0.mesh().len(),
            max_ratio_after_3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSummary {
    pub epsilon: f64,
    pub satisfied: bool,
    pub max_violation: f64,
    pub min_margin: f64,
}

impl EnvelopeSummary {
    pub fn new(epsilon: f64, e: &EnvelopeCheck) -> Self {
        EnvelopeSummary {
            epsilon,
            satisfied: e.satisfied,
            max_violation: e.max_violation,
            min_margin: e.min_margin,
        }
    }
}

/// Everything one command run found, in a fixed field order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    pub command: String,
    pub scenario: String,
    pub certificate: Option<CertificateSummary>,
    pub solve: Option<SolveSummary>,
    pub residuals: Option<ResidualReport>,
    pub envelope: Option<EnvelopeSummary>,
    pub outputs: Vec<PathBuf>,
    pub verdict: String,
}

impl RunReport {
    pub fn new(command: &str, scenario: &str) -> Self {
        RunReport {
            command: command.to_string(),
            scenario: scenario.to_string(),
            ..Default::default()
        }
    }

    /// Ordered (key, value) pairs shared by the text and CSV forms.
    pub fn fields(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = vec![
            ("command".into(), self.command.clone()),
            ("scenario".into(), self.scenario.clone()),
        ];
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        if let Some(c) = &self.certificate {
            let cert = &c.certificate;
            push("phi_formula", csv_real(cert.phi_constant));
            if let Some(r) = &c.reference.phi {
                push("phi_reported", r.label.clone());
            }
            push("contraction_ok", cert.contraction_ok.to_string());
            push(
                "envelope_coeff",
                cert.envelope_coeff.map_or_else(|| "none".into(), csv_real),
            );
            if let Some(r) = &c.reference.envelope {
                push("envelope_reported", r.label.clone());
            }
            push("c_phi", csv_real(cert.c_phi_used));
            push("delta", csv_real(cert.delta));
            if let Some(h6) = c.h6_sup {
                push("h6_sup", csv_real(h6));
            }
        }
        if let Some(s) = &self.solve {
            push("nodes", s.nodes.to_string());
            push("tol", csv_real(s.tol));
            push("converged", s.converged.to_string());
            push("iterations", s.iterations.to_string());
            push("final_diff", csv_real(s.final_diff));
            if let Some(r) = s.max_ratio_after_3 {
                push("max_ratio_after_3", csv_real(r));
            }
        }
        if let Some(r) = &self.residuals {
            for e in &r.entries {
                let key = format!("residual {} {}", e.inequality, interval_name(e.interval));
                push(&format!("{key} max_defect"), csv_real(e.max_defect));
                push(&format!("{key} max_excess"), csv_real(e.max_excess));
                push(&format!("{key} satisfied"), e.satisfied.to_string());
            }
            push("residuals_satisfied", r.satisfied.to_string());
        }
        if let Some(e) = &self.envelope {
            push("epsilon", csv_real(e.epsilon));
            push("envelope_satisfied", e.satisfied.to_string());
            push("envelope_max_violation", csv_real(e.max_violation));
            push("envelope_min_margin", csv_real(e.min_margin));
        }
        for (i, p) in self.outputs.iter().enumerate() {
            push(&format!("output {}", i + 1), p.display().to_string());
        }
        push("verdict", self.verdict.clone());
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("key,value\n");
        for (k, v) in self.fields() {
            let _ = writeln!(s, "{},{}", csv_field(&k), csv_field(&v));
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.command, self.scenario);
        if let Some(c) = &self.certificate {
            let cert = &c.certificate;
            let _ = writeln!(s, "\ncontraction constant");
            let _ = writeln!(s, "  Phi (formula)   = {}", sig12(cert.phi_constant));
            if let Some(r) = &c.reference.phi {
                let _ = writeln!(s, "  paper: {} = {}", r.label, sig12(r.value));
                if (r.value - cert.phi_constant).abs() > 1e-12 * r.value.abs() {
                    let _ = writeln!(
                        s,
                        "  note: the reported value is not reproduced by the formula (difference {})",
                        sig12(cert.phi_constant - r.value)
                    );
                }
            }
            let _ = writeln!(
                s,
                "  contraction     : {}",
                if cert.contraction_ok { "Phi < 1, ok" } else { "Phi >= 1, FAILED" }
            );
            match cert.envelope_coeff {
                Some(e) => {
                    let _ = writeln!(s, "  envelope coeff  = (1 + C_phi)/(1 - Phi) = {}", sig12(e));
                }
                None => {
                    let _ = writeln!(s, "  envelope coeff  : unavailable");
                }
            }
            if let Some(r) = &c.reference.envelope {
                let _ = writeln!(s, "  reported envelope: {} = {}", r.label, sig12(r.value));
            }
            if let Some(n) = &c.reference.note {
                let _ = writeln!(s, "  note: {n}");
            }
            let _ = writeln!(
                s,
                "  bound           : |y - y0| <= {} * (phi(t) + {})",
                cert.envelope_coeff.map_or_else(|| "-".into(), sig12),
                sig12(cert.delta)
            );
            if let Some(h6) = c.h6_sup {
                let verdict = if h6 <= cert.c_phi_used { "ok" } else { "EXCEEDS C_phi" };
                let _ = writeln!(
                    s,
                    "  H6 sup I^a phi / phi = {} (C_phi = {}, {verdict})",
                    sig12(h6),
                    sig12(cert.c_phi_used)
                );
            }
        }
        if let Some(v) = &self.solve {
            let _ = writeln!(s, "\nPicard iteration on {} nodes", v.nodes);
            let _ = writeln!(
                s,
                "  {} after {} iterations, last difference {:e} (tol {:e})",
                if v.converged { "converged" } else { "NOT converged" },
                v.iterations,
                v.final_diff,
                v.tol
            );
            if let Some(r) = v.max_ratio_after_3 {
                let _ = writeln!(s, "  largest difference ratio from iteration 4 on: {}", sig12(r));
            }
        }
        if let Some(r) = &self.residuals {
            let _ = writeln!(s, "\nintegral inequalities");
            for e in &r.entries {
                let _ = writeln!(s, "  {}", residual_line(e));
            }
            let _ = writeln!(
                s,
                "  {}",
                if r.satisfied {
                    "all satisfied"
                } else {
                    "NOT satisfied: the stability bound does not apply to this y"
                }
            );
        }
        if let Some(e) = &self.envelope {
            let _ = writeln!(s, "\nenvelope check for y = y0 + {:e} * (phi + delta)", e.epsilon);
            let _ = writeln!(
                s,
                "  {} (smallest margin {}, largest violation {})",
                if e.satisfied { "within envelope" } else { "OUTSIDE envelope" },
                sig12(e.min_margin),
                sig12(e.max_violation)
            );
        }
        if !self.outputs.is_empty() {
            let _ = writeln!(s, "\nwrote");
            for p in &self.outputs {
                let _ = writeln!(s, "  {}", p.display());
            }
        }
        let _ = writeln!(s, "\n{}", self.verdict);
        s
    }
}

fn residual_line(e: &ResidualEntry) -> String {
    format!(
        "{} on {:<10} max |lhs| = {:e}, max lhs - rhs = {:e}  {}",
        e.inequality,
        interval_name(e.interval),
        e.max_defect,
        e.max_excess,
        if e.satisfied { "ok" } else { "VIOLATED" }
    )
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(std::f64::consts::E), "2.71828182846");
        assert_eq!(sig12(1.0), "1.00000000000");
        assert_eq!(sig12(0.0), "0.00000000000");
        assert_eq!(sig12(123.456), "123.456000000");
        assert_eq!(sig12(0.001234), "0.00123400000000");
        assert_eq!(sig12(9.9999999999999), "10.0000000000");
        assert_eq!(sig12(-2.5), "-2.50000000000");
        assert_eq!(sig12(1e20), "1.00000000000e20");
    }

    #[test]
    fn csv_reals_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, -7.5e12] {
            let s = csv_real(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn report_forms_share_field_order() {
        let mut r = RunReport::new("certify", "example-integer");
        r.verdict = "ok, with \"quotes\", commas".into();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "key,value");
        assert_eq!(lines[1], "command,certify");
        assert_eq!(lines[3], "verdict,\"ok, with \"\"quotes\"\", commas\"");
        assert!(r.to_text().starts_with("certify example-integer\n"));
    }
}
