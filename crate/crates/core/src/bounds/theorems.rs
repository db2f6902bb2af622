use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::constants::ConstantsReport;
use crate::error::{Error, Result};

pub const DEFAULT_DELTA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    RademacherF,
    Thm1Mse,
    Thm2Hinge,
    Thm3Logistic,
    ThmMultilayer,
    Thm4Multivariate,
    Thm5Crossentropy,
}

impl Theorem {
    pub const ALL: [Theorem; 7] = [
        Theorem::RademacherF,
        Theorem::Thm1Mse,
        Theorem::Thm2Hinge,
        Theorem::Thm3Logistic,
        Theorem::ThmMultilayer,
        Theorem::Thm4Multivariate,
        Theorem::Thm5Crossentropy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Theorem::RademacherF => "rademacher_f",
            Theorem::Thm1Mse => "thm1_mse",
            Theorem::Thm2Hinge => "thm2_hinge",
            Theorem::Thm3Logistic => "thm3_logistic",
            Theorem::ThmMultilayer => "thm_multilayer",
            Theorem::Thm4Multivariate => "thm4_multivariate",
            Theorem::Thm5Crossentropy => "thm5_crossentropy",
        }
    }

    fn describe(self) -> &'static str {
        match self {
            Theorem::RademacherF => "Rademacher complexity of the hypothesis class",
            Theorem::Thm1Mse => "squared loss, one hidden layer",
            Theorem::Thm2Hinge => "hinge loss, binary classification",
            Theorem::Thm3Logistic => "logistic loss, binary classification",
            Theorem::ThmMultilayer => "squared loss, P hidden layers",
            Theorem::Thm4Multivariate => "squared loss, D-dimensional regression",
            Theorem::Thm5Crossentropy => "cross-entropy, D-class classification",
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        let alias = match norm.as_str() {
            "thm1" => "thm1_mse",
            "thm2" => "thm2_hinge",
            "thm3" => "thm3_logistic",
            "thm4" => "thm4_multivariate",
            "thm5" => "thm5_crossentropy",
            "multilayer" => "thm_multilayer",
            "rademacher" => "rademacher_f",
            other => other,
        };
        Theorem::ALL
            .into_iter()
            .find(|t| t.as_str() == alias)
            .ok_or_else(|| Error::invalid(format!("unknown theorem `{s}`")))
    }
}

/// How the layer recursion feeds the previous layer's bound forward.
///
/// `AsStated` plugs `J^(p-1)` in directly, starting from `J^0 = C3^0 C1`.
/// `NormConsistent` plugs in `sqrt(J^(p-1))`, starting from
/// `J^0 = (C3^0 C1)^2`, so that every `J^(p)` bounds a squared norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MultilayerVariant {
    AsStated,
    #[default]
    NormConsistent,
}

impl fmt::Display for MultilayerVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MultilayerVariant::AsStated => "as_stated",
            MultilayerVariant::NormConsistent => "norm_consistent",
        })
    }
}

impl FromStr for MultilayerVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "as_stated" => Ok(MultilayerVariant::AsStated),
            "norm_consistent" => Ok(MultilayerVariant::NormConsistent),
            _ => Err(Error::invalid(format!(
                "unknown multilayer variant `{s}` (expected as_stated or norm_consistent)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub theorem: Theorem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<MultilayerVariant>,
    pub j: f64,
    pub a: f64,
    pub term_complexity: f64,
    pub term_confidence: f64,
    pub total: f64,
    pub delta: f64,
    pub d_min_sq_used: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub d_min_sq_per_layer: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub j_per_layer: Vec<f64>,
    pub n_used: usize,
    pub d_out: usize,
}

impl BoundReport {
    pub const CSV_HEADER: &'static str =
        "theorem,variant,j,a,term_complexity,term_confidence,total,delta,d_min_sq_used,n_used,d_out";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.theorem,
            self.variant.map(|v| v.to_string()).unwrap_or_default(),
            self.j,
            self.a,
            self.term_complexity,
            self.term_confidence,
            self.total,
            self.delta,
            self.d_min_sq_used,
            self.n_used,
            self.d_out
        )
    }

    /// Human-readable breakdown of the constants and both terms.
    pub fn explain(&self, consts: &ConstantsReport) -> String {
        let mut out = String::new();
        let mut line = |s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        line(format!("bound      {} ({})", self.theorem, self.theorem.describe()));
        if let Some(v) = self.variant {
            line(format!("variant    {v}"));
        }
        line(format!("C1         {:.6e}  max ||x||_2", consts.c1));
        line(format!("C2         {:.6e}  max ||y||_2", consts.c2));
        line(format!("C3         {:.6e}  max ||w_m||_2", consts.c3));
        line(format!("C4         {:.6e}  max |v|", consts.c4));
        line(format!("L_rho      {}", consts.l_rho));
        line(format!("phi(0)     {}", consts.phi0));
        line(format!("C5         {:.6e}  L_rho*C1*C3 + phi(0)", consts.c5));
        line(format!("C134       {:.6e}  C1*C3*C4", consts.c134));
        line(format!("M          {}", consts.m));
        if self.theorem == Theorem::ThmMultilayer {
            line(format!("C3 layers  {:?}  (max abs row sums)", consts.c3_layers));
            line(format!("M layers   {:?}", consts.m_layers));
            line(format!("d_min^2    {:?}", self.d_min_sq_per_layer));
            line(format!("J layers   {:?}", self.j_per_layer));
        } else {
            line(format!("d_min^2    {:.6e}", self.d_min_sq_used));
        }
        line(format!("N          {}", self.n_used));
        if matches!(self.theorem, Theorem::Thm4Multivariate | Theorem::Thm5Crossentropy) {
            line(format!("D          {}", self.d_out));
        }
        line(format!("delta      {}", self.delta));
        line(format!("J          {:.6e}", self.j));
        line(format!("A          {:.6e}", self.a));
        line(format!("complexity {:.6e}", self.term_complexity));
        line(format!("confidence {:.6e}", self.term_confidence));
        line(format!("total      {:.6e}", self.total));
        out
    }
}

fn check_n(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("sample count N must be at least 1"));
    }
    Ok(n as f64)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

fn check_d(d_min_sq: f64) -> Result<()> {
    if !(d_min_sq.is_finite() && d_min_sq >= 0.0) {
        return Err(Error::invalid(format!("d_min^2 must be finite and >= 0, got {d_min_sq}")));
    }
    Ok(())
}

fn check_d_out(d_out: usize) -> Result<f64> {
    if d_out == 0 {
        return Err(Error::invalid("output dimension D must be at least 1"));
    }
    Ok(d_out as f64)
}

/// `sqrt(2 ln(2/delta) / N)`.
fn confidence_rate(delta: f64, n: f64) -> f64 {
    (2.0 * (2.0 / delta).ln() / n).sqrt()
}

/// `2 L_rho C134 + C4 |phi(0)|`, the per-unit factor shared by every `A`.
fn unit_factor(c: &ConstantsReport) -> f64 {
    2.0 * c.l_rho * c.c134 + c.c4 * c.phi0.abs()
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `J = C4^2 (M C5^2 + M(M-1)(C5^2 - d_min^2))`.
pub fn compute_j(consts: &ConstantsReport, d_min_sq: f64) -> Result<f64> {
    consts.check()?;
    check_d(d_min_sq)?;
    let m = consts.m as f64;
    let c5_sq = consts.c5_sq();
    let j = consts.c4 * consts.c4 * (m * c5_sq + m * (m - 1.0) * (c5_sq - d_min_sq));
    if j < 0.0 {
        return Err(Error::AssumptionViolated { j, c5_sq, d_min_sq });
    }
    Ok(j)
}

/// `2 L_rho C134 M / sqrt(N) + C4 |phi(0)| M / sqrt(N)`.
pub fn rademacher_bound_f(consts: &ConstantsReport, n: usize) -> Result<f64> {
    consts.check()?;
    let sn = check_n(n)?.sqrt();
    let m = consts.m as f64;
    Ok(2.0 * consts.l_rho * consts.c134 * m / sn + consts.c4 * consts.phi0.abs() * m / sn)
}

struct Terms {
    j: f64,
    a: f64,
    complexity: f64,
    confidence: f64,
}

fn report(theorem: Theorem, t: Terms, delta: f64, d: f64, n: usize, d_out: usize) -> BoundReport {
    BoundReport {
        theorem,
        variant: None,
        j: t.j,
        a: t.a,
        term_complexity: t.complexity,
        term_confidence: t.confidence,
        total: t.complexity + t.confidence,
        delta,
        d_min_sq_used: d,
        d_min_sq_per_layer: Vec::new(),
        j_per_layer: Vec::new(),
        n_used: n,
        d_out,
    }
}

fn squared_loss_terms(c: &ConstantsReport, j: f64, a: f64, d_out: f64, n: f64, delta: f64) -> Terms {
    let k = j.sqrt() + c.c2;
    Terms {
        j,
        a,
        complexity: k * a / n.sqrt(),
        confidence: (d_out / 2.0) * k * k * confidence_rate(delta, n),
    }
}

pub fn bound_thm1(consts: &ConstantsReport, d_min_sq: f64, n: usize, delta: f64) -> Result<BoundReport> {
    let nf = check_n(n)?;
    check_delta(delta)?;
    let j = compute_j(consts, d_min_sq)?;
    let a = 4.0 * unit_factor(consts) * consts.m as f64;
    let t = squared_loss_terms(consts, j, a, 1.0, nf, delta);
    Ok(report(Theorem::Thm1Mse, t, delta, d_min_sq, n, 1))
}

pub fn bound_thm2_hinge(consts: &ConstantsReport, d_min_sq: f64, n: usize, delta: f64) -> Result<BoundReport> {
    let nf = check_n(n)?;
    check_delta(delta)?;
    let j = compute_j(consts, d_min_sq)?;
    let a = 4.0 * unit_factor(consts) * consts.m as f64;
    let t = Terms {
        j,
        a,
        complexity: a / nf.sqrt(),
        confidence: (1.0 + j.sqrt()) * confidence_rate(delta, nf),
    };
    Ok(report(Theorem::Thm2Hinge, t, delta, d_min_sq, n, 1))
}

/// The exponent in the complexity factor is `e^{-sqrt(J)}`.
pub fn bound_thm3_logistic(consts: &ConstantsReport, d_min_sq: f64, n: usize, delta: f64) -> Result<BoundReport> {
    let nf = check_n(n)?;
    check_delta(delta)?;
    let j = compute_j(consts, d_min_sq)?;
    let a = 4.0 * unit_factor(consts) * consts.m as f64;
    let sj = j.sqrt();
    let t = Terms {
        j,
        a,
        complexity: a / ((1.0 + (-sj).exp()) * nf.sqrt()),
        confidence: softplus(sj) * confidence_rate(delta, nf),
    };
    Ok(report(Theorem::Thm3Logistic, t, delta, d_min_sq, n, 1))
}

pub fn bound_thm4_multivariate(
    consts: &ConstantsReport,
    d_min_sq: f64,
    n: usize,
    delta: f64,
    d_out: usize,
) -> Result<BoundReport> {
    let nf = check_n(n)?;
    let d = check_d_out(d_out)?;
    check_delta(delta)?;
    let j = compute_j(consts, d_min_sq)?;
    let a = 4.0 * d * unit_factor(consts) * consts.m as f64;
    let t = squared_loss_terms(consts, j, a, d, nf, delta);
    Ok(report(Theorem::Thm4Multivariate, t, delta, d_min_sq, n, d_out))
}

/// Needs `D >= 2`. The confidence factor `ln(1 + (D-1) e^{2 sqrt(J)})` is
/// evaluated as a softplus to stay finite for large `J`.
pub fn bound_thm5_crossentropy(
    consts: &ConstantsReport,
    d_min_sq: f64,
    n: usize,
    delta: f64,
    d_out: usize,
) -> Result<BoundReport> {
    let nf = check_n(n)?;
    let d = check_d_out(d_out)?;
    if d_out < 2 {
        return Err(Error::invalid("cross-entropy bound needs at least 2 classes"));
    }
    check_delta(delta)?;
    let j = compute_j(consts, d_min_sq)?;
    let a = 4.0 * d * (d - 1.0) * unit_factor(consts) * consts.m as f64;
    let sj = j.sqrt();
    let t = Terms {
        j,
        a,
        complexity: a / ((d - 1.0 + (-2.0 * sj).exp()) * nf.sqrt()),
        confidence: softplus(2.0 * sj + (d - 1.0).ln()) * confidence_rate(delta, nf),
    };
    Ok(report(Theorem::Thm5Crossentropy, t, delta, d_min_sq, n, d_out))
}

/// Squared-loss bound for `P` hidden layers.
///
/// Uses `consts.c3_layers` (hidden layers, then the output layer),
/// `consts.m_layers` and one `d_min^2` per hidden layer. Step `p` bounds the
/// pre-activations of weight matrix `p`, whose input is hidden layer `p - 1`
/// with width `m_layers[p - 1]` and diversity `d_min_sq_per_layer[p - 1]`.
pub fn bound_multilayer(
    consts: &ConstantsReport,
    d_min_sq_per_layer: &[f64],
    n: usize,
    delta: f64,
    variant: MultilayerVariant,
) -> Result<BoundReport> {
    consts.check()?;
    let nf = check_n(n)?;
    check_delta(delta)?;
    let p_count = consts.depth();
    if p_count == 0 || consts.m_layers.len() != p_count + 1 {
        return Err(Error::invalid(format!(
            "layer constants are inconsistent: {} norms, {} widths",
            consts.c3_layers.len(),
            consts.m_layers.len()
        )));
    }
    if d_min_sq_per_layer.len() != p_count {
        return Err(Error::invalid(format!(
            "expected {p_count} per-layer d_min^2 values, got {}",
            d_min_sq_per_layer.len()
        )));
    }
    for &d in d_min_sq_per_layer {
        check_d(d)?;
    }
    let (l, phi0, c1) = (consts.l_rho, consts.phi0, consts.c1);
    let c3 = &consts.c3_layers;
    let widths: Vec<f64> = consts.m_layers.iter().map(|&m| m as f64).collect();

    let first = c3[0] * c1;
    let mut j_prev = match variant {
        MultilayerVariant::AsStated => first,
        MultilayerVariant::NormConsistent => first * first,
    };
    let mut j_layers = vec![j_prev];
    for p in 1..=p_count {
        let inner = widths[p - 1];
        let d = d_min_sq_per_layer[p - 1];
        let prev = match variant {
            MultilayerVariant::AsStated => j_prev,
            MultilayerVariant::NormConsistent => j_prev.sqrt(),
        };
        let unit = l * prev + phi0;
        let j = widths[p] * c3[p] * c3[p] * (inner * inner * unit * unit - inner * (inner - 1.0) * d);
        if j < 0.0 || !j.is_finite() {
            return Err(Error::AssumptionViolated { j, c5_sq: unit * unit, d_min_sq: d });
        }
        j_layers.push(j);
        j_prev = j;
    }

    let lead = (2.0 * l).powi(p_count as i32)
        * c1
        * c3[0]
        * (0..p_count).map(|p| widths[p].sqrt() * c3[p]).product::<f64>();
    let tail: f64 = (0..p_count)
        .map(|p| {
            (2.0 * l).powi((p_count - 1 - p) as i32)
                * (p..p_count).map(|j| widths[j].sqrt() * c3[j]).product::<f64>()
        })
        .sum();
    let a = 4.0 * (lead + phi0.abs() * tail);

    let t = squared_loss_terms(consts, j_prev, a, 1.0, nf, delta);
    let d_used = d_min_sq_per_layer.iter().copied().fold(f64::INFINITY, f64::min);
    let mut r = report(Theorem::ThmMultilayer, t, delta, d_used, n, consts.d_out);
    r.variant = Some(variant);
    r.d_min_sq_per_layer = d_min_sq_per_layer.to_vec();
    r.j_per_layer = j_layers;
    Ok(r)
}

/// `(C5^2 - d_min^2) / sqrt(N)`.
pub fn scaling_proxy(consts: &ConstantsReport, d_min_sq: f64, n: usize) -> f64 {
    (consts.c5_sq() - d_min_sq) / (n as f64).sqrt()
}

/// Dispatches to the single-layer theorems by identifier.
///
/// `d_out` is used by the multivariate and cross-entropy bounds only. The
/// multi-layer bound needs per-layer inputs and goes through
/// [`bound_multilayer`] instead.
pub fn evaluate_theorem(
    theorem: Theorem,
    consts: &ConstantsReport,
    d_min_sq: f64,
    n: usize,
    delta: f64,
    d_out: usize,
) -> Result<BoundReport> {
    match theorem {
        Theorem::RademacherF => {
            let r = rademacher_bound_f(consts, n)?;
            check_d(d_min_sq)?;
            let a = r * (n as f64).sqrt();
            let t = Terms { j: 0.0, a, complexity: r, confidence: 0.0 };
            Ok(report(Theorem::RademacherF, t, delta, d_min_sq, n, d_out))
        }
        Theorem::Thm1Mse => bound_thm1(consts, d_min_sq, n, delta),
        Theorem::Thm2Hinge => bound_thm2_hinge(consts, d_min_sq, n, delta),
        Theorem::Thm3Logistic => bound_thm3_logistic(consts, d_min_sq, n, delta),
        Theorem::Thm4Multivariate => bound_thm4_multivariate(consts, d_min_sq, n, delta, d_out),
        Theorem::Thm5Crossentropy => bound_thm5_crossentropy(consts, d_min_sq, n, delta, d_out),
        Theorem::ThmMultilayer => Err(Error::invalid(
            "the multi-layer bound takes one d_min^2 per layer; use bound_multilayer",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::ActivationSpec;

    fn fixture() -> ConstantsReport {
        // c5 = 1 * 2 * 1 + 0 = 2, c4 = 1, M = 3
        ConstantsReport::single_layer(2.0, 0.5, 1.0, 1.0, ActivationSpec::relu(), 3, 100, 1)
    }

    fn rel(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1e-300)
    }

    #[test]
    fn j_hand_values() {
        let c = fixture();
        assert_eq!(compute_j(&c, 1.0).unwrap(), 30.0);
        assert_eq!(compute_j(&c, 4.0).unwrap(), 12.0);
        assert_eq!(compute_j(&c, 0.0).unwrap(), 36.0);
    }

    #[test]
    fn negative_j_is_an_error() {
        let c = fixture();
        // 3*4 + 6*(4 - d) < 0 once d > 6
        match compute_j(&c, 7.0) {
            Err(Error::AssumptionViolated { j, c5_sq, d_min_sq }) => {
                assert_eq!((j, c5_sq, d_min_sq), (-6.0, 4.0, 7.0));
            }
            other => panic!("{other:?}"),
        }
        assert!(compute_j(&c, -1.0).is_err());
    }

    #[test]
    fn rademacher_scaling() {
        let c = fixture();
        let r1 = rademacher_bound_f(&c, 100).unwrap();
        assert!(rel(r1, 2.0 * 2.0 * 3.0 / 10.0));
        assert!(rel(rademacher_bound_f(&c, 400).unwrap(), r1 / 2.0));
        assert!(rademacher_bound_f(&c, 0).is_err());
    }

    #[test]
    fn thm1_hand_value() {
        // J = 30, A = 4 * (2 * 2) * 3 = 48, K = sqrt(30) + 0.5
        let r = bound_thm1(&fixture(), 1.0, 100, 0.05).unwrap();
        let k = 30f64.sqrt() + 0.5;
        assert_eq!(r.a, 48.0);
        assert!(rel(r.term_complexity, k * 48.0 / 10.0));
        assert!(rel(r.term_confidence, 0.5 * k * k * (2.0 * 40f64.ln() / 100.0).sqrt()));
        assert_eq!(r.total, r.term_complexity + r.term_confidence);
    }

    #[test]
    fn thm4_with_one_output_is_thm1() {
        let c = ConstantsReport::single_layer(3.1, 1.7, 0.9, 0.4, ActivationSpec::sigmoid(), 17, 1234, 1);
        for d in [0.0, 0.1, 0.5] {
            let a = bound_thm1(&c, d, 1234, 0.01).unwrap();
            let b = bound_thm4_multivariate(&c, d, 1234, 0.01, 1).unwrap();
            assert_eq!(a.total.to_bits(), b.total.to_bits());
            assert_eq!(a.term_complexity.to_bits(), b.term_complexity.to_bits());
        }
    }

    #[test]
    fn thm5_softplus_matches_direct_log() {
        let c = fixture();
        let r = bound_thm5_crossentropy(&c, 1.0, 100, 0.05, 10).unwrap();
        let direct = (1.0 + 9.0 * (2.0 * 30f64.sqrt()).exp()).ln() * (2.0 * 40f64.ln() / 100.0).sqrt();
        assert!(rel(r.term_confidence, direct));
        assert!(bound_thm5_crossentropy(&c, 1.0, 100, 0.05, 1).is_err());
    }

    #[test]
    fn multilayer_single_step_matches_j() {
        let c = fixture();
        for variant in [MultilayerVariant::AsStated, MultilayerVariant::NormConsistent] {
            let r = bound_multilayer(&c, &[1.0], 100, 0.05, variant).unwrap();
            assert!(rel(r.j, 30.0), "{variant}: {}", r.j);
        }
    }

    #[test]
    fn rejects_bad_delta_and_layers() {
        let c = fixture();
        assert!(bound_thm1(&c, 0.0, 10, 0.0).is_err());
        assert!(bound_thm1(&c, 0.0, 10, 1.0).is_err());
        assert!(bound_multilayer(&c, &[0.0, 0.0], 10, 0.05, MultilayerVariant::AsStated).is_err());
    }

    #[test]
    fn theorem_names_round_trip() {
        for t in Theorem::ALL {
            assert_eq!(t.as_str().parse::<Theorem>().unwrap(), t);
        }
        assert_eq!("thm2".parse::<Theorem>().unwrap(), Theorem::Thm2Hinge);
        assert!("thm9".parse::<Theorem>().is_err());
    }

    #[test]
    fn scaling_proxy_hand() {
        assert!(rel(scaling_proxy(&fixture(), 1.0, 100), 0.3));
    }
}
