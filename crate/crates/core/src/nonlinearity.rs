//! Registry of nonlinearities `f`, their exact derivatives, asymptotic slope
//! `β = lim f'(t)/f(t)` and the exponential growth envelope it implies.
//!
//! All large-argument arithmetic goes through `log f`, which every family
//! provides in closed form; `f` itself overflows long before the blow-up
//! heights used elsewhere in the crate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{LabError, Result};

/// `ln(f64::MAX)`; above this `f` is reported as overflowed.
pub const LOG_F64_MAX: f64 = 709.782_712_893_384;

/// Parametric growth laws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    /// `log^τ(1+t) · t^p · e^{t^α}`; `α = 0` drops the exponential factor.
    PowerLog { tau: f64, p: f64, alpha: f64 },
    /// `e^{γt} / (1+t)^q`.
    ExpCritical { gamma: f64, q: f64 },
    /// `e^{t^α}`.
    PureExpPower { alpha: f64 },
    /// `a + b·t`; covers constant forcing.
    Affine { a: f64, b: f64 },
    /// `c · f_inner(t)`.
    Scaled { c: f64, inner: Box<Family> },
}

fn domain(msg: impl Into<String>) -> LabError {
    LabError::ParameterDomain(msg.into())
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(domain(format!("{name} must be finite, got {v}")))
            }
        };
        match self {
            Family::PowerLog { tau, p, alpha } => {
                finite("tau", *tau)?;
                finite("p", *p)?;
                finite("alpha", *alpha)?;
                if *tau < 0.0 {
                    return Err(domain(format!("powerlog requires tau >= 0, got {tau}")));
                }
                if *p < 1.0 {
                    return Err(domain(format!("powerlog requires p >= 1, got {p}")));
                }
                if !(0.0..1.0).contains(alpha) {
                    return Err(domain(format!("powerlog requires alpha in [0,1), got {alpha}")));
                }
            }
            Family::ExpCritical { gamma, q } => {
                finite("gamma", *gamma)?;
                finite("q", *q)?;
                if *gamma <= 0.0 {
                    return Err(domain(format!("expcrit requires gamma > 0, got {gamma}")));
                }
            }
            Family::PureExpPower { alpha } => {
                finite("alpha", *alpha)?;
                if *alpha <= 0.0 {
                    return Err(domain(format!("exppow requires alpha > 0, got {alpha}")));
                }
            }
            Family::Affine { a, b } => {
                finite("a", *a)?;
                finite("b", *b)?;
                if *a <= 0.0 || *b < 0.0 {
                    return Err(domain(format!("affine requires a > 0 and b >= 0, got a={a}, b={b}")));
                }
            }
            Family::Scaled { c, inner } => {
                finite("c", *c)?;
                if *c <= 0.0 {
                    return Err(domain(format!("scaled requires c > 0, got {c}")));
                }
                inner.validate()?;
            }
        }
        Ok(())
    }

    /// `log f(t)` for `t ≥ 0`; `-∞` where `f` vanishes.
    pub fn log_f(&self, t: f64) -> f64 {
        match self {
            Family::PowerLog { tau, p, alpha } => {
                if t == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let mut v = p * t.ln();
                if *tau != 0.0 {
                    v += tau * t.ln_1p().ln();
                }
                if *alpha > 0.0 {
                    v += t.powf(*alpha);
                }
                v
            }
            Family::ExpCritical { gamma, q } => gamma * t - q * t.ln_1p(),
            Family::PureExpPower { alpha } => t.powf(*alpha),
            Family::Affine { a, b } => (a + b * t).ln(),
            Family::Scaled { c, inner } => c.ln() + inner.log_f(t),
        }
    }

    /// `f'(t)/f(t)` for `t > 0`.
    pub fn log_derivative(&self, t: f64) -> f64 {
        match self {
            Family::PowerLog { tau, p, alpha } => {
                let mut s = p / t;
                if *tau != 0.0 {
                    s += tau / ((1.0 + t) * t.ln_1p());
                }
                if *alpha > 0.0 {
                    s += alpha * t.powf(alpha - 1.0);
                }
                s
            }
            Family::ExpCritical { gamma, q } => gamma - q / (1.0 + t),
            Family::PureExpPower { alpha } => alpha * t.powf(alpha - 1.0),
            Family::Affine { a, b } => b / (a + b * t),
            Family::Scaled { inner, .. } => inner.log_derivative(t),
        }
    }

    fn derivative_at_zero(&self) -> f64 {
        match self {
            Family::PowerLog { tau, p, .. } => {
                if *tau == 0.0 && *p == 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Family::ExpCritical { gamma, q } => gamma - q,
            Family::PureExpPower { alpha } => {
                if *alpha < 1.0 {
                    f64::INFINITY
                } else if *alpha == 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Affine { b, .. } => *b,
            Family::Scaled { c, inner } => c * inner.derivative_at_zero(),
        }
    }

    /// Exact asymptotic slope; `+∞` when (A3) fails.
    pub fn exact_beta(&self) -> f64 {
        match self {
            Family::PowerLog { .. } | Family::Affine { .. } => 0.0,
            Family::ExpCritical { gamma, .. } => *gamma,
            Family::PureExpPower { alpha } => {
                if *alpha > 1.0 {
                    f64::INFINITY
                } else if *alpha == 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Scaled { inner, .. } => inner.exact_beta(),
        }
    }

    fn monotone_from(&self) -> f64 {
        match self {
            Family::ExpCritical { gamma, q } => (q / gamma - 1.0).max(0.0),
            Family::Scaled { inner, .. } => inner.monotone_from(),
            _ => 0.0,
        }
    }

    // The (A2) margin `d` for the plane: f(t)/t^{1+d} → ∞.
    fn superlinearity_exponent(&self) -> Option<f64> {
        match self {
            Family::PowerLog { p, alpha, .. } => {
                if *alpha > 0.0 {
                    Some(1.0)
                } else if *p > 1.0 {
                    Some(p - 1.0)
                } else {
                    None
                }
            }
            Family::ExpCritical { .. } | Family::PureExpPower { .. } => Some(1.0),
            Family::Affine { .. } => None,
            Family::Scaled { inner, .. } => inner.superlinearity_exponent(),
        }
    }

    fn is_superlinear(&self, n: u32) -> bool {
        match self {
            Family::PowerLog { tau, p, alpha } => {
                let order = (n - 1) as f64;
                *alpha > 0.0 || *p > order || (*p == order && *tau > 0.0)
            }
            Family::ExpCritical { .. } | Family::PureExpPower { .. } => true,
            Family::Affine { .. } => false,
            Family::Scaled { inner, .. } => inner.is_superlinear(n),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::PowerLog { tau, p, alpha } => write!(f, "powerlog:tau={tau},p={p},alpha={alpha}"),
            Family::ExpCritical { gamma, q } => write!(f, "expcrit:gamma={gamma},q={q}"),
            Family::PureExpPower { alpha } => write!(f, "exppow:alpha={alpha}"),
            Family::Affine { a, b } => write!(f, "affine:a={a},b={b}"),
            Family::Scaled { c, inner } => write!(f, "scaled:c={c},inner={inner}"),
        }
    }
}

impl FromStr for Family {
    type Err = LabError;

    /// Grammar: `powerlog:tau=<r>,p=<r>,alpha=<r>` | `expcrit:gamma=<r>,q=<r>` |
    /// `exppow:alpha=<r>` | `affine:a=<r>,b=<r>` | `scaled:c=<r>,inner=<spec>`.
    fn from_str(s: &str) -> Result<Self> {
        let parse_err = |reason: String| LabError::Parse {
            input: s.to_string(),
            reason,
        };
        let (kind, rest) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| parse_err("expected `<family>:<key>=<value>,...`".into()))?;

        let (params, inner) = if kind == "scaled" {
            let idx = rest
                .find("inner=")
                .ok_or_else(|| parse_err("scaled requires inner=<spec>".into()))?;
            let head = rest[..idx].trim_end_matches(',');
            (head, Some(&rest[idx + "inner=".len()..]))
        } else {
            (rest, None)
        };

        let mut pairs = Vec::new();
        for item in params.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| parse_err(format!("malformed parameter `{item}`")))?;
            let value: f64 = v
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("`{v}` is not a number")))?;
            if pairs.iter().any(|(key, _)| *key == k.trim()) {
                return Err(parse_err(format!("duplicate parameter `{k}`")));
            }
            pairs.push((k.trim(), value));
        }
        let expect = |names: &[&str]| -> Result<Vec<f64>> {
            for (k, _) in &pairs {
                if !names.contains(k) {
                    return Err(parse_err(format!("unknown parameter `{k}` for {kind}")));
                }
            }
            names
                .iter()
                .map(|n| {
                    pairs
                        .iter()
                        .find(|(k, _)| k == n)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| parse_err(format!("missing parameter `{n}`")))
                })
                .collect()
        };

        let family = match kind {
            "powerlog" => {
                let v = expect(&["tau", "p", "alpha"])?;
                Family::PowerLog { tau: v[0], p: v[1], alpha: v[2] }
            }
            "expcrit" => {
                let v = expect(&["gamma", "q"])?;
                Family::ExpCritical { gamma: v[0], q: v[1] }
            }
            "exppow" => {
                let v = expect(&["alpha"])?;
                Family::PureExpPower { alpha: v[0] }
            }
            "affine" => {
                let v = expect(&["a", "b"])?;
                Family::Affine { a: v[0], b: v[1] }
            }
            "scaled" => {
                let v = expect(&["c"])?;
                let inner: Family = inner.unwrap_or_default().parse()?;
                Family::Scaled { c: v[0], inner: Box::new(inner) }
            }
            other => return Err(parse_err(format!("unknown family `{other}`"))),
        };
        family.validate()?;
        Ok(family)
    }
}

/// A validated family together with its (A1)–(A3) metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    pub family: Family,
    /// Threshold above which `f' ≥ 0`.
    pub monotone_from: f64,
    /// The (A2) margin `d` for the plane, when the family is superlinear there.
    pub superlinearity_exponent: Option<f64>,
    /// Exact `lim f'/f`; `+∞` when (A3) fails.
    pub beta: f64,
}

/// `f`, `f'` and `log f` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub f: f64,
    pub fprime: f64,
    pub log_f: f64,
    /// `f` exceeds the double-precision range; only `log_f` is meaningful.
    pub overflow: bool,
}

impl Nonlinearity {
    pub fn new(family: Family) -> Result<Self> {
        family.validate()?;
        Ok(Nonlinearity {
            monotone_from: family.monotone_from(),
            superlinearity_exponent: family.superlinearity_exponent(),
            beta: family.exact_beta(),
            family,
        })
    }

    pub fn exponential() -> Self {
        Self::new(Family::ExpCritical { gamma: 1.0, q: 0.0 }).expect("valid family")
    }

    pub fn eval(&self, t: f64) -> Result<Evaluation> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(domain(format!("nonlinearity evaluated at t = {t}; t must be finite and >= 0")));
        }
        let log_f = self.family.log_f(t);
        if log_f > LOG_F64_MAX {
            return Ok(Evaluation {
                f: f64::INFINITY,
                fprime: f64::INFINITY,
                log_f,
                overflow: true,
            });
        }
        let f = log_f.exp();
        let fprime = if t == 0.0 {
            self.family.derivative_at_zero()
        } else {
            f * self.family.log_derivative(t)
        };
        Ok(Evaluation {
            f,
            fprime,
            log_f,
            overflow: false,
        })
    }

    pub fn log_f(&self, t: f64) -> f64 {
        self.family.log_f(t)
    }

    pub fn log_derivative(&self, t: f64) -> f64 {
        self.family.log_derivative(t)
    }

    /// `log f` continued to `t < 0` by its tangent line at 0 (or by the
    /// constant `log f(0)` where that slope is infinite). Used by the shooting
    /// integrator, whose stages may step slightly past the zero level.
    pub fn log_f_extended(&self, t: f64) -> f64 {
        if t >= 0.0 {
            return self.family.log_f(t);
        }
        let at_zero = self.family.log_f(0.0);
        if at_zero == f64::NEG_INFINITY {
            return at_zero;
        }
        let slope = self.family.derivative_at_zero() / at_zero.exp();
        if slope.is_finite() {
            at_zero + slope * t
        } else {
            at_zero
        }
    }

    /// Whether (A2) holds in dimension `n`.
    pub fn is_superlinear(&self, n: u32) -> bool {
        self.family.is_superlinear(n)
    }

    pub fn spec(&self) -> String {
        self.family.to_string()
    }
}

impl FromStr for Nonlinearity {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Nonlinearity::new(s.parse()?)
    }
}

/// Growth class of `f` at infinity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class")]
pub enum Criticality {
    Subcritical,
    Critical { beta: f64 },
    Supercritical,
}

impl Criticality {
    pub fn name(&self) -> &'static str {
        match self {
            Criticality::Subcritical => "Subcritical",
            Criticality::Critical { .. } => "Critical",
            Criticality::Supercritical => "Supercritical",
        }
    }
}

/// Outcome of [`classify`] with the data it was decided on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub criticality: Criticality,
    /// Extrapolated limit of `f'/f` along the grid (last sample if no
    /// extrapolation applies; `+∞` for supercritical growth).
    pub beta_estimate: f64,
    /// Relative change between the last two samples.
    pub last_relative_change: f64,
    pub t_grid: Vec<f64>,
    pub trace: Vec<f64>,
}

pub const SUBCRITICAL_THRESHOLD: f64 = 1e-3;
pub const STABILIZATION_THRESHOLD: f64 = 1e-3;
pub const DIVERGENCE_THRESHOLD: f64 = 1e3;

/// `t_k = 8·2^k` for `k = 0..=14`.
pub fn default_t_grid() -> Vec<f64> {
    (0..15).map(|k| 8.0 * 2f64.powi(k)).collect()
}

fn aitken(a: f64, b: f64, c: f64) -> Option<f64> {
    let d1 = b - a;
    let d2 = c - b;
    let denom = d2 - d1;
    if denom == 0.0 || !denom.is_finite() {
        return None;
    }
    let v = c - d2 * d2 / denom;
    v.is_finite().then_some(v)
}

/// Classifies `f` by the behaviour of `s_k = f'(t_k)/f(t_k)` along `t_grid`.
///
/// Subcritical when `s_k` falls below `10⁻³` (or its extrapolated limit
/// does, for slow algebraic decay); Critical when `s_k` stabilizes; Supercritical
/// when it exceeds `10³` or keeps growing without stabilizing.
pub fn classify(nl: &Nonlinearity, t_grid: &[f64]) -> Result<Classification> {
    if t_grid.len() < 8 {
        return Err(LabError::Argument(format!(
            "classification grid needs at least 8 points, got {}",
            t_grid.len()
        )));
    }
    if t_grid[0] <= 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::Argument("classification grid must be positive and increasing".into()));
    }
    let trace: Vec<f64> = t_grid.iter().map(|&t| nl.log_derivative(t)).collect();
    let done = |criticality: Criticality, beta_estimate: f64, rel: f64| Classification {
        criticality,
        beta_estimate,
        last_relative_change: rel,
        t_grid: t_grid.to_vec(),
        trace: trace.clone(),
    };
    if trace.iter().any(|s| !s.is_finite()) {
        return Err(LabError::InconclusiveClassification {
            reason: "non-finite f'/f sample".into(),
            trace,
        });
    }
    let n = trace.len();
    let (s1, s2, s3, s4) = (trace[n - 1], trace[n - 2], trace[n - 3], trace[n - 4]);
    let rel = if s1 == 0.0 { (s1 - s2).abs() } else { (s1 - s2).abs() / s1.abs() };
    let (d1, d2, d3) = (s1 - s2, s2 - s3, s3 - s4);
    let shrinking = d1.abs() <= d2.abs() && d2.abs() <= d3.abs();
    let non_increasing = d1 <= 0.0 && d2 <= 0.0 && d3 <= 0.0;
    let increasing = d1 > 0.0 && d2 > 0.0 && d3 > 0.0;
    let limit = aitken(s3, s2, s1);
    let limit_prev = aitken(s4, s3, s2);

    if s1 > DIVERGENCE_THRESHOLD {
        return Ok(done(Criticality::Supercritical, f64::INFINITY, rel));
    }
    if non_increasing {
        let extrapolated_small = shrinking && limit.is_some_and(|l| l.abs() < SUBCRITICAL_THRESHOLD);
        if s1 < SUBCRITICAL_THRESHOLD || extrapolated_small {
            let est = limit.unwrap_or(s1).max(0.0).min(s1);
            return Ok(done(Criticality::Subcritical, est, rel));
        }
    }
    if shrinking {
        let stable = rel < STABILIZATION_THRESHOLD
            || matches!((limit, limit_prev), (Some(a), Some(b)) if (a - b).abs() < STABILIZATION_THRESHOLD * a.abs());
        if stable {
            let beta = match limit {
                Some(l) if rel >= STABILIZATION_THRESHOLD || (l - s1).abs() < STABILIZATION_THRESHOLD * s1.abs() => l,
                _ => s1,
            };
            if beta < SUBCRITICAL_THRESHOLD {
                return Ok(done(Criticality::Subcritical, beta.max(0.0), rel));
            }
            return Ok(done(Criticality::Critical { beta }, beta, rel));
        }
    }
    if increasing && !shrinking {
        return Ok(done(Criticality::Supercritical, f64::INFINITY, rel));
    }
    Err(LabError::InconclusiveClassification {
        reason: "f'/f neither settles nor diverges on the grid".into(),
        trace,
    })
}

/// Classification on [`default_t_grid`].
pub fn classify_default(nl: &Nonlinearity) -> Result<Classification> {
    classify(nl, &default_t_grid())
}

/// Constants of the two-sided bound
/// `min{0, D e^{(β−ε)t} − C} ≤ f(t) ≤ D e^{(β+ε)t} + C` for `t ≥ t_min`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthEnvelope {
    pub epsilon: f64,
    pub beta: f64,
    pub c_eps: f64,
    pub d_eps: f64,
    pub t_min: f64,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl GrowthEnvelope {
    /// Checks both bounds at `t`, in log space.
    pub fn holds_at(&self, nl: &Nonlinearity, t: f64) -> bool {
        let log_f = nl.log_f(t);
        let log_upper = log_add_exp(self.d_eps.ln() + (self.beta + self.epsilon) * t, self.c_eps.ln());
        if log_f > log_upper + 1e-12 * log_upper.abs().max(1.0) {
            return false;
        }
        // lower = min{0, D e^{(β−ε)t} − C} never exceeds 0 ≤ f.
        let lower = (self.d_eps * ((self.beta - self.epsilon) * t).exp() - self.c_eps).min(0.0);
        lower <= log_f.exp()
    }

    /// Geometric verification grid of `points` radii on `[t_min, 100·t_min]`.
    pub fn verify(&self, nl: &Nonlinearity, points: usize) -> bool {
        let ratio = 100f64.powf(1.0 / (points.max(2) - 1) as f64);
        (0..points).all(|i| self.holds_at(nl, self.t_min * ratio.powi(i as i32)))
    }
}

/// Builds envelope constants by sampling `log f − (β±ε)t` on `[t_min, 10·t_min]`,
/// taking extremal offsets with a ×2 safety factor, and verifying the result on
/// 10³ points.
pub fn envelope(nl: &Nonlinearity, epsilon: f64, t_min: f64) -> Result<GrowthEnvelope> {
    if !(epsilon > 0.0) || !(t_min > 0.0) {
        return Err(LabError::Argument(format!(
            "envelope needs epsilon > 0 and t_min > 0, got {epsilon}, {t_min}"
        )));
    }
    let class = classify_default(nl)?;
    let beta = match class.criticality {
        Criticality::Supercritical => {
            return Err(LabError::NotApplicable(format!(
                "{} is supercritical; no exponential envelope exists",
                nl.spec()
            )))
        }
        Criticality::Subcritical => 0.0,
        Criticality::Critical { beta } => beta,
    };
    let samples = 1000;
    let ts: Vec<f64> = (0..samples)
        .map(|i| t_min * (1.0 + 9.0 * i as f64 / (samples - 1) as f64))
        .collect();
    let max_upper = ts
        .iter()
        .map(|&t| nl.log_f(t) - (beta + epsilon) * t)
        .fold(f64::NEG_INFINITY, f64::max);
    let d_eps = 2.0 * max_upper.exp().max(1.0);
    // Whatever the D-term misses of f on the sample window goes into C.
    let max_excess = ts
        .iter()
        .map(|&t| nl.log_f(t).exp() - d_eps * ((beta + epsilon) * t).exp())
        .fold(0.0f64, |acc, g| if g.is_finite() { acc.max(g) } else { acc });
    let c_eps = 2.0 * max_excess.max(1.0);
    let env = GrowthEnvelope {
        epsilon,
        beta,
        c_eps,
        d_eps,
        t_min,
    };
    if !env.verify(nl, 1000) {
        return Err(LabError::Tolerance {
            what: "growth envelope verification".into(),
            estimate: d_eps,
        });
    }
    Ok(env)
}
