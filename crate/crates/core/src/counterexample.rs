//! Unbounded radial solution with bounded weight for `f(t) = e^{t^α}`,
//! `α ∈ (1, N/(N−1))`.
//!
//! With `l = log(1/r)`, `φ_β(t) = t + β t^γ − δ log t`, `u_β = φ_β(l)^{1/α}`
//! and `β = β(ρ)` chosen so that `u_β(ρ) = β/α`, the function
//! `w = N^{1/α}(u_β − β/α)` vanishes on `|x| = ρ`, blows up at the origin and
//! solves `−Δ_N w = a e^{w^α}` with `a = −e^{−w^α} Δ_N w` bounded.
//!
//! Every quantity is evaluated as a function of `l`, so radii far below the
//! double-precision range stay accessible. The flux
//! `F(l) = r^{N−1}|w'|^{N−1} = (dw/dl)^{N−1}` satisfies `dF/dl = −(−Δ_N w)·r^N`.

use serde::{Deserialize, Serialize};

use crate::geometry::unit_sphere_area;
use crate::quadrature::integrate_with_breaks;
use crate::{LabError, Result};

const MAX_SHRINKS: u32 = 6;
/// Upper limit of `log l` for tails integrated to infinity.
const LOG_L_FAR: f64 = 700.0;
const QUAD_REL: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleInstance {
    #[serde(rename = "N")]
    pub n: u32,
    pub alpha: f64,
    pub rho: f64,
    pub beta_rho: f64,
    pub delta: f64,
    pub gamma: f64,
    /// `lim_{r→0} a(r) = N^{(N−1)/α}(N−1)(α−1)/α^N`.
    pub a_limit: f64,
    pub rho_shrink_count: u32,
}

/// `l(r) = log(1/r)`.
pub fn l_of(r: f64) -> f64 {
    -r.ln()
}

fn delta_of(n: u32, alpha: f64) -> f64 {
    let nf = n as f64;
    ((alpha - 1.0) * nf + 1.0) / (alpha * nf)
}

fn check_alpha(n: u32, alpha: f64) -> Result<()> {
    if n < 2 {
        return Err(LabError::ParameterDomain(format!("dimension must be >= 2, got {n}")));
    }
    let upper = n as f64 / (n - 1) as f64;
    if !(alpha > 1.0 && alpha < upper) {
        return Err(LabError::ParameterDomain(format!("alpha must lie in (1, {upper}), got {alpha}")));
    }
    Ok(())
}

fn phi(beta: f64, gamma: f64, delta: f64, t: f64) -> f64 {
    t + beta * t.powf(gamma) - delta * t.ln()
}

/// Root `β` of `g(β) = φ_β(l(ρ))^{1/α} − β/α`.
pub fn beta_of_rho(n: u32, alpha: f64, rho: f64) -> Result<f64> {
    check_alpha(n, alpha)?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(LabError::RhoTooLarge(format!("rho must lie in (0, 1), got {rho}")));
    }
    let delta = delta_of(n, alpha);
    let gamma = (alpha - 1.0) / alpha;
    let t = l_of(rho);
    let g = |b: f64| phi(b, gamma, delta, t).powf(1.0 / alpha) - b / alpha;
    let mut lo = 0.0;
    if !(g(lo) > 0.0) {
        return Err(LabError::RhoTooLarge(format!("g(0) = {} is not positive at rho = {rho}", g(lo))));
    }
    let mut hi = 4.0 * alpha * t.powf(1.0 / alpha);
    let mut grown = 0;
    while g(hi) >= 0.0 {
        hi *= 2.0;
        grown += 1;
        if grown > 60 || !hi.is_finite() {
            return Err(LabError::RhoTooLarge(format!("no sign change of g for rho = {rho}")));
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    let resid = g(root);
    if resid.abs() > 1e-12 {
        return Err(LabError::Tolerance {
            what: "beta(rho) bisection".into(),
            estimate: resid,
        });
    }
    Ok(root)
}

/// Radial test function for the entropy identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Zero,
    /// `c·exp(−1/(1−(r/s)²))` on `r < s`.
    Bump { amplitude: f64, support: f64 },
}

impl TestFunction {
    /// `(φ, dφ/dl)` at `l`.
    fn eval_l(&self, l: f64) -> (f64, f64) {
        match *self {
            TestFunction::Zero => (0.0, 0.0),
            TestFunction::Bump { amplitude, support } => {
                let x = (-l - support.ln()).exp(); // r/s
                if x >= 1.0 {
                    return (0.0, 0.0);
                }
                let d = 1.0 - x * x;
                let v = amplitude * (-1.0 / d).exp();
                // dφ/dl = −r dφ/dr = v·2x²/d².
                (v, v * 2.0 * x * x / (d * d))
            }
        }
    }

    fn max_value(&self) -> f64 {
        match *self {
            TestFunction::Zero => 0.0,
            TestFunction::Bump { amplitude, .. } => amplitude.abs() * (-1.0f64).exp(),
        }
    }
}

/// Both sides of the truncated identity and their relative gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// One sampled radius of the instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub r: f64,
    pub u_beta: f64,
    pub w: f64,
    pub a: f64,
    pub neg_delta_n_u: f64,
    pub w_alpha_residual: f64,
}

impl CounterexampleInstance {
    /// Builds the instance at `rho`, shrinking it by factors of 10 (at most
    /// six times) until `−Δ_N u_β > 0` on the sampling grid.
    pub fn new(n: u32, alpha: f64, rho: f64) -> Result<Self> {
        check_alpha(n, alpha)?;
        let mut rho = rho;
        for shrink in 0..=MAX_SHRINKS {
            let beta = beta_of_rho(n, alpha, rho)?;
            let nf = n as f64;
            let inst = CounterexampleInstance {
                n,
                alpha,
                rho,
                beta_rho: beta,
                delta: delta_of(n, alpha),
                gamma: (alpha - 1.0) / alpha,
                a_limit: nf.powf((nf - 1.0) / alpha) * (nf - 1.0) * (alpha - 1.0) / alpha.powf(nf),
                rho_shrink_count: shrink,
            };
            if inst.regime_holds() {
                return Ok(inst);
            }
            rho /= 10.0;
        }
        Err(LabError::RhoTooLarge(format!(
            "-Delta_N u stays non-positive after {MAX_SHRINKS} shrinks (last rho = {})",
            rho * 10.0
        )))
    }

    /// `ρ·10^{−j/8}` for `j = 0..=96`.
    pub fn regime_grid(&self) -> Vec<f64> {
        (0..=96).map(|j| self.rho * 10f64.powf(-(j as f64) / 8.0)).collect()
    }

    fn regime_holds(&self) -> bool {
        self.regime_grid().iter().all(|&r| {
            let l = l_of(r);
            let (p, dp, _) = self.phi_l(l);
            p > 0.0 && dp > 0.0 && self.log_neg_laplacian_u_scaled(l).is_ok()
        })
    }

    /// `(φ, φ', φ'')` at `t`.
    pub fn phi_l(&self, t: f64) -> (f64, f64, f64) {
        let (b, g, d) = (self.beta_rho, self.gamma, self.delta);
        let p = phi(b, g, d, t);
        let dp = 1.0 + b * g * t.powf(g - 1.0) - d / t;
        let ddp = b * g * (g - 1.0) * t.powf(g - 2.0) + d / (t * t);
        (p, dp, ddp)
    }

    fn check_r(&self, r: f64) -> Result<()> {
        if !(r > 0.0 && r <= self.rho) {
            return Err(LabError::Argument(format!("r = {r} outside (0, {}]", self.rho)));
        }
        Ok(())
    }

    /// `u_β` at `l`.
    pub fn u_l(&self, l: f64) -> f64 {
        self.phi_l(l).0.powf(1.0 / self.alpha)
    }

    /// `w` at `l`.
    pub fn w_l(&self, l: f64) -> f64 {
        let nf = self.n as f64;
        nf.powf(1.0 / self.alpha) * (self.u_l(l) - self.beta_rho / self.alpha)
    }

    /// `dw/dl = −r·dw/dr`.
    pub fn dw_dl(&self, l: f64) -> f64 {
        let nf = self.n as f64;
        let (p, dp, _) = self.phi_l(l);
        nf.powf(1.0 / self.alpha) / self.alpha * p.powf(1.0 / self.alpha - 1.0) * dp
    }

    /// `w(r)`; `+∞` at the origin.
    pub fn w_eval(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Ok(f64::INFINITY);
        }
        self.check_r(r)?;
        Ok(self.w_l(l_of(r)))
    }

    /// `log((−Δ_N u_β)·r^N)` at `l`:
    /// `(N−1)/α^{N−1}·φ^{(1/α−1)(N−1)} φ'^{N−2} [(1−1/α)φ'²/φ − φ'']`.
    pub fn log_neg_laplacian_u_scaled(&self, l: f64) -> Result<f64> {
        let nf = self.n as f64;
        let k = nf - 1.0;
        let a = self.alpha;
        let (p, dp, ddp) = self.phi_l(l);
        let bracket = (1.0 - 1.0 / a) * dp * dp / p - ddp;
        if !(bracket > 0.0 && dp > 0.0 && p > 0.0) {
            return Err(LabError::Regime(format!(
                "-Delta_N u is not positive at l = {l} (rho = {} too large)",
                self.rho
            )));
        }
        Ok(k.ln() - k * a.ln() + (1.0 / a - 1.0) * k * p.ln() + (nf - 2.0) * dp.ln() + bracket.ln())
    }

    /// `(−Δ_N w)·r^N = N^{(N−1)/α}(−Δ_N u_β)·r^N`, the source density in `l`.
    fn source_l(&self, l: f64) -> Result<f64> {
        let nf = self.n as f64;
        Ok(((nf - 1.0) / self.alpha * nf.ln() + self.log_neg_laplacian_u_scaled(l)?).exp())
    }

    /// `log a` at `l`.
    pub fn log_a_l(&self, l: f64) -> Result<f64> {
        let nf = self.n as f64;
        let w = self.w_l(l);
        Ok((nf - 1.0) / self.alpha * nf.ln() + self.log_neg_laplacian_u_scaled(l)? + nf * l - w.powf(self.alpha))
    }

    /// `a(r) = −e^{−w^α} Δ_N w`.
    pub fn a_eval(&self, r: f64) -> Result<f64> {
        self.check_r(r)?;
        Ok(self.log_a_l(l_of(r))?.exp())
    }

    /// `−Δ_N u_β(r)`.
    pub fn neg_laplacian_u(&self, r: f64) -> Result<f64> {
        self.check_r(r)?;
        let l = l_of(r);
        Ok((self.log_neg_laplacian_u_scaled(l)? + self.n as f64 * l).exp())
    }

    /// `w^α − (N l − Nδ log l)`.
    pub fn w_alpha_residual(&self, r: f64) -> Result<f64> {
        self.check_r(r)?;
        let l = l_of(r);
        let nf = self.n as f64;
        Ok(self.w_l(l).powf(self.alpha) - (nf * l - nf * self.delta * l.ln()))
    }

    /// Relative gap `(N^{(N−1)/α}(−Δ_N u) − a e^{w^α}) / N^{(N−1)/α}(−Δ_N u)`.
    pub fn pde_residual(&self, r: f64) -> Result<f64> {
        self.check_r(r)?;
        let l = l_of(r);
        let nf = self.n as f64;
        let log_lhs = (nf - 1.0) / self.alpha * nf.ln() + self.log_neg_laplacian_u_scaled(l)? + nf * l;
        let log_rhs = self.log_a_l(l)? + self.w_l(l).powf(self.alpha);
        Ok(-(log_rhs - log_lhs).exp_m1())
    }

    /// `β(ρ)/l(ρ)^{1/α}`.
    pub fn beta_ratio(&self) -> f64 {
        self.beta_rho / l_of(self.rho).powf(1.0 / self.alpha)
    }

    pub fn sample(&self, r: f64) -> Result<Sample> {
        self.check_r(r)?;
        Ok(Sample {
            r,
            u_beta: self.u_l(l_of(r)),
            w: self.w_eval(r)?,
            a: self.a_eval(r)?,
            neg_delta_n_u: self.neg_laplacian_u(r)?,
            w_alpha_residual: self.w_alpha_residual(r)?,
        })
    }

    /// CSV on the radii `ρ·10^{−j/4}`, `j = 1..=48`.
    pub fn to_csv(&self) -> Result<String> {
        let mut s = String::from("r,u_beta,w,a,neg_DeltaN_u,w_alpha_residual\n");
        for j in 1..=48 {
            let r = self.rho * 10f64.powf(-(j as f64) / 4.0);
            let x = self.sample(r)?;
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                x.r, x.u_beta, x.w, x.a, x.neg_delta_n_u, x.w_alpha_residual
            ));
        }
        Ok(s)
    }

    /// `l` where `w = level`, by bisection (`w` increases with `l`).
    pub fn l_at_level(&self, level: f64) -> Result<f64> {
        let l0 = l_of(self.rho);
        if level <= 0.0 {
            return Ok(l0);
        }
        let mut hi = l0 + 1.0;
        while self.w_l(hi) < level {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(LabError::Argument(format!("level {level} not reached")));
            }
        }
        let mut lo = l0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.w_l(mid) < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Radius `r_k` with `w(r_k) = k`.
    pub fn r_at_level(&self, k: f64) -> Result<f64> {
        Ok((-self.l_at_level(k)?).exp())
    }

    /// `E(k) = Nω_N ∫_{r_k}^ρ |w'|^N r^{N−1} dr = Nω_N ∫ (dw/dl)^N dl`.
    pub fn truncation_energy(&self, k: f64) -> Result<f64> {
        self.truncation_energy_with(k, QUAD_REL, 1)
    }

    /// [`truncation_energy`](Self::truncation_energy) at a given relative
    /// tolerance with the range split into `panels` equal starting panels.
    pub fn truncation_energy_with(&self, k: f64, rel_tol: f64, panels: usize) -> Result<f64> {
        if !(k >= 0.0) {
            return Err(LabError::Argument(format!("truncation level must be nonnegative, got {k}")));
        }
        if k == 0.0 {
            return Ok(0.0);
        }
        let (a, b) = (l_of(self.rho), self.l_at_level(k)?);
        let breaks: Vec<f64> = (0..=panels.max(1))
            .map(|i| a + (b - a) * i as f64 / panels.max(1) as f64)
            .collect();
        let nf = self.n as f64;
        let q = integrate_with_breaks(|l: f64| self.dw_dl(l).powf(nf), &breaks, 0.0, rel_tol)?;
        Ok(unit_sphere_area(self.n) * q.value)
    }

    /// Both sides of
    /// `∫_{|w−φ|<k} |∇w|^{N−2}∇w·∇(w−φ) = ∫ a e^{w^α} T_k(w−φ)` over `B_ρ`.
    pub fn entropy_identity_check(&self, phi: &TestFunction, k: f64) -> Result<EntropyCheck> {
        if !(k > 0.0) {
            return Err(LabError::Argument(format!("truncation level must be positive, got {k}")));
        }
        if let TestFunction::Bump { support, .. } = phi {
            if !(*support > 0.0 && *support < self.rho) {
                return Err(LabError::Argument(format!(
                    "bump support {support} must lie in (0, {})",
                    self.rho
                )));
            }
        }
        let nf = self.n as f64;
        let l0 = l_of(self.rho);
        // Beyond l_far, w − φ > k everywhere.
        let l_far = self.l_at_level(k + phi.max_value())? * 1.01 + 1.0;
        let h = |l: f64| self.w_l(l) - phi.eval_l(l).0;

        let mut breaks = vec![l0, l_far];
        if let TestFunction::Bump { support, .. } = phi {
            breaks.push(l_of(*support));
        }
        let samples = 4000;
        let mut prev = (l0, h(l0));
        for i in 1..=samples {
            let l = l0 + (l_far - l0) * i as f64 / samples as f64;
            let cur = (l, h(l));
            for level in [k, -k] {
                if (prev.1 - level) * (cur.1 - level) < 0.0 {
                    breaks.push(bisect(&h, prev.0, cur.0, level));
                }
            }
            prev = cur;
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        let area = unit_sphere_area(self.n);
        let lhs_density = |l: f64| {
            let hv = h(l);
            if hv.abs() >= k {
                return 0.0;
            }
            let wl = self.dw_dl(l);
            wl.abs().powf(nf - 2.0) * wl * (wl - phi.eval_l(l).1)
        };
        let rhs_density = |l: f64| {
            let t = h(l).clamp(-k, k);
            self.source_l(l).map(|s| s * t).unwrap_or(f64::NAN)
        };
        let lhs = integrate_with_breaks(lhs_density, &breaks, 0.0, QUAD_REL)?.value;
        let near = integrate_with_breaks(rhs_density, &breaks, 0.0, QUAD_REL)?.value;
        // Tail where T_k(w − φ) = k, in s = log l.
        let tail = integrate_with_breaks(
            |s: f64| {
                let l = s.exp();
                self.source_l(l).map(|v| v * l).unwrap_or(f64::NAN)
            },
            &[l_far.ln(), l_far.ln().max(1.0) * 4.0, LOG_L_FAR],
            0.0,
            QUAD_REL,
        )?
        .value;
        let lhs = area * lhs;
        let rhs = area * (near + k * tail);
        Ok(EntropyCheck {
            lhs,
            rhs,
            residual: (lhs - rhs).abs() / (1.0 + rhs.abs()),
        })
    }
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, level: f64) -> f64 {
    let below = f(lo) < level;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) < level) == below {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst() -> CounterexampleInstance {
        CounterexampleInstance::new(2, 1.2, 0.5).unwrap()
    }

    #[test]
    fn parameters() {
        let c = inst();
        assert!((c.delta - 7.0 / 12.0).abs() < 1e-15);
        assert!((c.gamma - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(c.rho_shrink_count, 0);
        assert!(c.w_eval(c.rho).unwrap().abs() < 1e-10);
        assert!(c.w_eval(2.0 * c.rho).is_err());
        assert_eq!(c.w_eval(0.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn alpha_guard() {
        for a in [1.0, 2.0, 0.5, 2.5] {
            assert!(matches!(CounterexampleInstance::new(2, a, 0.1), Err(LabError::ParameterDomain(_))));
        }
        assert!(CounterexampleInstance::new(3, 1.4, 0.1).is_ok());
        assert!(CounterexampleInstance::new(3, 1.5, 0.1).is_err());
    }

    #[test]
    fn beta_monotone_in_rho() {
        let b3 = beta_of_rho(2, 1.2, 1e-3).unwrap();
        let b4 = beta_of_rho(2, 1.2, 1e-4).unwrap();
        assert!(b4 > b3);
    }

    #[test]
    fn shrinks_large_rho() {
        let c = CounterexampleInstance::new(2, 1.2, 0.9).unwrap();
        assert!(c.rho_shrink_count >= 1);
        assert!(c.rho < 0.9);
    }

    #[test]
    fn laplacian_matches_finite_differences() {
        let c = inst();
        for r in [0.3, 0.01, 1e-4] {
            // N = 2: flux = r·u' = −du/dl, then one central difference in r.
            let flux = |r: f64| {
                let (p, dp, _) = c.phi_l(l_of(r));
                -p.powf(1.0 / c.alpha - 1.0) * dp / c.alpha
            };
            let h = 1e-4 * r;
            let lap = -(flux(r + h) - flux(r - h)) / (2.0 * h) / r;
            let exact = c.neg_laplacian_u(r).unwrap();
            assert!((lap - exact).abs() < 1e-7 * exact.abs(), "{r}: {lap} vs {exact}");
        }
    }

    #[test]
    fn pointwise_identity_and_positivity() {
        let c = inst();
        for r in c.regime_grid() {
            assert!(c.pde_residual(r).unwrap().abs() < 1e-12);
            assert!(c.a_eval(r).unwrap() > 0.0);
        }
    }

    #[test]
    fn truncation_energy_basic() {
        let c = inst();
        assert_eq!(c.truncation_energy(0.0).unwrap(), 0.0);
        let mut prev = 0.0;
        for k in [1.0, 5.0, 10.0, 20.0] {
            let e = c.truncation_energy(k).unwrap();
            assert!(e.is_finite() && e > prev);
            prev = e;
        }
    }

    #[test]
    fn truncation_energy_self_consistent_at_small_rho() {
        let c = CounterexampleInstance::new(2, 1.2, 1e-3).unwrap();
        for k in [1.0, 5.0, 10.0, 20.0] {
            let e = c.truncation_energy(k).unwrap();
            let fine = c.truncation_energy_with(k, 1e-13, 2).unwrap();
            assert!(e.is_finite() && (e - fine).abs() <= 1e-4 * fine, "{k}: {e} vs {fine}");
        }
    }

    #[test]
    fn entropy_identity_zero_test_function() {
        let c = inst();
        let chk = c.entropy_identity_check(&TestFunction::Zero, 5.0).unwrap();
        assert!(chk.residual < 1e-6, "{chk:?}");
        let e = c.truncation_energy(5.0).unwrap();
        assert!((chk.lhs - e).abs() < 1e-8 * e);
    }

    #[test]
    fn csv_header() {
        let csv = inst().to_csv().unwrap();
        assert!(csv.starts_with("r,u_beta,w,a,neg_DeltaN_u,w_alpha_residual\n"));
        assert_eq!(csv.lines().count(), 49);
    }
}
