//! Radial N-Laplacian initial-value problem `−Δ_N u = a(r) f(u)`, `u(0) = M`,
//! integrated in flux form with state `(u, q)`, `q = r^{N−1}|u'|^{N−2}u'`.
//!
//! Two frames are supported: the physical one, and the blow-up frame
//! `v(ρ) = u(μρ) − M` with `μ = f(M)^{−1/N}`, where the source term is
//! `a(μρ)·f(M+v)/f(M) ∈ [0, 1]` and stays representable for any `M`.

use serde::{Deserialize, Serialize};

use crate::geometry::unit_sphere_area;
use crate::nonlinearity::Nonlinearity;
use crate::ode::{self, EventSpec, State, Termination};
use crate::quadrature::{gk15, integrate};
use crate::{LabError, Result};

/// `log f(M)` above which the physical frame is abandoned.
pub const PHYSICAL_LOG_F_CAP: f64 = 600.0;

/// Natural cubic spline through `(r_i, a_i)`, constant outside the knots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineTable {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl SplineTable {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n < 2 || values.len() != n {
            return Err(LabError::Argument("weight table needs at least two (r, a) pairs".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) || knots[0] < 0.0 {
            return Err(LabError::Argument("weight table radii must be nonnegative and increasing".into()));
        }
        // Tridiagonal system for the second derivatives, natural ends.
        let mut second = vec![0.0; n];
        if n > 2 {
            let mut diag = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            let mut upper = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = knots[i] - knots[i - 1];
                let h1 = knots[i + 1] - knots[i];
                let lower = h0 / 6.0;
                diag[i] = (h0 + h1) / 3.0;
                upper[i] = h1 / 6.0;
                rhs[i] = (values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0;
                if i > 1 {
                    let m = lower / diag[i - 1];
                    diag[i] -= m * upper[i - 1];
                    rhs[i] -= m * rhs[i - 1];
                }
            }
            for i in (1..n - 1).rev() {
                second[i] = (rhs[i] - upper[i] * second[i + 1]) / diag[i];
            }
        }
        Ok(SplineTable { knots, values, second })
    }

    pub fn eval(&self, r: f64) -> f64 {
        let k = &self.knots;
        let n = k.len();
        if r <= k[0] {
            return self.values[0];
        }
        if r >= k[n - 1] {
            return self.values[n - 1];
        }
        let i = k.partition_point(|&x| x <= r) - 1;
        let h = k[i + 1] - k[i];
        let a = (k[i + 1] - r) / h;
        let b = (r - k[i]) / h;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h / 6.0
    }
}

/// Radial weight `a(r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weight {
    Constant { value: f64 },
    /// `a0 + a2·r²`.
    Quadratic { a0: f64, a2: f64 },
    Table(SplineTable),
}

impl Default for Weight {
    fn default() -> Self {
        Weight::Constant { value: 1.0 }
    }
}

impl Weight {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Weight::Constant { value } => *value,
            Weight::Quadratic { a0, a2 } => a0 + a2 * r * r,
            Weight::Table(t) => t.eval(r),
        }
    }

    /// Checks `a > 0` on `[0, r_max]`.
    pub fn check_positive(&self, r_max: f64) -> Result<()> {
        let bad = |r: f64, v: f64| {
            LabError::ParameterDomain(format!("weight must be positive, a({r}) = {v}"))
        };
        match self {
            Weight::Constant { value } => {
                if !(*value > 0.0 && value.is_finite()) {
                    return Err(bad(0.0, *value));
                }
            }
            Weight::Quadratic { .. } => {
                for r in [0.0, r_max] {
                    let v = self.eval(r);
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(bad(r, v));
                    }
                }
            }
            Weight::Table(t) => {
                let hi = r_max.min(*t.knots.last().unwrap_or(&0.0));
                for i in 0..=1000 {
                    let r = hi * i as f64 / 1000.0;
                    let v = self.eval(r);
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(bad(r, v));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `−Δ_N u = a(r) f(u)` on a ball with `u(0) = M`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProblem {
    pub n: u32,
    pub nl: Nonlinearity,
    pub weight: Weight,
    pub m: f64,
}

impl RadialProblem {
    pub fn new(n: u32, nl: Nonlinearity, weight: Weight, m: f64) -> Result<Self> {
        if n < 2 {
            return Err(LabError::ParameterDomain(format!("dimension must be >= 2, got {n}")));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(LabError::ParameterDomain(format!("center height must be positive, got {m}")));
        }
        weight.check_positive(0.0)?;
        Ok(RadialProblem { n, nl, weight, m })
    }

    /// Unit weight.
    pub fn simple(n: u32, nl: Nonlinearity, m: f64) -> Result<Self> {
        Self::new(n, nl, Weight::default(), m)
    }

    pub fn log_f_m(&self) -> f64 {
        self.nl.log_f(self.m)
    }

    /// `log μ_M = −log f(M)/N`.
    pub fn log_mu(&self) -> f64 {
        -self.log_f_m() / self.n as f64
    }

    fn order(&self) -> f64 {
        (self.n - 1) as f64
    }
}

/// Leading-order series `(u(ε), q(ε))` at the origin, physical frame.
pub fn origin_expansion(p: &RadialProblem, eps: f64) -> (f64, f64) {
    series(p.n, p.m, p.weight.eval(0.0).ln() + p.log_f_m(), eps)
}

/// Same in the blow-up frame, where the source at the origin is `a(0)`.
pub fn rescaled_origin_expansion(p: &RadialProblem, eps: f64) -> (f64, f64) {
    series(p.n, 0.0, p.weight.eval(0.0).ln(), eps)
}

// u = top − (N−1)/N·(S/N)^{1/(N−1)}·ε^{N/(N−1)}, q = −S·ε^N/N, S = exp(log_source).
fn series(n: u32, top: f64, log_source: f64, eps: f64) -> (f64, f64) {
    let nf = n as f64;
    let k = nf - 1.0;
    let ln_n = nf.ln();
    let q = -(log_source + nf * eps.ln() - ln_n).exp();
    let du = (k / nf) * ((log_source - ln_n) / k + nf / k * eps.ln()).exp();
    (top - du, q)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShotStatus {
    CrossedZero,
    RadiusCapReached,
    StepFailure,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Frame {
    Physical,
    /// Radii are `ρ = r/μ`, values are `v = u − M`.
    Rescaled { log_mu: f64 },
}

/// One shooting trajectory.
#[derive(Clone, Debug)]
pub struct RadialShot {
    pub problem: RadialProblem,
    pub frame: Frame,
    pub tol: f64,
    /// Radii in the shot's frame.
    pub grid: Vec<f64>,
    /// `u` (physical) or `v` (rescaled).
    pub u: Vec<f64>,
    /// Flux; identical in both frames at corresponding points.
    pub q: Vec<f64>,
    /// Grid index of the zero crossing.
    pub zero_index: Option<usize>,
    /// Physical zero radius `R`.
    pub radius: Option<f64>,
    /// `|u'(R)|`, physical.
    pub slope_at_r: Option<f64>,
    /// `∫_{B_R} a f(u) dx = Nω_N·(−q(R))`.
    pub mass: Option<f64>,
    pub status: ShotStatus,
}

fn validate_tol(tol: f64) -> Result<()> {
    if !(1e-12..=1e-4).contains(&tol) {
        return Err(LabError::Argument(format!("tol must lie in [1e-12, 1e-4], got {tol}")));
    }
    Ok(())
}

// Start radius in the blow-up frame; scales with the zero radius for small M.
fn rescaled_start(p: &RadialProblem) -> f64 {
    let nf = p.n as f64;
    1e-6 * p.m.powf(p.order() / nf).min(1.0) / p.weight.eval(0.0).powf(1.0 / nf)
}

/// Shoots in the physical frame up to `r_cap`; defers to the blow-up frame
/// (stopping at the zero) when `log f(M)` exceeds [`PHYSICAL_LOG_F_CAP`].
pub fn shoot(p: &RadialProblem, r_cap: f64, tol: f64) -> Result<RadialShot> {
    validate_tol(tol)?;
    if !(r_cap > 0.0) {
        return Err(LabError::Argument(format!("r_cap must be positive, got {r_cap}")));
    }
    let log_f_m = p.log_f_m();
    if log_f_m > PHYSICAL_LOG_F_CAP {
        let rho_cap = (r_cap.ln() - p.log_mu()).exp();
        return rescaled_shoot_with(p, rho_cap, tol, true);
    }
    p.weight.check_positive(r_cap)?;
    let k = p.order();
    let eps = rescaled_start(p) * p.log_mu().exp();
    let (u0, q0) = origin_expansion(p, eps);
    let rhs = |r: f64, y: &State| -> State {
        let du = -(y[1].abs() / r.powf(k)).powf(1.0 / k);
        let dq = -r.powf(k) * p.weight.eval(r) * p.nl.log_f_extended(y[0]).exp();
        [du, dq]
    };
    let ev = EventSpec { component: 0, level: 0.0, stop: true };
    let tr = ode::integrate(&rhs, eps, [u0, q0], r_cap, eps, tol, Some(ev));
    Ok(assemble(p, Frame::Physical, tol, tr))
}

/// Shoots in the blow-up frame, stopping at `v = −M`.
pub fn rescaled_shoot(p: &RadialProblem, rho_cap: f64, tol: f64) -> Result<RadialShot> {
    rescaled_shoot_with(p, rho_cap, tol, true)
}

/// Blow-up frame shot; with `stop_at_zero = false` the trajectory continues
/// past `v = −M` (the zero is still recorded) up to `rho_cap`.
pub fn rescaled_shoot_with(p: &RadialProblem, rho_cap: f64, tol: f64, stop_at_zero: bool) -> Result<RadialShot> {
    validate_tol(tol)?;
    if !(rho_cap > 0.0) {
        return Err(LabError::Argument(format!("rho_cap must be positive, got {rho_cap}")));
    }
    let log_mu = p.log_mu();
    if !log_mu.is_finite() {
        return Err(LabError::ParameterDomain(format!("f(M) must be positive and finite, log f(M) = {}", p.log_f_m())));
    }
    let mu = log_mu.exp();
    p.weight.check_positive(mu * rho_cap)?;
    let k = p.order();
    let log_f_m = p.log_f_m();
    let eps = rescaled_start(p);
    let (v0, q0) = rescaled_origin_expansion(p, eps);
    let rhs = |rho: f64, y: &State| -> State {
        let dv = -(y[1].abs() / rho.powf(k)).powf(1.0 / k);
        let src = (p.nl.log_f_extended(p.m + y[0]) - log_f_m).exp();
        [dv, -rho.powf(k) * p.weight.eval(mu * rho) * src]
    };
    let ev = EventSpec { component: 0, level: -p.m, stop: stop_at_zero };
    let tr = ode::integrate(&rhs, eps, [v0, q0], rho_cap, eps, tol, Some(ev));
    Ok(assemble(p, Frame::Rescaled { log_mu }, tol, tr))
}

fn assemble(p: &RadialProblem, frame: Frame, tol: f64, tr: ode::Trajectory) -> RadialShot {
    let status = match (tr.termination, tr.event.is_some()) {
        (Termination::StepFailure, _) => ShotStatus::StepFailure,
        (_, true) => ShotStatus::CrossedZero,
        _ => ShotStatus::RadiusCapReached,
    };
    let zero_index = tr
        .event
        .and_then(|(r_ev, _)| tr.r.iter().position(|&r| r == r_ev));
    let (u, q): (Vec<f64>, Vec<f64>) = tr.y.iter().map(|y| (y[0], y[1])).unzip();
    let k = p.order();
    let (radius, slope_at_r, mass) = match tr.event {
        Some((r_ev, y)) if status == ShotStatus::CrossedZero => {
            let log_mu = match frame {
                Frame::Physical => 0.0,
                Frame::Rescaled { log_mu } => log_mu,
            };
            let radius = (r_ev.ln() + log_mu).exp();
            // |u'| = (|q|/R^{N−1})^{1/(N−1)} in physical units.
            let slope = (y[1].abs().ln() / k - radius.ln()).exp();
            let mass = unit_sphere_area(p.n) * (-y[1]);
            (Some(radius), Some(slope), Some(mass))
        }
        _ => (None, None, None),
    };
    RadialShot {
        problem: p.clone(),
        frame,
        tol,
        grid: tr.r,
        u,
        q,
        zero_index,
        radius,
        slope_at_r,
        mass,
        status,
    }
}

impl RadialShot {
    fn log_f_m(&self) -> f64 {
        match self.frame {
            Frame::Physical => 0.0,
            Frame::Rescaled { .. } => self.problem.log_f_m(),
        }
    }

    fn mu(&self) -> f64 {
        match self.frame {
            Frame::Physical => 1.0,
            Frame::Rescaled { log_mu } => log_mu.exp(),
        }
    }

    fn offset(&self) -> f64 {
        match self.frame {
            Frame::Physical => 0.0,
            Frame::Rescaled { .. } => self.problem.m,
        }
    }

    fn rhs(&self, r: f64, y: &State) -> State {
        let k = self.problem.order();
        let du = -(y[1].abs() / r.powf(k)).powf(1.0 / k);
        [du, -r.powf(k) * self.source(r, y[0])]
    }

    /// `a f(u)` at radius `r` in the shot's frame (normalized by `f(M)` when rescaled).
    fn source(&self, r: f64, u: f64) -> f64 {
        let p = &self.problem;
        p.weight.eval(self.mu() * r) * (p.nl.log_f_extended(self.offset() + u) - self.log_f_m()).exp()
    }

    /// Value at `r` by a single integrator step from the grid point below it
    /// (series below the first grid point).
    pub fn state_at(&self, r: f64) -> State {
        if r <= self.grid[0] {
            return self.series_at(r);
        }
        let i = self.grid.partition_point(|&x| x <= r) - 1;
        let i = i.min(self.grid.len() - 1);
        let y = [self.u[i], self.q[i]];
        if r == self.grid[i] {
            return y;
        }
        ode::dopri_step(&|s: f64, y: &State| self.rhs(s, y), self.grid[i], &y, r - self.grid[i]).0
    }

    fn series_at(&self, r: f64) -> State {
        let (u, q) = match self.frame {
            Frame::Physical => origin_expansion(&self.problem, r),
            Frame::Rescaled { .. } => rescaled_origin_expansion(&self.problem, r),
        };
        [u, q]
    }

    /// `∫_0^{r_i} s^{N−1} a f(u) ds` at every grid point, by GK quadrature
    /// with `u` re-evaluated at the nodes.
    pub fn cumulative_source(&self) -> Result<Vec<f64>> {
        let k = self.problem.order();
        let integrand = |s: f64| s.powf(k) * self.source(s, self.state_at(s)[0]);
        let mut out = Vec::with_capacity(self.grid.len());
        let (head, _) = gk15(&integrand, 0.0, self.grid[0]);
        let mut acc = head;
        out.push(acc);
        for w in self.grid.windows(2) {
            let part = integrate(integrand, w[0], w[1], 0.0, 1e-13)?;
            acc += part.value;
            out.push(acc);
        }
        Ok(out)
    }

    /// `|q(r_i) + ∫_0^{r_i} s^{N−1} a f(u)| / (1 + |q(r_i)|)` per grid point.
    pub fn flux_residuals(&self) -> Result<Vec<f64>> {
        let cum = self.cumulative_source()?;
        Ok(self
            .q
            .iter()
            .zip(&cum)
            .map(|(q, c)| (q + c).abs() / (1.0 + q.abs()))
            .collect())
    }

    /// Volume integral `∫_{B_R} a f(u) dx` by quadrature, independent of the flux.
    pub fn volume_mass(&self) -> Result<f64> {
        let idx = self
            .zero_index
            .ok_or_else(|| LabError::NotApplicable("shot did not cross zero".into()))?;
        let cum = self.cumulative_source()?;
        Ok(unit_sphere_area(self.problem.n) * cum[idx])
    }

    /// `Nω_N R^{N−1}|u'(R)|^{N−1}`.
    pub fn divergence_mass(&self) -> Option<f64> {
        let k = self.problem.order();
        Some(unit_sphere_area(self.problem.n) * (self.radius?.ln() * k + self.slope_at_r?.ln() * k).exp())
    }

    /// `u'` (or `v'`) at grid index `i`.
    pub fn derivative_at(&self, i: usize) -> f64 {
        let k = self.problem.order();
        -(self.q[i].abs() / self.grid[i].powf(k)).powf(1.0 / k)
    }

    pub fn to_csv(&self) -> String {
        let header = match self.frame {
            Frame::Physical => "r,u,q",
            Frame::Rescaled { .. } => "rho,v,qtilde",
        };
        let mut s = String::from(header);
        s.push('\n');
        for ((r, u), q) in self.grid.iter().zip(&self.u).zip(&self.q) {
            s.push_str(&format!("{r},{u},{q}\n"));
        }
        s
    }

    pub fn summary(&self) -> ShotSummary {
        ShotSummary {
            n: self.problem.n,
            family: self.problem.nl.spec(),
            m: self.problem.m,
            r: self.radius,
            slope_at_r: self.slope_at_r,
            mass: self.mass,
            status: self.status,
            tol: self.tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotSummary {
    #[serde(rename = "N")]
    pub n: u32,
    pub family: String,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    #[serde(rename = "slope_at_R")]
    pub slope_at_r: Option<f64>,
    pub mass: Option<f64>,
    pub status: ShotStatus,
    pub tol: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn exp_problem(m: f64) -> RadialProblem {
        RadialProblem::simple(2, Nonlinearity::exponential(), m).unwrap()
    }

    fn constant() -> Nonlinearity {
        "affine:a=1,b=0".parse().unwrap()
    }

    #[test]
    fn series_examples() {
        let mut p = exp_problem(1.0);
        p.m = 0.0;
        let (u, q) = origin_expansion(&p, 1e-3);
        assert!((q + 5e-7).abs() < 1e-20);
        assert!((u + 2.5e-7).abs() < 1e-20);

        let p3 = RadialProblem::simple(3, constant(), 2.0).unwrap();
        for r in [1e-4, 0.1, 1.0] {
            let (u, _) = origin_expansion(&p3, r);
            let exact = 2.0 - (2.0 / 3.0) * (1.0f64 / 3.0).sqrt() * r.powf(1.5);
            assert!((u - exact).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_forcing_plane() {
        let p = RadialProblem::simple(2, constant(), 1.0).unwrap();
        let s = shoot(&p, 10.0, 1e-10).unwrap();
        assert_eq!(s.status, ShotStatus::CrossedZero);
        assert!((s.radius.unwrap() - 2.0).abs() < 1e-8);
        assert!((s.mass.unwrap() - 4.0 * PI).abs() < 1e-7);
    }

    #[test]
    fn gelfand_closed_form() {
        let mu = 2f64.sqrt() + 1.0;
        let p = exp_problem((8.0 * mu * mu).ln());
        let s = shoot(&p, 10.0, 1e-11).unwrap();
        assert!((s.radius.unwrap() - 1.0).abs() < 1e-7);
        let mass = 8.0 * PI * mu * mu / (1.0 + mu * mu);
        assert!((s.mass.unwrap() - mass).abs() < 1e-6 * mass);
    }

    #[test]
    fn radius_cap_and_monotone_grid() {
        let p = exp_problem(3.0);
        let s = shoot(&p, 0.05, 1e-10).unwrap();
        assert_eq!(s.status, ShotStatus::RadiusCapReached);
        assert!(s.radius.is_none());
        assert!(s.u.windows(2).all(|w| w[1] < w[0]));
        assert!(s.q.windows(2).all(|w| w[1] < w[0] && w[1] <= 0.0));
    }

    #[test]
    fn flux_and_volume_mass() {
        let p = RadialProblem::simple(3, "expcrit:gamma=1,q=2".parse().unwrap(), 4.0).unwrap();
        let s = shoot(&p, 10.0, 1e-10).unwrap();
        let worst = s.flux_residuals().unwrap().into_iter().fold(0.0, f64::max);
        assert!(worst <= 1e2 * 1e-10, "{worst}");
        let vm = s.volume_mass().unwrap();
        assert!((vm - s.mass.unwrap()).abs() <= 1e-4 * vm);
    }

    #[test]
    fn rescaled_pure_exponential_is_liouville() {
        let p = exp_problem(7.0);
        let s = rescaled_shoot_with(&p, 30.0, 1e-10, false).unwrap();
        for (rho, v) in s.grid.iter().zip(&s.u) {
            let exact = -2.0 * (1.0 + rho * rho / 8.0).ln();
            assert!((v - exact).abs() < 1e-8);
        }
        assert!(s.zero_index.is_some());
    }

    #[test]
    fn frames_agree() {
        let p = RadialProblem::simple(2, "expcrit:gamma=1,q=2".parse().unwrap(), 6.0).unwrap();
        let a = shoot(&p, 10.0, 1e-11).unwrap();
        let b = rescaled_shoot(&p, 1e6, 1e-11).unwrap();
        let (ra, rb) = (a.radius.unwrap(), b.radius.unwrap());
        assert!((ra - rb).abs() < 1e-6 * ra);
        assert!((a.mass.unwrap() - b.mass.unwrap()).abs() < 1e-6 * a.mass.unwrap());
    }

    #[test]
    fn spline_reproduces_quadratic_weight_roughly() {
        let knots: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let vals: Vec<f64> = knots.iter().map(|r| 1.0 + r * r).collect();
        let t = SplineTable::new(knots, vals).unwrap();
        for r in [0.05, 0.55, 1.33] {
            assert!((t.eval(r) - (1.0 + r * r)).abs() < 1e-3);
        }
        let w = Weight::Table(t);
        assert!(w.check_positive(2.0).is_ok());
    }

    #[test]
    fn weighted_constant_forcing() {
        let p = RadialProblem::new(2, constant(), Weight::Constant { value: 4.0 }, 1.0).unwrap();
        let s = shoot(&p, 10.0, 1e-10).unwrap();
        assert!((s.radius.unwrap() - 1.0).abs() < 1e-8);
        let w = Weight::Quadratic { a0: 1.0, a2: -1.0 };
        assert!(w.check_positive(2.0).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(RadialProblem::simple(1, constant(), 1.0).is_err());
        assert!(RadialProblem::simple(2, constant(), 0.0).is_err());
        let p = exp_problem(1.0);
        assert!(matches!(shoot(&p, 1.0, 1e-3), Err(LabError::Argument(_))));
    }
}
