//! Liouville limit objects and blow-up comparisons.
//!
//! The limit profile of `−Δ_N v = e^{βv}`, `v(0) = 0` is
//! `v(r) = −(N/β)·log(1 + (β^{N−1} r^N / C_N)^{1/(N−1)})` with
//! `C_N = N(N²/(N−1))^{N−1}`; its total mass is the quantum `θ`.

use serde::{Deserialize, Serialize};

use crate::geometry::{unit_ball_volume, unit_sphere_area};
use crate::quadrature::integrate;
use crate::radial::{rescaled_shoot_with, Frame, RadialProblem, RadialShot};
use crate::{LabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleProfile {
    pub n: u32,
    pub beta: f64,
    pub c_n: f64,
    pub omega_n: f64,
}

impl LiouvilleProfile {
    pub fn new(n: u32, beta: f64) -> Result<Self> {
        if n < 2 {
            return Err(LabError::ParameterDomain(format!("dimension must be >= 2, got {n}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(LabError::ParameterDomain(format!("beta must be positive, got {beta}")));
        }
        let nf = n as f64;
        Ok(LiouvilleProfile {
            n,
            beta,
            c_n: nf * (nf * nf / (nf - 1.0)).powf(nf - 1.0),
            omega_n: unit_ball_volume(n),
        })
    }

    fn order(&self) -> f64 {
        (self.n - 1) as f64
    }

    // s = k r^{N/(N−1)} with k = (β^{N−1}/C_N)^{1/(N−1)}.
    fn k(&self) -> f64 {
        (self.beta.powf(self.order()) / self.c_n).powf(1.0 / self.order())
    }

    fn s(&self, r: f64) -> f64 {
        self.k() * r.powf(self.n as f64 / self.order())
    }

    /// `(v(r), v'(r))`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let nf = self.n as f64;
        let k = self.order();
        let s = self.s(r);
        let v = -(nf / self.beta) * s.ln_1p();
        let vp = -(nf / self.beta) * (nf / k) * self.k() * r.powf(1.0 / k) / (1.0 + s);
        (v, vp)
    }

    /// `e^{βv(r)} = (1+s)^{−N}`.
    pub fn density(&self, r: f64) -> f64 {
        (-(self.n as f64) * self.s(r).ln_1p()).exp()
    }

    /// `Nω_N r^{N−1}|v'(r)|^{N−1}`.
    pub fn flux(&self, r: f64) -> f64 {
        let k = self.order();
        unit_sphere_area(self.n) * (r * self.eval(r).1.abs()).powf(k)
    }

    /// `∫_{B_r} e^{βv}` by adaptive quadrature.
    pub fn mass_within(&self, r: f64) -> Result<f64> {
        let k = self.order();
        let area = unit_sphere_area(self.n);
        let q = integrate(|s: f64| area * s.powf(k) * self.density(s), 0.0, r, 0.0, 1e-13)?;
        Ok(q.value)
    }

    /// Radius where the density has dropped to `10⁻⁶`.
    pub fn default_split(&self) -> f64 {
        let nf = self.n as f64;
        let s = 1e6f64.powf(1.0 / nf) - 1.0;
        (s / self.k()).powf(self.order() / nf)
    }
}

/// `θ = Nω_N β^{1−N} (N²/(N−1))^{N−1}`.
pub fn theta_exact(n: u32, beta: f64) -> f64 {
    let nf = n as f64;
    unit_sphere_area(n) * beta.powf(1.0 - nf) * (nf * nf / (nf - 1.0)).powf(nf - 1.0)
}

/// `∫_{ℝ^N} e^{βv}` by quadrature on `[0, r_split]` plus the exact integrand
/// beyond it in the variable `x = log(r/r_split)`.
pub fn theta_quadrature_split(lp: &LiouvilleProfile, r_split: f64) -> Result<f64> {
    if !(r_split > 0.0) {
        return Err(LabError::Argument(format!("r_split must be positive, got {r_split}")));
    }
    let inner = lp.mass_within(r_split)?;
    let nf = lp.n as f64;
    let area = unit_sphere_area(lp.n);
    // Tail decays like e^{−N x/(N−1)}; x = 200(N−1)/N is far below round-off.
    let x_end = 200.0 * lp.order() / nf;
    let tail = integrate(
        |x: f64| {
            let r = r_split * x.exp();
            area * r.powf(nf) * lp.density(r)
        },
        0.0,
        x_end,
        0.0,
        1e-13,
    )?;
    Ok(inner + tail.value)
}

pub fn theta_quadrature(lp: &LiouvilleProfile) -> Result<f64> {
    theta_quadrature_split(lp, lp.default_split())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaReport {
    #[serde(rename = "N")]
    pub n: u32,
    pub beta: f64,
    pub theta_exact: f64,
    pub theta_quadrature: f64,
    pub rel_err: f64,
}

pub fn theta_report(n: u32, beta: f64) -> Result<ThetaReport> {
    let lp = LiouvilleProfile::new(n, beta)?;
    let exact = theta_exact(n, beta);
    let quad = theta_quadrature(&lp)?;
    Ok(ThetaReport {
        n,
        beta,
        theta_exact: exact,
        theta_quadrature: quad,
        rel_err: (quad - exact).abs() / exact,
    })
}

/// `w(x) = (a0/(Nω_N))^{1/(N−1)} log(r_domain/x)`, the radial solution of
/// `−Δ_N w = a0 δ_0` vanishing on `|x| = r_domain`. Infinite at `x = 0`.
pub fn dirac_fundamental(n: u32, a0: f64, r_domain: f64, x: f64) -> Result<f64> {
    if n < 2 || !(a0 > 0.0) || !(r_domain > 0.0) {
        return Err(LabError::ParameterDomain(format!(
            "need N >= 2, a0 > 0, r_domain > 0; got {n}, {a0}, {r_domain}"
        )));
    }
    if !(0.0..=r_domain).contains(&x) {
        return Err(LabError::Argument(format!("x = {x} outside [0, {r_domain}]")));
    }
    if x == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(dirac_coefficient(n, a0) * (r_domain / x).ln())
}

/// `|w'(s)|·s`, constant in `s`.
pub fn dirac_coefficient(n: u32, a0: f64) -> f64 {
    (a0 / unit_sphere_area(n)).powf(1.0 / (n - 1) as f64)
}

/// `Nω_N s^{N−1}|w'(s)|^{N−1}`.
pub fn dirac_flux(n: u32, a0: f64, s: f64) -> f64 {
    let slope = dirac_coefficient(n, a0) / s;
    unit_sphere_area(n) * (s * slope).powf((n - 1) as f64)
}

/// A shot in blow-up variables, sampled on its own grid.
#[derive(Clone, Debug)]
pub struct RescaledProfile {
    pub n: u32,
    pub m: f64,
    pub log_mu: f64,
    pub rho: Vec<f64>,
    pub v: Vec<f64>,
    pub vprime: Vec<f64>,
}

impl RescaledProfile {
    pub fn from_shot(shot: &RadialShot) -> Result<Self> {
        let log_mu = match shot.frame {
            Frame::Rescaled { log_mu } => log_mu,
            Frame::Physical => {
                return Err(LabError::Argument("profile comparison needs a blow-up frame shot".into()))
            }
        };
        // Origin value from the series, then the grid.
        let mut rho = vec![0.0];
        let mut v = vec![0.0];
        let mut vprime = vec![0.0];
        for i in 0..shot.grid.len() {
            rho.push(shot.grid[i]);
            v.push(shot.u[i]);
            vprime.push(shot.derivative_at(i));
        }
        Ok(RescaledProfile {
            n: shot.problem.n,
            m: shot.problem.m,
            log_mu,
            rho,
            v,
            vprime,
        })
    }

    /// Shoots `p` in blow-up variables out to `rho_cap`, past the zero level.
    pub fn compute(p: &RadialProblem, rho_cap: f64, tol: f64) -> Result<Self> {
        let shot = rescaled_shoot_with(p, rho_cap, tol, false)?;
        if shot.status == crate::ShotStatus::StepFailure {
            return Err(LabError::Tolerance {
                what: "blow-up frame shot".into(),
                estimate: *shot.grid.last().unwrap_or(&0.0),
            });
        }
        Self::from_shot(&shot)
    }

    fn covers(&self, r_cmp: f64) -> Result<()> {
        let reached = *self.rho.last().unwrap_or(&0.0);
        if reached < r_cmp {
            return Err(LabError::Coverage { needed: r_cmp, reached });
        }
        Ok(())
    }

    /// Sup gaps of `(v, v')` against a reference on `[0, r_cmp]`.
    fn sup_gaps(&self, r_cmp: f64, reference: impl Fn(f64) -> (f64, f64)) -> Result<(f64, f64)> {
        self.covers(r_cmp)?;
        let mut gv: f64 = 0.0;
        let mut gp: f64 = 0.0;
        for i in 0..self.rho.len() {
            let r = self.rho[i];
            if r > r_cmp {
                break;
            }
            let (v, vp) = reference(r);
            gv = gv.max((self.v[i] - v).abs());
            gp = gp.max((self.vprime[i] - vp).abs());
        }
        Ok((gv, gp))
    }

    /// `ρ, v_shot, v_ref, |gap|` rows up to `r_cmp`; `reference` is the limit
    /// profile (Liouville, or the constant-source one for subcritical growth).
    pub fn to_csv(&self, reference: impl Fn(f64) -> f64, r_cmp: f64) -> String {
        let mut s = String::from("rho,v_shot,v_liouville,gap\n");
        for (r, v) in self.rho.iter().zip(&self.v) {
            if *r > r_cmp {
                break;
            }
            let vl = reference(*r);
            s.push_str(&format!("{r},{v},{vl},{}\n", (v - vl).abs()));
        }
        s
    }
}

/// `(sup |v_M − v|, sup |v_M' − v'|)` over the shot grid on `[0, r_cmp]`.
pub fn profile_distance(rp: &RescaledProfile, lp: &LiouvilleProfile, r_cmp: f64) -> Result<(f64, f64)> {
    rp.sup_gaps(r_cmp, |r| lp.eval(r))
}

/// Solution of `−Δ_N v = 1`, `v(0) = 0`: `(v, v')`.
pub fn subcritical_reference(n: u32, r: f64) -> (f64, f64) {
    let nf = n as f64;
    let k = nf - 1.0;
    let c = (1.0 / nf).powf(1.0 / k);
    (-(k / nf) * c * r.powf(nf / k), -c * r.powf(1.0 / k))
}

/// Sup gap of `v` against [`subcritical_reference`] on `[0, r_cmp]`.
pub fn subcritical_limit_check(rp: &RescaledProfile, n: u32, r_cmp: f64) -> Result<f64> {
    Ok(rp.sup_gaps(r_cmp, |r| subcritical_reference(n, r))?.0)
}
