//! Sweeps of shooting solutions over the center height `M`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blowup::theta_exact;
use crate::nonlinearity::{classify_default, Criticality, Nonlinearity};
use crate::radial::{rescaled_shoot, shoot, RadialProblem, RadialShot, ShotStatus, Weight};
use crate::{LabError, Result};

/// `log f(M)` above which sweeps shoot in blow-up variables.
pub const RESCALE_LOG_F: f64 = 30.0;
pub const PHYSICAL_CAP: f64 = 1e8;
pub const RESCALED_CAP: f64 = 1e12;
/// Required accuracy of `R(M*) = 1`.
pub const UNIT_BALL_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub mass: Option<f64>,
    pub status: ShotStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitBallSolution {
    #[serde(rename = "M")]
    pub m: f64,
    /// `R(M*) − 1`.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    #[serde(rename = "M_threshold")]
    pub m_threshold: f64,
    #[serde(rename = "R_max_beyond")]
    pub r_max_beyond: f64,
}

#[derive(Clone, Debug)]
pub struct BranchDiagram {
    pub n: u32,
    pub nl: Nonlinearity,
    pub weight: Weight,
    pub tol: f64,
    pub criticality: Option<Criticality>,
    pub points: Vec<BranchPoint>,
    pub unit_ball_solutions: Vec<UnitBallSolution>,
    /// Largest mass seen along the sweep.
    pub mass_budget: f64,
    /// Largest mass among the unit-ball solutions.
    pub unit_ball_mass_budget: Option<f64>,
    pub bound_certificate: Option<BoundCertificate>,
    pub warnings: Vec<String>,
}

/// One shot at height `m`, in blow-up variables once `log f(m)` is large.
pub fn shoot_at(n: u32, nl: &Nonlinearity, weight: &Weight, m: f64, tol: f64) -> Result<RadialShot> {
    let p = RadialProblem::new(n, nl.clone(), weight.clone(), m)?;
    if p.log_f_m() > RESCALE_LOG_F {
        rescaled_shoot(&p, RESCALED_CAP, tol)
    } else {
        shoot(&p, PHYSICAL_CAP, tol)
    }
}

fn point(n: u32, nl: &Nonlinearity, weight: &Weight, m: f64, tol: f64) -> Result<BranchPoint> {
    let s = shoot_at(n, nl, weight, m, tol)?;
    Ok(BranchPoint {
        m,
        r: s.radius,
        mass: s.mass,
        status: s.status,
    })
}

pub fn sweep(n: u32, nl: &Nonlinearity, weight: &Weight, m_grid: &[f64], tol: f64) -> Result<BranchDiagram> {
    if m_grid.is_empty() {
        return Err(LabError::Argument("empty M grid".into()));
    }
    if m_grid[0] <= 0.0 || m_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::Argument("M grid must be positive and increasing".into()));
    }
    let mut warnings = Vec::new();
    let criticality = match classify_default(nl) {
        Ok(c) => Some(c.criticality),
        Err(e) => {
            warnings.push(format!("classification failed: {e}"));
            None
        }
    };
    let supercritical = matches!(criticality, Some(Criticality::Supercritical));
    if supercritical {
        warnings.push("supercritical nonlinearity: no a-priori bound is claimed".into());
    }
    let superlinear = nl.is_superlinear(n);
    if !superlinear {
        warnings.push("nonlinearity is not superlinear: no a-priori bound is claimed".into());
    }

    let points = m_grid
        .par_iter()
        .map(|&m| point(n, nl, weight, m, tol))
        .collect::<Result<Vec<_>>>()?;
    let gaps = points.iter().filter(|p| p.status != ShotStatus::CrossedZero).count();
    if gaps > 0 {
        warnings.push(format!("{gaps} shots did not cross zero"));
    }

    let brackets: Vec<(f64, f64)> = points
        .windows(2)
        .filter_map(|w| match (w[0].r, w[1].r) {
            (Some(a), Some(b)) if (a - 1.0) * (b - 1.0) <= 0.0 && a != b => Some((w[0].m, w[1].m)),
            _ => None,
        })
        .collect();
    let unit_ball_solutions = brackets
        .par_iter()
        .map(|&(lo, hi)| unit_ball_root(n, nl, weight, lo, hi, tol))
        .collect::<Result<Vec<_>>>()?;
    for s in &unit_ball_solutions {
        if s.residual.abs() > UNIT_BALL_TOL {
            warnings.push(format!("unit-ball root near M = {} has residual {}", s.m, s.residual));
        }
    }
    let unit_ball_mass_budget = unit_ball_solutions
        .iter()
        .map(|s| point(n, nl, weight, s.m, tol).map(|p| p.mass.unwrap_or(f64::NAN)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|m| m.is_finite())
        .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.max(m))));

    let mass_budget = points
        .iter()
        .filter_map(|p| p.mass)
        .fold(0.0f64, f64::max);

    let bound_certificate = if supercritical || !superlinear {
        None
    } else {
        certificate(&points)
    };

    Ok(BranchDiagram {
        n,
        nl: nl.clone(),
        weight: weight.clone(),
        tol,
        criticality,
        points,
        unit_ball_solutions,
        mass_budget,
        unit_ball_mass_budget,
        bound_certificate,
        warnings,
    })
}

// Longest tail of crossed shots with R < 1 and R non-increasing.
fn certificate(points: &[BranchPoint]) -> Option<BoundCertificate> {
    let mut start = points.len();
    let mut prev = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate().rev() {
        match p.r {
            Some(r) if r < 1.0 && r >= prev => {
                start = i;
                prev = r;
            }
            _ => break,
        }
    }
    if points.len() - start < 3 {
        return None;
    }
    Some(BoundCertificate {
        m_threshold: points[start].m,
        r_max_beyond: points[start].r?,
    })
}

/// Bisection on `M` for `R(M) = 1` inside `[lo, hi]`.
pub fn unit_ball_root(n: u32, nl: &Nonlinearity, weight: &Weight, lo: f64, hi: f64, tol: f64) -> Result<UnitBallSolution> {
    let resid = |m: f64| -> Result<Option<f64>> {
        Ok(shoot_at(n, nl, weight, m, tol)?.radius.map(|r| r - 1.0))
    };
    let (mut a, mut b) = (lo, hi);
    let fa0 = resid(a)?.ok_or_else(|| LabError::Argument("bracket end did not cross zero".into()))?;
    let mut fa = fa0;
    let mut best = (a, fa);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b || b - a <= 1e-13 * b {
            break;
        }
        let fm = match resid(mid)? {
            Some(v) => v,
            None => break,
        };
        if fm.abs() < best.1.abs() {
            best = (mid, fm);
        }
        if fm == 0.0 {
            break;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(UnitBallSolution {
        m: best.0,
        residual: best.1,
    })
}

impl BranchDiagram {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("M,R,mass,status\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for p in &self.points {
            s.push_str(&format!("{},{},{},{:?}\n", p.m, opt(p.r), opt(p.mass), p.status));
        }
        s
    }

    /// Masses of crossed shots on the last `count` grid points.
    fn tail(&self, count: usize) -> Vec<(f64, f64)> {
        let crossed: Vec<(f64, f64)> = self.points.iter().filter_map(|p| Some((p.m, p.mass?))).collect();
        crossed[crossed.len().saturating_sub(count)..].to_vec()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizationProbe {
    pub limit_mass_estimate: f64,
    pub theta_ref: f64,
    pub rel_gap: f64,
    /// `true` when the three-point exponential fit was used.
    pub extrapolated: bool,
    pub tail_masses: Vec<f64>,
}

/// Extrapolates the masses of the sweep tail under `mass(M) = θ + c e^{−κM}`
/// and compares with `θ` for slope `beta`.
pub fn quantization_probe(diagram: &BranchDiagram, beta: f64) -> Result<QuantizationProbe> {
    if !matches!(diagram.criticality, Some(Criticality::Critical { .. })) {
        return Err(LabError::NotApplicable(format!(
            "quantization needs a critical nonlinearity, {} is not",
            diagram.nl.spec()
        )));
    }
    if !(beta > 0.0) {
        return Err(LabError::ParameterDomain(format!("beta must be positive, got {beta}")));
    }
    let tail = diagram.tail(3);
    let masses: Vec<f64> = tail.iter().map(|t| t.1).collect();
    if tail.len() < 3 {
        return Err(LabError::InconclusiveQuantization { masses });
    }
    let (m1, m2, m3) = (masses[0], masses[1], masses[2]);
    let (d1, d2) = (m2 - m1, m3 - m2);
    if d1 < 0.0 || d2 < 0.0 {
        return Err(LabError::InconclusiveQuantization { masses });
    }
    let h1 = tail[1].0 - tail[0].0;
    let h2 = tail[2].0 - tail[1].0;
    let even = (h1 - h2).abs() <= 1e-9 * h1.abs();
    let denom = d2 - d1;
    let ratio = if d1 > 0.0 { d2 / d1 } else { f64::NAN };
    let (estimate, extrapolated) = if even && denom < 0.0 && ratio < 0.99 && ratio.is_finite() {
        (m3 - d2 * d2 / denom, true)
    } else {
        (m3, false)
    };
    let theta_ref = theta_exact(diagram.n, beta);
    Ok(QuantizationProbe {
        limit_mass_estimate: estimate,
        theta_ref,
        rel_gap: (estimate - theta_ref) / theta_ref,
        extrapolated,
        tail_masses: masses,
    })
}

/// `count` evenly spaced heights on `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}
