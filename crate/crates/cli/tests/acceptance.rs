//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nlab_core::blowup::{
    profile_distance, subcritical_limit_check, theta_exact, theta_quadrature, LiouvilleProfile, RescaledProfile,
};
use nlab_core::branch::{linear_grid, quantization_probe, sweep};
use nlab_core::counterexample::{CounterexampleInstance, TestFunction};
use nlab_core::nonlinearity::{classify_default, Criticality, Family};
use nlab_core::radial::shoot;
use nlab_core::{Nonlinearity, RadialProblem, ShotStatus, Weight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

struct Suite {
    failures: Vec<&'static str>,
}

impl Suite {
    fn run(&mut self, id: &'static str, budget: Duration, f: impl FnOnce() -> Verdict) {
        let start = Instant::now();
        let verdict = f();
        let took = start.elapsed();
        let (ok, detail) = match verdict {
            Ok(d) if took <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over budget {budget:?}")),
            Err(d) => (false, d),
        };
        println!("{} {id}: {detail} [{took:.2?}]", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failures.push(id);
        }
    }
}

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

fn criterion_1() -> Verdict {
    let mut worst: f64 = 0.0;
    for n in [2, 3, 4] {
        for beta in [0.5, 1.0, 2.0] {
            let q = theta_quadrature(&LiouvilleProfile::new(n, beta).map_err(err)?).map_err(err)?;
            worst = worst.max(rel(q, theta_exact(n, beta)));
        }
    }
    let eight_pi = theta_exact(2, 1.0);
    ensure(
        worst <= 1e-6 && rel(eight_pi, 8.0 * PI) <= 1e-15 && (eight_pi - 25.13274).abs() < 5e-6,
        format!("theta quadrature worst rel err {worst:.2e}; theta(2,1) = {eight_pi}"),
    )
}

fn criterion_2() -> Verdict {
    let mut worst: f64 = 0.0;
    for n in [2, 3] {
        for beta in [1.0, 2.0] {
            let lp = LiouvilleProfile::new(n, beta).map_err(err)?;
            for i in 0..20 {
                let r = 10f64.powf(-2.0 + 4.0 * i as f64 / 19.0);
                let m = lp.mass_within(r).map_err(err)?;
                worst = worst.max(rel(lp.flux(r), m));
            }
        }
    }
    ensure(worst <= 1e-8, format!("flux vs enclosed mass worst rel gap {worst:.2e}"))
}

fn criterion_3() -> Verdict {
    let nl = Nonlinearity::exponential();
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let mu: f64 = 0.5 * 40f64.powf(i as f64 / 9.0);
        let m = (8.0 * mu * mu).ln();
        let s = shoot(&RadialProblem::simple(2, nl.clone(), m).map_err(err)?, 10.0, 1e-11).map_err(err)?;
        // u = log(8μ²/(1+μ²r²)²) vanishes where 1 + μ²R² = 2√2μ.
        let r = ((2.0 * 2f64.sqrt() * mu - 1.0) / (mu * mu)).sqrt();
        let mass = 8.0 * PI * (1.0 - 1.0 / (2.0 * 2f64.sqrt() * mu));
        let (sr, sm) = (s.radius.ok_or("no zero")?, s.mass.ok_or("no mass")?);
        worst = worst.max(rel(sr, r)).max(rel(sm, mass));
    }
    let d = sweep(2, &nl, &Weight::default(), &linear_grid(0.1, 12.0, 241), 1e-10).map_err(err)?;
    let found: Vec<f64> = d.unit_ball_solutions.iter().map(|s| s.m).collect();
    // R = 1 at μ = √2 ∓ 1.
    let exact = [
        (8.0f64).ln() + 2.0 * (2f64.sqrt() - 1.0).ln(),
        (8.0f64).ln() + 2.0 * (2f64.sqrt() + 1.0).ln(),
    ];
    let set_ok = found.len() == 2 && found.iter().zip(exact).all(|(a, b)| (a - b).abs() <= 1e-4);
    ensure(
        worst <= 1e-5 && set_ok,
        format!("R and mass worst rel err {worst:.2e}; unit-ball M = {found:?} vs closed form {exact:?}"),
    )
}

fn criterion_4() -> Verdict {
    let nl = Nonlinearity::exponential();
    let d2 = sweep(2, &nl, &Weight::default(), &linear_grid(20.0, 40.0, 21), 1e-10).map_err(err)?;
    let p2 = quantization_probe(&d2, 1.0).map_err(err)?;
    let d3 = sweep(3, &nl, &Weight::default(), &linear_grid(20.0, 60.0, 21), 1e-10).map_err(err)?;
    let p3 = quantization_probe(&d3, 1.0).map_err(err)?;
    let g2 = rel(p2.limit_mass_estimate, 8.0 * PI);
    let g3 = rel(p3.limit_mass_estimate, 81.0 * PI);
    ensure(
        g2 <= 1e-3 && g3 <= 1e-2,
        format!("N=2 limit mass {} (rel {g2:.2e}); N=3 limit mass {} (rel {g3:.2e})", p2.limit_mass_estimate, p3.limit_mass_estimate),
    )
}

fn criterion_5() -> Verdict {
    let tol = 1e-10;
    let lp = LiouvilleProfile::new(2, 1.0).map_err(err)?;
    let mut gaps = Vec::new();
    for m in [5.0, 15.0, 30.0] {
        let p = RadialProblem::simple(2, Nonlinearity::exponential(), m).map_err(err)?;
        let rp = RescaledProfile::compute(&p, 10.0, tol).map_err(err)?;
        gaps.push(profile_distance(&rp, &lp, 10.0).map_err(err)?.0);
    }
    let worst = gaps.iter().cloned().fold(0.0, f64::max);
    ensure(worst <= 10.0 * tol, format!("sup gaps on [0,10]: {} (bound {:.0e})", sci(&gaps), 10.0 * tol))
}

fn criterion_6() -> Verdict {
    let nl: Nonlinearity = "powerlog:tau=0,p=3,alpha=0".parse().map_err(err)?;
    let mut gaps = Vec::new();
    for m in [50.0, 200.0, 800.0] {
        let p = RadialProblem::simple(2, nl.clone(), m).map_err(err)?;
        let rp = RescaledProfile::compute(&p, 2.0, 1e-10).map_err(err)?;
        gaps.push(subcritical_limit_check(&rp, 2, 2.0).map_err(err)?);
    }
    ensure(
        gaps.windows(2).all(|w| w[1] < w[0]),
        format!("sup gaps to -r^2/4 on [0,2]: {}", sci(&gaps)),
    )
}

fn criterion_7() -> Verdict {
    let class = |f: Family| -> Result<Criticality, String> {
        Ok(classify_default(&Nonlinearity::new(f).map_err(err)?).map_err(err)?.criticality)
    };
    let sub = class(Family::PowerLog { tau: 1.0, p: 2.0, alpha: 0.5 })?;
    let crit = class(Family::ExpCritical { gamma: 0.5, q: 3.0 })?;
    let sup = class(Family::PureExpPower { alpha: 1.5 })?;
    let beta = match crit {
        Criticality::Critical { beta } => beta,
        _ => f64::NAN,
    };
    let mut scaled = Vec::new();
    for c in [1e-3, 1.0, 1e3] {
        scaled.push(class(Family::Scaled {
            c,
            inner: Box::new(Family::ExpCritical { gamma: 0.5, q: 3.0 }),
        })?);
    }
    ensure(
        sub == Criticality::Subcritical
            && (beta - 0.5).abs() <= 1e-3
            && sup == Criticality::Supercritical
            && scaled.iter().all(|s| *s == crit),
        format!("{sub:?}, {crit:?}, {sup:?}; scaled {scaled:?}"),
    )
}

fn instance() -> Result<CounterexampleInstance, String> {
    CounterexampleInstance::new(2, 1.2, 0.5).map_err(err)
}

fn criterion_8a() -> Verdict {
    let c = instance()?;
    let grid_ok = (1..=48).all(|j| c.a_eval(c.rho * 10f64.powf(-(j as f64) / 4.0)).is_ok_and(|a| a > 0.0));
    let target = 2f64.powf(5.0 / 6.0) * 0.2 / 1.2f64.powi(3);
    let a = c.a_eval(1e-12 * c.rho).map_err(err)?;
    ensure(
        grid_ok && (a - target).abs() <= 1e-2,
        format!("a > 0 on grid: {grid_ok}; a(1e-12 rho) = {a:.5} vs {target:.5}"),
    )
}

fn criterion_8b() -> Verdict {
    let c = instance()?;
    let res: Vec<f64> = (4..=12)
        .map(|m| c.w_alpha_residual(10f64.powi(-m) * c.rho))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    ensure(
        res.windows(2).all(|w| w[1].abs() < w[0].abs()),
        format!("w^alpha - (2l - 2 delta log l) at 1e-4..1e-12 rho: {res:.4?}"),
    )
}

fn criterion_8c() -> Verdict {
    let c = instance()?;
    let w = c.w_eval(1e-12 * c.rho).map_err(err)?;
    let sup_a = (1..=48)
        .map(|j| c.a_eval(c.rho * 10f64.powf(-(j as f64) / 4.0)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?
        .into_iter()
        .fold(0.0, f64::max);
    ensure(w > 20.0 && sup_a <= 1.0, format!("w(1e-12 rho) = {w:.3}; sup a = {sup_a:.4}"))
}

fn criterion_8d() -> Verdict {
    let c = instance()?;
    let mut worst: f64 = 0.0;
    let mut energies = Vec::new();
    for k in [1.0, 5.0, 10.0, 20.0] {
        let e = c.truncation_energy(k).map_err(err)?;
        let fine = c.truncation_energy_with(k, 1e-13, 2).map_err(err)?;
        if !e.is_finite() {
            return Err(format!("E({k}) = {e}"));
        }
        worst = worst.max(rel(e, fine));
        energies.push(e);
    }
    ensure(worst <= 1e-4, format!("E(k) = {energies:.4?}; self-consistency {worst:.2e}"))
}

fn criterion_8e() -> Verdict {
    let c = instance()?;
    let cases = [
        (TestFunction::Zero, 5.0),
        (TestFunction::Bump { amplitude: 3.0, support: 0.25 }, 5.0),
        (TestFunction::Bump { amplitude: -2.0, support: 0.1 }, 2.0),
    ];
    let mut res = Vec::new();
    for (phi, k) in cases {
        res.push(c.entropy_identity_check(&phi, k).map_err(err)?.residual);
    }
    ensure(res.iter().all(|r| *r <= 1e-3), format!("residuals {}", sci(&res)))
}

fn criterion_9() -> Verdict {
    let tol = 1e-9;
    let families = [
        (2, "expcrit:gamma=1,q=0", 3.0),
        (3, "expcrit:gamma=0.5,q=3", 4.0),
        (2, "powerlog:tau=1,p=2,alpha=0.5", 2.0),
        (2, "affine:a=1,b=0.5", 1.0),
        (2, "exppow:alpha=1.5", 1.5),
        (4, "scaled:c=2,inner=expcrit:gamma=1,q=1", 2.0),
    ];
    let (mut worst_flux, mut worst_mass, mut crossed): (f64, f64, usize) = (0.0, 0.0, 0);
    for (n, spec, m) in families {
        let p = RadialProblem::simple(n, spec.parse().map_err(err)?, m).map_err(err)?;
        let s = shoot(&p, 1e4, tol).map_err(err)?;
        worst_flux = s.flux_residuals().map_err(err)?.into_iter().fold(worst_flux, f64::max);
        if s.status == ShotStatus::CrossedZero {
            crossed += 1;
            let mass = s.mass.ok_or("no mass")?;
            let vol = s.volume_mass().map_err(err)?;
            let div = s.divergence_mass().ok_or("no divergence mass")?;
            worst_mass = worst_mass.max(rel(vol, mass)).max(rel(div, mass));
        }
    }

    let dir = tempfile::tempdir().map_err(err)?;
    let mut deterministic = true;
    for args in [
        vec!["branch", "--N", "2", "--family", "expcrit:gamma=1,q=0", "--m-min", "0.1", "--m-max", "12", "--steps", "60"],
        vec!["counterexample", "--alpha", "1.2", "--format", "csv"],
        vec!["shoot", "--N", "3", "--family", "expcrit:gamma=1,q=1", "--M", "3", "--format", "csv"],
    ] {
        let mut bodies = Vec::new();
        for rep in 0..2 {
            let path = dir.path().join(format!("{}-{rep}.out", args[0]));
            let mut argv = vec!["nlab".to_string()];
            argv.extend(args.iter().map(|s| s.to_string()));
            argv.push("--out".into());
            argv.push(path.display().to_string());
            let out = nlab_cli::run(argv);
            if out.code != 0 {
                return Err(format!("{} exited {}: {}", args[0], out.code, out.stderr));
            }
            bodies.push(std::fs::read(&path).map_err(err)?);
        }
        deterministic &= bodies[0] == bodies[1];
    }

    let registered = [
        Family::PowerLog { tau: 1.0, p: 2.0, alpha: 0.5 },
        Family::ExpCritical { gamma: 0.5, q: 3.0 },
        Family::PureExpPower { alpha: 1.5 },
        Family::Affine { a: 1.0, b: 0.5 },
        Family::Scaled { c: 1e3, inner: Box::new(Family::ExpCritical { gamma: 1.0, q: -1.0 }) },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_fd: f64 = 0.0;
    for f in registered {
        let nl = Nonlinearity::new(f).map_err(err)?;
        for _ in 0..100 {
            let t: f64 = rng.gen_range(0.1..10.0);
            let h = 1e-5 * t;
            let fp = nl.eval(t).map_err(err)?.fprime;
            let fd = (nl.eval(t + h).map_err(err)?.f - nl.eval(t - h).map_err(err)?.f) / (2.0 * h);
            worst_fd = worst_fd.max((fp - fd).abs() / (1.0 + fp.abs()));
        }
    }

    ensure(
        worst_flux <= 1e2 * tol && worst_mass <= 1e-4 && deterministic && worst_fd <= 1e-6,
        format!(
            "flux {worst_flux:.2e}; mass identities {worst_mass:.2e} over {crossed} crossed shots; \
             byte-identical artifacts: {deterministic}; finite-difference gap {worst_fd:.2e}"
        ),
    )
}

fn main() {
    let mut suite = Suite { failures: Vec::new() };
    let s = Duration::from_secs;
    suite.run("1 theta constant", s(1), criterion_1);
    suite.run("2 Liouville flux identity", s(1), criterion_2);
    suite.run("3 closed-form Gelfand oracle", s(10), criterion_3);
    suite.run("4 mass quantization", s(60), criterion_4);
    suite.run("5 rescaling exactness", s(10), criterion_5);
    suite.run("6 subcritical limit", s(30), criterion_6);
    suite.run("7 classifier table", s(1), criterion_7);
    suite.run("8a weight positive with limit 0.20623", s(30), criterion_8a);
    suite.run("8b w^alpha asymptotics", s(30), criterion_8b);
    suite.run("8c unbounded solution, bounded weight", s(30), criterion_8c);
    suite.run("8d truncation energies", s(30), criterion_8d);
    suite.run("8e entropy identity", s(30), criterion_8e);
    suite.run("9 property suites", s(30), criterion_9);
    if suite.failures.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: {} failed: {:?}", suite.failures.len(), suite.failures);
        std::process::exit(1);
    }
}
