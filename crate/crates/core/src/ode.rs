//! Embedded Dormand–Prince 5(4) integrator for planar systems, with PI step
//! control and level-crossing events refined by bisection plus a secant polish.

pub type State = [f64; 2];

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const PI_ALPHA: f64 = 0.17;
const PI_BETA: f64 = 0.04;
const MAX_GROWTH: f64 = 5.0;
const MIN_SHRINK: f64 = 0.2;
const MAX_STEPS: usize = 1_000_000;

/// One Dormand–Prince step from `(r, y)` with step `h`.
/// Returns the fifth-order solution and the embedded error vector.
pub fn dopri_step<F>(rhs: &F, r: f64, y: &State, h: f64) -> (State, State)
where
    F: Fn(f64, &State) -> State,
{
    let mut k = [[0.0; 2]; 7];
    for s in 0..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                ys[0] += h * a * kj[0];
                ys[1] += h * a * kj[1];
            }
        }
        k[s] = rhs(r + C[s] * h, &ys);
    }
    let mut out = *y;
    let mut err = [0.0; 2];
    for s in 0..7 {
        for i in 0..2 {
            out[i] += h * B[s] * k[s][i];
            err[i] += h * E[s] * k[s][i];
        }
    }
    (out, err)
}

/// A level crossing `y[component]` falling through `level`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventSpec {
    pub component: usize,
    pub level: f64,
    /// Terminate at the event instead of continuing past it.
    pub stop: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Event,
    EndReached,
    StepFailure,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub r: Vec<f64>,
    pub y: Vec<State>,
    pub event: Option<(f64, State)>,
    pub termination: Termination,
    pub rejected: usize,
}

/// Adaptive integration from `r0` to `r_end` at local tolerance `tol`
/// (mixed absolute/relative: `tol·(1 + |y_i|)` per component).
pub fn integrate<F>(
    rhs: &F,
    r0: f64,
    y0: State,
    r_end: f64,
    h0: f64,
    tol: f64,
    event: Option<EventSpec>,
) -> Trajectory
where
    F: Fn(f64, &State) -> State,
{
    let mut traj = Trajectory {
        r: vec![r0],
        y: vec![y0],
        event: None,
        termination: Termination::EndReached,
        rejected: 0,
    };
    let mut r = r0;
    let mut y = y0;
    let mut h = h0.min(r_end - r0);
    let mut err_prev: f64 = 1e-4;
    let mut watching = event;

    for _ in 0..MAX_STEPS {
        if r >= r_end {
            return traj;
        }
        let h_min = 1e-14 * r.abs().max(f64::MIN_POSITIVE);
        if h < h_min {
            traj.termination = Termination::StepFailure;
            return traj;
        }
        let last = r + h >= r_end;
        let h_try = if last { r_end - r } else { h };
        let (y_new, e) = dopri_step(rhs, r, &y, h_try);
        let mut err: f64 = 0.0;
        for i in 0..2 {
            let sc = tol * (1.0 + y[i].abs().max(y_new[i].abs()));
            err = err.max((e[i] / sc).abs());
        }
        if !err.is_finite() || !y_new.iter().all(|v| v.is_finite()) {
            traj.rejected += 1;
            h = h_try * MIN_SHRINK;
            continue;
        }
        if err > 1.0 {
            traj.rejected += 1;
            let fac = (SAFETY * err.powf(-0.2)).max(MIN_SHRINK);
            h = h_try * fac;
            continue;
        }

        let r_new = if last { r_end } else { r + h_try };
        if let Some(ev) = watching {
            let g0 = y[ev.component] - ev.level;
            let g1 = y_new[ev.component] - ev.level;
            if g0 > 0.0 && g1 <= 0.0 {
                let (s, ys) = refine_event(rhs, r, &y, h_try, ev);
                let r_ev = r + s;
                traj.event = Some((r_ev, ys));
                traj.r.push(r_ev);
                traj.y.push(ys);
                if ev.stop {
                    traj.termination = Termination::Event;
                    return traj;
                }
                watching = None;
                r = r_ev;
                y = ys;
                continue;
            }
        }

        r = r_new;
        y = y_new;
        traj.r.push(r);
        traj.y.push(y);

        let err_c = err.max(1e-10);
        let fac = SAFETY * err_c.powf(-PI_ALPHA) * err_prev.powf(PI_BETA);
        h = h_try * fac.clamp(MIN_SHRINK, MAX_GROWTH);
        err_prev = err_c;
    }
    traj.termination = Termination::StepFailure;
    traj
}

/// Locates the crossing inside an accepted step, treating the single-step
/// map `s ↦ step(r, y, s)` as the function whose root is sought.
fn refine_event<F>(rhs: &F, r: f64, y: &State, h: f64, ev: EventSpec) -> (f64, State)
where
    F: Fn(f64, &State) -> State,
{
    let g = |s: f64| -> (f64, State) {
        if s == 0.0 {
            return (y[ev.component] - ev.level, *y);
        }
        let (ys, _) = dopri_step(rhs, r, y, s);
        (ys[ev.component] - ev.level, ys)
    };
    let (mut lo, mut hi) = (0.0, h);
    let (mut g_lo, _) = g(lo);
    let (mut g_hi, mut y_hi) = g(hi);
    let scale = 4.0 * f64::EPSILON * (r + h).abs();
    for _ in 0..200 {
        if hi - lo <= scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (gm, ym) = g(mid);
        if gm > 0.0 {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
            g_hi = gm;
            y_hi = ym;
        }
    }
    let mut best = (hi, g_hi, y_hi);
    if g_lo != g_hi {
        let s = (lo - g_lo * (hi - lo) / (g_hi - g_lo)).clamp(lo, hi);
        let (gs, ys) = g(s);
        if gs.abs() < best.1.abs() {
            best = (s, gs, ys);
        }
    }
    if g_lo.abs() < best.1.abs() && lo > 0.0 {
        let (_, ys) = g(lo);
        best = (lo, g_lo, ys);
    }
    (best.0, best.2)
}
