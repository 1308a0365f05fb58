//! Thin wrapper over an embedded 8(5,3) Runge–Kutta pair for planar systems.

use ode_solvers::dop853::Dop853;
use ode_solvers::dop_shared::{IntegrationError, OutputType, System};
use ode_solvers::Vector2;

use crate::error::{Error, Result};

/// Smallest accepted step before the run is declared stuck.
pub const MIN_STEP: f64 = 1e-14;
const PI_BETA: f64 = 0.04;
const MAX_STEPS: u32 = 2_000_000;

pub type Rhs<'a> = &'a (dyn Fn(f64, [f64; 2]) -> [f64; 2] + Sync);
pub type StopRule<'a> = &'a mut dyn FnMut(f64, [f64; 2]) -> bool;

#[derive(Default)]
struct Flags {
    last_t: f64,
    t_end: f64,
    stopped: bool,
    underflow: Option<(f64, f64)>,
}

struct Planar<'a, 'b, 'c> {
    rhs: Rhs<'a>,
    stop: StopRule<'b>,
    flags: &'c mut Flags,
}

impl System<f64, Vector2<f64>> for Planar<'_, '_, '_> {
    fn system(&self, t: f64, y: &Vector2<f64>, dy: &mut Vector2<f64>) {
        let r = (self.rhs)(t, [y[0], y[1]]);
        dy[0] = r[0];
        dy[1] = r[1];
    }

    fn solout(&mut self, t: f64, y: &Vector2<f64>, _dy: &Vector2<f64>) -> bool {
        let dt = t - self.flags.last_t;
        self.flags.last_t = t;
        if dt < MIN_STEP && t < self.flags.t_end - MIN_STEP {
            self.flags.underflow = Some((t, dt));
            return true;
        }
        if (self.stop)(t, [y[0], y[1]]) {
            self.flags.stopped = true;
            return true;
        }
        false
    }
}

/// Accepted steps of an adaptive run, initial point included.
#[derive(Debug, Clone)]
pub struct Steps {
    pub t: Vec<f64>,
    pub y: Vec<[f64; 2]>,
    /// The stop rule fired before `t_end`.
    pub stopped: bool,
}

/// Integrates y' = rhs(t, y) from t0 to t_end with relative tolerance `tol`,
/// recording every accepted step. `stop` is consulted after each step.
pub fn integrate(rhs: Rhs<'_>, y0: [f64; 2], t0: f64, t_end: f64, tol: f64, stop: StopRule<'_>) -> Result<Steps> {
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    if t_end <= t0 {
        return Ok(Steps { t: vec![t0], y: vec![y0], stopped: false });
    }
    let mut flags = Flags { last_t: t0, t_end, ..Default::default() };
    let result;
    let (ts, ys) = {
        let sys = Planar { rhs, stop, flags: &mut flags };
        let mut solver = Dop853::from_param(
            sys,
            t0,
            t_end,
            0.0,
            Vector2::new(y0[0], y0[1]),
            tol,
            tol * 1e-6,
            0.9,
            PI_BETA,
            0.333,
            6.0,
            t_end - t0,
            0.0,
            MAX_STEPS,
            1000,
            OutputType::Sparse,
        );
        result = solver.integrate();
        let (ts, ys) = solver.results().get();
        (ts.clone(), ys.clone())
    };
    if let Some((t, dt)) = flags.underflow {
        return Err(Error::StepUnderflow { t, dt });
    }
    match result {
        Ok(_) => {}
        Err(IntegrationError::StepSizeUnderflow { x }) => {
            return Err(Error::StepUnderflow { t: x, dt: f64::EPSILON * x.abs() });
        }
        Err(e) => return Err(Error::domain(format!("integrator failed: {e}"))),
    }
    let mut t = Vec::with_capacity(ts.len() + 1);
    let mut y = Vec::with_capacity(ts.len() + 1);
    if ts.first().is_none_or(|&t1| t1 > t0) {
        t.push(t0);
        y.push(y0);
    }
    for (ti, yi) in ts.iter().zip(&ys) {
        t.push(*ti);
        y.push([yi[0], yi[1]]);
    }
    Ok(Steps { t, y, stopped: flags.stopped })
}

/// Values at the requested increasing times, integrating segment by segment
/// so each sample is hit exactly.
pub fn sample(rhs: Rhs<'_>, y0: [f64; 2], t0: f64, times: &[f64], tol: f64) -> Result<Vec<[f64; 2]>> {
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut y) = (t0, y0);
    for &ti in times {
        if ti < t {
            return Err(Error::domain("sample times must be increasing"));
        }
        let run = integrate(rhs, y, t, ti, tol, &mut |_, _| false)?;
        y = *run.y.last().expect("run has at least the initial point");
        t = ti;
        out.push(y);
    }
    Ok(out)
}
