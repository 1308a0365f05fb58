//! Reduced flow of circle bundles over Kähler–Einstein bases.
//!
//! With g = u·g₀ (Ric g₀ = λ g₀, complex dimension n), fiber length e^{-f}
//! and curvature the Kähler form, the bundle Ricci flow is the planar system
//!
//! ```text
//! u' = −2λ + e^{-2f}/u,    f' = n e^{-2f} / (2u²).
//! ```

pub mod adaptive;

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;
/// Runs stop once u falls below this fraction of its initial value.
pub const EXTINCTION_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KEParams {
    pub n: u32,
    pub lambda: f64,
}

impl KEParams {
    pub fn new(n: u32, lambda: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("complex dimension n must be at least 1"));
        }
        if !lambda.is_finite() {
            return Err(Error::domain("Einstein constant must be finite"));
        }
        Ok(Self { n, lambda })
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KEState {
    pub u: f64,
    pub f: f64,
    pub t: f64,
}

impl KEState {
    pub fn new(u: f64, f: f64) -> Result<Self> {
        if !(u > 0.0) || !f.is_finite() {
            return Err(Error::domain(format!("need u > 0 and finite f, got u = {u}, f = {f}")));
        }
        Ok(Self { u, f, t: 0.0 })
    }

    /// Fiber metric e^{-2f}.
    pub fn fiber(&self) -> f64 {
        (-2.0 * self.f).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LauretState {
    pub a: f64,
    pub b: f64,
    pub t: f64,
}

fn rhs_raw(u: f64, f: f64, p: &KEParams) -> [f64; 2] {
    let e = (-2.0 * f).exp();
    [-2.0 * p.lambda + e / u, p.nf() * e / (2.0 * u * u)]
}

pub fn ke_rhs(s: &KEState, p: &KEParams) -> Result<(f64, f64)> {
    if !(s.u > 0.0) {
        return Err(Error::domain(format!("u must be positive, got {}", s.u)));
    }
    let [du, df] = rhs_raw(s.u, s.f, p);
    Ok((du, df))
}

/// 1 − (n+1)/(2λ u e^{2f}), the base of the fractional power in Ψ.
fn psi_base(s: &KEState, p: &KEParams) -> Result<f64> {
    if p.lambda == 0.0 {
        return Err(Error::LambdaZero);
    }
    Ok(1.0 - (p.nf() + 1.0) / (2.0 * p.lambda * s.u * (2.0 * s.f).exp()))
}

/// Ψ = e^{2f}(1 − (n+1)/(2λ u e^{2f}))^{n/(n+1)}, conserved when λ ≠ 0.
pub fn psi(s: &KEState, p: &KEParams) -> Result<f64> {
    let base = psi_base(s, p)?;
    if base < 0.0 {
        return Err(Error::NegativeBase { base });
    }
    let n = p.nf();
    Ok((2.0 * s.f).exp() * base.powf(n / (n + 1.0)))
}

/// Ψ^{(n+1)/n} with the power cleared: e^{2f(n+1)/n}(1 − (n+1)/(2λ u e^{2f})).
/// Defined for either sign of the base and conserved exactly when Ψ is.
pub fn psi_cleared(s: &KEState, p: &KEParams) -> Result<f64> {
    let base = psi_base(s, p)?;
    let n = p.nf();
    Ok((2.0 * s.f * (n + 1.0) / n).exp() * base)
}

/// Exact λ = 0 solution with u(0) = u0, f(0) = c.
pub fn closed_form_flat(t: f64, p: &KEParams, u0: f64, c: f64) -> Result<KEState> {
    if p.lambda != 0.0 {
        return Err(Error::domain("closed form holds only for lambda = 0"));
    }
    if !(u0 > 0.0) || t < 0.0 {
        return Err(Error::domain("need u0 > 0 and t >= 0"));
    }
    let n = p.nf();
    let w = (n + 2.0) * t + (2.0 * c).exp() * u0 * u0;
    let u = (-2.0 * c / (n + 2.0)).exp() * u0.powf(n / (n + 2.0)) * w.powf(1.0 / (n + 2.0));
    let f = n / (2.0 * (n + 2.0)) * w.ln() + 2.0 * c / (n + 2.0) - n / (n + 2.0) * u0.ln();
    Ok(KEState { u, f, t })
}

/// Solution with flat connection (no curvature term): u = u0 − 2λt.
pub fn flat_connection_flow(t: f64, u0: f64, lambda: f64) -> f64 {
    u0 - 2.0 * lambda * t
}

pub fn to_lauret(s: &KEState, p: &KEParams) -> LauretState {
    LauretState { a: (-s.f).exp() / s.u, b: p.lambda / s.u, t: s.t }
}

/// Three-dimensional (n = 1) system in the variables a = e^{-f}/u, b = λ/u.
pub fn lauret_rhs(l: &LauretState) -> (f64, f64) {
    let (a, b) = (l.a, l.b);
    ((2.0 * b - 1.5 * a * a) * a, (2.0 * b - a * a) * b)
}

/// Λ = b⁴/a⁴ − b³/a².
pub fn lambda_invariant(l: &LauretState) -> Result<f64> {
    if l.a == 0.0 {
        return Err(Error::domain("lambda invariant needs a > 0"));
    }
    let (a2, b) = (l.a * l.a, l.b);
    Ok(b.powi(4) / (a2 * a2) - b.powi(3) / a2)
}

/// Near collapse e^{-2f}/u → 2λ/(n+1), so u decreases at the rate
/// 2λn/(n+1); this extrapolates the remaining time linearly.
pub fn extinction_estimate(s: &KEState, p: &KEParams) -> Option<f64> {
    (p.lambda > 0.0).then(|| s.t + s.u * (p.nf() + 1.0) / (2.0 * p.lambda * p.nf()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Horizon,
    Extinct,
}

#[derive(Debug, Clone)]
pub struct KETrace {
    pub params: KEParams,
    pub states: Vec<KEState>,
    pub stop: StopReason,
    pub extinction_time: Option<f64>,
}

impl KETrace {
    pub fn last(&self) -> &KEState {
        self.states.last().expect("trace holds the initial state")
    }

    /// States with t ≤ t_max.
    pub fn until(&self, t_max: f64) -> impl Iterator<Item = &KEState> {
        self.states.iter().take_while(move |s| s.t <= t_max)
    }
}

/// Adaptive integration to `t_end`, recording every accepted step; stops
/// early once u ≤ 10⁻⁶·u₀.
pub fn ke_integrate(s0: &KEState, p: &KEParams, t_end: f64, tol: f64) -> Result<KETrace> {
    ke_rhs(s0, p)?;
    let guard = EXTINCTION_GUARD * s0.u;
    let rhs = |_t: f64, y: [f64; 2]| if y[0] > 0.0 { rhs_raw(y[0], y[1], p) } else { [f64::NAN; 2] };
    let run = adaptive::integrate(&rhs, [s0.u, s0.f], s0.t, t_end, tol, &mut |_, y| y[0] <= guard)?;
    let states: Vec<KEState> = run.t.iter().zip(&run.y).map(|(&t, y)| KEState { u: y[0], f: y[1], t }).collect();
    let stop = if run.stopped { StopReason::Extinct } else { StopReason::Horizon };
    let extinction_time = match stop {
        StopReason::Extinct => extinction_estimate(states.last().expect("nonempty"), p),
        StopReason::Horizon => None,
    };
    Ok(KETrace { params: *p, states, stop, extinction_time })
}

/// States at the given increasing times.
pub fn ke_sample(s0: &KEState, p: &KEParams, times: &[f64], tol: f64) -> Result<Vec<KEState>> {
    ke_rhs(s0, p)?;
    let rhs = |_t: f64, y: [f64; 2]| if y[0] > 0.0 { rhs_raw(y[0], y[1], p) } else { [f64::NAN; 2] };
    let ys = adaptive::sample(&rhs, [s0.u, s0.f], s0.t, times, tol)?;
    Ok(times.iter().zip(ys).map(|(&t, y)| KEState { u: y[0], f: y[1], t }).collect())
}

/// Lauret-system states at the given increasing times.
pub fn lauret_sample(l0: &LauretState, times: &[f64], tol: f64) -> Result<Vec<LauretState>> {
    let rhs = |_t: f64, y: [f64; 2]| {
        let (da, db) = lauret_rhs(&LauretState { a: y[0], b: y[1], t: 0.0 });
        [da, db]
    };
    let ys = adaptive::sample(&rhs, [l0.a, l0.b], l0.t, times, tol)?;
    Ok(times.iter().zip(ys).map(|(&t, y)| LauretState { a: y[0], b: y[1], t }).collect())
}

/// Largest |v − v₀|/|v₀| over a series.
pub fn relative_drift(values: &[f64]) -> f64 {
    let Some(&v0) = values.first() else { return 0.0 };
    values.iter().map(|v| (v - v0).abs() / v0.abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(u: f64, f: f64) -> KEState {
        KEState::new(u, f).unwrap()
    }

    #[test]
    fn rhs_values() {
        let (du, df) = ke_rhs(&st(0.5, 0.0), &KEParams::new(1, 2.0).unwrap()).unwrap();
        assert_eq!((du, df), (-2.0, 2.0));
        let (du, df) = ke_rhs(&st(1.0, 0.0), &KEParams::new(1, -4.0).unwrap()).unwrap();
        assert_eq!((du, df), (9.0, 0.5));
        let bad = KEState { u: 0.0, f: 0.0, t: 0.0 };
        assert!(ke_rhs(&bad, &KEParams::new(1, 0.0).unwrap()).is_err());
        assert!(KEParams::new(0, 1.0).is_err());
    }

    #[test]
    fn psi_values_and_errors() {
        let p = KEParams::new(1, 2.0).unwrap();
        assert!((psi(&st(2.0, 0.0), &p).unwrap() - 3f64.sqrt() / 2.0).abs() < 1e-15);
        let sl = KEParams::new(1, -4.0).unwrap();
        assert!((psi(&st(1.0, 0.0), &sl).unwrap() - 5f64.sqrt() / 2.0).abs() < 1e-15);
        let sol = KEParams::new(1, -1.0).unwrap();
        assert!((psi(&st(1.0, 0.0), &sol).unwrap().powi(2) - 2.0).abs() < 1e-15);
        assert!(matches!(psi(&st(1.0, 0.0), &KEParams::new(1, 0.0).unwrap()), Err(Error::LambdaZero)));
        // berger(2, 1): u = 1/2, e^{-2f} = 4
        let s = st(0.5, -(2f64).ln());
        assert!(matches!(psi(&s, &p), Err(Error::NegativeBase { .. })));
        assert!(psi_cleared(&s, &p).unwrap() < 0.0);
    }

    #[test]
    fn cleared_form_is_power_of_psi() {
        let p = KEParams::new(3, 1.5).unwrap();
        let s = st(4.0, 0.3);
        let n = 3.0;
        let lhs = psi(&s, &p).unwrap().powf((n + 1.0) / n);
        assert!((lhs - psi_cleared(&s, &p).unwrap()).abs() < 1e-12 * lhs);
    }

    #[test]
    fn closed_form_values() {
        let p = KEParams::new(1, 0.0).unwrap();
        let s = closed_form_flat(0.0, &p, 1.7, -0.4).unwrap();
        assert!((s.u - 1.7).abs() < 1e-15 && (s.f + 0.4).abs() < 1e-15);
        let s = closed_form_flat(7.0 / 3.0, &p, 1.0, 0.0).unwrap();
        assert!((s.u - 2.0).abs() < 1e-14);
        assert!((s.f - 8f64.ln() / 6.0).abs() < 1e-14);
        assert!(closed_form_flat(1.0, &KEParams::new(1, 1.0).unwrap(), 1.0, 0.0).is_err());
    }

    #[test]
    fn closed_form_solves_ode() {
        for n in 1..=3 {
            let p = KEParams::new(n, 0.0).unwrap();
            let (u0, c, t, h) = (1.3, 0.2, 0.9, 1e-5);
            let s = closed_form_flat(t, &p, u0, c).unwrap();
            let sp = closed_form_flat(t + h, &p, u0, c).unwrap();
            let sm = closed_form_flat(t - h, &p, u0, c).unwrap();
            let (du, df) = ke_rhs(&s, &p).unwrap();
            assert!(((sp.u - sm.u) / (2.0 * h) - du).abs() < 1e-8);
            assert!(((sp.f - sm.f) / (2.0 * h) - df).abs() < 1e-8);
        }
    }

    #[test]
    fn lauret_values() {
        let (da, db) = lauret_rhs(&LauretState { a: 2.0, b: 4.0, t: 0.0 });
        assert_eq!((da, db), (4.0, 16.0));
        let l = to_lauret(&st(2.0, 0.0), &KEParams::new(1, 2.0).unwrap());
        assert_eq!((l.a, l.b), (0.5, 1.0));
        assert!((lambda_invariant(&l).unwrap() - 12.0).abs() < 1e-13);
        assert!(lambda_invariant(&LauretState { a: 0.0, b: 1.0, t: 0.0 }).is_err());
    }

    #[test]
    fn flat_connection_values() {
        assert_eq!(flat_connection_flow(5.0, 1.2, 0.0), 1.2);
        assert_eq!(flat_connection_flow(0.125, 1.0, 2.0), 0.5);
        assert_eq!(flat_connection_flow(0.25, 1.0, 2.0), 0.0);
        assert_eq!(flat_connection_flow(3.0, 1.0, -1.0), 7.0);
    }

    #[test]
    fn round_sphere_runs_to_extinction() {
        let p = KEParams::new(1, 2.0).unwrap();
        let tr = ke_integrate(&st(0.5, 0.0), &p, 1.0, DEFAULT_TOL).unwrap();
        assert_eq!(tr.stop, StopReason::Extinct);
        assert!((tr.extinction_time.unwrap() - 0.25).abs() < 1e-6);
        for s in tr.until(0.225) {
            assert!((s.u - (0.5 - 2.0 * s.t)).abs() < 1e-6);
            assert!((s.fiber() - (1.0 - 4.0 * s.t)).abs() < 1e-6);
        }
    }

    #[test]
    fn negative_lambda_is_immortal() {
        let p = KEParams::new(1, -4.0).unwrap();
        let tr = ke_integrate(&st(4.0, 0.0), &p, 100.0, DEFAULT_TOL).unwrap();
        assert_eq!(tr.stop, StopReason::Horizon);
        assert!((tr.last().t - 100.0).abs() < 1e-12);
    }
}
