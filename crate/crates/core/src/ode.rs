//! Explicit Runge-Kutta integrators for small fixed-size systems.
//!
//! Both methods step from `t0` to the last requested sample time, clipping
//! steps so that every sample time is hit exactly.

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Classical fourth-order Runge-Kutta with a fixed step.
    Rk4 { step: f64 },
    /// Dormand-Prince 5(4) with local error control.
    Rk45 { abs_tol: f64, rel_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub max_steps: usize,
}

impl IntegratorConfig {
    pub const DEFAULT_MAX_STEPS: usize = 2_000_000;

    pub fn rk4(step: f64) -> Self {
        Self {
            method: Method::Rk4 { step },
            max_steps: Self::DEFAULT_MAX_STEPS,
        }
    }

    pub fn rk45(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            method: Method::Rk45 { abs_tol, rel_tol },
            max_steps: Self::DEFAULT_MAX_STEPS,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self.method {
            Method::Rk4 { step } => positive("RK4 step", step)?,
            Method::Rk45 { abs_tol, rel_tol } => {
                positive("absolute tolerance", abs_tol)?;
                positive("relative tolerance", rel_tol)?;
            }
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self::rk45(1e-12, 1e-12)
    }
}

/// Integrates `x' = f(t, x)` from `(t0, x0)` and returns the state at each
/// of `times`, which must be non-decreasing and not before `t0`.
pub fn solve<const N: usize, F>(
    mut f: F,
    t0: f64,
    x0: [f64; N],
    times: &[f64],
    config: &IntegratorConfig,
) -> Result<Vec<[f64; N]>, Error>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N], Error>,
{
    config.validate()?;
    if !t0.is_finite() || x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("initial condition must be finite".into()));
    }
    let mut prev = t0;
    for &t in times {
        if !(t.is_finite() && t >= prev) {
            return Err(Error::Config(format!("sample times must be finite and non-decreasing from {t0}, got {t}")));
        }
        prev = t;
    }
    match config.method {
        Method::Rk4 { step } => rk4(&mut f, t0, x0, times, step, config.max_steps),
        Method::Rk45 { abs_tol, rel_tol } => dopri5(&mut f, t0, x0, times, abs_tol, rel_tol, config.max_steps),
    }
}

fn axpy<const N: usize>(x: &[f64; N], terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *x;
    for (c, v) in terms {
        for i in 0..N {
            out[i] += c * v[i];
        }
    }
    out
}

fn check_finite<const N: usize>(x: &[f64; N], t: f64) -> Result<(), Error> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::StepUnderflow { tau: t })
    }
}

/// Steps shorter than this relative to `|t|` count as underflow.
fn min_step(t: f64) -> f64 {
    16.0 * f64::EPSILON * t.abs().max(1.0)
}

fn rk4<const N: usize, F>(
    f: &mut F,
    t0: f64,
    x0: [f64; N],
    times: &[f64],
    step: f64,
    max_steps: usize,
) -> Result<Vec<[f64; N]>, Error>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N], Error>,
{
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut x) = (t0, x0);
    let mut steps = 0usize;
    for &target in times {
        while target - t > min_step(t) {
            if steps == max_steps {
                return Err(Error::StepLimit { max_steps, tau: t });
            }
            let h = step.min(target - t);
            let k1 = f(t, &x)?;
            let k2 = f(t + 0.5 * h, &axpy(&x, &[(0.5 * h, &k1)]))?;
            let k3 = f(t + 0.5 * h, &axpy(&x, &[(0.5 * h, &k2)]))?;
            let k4 = f(t + h, &axpy(&x, &[(h, &k3)]))?;
            x = axpy(&x, &[(h / 6.0, &k1), (h / 3.0, &k2), (h / 3.0, &k3), (h / 6.0, &k4)]);
            t = if h == target - t { target } else { t + h };
            steps += 1;
            check_finite(&x, t)?;
        }
        t = target;
        out.push(x);
    }
    Ok(out)
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth- minus fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn error_norm<const N: usize>(err: &[f64; N], x: &[f64; N], xn: &[f64; N], atol: f64, rtol: f64) -> f64 {
    let s: f64 = (0..N)
        .map(|i| {
            let sc = atol + rtol * x[i].abs().max(xn[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (s / N as f64).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn dopri5<const N: usize, F>(
    f: &mut F,
    t0: f64,
    x0: [f64; N],
    times: &[f64],
    atol: f64,
    rtol: f64,
    max_steps: usize,
) -> Result<Vec<[f64; N]>, Error>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N], Error>,
{
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut x) = (t0, x0);
    let mut k1 = f(t, &x)?;

    // Initial step from the size of x and x'.
    let d0 = error_norm(&x, &x, &x, atol, rtol);
    let d1 = error_norm(&k1, &x, &x, atol, rtol);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let mut steps = 0usize;
    let mut last_rejected = false;

    for &target in times {
        while target - t > min_step(t) {
            if steps == max_steps {
                return Err(Error::StepLimit { max_steps, tau: t });
            }
            let clipped = h >= target - t;
            let hs = if clipped { target - t } else { h };
            let k2 = f(t + C2 * hs, &axpy(&x, &[(hs * A21, &k1)]))?;
            let k3 = f(t + C3 * hs, &axpy(&x, &[(hs * A31, &k1), (hs * A32, &k2)]))?;
            let k4 = f(t + C4 * hs, &axpy(&x, &[(hs * A41, &k1), (hs * A42, &k2), (hs * A43, &k3)]))?;
            let k5 = f(
                t + C5 * hs,
                &axpy(&x, &[(hs * A51, &k1), (hs * A52, &k2), (hs * A53, &k3), (hs * A54, &k4)]),
            )?;
            let k6 = f(
                t + hs,
                &axpy(&x, &[(hs * A61, &k1), (hs * A62, &k2), (hs * A63, &k3), (hs * A64, &k4), (hs * A65, &k5)]),
            )?;
            let xn = axpy(&x, &[(hs * B1, &k1), (hs * B3, &k3), (hs * B4, &k4), (hs * B5, &k5), (hs * B6, &k6)]);
            let tn = if clipped { target } else { t + hs };
            let k7 = f(tn, &xn)?;
            let err = axpy(
                &[0.0; N],
                &[(hs * E1, &k1), (hs * E3, &k3), (hs * E4, &k4), (hs * E5, &k5), (hs * E6, &k6), (hs * E7, &k7)],
            );
            let en = error_norm(&err, &x, &xn, atol, rtol);
            steps += 1;
            if !en.is_finite() {
                h = 0.1 * hs;
                last_rejected = true;
            } else if en <= 1.0 {
                t = tn;
                x = xn;
                k1 = k7;
                let mut factor = (0.9 * en.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
                if last_rejected {
                    factor = factor.min(1.0);
                }
                last_rejected = false;
                // A step clipped to a sample time says little about the
                // natural step size; keep the previous one if larger.
                h = if clipped { h.max(hs * factor) } else { hs * factor };
            } else {
                h = hs * (0.9 * en.powf(-0.2)).max(0.2);
                last_rejected = true;
            }
            if h < min_step(t) {
                return Err(Error::StepUnderflow { tau: t });
            }
        }
        t = target;
        out.push(x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(_t: f64, x: &[f64; 2]) -> Result<[f64; 2], Error> {
        Ok([x[1], -x[0]])
    }

    #[test]
    fn rk45_harmonic_oscillator() {
        let times: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let xs = solve(oscillator, 0.0, [1.0, 0.0], &times, &IntegratorConfig::rk45(1e-12, 1e-12)).unwrap();
        for (t, x) in times.iter().zip(&xs) {
            assert!((x[0] - t.cos()).abs() < 1e-10, "t = {t}: {}", x[0] - t.cos());
            assert!((x[1] + t.sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |h: f64| {
            let x = solve(oscillator, 0.0, [1.0, 0.0], &[4.0], &IntegratorConfig::rk4(h)).unwrap()[0];
            (x[0] - 4f64.cos()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio / 16.0 - 1.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn samples_are_hit_exactly_and_repeats_allowed() {
        let xs = solve(|t, _x: &[f64; 1]| Ok([2.0 * t]), 0.0, [0.0], &[0.0, 0.3, 0.3, 1.7], &IntegratorConfig::default()).unwrap();
        assert_eq!(xs[0], [0.0]);
        assert!((xs[1][0] - 0.09).abs() < 1e-14);
        assert_eq!(xs[1], xs[2]);
        assert!((xs[3][0] - 2.89).abs() < 1e-13);
    }

    #[test]
    fn step_limit_and_bad_input() {
        let mut cfg = IntegratorConfig::rk4(0.1);
        cfg.max_steps = 5;
        assert!(matches!(
            solve(oscillator, 0.0, [1.0, 0.0], &[1.0], &cfg),
            Err(Error::StepLimit { max_steps: 5, .. })
        ));
        assert!(solve(oscillator, 0.0, [1.0, 0.0], &[1.0, 0.5], &IntegratorConfig::default()).is_err());
        assert!(solve(oscillator, 0.0, [1.0, 0.0], &[1.0], &IntegratorConfig::rk45(0.0, 1e-9)).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        // x' = x^2 from x(0) = 1 blows up at t = 1.
        let r = solve(|_t, x: &[f64; 1]| Ok([x[0] * x[0]]), 0.0, [1.0], &[2.0], &IntegratorConfig::default());
        assert!(matches!(r, Err(Error::StepUnderflow { .. }) | Err(Error::StepLimit { .. })), "{r:?}");
    }

    #[test]
    fn errors_from_the_field_propagate() {
        let r = solve(
            |t, _x: &[f64; 1]| if t > 0.5 { Err(Error::Internal("stop".into())) } else { Ok([1.0]) },
            0.0,
            [0.0],
            &[1.0],
            &IntegratorConfig::default(),
        );
        assert_eq!(r, Err(Error::Internal("stop".into())));
    }
}
