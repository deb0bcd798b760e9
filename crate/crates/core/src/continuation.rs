//! Verification of averaging predictions on the full perturbed system.
//!
//! The perturbed pendulum is integrated directly and its period map
//! `x -> Phi_{pT}(x)` is solved for a fixed point by damped Newton iteration,
//! starting from the initial condition predicted by a zero of the averaged
//! function.

use std::f64::consts::SQRT_2;

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;

use crate::model::{Mode, PerturbationSpec, State4};
use crate::ode::{self, IntegratorConfig};
use crate::Error;

/// Default values of epsilon for the convergence study.
pub const EPSILON_LADDER: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1e-3];

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<(f64, State4)>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&(f64, State4)> {
        self.samples.last()
    }
}

/// Integrator settings scaled to `eps`: tolerance `min(1e-12, eps * 1e-9)`.
pub fn integrator_for(eps: f64) -> IntegratorConfig {
    let tol = (eps.abs() * 1e-9).min(1e-12);
    IntegratorConfig::rk45(tol, tol)
}

/// States of the perturbed system at the given (non-decreasing) times,
/// starting from `x0` at `times[0]`.
pub fn integrate_at(
    spec: &PerturbationSpec,
    eps: f64,
    x0: State4,
    times: &[f64],
    config: &IntegratorConfig,
) -> Result<Trajectory, Error> {
    let Some(&t0) = times.first() else {
        return Ok(Trajectory { samples: Vec::new() });
    };
    let xs = ode::solve(
        |tau, x: &[f64; 4]| Ok(spec.vector_field(tau, &State4::from_array(*x), eps)?.to_array()),
        t0,
        x0.to_array(),
        times,
        config,
    )?;
    Ok(Trajectory {
        samples: times.iter().zip(xs).map(|(&t, x)| (t, State4::from_array(x))).collect(),
    })
}

/// Integrates over `span` and returns `samples` equally spaced states,
/// endpoints included (a single sample is the initial state).
pub fn integrate(
    spec: &PerturbationSpec,
    eps: f64,
    x0: State4,
    span: (f64, f64),
    config: &IntegratorConfig,
    samples: usize,
) -> Result<Trajectory, Error> {
    let (a, b) = span;
    if !(a.is_finite() && b.is_finite() && b >= a) {
        return Err(Error::Config(format!("invalid time span [{a}, {b}]")));
    }
    integrate_at(spec, eps, x0, &sample_times(a, b, samples), config)
}

fn sample_times(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// Initial condition of the unperturbed orbit through the averaging zero
/// `alpha_star`: position and velocity of the closed-form solution at 0.
pub fn predicted_initial_state(mode: Mode, alpha_star: [f64; 2]) -> State4 {
    let [a, b] = alpha_star;
    let w = mode.omega();
    // Position a cos(w t) + b sin(w t) has derivative w b at t = 0.
    let (c1, c2) = match mode {
        Mode::Mode1 => (1.0 / (4.0 - 2.0 * SQRT_2).sqrt(), 1.0 / (2.0 - SQRT_2).sqrt()),
        Mode::Mode2 => (-1.0 / (4.0 + 2.0 * SQRT_2).sqrt(), 1.0 / (2.0 + SQRT_2).sqrt()),
    };
    State4::new(c1 * a, c1 * w * b, c2 * a, c2 * w * b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    /// Required `|Phi(x) - x|`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Largest accepted condition number of `Phi'(x) - I`.
    pub max_condition: f64,
    /// Forward-difference step, relative to `max(1, |x|)`.
    pub fd_step: f64,
    /// Number of orbit samples recorded over one period.
    pub samples: usize,
    /// `None` selects [`integrator_for`] at the shooting epsilon.
    pub integrator: Option<IntegratorConfig>,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iterations: 30,
            max_condition: 1e12,
            fd_step: 1e-7,
            samples: 257,
            integrator: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    pub epsilon: f64,
    pub period: f64,
    pub initial_state: State4,
    /// `|x(period) - x(0)|`.
    pub residual: f64,
    pub samples: Vec<(f64, State4)>,
    pub predicted_initial: State4,
    pub distance_to_prediction: f64,
    pub iterations: usize,
    /// Condition number of `Phi'(x) - I` at the last Newton step.
    pub condition: f64,
    pub residual_history: Vec<f64>,
}

fn displacement(
    spec: &PerturbationSpec,
    eps: f64,
    x: &Vector4<f64>,
    period: f64,
    config: &IntegratorConfig,
) -> Result<Vector4<f64>, Error> {
    let end = integrate_at(spec, eps, State4::from_vector(x), &[0.0, period], config)?;
    Ok(end.samples[1].1.to_vector() - x)
}

fn condition_number(j: &Matrix4<f64>) -> f64 {
    let sv = j.singular_values();
    let (max, min) = (sv.max(), sv.min());
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Finds a `period`-periodic orbit of the perturbed system near `guess`.
///
/// The guess is recorded as the prediction the orbit is measured against.
pub fn shoot_periodic(
    spec: &PerturbationSpec,
    eps: f64,
    guess: State4,
    period: f64,
    opts: &ShootingOptions,
) -> Result<PeriodicOrbit, Error> {
    if eps == 0.0 {
        return Err(Error::IllConditioned { condition: f64::INFINITY });
    }
    if !eps.is_finite() {
        return Err(Error::Config(format!("epsilon must be finite, got {eps}")));
    }
    if !guess.is_finite() {
        return Err(Error::Config("shooting guess must be finite".into()));
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::Config(format!("period must be positive, got {period}")));
    }
    let config = opts.integrator.unwrap_or_else(|| integrator_for(eps));
    config.validate()?;

    let mut x = guess.to_vector();
    let mut r = displacement(spec, eps, &x, period, &config)?;
    let mut rn = r.norm();
    let mut history = vec![rn];
    let mut condition = f64::NAN;
    let mut iterations = 0;

    while rn > opts.tol {
        if iterations == opts.max_iterations {
            return Err(Error::Shooting(format!(
                "no convergence after {iterations} iterations (residual {rn:e})"
            )));
        }
        iterations += 1;

        let h = opts.fd_step * x.norm().max(1.0);
        let columns = (0..4)
            .into_par_iter()
            .map(|k| {
                let mut xp = x;
                xp[k] += h;
                displacement(spec, eps, &xp, period, &config).map(|rp| (rp - r) / h)
            })
            .collect::<Result<Vec<_>, Error>>()?;
        let j = Matrix4::from_columns(&columns);
        condition = condition_number(&j);
        if condition.is_nan() || condition > opts.max_condition {
            return Err(Error::IllConditioned { condition });
        }
        let step = j
            .lu()
            .solve(&(-r))
            .ok_or(Error::IllConditioned { condition })?;

        let mut lambda = 1.0;
        loop {
            let trial = x + step * lambda;
            let rt = displacement(spec, eps, &trial, period, &config)?;
            if rt.norm() < rn {
                x = trial;
                r = rt;
                rn = rt.norm();
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return Err(Error::Shooting(format!(
                    "line search failed at residual {rn:e} (condition {condition:e})"
                )));
            }
        }
        history.push(rn);
        log::debug!("shooting eps={eps:e} iteration {iterations}: residual {rn:e}, step {lambda}");
    }

    let initial_state = State4::from_vector(&x);
    let n = opts.samples.max(2);
    let traj = integrate(spec, eps, initial_state, (0.0, period), &config, n)?;
    Ok(PeriodicOrbit {
        epsilon: eps,
        period,
        initial_state,
        residual: rn,
        samples: traj.samples,
        predicted_initial: guess,
        distance_to_prediction: initial_state.distance(&guess),
        iterations,
        condition,
        residual_history: history,
    })
}

/// Shoots from the prediction of `alpha_star` at every epsilon in `ladder`,
/// in parallel. Results keep the ladder's order.
pub fn verify_zero(
    spec: &PerturbationSpec,
    alpha_star: [f64; 2],
    ladder: &[f64],
    opts: &ShootingOptions,
) -> Vec<Result<PeriodicOrbit, Error>> {
    let guess = predicted_initial_state(spec.mode, alpha_star);
    let period = spec.orbit_period();
    ladder
        .par_iter()
        .map(|&eps| shoot_periodic(spec, eps, guess, period, opts))
        .collect()
}

/// Symmetric Hausdorff distance between two sampled point sets.
pub fn hausdorff_distance(a: &[(f64, State4)], b: &[(f64, State4)]) -> f64 {
    let directed = |p: &[(f64, State4)], q: &[(f64, State4)]| {
        p.iter()
            .map(|(_, x)| q.iter().map(|(_, y)| x.distance(y)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}
