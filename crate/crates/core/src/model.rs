//! Small-oscillation double pendulum with equal masses and stems.
//!
//! Everything here runs in the rescaled time `tau = sqrt(g/l) t`, where the
//! unperturbed equations are
//!
//! ```text
//! th1'' = -2 th1 + th2 + eps F1(tau, th1, th1', th2, th2')
//! th2'' =  2 th1 - 2 th2 + eps F2(tau, th1, th1', th2, th2')
//! ```
//!
//! The linear part has two normal modes with frequencies `sqrt(2 -+ sqrt 2)`.
//! The modal (real Jordan) coordinates `(X, Y, Z, W)` block-diagonalise it.

use std::f64::consts::{PI, SQRT_2, TAU};

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::{EvalEnv, Expr};
use crate::Error;

/// Slow (in-phase) normal-mode frequency `sqrt(2 - sqrt 2)`.
#[inline]
pub fn omega1() -> f64 {
    (2.0 - SQRT_2).sqrt()
}

/// Fast (anti-phase) normal-mode frequency `sqrt(2 + sqrt 2)`.
#[inline]
pub fn omega2() -> f64 {
    (2.0 + SQRT_2).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Bob mass (kg). Does not enter the reduced equations.
    pub mass: f64,
    /// Stem length (m).
    pub length: f64,
    /// Gravitational acceleration (m/s^2).
    pub gravity: f64,
}

impl PhysicalParams {
    pub fn new(mass: f64, length: f64, gravity: f64) -> Result<Self, Error> {
        for (name, v) in [("mass", mass), ("length", length), ("gravity", gravity)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self {
            mass,
            length,
            gravity,
        })
    }
}

/// Result of the physical reduction: `a = g/l` and `tau = time_scale * t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reduction {
    pub a: f64,
    pub time_scale: f64,
}

impl Reduction {
    pub fn to_rescaled_time(&self, t: f64) -> f64 {
        self.time_scale * t
    }

    pub fn to_physical_time(&self, tau: f64) -> f64 {
        tau / self.time_scale
    }
}

pub fn reduce(params: &PhysicalParams) -> Reduction {
    let a = params.gravity / params.length;
    Reduction {
        a,
        time_scale: a.sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Mode1,
    Mode2,
}

impl Mode {
    pub fn omega(self) -> f64 {
        match self {
            Mode::Mode1 => omega1(),
            Mode::Mode2 => omega2(),
        }
    }

    pub fn period(self) -> f64 {
        TAU / self.omega()
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Mode1 => "mode1",
            Mode::Mode2 => "mode2",
        }
    }

    /// Index of the first modal coordinate spanning this mode's plane.
    pub(crate) fn modal_offset(self) -> usize {
        match self {
            Mode::Mode1 => 0,
            Mode::Mode2 => 2,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "mode1" | "1" => Ok(Mode::Mode1),
            "mode2" | "2" => Ok(Mode::Mode2),
            other => Err(Error::Config(format!(
                "unknown mode {other:?}; expected \"mode1\" or \"mode2\""
            ))),
        }
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// A `p:q` resonance with `p, q` positive and coprime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Resonance {
    p: u32,
    q: u32,
}

impl Resonance {
    pub fn new(p: u32, q: u32) -> Result<Self, Error> {
        if p == 0 || q == 0 {
            return Err(Error::Config(format!("resonance {p}:{q}: p and q must be positive")));
        }
        if gcd(p, q) != 1 {
            return Err(Error::Config(format!(
                "resonance {p}:{q}: p and q must be relatively prime (gcd = {})",
                gcd(p, q)
            )));
        }
        Ok(Self { p, q })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn q(&self) -> u32 {
        self.q
    }
}

impl Default for Resonance {
    fn default() -> Self {
        Self { p: 1, q: 1 }
    }
}

/// Pendulum state in the original coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State4 {
    pub th1: f64,
    pub th1d: f64,
    pub th2: f64,
    pub th2d: f64,
}

impl State4 {
    pub const ZERO: State4 = State4 {
        th1: 0.0,
        th1d: 0.0,
        th2: 0.0,
        th2d: 0.0,
    };

    pub fn new(th1: f64, th1d: f64, th2: f64, th2d: f64) -> Self {
        Self {
            th1,
            th1d,
            th2,
            th2d,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.th1, self.th1d, self.th2, self.th2d]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::from(self.to_array())
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn env(&self, tau: f64) -> EvalEnv {
        EvalEnv::new(tau, self.th1, self.th1d, self.th2, self.th2d)
    }

    pub fn distance(&self, other: &State4) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }
}

/// Modal coordinates `(X, Y, Z, W)`: `(X, Y)` spans mode 1, `(Z, W)` mode 2.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModalState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl ModalState {
    pub fn new(x: f64, y: f64, z: f64, w: f64) -> Self {
        Self { x, y, z, w }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.z, self.w]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Places `alpha` in the plane of `mode`, other coordinates zero.
    pub fn embed(mode: Mode, alpha: [f64; 2]) -> Self {
        let mut a = [0.0; 4];
        a[mode.modal_offset()] = alpha[0];
        a[mode.modal_offset() + 1] = alpha[1];
        Self::from_array(a)
    }
}

/// Linear part of the first-order system in `(th1, th1', th2, th2')`.
pub fn linear_part_original() -> Matrix4<f64> {
    #[rustfmt::skip]
    let a = Matrix4::new(
         0.0, 1.0,  0.0, 0.0,
        -2.0, 0.0,  1.0, 0.0,
         0.0, 0.0,  0.0, 1.0,
         2.0, 0.0, -2.0, 0.0,
    );
    a
}

/// Linear part in modal coordinates: two rotation generators.
pub fn linear_part_modal() -> Matrix4<f64> {
    let (w1, w2) = (omega1(), omega2());
    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0, w1,  0.0, 0.0,
        -w1, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, w2,
        0.0, 0.0, -w2, 0.0,
    );
    a
}

/// Change of variables `(X, Y, Z, W)^T = P (th1, th1', th2, th2')^T`.
pub fn modal_matrix() -> Matrix4<f64> {
    let h = 1.0 / SQRT_2;
    #[rustfmt::skip]
    let p = Matrix4::new(
         (1.0 - h).sqrt(), 0.0, (2.0 - SQRT_2).sqrt() / 2.0, 0.0,
         0.0,              h,   0.0,                         0.5,
        -(1.0 + h).sqrt(), 0.0, (2.0 + SQRT_2).sqrt() / 2.0, 0.0,
         0.0,             -h,   0.0,                         0.5,
    );
    p
}

/// Inverse change of variables, assembled row by row from the closed-form
/// back-substitution `th1 = X/sqrt(4-2 sqrt2) - Z/sqrt(2(2+sqrt2))`, etc.
pub fn inverse_modal_matrix() -> Matrix4<f64> {
    let a_x = 1.0 / (4.0 - 2.0 * SQRT_2).sqrt();
    let a_z = -1.0 / (2.0 * (2.0 + SQRT_2)).sqrt();
    let c_x = 1.0 / (2.0 - SQRT_2).sqrt();
    let c_z = 1.0 / (2.0 + SQRT_2).sqrt();
    let h = 1.0 / SQRT_2;
    #[rustfmt::skip]
    let m = Matrix4::new(
        a_x, 0.0, a_z, 0.0,
        0.0, h,   0.0, -h,
        c_x, 0.0, c_z, 0.0,
        0.0, 1.0, 0.0, 1.0,
    );
    m
}

/// Largest entry of `P * P_inv - I` for the two hard-coded matrices.
pub fn modal_consistency_error() -> f64 {
    (modal_matrix() * inverse_modal_matrix() - Matrix4::identity()).amax()
}

/// Checks that the forward and inverse modal matrices agree.
pub fn verify_modal_matrices() -> Result<(), Error> {
    let err = modal_consistency_error();
    if err > 1e-12 {
        return Err(Error::Internal(format!(
            "modal change of variables inconsistent: |P Pinv - I| = {err:e}"
        )));
    }
    Ok(())
}

pub fn modal_transform(s: &State4) -> ModalState {
    let v = modal_matrix() * s.to_vector();
    ModalState::new(v[0], v[1], v[2], v[3])
}

pub fn inverse_modal_transform(m: &ModalState) -> State4 {
    State4::from_vector(&(inverse_modal_matrix() * Vector4::from(m.to_array())))
}

/// First-order perturbed vector field in original coordinates.
pub fn vector_field_original(
    tau: f64,
    s: &State4,
    f1: &Expr,
    f2: &Expr,
    eps: f64,
) -> Result<State4, Error> {
    let mut d = State4::new(s.th1d, -2.0 * s.th1 + s.th2, s.th2d, 2.0 * s.th1 - 2.0 * s.th2);
    if eps != 0.0 {
        let env = s.env(tau);
        d.th1d += eps * f1.eval(&env)?;
        d.th2d += eps * f2.eval(&env)?;
    }
    Ok(d)
}

/// Closed-form unperturbed solution lying in the plane of `mode`.
///
/// `alpha` is `(X0, Y0)` for mode 1 and `(Z0, W0)` for mode 2. The result is
/// `T_mode`-periodic in `tau`.
pub fn unperturbed_orbit(mode: Mode, alpha: [f64; 2], tau: f64) -> State4 {
    let [a0, b0] = alpha;
    let w = mode.omega();
    let (s, c) = (w * tau).sin_cos();
    let phase = a0 * c + b0 * s;
    let quad = b0 * c - a0 * s;
    match mode {
        Mode::Mode1 => State4::new(
            phase / (4.0 - 2.0 * SQRT_2).sqrt(),
            quad / SQRT_2,
            phase / (2.0 - SQRT_2).sqrt(),
            quad,
        ),
        Mode::Mode2 => State4::new(
            -phase / (4.0 + 2.0 * SQRT_2).sqrt(),
            -quad / SQRT_2,
            phase / (2.0 + SQRT_2).sqrt(),
            quad,
        ),
    }
}

/// Fundamental matrix of the unperturbed modal system with `M(0) = I`.
pub fn fundamental_matrix(tau: f64) -> Matrix4<f64> {
    let (s1, c1) = (omega1() * tau).sin_cos();
    let (s2, c2) = (omega2() * tau).sin_cos();
    #[rustfmt::skip]
    let m = Matrix4::new(
        c1,  s1,  0.0, 0.0,
        -s1, c1,  0.0, 0.0,
        0.0, 0.0, c2,  s2,
        0.0, 0.0, -s2, c2,
    );
    m
}

/// Inverse of [`fundamental_matrix`]; each block is a rotation.
pub fn fundamental_matrix_inverse(tau: f64) -> Matrix4<f64> {
    fundamental_matrix(tau).transpose()
}

/// The experiment definition: perturbation, mode and resonance.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub f1: Expr,
    pub f2: Expr,
    pub mode: Mode,
    pub resonance: Resonance,
    /// Only consumed by the continuation stage.
    pub epsilon: f64,
}

pub const PERIODICITY_TOL: f64 = 1e-9;
const AUDIT_GRID: usize = 32;
const AUDIT_STATES: usize = 16;
const AUDIT_SEED: u64 = 0x5eed_0d0b_1e00;

/// Worst mismatch found by [`periodicity_audit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicityReport {
    pub max_defect: f64,
    pub tau: f64,
    pub state: State4,
}

impl PerturbationSpec {
    /// Builds a spec and runs the periodicity audit.
    pub fn new(f1: Expr, f2: Expr, mode: Mode, resonance: Resonance) -> Result<Self, Error> {
        let spec = Self {
            f1,
            f2,
            mode,
            resonance,
            epsilon: 0.0,
        };
        let report = spec.periodicity_audit()?;
        if report.max_defect > PERIODICITY_TOL {
            return Err(Error::Periodicity {
                period: spec.forcing_period(),
                defect: report.max_defect,
                tau: report.tau,
            });
        }
        Ok(spec)
    }

    pub fn parse(f1: &str, f2: &str, mode: Mode, resonance: Resonance) -> Result<Self, Error> {
        Self::new(Expr::parse(f1)?, Expr::parse(f2)?, mode, resonance)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Claimed period of `F_k` in `tau`: `p T / q`.
    pub fn forcing_period(&self) -> f64 {
        f64::from(self.resonance.p) * self.mode.period() / f64::from(self.resonance.q)
    }

    /// Common period of the forcing and the unperturbed orbits: `p T`.
    pub fn orbit_period(&self) -> f64 {
        f64::from(self.resonance.p) * self.mode.period()
    }

    pub fn eval_f(&self, tau: f64, s: &State4) -> Result<(f64, f64), Error> {
        let env = s.env(tau);
        Ok((self.f1.eval(&env)?, self.f2.eval(&env)?))
    }

    pub fn vector_field(&self, tau: f64, s: &State4, eps: f64) -> Result<State4, Error> {
        vector_field_original(tau, s, &self.f1, &self.f2, eps)
    }

    /// Samples `|F_k(tau + pT/q, s) - F_k(tau, s)|` on a fixed grid of times
    /// and pseudo-random states in `[-1, 1]^4`.
    pub fn periodicity_audit(&self) -> Result<PeriodicityReport, Error> {
        let period = self.forcing_period();
        let mut rng = ChaCha8Rng::seed_from_u64(AUDIT_SEED);
        let mut worst = PeriodicityReport {
            max_defect: 0.0,
            tau: 0.0,
            state: State4::ZERO,
        };
        for _ in 0..AUDIT_STATES {
            let s = State4::from_array(std::array::from_fn(|_| rng.gen_range(-1.0..=1.0)));
            for i in 0..AUDIT_GRID {
                let tau = period * i as f64 / AUDIT_GRID as f64;
                let (a1, a2) = self.eval_f(tau, &s)?;
                let (b1, b2) = self.eval_f(tau + period, &s)?;
                let defect = (a1 - b1).abs().max((a2 - b2).abs());
                if defect > worst.max_defect {
                    worst = PeriodicityReport {
                        max_defect: defect,
                        tau,
                        state: s,
                    };
                }
            }
        }
        Ok(worst)
    }
}

/// `4 sin^2(sqrt2 pi)`, the determinant of the non-resonant block of
/// `M^-1(0) - M^-1(T_1)`.
pub fn resonant_block_determinant() -> f64 {
    4.0 * (SQRT_2 * PI).sin().powi(2)
}
