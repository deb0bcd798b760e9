//! First-order averaging for periodic orbits on a manifold of the
//! unperturbed flow.
//!
//! For `x' = G0(t, x) + eps G1(t, x) + O(eps^2)` whose unperturbed part has a
//! `k`-dimensional family of `T`-periodic solutions `x(t, z_alpha)`, the
//! bifurcation function is
//!
//! ```text
//! G(alpha) = xi( (1/T) int_0^T M^-1(t) G1(t, x(t, z_alpha)) dt )
//! ```
//!
//! where `M` is a fundamental matrix of the linearisation along the orbit and
//! `xi` keeps the first `k` coordinates. Simple zeros of `G` continue to
//! periodic orbits for small `eps`, provided `M^-1(0) - M^-1(T)` has a zero
//! upper-right `k x (n-k)` block and an invertible lower-right block.
//!
//! [`AveragingProblem`] states that setup generically; [`PendulumProblem`] is
//! the double pendulum instance in modal coordinates.

use std::f64::consts::SQRT_2;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector, Matrix4};

use crate::model::{
    fundamental_matrix, inverse_modal_transform, unperturbed_orbit, ModalState, Mode,
    PerturbationSpec,
};
use crate::quadrature::{integrate, QuadOptions};
use crate::zeros::PlanarMap;
use crate::Error;

pub const PERIODICITY_TOL: f64 = 1e-9;
pub const BLOCK_ZERO_TOL: f64 = 1e-10;
pub const BLOCK_DET_MIN: f64 = 1e-8;

pub trait AveragingProblem: Sync {
    /// Phase-space dimension `n`.
    fn dimension(&self) -> usize;
    /// Dimension `k` of the manifold of periodic orbits.
    fn manifold_dimension(&self) -> usize;
    /// Common period `T` of the perturbation and the unperturbed orbits.
    fn period(&self) -> f64;
    /// `z_alpha = (alpha, beta(alpha))`.
    fn embed(&self, alpha: &[f64]) -> DVector<f64>;
    /// Unperturbed solution with `x(0, z) = z`.
    fn flow(&self, t: f64, z: &DVector<f64>) -> DVector<f64>;
    /// A fundamental matrix of the variational equation along `x(t, z)`.
    fn fundamental_matrix(&self, t: f64, z: &DVector<f64>) -> DMatrix<f64>;
    fn fundamental_matrix_inverse(&self, t: f64, z: &DVector<f64>) -> Option<DMatrix<f64>> {
        self.fundamental_matrix(t, z).try_inverse()
    }
    /// First-order perturbation `G1(t, x)`.
    fn perturbation(&self, t: f64, x: &DVector<f64>) -> Result<DVector<f64>, Error>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    /// `|x(T, z) - x(0, z)|`.
    pub periodicity_defect: f64,
    /// Largest entry of the upper-right `k x (n-k)` block.
    pub upper_right_max: f64,
    /// Determinant of the lower-right `(n-k) x (n-k)` block.
    pub delta_det: f64,
}

/// Checks the periodicity and matrix hypotheses at `alpha`.
pub fn check_hypotheses<P: AveragingProblem + ?Sized>(
    problem: &P,
    alpha: &[f64],
) -> Result<HypothesisCheck, Error> {
    let n = problem.dimension();
    let k = problem.manifold_dimension();
    if alpha.len() != k || k == 0 || k > n {
        return Err(Error::Config(format!(
            "alpha has {} components; manifold dimension is {k} in R^{n}",
            alpha.len()
        )));
    }
    let z = problem.embed(alpha);
    let period = problem.period();
    let periodicity_defect = (problem.flow(period, &z) - problem.flow(0.0, &z)).norm();
    let singular = || Error::MatrixCondition("fundamental matrix is singular".into());
    let m0 = problem.fundamental_matrix_inverse(0.0, &z).ok_or_else(singular)?;
    let mt = problem.fundamental_matrix_inverse(period, &z).ok_or_else(singular)?;
    let delta = m0 - mt;
    let upper_right_max = delta.view((0, k), (k, n - k)).amax();
    let delta_det = if n == k {
        1.0
    } else {
        delta.view((k, k), (n - k, n - k)).clone_owned().determinant()
    };
    let check = HypothesisCheck {
        periodicity_defect,
        upper_right_max,
        delta_det,
    };
    if periodicity_defect > PERIODICITY_TOL {
        return Err(Error::MatrixCondition(format!(
            "unperturbed orbit is not {period}-periodic (defect {periodicity_defect:e})"
        )));
    }
    if upper_right_max > BLOCK_ZERO_TOL {
        return Err(Error::MatrixCondition(format!(
            "upper-right block of M^-1(0) - M^-1(T) is not zero (max {upper_right_max:e})"
        )));
    }
    if delta_det.abs() <= BLOCK_DET_MIN {
        return Err(Error::MatrixCondition(format!(
            "lower-right block of M^-1(0) - M^-1(T) is singular (det {delta_det:e})"
        )));
    }
    Ok(check)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Averaged {
    pub value: Vec<f64>,
    pub panels: usize,
}

/// Evaluates the bifurcation function at `alpha`; `opts.tol` bounds the
/// absolute quadrature error per component.
pub fn averaged_function<P: AveragingProblem + ?Sized>(
    problem: &P,
    alpha: &[f64],
    opts: &QuadOptions,
) -> Result<Averaged, Error> {
    check_hypotheses(problem, alpha)?;
    averaged_function_unchecked(problem, alpha, opts)
}

fn averaged_function_unchecked<P: AveragingProblem + ?Sized>(
    problem: &P,
    alpha: &[f64],
    opts: &QuadOptions,
) -> Result<Averaged, Error> {
    let k = problem.manifold_dimension();
    let period = problem.period();
    let z = problem.embed(alpha);
    let r = integrate(
        |t, out| {
            let x = problem.flow(t, &z);
            let g = problem.perturbation(t, &x)?;
            let m_inv = problem
                .fundamental_matrix_inverse(t, &z)
                .ok_or_else(|| Error::MatrixCondition(format!("fundamental matrix singular at t = {t}")))?;
            let v = m_inv * g;
            for (o, vi) in out.iter_mut().zip(v.iter().take(k)) {
                *o = vi / period;
            }
            Ok(())
        },
        0.0,
        period,
        k,
        opts,
    )?;
    Ok(Averaged {
        value: r.value,
        panels: r.panels,
    })
}

/// The perturbed double pendulum in modal coordinates, ordered so that the
/// plane of the selected mode comes first.
#[derive(Debug, Clone, Copy)]
pub struct PendulumProblem<'a> {
    spec: &'a PerturbationSpec,
}

impl<'a> PendulumProblem<'a> {
    pub fn new(spec: &'a PerturbationSpec) -> Self {
        Self { spec }
    }

    pub fn spec(&self) -> &PerturbationSpec {
        self.spec
    }

    /// Maps ordered coordinates to modal index.
    fn modal_index(&self, i: usize) -> usize {
        match self.spec.mode {
            Mode::Mode1 => i,
            Mode::Mode2 => (i + 2) % 4,
        }
    }

    fn modal_of(&self, v: &DVector<f64>) -> ModalState {
        let mut a = [0.0; 4];
        for (i, vi) in v.iter().enumerate() {
            a[self.modal_index(i)] = *vi;
        }
        ModalState::from_array(a)
    }

    fn ordered(&self, a: [f64; 4]) -> DVector<f64> {
        DVector::from_fn(4, |i, _| a[self.modal_index(i)])
    }

    fn reorder(&self, m: &Matrix4<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(4, 4, |i, j| m[(self.modal_index(i), self.modal_index(j))])
    }
}

impl AveragingProblem for PendulumProblem<'_> {
    fn dimension(&self) -> usize {
        4
    }

    fn manifold_dimension(&self) -> usize {
        2
    }

    fn period(&self) -> f64 {
        self.spec.orbit_period()
    }

    fn embed(&self, alpha: &[f64]) -> DVector<f64> {
        DVector::from_vec(vec![alpha[0], alpha[1], 0.0, 0.0])
    }

    fn flow(&self, t: f64, z: &DVector<f64>) -> DVector<f64> {
        let modal = fundamental_matrix(t) * nalgebra::Vector4::from(self.modal_of(z).to_array());
        self.ordered([modal[0], modal[1], modal[2], modal[3]])
    }

    fn fundamental_matrix(&self, t: f64, _z: &DVector<f64>) -> DMatrix<f64> {
        self.reorder(&fundamental_matrix(t))
    }

    fn fundamental_matrix_inverse(&self, t: f64, _z: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.reorder(&fundamental_matrix(t).transpose()))
    }

    fn perturbation(&self, t: f64, x: &DVector<f64>) -> Result<DVector<f64>, Error> {
        let state = inverse_modal_transform(&self.modal_of(x));
        let (f1, f2) = self.spec.eval_f(t, &state)?;
        Ok(self.ordered([
            0.0,
            0.5 * (SQRT_2 * f1 + f2),
            0.0,
            0.5 * (f2 - SQRT_2 * f1),
        ]))
    }
}

/// Both normalisations of a mode's bifurcation function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeAverages {
    /// Averaging-operator form, `xi((1/pT) int M^-1 G1)`.
    pub canonical: [f64; 2],
    /// Bare sine/cosine integrals over `[0, pT]`.
    pub raw: [f64; 2],
}

/// Factors with `canonical = factor * raw` componentwise: `(-1/(2pT), 1/(2pT))`.
///
/// For `p = 1` these are `-+ omega / (4 pi)`.
pub fn raw_to_canonical(spec: &PerturbationSpec) -> [f64; 2] {
    let c = 0.5 / spec.orbit_period();
    [-c, c]
}

/// Sine and cosine moments of the projected forcing along the closed-form
/// unperturbed orbit of the spec's mode.
pub fn raw_averages(spec: &PerturbationSpec, alpha: [f64; 2], opts: &QuadOptions) -> Result<[f64; 2], Error> {
    let mode = spec.mode;
    let omega = mode.omega();
    let sign1 = match mode {
        Mode::Mode1 => SQRT_2,
        Mode::Mode2 => -SQRT_2,
    };
    let r = integrate(
        |tau, out| {
            let s = unperturbed_orbit(mode, alpha, tau);
            let (f1, f2) = spec.eval_f(tau, &s)?;
            let forcing = sign1 * f1 + f2;
            let (sn, cs) = (omega * tau).sin_cos();
            out[0] = sn * forcing;
            out[1] = cs * forcing;
            Ok(())
        },
        0.0,
        spec.orbit_period(),
        2,
        opts,
    )?;
    Ok([r.value[0], r.value[1]])
}

/// Canonical bifurcation function for the spec's mode via the generic operator.
pub fn canonical_averages(spec: &PerturbationSpec, alpha: [f64; 2], opts: &QuadOptions) -> Result<[f64; 2], Error> {
    let problem = PendulumProblem::new(spec);
    let a = averaged_function(&problem, &alpha, opts)?;
    Ok([a.value[0], a.value[1]])
}

fn mode_averaged(spec: &PerturbationSpec, expected: Mode, alpha: [f64; 2], opts: &QuadOptions) -> Result<ModeAverages, Error> {
    if spec.mode != expected {
        return Err(Error::Config(format!(
            "spec selects {} but {} averages were requested",
            spec.mode.name(),
            expected.name()
        )));
    }
    Ok(ModeAverages {
        canonical: canonical_averages(spec, alpha, opts)?,
        raw: raw_averages(spec, alpha, opts)?,
    })
}

/// Mode-1 bifurcation functions at `alpha = (X0, Y0)`.
pub fn mode1_averaged(spec: &PerturbationSpec, alpha: [f64; 2], opts: &QuadOptions) -> Result<ModeAverages, Error> {
    mode_averaged(spec, Mode::Mode1, alpha, opts)
}

/// Mode-2 bifurcation functions at `alpha = (Z0, W0)`.
pub fn mode2_averaged(spec: &PerturbationSpec, alpha: [f64; 2], opts: &QuadOptions) -> Result<ModeAverages, Error> {
    mode_averaged(spec, Mode::Mode2, alpha, opts)
}

/// The canonical bifurcation function of a spec, ready for zero finding.
#[derive(Debug)]
pub struct AveragedSystem<'a> {
    problem: PendulumProblem<'a>,
    opts: QuadOptions,
    panels: AtomicUsize,
}

impl<'a> AveragedSystem<'a> {
    /// Validates the averaging hypotheses once; they do not depend on alpha
    /// for the pendulum.
    pub fn new(spec: &'a PerturbationSpec, opts: QuadOptions) -> Result<Self, Error> {
        let problem = PendulumProblem::new(spec);
        check_hypotheses(&problem, &[1.0, 0.0])?;
        Ok(Self {
            problem,
            opts,
            panels: AtomicUsize::new(0),
        })
    }

    pub fn spec(&self) -> &PerturbationSpec {
        self.problem.spec()
    }

    pub fn tol(&self) -> f64 {
        self.opts.tol
    }

    /// Largest panel count used by any evaluation so far.
    pub fn panels(&self) -> usize {
        self.panels.load(Ordering::Relaxed)
    }

    pub fn eval(&self, alpha: [f64; 2]) -> Result<[f64; 2], Error> {
        let a = averaged_function_unchecked(&self.problem, &alpha, &self.opts)?;
        self.panels.fetch_max(a.panels, Ordering::Relaxed);
        Ok([a.value[0], a.value[1]])
    }

    pub fn raw(&self, alpha: [f64; 2]) -> Result<[f64; 2], Error> {
        raw_averages(self.problem.spec(), alpha, &self.opts)
    }

    pub fn jacobian(&self, alpha: [f64; 2]) -> Result<[[f64; 2]; 2], Error> {
        crate::zeros::fd_jacobian(self, alpha)
    }
}

impl PlanarMap for AveragedSystem<'_> {
    fn eval(&self, alpha: [f64; 2]) -> Result<[f64; 2], Error> {
        AveragedSystem::eval(self, alpha)
    }
}
