//! Zeros of planar bifurcation functions.
//!
//! Damped Newton iteration from a polar grid of seeds over the annulus
//! `r1 < |alpha| < r2`, with a central-difference Jacobian. Converged zeros
//! are deduplicated, filtered to the annulus and classified as simple when
//! the Jacobian determinant is bounded away from zero.

use rayon::prelude::*;

use crate::Error;

/// A map `R^2 -> R^2` whose zeros are sought.
pub trait PlanarMap: Sync {
    fn eval(&self, alpha: [f64; 2]) -> Result<[f64; 2], Error>;
}

impl<F> PlanarMap for F
where
    F: Fn([f64; 2]) -> Result<[f64; 2], Error> + Sync,
{
    fn eval(&self, alpha: [f64; 2]) -> Result<[f64; 2], Error> {
        self(alpha)
    }
}

pub type Mat2 = [[f64; 2]; 2];

pub fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Step used for the Jacobian: `max(1e-6, 1e-6 |alpha|)`.
pub fn fd_step(alpha: [f64; 2]) -> f64 {
    1e-6 * norm2(alpha).max(1.0)
}

/// Central-difference Jacobian, `J[i][j] = dG_i / d alpha_j`.
pub fn fd_jacobian<M: PlanarMap + ?Sized>(map: &M, alpha: [f64; 2]) -> Result<Mat2, Error> {
    let h = fd_step(alpha);
    let mut j = [[0.0; 2]; 2];
    for col in 0..2 {
        let mut plus = alpha;
        let mut minus = alpha;
        plus[col] += h;
        minus[col] -= h;
        let gp = map.eval(plus)?;
        let gm = map.eval(minus)?;
        for row in 0..2 {
            j[row][col] = (gp[row] - gm[row]) / (2.0 * h);
        }
    }
    Ok(j)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Converged once `|G| <= tol`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Step halvings tried before giving up on a seed.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iterations: 25,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonTrace {
    pub alpha: [f64; 2],
    pub residual: f64,
    /// `|G|` at the seed and after each accepted step.
    pub history: Vec<f64>,
    pub iterations: usize,
}

/// Why a Newton run from one seed was abandoned.
#[derive(Debug, Clone, PartialEq)]
pub enum NewtonFailure {
    SingularJacobian { alpha: [f64; 2] },
    NoDecrease { alpha: [f64; 2], residual: f64 },
    IterationLimit { alpha: [f64; 2], residual: f64 },
    Evaluation(Error),
}

/// Damped Newton iteration from `seed`. The step is halved while the
/// residual does not decrease.
pub fn newton<M: PlanarMap + ?Sized>(map: &M, seed: [f64; 2], opts: &NewtonOptions) -> Result<NewtonTrace, NewtonFailure> {
    let mut alpha = seed;
    let mut g = map.eval(alpha).map_err(NewtonFailure::Evaluation)?;
    let mut r = norm2(g);
    let mut history = vec![r];
    for it in 0..=opts.max_iterations {
        if r <= opts.tol {
            return Ok(NewtonTrace {
                alpha,
                residual: r,
                history,
                iterations: it,
            });
        }
        if it == opts.max_iterations {
            break;
        }
        let j = fd_jacobian(map, alpha).map_err(NewtonFailure::Evaluation)?;
        let det = det2(&j);
        if det == 0.0 || !det.is_finite() {
            return Err(NewtonFailure::SingularJacobian { alpha });
        }
        let step = [
            -(j[1][1] * g[0] - j[0][1] * g[1]) / det,
            -(-j[1][0] * g[0] + j[0][0] * g[1]) / det,
        ];
        if !(step[0].is_finite() && step[1].is_finite()) {
            return Err(NewtonFailure::SingularJacobian { alpha });
        }
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = [alpha[0] + lambda * step[0], alpha[1] + lambda * step[1]];
            if let Ok(gt) = map.eval(trial) {
                let rt = norm2(gt);
                if rt < r {
                    accepted = Some((trial, gt, rt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((a, gt, rt)) => {
                alpha = a;
                g = gt;
                r = rt;
                history.push(r);
            }
            None => return Err(NewtonFailure::NoDecrease { alpha, residual: r }),
        }
    }
    Err(NewtonFailure::IterationLimit { alpha, residual: r })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroSearch {
    pub r1: f64,
    pub r2: f64,
    pub radial_seeds: usize,
    pub angular_seeds: usize,
    pub newton: NewtonOptions,
    pub simplicity_threshold: f64,
    pub dedup_radius: f64,
}

impl Default for ZeroSearch {
    fn default() -> Self {
        Self {
            r1: 1e-2,
            r2: 50.0,
            radial_seeds: 24,
            angular_seeds: 24,
            newton: NewtonOptions::default(),
            simplicity_threshold: 1e-8,
            dedup_radius: 1e-6,
        }
    }
}

impl ZeroSearch {
    pub fn annulus(r1: f64, r2: f64) -> Self {
        Self {
            r1,
            r2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.r1 > 0.0 && self.r1.is_finite()) {
            return Err(Error::Config(format!("r1 must be positive (the origin is excluded), got {}", self.r1)));
        }
        if !(self.r2 > self.r1 && self.r2.is_finite()) {
            return Err(Error::Config(format!("r2 must exceed r1, got r1 = {}, r2 = {}", self.r1, self.r2)));
        }
        if self.radial_seeds == 0 || self.angular_seeds == 0 {
            return Err(Error::Config("seed grid must be non-empty".into()));
        }
        if self.newton.tol.is_nan() || self.newton.tol <= 0.0 {
            return Err(Error::Config(format!("newton tolerance must be positive, got {}", self.newton.tol)));
        }
        Ok(())
    }

    /// Polar grid: log-spaced radii at cell midpoints, angles offset by half
    /// a cell so no seed sits on a coordinate axis.
    pub fn seeds(&self) -> Vec<[f64; 2]> {
        let (l1, l2) = (self.r1.ln(), self.r2.ln());
        let mut out = Vec::with_capacity(self.radial_seeds * self.angular_seeds);
        for i in 0..self.radial_seeds {
            let r = (l1 + (l2 - l1) * (i as f64 + 0.5) / self.radial_seeds as f64).exp();
            for j in 0..self.angular_seeds {
                let theta = std::f64::consts::TAU * (j as f64 + 0.5) / self.angular_seeds as f64;
                out.push([r * theta.cos(), r * theta.sin()]);
            }
        }
        out
    }

    fn in_annulus(&self, alpha: [f64; 2]) -> bool {
        let r = norm2(alpha);
        r > self.r1 && r < self.r2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroResult {
    pub alpha: [f64; 2],
    pub residual: f64,
    pub jacobian: Mat2,
    pub det: f64,
    pub simple: bool,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroReport {
    /// Sorted lexicographically by `alpha`, to within the dedup radius.
    pub zeros: Vec<ZeroResult>,
    /// The map vanished at every seed: no isolated zeros exist to report.
    pub identically_zero: bool,
    pub seeds: usize,
    pub converged_seeds: usize,
}

/// Locates the zeros of `map` in the annulus. Seeds that fail to converge
/// are dropped; an empty result is not an error.
pub fn find_zeros<M: PlanarMap + ?Sized>(map: &M, search: &ZeroSearch) -> Result<ZeroReport, Error> {
    search.validate()?;
    let seeds = search.seeds();

    let values: Vec<Result<[f64; 2], Error>> = seeds.par_iter().map(|&s| map.eval(s)).collect();
    let mut all_small = true;
    for v in &values {
        match v {
            Ok(g) => all_small &= norm2(*g) <= search.newton.tol,
            Err(e) => log::debug!("seed evaluation failed: {e}"),
        }
    }
    if all_small && values.iter().any(Result::is_ok) {
        log::info!("averaged function vanishes at all {} seeds; no isolated zeros", seeds.len());
        return Ok(ZeroReport {
            zeros: Vec::new(),
            identically_zero: true,
            seeds: seeds.len(),
            converged_seeds: 0,
        });
    }

    let traces: Vec<Option<NewtonTrace>> = seeds
        .par_iter()
        .map(|&s| match newton(map, s, &search.newton) {
            Ok(t) => Some(t),
            Err(f) => {
                log::trace!("seed {s:?} abandoned: {f:?}");
                None
            }
        })
        .collect();
    let converged: Vec<NewtonTrace> = traces.into_iter().flatten().collect();
    let converged_seeds = converged.len();

    let mut unique: Vec<NewtonTrace> = Vec::new();
    for t in converged.into_iter().filter(|t| search.in_annulus(t.alpha)) {
        match unique
            .iter_mut()
            .find(|u| norm2([u.alpha[0] - t.alpha[0], u.alpha[1] - t.alpha[1]]) < search.dedup_radius)
        {
            Some(u) if t.residual < u.residual => *u = t,
            Some(_) => {}
            None => unique.push(t),
        }
    }

    let mut zeros = unique
        .into_par_iter()
        .map(|t| {
            let jacobian = fd_jacobian(map, t.alpha)?;
            let det = det2(&jacobian);
            Ok(ZeroResult {
                alpha: t.alpha,
                residual: t.residual,
                jacobian,
                det,
                simple: det.abs() > search.simplicity_threshold && t.residual <= search.newton.tol,
                iterations: t.iterations,
                residual_history: t.history,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    // Components are compared after rounding to the dedup radius so that
    // round-off around zero does not decide the order.
    let key = |v: f64| (v / search.dedup_radius).round() + 0.0;
    zeros.sort_by(|a, b| {
        key(a.alpha[0])
            .total_cmp(&key(b.alpha[0]))
            .then(key(a.alpha[1]).total_cmp(&key(b.alpha[1])))
    });
    Ok(ZeroReport {
        zeros,
        identically_zero: false,
        seeds: seeds.len(),
        converged_seeds,
    })
}

/// Zeros `alpha` and `-alpha` describe the same unperturbed orbit, half a
/// period apart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitClass {
    /// Indices into the zero list.
    pub members: Vec<usize>,
}

pub fn antipodal_pairing(zeros: &[ZeroResult], radius: f64) -> Vec<OrbitClass> {
    let mut assigned = vec![false; zeros.len()];
    let mut classes = Vec::new();
    for i in 0..zeros.len() {
        if assigned[i] {
            continue;
        }
        assigned[i] = true;
        let a = zeros[i].alpha;
        let tol = radius * norm2(a).max(1.0);
        let partner = (i + 1..zeros.len()).find(|&j| {
            !assigned[j] && norm2([zeros[j].alpha[0] + a[0], zeros[j].alpha[1] + a[1]]) <= tol
        });
        let mut members = vec![i];
        if let Some(j) = partner {
            assigned[j] = true;
            members.push(j);
        }
        classes.push(OrbitClass { members });
    }
    classes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_at(alpha: [f64; 2]) -> ZeroResult {
        ZeroResult {
            alpha,
            residual: 0.0,
            jacobian: [[1.0, 0.0], [0.0, 1.0]],
            det: 1.0,
            simple: true,
            iterations: 0,
            residual_history: vec![],
        }
    }

    #[test]
    fn jacobian_of_quadratic_is_exact() {
        let map = |a: [f64; 2]| Ok([a[0] * a[0] - 3.0 * a[1], a[0] * a[1]]);
        let j = fd_jacobian(&map, [2.0, -1.0]).unwrap();
        let expected = [[4.0, -3.0], [-1.0, 2.0]];
        for r in 0..2 {
            for c in 0..2 {
                assert!((j[r][c] - expected[r][c]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn newton_finds_circle_line_intersection() {
        let map = |a: [f64; 2]| Ok([a[0] * a[0] + a[1] * a[1] - 4.0, a[0] - a[1]]);
        let t = newton(&map, [3.0, 0.5], &NewtonOptions::default()).unwrap();
        let s = 2f64.sqrt();
        assert!((t.alpha[0] - s).abs() < 1e-12 && (t.alpha[1] - s).abs() < 1e-12);
        assert!(t.residual <= 1e-11);
        assert_eq!(t.history.len(), t.iterations + 1);
    }

    #[test]
    fn newton_reports_singular_and_stalled_seeds() {
        let flat = |_: [f64; 2]| Ok([1.0, 1.0]);
        assert!(matches!(newton(&flat, [0.0, 0.0], &NewtonOptions::default()), Err(NewtonFailure::SingularJacobian { .. })));
        // x^2 + 1 has no real root.
        let no_root = |a: [f64; 2]| Ok([a[0] * a[0] + 1.0, a[1]]);
        assert!(newton(&no_root, [0.5, 0.0], &NewtonOptions::default()).is_err());
    }

    #[test]
    fn find_zeros_filters_annulus_and_dedups() {
        // Zeros at the origin, (1, 0), (-1, 0), and (30, 0).
        let map = |a: [f64; 2]| Ok([a[0] * (a[0] * a[0] - 1.0) * (a[0] - 30.0) / 30.0, a[1]]);
        let report = find_zeros(&map, &ZeroSearch::annulus(0.1, 10.0)).unwrap();
        let xs: Vec<f64> = report.zeros.iter().map(|z| z.alpha[0]).collect();
        assert_eq!(xs.len(), 2, "{xs:?}");
        assert!((xs[0] + 1.0).abs() < 1e-10 && (xs[1] - 1.0).abs() < 1e-10);
        assert!(report.zeros.iter().all(|z| z.simple));
        assert!(!report.identically_zero);
    }

    #[test]
    fn identically_zero_map_is_flagged() {
        let map = |_: [f64; 2]| Ok([0.0, 0.0]);
        let report = find_zeros(&map, &ZeroSearch::default()).unwrap();
        assert!(report.identically_zero);
        assert!(report.zeros.is_empty());
    }

    #[test]
    fn non_simple_zero_is_labelled() {
        // Double root along x: det vanishes at (1, 0). Newton stops about
        // sqrt(tol) away from it, where det is of order 1e-5.
        let map = |a: [f64; 2]| Ok([(a[0] - 1.0).powi(2), a[1]]);
        let search = ZeroSearch {
            simplicity_threshold: 1e-3,
            newton: NewtonOptions {
                tol: 1e-11,
                max_iterations: 60,
                ..NewtonOptions::default()
            },
            ..ZeroSearch::annulus(0.1, 5.0)
        };
        let report = find_zeros(&map, &search).unwrap();
        assert!(!report.zeros.is_empty());
        assert!(report.zeros.iter().all(|z| !z.simple));
    }

    #[test]
    fn invalid_annulus_is_rejected() {
        let map = |a: [f64; 2]| Ok(a);
        assert!(find_zeros(&map, &ZeroSearch::annulus(0.0, 1.0)).is_err());
        assert!(find_zeros(&map, &ZeroSearch::annulus(2.0, 1.0)).is_err());
    }

    #[test]
    fn pairing_examples() {
        assert!(antipodal_pairing(&[], 1e-6).is_empty());
        let four = [zero_at([-2.0, 0.0]), zero_at([0.0, -1.2]), zero_at([0.0, 1.2]), zero_at([2.0, 0.0])];
        let classes = antipodal_pairing(&four, 1e-6);
        assert_eq!(classes.len(), 2);
        assert_eq!(classes[0].members, vec![0, 3]);
        assert_eq!(classes[1].members, vec![1, 2]);
        let single = [zero_at([0.0, -27.3])];
        assert_eq!(antipodal_pairing(&single, 1e-6).len(), 1);
    }
}
