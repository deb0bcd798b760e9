//! Adaptive composite Gauss-Legendre quadrature for vector-valued integrands.
//!
//! Each panel is integrated with a fixed-order rule and compared against the
//! sum over its two halves. A panel is accepted once that difference falls
//! under its share of the tolerance (proportional to its width), or under a
//! floor set by floating-point cancellation in the panel sum.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::Error;

pub const DEFAULT_ORDER: usize = 20;
pub const MAX_PANELS: usize = 1 << 16;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes from Newton iteration on `P_n`, seeded by the usual cosine
    /// approximation.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates over `[a, b]`, writing the result into `out` and the
    /// absolute weighted magnitude into `magnitude`.
    fn panel<F>(
        &self,
        f: &mut F,
        a: f64,
        b: f64,
        scratch: &mut [f64],
        out: &mut [f64],
        magnitude: &mut [f64],
    ) -> Result<(), Error>
    where
        F: FnMut(f64, &mut [f64]) -> Result<(), Error>,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        out.fill(0.0);
        magnitude.fill(0.0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            f(mid + half * x, scratch)?;
            for k in 0..out.len() {
                let term = w * half * scratch[k];
                out[k] += term;
                magnitude[k] += term.abs();
            }
        }
        Ok(())
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn default_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(DEFAULT_ORDER))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    /// Absolute tolerance per component.
    pub tol: f64,
    /// Panels the interval is split into before refinement starts.
    pub min_panels: usize,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            min_panels: 4,
            max_panels: MAX_PANELS,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadResult {
    pub value: Vec<f64>,
    /// Number of panels in the final partition.
    pub panels: usize,
    /// Sum of the accepted coarse/fine differences, worst component.
    pub error_estimate: f64,
}

struct Pending {
    a: f64,
    b: f64,
    coarse: Vec<f64>,
}

/// Integrates a `dim`-component function over `[a, b]`.
///
/// `f(t, out)` writes the integrand at `t` into `out`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, dim: usize, opts: &QuadOptions) -> Result<QuadResult, Error>
where
    F: FnMut(f64, &mut [f64]) -> Result<(), Error>,
{
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::Config(format!("quadrature tolerance must be positive, got {}", opts.tol)));
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Config("quadrature bounds must be finite".into()));
    }
    let rule = default_rule();
    let width = b - a;
    let mut value = vec![0.0; dim];
    if width == 0.0 {
        return Ok(QuadResult {
            value,
            panels: 0,
            error_estimate: 0.0,
        });
    }

    let mut scratch = vec![0.0; dim];
    let mut mag = vec![0.0; dim];
    let mut left = vec![0.0; dim];
    let mut left_mag = vec![0.0; dim];
    let mut right = vec![0.0; dim];
    let mut right_mag = vec![0.0; dim];

    let n0 = opts.min_panels.max(1);
    let mut stack: Vec<Pending> = Vec::with_capacity(64);
    for i in (0..n0).rev() {
        let pa = a + width * i as f64 / n0 as f64;
        let pb = if i + 1 == n0 { b } else { a + width * (i + 1) as f64 / n0 as f64 };
        let mut coarse = vec![0.0; dim];
        rule.panel(&mut f, pa, pb, &mut scratch, &mut coarse, &mut mag)?;
        stack.push(Pending { a: pa, b: pb, coarse });
    }

    let mut live = n0;
    let mut accepted = 0usize;
    let mut error_estimate = vec![0.0; dim];
    while let Some(p) = stack.pop() {
        let mid = 0.5 * (p.a + p.b);
        rule.panel(&mut f, p.a, mid, &mut scratch, &mut left, &mut left_mag)?;
        rule.panel(&mut f, mid, p.b, &mut scratch, &mut right, &mut right_mag)?;
        let share = opts.tol * (p.b - p.a).abs() / width.abs();
        let mut ok = true;
        let mut diff_max = 0.0f64;
        for k in 0..dim {
            let fine = left[k] + right[k];
            let diff = (fine - p.coarse[k]).abs();
            let floor = 64.0 * f64::EPSILON * (left_mag[k] + right_mag[k]);
            if !diff.is_finite() || diff > share.max(floor) {
                ok = false;
            }
            diff_max = diff_max.max(diff);
        }
        if ok {
            for k in 0..dim {
                let fine = left[k] + right[k];
                error_estimate[k] += (fine - p.coarse[k]).abs();
                value[k] += fine;
            }
            accepted += 2;
            continue;
        }
        live += 1;
        if live > opts.max_panels || mid <= p.a || mid >= p.b {
            return Err(Error::Quadrature {
                panels: live,
                difference: diff_max,
            });
        }
        stack.push(Pending {
            a: mid,
            b: p.b,
            coarse: right.clone(),
        });
        stack.push(Pending {
            a: p.a,
            b: mid,
            coarse: left.clone(),
        });
    }
    Ok(QuadResult {
        value,
        panels: accepted,
        error_estimate: error_estimate.into_iter().fold(0.0, f64::max),
    })
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<f64, Error>
where
    F: FnMut(f64) -> Result<f64, Error>,
{
    let r = integrate(
        |t, out| {
            out[0] = f(t)?;
            Ok(())
        },
        a,
        b,
        1,
        opts,
    )?;
    Ok(r.value[0])
}
