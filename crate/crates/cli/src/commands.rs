use std::fs;
use std::path::Path;

use serde::Serialize;

use pendavg::averaging::{raw_averages, AveragedSystem};
use pendavg::continuation::{predicted_initial_state, shoot_periodic, ShootingOptions};
use pendavg::model::{omega1, omega2, unperturbed_orbit};
use pendavg::zeros::{antipodal_pairing, find_zeros, ZeroReport, ZeroResult};
use pendavg::{Error, Mode, PerturbationSpec};

use crate::config::Experiment;
use crate::report::{fmt_f64, nums, state_nums, to_json, trajectory_csv, Csv, Num};

pub const IDENTICALLY_ZERO: &str = "identically zero averaged function, no isolated zeros";

/// What a command printed and whether any part of it failed numerically.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub failures: usize,
}

impl From<String> for Outcome {
    fn from(stdout: String) -> Self {
        Self { stdout, failures: 0 }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

pub fn freqs() -> String {
    let mut csv = Csv::new(&["w1", "w2", "T1", "T2"]);
    csv.row(&[omega1(), omega2(), Mode::Mode1.period(), Mode::Mode2.period()]);
    csv.into_string()
}

/// Points at which `average` evaluates.
#[derive(Debug, Clone, PartialEq)]
pub enum Points {
    Point([f64; 2]),
    /// `n x n` grid over `[lo, hi]^2`, first coordinate varying slowest.
    Grid { lo: f64, hi: f64, n: usize },
}

impl Points {
    fn expand(&self) -> Vec<[f64; 2]> {
        match *self {
            Points::Point(a) => vec![a],
            Points::Grid { lo, hi, n } => {
                let at = |i: usize| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
                (0..n).flat_map(|i| (0..n).map(move |j| [at(i), at(j)])).collect()
            }
        }
    }
}

pub fn average(exp: &Experiment, points: &Points, raw: bool) -> Result<String, Error> {
    let system = AveragedSystem::new(&exp.spec, exp.quad)?;
    let mut csv = Csv::new(&["a1", "a2", "g1", "g2"]);
    for a in points.expand() {
        let g = if raw { raw_averages(&exp.spec, a, &exp.quad)? } else { system.eval(a)? };
        csv.row(&[a[0], a[1], g[0], g[1]]);
    }
    let text = csv.into_string();
    if let Some(dir) = &exp.out {
        write_file(dir, "average.csv", &text)?;
    }
    Ok(text)
}

#[derive(Serialize)]
struct SpecJson {
    f1: String,
    f2: String,
    mode: &'static str,
    p: u32,
    q: u32,
    period: Num,
}

impl SpecJson {
    fn new(spec: &PerturbationSpec) -> Self {
        Self {
            f1: spec.f1.to_string(),
            f2: spec.f2.to_string(),
            mode: spec.mode.name(),
            p: spec.resonance.p(),
            q: spec.resonance.q(),
            period: Num(spec.orbit_period()),
        }
    }
}

#[derive(Serialize)]
struct ZeroJson {
    alpha: [Num; 2],
    residual: Num,
    jacobian: [[Num; 2]; 2],
    det: Num,
    simple: bool,
    iterations: usize,
}

impl ZeroJson {
    fn new(z: &ZeroResult) -> Self {
        Self {
            alpha: nums(z.alpha),
            residual: Num(z.residual),
            jacobian: z.jacobian.map(nums),
            det: Num(z.det),
            simple: z.simple,
            iterations: z.iterations,
        }
    }
}

#[derive(Serialize)]
struct ZerosJson {
    spec: SpecJson,
    annulus: [Num; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<&'static str>,
    zeros: Vec<ZeroJson>,
    orbit_classes: usize,
    classes: Vec<Vec<usize>>,
}

struct ZeroStage {
    report: ZeroReport,
    classes: Vec<Vec<usize>>,
}

fn zero_stage(exp: &Experiment) -> Result<ZeroStage, Error> {
    let system = AveragedSystem::new(&exp.spec, exp.quad)?;
    let report = find_zeros(&system, &exp.search)?;
    let classes = antipodal_pairing(&report.zeros, exp.search.dedup_radius)
        .into_iter()
        .map(|c| c.members)
        .collect();
    log::info!("{} zeros in {} seeds", report.zeros.len(), report.seeds);
    Ok(ZeroStage { report, classes })
}

fn zeros_json(exp: &Experiment, stage: &ZeroStage) -> ZerosJson {
    ZerosJson {
        spec: SpecJson::new(&exp.spec),
        annulus: [Num(exp.search.r1), Num(exp.search.r2)],
        message: stage.report.identically_zero.then_some(IDENTICALLY_ZERO),
        zeros: stage.report.zeros.iter().map(ZeroJson::new).collect(),
        orbit_classes: stage.classes.len(),
        classes: stage.classes.clone(),
    }
}

pub fn zeros(exp: &Experiment) -> Result<String, Error> {
    let stage = zero_stage(exp)?;
    let text = to_json(&zeros_json(exp, &stage));
    if let Some(dir) = &exp.out {
        write_file(dir, "zeros.json", &text)?;
    }
    Ok(text)
}

#[derive(Serialize)]
struct OrbitJson {
    class: usize,
    zero: usize,
    alpha: [Num; 2],
    epsilon: Num,
    #[serde(skip_serializing_if = "Option::is_none")]
    period: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_state: Option<[Num; 4]>,
    predicted_initial: [Num; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    residual: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    distance_to_prediction: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    distance_over_epsilon: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectory: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct VerifyJson {
    #[serde(flatten)]
    zeros: ZerosJson,
    epsilons: Vec<Num>,
    orbits: Vec<OrbitJson>,
}

/// Shoots from one simple zero per orbit class at every epsilon. A failed
/// case is recorded in the report and counted, and the run continues.
pub fn verify(exp: &Experiment) -> Result<Outcome, Error> {
    let stage = zero_stage(exp)?;
    let mut epsilons = exp.epsilons.clone();
    epsilons.sort_by(f64::total_cmp);
    epsilons.dedup();

    // Class representative: the first simple member in sorted order.
    let reps: Vec<(usize, usize)> = stage
        .classes
        .iter()
        .enumerate()
        .filter_map(|(c, members)| members.iter().find(|&&i| stage.report.zeros[i].simple).map(|&i| (c, i)))
        .collect();
    let cases: Vec<(usize, usize, usize)> = epsilons
        .iter()
        .enumerate()
        .flat_map(|(k, _)| reps.iter().map(move |&(c, i)| (k, c, i)))
        .collect();

    let opts = ShootingOptions {
        samples: exp.samples,
        ..ShootingOptions::default()
    };
    let spec = &exp.spec;
    let results: Vec<_> = {
        use rayon::prelude::*;
        cases
            .par_iter()
            .map(|&(k, _, i)| {
                let guess = predicted_initial_state(spec.mode, stage.report.zeros[i].alpha);
                shoot_periodic(spec, epsilons[k], guess, spec.orbit_period(), &opts)
            })
            .collect()
    };

    let mut orbits = Vec::with_capacity(cases.len());
    let mut failures = 0;
    for (&(k, c, i), result) in cases.iter().zip(results) {
        let alpha = stage.report.zeros[i].alpha;
        let eps = epsilons[k];
        let predicted = predicted_initial_state(spec.mode, alpha);
        let mut entry = OrbitJson {
            class: c,
            zero: i,
            alpha: nums(alpha),
            epsilon: Num(eps),
            period: None,
            initial_state: None,
            predicted_initial: state_nums(&predicted),
            residual: None,
            distance_to_prediction: None,
            distance_over_epsilon: None,
            iterations: None,
            trajectory: None,
            error: None,
        };
        match result {
            Ok(o) => {
                if let Some(dir) = &exp.out {
                    let name = format!("orbit_z{i:02}_e{k:02}.csv");
                    write_file(dir, &name, &trajectory_csv(&o.samples))?;
                    entry.trajectory = Some(name);
                }
                entry.period = Some(Num(o.period));
                entry.initial_state = Some(state_nums(&o.initial_state));
                entry.residual = Some(Num(o.residual));
                entry.distance_to_prediction = Some(Num(o.distance_to_prediction));
                entry.distance_over_epsilon = Some(Num(o.distance_to_prediction / eps));
                entry.iterations = Some(o.iterations);
            }
            Err(e) => {
                log::warn!("shooting from zero {i} at eps = {} failed: {e}", fmt_f64(eps));
                entry.error = Some(e.to_string());
                failures += 1;
            }
        }
        orbits.push(entry);
    }

    let text = to_json(&VerifyJson {
        zeros: zeros_json(exp, &stage),
        epsilons: epsilons.iter().copied().map(Num).collect(),
        orbits,
    });
    if let Some(dir) = &exp.out {
        write_file(dir, "verify.json", &text)?;
    }
    Ok(Outcome { stdout: text, failures })
}

/// Samples the unperturbed orbit through `alpha` at `tau_i = i p T / n`.
pub fn orbit(mode: Mode, p: u32, alpha: [f64; 2], samples: usize) -> Result<String, Error> {
    if samples == 0 {
        return Err(Error::Config("samples must be at least 1".into()));
    }
    if p == 0 {
        return Err(Error::Config("p must be positive".into()));
    }
    if !(alpha[0].is_finite() && alpha[1].is_finite()) {
        return Err(Error::Config("alpha must be finite".into()));
    }
    let period = f64::from(p) * mode.period();
    let mut csv = Csv::new(&["tau", "th1", "th1d", "th2", "th2d"]);
    for i in 0..samples {
        let tau = period * i as f64 / samples as f64;
        let s = unperturbed_orbit(mode, alpha, tau);
        csv.row(&[tau, s.th1, s.th1d, s.th2, s.th2d]);
    }
    Ok(csv.into_string())
}
