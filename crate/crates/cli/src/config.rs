//! Experiment configuration: JSON files, presets, and flag overrides.
//!
//! Every field is optional in the file. Values are layered as preset, then
//! file, then command-line flags, each layer replacing only what it sets.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use pendavg::continuation::EPSILON_LADDER;
use pendavg::quadrature::QuadOptions;
use pendavg::zeros::{NewtonOptions, ZeroSearch};
use pendavg::{Error, Mode, PerturbationSpec, Resonance};

pub const PRESETS: [&str; 2] = ["corollary1", "corollary2"];

/// One configuration layer as it appears in a JSON file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f2: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    /// Quadrature tolerance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub newton_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simplicity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dedup: Option<f64>,
    /// Seed grid as `[radial, angular]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    /// Samples per verified orbit in the trajectory CSVs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($field:ident),+) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field.clone(); } )+
    };
}

impl ConfigLayer {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config JSON: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Replaces the fields that `other` sets.
    pub fn overlay(&mut self, other: &ConfigLayer) {
        overlay!(self, other, preset, f1, f2, mode, p, q, r1, r2, tol, newton_tol, simplicity, dedup, seeds, epsilons, samples, out);
    }
}

/// The perturbation of a named preset.
pub fn preset(name: &str) -> Result<ConfigLayer, Error> {
    let (f1, f2, mode) = match name {
        "corollary1" => ("0", "(1 - th1^2) * sin(w1 * tau)", "mode1"),
        "corollary2" => ("th2d + th1^2 * cos(w2 * tau)", "0", "mode2"),
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}' (expected one of: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(ConfigLayer {
        f1: Some(f1.into()),
        f2: Some(f2.into()),
        mode: Some(mode.into()),
        p: Some(1),
        q: Some(1),
        ..ConfigLayer::default()
    })
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub spec: PerturbationSpec,
    pub quad: QuadOptions,
    pub search: ZeroSearch,
    pub epsilons: Vec<f64>,
    pub samples: usize,
    pub out: Option<PathBuf>,
}

fn check_positive(name: &str, v: f64) -> Result<f64, Error> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl Experiment {
    /// Resolves presets named in `layers`, overlays the layers in order and
    /// validates the result.
    pub fn resolve(layers: &[ConfigLayer]) -> Result<Self, Error> {
        let mut merged = ConfigLayer::default();
        for layer in layers {
            if let Some(name) = &layer.preset {
                merged.overlay(&preset(name)?);
            }
            merged.overlay(layer);
        }
        Self::from_layer(&merged)
    }

    pub fn from_layer(c: &ConfigLayer) -> Result<Self, Error> {
        let mode = Mode::from_str(c.mode.as_deref().unwrap_or("mode1"))?;
        let resonance = Resonance::new(c.p.unwrap_or(1), c.q.unwrap_or(1))?;
        let f1 = c.f1.as_deref().unwrap_or("0");
        let f2 = c.f2.as_deref().unwrap_or("0");
        let spec = PerturbationSpec::parse(f1, f2, mode, resonance).map_err(|e| match e {
            Error::Parse(p) => Error::Config(format!("cannot parse perturbation: {p}")),
            other => other,
        })?;

        let defaults = ZeroSearch::default();
        let [radial, angular] = c.seeds.unwrap_or([defaults.radial_seeds, defaults.angular_seeds]);
        let search = ZeroSearch {
            r1: c.r1.unwrap_or(defaults.r1),
            r2: c.r2.unwrap_or(defaults.r2),
            radial_seeds: radial,
            angular_seeds: angular,
            newton: NewtonOptions {
                tol: check_positive("newton_tol", c.newton_tol.unwrap_or(defaults.newton.tol))?,
                ..defaults.newton
            },
            simplicity_threshold: check_positive("simplicity", c.simplicity.unwrap_or(defaults.simplicity_threshold))?,
            dedup_radius: check_positive("dedup", c.dedup.unwrap_or(defaults.dedup_radius))?,
        };
        search.validate()?;

        let quad = QuadOptions::with_tol(check_positive("tol", c.tol.unwrap_or(QuadOptions::default().tol))?);
        let epsilons = c.epsilons.clone().unwrap_or_else(|| EPSILON_LADDER.to_vec());
        for &e in &epsilons {
            if e == 0.0 || !e.is_finite() {
                return Err(Error::Config(format!(
                    "epsilon values must be finite and nonzero, got {e}"
                )));
            }
        }
        let samples = c.samples.unwrap_or(257);
        if samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        Ok(Self {
            spec,
            quad,
            search,
            epsilons,
            samples,
            out: c.out.clone(),
        })
    }
}

/// Parses a comma-separated list of numbers, as given to `--eps`.
pub fn parse_list(text: &str) -> Result<Vec<f64>, Error> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("'{}' is not a number", s.trim())))
        })
        .collect()
}
