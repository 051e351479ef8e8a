//! JSON run configuration: grid, metric, distribution, prescribed-curvature
//! expression, solver settings.

use crate::geometry::{Distribution, GeometryError, MetricField};
use crate::lattice::{Grid, ScalarField, Scheme};
use crate::solve::{Preset, Strategy};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

pub const MAX_PERTURBATION: f64 = 0.3;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub grid: GridSpec,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default)]
    pub distribution: Option<DistributionSpec>,
    #[serde(default)]
    pub prescribed: Option<FieldExpr>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub suite: Option<String>,
    #[serde(default)]
    pub resolutions: Option<Vec<usize>>,
    #[serde(default)]
    pub out_dir: Option<String>,
}

fn default_scheme() -> Scheme {
    Scheme::Fd4
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Verify,
    Synthesize,
    Surface2d,
    Info,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Torus { sizes: Vec<usize>, lengths: Vec<f64> },
    Annulus { sizes: [usize; 2], lengths: [f64; 2] },
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, ConfigError> {
        Ok(match self {
            GridSpec::Torus { sizes, lengths } => Grid::torus(sizes, lengths)?,
            GridSpec::Annulus { sizes, lengths } => Grid::annulus(*sizes, *lengths)?,
        })
    }

    /// Same grid with every axis node count replaced by `n` (used by the
    /// resolution sweeps).
    pub fn with_resolution(&self, n: usize) -> GridSpec {
        match self {
            GridSpec::Torus { sizes, lengths } => GridSpec::Torus {
                sizes: vec![n; sizes.len()],
                lengths: lengths.clone(),
            },
            GridSpec::Annulus { lengths, .. } => {
                GridSpec::Annulus { sizes: [n + 1, n], lengths: *lengths }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    #[default]
    Flat,
    PerturbedFlat {
        amplitude: f64,
        terms: Vec<PerturbationTerm>,
    },
    Csv { path: String },
}

/// One symmetric trig bump on a metric entry:
/// `g_ij += amplitude * weight * trig(2 pi (freqs . x) / L + phase)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PerturbationTerm {
    pub i: usize,
    pub j: usize,
    pub freqs: Vec<i32>,
    #[serde(default)]
    pub phase: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

impl MetricSpec {
    pub fn build(&self, grid: &Grid) -> Result<MetricField, ConfigError> {
        match self {
            MetricSpec::Flat => Ok(MetricField::flat(grid)),
            MetricSpec::PerturbedFlat { amplitude, terms } => {
                if *amplitude > MAX_PERTURBATION {
                    return Err(ConfigError::Invalid(format!(
                        "perturbation amplitude {amplitude} exceeds the safe bound {MAX_PERTURBATION}"
                    )));
                }
                let weight_sum: f64 = {
                    let mut per_entry = std::collections::BTreeMap::new();
                    for t in terms {
                        *per_entry.entry((t.i.min(t.j), t.i.max(t.j))).or_insert(0.0) +=
                            t.weight.abs();
                    }
                    per_entry.values().cloned().fold(0.0, f64::max)
                };
                if amplitude * weight_sum > MAX_PERTURBATION {
                    return Err(ConfigError::Invalid(format!(
                        "total perturbation {:.3} exceeds {MAX_PERTURBATION}",
                        amplitude * weight_sum
                    )));
                }
                let terms = terms.clone();
                let amplitude = *amplitude;
                let lengths = grid.lengths().to_vec();
                Ok(MetricField::from_fn(grid, move |i, j, x| {
                    let mut v = if i == j { 1.0 } else { 0.0 };
                    for t in &terms {
                        if (t.i, t.j) == (i, j) || (t.j, t.i) == (i, j) {
                            let mut arg = t.phase;
                            for (a, &k) in t.freqs.iter().enumerate() {
                                arg += TAU * k as f64 * x[a] / lengths[a];
                            }
                            v += amplitude * t.weight * arg.sin();
                        }
                    }
                    v
                })?)
            }
            MetricSpec::Csv { path } => Err(ConfigError::Invalid(format!(
                "csv metric input not wired into this build ({path})"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub preset: PresetName,
    #[serde(default)]
    pub q: Option<usize>,
    /// take the g-orthogonal complement of the preset
    #[serde(default)]
    pub complement: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    Coordinate,
    Contact3,
    Spiral2,
    RotHyperplane,
}

impl DistributionSpec {
    pub fn build(&self, grid: &Grid, g: &MetricField) -> Result<Distribution, ConfigError> {
        let preset = match self.preset {
            PresetName::Coordinate => Preset::Coordinate(self.q.ok_or_else(|| {
                ConfigError::Invalid("coordinate preset needs a rank q".into())
            })?),
            PresetName::Contact3 => Preset::Contact3,
            PresetName::Spiral2 => Preset::Spiral2,
            PresetName::RotHyperplane => Preset::RotHyperplane,
        };
        let d = crate::solve::preset_distribution(preset, grid)?;
        if self.complement {
            Ok(crate::geometry::orthogonal_complement(g, &d)?)
        } else {
            Ok(d)
        }
    }
}

/// Whitelisted expression grammar: sums of constants, trig modes and
/// per-axis polynomials.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FieldExpr {
    pub terms: Vec<ExprTerm>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExprTerm {
    Const { c: f64 },
    Sin { axis: usize, freq: i32, amp: f64, #[serde(default)] phase: f64 },
    Cos { axis: usize, freq: i32, amp: f64, #[serde(default)] phase: f64 },
    Poly { axis: usize, coeffs: Vec<f64> },
}

impl FieldExpr {
    pub fn eval(&self, lengths: &[f64], x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            acc += match t {
                ExprTerm::Const { c } => *c,
                ExprTerm::Sin { axis, freq, amp, phase } => {
                    amp * (TAU * *freq as f64 * x[*axis] / lengths[*axis] + phase).sin()
                }
                ExprTerm::Cos { axis, freq, amp, phase } => {
                    amp * (TAU * *freq as f64 * x[*axis] / lengths[*axis] + phase).cos()
                }
                ExprTerm::Poly { axis, coeffs } => {
                    let mut p = 0.0;
                    for &c in coeffs.iter().rev() {
                        p = p * x[*axis] + c;
                    }
                    p
                }
            };
        }
        acc
    }

    pub fn field(&self, grid: &Grid) -> ScalarField {
        let lengths = grid.lengths().to_vec();
        ScalarField::from_fn(grid, |x| self.eval(&lengths, x))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_continuation")]
    pub continuation_steps: usize,
}

fn default_strategy() -> Strategy {
    Strategy::Auto
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    60
}
fn default_continuation() -> usize {
    50
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            strategy: default_strategy(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            continuation_steps: default_continuation(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("configuration error: {0}")]
    Invalid(String),
    #[error("configuration parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Lattice(#[from] crate::lattice::LatticeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    Ok(serde_json::from_str(text)?)
}
