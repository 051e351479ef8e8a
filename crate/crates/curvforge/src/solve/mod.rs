//! Sub/supersolution discovery, monotone iteration, damped Newton with
//! continuation, the Lorentz-surface solvers, metric synthesis pipelines,
//! torus diffeomorphism pullbacks and the preset distributions.

mod diffeo;
mod linsolve;
mod monotone;
mod newton;
mod presets;
mod scans;
mod surface;
mod synth;

pub use diffeo::{pullback_metric, pullback_scalar, Primitive, TorusDiffeo, TrigPoly};
pub use linsolve::{bicgstab, FourierPoissonPrecond, LinearOp};
pub use monotone::monotone_solve;
pub use newton::newton_solve;
pub use presets::{preset_distribution, Preset};
pub use scans::{find_constant_subsolution, find_constant_supersolution, ScanError};
pub use surface::{
    gauss_bonnet_residual, lorentz_from_u, solve_sine_boundary, solve_sine_closed,
};
pub use synth::{synthesize, Strategy};

use crate::geometry::MetricField;
use crate::lattice::ScalarField;

/// Outcome record of a solver run.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// final residual infinity norm
    pub residual: f64,
    /// the solved function (f for the elliptic pipelines, u for the surface
    /// solvers)
    pub f: ScalarField,
    pub f_range: (f64, f64),
    /// synthesised metric, when the pipeline produces one
    pub h: Option<MetricField>,
    /// `|scal_oracle(h) - s|_inf` when verified against a target
    pub scal_mismatch: Option<f64>,
    /// Gauss–Bonnet integral for closed Lorentz surfaces
    pub gauss_bonnet: Option<f64>,
    /// whether every iterate stayed inside the sub/supersolution bracket
    pub enclosure_ok: Option<bool>,
    /// bracket actually used (subsolution, supersolution)
    pub bracket: Option<(f64, f64)>,
    /// amplitude rescale applied to the prescribed function (the solved
    /// problem used `amplitude * s`; the reported metric absorbs it)
    pub amplitude: f64,
    /// whether the sign-mirror route (solve for -s on the complement, then
    /// negate the metric) was taken
    pub mirrored: bool,
    /// shrink factor of the boundary-value pipeline
    pub shrink: Option<f64>,
    /// energies of the accepted descent iterates (boundary pipeline)
    pub energy_history: Option<Vec<f64>>,
    /// human-readable trace lines
    pub trace: Vec<String>,
}

impl SolveReport {
    pub(crate) fn new(f: ScalarField) -> SolveReport {
        let range = (f.min(), f.max());
        SolveReport {
            converged: false,
            iterations: 0,
            residual: f64::INFINITY,
            f,
            f_range: range,
            h: None,
            scal_mismatch: None,
            gauss_bonnet: None,
            enclosure_ok: None,
            bracket: None,
            amplitude: 1.0,
            mirrored: false,
            shrink: None,
            energy_history: None,
            trace: Vec::new(),
        }
    }

    pub(crate) fn set_f(&mut self, f: ScalarField) {
        self.f_range = (f.min(), f.max());
        self.f = f;
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Lattice(#[from] crate::lattice::LatticeError),
    #[error("{0}")]
    Scan(#[from] scans::ScanError),
    #[error("invalid bracket: need f_minus < f_plus with Upsilon(f_minus) > 0 > Upsilon(f_plus), got [{0}, {1}]")]
    BadBracket(f64, f64),
    #[error("prescribed function must be identically zero or change sign (min {min:e}, max {max:e})")]
    Inadmissible { min: f64, max: f64 },
    #[error("continuation stalled at t = {t} (step {dt:e})")]
    ContinuationStall { t: f64, dt: f64 },
    #[error("iterate escaped the admissible range: {0}")]
    RangeViolation(String),
    #[error("linear solver stagnated (residual {0:e})")]
    LinearStagnation(f64),
    #[error("solver did not converge within {0} iterations (residual {1:e})")]
    NoConvergence(usize, f64),
    #[error("a-priori shrink failed: c underflowed below {0:e}")]
    ShrinkUnderflow(f64),
    #[error("{0}")]
    Invalid(String),
}
