//! Configuration ingestion, scenario execution and machine-readable
//! reporting.
//!
//! Exit codes: 0 all checks pass, 2 check failure, 3 configuration error,
//! 4 solver non-convergence.

pub mod config;
pub mod report;
pub mod suites;

pub use config::{parse_config, Command, ConfigError, RunConfig};
pub use report::{CheckRecord, RunReport, Timing};

use crate::geometry::scal_oracle;
use crate::lattice::{dump_matrix_csv, dump_scalar_csv};
use crate::solve::{solve_sine_boundary, solve_sine_closed, synthesize, SolveError};
use std::path::PathBuf;
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_CONFIG_ERROR: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Lattice(#[from] crate::lattice::LatticeError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG_ERROR,
            RunError::Solve(SolveError::NoConvergence(..))
            | RunError::Solve(SolveError::ContinuationStall { .. })
            | RunError::Solve(SolveError::ShrinkUnderflow(_))
            | RunError::Solve(SolveError::LinearStagnation(_)) => EXIT_NO_CONVERGENCE,
            _ => EXIT_CHECK_FAILED,
        }
    }
}

fn out_dir(cfg: &RunConfig) -> Option<PathBuf> {
    cfg.out_dir.as_ref().map(PathBuf::from)
}

fn write_artifacts(report: &mut RunReport, dir: &Option<PathBuf>) -> Result<(), RunError> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("report.json");
        std::fs::write(&path, report.full_json())?;
        report.artifacts.push(path.display().to_string());
    }
    Ok(())
}

/// Runs the identity suites named by the configuration.
pub fn cmd_verify(cfg: &RunConfig) -> Result<RunReport, RunError> {
    let start = Instant::now();
    let mut report = RunReport::new(serde_json::to_value(cfg).expect("config serialises"));
    let suite = cfg.suite.as_deref().unwrap_or("all");
    let known = ["switch", "stretch", "algebra", "coefficients", "consistency", "linearize", "naturality", "all"];
    if !known.contains(&suite) {
        return Err(RunError::Config(ConfigError::Invalid(format!(
            "unknown suite '{suite}' (expected one of {known:?})"
        ))));
    }
    let mut checks = Vec::new();
    if suite == "switch" || suite == "all" {
        checks.extend(suites::suite_switch(cfg)?);
    }
    if suite == "stretch" || suite == "all" {
        checks.extend(suites::suite_stretch(cfg)?);
    }
    if suite == "algebra" || suite == "all" {
        checks.extend(suites::suite_algebra(cfg)?);
    }
    if suite == "coefficients" {
        checks.extend(suites::suite_coefficients(cfg)?);
    }
    if suite == "consistency" || suite == "all" {
        checks.extend(suites::suite_consistency(cfg)?);
    }
    if suite == "linearize" || suite == "all" {
        checks.extend(suites::suite_linearize(cfg)?);
    }
    if suite == "naturality" || suite == "all" {
        checks.extend(suites::suite_naturality_basics(cfg)?);
        checks.extend(suites::suite_naturality(cfg)?);
    }
    report.checks = checks;
    let dir = out_dir(cfg);
    report.timing.wall_ms = start.elapsed().as_millis();
    write_artifacts(&mut report, &dir)?;
    Ok(report)
}

/// Runs the elliptic synthesis pipeline described by the configuration.
pub fn cmd_synthesize(cfg: &RunConfig) -> Result<RunReport, RunError> {
    let start = Instant::now();
    let mut report = RunReport::new(serde_json::to_value(cfg).expect("config serialises"));
    let grid = cfg.grid.build()?;
    let g = cfg.metric.build(&grid)?;
    let dist_spec = cfg.distribution.as_ref().ok_or_else(|| {
        ConfigError::Invalid("synthesize needs a distribution".into())
    })?;
    let v = dist_spec.build(&grid, &g)?;
    let s_expr = cfg.prescribed.as_ref().ok_or_else(|| {
        ConfigError::Invalid("synthesize needs a prescribed function".into())
    })?;
    let s = s_expr.field(&grid);

    let rep = synthesize(
        &g,
        &v,
        &s,
        cfg.solver.strategy,
        cfg.solver.tol,
        cfg.solver.max_iter,
        cfg.scheme,
    )?;
    report.solver_trace = rep.trace.clone();
    report.checks.push(CheckRecord::boolean(
        "bracket found",
        "lemma-6.1.1/6.1.2/6.1.9",
        rep.bracket.is_some(),
    ));
    report.checks.push(CheckRecord::absolute(
        "solver residual",
        "thm-b.3.2",
        rep.residual,
        cfg.solver.tol,
    ));
    if let Some(m) = rep.scal_mismatch {
        // discretisation-limited; recorded, judged by the refinement sweeps
        report.checks.push(CheckRecord::absolute(
            "curvature mismatch",
            "thm-4.2.2",
            m,
            1.0,
        ));
    }
    let dir = out_dir(cfg);
    if let (Some(dir), Some(h)) = (&dir, &rep.h) {
        std::fs::create_dir_all(dir)?;
        let hp = dir.join("metric.csv");
        dump_matrix_csv(h.matrix(), &hp)?;
        report.artifacts.push(hp.display().to_string());
        let sp = dir.join("scal.csv");
        dump_scalar_csv(&scal_oracle(h, cfg.scheme)?, &sp)?;
        report.artifacts.push(sp.display().to_string());
        let fp = dir.join("profile.csv");
        dump_scalar_csv(&rep.f, &fp)?;
        report.artifacts.push(fp.display().to_string());
    }
    report.timing.wall_ms = start.elapsed().as_millis();
    write_artifacts(&mut report, &dir)?;
    Ok(report)
}

/// Runs the 2-d Lorentz-surface pipeline (closed torus or annulus).
pub fn cmd_surface2d(cfg: &RunConfig) -> Result<RunReport, RunError> {
    let start = Instant::now();
    let mut report = RunReport::new(serde_json::to_value(cfg).expect("config serialises"));
    let grid = cfg.grid.build()?;
    let s_expr = cfg.prescribed.as_ref().ok_or_else(|| {
        ConfigError::Invalid("surface2d needs a prescribed function".into())
    })?;
    let s = s_expr.field(&grid);

    let rep = if grid.fully_periodic() {
        match solve_sine_closed(&s, cfg.solver.tol, cfg.solver.continuation_steps, None, cfg.scheme)
        {
            Ok(r) => r,
            Err(SolveError::Inadmissible { min, max }) => {
                report.checks.push(CheckRecord::boolean(
                    &format!("prescribed function admissible (min {min:.3e}, max {max:.3e})"),
                    "thm-7.2.1",
                    false,
                ));
                report.timing.wall_ms = start.elapsed().as_millis();
                let dir = out_dir(cfg);
                write_artifacts(&mut report, &dir)?;
                return Ok(report);
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        solve_sine_boundary(&s, cfg.solver.tol, cfg.scheme)?
    };

    report.solver_trace = rep.trace.clone();
    report.checks.push(CheckRecord::absolute(
        "solver residual",
        if grid.fully_periodic() { "thm-7.2.6" } else { "thm-7.3.9" },
        rep.residual,
        cfg.solver.tol,
    ));
    if let Some(gb) = rep.gauss_bonnet {
        report.checks.push(CheckRecord::absolute("gauss-bonnet residual", "thm-7.2.1", gb, 1e-8));
    }
    if let Some(c) = rep.shrink {
        report.checks.push(CheckRecord::boolean(
            &format!("shrink factor c = {c:.3e}"),
            "cor-7.3.7",
            c >= 1e-6,
        ));
    }
    let dir = out_dir(cfg);
    if let Some(dir) = &dir {
        std::fs::create_dir_all(dir)?;
        let up = dir.join("profile.csv");
        dump_scalar_csv(&rep.f, &up)?;
        report.artifacts.push(up.display().to_string());
        if let Some(h) = &rep.h {
            let hp = dir.join("metric.csv");
            dump_matrix_csv(h.matrix(), &hp)?;
            report.artifacts.push(hp.display().to_string());
            let sp = dir.join("scal.csv");
            dump_scalar_csv(&scal_oracle(h, cfg.scheme)?, &sp)?;
            report.artifacts.push(sp.display().to_string());
        }
    }
    report.timing.wall_ms = start.elapsed().as_millis();
    write_artifacts(&mut report, &dir)?;
    Ok(report)
}

/// Version, suite catalog and the anchor index.
pub fn info_text() -> String {
    let mut s = String::new();
    s.push_str(&format!("curvforge {}\n\n", env!("CARGO_PKG_VERSION")));
    s.push_str("suites:\n");
    for (name, what) in [
        ("switch", "sign-flip transformation laws, line by line"),
        ("stretch", "stretch/conform/change transformation laws and the chi laws"),
        ("algebra", "surgery compositions, sign flip, coefficient battery, exponent bounds"),
        ("coefficients", "coefficient identity battery only"),
        ("consistency", "frame-vs-oracle web: decompositions, pairings, twist, line case"),
        ("linearize", "operator linearisation vs central differences"),
        ("naturality", "pullback naturality of the curvature oracle"),
        ("all", "every suite above"),
    ] {
        s.push_str(&format!("  {name:<13} {what}\n"));
    }
    s.push_str("\nanchor index:\n");
    for (anchor, what) in [
        ("thm-3.2.4", "sign-flip law"),
        ("cor-3.2.5", "curvature sign flip"),
        ("thm-3.3.1", "stretch law"),
        ("eq-3.24", "conformal curvature law"),
        ("prop-3.6.1", "combined surgery law"),
        ("lemma-3.7.1", "chi transformation"),
        ("rem-3.1.4/8/12/13", "surgery composition identities"),
        ("eq-4.3b..e", "coefficient identities"),
        ("thm-4.2.2", "synthesis correctness"),
        ("lemma-6.1.1/6.1.2/6.1.9", "bracket existence"),
        ("lemma-6.2.3", "linearisation formula"),
        ("prop-6.2.4", "constant-point coefficient/exponent bounds"),
        ("rem-2.2.9..12", "block Laplacian rules"),
        ("fact-2.2.30", "qualar pairing"),
        ("fact-2.2.35", "line-distribution identities"),
        ("fact-2.3.3", "twist cross-check"),
        ("prop-2.3.4", "Riemannian sigma/tau bound"),
        ("lemma-2.3.10", "foliation curvature"),
        ("lemma-2.4.1/2.4.3", "partial integration"),
        ("prop-7.1.7", "sine reduction"),
        ("thm-7.2.1", "closed-surface obstruction"),
        ("thm-7.2.6", "closed-surface solve"),
        ("thm-7.3.9", "boundary solve"),
        ("rem-1.1.16", "pullback naturality"),
        ("rem-1.1.5", "curvature homogeneity"),
    ] {
        s.push_str(&format!("  {anchor:<24} {what}\n"));
    }
    s
}

/// Top-level dispatch used by the binary; returns the report and exit code.
pub fn run(cfg: &RunConfig) -> (Option<RunReport>, i32) {
    let result = match cfg.command {
        Command::Verify => cmd_verify(cfg),
        Command::Synthesize => cmd_synthesize(cfg),
        Command::Surface2d => cmd_surface2d(cfg),
        Command::Info => {
            println!("{}", info_text());
            return (None, EXIT_OK);
        }
    };
    match result {
        Ok(report) => {
            for line in report.summary_lines() {
                println!("{line}");
            }
            let code = if report.all_pass() { EXIT_OK } else { EXIT_CHECK_FAILED };
            (Some(report), code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            (None, e.exit_code())
        }
    }
}
