//! Verification suites: each runs a family of identity checks at one or
//! several resolutions and emits pass/fail records.

use super::config::{MetricSpec, PerturbationTerm, RunConfig};
use super::report::CheckRecord;
use crate::deform::{
    change, coefficient_table, conform, direct_quantities, predict_change_scal,
    predict_chi, predict_conform_scal, predict_stretch, predict_switch, stretch, switch,
    ChiMode, SWITCH_LINE_IDS,
};
use crate::geometry::{
    distribution_scalars, integration_identity_residuals, laplace_beltrami,
    line_distribution_scalars, orthogonal_complement, scal_oracle, Block, Distribution,
    DistributionGeometry, GeometryError, MetricField,
};
use crate::lattice::{Grid, ScalarField, Scheme, VectorField};
use crate::solve::{preset_distribution, Preset, Primitive, TorusDiffeo, TrigPoly};
use crate::upsilon::{
    constant_point_coefficient, exponent_bounds_check, linearize_apply, s_map, upsilon,
    UpsilonContext,
};
use crate::util::random_bounded_field;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

const SPECTRAL_ABS_TOL: f64 = 1e-8;
const MIN_ORDER: f64 = 3.5;
const ROUNDOFF_FLOOR: f64 = 1e-11;

/// Standard perturbed-flat metric of the verification suites.
pub fn standard_metric_spec(dim: usize, amplitude: f64) -> MetricSpec {
    let mut terms = Vec::new();
    for i in 0..dim {
        for j in i..dim {
            let mut freqs = vec![0i32; dim];
            freqs[(i + j) % dim] = 1;
            if dim > 1 {
                freqs[(i + 2 * j + 1) % dim] = if (i + j) % 2 == 0 { 1 } else { -1 };
            }
            terms.push(PerturbationTerm {
                i,
                j,
                freqs,
                phase: 0.3 + 0.7 * (i * dim + j) as f64,
                weight: 1.0 / (1.0 + (i + j) as f64),
            });
        }
    }
    MetricSpec::PerturbedFlat { amplitude, terms }
}

fn torus(n: usize, dim: usize) -> Grid {
    Grid::torus(&vec![n; dim], &vec![1.0; dim]).unwrap()
}

fn v_choices(grid: &Grid) -> Vec<(&'static str, Distribution)> {
    vec![
        (
            "coordinate2",
            preset_distribution(Preset::Coordinate(2), grid).expect("preset"),
        ),
        (
            "contact3",
            preset_distribution(Preset::Contact3, grid).expect("preset"),
        ),
    ]
}

fn resolutions(cfg: &RunConfig) -> Vec<usize> {
    cfg.resolutions.clone().unwrap_or_else(|| vec![32, 48, 64])
}

/// Collects per-resolution errors of a named family of quantities and turns
/// them into order-based or absolute checks depending on the scheme.
struct LineErrors {
    names: Vec<String>,
    anchors: Vec<String>,
    /// errors[line][resolution]
    errors: Vec<Vec<f64>>,
}

impl LineErrors {
    fn new() -> LineErrors {
        LineErrors { names: Vec::new(), anchors: Vec::new(), errors: Vec::new() }
    }

    fn push(&mut self, name: String, anchor: &str, err: f64) {
        if let Some(idx) = self.names.iter().position(|n| *n == name) {
            self.errors[idx].push(err);
        } else {
            self.names.push(name);
            self.anchors.push(anchor.to_string());
            self.errors.push(vec![err]);
        }
    }

    fn into_checks(self, scheme: Scheme, res: &[usize]) -> Vec<CheckRecord> {
        self.names
            .into_iter()
            .zip(self.anchors)
            .zip(self.errors)
            .map(|((name, anchor), errs)| match scheme {
                Scheme::Spectral => {
                    CheckRecord::absolute(&name, &anchor, *errs.last().unwrap(), SPECTRAL_ABS_TOL)
                }
                Scheme::Fd4 => CheckRecord::order_based(
                    &name,
                    &anchor,
                    res,
                    &errs,
                    MIN_ORDER,
                    ROUNDOFF_FLOOR,
                ),
            })
            .collect()
    }
}

fn suite_resolutions(cfg: &RunConfig) -> Vec<usize> {
    match cfg.scheme {
        Scheme::Spectral => vec![*resolutions(cfg).last().unwrap()],
        Scheme::Fd4 => resolutions(cfg),
    }
}

// ---------------------------------------------------------------------------

/// Transformation laws of the sign-flip surgery, line by line.
pub fn suite_switch(cfg: &RunConfig) -> Result<Vec<CheckRecord>, GeometryError> {
    let res = suite_resolutions(cfg);
    let scheme = cfg.scheme;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u_mix = crate::util::TrigMix::sample(&mut rng, 3, 3, 2).normalised();
    let mut lines = LineErrors::new();
    for &n in &res {
        let grid = torus(n, 3);
        let g = standard_metric_spec(3, 0.2)
            .build(&grid)
            .map_err(|e| GeometryError::Invalid(e.to_string()))?;
        let u = u_mix.field(&grid);
        for (vname, v) in v_choices(&grid) {
            let pred = predict_switch(&g, &v, &u, scheme)?;
            let h = switch(&g, &v)?;
            let direct = direct_quantities(&h, &v, &u, scheme)?;
            for id in SWITCH_LINE_IDS {
                let err = pred.get(id).sub(direct.get(id)).linf_norm();
                lines.push(format!("switch/{vname}/{id}"), "thm-3.2.4", err);
            }
        }
    }
    Ok(lines.into_checks(scheme, &res))
}

/// Transformation laws of stretching, the conformal law, the combined
/// surgery law and the chi laws.
pub fn suite_stretch(cfg: &RunConfig) -> Result<Vec<CheckRecord>, GeometryError> {
    let res = suite_resolutions(cfg);
    let scheme = cfg.scheme;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5745_4c4c);
    // lowest-band random factors: the surged curvatures involve 1/f^2-type
    // compositions whose spectra broaden quickly, and the pinned resolution
    // sweep has to sit in the asymptotic regime
    let f_mix = crate::util::TrigMix::sample(&mut rng, 3, 3, 1).normalised();
    let k_mix = crate::util::TrigMix::sample(&mut rng, 3, 3, 1).normalised();
    let u_mix = crate::util::TrigMix::sample(&mut rng, 3, 2, 1).normalised();
    let mut lines = LineErrors::new();
    for &n in &res {
        let grid = torus(n, 3);
        let g = standard_metric_spec(3, 0.2)
            .build(&grid)
            .map_err(|e| GeometryError::Invalid(e.to_string()))?;
        // random trig factors inside [0.5, 2.5]
        let f = ScalarField::from_fn(&grid, |x| 1.5 + 0.7 * f_mix.eval(grid.lengths(), x));
        let kappa = ScalarField::from_fn(&grid, |x| 1.5 + 0.7 * k_mix.eval(grid.lengths(), x));
        let u = u_mix.field(&grid);

        // conformal law (distribution independent)
        let pred_conf = predict_conform_scal(&g, &kappa, scheme)?;
        let oracle_conf = scal_oracle(&conform(&g, &kappa)?, scheme)?;
        lines.push(
            "conform/scal".into(),
            "eq-3.24",
            pred_conf.sub(&oracle_conf).linf_norm(),
        );

        for (vname, v) in v_choices(&grid) {
            let pred = predict_stretch(&g, &f, &v, &u, scheme)?;
            let gbar = stretch(&g, &f, &v)?;
            let direct = direct_quantities(&gbar, &v, &u, scheme)?;
            for id in SWITCH_LINE_IDS {
                let err = pred.get(id).sub(direct.get(id)).linf_norm();
                lines.push(format!("stretch/{vname}/{id}"), "thm-3.3.1", err);
            }

            let pred_ch = predict_change_scal(&g, &f, &kappa, &v, scheme)?;
            let oracle_ch = scal_oracle(&change(&g, &f, &kappa, &v)?, scheme)?;
            lines.push(
                format!("change/{vname}/scal"),
                "prop-3.6.1",
                pred_ch.sub(&oracle_ch).linf_norm(),
            );

            for (mode, mode_name) in [
                (ChiMode::StretchV, "stretch_v"),
                (ChiMode::StretchH, "stretch_h"),
                (ChiMode::Conform, "conform"),
            ] {
                let pred = predict_chi(&g, &f, &v, mode, scheme)?;
                let surged = match mode {
                    ChiMode::StretchV => stretch(&g, &f, &v)?,
                    ChiMode::StretchH => {
                        let h = orthogonal_complement(&g, &v)?;
                        stretch(&g, &f, &h)?
                    }
                    ChiMode::Conform => conform(&g, &f)?,
                };
                let direct = distribution_scalars(&surged, &v, scheme)?.chi;
                lines.push(
                    format!("chi/{vname}/{mode_name}"),
                    "lemma-3.7.1",
                    pred.sub(&direct).linf_norm(),
                );
            }
        }
    }
    Ok(lines.into_checks(scheme, &res))
}

/// Derivative-free identities: the sign flip, the surgery compositions, the
/// coefficient battery, exponent bounds and curvature homogeneity.
pub fn suite_algebra(cfg: &RunConfig) -> Result<Vec<CheckRecord>, GeometryError> {
    let mut checks = Vec::new();
    let grid = torus(24, 2);
    let g = standard_metric_spec(2, 0.2)
        .build(&grid)
        .map_err(|e| GeometryError::Invalid(e.to_string()))?;

    // scal_{-h} = -scal_h via the full-tangent sign flip
    let v = preset_distribution(Preset::Coordinate(1), &grid)?;
    let h = switch(&g, &v)?;
    let full = preset_distribution(Preset::Coordinate(2), &grid)?;
    let neg_h = switch(&h, &full)?;
    let flip = scal_oracle(&neg_h, cfg.scheme)?
        .add(&scal_oracle(&h, cfg.scheme)?)
        .linf_norm();
    checks.push(CheckRecord::absolute("scal sign flip", "cor-3.2.5", flip, 1e-10));

    // homogeneity scal(h/c) = c scal(h)
    let c = 2.3;
    let hom = scal_oracle(&h.scale(1.0 / c)?, cfg.scheme)?
        .sub(&scal_oracle(&h, cfg.scheme)?.scale(c))
        .linf_norm();
    checks.push(CheckRecord::absolute("curvature homogeneity", "rem-1.1.5", hom, 1e-10));

    // composition identities
    let metric_diff = |a: &MetricField, b: &MetricField| -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..a.n() {
            for j in 0..a.n() {
                for (x, y) in a.entry(i, j).iter().zip(b.entry(i, j)) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        worst
    };
    let f0 = ScalarField::from_fn(&grid, |x| 1.2 + 0.4 * (TAU * x[0]).sin());
    let f1 = ScalarField::from_fn(&grid, |x| 0.8 + 0.3 * (TAU * x[1]).cos());
    checks.push(CheckRecord::absolute(
        "switch involution",
        "rem-3.1.4",
        metric_diff(&switch(&switch(&g, &v)?, &v)?, &g),
        1e-12,
    ));
    checks.push(CheckRecord::absolute(
        "stretch composition",
        "rem-3.1.8",
        metric_diff(
            &stretch(&stretch(&g, &f0, &v)?, &f1, &v)?,
            &stretch(&g, &f0.mul(&f1), &v)?,
        ),
        1e-12,
    ));
    let hdist = orthogonal_complement(&g, &v)?;
    checks.push(CheckRecord::absolute(
        "conform block decomposition",
        "rem-3.1.12",
        metric_diff(
            &conform(&g, &f0)?,
            &stretch(&stretch(&g, &f0, &hdist)?, &f0, &v)?,
        ),
        1e-12,
    ));
    checks.push(CheckRecord::absolute(
        "conform/stretch commutation",
        "rem-3.1.13",
        metric_diff(
            &conform(&stretch(&g, &f0, &v)?, &f1)?,
            &stretch(&conform(&g, &f1)?, &f0, &v)?,
        ),
        1e-12,
    ));

    // coefficient battery over n <= 8, every q, 100 log-spaced points
    let xs: Vec<f64> = (0..100).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 99.0)).collect();
    let mut worst_b: f64 = 0.0;
    let mut worst_c: f64 = 0.0;
    let mut worst_d: f64 = 0.0;
    let mut worst_e: f64 = 0.0;
    for n in 2..=8usize {
        for q in 0..=n {
            let t = coefficient_table(n, q);
            let (nf, qf) = (n as f64, q as f64);
            for &x in &xs {
                let e = t.e(x);
                let scale = 1.0 + (nf * (1.0 + x * x) * e).abs() + ((qf - 1.0) * x + qf / x).abs();
                worst_b = worst_b
                    .max(((nf - 1.0) * (1.0 + x * x) * e + ((qf - 1.0) * x * x + qf) / x).abs() / scale);
                worst_c = worst_c.max(
                    ((nf - 1.0) * e + qf / x - x / (1.0 + x * x)).abs()
                        / (1.0 + (qf / x).abs()),
                );
                let f = t.f(x);
                let lhs_d = 2.0 * (nf - 1.0) * f
                    - nf * (nf - 1.0) * e * e
                    - qf * (qf + 3.0) / (x * x)
                    - 2.0 * (nf - 1.0) * qf * e / x;
                let rhs_d = t.a(x) * x / (1.0 + x * x);
                let scale_d = 1.0 + lhs_d.abs() + (qf * (qf + 3.0) / (x * x)).abs();
                worst_d = worst_d.max((lhs_d - rhs_d).abs() / scale_d);
                let lhs_e = (nf - 1.0) * (1.0 + x * x) * (-2.0 * f + nf * e * e)
                    + qf / (x * x) * ((qf - 1.0) * x * x + (qf + 3.0))
                    + 2.0 * (nf - 1.0) * e / x * ((qf - 2.0) * x * x + qf);
                let rhs_e = t.b(x) * x / (1.0 + x * x);
                // relative to the size of the combined terms (they reach 1e6
                // at the small end of the sample range)
                let scale_e = 1.0
                    + lhs_e.abs()
                    + (qf / (x * x) * ((qf - 1.0) * x * x + qf + 3.0)).abs()
                    + ((nf - 1.0) * (1.0 + x * x) * 2.0 * f).abs();
                worst_e = worst_e.max((lhs_e - rhs_e).abs() / scale_e);
            }
        }
    }
    checks.push(CheckRecord::absolute("coefficient identity b", "eq-4.3b", worst_b, 1e-12));
    checks.push(CheckRecord::absolute("coefficient identity c", "eq-4.3c", worst_c, 1e-12));
    checks.push(CheckRecord::absolute("coefficient identity d", "eq-4.3d", worst_d, 1e-11));
    checks.push(CheckRecord::absolute("coefficient identity e", "eq-4.3e", worst_e, 1e-11));

    // exponent bounds up to n = 12
    let mut all = true;
    for n in 2..=12 {
        for q in 0..=n {
            all &= exponent_bounds_check(n, q);
        }
    }
    checks.push(CheckRecord::boolean("exponent bounds", "prop-6.2.4", all));
    Ok(checks)
}

/// Coefficient identities only (fast subset of the algebra suite).
pub fn suite_coefficients(cfg: &RunConfig) -> Result<Vec<CheckRecord>, GeometryError> {
    let all = suite_algebra(cfg)?;
    Ok(all
        .into_iter()
        .filter(|c| c.anchor.starts_with("eq-4.3") || c.anchor == "prop-6.2.4")
        .collect())
}

/// Consistency web tying the frame route to the coordinate oracle.
pub fn suite_consistency(cfg: &RunConfig) -> Result<Vec<CheckRecord>, GeometryError> {
    let mut checks = Vec::new();
    let scheme = cfg.scheme;
    let res = suite_resolutions(cfg);
    let mut lines = LineErrors::new();

    for &n in &res {
        let grid = torus(n, 3);
        let g = standard_metric_spec(3, 0.2)
            .build(&grid)
            .map_err(|e| GeometryError::Invalid(e.to_string()))?;
        let plane = preset_distribution(Preset::Contact3, &grid)?;
        let geom = DistributionGeometry::new(&g, &plane, scheme)?;
        let s = &geom.scalars;
        let oracle = scal_oracle(&g, scheme)?;

        lines.push(
            "scal decomposition".into(),
            "rem-2.2.22",
            oracle.sub(&s.scal()).linf_norm(),
        );
        lines.push(
            "qual pairing".into(),
            "fact-2.2.30",
            s.scal_vh.add(&s.qual_v.add(&s.qual_h)).linf_norm(),
        );
        lines.push(
            "twist cross-check V".into(),
            "fact-2.3.3",
            s.twist_sq_v.sub(&s.sigma_v.sub(&s.tau_v).scale(2.0)).linf_norm(),
        );
        lines.push(
            "twist cross-check H".into(),
            "fact-2.3.3",
            s.twist_sq_h.sub(&s.sigma_h.sub(&s.tau_h).scale(2.0)).linf_norm(),
        );

        // frame-route Christoffel cross-check
        let frame = &geom.frame;
        let cov = crate::geometry::on_christoffel(
            &g,
            frame,
            crate::geometry::ChristoffelMethod::Covariant,
            scheme,
        )?;
        let kos = crate::geometry::on_christoffel(
            &g,
            frame,
            crate::geometry::ChristoffelMethod::Koszul,
            scheme,
        )?;
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for node in 0..grid.num_nodes() {
                        worst = worst.max((cov.get(i, j, k, node) - kos.get(i, j, k, node)).abs());
                    }
                }
            }
        }
        lines.push("christoffel route agreement".into(), "rem-2.1.19", worst);

        // Laplacian split / first-order / chain / product rules
        let calc = geom.calculus();
        let f0 = ScalarField::from_fn(&grid, |x| 1.0 + 0.3 * (TAU * x[0]).sin() * (TAU * x[2]).cos());
        let f1 = ScalarField::from_fn(&grid, |x| 0.4 * (TAU * x[1]).cos() - 0.1);
        let split = calc
            .sub_laplacian(&f0, Block::V, Block::Full)?
            .add(&calc.sub_laplacian(&f0, Block::H, Block::Full)?)
            .sub(&laplace_beltrami(&g, &f0, scheme)?)
            .linf_norm();
        lines.push("laplacian split".into(), "rem-2.2.9", split);
        let first_order = calc
            .sub_laplacian(&f0, Block::V, Block::H)?
            .sub(&calc.pair_div_df(Block::V, Block::H, &f0)?)
            .linf_norm();
        lines.push("mixed laplacian is first order".into(), "rem-2.2.10", first_order);
        let kf = f0.map(|x| x * x * x);
        let chain = calc
            .sub_laplacian(&kf, Block::V, Block::V)?
            .sub(
                &f0.map(|x| 3.0 * x * x)
                    .mul(&calc.sub_laplacian(&f0, Block::V, Block::V)?)
                    .add(&f0.map(|x| 6.0 * x).mul(&calc.pair_df_dh(Block::V, &f0, &f0)?)),
            )
            .linf_norm();
        lines.push("laplacian chain rule".into(), "rem-2.2.11", chain);
        let product = calc
            .sub_laplacian(&f0.mul(&f1), Block::H, Block::H)?
            .sub(
                &f0.mul(&calc.sub_laplacian(&f1, Block::H, Block::H)?)
                    .add(&f1.mul(&calc.sub_laplacian(&f0, Block::H, Block::H)?))
                    .add(&calc.pair_df_dh(Block::H, &f0, &f1)?.scale(2.0)),
            )
            .linf_norm();
        lines.push("laplacian product rule".into(), "rem-2.2.12", product);

        // line-distribution identity battery (V = coordinate line)
        let vline = preset_distribution(Preset::Coordinate(1), &grid)?;
        let sl = distribution_scalars(&g, &vline, scheme)?;
        let ls = line_distribution_scalars(&g, &vline, scheme)?;
        let line_defect = sl
            .sigma_v
            .sub(&sl.tau_v)
            .linf_norm()
            .max(sl.sigma_v.sub(&sl.divv_sq_h).linf_norm())
            .max(sl.sigma_v.sub(&g.inner(&ls.nabla_vv, &ls.nabla_vv)).linf_norm())
            .max(sl.scal_vv.linf_norm())
            .max(sl.qual_v.sub(&ls.dv_div.scale(ls.eps_v).add(&sl.sigma_v)).linf_norm())
            .max(
                sl.xi
                    .sub(
                        &ls.dv_div
                            .scale(2.0 * ls.eps_v)
                            .add(&ls.div_sq.scale(ls.eps_v))
                            .add(&sl.sigma_h.add(&sl.tau_h).scale(0.5)),
                    )
                    .linf_norm(),
            );
        lines.push("line-case identities".into(), "fact-2.2.35", line_defect);

        // Riemannian positivity (node-wise boolean at this resolution)
        let mut positive = true;
        for node in 0..grid.num_nodes() {
            positive &= s.sigma_h.data()[node] >= s.tau_h.data()[node].abs() - 1e-9;
            positive &= s.sigma_v.data()[node] >= s.tau_v.data()[node].abs() - 1e-9;
        }
        if &n == res.last().unwrap() {
            checks.push(CheckRecord::boolean(
                "sigma dominates |tau| (Riemannian)",
                "prop-2.3.4",
                positive,
            ));
        }
    }
    checks.extend(lines.into_checks(scheme, &res));

    // integration identities at the pinned spectral resolution
    {
        let grid = torus(48, 3);
        let g = MetricField::flat(&grid);
        let plane = preset_distribution(Preset::Contact3, &grid)?;
        let v = orthogonal_complement(&g, &plane)?;
        let f = ScalarField::from_fn(&grid, |x| (TAU * x[0]).sin() + 0.3 * (TAU * x[2]).cos());
        let hfun = ScalarField::from_fn(&grid, |x| (TAU * x[1]).cos() * (TAU * x[2]).sin());
        let ufun = ScalarField::from_fn(&grid, |x| 0.7 * (TAU * (x[0] + x[1])).sin());
        let (r1, r2) =
            integration_identity_residuals(&g, &v, &f, &hfun, &ufun, Scheme::Spectral)?;
        checks.push(CheckRecord::absolute("partial integration (gradient pairing)", "lemma-2.4.1", r1, 1e-6));
        checks.push(CheckRecord::absolute("partial integration (divergence pairing)", "lemma-2.4.3", r2, 1e-6));
    }

    // foliation curvature identity on an integrable preset (product metric)
    {
        let grid = torus(32, 3);
        let kappa = |y: f64, z: f64| (0.3 * (TAU * y).sin() * (TAU * z).cos()).exp();
        let g = MetricField::from_fn(&grid, |i, j, x| {
            if i != j {
                0.0
            } else if i == 0 {
                1.0
            } else {
                kappa(x[1], x[2]).powi(-2)
            }
        })?;
        let h = Distribution::new(vec![
            VectorField::coordinate_axis(&grid, 1),
            VectorField::coordinate_axis(&grid, 2),
        ])?;
        let fol = crate::geometry::foliation_scal(&g, &h, Scheme::Spectral)?;
        let grid2 = torus(32, 2);
        let g2 = MetricField::from_fn(&grid2, |i, j, x| {
            if i != j {
                0.0
            } else {
                kappa(x[0], x[1]).powi(-2)
            }
        })?;
        let oracle2 = scal_oracle(&g2, Scheme::Spectral)?;
        let mut worst: f64 = 0.0;
        for iy in 0..32 {
            for iz in 0..32 {
                let node3 = grid.node_index(&[0, iy, iz]);
                let node2 = grid2.node_index(&[iy, iz]);
                worst = worst.max((fol.data()[node3] - oracle2.data()[node2]).abs());
            }
        }
        checks.push(CheckRecord::absolute("foliation curvature vs factor", "lemma-2.3.10", worst, 1e-6));
    }
    Ok(checks)
}

/// Linearisation accuracy on the synthesis scenarios.
pub fn suite_linearize(cfg: &RunConfig) -> Result<Vec<CheckRecord>, GeometryError> {
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4c49_4e45);

    let scenarios: Vec<(&str, Grid, Distribution)> = {
        let g4 = torus(12, 4);
        let flat4 = MetricField::flat(&g4);
        let h4 = preset_distribution(Preset::RotHyperplane, &g4)?;
        let v4 = orthogonal_complement(&flat4, &h4)?;
        let g3 = torus(16, 3);
        let v3 = preset_distribution(Preset::Contact3, &g3)?;
        vec![("lorentz-line", g4, v4), ("contact-plane", g3, v3)]
    };

    for (name, grid, v) in scenarios {
        let g = MetricField::flat(&grid);
        let ctx = UpsilonContext::new(&g, &v, Scheme::Fd4)?;
        let mut worst_rel: f64 = 0.0;
        for _trial in 0..5 {
            let f = random_bounded_field(&mut rng, &grid, 1.3, 0.3);
            let vdir = random_bounded_field(&mut rng, &grid, 0.0, 1.0);
            let s = random_bounded_field(&mut rng, &grid, 0.5, 2.0);
            let lin = linearize_apply(&ctx, &s, &f, &vdir)?;
            let eps = 1e-5;
            let fp = f.zip_map(&vdir, |a, b| a + eps * b);
            let fm = f.zip_map(&vdir, |a, b| a - eps * b);
            let num = upsilon(&ctx, &s, &fp)?
                .sub(&upsilon(&ctx, &s, &fm)?)
                .scale(1.0 / (2.0 * eps));
            worst_rel = worst_rel.max(lin.sub(&num).linf_norm() / (1.0 + lin.linf_norm()));
        }
        checks.push(CheckRecord::absolute(
            &format!("linearisation vs central differences ({name})"),
            "lemma-6.2.3",
            worst_rel,
            1e-6,
        ));

        // constant-point zeroth-order closed form
        let mut worst_const: f64 = 0.0;
        for &c in &[0.8, 1.0, 1.9] {
            let f = ScalarField::constant(&grid, c);
            let s = s_map(&ctx, &f)?;
            let one = ScalarField::constant(&grid, 1.0);
            let lin = linearize_apply(&ctx, &s, &f, &one)?;
            let closed = constant_point_coefficient(&ctx, c);
            worst_const = worst_const
                .max(lin.sub(&closed).linf_norm() / (1.0 + closed.linf_norm()));
        }
        checks.push(CheckRecord::absolute(
            &format!("constant-point coefficient ({name})"),
            "prop-6.2.4",
            worst_const,
            1e-9,
        ));
    }
    Ok(checks)
}

/// Naturality of the curvature oracle under torus diffeomorphism pullbacks.
pub fn suite_naturality(cfg: &RunConfig) -> Result<Vec<CheckRecord>, GeometryError> {
    let res = resolutions(cfg);
    let phi = TorusDiffeo {
        maps: vec![
            Primitive::Translate { offsets: vec![0.15, 0.4] },
            Primitive::Shear {
                target: 1,
                source: 0,
                psi: TrigPoly { terms: vec![(0.25, 1, 0.3)] },
            },
            Primitive::Warp { axis: 0, rho: 0.08, phase: 0.7 },
        ],
    };
    let mut errs = Vec::new();
    for &n in &res {
        let grid = torus(n, 2);
        let g = standard_metric_spec(2, 0.2)
            .build(&grid)
            .map_err(|e| GeometryError::Invalid(e.to_string()))?;
        let pg = crate::solve::pullback_metric(&g, &phi)?;
        let lhs = scal_oracle(&pg, Scheme::Fd4)?;
        let rhs = crate::solve::pullback_scalar(&scal_oracle(&g, Scheme::Fd4)?, &phi)?;
        errs.push(lhs.sub(&rhs).linf_norm());
    }
    Ok(vec![CheckRecord::order_based(
        "pullback naturality of scal",
        "rem-1.1.16",
        &res,
        &errs,
        MIN_ORDER,
        ROUNDOFF_FLOOR,
    )])
}

/// Identity-pullback and translation sanity checks (cheap extras for the
/// naturality suite).
pub fn suite_naturality_basics(cfg: &RunConfig) -> Result<Vec<CheckRecord>, GeometryError> {
    let grid = torus(32, 2);
    let g = standard_metric_spec(2, 0.2)
        .build(&grid)
        .map_err(|e| GeometryError::Invalid(e.to_string()))?;
    let _ = cfg;
    let mut checks = Vec::new();
    let ident = TorusDiffeo::identity();
    let pg = crate::solve::pullback_metric(&g, &ident)?;
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for (a, b) in pg.entry(i, j).iter().zip(g.entry(i, j)) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    checks.push(CheckRecord::absolute("identity pullback", "rem-1.1.16", worst, 1e-11));
    let phi = TorusDiffeo { maps: vec![Primitive::Translate { offsets: vec![0.5, 0.25] }] };
    let s_pg = scal_oracle(&crate::solve::pullback_metric(&g, &phi)?, Scheme::Spectral)?;
    let ps = crate::solve::pullback_scalar(&scal_oracle(&g, Scheme::Spectral)?, &phi)?;
    checks.push(CheckRecord::absolute(
        "translation equivariance",
        "rem-1.1.16",
        s_pg.sub(&ps).linf_norm(),
        1e-7,
    ));
    Ok(checks)
}
