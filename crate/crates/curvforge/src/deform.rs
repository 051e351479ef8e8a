//! The switch/stretch/conform/change metric surgeries, the scalar
//! coefficient table K, E, F, a_{n,q}, b_{n,q}, and evaluators for the
//! predicted transformation law of each surgery.
//!
//! Every `predict_*` evaluator recomputes the base-metric quantities fresh
//! from (g, V); the direct computation on the surged metric shares no
//! intermediates with it.

use crate::geometry::{
    laplace_beltrami, orthogonal_projector, Block, Distribution, DistributionGeometry,
    GeometryError, MetricField, MetricOps,
};
use crate::lattice::{MatrixField, ScalarField, Scheme};

pub const POSITIVITY_TOL: f64 = 1e-10;

fn check_positive(f: &ScalarField, what: &str) -> Result<(), GeometryError> {
    for (node, &v) in f.data().iter().enumerate() {
        if v <= POSITIVITY_TOL {
            return Err(GeometryError::NotPositive { node, value: v });
        }
    }
    let _ = what;
    Ok(())
}

/// Builds a metric from `G * (c_v P_V + c_h (I - P_V))` per node, where the
/// scale factors are scalar fields. The product `G P_V` is symmetric for a
/// g-orthogonal projector; the result is symmetrised to remove roundoff.
fn scaled_block_metric(
    g: &MetricField,
    v: &Distribution,
    cv: &ScalarField,
    ch: &ScalarField,
) -> Result<MetricField, GeometryError> {
    let grid = g.grid().clone();
    let n = g.n();
    let nodes = grid.num_nodes();
    let p = orthogonal_projector(g, v)?;
    let mut entries = vec![vec![0.0; nodes]; n * n];
    let mut gm = vec![0.0; n * n];
    let mut pm = vec![0.0; n * n];
    let mut out = vec![0.0; n * n];
    for node in 0..nodes {
        g.at(node, &mut gm);
        p.at(node, &mut pm);
        let a = cv.data()[node];
        let b = ch.data()[node];
        // out = G (b I + (a - b) P)
        for r in 0..n {
            for c in 0..n {
                let mut acc = b * gm[r * n + c];
                for k in 0..n {
                    acc += (a - b) * gm[r * n + k] * pm[k * n + c];
                }
                out[r * n + c] = acc;
            }
        }
        for r in 0..n {
            for c in 0..n {
                entries[r * n + c][node] = 0.5 * (out[r * n + c] + out[c * n + r]);
            }
        }
    }
    MetricField::new(MatrixField::from_entries(&grid, n, entries)?)
}

/// Sign flip along V: `switch(g,V)(w,z) = -g(w_V,z_V) + g(w_H,z_H)`.
pub fn switch(g: &MetricField, v: &Distribution) -> Result<MetricField, GeometryError> {
    let grid = g.grid().clone();
    if v.rank() == 0 {
        return Ok(g.clone());
    }
    let minus = ScalarField::constant(&grid, -1.0);
    let plus = ScalarField::constant(&grid, 1.0);
    scaled_block_metric(g, v, &minus, &plus)
}

/// Rescale along V: `stretch(g,f,V) = (f^{-2} g_V) ⊕ g_H`, f > 0.
pub fn stretch(
    g: &MetricField,
    f: &ScalarField,
    v: &Distribution,
) -> Result<MetricField, GeometryError> {
    check_positive(f, "stretch factor")?;
    let cv = f.map(|x| 1.0 / (x * x));
    let ch = ScalarField::constant(g.grid(), 1.0);
    scaled_block_metric(g, v, &cv, &ch)
}

/// Conformal deformation `kappa^{-2} g`, kappa > 0.
pub fn conform(g: &MetricField, kappa: &ScalarField) -> Result<MetricField, GeometryError> {
    check_positive(kappa, "conformal factor")?;
    let grid = g.grid().clone();
    let n = g.n();
    let nodes = grid.num_nodes();
    let mut entries = vec![vec![0.0; nodes]; n * n];
    for i in 0..n {
        for j in 0..n {
            let gij = g.entry(i, j);
            let e = &mut entries[i * n + j];
            for node in 0..nodes {
                let k = kappa.data()[node];
                e[node] = gij[node] / (k * k);
            }
        }
    }
    MetricField::new(MatrixField::from_entries(&grid, n, entries)?)
}

/// The full surgery `conform(stretch(switch(g,V), f, V), kappa)` turning a
/// Riemannian metric into an index-q metric with V timelike.
pub fn change(
    g: &MetricField,
    f: &ScalarField,
    kappa: &ScalarField,
    v: &Distribution,
) -> Result<MetricField, GeometryError> {
    if g.index() != 0 {
        return Err(GeometryError::WrongIndex { expected: 0, got: g.index() });
    }
    let switched = switch(g, v)?;
    let stretched = stretch(&switched, f, v)?;
    conform(&stretched, kappa)
}

// ---------------------------------------------------------------------------
// coefficient table

/// The scalar coefficient functions of one real variable attached to a
/// dimension/rank pair (n, q).
#[derive(Debug, Clone, Copy)]
pub struct CoefficientTable {
    pub n: usize,
    pub q: usize,
}

impl CoefficientTable {
    pub fn new(n: usize, q: usize) -> CoefficientTable {
        assert!(n >= 2 && q <= n);
        CoefficientTable { n, q }
    }

    /// `K(x) = ((1+x^2)/x^{2q})^{1/(2(n-1))}`.
    pub fn k(&self, x: f64) -> f64 {
        let (n, q) = (self.n as f64, self.q as f64);
        ((1.0 + x * x) / x.powf(2.0 * q)).powf(1.0 / (2.0 * (n - 1.0)))
    }

    /// `K'(x) = -((q-1)x^2 + q) / ((n-1)x(1+x^2)) * K(x)`.
    pub fn kp(&self, x: f64) -> f64 {
        self.e(x) * self.k(x)
    }

    /// `E = K'/K`.
    pub fn e(&self, x: f64) -> f64 {
        let (n, q) = (self.n as f64, self.q as f64);
        -((q - 1.0) * x * x + q) / ((n - 1.0) * x * (1.0 + x * x))
    }

    /// `F = K''/K`.
    pub fn f(&self, x: f64) -> f64 {
        let (n, q) = (self.n as f64, self.q as f64);
        let x2 = x * x;
        ((q - 1.0) * (n + q - 2.0) * x2 * x2
            + ((n - 1.0) * (2.0 * q + 1.0) + 2.0 * q * (q - 1.0)) * x2
            + q * (n - 1.0 + q))
            / ((n - 1.0).powi(2) * x2 * (1.0 + x2).powi(2))
    }

    fn abc(&self) -> (f64, f64, f64) {
        let (n, q) = (self.n as f64, self.q as f64);
        (
            (q - 1.0).powi(2) - (n - 1.0) * (q + 3.0),
            -2.0 * (q - 1.0) * (n - 1.0 - q),
            -q * (n - 1.0 - q),
        )
    }

    /// Coefficient of `|df|^2_g` in the elliptic operator.
    pub fn a(&self, x: f64) -> f64 {
        let n = self.n as f64;
        let (alpha, beta, gamma) = self.abc();
        let x2 = x * x;
        (alpha * x2 * x2 + beta * x2 + gamma) / ((n - 1.0) * x * x2 * (1.0 + x2))
    }

    /// Coefficient of `|df|^2_{g,V}`.
    pub fn b(&self, x: f64) -> f64 {
        let (n, q) = (self.n as f64, self.q as f64);
        let (_, beta, gamma) = self.abc();
        let x2 = x * x;
        ((q - 1.0) * (n - q) * x2 * x2 - beta * x2 - gamma) / ((n - 1.0) * x * x2)
    }

    /// Derivative of `a`, from the closed form
    /// `a'(x) = (-alpha x^6 + (alpha - 3 beta) x^4 - (beta + 5 gamma) x^2 - 3 gamma)
    ///          / ((n-1) x^4 (1+x^2)^2)`.
    pub fn ap(&self, x: f64) -> f64 {
        let n = self.n as f64;
        let (alpha, beta, gamma) = self.abc();
        let x2 = x * x;
        (-alpha * x2 * x2 * x2 + (alpha - 3.0 * beta) * x2 * x2 - (beta + 5.0 * gamma) * x2
            - 3.0 * gamma)
            / ((n - 1.0) * x2 * x2 * (1.0 + x2).powi(2))
    }

    /// Derivative of `b`: `b'(x) = (ab x^4 - bb x^2 - 3 gb) / ((n-1) x^4)` with
    /// `ab = (q-1)(n-q)`, `bb = 2(q-1)(n-1-q)`, `gb = q(n-1-q)`.
    pub fn bp(&self, x: f64) -> f64 {
        let (n, q) = (self.n as f64, self.q as f64);
        let ab = (q - 1.0) * (n - q);
        let bb = 2.0 * (q - 1.0) * (n - 1.0 - q);
        let gb = q * (n - 1.0 - q);
        let x2 = x * x;
        (ab * x2 * x2 - bb * x2 - 3.0 * gb) / ((n - 1.0) * x2 * x2)
    }
}

/// Build the coefficient table for (n, q).
pub fn coefficient_table(n: usize, q: usize) -> CoefficientTable {
    CoefficientTable::new(n, q)
}

// ---------------------------------------------------------------------------
// predicted quantities

/// One predicted field per transformation-law line, tagged with a stable
/// line identifier shared by the direct computation.
pub struct PredictedQuantities {
    pub lines: Vec<(&'static str, ScalarField)>,
}

impl PredictedQuantities {
    pub fn get(&self, id: &str) -> &ScalarField {
        &self
            .lines
            .iter()
            .find(|(k, _)| *k == id)
            .unwrap_or_else(|| panic!("no line {id}"))
            .1
    }
}

pub const SWITCH_LINE_IDS: [&str; 17] = [
    "divv_sq_h",
    "divh_sq_v",
    "sigma_h",
    "sigma_v",
    "tau_h",
    "tau_v",
    "qual_v",
    "qual_h",
    "scal_vh",
    "scal_vv",
    "scal_hh",
    "scal",
    "lap_vv_u",
    "lap_hh_u",
    "lap_u",
    "pair_divv_du_h",
    "pair_divh_du_v",
];

/// Direct evaluation of the 17 tracked quantities for any metric m and
/// distribution V (used as the ground truth against the predictions).
/// The full scalar curvature is taken from the coordinate oracle, keeping it
/// independent of the frame route.
pub fn direct_quantities(
    m: &MetricField,
    v: &Distribution,
    u: &ScalarField,
    scheme: Scheme,
) -> Result<PredictedQuantities, GeometryError> {
    let geom = DistributionGeometry::new(m, v, scheme)?;
    let calc = geom.calculus();
    let s = &geom.scalars;
    let oracle = crate::geometry::scal_oracle(m, scheme)?;
    let lines: Vec<(&'static str, ScalarField)> = vec![
        ("divv_sq_h", s.divv_sq_h.clone()),
        ("divh_sq_v", s.divh_sq_v.clone()),
        ("sigma_h", s.sigma_h.clone()),
        ("sigma_v", s.sigma_v.clone()),
        ("tau_h", s.tau_h.clone()),
        ("tau_v", s.tau_v.clone()),
        ("qual_v", s.qual_v.clone()),
        ("qual_h", s.qual_h.clone()),
        ("scal_vh", s.scal_vh.clone()),
        ("scal_vv", s.scal_vv.clone()),
        ("scal_hh", s.scal_hh.clone()),
        ("scal", oracle),
        ("lap_vv_u", calc.sub_laplacian(u, Block::V, Block::V)?),
        ("lap_hh_u", calc.sub_laplacian(u, Block::H, Block::H)?),
        ("lap_u", laplace_beltrami(m, u, scheme)?),
        ("pair_divv_du_h", calc.pair_div_df(Block::V, Block::H, u)?),
        ("pair_divh_du_v", calc.pair_div_df(Block::H, Block::V, u)?),
    ];
    Ok(PredictedQuantities { lines })
}

/// Predicted quantities of `switch(g, V)` from base-metric data only
/// (g must be Riemannian).
pub fn predict_switch(
    g: &MetricField,
    v: &Distribution,
    u: &ScalarField,
    scheme: Scheme,
) -> Result<PredictedQuantities, GeometryError> {
    if g.index() != 0 {
        return Err(GeometryError::WrongIndex { expected: 0, got: g.index() });
    }
    let geom = DistributionGeometry::new(g, v, scheme)?;
    let calc = geom.calculus();
    let s = &geom.scalars;
    let scal_g = crate::geometry::scal_oracle(g, scheme)?;

    let lap_vv = calc.sub_laplacian(u, Block::V, Block::V)?;
    let lap_hh = calc.sub_laplacian(u, Block::H, Block::H)?;
    let lap = laplace_beltrami(g, u, scheme)?;
    let pair_vh = calc.pair_div_df(Block::V, Block::H, u)?;
    let pair_hv = calc.pair_div_df(Block::H, Block::V, u)?;

    let lines: Vec<(&'static str, ScalarField)> = vec![
        ("divv_sq_h", s.divv_sq_h.clone()),
        ("divh_sq_v", s.divh_sq_v.scale(-1.0)),
        ("sigma_h", s.sigma_h.scale(-1.0)),
        ("sigma_v", s.sigma_v.clone()),
        ("tau_h", s.tau_h.scale(-1.0)),
        ("tau_v", s.tau_v.clone()),
        ("qual_v", s.qual_v.scale(-1.0).add(&s.tau_v.scale(2.0))),
        ("qual_h", s.qual_h.add(&s.tau_h.scale(-2.0))),
        (
            "scal_vh",
            s.scal_vh
                .add(&s.qual_v.scale(2.0))
                .add(&s.tau_v.scale(-2.0))
                .add(&s.tau_h.scale(2.0)),
        ),
        (
            "scal_vv",
            s.scal_vv
                .scale(-1.0)
                .add(&s.divv_sq_h.scale(-2.0))
                .add(&s.tau_v.scale(4.0))
                .add(&s.sigma_v.scale(-2.0)),
        ),
        (
            "scal_hh",
            s.scal_hh
                .add(&s.divh_sq_v.scale(2.0))
                .add(&s.sigma_h.scale(2.0))
                .add(&s.tau_h.scale(-4.0)),
        ),
        (
            "scal",
            scal_g
                .add(&s.scal_vv.scale(-2.0))
                .add(&s.qual_v.scale(4.0))
                .add(&s.divv_sq_h.scale(-2.0))
                .add(&s.divh_sq_v.scale(2.0))
                .add(&s.sigma_v.scale(-2.0))
                .add(&s.sigma_h.scale(2.0)),
        ),
        ("lap_vv_u", lap_vv.scale(-1.0)),
        ("lap_hh_u", lap_hh.clone()),
        (
            "lap_u",
            lap.add(&lap_vv.scale(-2.0)).add(&pair_hv.scale(-2.0)),
        ),
        ("pair_divv_du_h", pair_vh),
        ("pair_divh_du_v", pair_hv.scale(-1.0)),
    ];
    Ok(PredictedQuantities { lines })
}

/// Predicted quantities of `stretch(g, f, V)` from base-metric data
/// (g of any index; f > 0).
pub fn predict_stretch(
    g: &MetricField,
    f: &ScalarField,
    v: &Distribution,
    u: &ScalarField,
    scheme: Scheme,
) -> Result<PredictedQuantities, GeometryError> {
    check_positive(f, "stretch factor")?;
    let geom = DistributionGeometry::new(g, v, scheme)?;
    let calc = geom.calculus();
    let s = &geom.scalars;
    let q = v.rank() as f64;

    let f2 = f.mul(f);
    let inv_f = f.map(|x| 1.0 / x);
    let inv_f2 = f.map(|x| 1.0 / (x * x));
    let one_minus_f2 = f2.map(|x| 1.0 - x);

    let df_df_h = calc.pair_df_dh(Block::H, f, f)?;
    let df_df_v = calc.pair_df_dh(Block::V, f, f)?;
    let divv_df_h = calc.pair_div_df(Block::V, Block::H, f)?;
    let divh_df_v = calc.pair_div_df(Block::H, Block::V, f)?;
    let lap_hh_f = calc.sub_laplacian(f, Block::H, Block::H)?;
    let lap_vv_f = calc.sub_laplacian(f, Block::V, Block::V)?;

    let df_du_h = calc.pair_df_dh(Block::H, f, u)?;
    let df_du_v = calc.pair_df_dh(Block::V, f, u)?;
    let lap_vv_u = calc.sub_laplacian(u, Block::V, Block::V)?;
    let lap_hh_u = calc.sub_laplacian(u, Block::H, Block::H)?;
    let divv_du_h = calc.pair_div_df(Block::V, Block::H, u)?;
    let divh_du_v = calc.pair_div_df(Block::H, Block::V, u)?;

    // first block
    let divv_sq_h = s
        .divv_sq_h
        .add(&inv_f2.mul(&df_df_h).scale(q * q))
        .add(&inv_f.mul(&divv_df_h).scale(-2.0 * q));
    let divh_sq_v = f2.mul(&s.divh_sq_v);
    let half_sum = |x: &ScalarField| x.zip_map(&f2, |v, ff| 0.5 * (ff + 1.0 / ff) * v);
    let half_dif = |x: &ScalarField| x.zip_map(&f2, |v, ff| 0.5 * (ff - 1.0 / ff) * v);
    let sigma_h = half_sum(&s.sigma_h).add(&half_dif(&s.tau_h));
    let tau_h = half_sum(&s.tau_h).add(&half_dif(&s.sigma_h));
    let grad_mix = inv_f2
        .mul(&df_df_h)
        .scale(q)
        .add(&inv_f.mul(&divv_df_h).scale(-2.0));
    let f4 = f2.mul(&f2);
    let sigma_v = s
        .sigma_v
        .zip_map(&f4, |v, ff| 0.5 * (1.0 + ff) * v)
        .add(&s.tau_v.zip_map(&f4, |v, ff| 0.5 * (1.0 - ff) * v))
        .add(&grad_mix);
    let tau_v = s
        .tau_v
        .zip_map(&f4, |v, ff| 0.5 * (1.0 + ff) * v)
        .add(&s.sigma_v.zip_map(&f4, |v, ff| 0.5 * (1.0 - ff) * v))
        .add(&grad_mix);

    // Laplacian block
    let lap_vv_u_bar = f2.mul(&lap_vv_u).add(&f.mul(&df_du_v).scale(-(q - 2.0)));
    let lap_hh_u_bar = lap_hh_u.clone();
    let pair_hv_bar = f2.mul(&divh_du_v);
    let pair_vh_bar = divv_du_h.add(&inv_f.mul(&df_du_h).scale(-q));
    let lap_u_bar = lap_vv_u_bar
        .add(&lap_hh_u_bar)
        .add(&pair_hv_bar)
        .add(&pair_vh_bar);

    // qual block
    let sq = |x: &ScalarField| x.mul(x);
    let omf2_sq = sq(&one_minus_f2);
    let opf2_omf2 = f2.map(|x| (1.0 + x) * (1.0 - x));
    let qual_v_bar = f2
        .mul(&s.qual_v)
        .add(&f.mul(&divh_df_v).scale(-(q - 2.0)))
        .add(&omf2_sq.mul(&s.tau_v).scale(0.5))
        .add(&opf2_omf2.mul(&s.sigma_v).scale(0.5))
        .add(&inv_f2.mul(&df_df_h).scale(q))
        .add(&inv_f.mul(&divv_df_h).scale(-2.0));
    let qual_h_bar = s
        .qual_h
        .add(&inv_f.mul(&lap_hh_f).scale(-q))
        .add(&inv_f2.mul(&df_df_h).scale(q))
        .add(&inv_f2.mul(&omf2_sq).mul(&s.tau_h).scale(0.5))
        .add(&inv_f2.mul(&opf2_omf2).mul(&s.sigma_h).scale(-0.5));

    // scal block
    let scal_vh_bar = f2
        .mul(&s.qual_v)
        .scale(-1.0)
        .add(&f.mul(&divh_df_v).scale(q - 2.0))
        .add(&omf2_sq.mul(&s.tau_v).scale(-0.5))
        .add(&opf2_omf2.mul(&s.sigma_v).scale(-0.5))
        .add(&inv_f2.mul(&df_df_h).scale(-2.0 * q))
        .add(&inv_f.mul(&divv_df_h).scale(2.0))
        .add(&s.qual_h.scale(-1.0))
        .add(&inv_f.mul(&lap_hh_f).scale(q))
        .add(&inv_f2.mul(&omf2_sq).mul(&s.tau_h).scale(-0.5))
        .add(&inv_f2.mul(&opf2_omf2).mul(&s.sigma_h).scale(0.5));
    let scal_vv_bar = f2
        .mul(&s.scal_vv)
        .add(&f.mul(&lap_vv_f).scale(2.0 * (q - 1.0)))
        .add(&df_df_v.scale(-q * (q - 1.0)))
        .add(&inv_f2.mul(&df_df_h).scale(-q * (q - 1.0)))
        .add(&inv_f.mul(&divv_df_h).scale(2.0 * (q - 1.0)))
        .add(&one_minus_f2.mul(&s.divv_sq_h).scale(-1.0))
        .add(&one_minus_f2.zip_map(&f2, |a, ff| 0.5 * a * (1.0 + 3.0 * ff)).mul(&s.sigma_v))
        .add(&one_minus_f2.zip_map(&f2, |a, ff| 0.5 * a * (1.0 - 3.0 * ff)).mul(&s.tau_v));
    let scal_hh_bar = s
        .scal_hh
        .add(&one_minus_f2.mul(&s.divh_sq_v))
        .add(
            &one_minus_f2
                .zip_map(&f2, |a, ff| -0.5 * a * (3.0 + ff) / ff)
                .mul(&s.sigma_h),
        )
        .add(
            &one_minus_f2
                .zip_map(&f2, |a, ff| 0.5 * a * (3.0 - ff) / ff)
                .mul(&s.tau_h),
        );
    let scal_bar = f
        .mul(&lap_vv_f)
        .scale(2.0 * (q - 1.0))
        .add(&inv_f.mul(&lap_hh_f).scale(2.0 * q))
        .add(&df_df_v.scale(-q * (q - 1.0)))
        .add(&inv_f2.mul(&df_df_h).scale(-q * (q + 3.0)))
        .add(&f.mul(&divh_df_v).scale(2.0 * (q - 2.0)))
        .add(&inv_f.mul(&divv_df_h).scale(2.0 * (q + 1.0)))
        .add(&f2.mul(&s.scal_vv.add(&s.qual_v.scale(-2.0))))
        .add(&s.scal_hh.add(&s.qual_h.scale(-2.0)))
        .add(&one_minus_f2.mul(&s.divh_sq_v.sub(&s.divv_sq_h)))
        .add(&inv_f2.mul(&omf2_sq).mul(&s.sigma_h).scale(-0.5))
        .add(&inv_f2.mul(&opf2_omf2).mul(&s.tau_h).scale(0.5))
        .add(&omf2_sq.mul(&s.sigma_v).scale(-0.5))
        .add(&opf2_omf2.mul(&s.tau_v).scale(-0.5));

    let lines: Vec<(&'static str, ScalarField)> = vec![
        ("divv_sq_h", divv_sq_h),
        ("divh_sq_v", divh_sq_v),
        ("sigma_h", sigma_h),
        ("sigma_v", sigma_v),
        ("tau_h", tau_h),
        ("tau_v", tau_v),
        ("qual_v", qual_v_bar),
        ("qual_h", qual_h_bar),
        ("scal_vh", scal_vh_bar),
        ("scal_vv", scal_vv_bar),
        ("scal_hh", scal_hh_bar),
        ("scal", scal_bar),
        ("lap_vv_u", lap_vv_u_bar),
        ("lap_hh_u", lap_hh_u_bar),
        ("lap_u", lap_u_bar),
        ("pair_divv_du_h", pair_vh_bar),
        ("pair_divh_du_v", pair_hv_bar),
    ];
    Ok(PredictedQuantities { lines })
}

/// Predicted scalar curvature of `conform(g, kappa)`:
/// `2(n-1) kappa Lap_g(kappa) - n(n-1) <dkappa,dkappa>_g + kappa^2 scal_g`.
pub fn predict_conform_scal(
    g: &MetricField,
    kappa: &ScalarField,
    scheme: Scheme,
) -> Result<ScalarField, GeometryError> {
    check_positive(kappa, "conformal factor")?;
    let n = g.n() as f64;
    let ops = MetricOps::new(g, scheme)?;
    let lap = ops.laplacian(kappa)?;
    let grad_sq = ops.grad_inner(kappa, kappa)?;
    let scal_g = crate::geometry::scal_oracle(g, scheme)?;
    Ok(kappa
        .mul(&lap)
        .scale(2.0 * (n - 1.0))
        .add(&grad_sq.scale(-n * (n - 1.0)))
        .add(&kappa.mul(kappa).mul(&scal_g)))
}

/// Predicted scalar curvature of `change(g, f, kappa, V)` from base-metric
/// quantities (g Riemannian).
pub fn predict_change_scal(
    g: &MetricField,
    f: &ScalarField,
    kappa: &ScalarField,
    v: &Distribution,
    scheme: Scheme,
) -> Result<ScalarField, GeometryError> {
    if g.index() != 0 {
        return Err(GeometryError::WrongIndex { expected: 0, got: g.index() });
    }
    check_positive(f, "stretch factor")?;
    check_positive(kappa, "conformal factor")?;
    let geom = DistributionGeometry::new(g, v, scheme)?;
    let calc = geom.calculus();
    let s = &geom.scalars;
    let n = g.n() as f64;
    let q = v.rank() as f64;

    let lap_hh_k = calc.sub_laplacian(kappa, Block::H, Block::H)?;
    let lap_hh_f = calc.sub_laplacian(f, Block::H, Block::H)?;
    let lap_vv_k = calc.sub_laplacian(kappa, Block::V, Block::V)?;
    let lap_vv_f = calc.sub_laplacian(f, Block::V, Block::V)?;
    let dk_dk_h = calc.pair_df_dh(Block::H, kappa, kappa)?;
    let df_df_h = calc.pair_df_dh(Block::H, f, f)?;
    let df_dk_h = calc.pair_df_dh(Block::H, f, kappa)?;
    let dk_dk_v = calc.pair_df_dh(Block::V, kappa, kappa)?;
    let df_df_v = calc.pair_df_dh(Block::V, f, f)?;
    let df_dk_v = calc.pair_df_dh(Block::V, f, kappa)?;
    let divv_dk_h = calc.pair_div_df(Block::V, Block::H, kappa)?;
    let divv_df_h = calc.pair_div_df(Block::V, Block::H, f)?;
    let divh_dk_v = calc.pair_div_df(Block::H, Block::V, kappa)?;
    let divh_df_v = calc.pair_div_df(Block::H, Block::V, f)?;

    let f2 = f.mul(f);
    let k2 = kappa.mul(kappa);
    let opf2 = f2.map(|x| 1.0 + x);
    let tw_h = s.sigma_h.sub(&s.tau_h); // |Twist_H|^2 in the sigma-tau normalisation
    let tw_v = s.sigma_v.sub(&s.tau_v);
    let scal_g = s.scal();

    let zeroth = opf2
        .mul(&s.xi)
        .add(&opf2.zip_map(&f2, |a, ff| 0.5 * a / ff).mul(&tw_h))
        .add(&opf2.zip_map(&f2, |a, ff| -0.5 * a * ff).mul(&tw_v))
        .add(&scal_g);

    Ok(kappa
        .mul(&lap_hh_k)
        .scale(2.0 * (n - 1.0))
        .add(&k2.mul(&lap_hh_f).zip_map(f, |a, ff| 2.0 * q * a / ff))
        .add(&kappa.mul(&f2).mul(&lap_vv_k).scale(-2.0 * (n - 1.0)))
        .add(&k2.mul(f).mul(&lap_vv_f).scale(-2.0 * (q - 1.0)))
        .add(&dk_dk_h.scale(-n * (n - 1.0)))
        .add(&k2.mul(&df_df_h).zip_map(&f2, |a, ff| -q * (q + 3.0) * a / ff))
        .add(&kappa.mul(&df_dk_h).zip_map(f, |a, ff| -2.0 * (n - 1.0) * q * a / ff))
        .add(&f2.mul(&dk_dk_v).scale(n * (n - 1.0)))
        .add(&k2.mul(&df_df_v).scale(q * (q - 1.0)))
        .add(&kappa.mul(f).mul(&df_dk_v).scale(2.0 * (n - 1.0) * (q - 2.0)))
        .add(&kappa.mul(&divv_dk_h).scale(2.0 * (n - 1.0)))
        .add(&k2.mul(&divv_df_h).zip_map(f, |a, ff| 2.0 * (q + 1.0) * a / ff))
        .add(&kappa.mul(&f2).mul(&divh_dk_v).scale(-2.0 * (n - 1.0)))
        .add(&k2.mul(f).mul(&divh_df_v).scale(-2.0 * (q - 2.0)))
        .add(&k2.mul(&zeroth)))
}

/// Which stretch the chi prediction refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChiMode {
    StretchV,
    StretchH,
    Conform,
}

/// Predicted chi of the stretched/conformally deformed metric.
pub fn predict_chi(
    g: &MetricField,
    f: &ScalarField,
    v: &Distribution,
    mode: ChiMode,
    scheme: Scheme,
) -> Result<ScalarField, GeometryError> {
    check_positive(f, "stretch factor")?;
    let geom = DistributionGeometry::new(g, v, scheme)?;
    let calc = geom.calculus();
    let s = &geom.scalars;
    let n = g.n() as f64;
    let q = v.rank() as f64;
    let lap_hh_f = calc.sub_laplacian(f, Block::H, Block::H)?;
    let df_df_h = calc.pair_df_dh(Block::H, f, f)?;
    let divv_df_h = calc.pair_div_df(Block::V, Block::H, f)?;
    let f2 = f.mul(f);
    Ok(match mode {
        ChiMode::StretchV => s
            .chi
            .add(&lap_hh_f.zip_map(f, |a, ff| 2.0 * q * a / ff))
            .add(&df_df_h.zip_map(&f2, |a, ff| -q * (q + 3.0) * a / ff))
            .add(&divv_df_h.zip_map(f, |a, ff| 2.0 * (q + 1.0) * a / ff)),
        ChiMode::StretchH => {
            let m = n - q;
            f2.mul(&s.chi)
                .add(&f.mul(&lap_hh_f).scale(2.0 * (m - 1.0)))
                .add(&df_df_h.scale(-m * (m - 1.0)))
                .add(&f.mul(&divv_df_h).scale(2.0 * (m - 2.0)))
        }
        ChiMode::Conform => f2
            .mul(&s.chi)
            .add(&f.mul(&lap_hh_f).scale(2.0 * (n - 1.0)))
            .add(&df_df_h.scale(-n * (n - 1.0)))
            .add(&f.mul(&divv_df_h).scale(2.0 * (n - 1.0))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{scal_oracle, Distribution};
    use crate::lattice::{Grid, VectorField};
    use std::f64::consts::TAU;

    fn coord_v(grid: &Grid, q: usize) -> Distribution {
        Distribution::new((0..q).map(|a| VectorField::coordinate_axis(grid, a)).collect()).unwrap()
    }

    fn metric_diff(a: &MetricField, b: &MetricField) -> f64 {
        let n = a.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for (x, y) in a.entry(i, j).iter().zip(b.entry(i, j)) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        worst
    }

    fn perturbed(grid: &Grid, amp: f64) -> MetricField {
        MetricField::from_fn(grid, |i, j, x| {
            let base = if i == j { 1.0 } else { 0.0 };
            let bump = match (i.min(j), i.max(j)) {
                (0, 0) => (TAU * x[1 % x.len()]).sin(),
                (0, 1) => (TAU * x[0]).cos() * (TAU * x[1 % x.len()]).sin(),
                _ => (2.0 * TAU * x[0]).cos(),
            };
            base + amp * bump
        })
        .unwrap()
    }

    #[test]
    fn switch_flat_line_gives_lorentz_diag() {
        let grid = Grid::torus(&[8, 8], &[1.0, 1.0]).unwrap();
        let g = MetricField::flat(&grid);
        let v = coord_v(&grid, 1);
        let h = switch(&g, &v).unwrap();
        assert_eq!(h.index(), 1);
        for node in 0..grid.num_nodes() {
            assert!((h.entry(0, 0)[node] + 1.0).abs() < 1e-14);
            assert!((h.entry(1, 1)[node] - 1.0).abs() < 1e-14);
            assert!(h.entry(0, 1)[node].abs() < 1e-14);
        }
    }

    #[test]
    fn switch_is_involutive() {
        let grid = Grid::torus(&[16, 16], &[1.0, 1.0]).unwrap();
        let g = perturbed(&grid, 0.25);
        let v = Distribution::new(vec![VectorField::from_fns(&grid, |c, x| {
            if c == 0 {
                1.0
            } else {
                0.4 * (TAU * x[1]).sin()
            }
        })])
        .unwrap();
        let h = switch(&g, &v).unwrap();
        let back = switch(&h, &v).unwrap();
        assert!(metric_diff(&g, &back) < 1e-12);
    }

    #[test]
    fn stretch_identity_and_composition() {
        let grid = Grid::torus(&[16, 16], &[1.0, 1.0]).unwrap();
        let g = perturbed(&grid, 0.2);
        let v = coord_v(&grid, 1);
        let one = ScalarField::constant(&grid, 1.0);
        assert!(metric_diff(&stretch(&g, &one, &v).unwrap(), &g) < 1e-13);

        let f0 = ScalarField::from_fn(&grid, |x| 1.3 + 0.4 * (TAU * x[0]).sin());
        let f1 = ScalarField::from_fn(&grid, |x| 0.9 + 0.2 * (TAU * x[1]).cos());
        let lhs = stretch(&stretch(&g, &f0, &v).unwrap(), &f1, &v).unwrap();
        let rhs = stretch(&g, &f0.mul(&f1), &v).unwrap();
        assert!(metric_diff(&lhs, &rhs) < 1e-12);

        // constant stretch of flat by 2 gives diag(1/4, 1)
        let two = ScalarField::constant(&grid, 2.0);
        let flat = MetricField::flat(&grid);
        let st = stretch(&flat, &two, &v).unwrap();
        assert!((st.entry(0, 0)[0] - 0.25).abs() < 1e-14);
        assert!((st.entry(1, 1)[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn conform_matches_stretch_decomposition_and_commutes() {
        let grid = Grid::torus(&[16, 16], &[1.0, 1.0]).unwrap();
        let g = perturbed(&grid, 0.2);
        let v = coord_v(&grid, 1);
        let kappa = ScalarField::from_fn(&grid, |x| 1.2 + 0.3 * (TAU * (x[0] + x[1])).sin());
        let c = conform(&g, &kappa).unwrap();
        // conform = stretch(stretch(g, kappa, H), kappa, V)
        let h = crate::geometry::orthogonal_complement(&g, &v).unwrap();
        let via = stretch(&stretch(&g, &kappa, &h).unwrap(), &kappa, &v).unwrap();
        assert!(metric_diff(&c, &via) < 1e-12);

        // conform(stretch(g,f,V),kappa) = stretch(conform(g,kappa),f,V)
        let f = ScalarField::from_fn(&grid, |x| 1.1 + 0.25 * (TAU * x[0]).cos());
        let lhs = conform(&stretch(&g, &f, &v).unwrap(), &kappa).unwrap();
        let rhs = stretch(&conform(&g, &kappa).unwrap(), &f, &v).unwrap();
        assert!(metric_diff(&lhs, &rhs) < 1e-12);

        // kappa = 2 on flat: g/4
        let two = ScalarField::constant(&grid, 2.0);
        let flat = MetricField::flat(&grid);
        let quarter = conform(&flat, &two).unwrap();
        assert!((quarter.entry(0, 0)[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn change_closed_form_on_flat_t2() {
        // change(flat, tan(u/2), K(tan(u/2)), {d_x}) = diag(-cos^2(u/2), sin^2(u/2))
        let grid = Grid::torus(&[32, 32], &[1.0, 1.0]).unwrap();
        let g = MetricField::flat(&grid);
        let v = coord_v(&grid, 1);
        let u = ScalarField::from_fn(&grid, |x| {
            std::f64::consts::FRAC_PI_2 + 0.7 * (TAU * x[0]).sin() * (TAU * x[1]).cos()
        });
        let f = u.map(|w| (w / 2.0).tan());
        let table = coefficient_table(2, 1);
        let kappa = f.map(|x| table.k(x));
        let ch = change(&g, &f, &kappa, &v).unwrap();
        assert_eq!(ch.index(), 1);
        let mut worst: f64 = 0.0;
        for node in 0..grid.num_nodes() {
            let w = u.data()[node] / 2.0;
            worst = worst.max((ch.entry(0, 0)[node] + w.cos().powi(2)).abs());
            worst = worst.max((ch.entry(1, 1)[node] - w.sin().powi(2)).abs());
            worst = worst.max(ch.entry(0, 1)[node].abs());
        }
        assert!(worst < 1e-12, "closed form defect {worst}");
    }

    #[test]
    fn change_constant_factors_reduce_to_switch() {
        let grid = Grid::torus(&[12, 12], &[1.0, 1.0]).unwrap();
        let g = perturbed(&grid, 0.15);
        let v = coord_v(&grid, 1);
        let one = ScalarField::constant(&grid, 1.0);
        let ch = change(&g, &one, &one, &v).unwrap();
        let sw = switch(&g, &v).unwrap();
        assert!(metric_diff(&ch, &sw) < 1e-13);
    }

    #[test]
    fn change_product_case_matches_block_formula() {
        // g = dt^2 + g_N, V first factor: change = (1/kappa^2)((-1/f^2)dt^2 + g_N)
        let grid = Grid::torus(&[16, 16], &[1.0, 1.0]).unwrap();
        let gn = |y: f64| 1.0 + 0.3 * (TAU * y).sin();
        let g = MetricField::from_fn(&grid, |i, j, x| match (i, j) {
            (0, 0) => 1.0,
            (1, 1) => gn(x[1]),
            _ => 0.0,
        })
        .unwrap();
        let v = coord_v(&grid, 1);
        let f = ScalarField::from_fn(&grid, |x| 1.4 + 0.2 * (TAU * x[0]).cos());
        let kappa = ScalarField::from_fn(&grid, |x| 1.1 + 0.15 * (TAU * x[1]).sin());
        let ch = change(&g, &f, &kappa, &v).unwrap();
        let mut worst: f64 = 0.0;
        for node in 0..grid.num_nodes() {
            let y = grid.node_coords(node)[1];
            let fv = f.data()[node];
            let kv = kappa.data()[node];
            worst = worst.max((ch.entry(0, 0)[node] + 1.0 / (kv * kv * fv * fv)).abs());
            worst = worst.max((ch.entry(1, 1)[node] - gn(y) / (kv * kv)).abs());
        }
        assert!(worst < 1e-12, "product case defect {worst}");
    }

    #[test]
    fn coefficient_examples() {
        let t41 = coefficient_table(4, 1);
        assert!((t41.k(1.0) - 2f64.powf(1.0 / 6.0)).abs() < 1e-14);
        let t21 = coefficient_table(2, 1);
        for &x in &[0.3, 1.0, 2.7] {
            assert!((t21.a(x) - (-4.0 * x / (1.0 + x * x))).abs() < 1e-12);
            assert!(t21.b(x).abs() < 1e-12);
        }
        // q = 1 matches -(4x^4 + alpha(n))/(x^3(1+x^2)) with alpha = (n-2)/(n-1)
        for n in 2..=8 {
            let t = coefficient_table(n, 1);
            let alpha = (n as f64 - 2.0) / (n as f64 - 1.0);
            for &x in &[0.4f64, 1.3, 3.1] {
                let expect = -(4.0 * x.powi(4) + alpha) / (x.powi(3) * (1.0 + x * x));
                assert!((t.a(x) - expect).abs() < 1e-11, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn coefficient_identity_battery() {
        // identities 4.3b/4.3c to 1e-12 and 4.3d/4.3e to 1e-11 on a log grid
        let xs: Vec<f64> = (0..100)
            .map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 99.0))
            .collect();
        for n in 2..=8usize {
            for q in 0..=n {
                let t = coefficient_table(n, q);
                let (nf, qf) = (n as f64, q as f64);
                for &x in &xs {
                    let e = t.e(x);
                    let r_b = (nf - 1.0) * (1.0 + x * x) * e + ((qf - 1.0) * x * x + qf) / x;
                    assert!(r_b.abs() < 1e-12 * (1.0 + e.abs() * nf * x * x), "4.3b n={n} q={q} x={x}: {r_b:e}");
                    let r_c = (nf - 1.0) * e + qf / x - x / (1.0 + x * x);
                    assert!(r_c.abs() < 1e-12 * (1.0 + (qf / x).abs()), "4.3c: {r_c:e}");
                    let f = t.f(x);
                    let lhs_d = 2.0 * (nf - 1.0) * f
                        - nf * (nf - 1.0) * e * e
                        - qf * (qf + 3.0) / (x * x)
                        - 2.0 * (nf - 1.0) * qf * e / x;
                    let rhs_d = t.a(x) * x / (1.0 + x * x);
                    let scale_d = 1.0 + lhs_d.abs() + (qf * (qf + 3.0) / (x * x)).abs();
                    assert!((lhs_d - rhs_d).abs() < 1e-11 * scale_d, "4.3d n={n} q={q} x={x}");
                    let lhs_e = (nf - 1.0) * (1.0 + x * x) * (-2.0 * f + nf * e * e)
                        + qf / (x * x) * ((qf - 1.0) * x * x + (qf + 3.0))
                        + 2.0 * (nf - 1.0) * e / x * ((qf - 2.0) * x * x + qf);
                    let rhs_e = t.b(x) * x / (1.0 + x * x);
                    let scale_e = 1.0 + lhs_e.abs() + (qf / (x * x) * ((qf - 1.0) * x * x + qf + 3.0)).abs();
                    assert!((lhs_e - rhs_e).abs() < 1e-11 * scale_e, "4.3e n={n} q={q} x={x}");
                }
            }
        }
    }

    #[test]
    fn coefficient_derivatives_match_numeric() {
        for n in 2..=6usize {
            for q in 0..=n {
                let t = coefficient_table(n, q);
                for &x in &[0.4, 0.9, 1.7, 3.2] {
                    let eps = 1e-6;
                    let da = (t.a(x + eps) - t.a(x - eps)) / (2.0 * eps);
                    let db = (t.b(x + eps) - t.b(x - eps)) / (2.0 * eps);
                    assert!(
                        (t.ap(x) - da).abs() < 1e-6 * (1.0 + da.abs()),
                        "a' mismatch n={n} q={q} x={x}: {} vs {}",
                        t.ap(x),
                        da
                    );
                    assert!(
                        (t.bp(x) - db).abs() < 1e-6 * (1.0 + db.abs()),
                        "b' mismatch n={n} q={q} x={x}"
                    );
                }
            }
        }
    }

    #[test]
    fn predict_switch_matches_direct_spectral() {
        let grid = Grid::torus(&[32, 32], &[1.0, 1.0]).unwrap();
        let g = perturbed(&grid, 0.2);
        let v = coord_v(&grid, 1);
        let u = ScalarField::from_fn(&grid, |x| (TAU * x[0]).sin() + 0.5 * (TAU * x[1]).cos());
        let pred = predict_switch(&g, &v, &u, Scheme::Spectral).unwrap();
        let h = switch(&g, &v).unwrap();
        let direct = direct_quantities(&h, &v, &u, Scheme::Spectral).unwrap();
        for (id, p) in &pred.lines {
            let d = direct.get(id);
            let defect = p.sub(d).linf_norm();
            let scale = 1.0 + p.linf_norm();
            assert!(defect < 1e-6 * scale, "line {id}: defect {defect}");
        }
    }

    #[test]
    fn predict_stretch_trivial_factor() {
        // the "scal" line compares the frame route against the coordinate
        // oracle, so its floor is the aliasing-limited decomposition defect
        let grid = Grid::torus(&[48, 48], &[1.0, 1.0]).unwrap();
        let g = perturbed(&grid, 0.2);
        let v = coord_v(&grid, 1);
        let u = ScalarField::from_fn(&grid, |x| (TAU * x[1]).sin());
        let one = ScalarField::constant(&grid, 1.0);
        let pred = predict_stretch(&g, &one, &v, &u, Scheme::Spectral).unwrap();
        let direct = direct_quantities(&g, &v, &u, Scheme::Spectral).unwrap();
        for (id, p) in &pred.lines {
            let d = direct.get(id);
            let defect = p.sub(d).linf_norm();
            assert!(defect < 1e-4 * (1.0 + p.linf_norm()), "line {id}: defect {defect}");
        }
    }

    #[test]
    fn predict_stretch_matches_direct() {
        let grid = Grid::torus(&[32, 32], &[1.0, 1.0]).unwrap();
        let g = perturbed(&grid, 0.2);
        let v = coord_v(&grid, 1);
        let u = ScalarField::from_fn(&grid, |x| (TAU * x[0]).cos() * (TAU * x[1]).sin());
        let f = ScalarField::from_fn(&grid, |x| 1.4 + 0.5 * (TAU * x[0]).sin() * (TAU * x[1]).cos());
        let pred = predict_stretch(&g, &f, &v, &u, Scheme::Spectral).unwrap();
        let gbar = stretch(&g, &f, &v).unwrap();
        let direct = direct_quantities(&gbar, &v, &u, Scheme::Spectral).unwrap();
        for (id, p) in &pred.lines {
            let d = direct.get(id);
            let defect = p.sub(d).linf_norm();
            let scale = 1.0 + p.linf_norm();
            assert!(defect < 2e-6 * scale, "line {id}: defect {defect} (scale {scale})");
        }
    }

    #[test]
    fn predict_conform_matches_oracle_spectral() {
        let grid = Grid::torus(&[48, 48], &[1.0, 1.0]).unwrap();
        let g = MetricField::flat(&grid);
        let kappa = ScalarField::from_fn(&grid, |x| ((TAU * x[0]).sin() * 0.4).exp());
        let pred = predict_conform_scal(&g, &kappa, Scheme::Spectral).unwrap();
        let c = conform(&g, &kappa).unwrap();
        let oracle = scal_oracle(&c, Scheme::Spectral).unwrap();
        let defect = pred.sub(&oracle).linf_norm();
        assert!(defect < 1e-7 * (1.0 + pred.linf_norm()), "defect {defect}");
        // constant kappa: c^2 scal_g
        let cst = ScalarField::constant(&grid, 1.7);
        let p2 = predict_conform_scal(&perturbed(&grid, 0.2), &cst, Scheme::Spectral).unwrap();
        let base = scal_oracle(&perturbed(&grid, 0.2), Scheme::Spectral).unwrap();
        assert!(p2.sub(&base.scale(1.7 * 1.7)).linf_norm() < 1e-8 * (1.0 + base.linf_norm()));
    }

    #[test]
    fn predict_stretch_full_tangent_collapses_to_conform() {
        let grid = Grid::torus(&[48, 48], &[1.0, 1.0]).unwrap();
        let g = perturbed(&grid, 0.2);
        let v = coord_v(&grid, 2); // V = TM
        let u = ScalarField::constant(&grid, 0.0);
        let kappa = ScalarField::from_fn(&grid, |x| 1.3 + 0.3 * (TAU * x[0]).sin());
        let pred = predict_stretch(&g, &kappa, &v, &u, Scheme::Spectral).unwrap();
        let conf = predict_conform_scal(&g, &kappa, Scheme::Spectral).unwrap();
        let defect = pred.get("scal").sub(&conf).linf_norm();
        assert!(defect < 1e-4 * (1.0 + conf.linf_norm()), "defect {defect}");
    }

    #[test]
    fn rank_zero_v_leaves_switch_unchanged() {
        let grid = Grid::torus(&[12, 12], &[1.0, 1.0]).unwrap();
        let g = perturbed(&grid, 0.2);
        let v0 = Distribution::empty(&grid);
        let h = switch(&g, &v0).unwrap();
        assert!(metric_diff(&h, &g) < 1e-15);
    }

    #[test]
    fn predict_change_flat_product_constants() {
        // flat product with constant factors: kappa^2 (1+f^2) xi + kappa^2 scal = 0
        let grid = Grid::torus(&[12, 12], &[1.0, 1.0]).unwrap();
        let g = MetricField::flat(&grid);
        let v = coord_v(&grid, 1);
        let f = ScalarField::constant(&grid, 1.7);
        let kappa = ScalarField::constant(&grid, 0.8);
        let pred = predict_change_scal(&g, &f, &kappa, &v, Scheme::Fd4).unwrap();
        assert!(pred.linf_norm() < 1e-10);
    }

    #[test]
    fn predict_change_matches_oracle() {
        let grid = Grid::torus(&[32, 32], &[1.0, 1.0]).unwrap();
        let g = perturbed(&grid, 0.15);
        let v = coord_v(&grid, 1);
        let f = ScalarField::from_fn(&grid, |x| 1.3 + 0.3 * (TAU * x[0]).sin());
        let kappa = ScalarField::from_fn(&grid, |x| 1.0 + 0.2 * (TAU * x[1]).cos());
        let pred = predict_change_scal(&g, &f, &kappa, &v, Scheme::Spectral).unwrap();
        let ch = change(&g, &f, &kappa, &v).unwrap();
        let oracle = scal_oracle(&ch, Scheme::Spectral).unwrap();
        let defect = pred.sub(&oracle).linf_norm();
        assert!(defect < 2e-5 * (1.0 + pred.linf_norm()), "defect {defect}");
    }

    #[test]
    fn predict_change_k_specialisation_matches_eq_44() {
        // kappa = K(f): prediction equals K(f)^2 times the reduced form
        let grid = Grid::torus(&[32, 32], &[1.0, 1.0]).unwrap();
        let g = MetricField::flat(&grid);
        let v = coord_v(&grid, 1);
        let table = coefficient_table(2, 1);
        let f = ScalarField::from_fn(&grid, |x| 1.2 + 0.3 * (TAU * x[0]).sin());
        let kappa = f.map(|x| table.k(x));
        let pred = predict_change_scal(&g, &f, &kappa, &v, Scheme::Spectral).unwrap();
        // reduced RHS of the K-specialised scalar curvature
        let geom = DistributionGeometry::new(&g, &v, Scheme::Spectral).unwrap();
        let calc = geom.calculus();
        let lap = crate::geometry::laplace_beltrami(&g, &f, Scheme::Spectral).unwrap();
        let df2 = calc.pair_df_dh(Block::Full, &f, &f).unwrap();
        let df2v = calc.pair_df_dh(Block::V, &f, &f).unwrap();
        let divv_df_h = calc.pair_div_df(Block::V, Block::H, &f).unwrap();
        let divh_df_v = calc.pair_div_df(Block::H, Block::V, &f).unwrap();
        let reduced = lap
            .zip_map(&f, |l, x| 2.0 * x / (1.0 + x * x) * l)
            .add(&df2.zip_map(&f, |d, x| {
                table.a(x) * x / (1.0 + x * x) * d
            }))
            .add(&df2v.zip_map(&f, |d, x| table.b(x) * x / (1.0 + x * x) * d))
            .add(&divv_df_h.zip_map(&f, |d, x| 2.0 / (x * x) * x * d))
            .add(&divh_df_v.zip_map(&f, |d, x| 2.0 * x * d));
        let expect = reduced.zip_map(&f, |r, x| table.k(x).powi(2) * r);
        let defect = pred.sub(&expect).linf_norm();
        assert!(defect < 1e-7 * (1.0 + pred.linf_norm()), "defect {defect}");
    }

    #[test]
    fn chi_constant_stretch_scalings() {
        let grid = Grid::torus(&[24, 24, 24], &[1.0; 3]).unwrap();
        let g = perturbed(&grid, 0.15);
        let plane = crate::solve::preset_distribution(crate::solve::Preset::Contact3, &grid).unwrap();
        let chi0 = crate::geometry::distribution_scalars(&g, &plane, Scheme::Spectral)
            .unwrap()
            .chi;
        let c = ScalarField::constant(&grid, 1.6);
        // stretchV with constant: chi unchanged
        let pv = predict_chi(&g, &c, &plane, ChiMode::StretchV, Scheme::Spectral).unwrap();
        assert!(pv.sub(&chi0).linf_norm() < 1e-9 * (1.0 + chi0.linf_norm()));
        // stretchH with constant: chi scales by c^2
        let ph = predict_chi(&g, &c, &plane, ChiMode::StretchH, Scheme::Spectral).unwrap();
        assert!(ph.sub(&chi0.scale(1.6 * 1.6)).linf_norm() < 1e-9 * (1.0 + chi0.linf_norm()));
    }

    #[test]
    fn chi_prediction_matches_direct() {
        let grid = Grid::torus(&[32, 32], &[1.0, 1.0]).unwrap();
        let g = perturbed(&grid, 0.15);
        let v = coord_v(&grid, 1);
        let f = ScalarField::from_fn(&grid, |x| 1.2 + 0.25 * (TAU * x[1]).sin());
        for mode in [ChiMode::StretchV, ChiMode::StretchH, ChiMode::Conform] {
            let pred = predict_chi(&g, &f, &v, mode, Scheme::Spectral).unwrap();
            let surged = match mode {
                ChiMode::StretchV => stretch(&g, &f, &v).unwrap(),
                ChiMode::StretchH => {
                    let h = crate::geometry::orthogonal_complement(&g, &v).unwrap();
                    stretch(&g, &f, &h).unwrap()
                }
                ChiMode::Conform => conform(&g, &f).unwrap(),
            };
            let direct = crate::geometry::distribution_scalars(&surged, &v, Scheme::Spectral)
                .unwrap()
                .chi;
            let defect = pred.sub(&direct).linf_norm();
            assert!(defect < 5e-6 * (1.0 + pred.linf_norm()), "mode {mode:?}: defect {defect}");
        }
    }
}
