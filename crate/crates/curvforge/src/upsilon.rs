//! The semilinear elliptic operator built from the change surgery, its
//! inverse map S, and the analytic linearisation.

use crate::deform::{coefficient_table, CoefficientTable};
use crate::geometry::{
    Block, Distribution, DistributionGeometry, GeometryError, MetricField, MetricOps,
};
use crate::lattice::{ScalarField, Scheme};

pub const F_FLOOR: f64 = 1e-10;

/// Precomputed geometry for the elliptic operator: a Riemannian background
/// metric, a distribution, the cached scalars and the exponents
/// `mu = 2q/(n-1) - 1`, `nu = (n-2)/(n-1)`.
pub struct UpsilonContext {
    pub geom: DistributionGeometry,
    pub coeffs: CoefficientTable,
    pub mu: f64,
    pub nu: f64,
    ops: MetricOps,
    scheme: Scheme,
    /// cached zeroth-order fields
    tw_v: ScalarField,
    tw_h: ScalarField,
    scal_g: ScalarField,
}

impl UpsilonContext {
    pub fn new(
        g: &MetricField,
        v: &Distribution,
        scheme: Scheme,
    ) -> Result<UpsilonContext, GeometryError> {
        if g.index() != 0 {
            return Err(GeometryError::WrongIndex { expected: 0, got: g.index() });
        }
        let n = g.n();
        let q = v.rank();
        let geom = DistributionGeometry::new(g, v, scheme)?;
        let ops = MetricOps::new(g, scheme)?;
        let tw_v = geom.scalars.sigma_v.sub(&geom.scalars.tau_v);
        let tw_h = geom.scalars.sigma_h.sub(&geom.scalars.tau_h);
        let scal_g = geom.scalars.scal();
        Ok(UpsilonContext {
            geom,
            coeffs: coefficient_table(n, q),
            mu: 2.0 * q as f64 / (n as f64 - 1.0) - 1.0,
            nu: (n as f64 - 2.0) / (n as f64 - 1.0),
            ops,
            scheme,
            tw_v,
            tw_h,
            scal_g,
        })
    }

    pub fn grid(&self) -> &crate::lattice::Grid {
        self.geom.g.grid()
    }
    pub fn metric(&self) -> &MetricField {
        &self.geom.g
    }
    pub fn distribution(&self) -> &Distribution {
        &self.geom.v
    }
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
    pub fn n(&self) -> usize {
        self.geom.g.n()
    }
    pub fn q(&self) -> usize {
        self.geom.v.rank()
    }

    /// Laplace–Beltrami of the background metric.
    pub fn laplacian(&self, f: &ScalarField) -> Result<ScalarField, GeometryError> {
        self.ops.laplacian(f)
    }

    fn check_positive(&self, f: &ScalarField) -> Result<(), GeometryError> {
        for (node, &v) in f.data().iter().enumerate() {
            if v <= F_FLOOR {
                return Err(GeometryError::NotPositive { node, value: v });
            }
        }
        Ok(())
    }

    /// The geometric part of the operator (everything except the `s` term).
    fn geometric_part(&self, f: &ScalarField) -> Result<ScalarField, GeometryError> {
        let calc = self.geom.calculus();
        let lap = self.ops.laplacian(f)?;
        let df2 = self.ops.grad_inner(f, f)?;
        let df2v = calc.pair_df_dh(Block::V, f, f)?;
        let divv_df_h = calc.pair_div_df(Block::V, Block::H, f)?;
        let divh_df_v = calc.pair_div_df(Block::H, Block::V, f)?;
        let t = &self.coeffs;

        let mut out = lap.scale(2.0);
        out = out.add(&df2.zip_map(f, |d, x| t.a(x) * d));
        out = out.add(&df2v.zip_map(f, |d, x| t.b(x) * d));
        out = out.add(&divv_df_h.zip_map(f, |d, x| 2.0 * (1.0 + x * x) / (x * x) * d));
        out = out.add(&divh_df_v.zip_map(f, |d, x| 2.0 * (1.0 + x * x) * d));
        out = out.add(&self.tw_h.zip_map(f, |w, x| {
            let p = 1.0 + x * x;
            p * p / (2.0 * x * x * x) * w
        }));
        out = out.add(&self.tw_v.zip_map(f, |w, x| {
            let p = 1.0 + x * x;
            -x * p * p / 2.0 * w
        }));
        out = out.add(&self.geom.scalars.xi.zip_map(f, |xi, x| {
            let p = 1.0 + x * x;
            p * p / x * xi
        }));
        out = out.add(&self.scal_g.zip_map(f, |s, x| (1.0 + x * x) / x * s));
        Ok(out)
    }

    /// `f^mu (1+f^2)^nu` source weight.
    pub fn source_weight(&self, f: &ScalarField) -> ScalarField {
        let (mu, nu) = (self.mu, self.nu);
        f.map(|x| x.max(F_FLOOR).powf(mu) * (1.0 + x * x).powf(nu))
    }

    /// The operator at a constant function, assembled pointwise from the
    /// cached zeroth-order fields (no derivative passes; every df term
    /// vanishes for constants).
    pub fn upsilon_constant(&self, s: &ScalarField, c: f64) -> ScalarField {
        assert!(c > F_FLOOR, "constant must be positive");
        let p = 1.0 + c * c;
        let w = c.powf(self.mu) * p.powf(self.nu);
        self.tw_h
            .scale(p * p / (2.0 * c * c * c))
            .add(&self.tw_v.scale(-c * p * p / 2.0))
            .add(&self.geom.scalars.xi.scale(p * p / c))
            .add(&self.scal_g.scale(p / c))
            .sub(&s.scale(w))
    }

    /// The constant-field geometric part (the operator with the source
    /// removed), used by the amplitude estimate of the synthesis pipeline.
    pub fn geometric_at_constant(&self, c: f64) -> ScalarField {
        let zero = ScalarField::constant(self.grid(), 0.0);
        self.upsilon_constant(&zero, c)
    }
}

/// The full semilinear operator applied to a positive function.
pub fn upsilon(
    ctx: &UpsilonContext,
    s: &ScalarField,
    f: &ScalarField,
) -> Result<ScalarField, GeometryError> {
    ctx.check_positive(f)?;
    let geo = ctx.geometric_part(f)?;
    Ok(geo.sub(&ctx.source_weight(f).mul(s)))
}

/// The unique prescribed function solved by a given positive `f`:
/// `S(f) = f^{-mu} (1+f^2)^{-nu} * (geometric part)`.
pub fn s_map(ctx: &UpsilonContext, f: &ScalarField) -> Result<ScalarField, GeometryError> {
    ctx.check_positive(f)?;
    let geo = ctx.geometric_part(f)?;
    let w = ctx.source_weight(f);
    Ok(geo.zip_map(&w, |g, ww| g / ww))
}

/// The Fréchet derivative of the operator at `f` applied to `v`.
pub fn linearize_apply(
    ctx: &UpsilonContext,
    s: &ScalarField,
    f: &ScalarField,
    v: &ScalarField,
) -> Result<ScalarField, GeometryError> {
    ctx.check_positive(f)?;
    let calc = ctx.geom.calculus();
    let t = &ctx.coeffs;

    let lap_v = ctx.ops.laplacian(v)?;
    let df_dv = ctx.ops.grad_inner(f, v)?;
    let df2 = ctx.ops.grad_inner(f, f)?;
    let df_dv_v = calc.pair_df_dh(Block::V, f, v)?;
    let df2v = calc.pair_df_dh(Block::V, f, f)?;
    let divv_dv_h = calc.pair_div_df(Block::V, Block::H, v)?;
    let divv_df_h = calc.pair_div_df(Block::V, Block::H, f)?;
    let divh_dv_v = calc.pair_div_df(Block::H, Block::V, v)?;
    let divh_df_v = calc.pair_div_df(Block::H, Block::V, f)?;

    let mut out = lap_v.scale(2.0);
    out = out.add(&df_dv.zip_map(f, |d, x| 2.0 * t.a(x) * d));
    out = out.add(&df2.zip_map(f, |d, x| t.ap(x) * d).mul(v));
    out = out.add(&df_dv_v.zip_map(f, |d, x| 2.0 * t.b(x) * d));
    out = out.add(&df2v.zip_map(f, |d, x| t.bp(x) * d).mul(v));
    out = out.add(&divv_dv_h.zip_map(f, |d, x| 2.0 * (1.0 + x * x) / (x * x) * d));
    out = out.add(&divv_df_h.zip_map(f, |d, x| -4.0 / (x * x * x) * d).mul(v));
    out = out.add(&divh_dv_v.zip_map(f, |d, x| 2.0 * (1.0 + x * x) * d));
    out = out.add(&divh_df_v.zip_map(f, |d, x| 4.0 * x * d).mul(v));
    out = out.add(
        &ctx.tw_h
            .zip_map(f, |w, x| (1.0 + x * x) * (x * x - 3.0) / (2.0 * x.powi(4)) * w)
            .mul(v),
    );
    out = out.add(
        &ctx.tw_v
            .zip_map(f, |w, x| -(1.0 + x * x) * (1.0 + 5.0 * x * x) / 2.0 * w)
            .mul(v),
    );
    out = out.add(
        &ctx.geom
            .scalars
            .xi
            .zip_map(f, |xi, x| (1.0 + x * x) * (3.0 * x * x - 1.0) / (x * x) * xi)
            .mul(v),
    );
    out = out.add(
        &ctx.scal_g
            .zip_map(f, |sc, x| -(1.0 - x * x) / (x * x) * sc)
            .mul(v),
    );
    let (mu, nu) = (ctx.mu, ctx.nu);
    let src = ctx.source_weight(f).mul(s).zip_map(f, move |sw, x| {
        sw * (mu + (mu + 2.0 * nu) * x * x) / (x * (1.0 + x * x))
    });
    Ok(out.sub(&src.mul(v)))
}

/// Zeroth-order coefficient of the linearisation at a constant `c` with
/// `s = S(c)`, in the consolidated closed form.
pub fn constant_point_coefficient(ctx: &UpsilonContext, c: f64) -> ScalarField {
    let (mu, nu) = (ctx.mu, ctx.nu);
    let c2 = c * c;
    let p = 1.0 + c2;
    let m = mu + (mu + 2.0 * nu) * c2;
    ctx.tw_h
        .scale(p / (2.0 * c2 * c2) * (c2 - 3.0 - m))
        .add(&ctx.tw_v.scale(-p / 2.0 * (1.0 + 5.0 * c2 - m)))
        .add(&ctx.geom.scalars.xi.scale(p / c2 * (3.0 * c2 - 1.0 - m)))
        .add(&ctx.scal_g.scale((-1.0 + c2 - m) / c2))
}

/// Checks the strict exponent inequalities `-3 - mu < 0` and
/// `-5 + mu + 2 nu < 0` for a dimension/rank pair.
pub fn exponent_bounds_check(n: usize, q: usize) -> bool {
    assert!(n >= 2 && q <= n);
    let mu = 2.0 * q as f64 / (n as f64 - 1.0) - 1.0;
    let nu = (n as f64 - 2.0) / (n as f64 - 1.0);
    -3.0 - mu < 0.0 && -5.0 + mu + 2.0 * nu < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deform::change;
    use crate::geometry::scal_oracle;
    use crate::lattice::{Grid, VectorField};
    use std::f64::consts::TAU;

    fn coord_v(grid: &Grid, q: usize) -> Distribution {
        Distribution::new((0..q).map(|a| VectorField::coordinate_axis(grid, a)).collect()).unwrap()
    }

    #[test]
    fn flat_constant_reduces_to_source_term() {
        let grid = Grid::torus(&[12, 12], &[1.0, 1.0]).unwrap();
        let g = MetricField::flat(&grid);
        let v = coord_v(&grid, 1);
        let ctx = UpsilonContext::new(&g, &v, Scheme::Fd4).unwrap();
        let s = ScalarField::from_fn(&grid, |x| 1.0 + (TAU * x[0]).sin());
        let c = 1.7;
        let f = ScalarField::constant(&grid, c);
        let up = upsilon(&ctx, &s, &f).unwrap();
        let expect = s.scale(-c.powf(ctx.mu) * (1.0 + c * c).powf(ctx.nu));
        assert!(up.sub(&expect).linf_norm() < 1e-11);
    }

    #[test]
    fn constant_fast_path_matches_generic_operator() {
        let grid = Grid::torus(&[12, 12, 12], &[1.0; 3]).unwrap();
        let g = MetricField::flat(&grid);
        let plane = crate::solve::preset_distribution(crate::solve::Preset::Contact3, &grid).unwrap();
        let ctx = UpsilonContext::new(&g, &plane, Scheme::Fd4).unwrap();
        let s = ScalarField::from_fn(&grid, |x| -2.0 + (TAU * x[2]).sin());
        for &c in &[0.4, 1.0, 2.6] {
            let fast = ctx.upsilon_constant(&s, c);
            let slow = upsilon(&ctx, &s, &ScalarField::constant(&grid, c)).unwrap();
            let defect = fast.sub(&slow).linf_norm();
            assert!(defect < 1e-9 * (1.0 + fast.linf_norm()), "c={c}: {defect}");
        }
    }

    #[test]
    fn upsilon_vanishes_at_s_map() {
        let grid = Grid::torus(&[16, 16, 16], &[1.0; 3]).unwrap();
        let g = MetricField::flat(&grid);
        let plane = crate::solve::preset_distribution(crate::solve::Preset::Contact3, &grid).unwrap();
        let ctx = UpsilonContext::new(&g, &plane, Scheme::Fd4).unwrap();
        let f = ScalarField::from_fn(&grid, |x| 1.1 + 0.3 * (TAU * x[2]).cos());
        let s = s_map(&ctx, &f).unwrap();
        let up = upsilon(&ctx, &s, &f).unwrap();
        assert!(up.linf_norm() < 1e-9 * (1.0 + s.linf_norm()));
    }

    #[test]
    fn s_map_matches_scal_oracle_of_changed_metric() {
        // Theorem route: scal(change(g, f, K(f), V)) = S(f)
        let grid = Grid::torus(&[32, 32], &[1.0, 1.0]).unwrap();
        let g = MetricField::flat(&grid);
        let v = coord_v(&grid, 1);
        let ctx = UpsilonContext::new(&g, &v, Scheme::Spectral).unwrap();
        let f = ScalarField::from_fn(&grid, |x| 2.0 + (TAU * x[0]).sin());
        let s = s_map(&ctx, &f).unwrap();
        let kappa = f.map(|x| ctx.coeffs.k(x));
        let h = change(&g, &f, &kappa, &v).unwrap();
        let oracle = scal_oracle(&h, Scheme::Spectral).unwrap();
        let defect = s.sub(&oracle).linf_norm();
        assert!(defect < 1e-6 * (1.0 + s.linf_norm()), "defect {defect}");
    }

    #[test]
    fn s_map_oracle_convergence_order_contact() {
        let mut pts = Vec::new();
        for nn in [16usize, 24, 32] {
            let grid = Grid::torus(&[nn, nn, nn], &[1.0; 3]).unwrap();
            let g = MetricField::flat(&grid);
            let plane =
                crate::solve::preset_distribution(crate::solve::Preset::Contact3, &grid).unwrap();
            let v = crate::geometry::orthogonal_complement(&g, &plane).unwrap();
            let ctx = UpsilonContext::new(&g, &v, Scheme::Fd4).unwrap();
            let f = ScalarField::from_fn(&grid, |x| 1.0 + 0.3 * (TAU * x[2]).cos());
            let s = s_map(&ctx, &f).unwrap();
            let kappa = f.map(|x| ctx.coeffs.k(x));
            let h = change(&g, &f, &kappa, &v).unwrap();
            let oracle = scal_oracle(&h, Scheme::Fd4).unwrap();
            pts.push((1.0 / nn as f64, s.sub(&oracle).linf_norm()));
        }
        let order = crate::util::convergence_order(&pts);
        assert!(order >= 3.5, "order {order} ({pts:?})");
    }

    #[test]
    fn linearization_zero_vector() {
        let grid = Grid::torus(&[12, 12], &[1.0, 1.0]).unwrap();
        let g = MetricField::flat(&grid);
        let v = coord_v(&grid, 1);
        let ctx = UpsilonContext::new(&g, &v, Scheme::Fd4).unwrap();
        let f = ScalarField::constant(&grid, 1.3);
        let s = ScalarField::constant(&grid, 0.5);
        let zero = ScalarField::constant(&grid, 0.0);
        let out = linearize_apply(&ctx, &s, &f, &zero).unwrap();
        assert!(out.linf_norm() < 1e-13);
    }

    #[test]
    fn linearization_matches_central_differences() {
        let grid = Grid::torus(&[16, 16, 16], &[1.0; 3]).unwrap();
        let g = MetricField::flat(&grid);
        let plane = crate::solve::preset_distribution(crate::solve::Preset::Contact3, &grid).unwrap();
        let ctx = UpsilonContext::new(&g, &plane, Scheme::Fd4).unwrap();
        let f = ScalarField::from_fn(&grid, |x| 1.4 + 0.25 * (TAU * x[0]).sin());
        let v = ScalarField::from_fn(&grid, |x| 0.8 * (TAU * x[1]).cos() + 0.1);
        let s = ScalarField::from_fn(&grid, |x| -1.5 + (TAU * x[2]).sin());
        let lin = linearize_apply(&ctx, &s, &f, &v).unwrap();
        let eps = 1e-5;
        let fp = f.zip_map(&v, |a, b| a + eps * b);
        let fm = f.zip_map(&v, |a, b| a - eps * b);
        let num = upsilon(&ctx, &s, &fp)
            .unwrap()
            .sub(&upsilon(&ctx, &s, &fm).unwrap())
            .scale(1.0 / (2.0 * eps));
        let rel = lin.sub(&num).linf_norm() / (1.0 + lin.linf_norm());
        assert!(rel < 1e-6, "relative mismatch {rel}");
    }

    #[test]
    fn linearization_eps_sweep_floor() {
        let grid = Grid::torus(&[12, 12, 12], &[1.0; 3]).unwrap();
        let g = MetricField::flat(&grid);
        let plane = crate::solve::preset_distribution(crate::solve::Preset::Contact3, &grid).unwrap();
        let ctx = UpsilonContext::new(&g, &plane, Scheme::Fd4).unwrap();
        let f = ScalarField::from_fn(&grid, |x| 1.2 + 0.2 * (TAU * x[2]).sin());
        let v = ScalarField::from_fn(&grid, |x| (TAU * x[0]).cos());
        let s = ScalarField::constant(&grid, -2.0);
        let lin = linearize_apply(&ctx, &s, &f, &v).unwrap();
        let mut errs = Vec::new();
        for &eps in &[1e-4, 1e-5, 1e-6] {
            let fp = f.zip_map(&v, |a, b| a + eps * b);
            let fm = f.zip_map(&v, |a, b| a - eps * b);
            let num = upsilon(&ctx, &s, &fp)
                .unwrap()
                .sub(&upsilon(&ctx, &s, &fm).unwrap())
                .scale(1.0 / (2.0 * eps));
            errs.push(lin.sub(&num).linf_norm());
        }
        // expected eps^2 decrease from 1e-4 to 1e-5, then a roundoff floor
        assert!(errs[1] < errs[0] * 0.1, "sweep {errs:?}");
        assert!(errs[2] < errs[0], "sweep {errs:?}");
    }

    #[test]
    fn constant_point_coefficient_matches_linearization() {
        let grid = Grid::torus(&[16, 16, 16], &[1.0; 3]).unwrap();
        let g = MetricField::flat(&grid);
        let plane = crate::solve::preset_distribution(crate::solve::Preset::Contact3, &grid).unwrap();
        let ctx = UpsilonContext::new(&g, &plane, Scheme::Fd4).unwrap();
        for &c in &[0.7, 1.0, 2.3] {
            let f = ScalarField::constant(&grid, c);
            let s = s_map(&ctx, &f).unwrap();
            let one = ScalarField::constant(&grid, 1.0);
            let lin = linearize_apply(&ctx, &s, &f, &one).unwrap();
            let closed = constant_point_coefficient(&ctx, c);
            let defect = lin.sub(&closed).linf_norm();
            assert!(defect < 1e-9 * (1.0 + closed.linf_norm()), "c={c}: defect {defect}");
        }
    }

    #[test]
    fn exponent_bounds_all_small_dimensions() {
        assert!(exponent_bounds_check(4, 1));
        assert!(exponent_bounds_check(2, 1));
        for n in 2..=12 {
            for q in 0..=n {
                assert!(exponent_bounds_check(n, q), "failed at n={n} q={q}");
            }
        }
    }

    #[test]
    fn riemannian_background_required() {
        let grid = Grid::torus(&[8, 8], &[1.0, 1.0]).unwrap();
        let g = MetricField::flat(&grid);
        let v = coord_v(&grid, 1);
        let lorentz = crate::deform::switch(&g, &v).unwrap();
        assert!(UpsilonContext::new(&lorentz, &v, Scheme::Fd4).is_err());
    }
}
