//! Monotone iteration between a constant subsolution and supersolution:
//! each step solves the shifted linear problem
//! `(2 Lap_g - lambda) f_{k+1} = -a(df_k, f_k) - lambda f_k`
//! where `a` collects every non-principal term of the operator.

use super::linsolve::{bicgstab, FourierPoissonPrecond};
use super::{SolveError, SolveReport};
use crate::lattice::ScalarField;
use crate::upsilon::{upsilon, UpsilonContext};

/// Estimate of `10 * max |da/du|` over the bracket slab, by sampling the
/// constant-field operator.
fn default_shift(
    ctx: &UpsilonContext,
    s: &ScalarField,
    f_minus: f64,
    f_plus: f64,
) -> Result<f64, SolveError> {
    let grid = ctx.grid();
    let mut worst: f64 = 0.0;
    for i in 0..5 {
        let c = f_minus + (f_plus - f_minus) * i as f64 / 4.0;
        let d = 1e-4 * c;
        let up = upsilon(ctx, s, &ScalarField::constant(grid, c + d))?;
        let dn = upsilon(ctx, s, &ScalarField::constant(grid, c - d))?;
        let slope = up.sub(&dn).scale(1.0 / (2.0 * d)).linf_norm();
        worst = worst.max(slope);
    }
    Ok(10.0 * worst.max(1.0))
}

pub fn monotone_solve(
    ctx: &UpsilonContext,
    s: &ScalarField,
    f_minus: f64,
    f_plus: f64,
    lambda_shift: Option<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport, SolveError> {
    let grid = ctx.grid().clone();
    if !(f_minus < f_plus) {
        return Err(SolveError::BadBracket(f_minus, f_plus));
    }
    // verify the bracket node-wise
    let u_minus = upsilon(ctx, s, &ScalarField::constant(&grid, f_minus))?;
    let u_plus = upsilon(ctx, s, &ScalarField::constant(&grid, f_plus))?;
    if !(u_minus.min() > 0.0 && u_plus.max() < 0.0) {
        return Err(SolveError::BadBracket(f_minus, f_plus));
    }

    let lambda = match lambda_shift {
        Some(l) => l,
        None => default_shift(ctx, s, f_minus, f_plus)?,
    };
    let lo = f_minus * 0.95;
    let hi = f_plus * 1.05;

    let mut f = ScalarField::constant(&grid, 0.5 * (f_minus + f_plus));
    let mut report = SolveReport::new(f.clone());
    report.bracket = Some((f_minus, f_plus));
    report.trace.push(format!("monotone: lambda = {lambda:.3e}, bracket [{f_minus:.4}, {f_plus:.4}]"));
    let enclosure_ok = true;

    let precond = if grid.fully_periodic() {
        Some(FourierPoissonPrecond::new(&grid, ctx.scheme(), 2.0, lambda))
    } else {
        None
    };
    let nodes = grid.num_nodes();

    for it in 0..max_iter {
        let res = upsilon(ctx, s, &f)?;
        let rnorm = res.linf_norm();
        report.iterations = it;
        report.residual = rnorm;
        if rnorm <= tol {
            report.converged = true;
            report.enclosure_ok = Some(enclosure_ok);
            report.trace.push(format!("monotone: converged in {it} iterations, residual {rnorm:.3e}"));
            report.set_f(f);
            return Ok(report);
        }
        // a(df, f) = Upsilon(f) - 2 Lap f
        let lap = ctx.laplacian(&f)?;
        let a = res.sub(&lap.scale(2.0));
        let rhs: Vec<f64> = (0..nodes)
            .map(|k| -a.data()[k] - lambda * f.data()[k])
            .collect();
        let apply = |x: &[f64], out: &mut [f64]| {
            let xf = ScalarField::from_vec(&grid, x.to_vec()).expect("finite");
            let l = ctx.laplacian(&xf).expect("laplacian");
            for i in 0..x.len() {
                out[i] = 2.0 * l.data()[i] - lambda * x[i];
            }
        };
        let op = (nodes, apply);
        let pf = precond.as_ref().map(|p| {
            let pref: Box<dyn Fn(&[f64]) -> Vec<f64>> = Box::new(move |r: &[f64]| p.solve(r));
            pref
        });
        let (next, _, ok) = bicgstab(
            &op,
            &rhs,
            f.data(),
            pf.as_deref(),
            1e-12,
            400,
        );
        if !ok {
            return Err(SolveError::LinearStagnation(rnorm));
        }
        let next = ScalarField::from_vec(&grid, next)?;
        let (fmin, fmax) = (next.min(), next.max());
        if fmin < lo || fmax > hi {
            report.trace.push(format!(
                "monotone: iterate escaped bracket slab ([{fmin:.4}, {fmax:.4}] vs [{lo:.4}, {hi:.4}])"
            ));
            report.enclosure_ok = Some(false);
            report.set_f(f);
            return Err(SolveError::RangeViolation(format!(
                "iterate range [{fmin:.4}, {fmax:.4}] outside [{lo:.4}, {hi:.4}]"
            )));
        }
        f = next;
    }
    let res = upsilon(ctx, s, &f)?;
    report.residual = res.linf_norm();
    report.iterations = max_iter;
    report.enclosure_ok = Some(enclosure_ok);
    report.set_f(f);
    Err(SolveError::NoConvergence(max_iter, report.residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MetricField;
    use crate::lattice::{Grid, Scheme};
    use crate::solve::{preset_distribution, Preset};
    use crate::upsilon::s_map;

    #[test]
    fn constant_fixed_point_on_flat_data() {
        let grid = Grid::torus(&[8, 8], &[1.0, 1.0]).unwrap();
        let g = MetricField::flat(&grid);
        let v = preset_distribution(Preset::Coordinate(1), &grid).unwrap();
        let ctx = crate::upsilon::UpsilonContext::new(&g, &v, Scheme::Fd4).unwrap();
        let c0 = 1.3;
        let s = s_map(&ctx, &ScalarField::constant(&grid, c0)).unwrap();
        // flat data: S(c0) = 0 identically, and Upsilon(c) = -c^mu (..) * 0 = 0?
        // s is exactly zero, so any constant solves; perturb s slightly to pin c0
        assert!(s.linf_norm() < 1e-12);
        // instead plant a genuinely nonflat case via the contact preset;
        // a tight bracket keeps the shifted iteration's contraction rate
        // away from 1
        let grid3 = Grid::torus(&[8, 8, 8], &[1.0; 3]).unwrap();
        let g3 = MetricField::flat(&grid3);
        let plane = preset_distribution(Preset::Contact3, &grid3).unwrap();
        let ctx3 = crate::upsilon::UpsilonContext::new(&g3, &plane, Scheme::Fd4).unwrap();
        let s3 = s_map(&ctx3, &ScalarField::constant(&grid3, c0)).unwrap();
        let rep = monotone_solve(&ctx3, &s3, 1.15, 1.45, None, 1e-9, 400).unwrap();
        assert!(rep.converged);
        assert!((rep.f.min() - c0).abs() < 1e-6, "min {}", rep.f.min());
        assert!((rep.f.max() - c0).abs() < 1e-6);
        assert_eq!(rep.enclosure_ok, Some(true));
    }

    #[test]
    fn inverted_bracket_rejected() {
        let grid = Grid::torus(&[8, 8, 8], &[1.0; 3]).unwrap();
        let g = MetricField::flat(&grid);
        let plane = preset_distribution(Preset::Contact3, &grid).unwrap();
        let ctx = crate::upsilon::UpsilonContext::new(&g, &plane, Scheme::Fd4).unwrap();
        let s = ScalarField::constant(&grid, -3.0);
        assert!(matches!(
            monotone_solve(&ctx, &s, 2.0, 1.0, None, 1e-8, 10),
            Err(SolveError::BadBracket(..))
        ));
    }
}
