//! Damped Newton for the semilinear operator, with matrix-free Jacobian
//! solves preconditioned by the constant-coefficient inverse on periodic
//! grids.

use super::linsolve::{bicgstab, FourierPoissonPrecond};
use super::{SolveError, SolveReport};
use crate::lattice::ScalarField;
use crate::upsilon::{linearize_apply, upsilon, UpsilonContext};

pub const POSITIVITY_FLOOR: f64 = 1e-6;

pub fn newton_solve(
    ctx: &UpsilonContext,
    s: &ScalarField,
    f0: &ScalarField,
    damping: bool,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport, SolveError> {
    let grid = ctx.grid().clone();
    if f0.min() <= 0.0 {
        return Err(SolveError::RangeViolation(format!(
            "initial iterate must be positive (min {})",
            f0.min()
        )));
    }
    let nodes = grid.num_nodes();
    let mut f = f0.clone();
    let mut report = SolveReport::new(f.clone());
    let mut res = upsilon(ctx, s, &f)?;
    let mut rnorm = res.linf_norm();
    let mut history = vec![rnorm];

    for it in 0..=max_iter {
        report.iterations = it;
        report.residual = rnorm;
        if rnorm <= tol {
            report.converged = true;
            report.trace.push(format!(
                "newton: converged in {it} iterations, residual {rnorm:.3e}, history {:?}",
                history.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>()
            ));
            report.set_f(f);
            return Ok(report);
        }
        if it == max_iter {
            break;
        }
        // shift estimate from the zeroth-order coefficient of the Jacobian
        let one = ScalarField::constant(&grid, 1.0);
        let coef = linearize_apply(ctx, s, &f, &one)?;
        let lambda = coef.linf_norm().max(1.0);
        let precond = if grid.fully_periodic() {
            Some(FourierPoissonPrecond::new(&grid, ctx.scheme(), 2.0, lambda))
        } else {
            None
        };
        let apply = |x: &[f64], out: &mut [f64]| {
            let xf = ScalarField::from_vec(&grid, x.to_vec()).expect("finite");
            let jx = linearize_apply(ctx, s, &f, &xf).expect("jacobian");
            out.copy_from_slice(jx.data());
        };
        let op = (nodes, apply);
        let rhs: Vec<f64> = res.data().iter().map(|&v| -v).collect();
        let pf = precond.as_ref().map(|p| {
            let b: Box<dyn Fn(&[f64]) -> Vec<f64>> = Box::new(move |r: &[f64]| p.solve(r));
            b
        });
        let (delta, _, ok) = bicgstab(&op, &rhs, &vec![0.0; nodes], pf.as_deref(), 1e-10, 400);
        if !ok {
            return Err(SolveError::LinearStagnation(rnorm));
        }
        let delta = ScalarField::from_vec(&grid, delta)?;

        // Armijo-style damping on the residual sup norm, clipping for
        // positivity
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let trial = f
                .zip_map(&delta, |a, d| (a + alpha * d).max(POSITIVITY_FLOOR));
            let trial_res = upsilon(ctx, s, &trial)?;
            let trial_norm = trial_res.linf_norm();
            let goal = if damping { (1.0 - 0.25 * alpha) * rnorm } else { rnorm * 2.0 };
            if trial_norm <= goal {
                f = trial;
                res = trial_res;
                rnorm = trial_norm;
                history.push(rnorm);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            report.trace.push(format!("newton: line search failed at iteration {it}"));
            report.residual = rnorm;
            report.set_f(f);
            return Err(SolveError::NoConvergence(it, rnorm));
        }
    }
    report.trace.push(format!("newton: out of iterations, residual {rnorm:.3e}"));
    report.set_f(f);
    Err(SolveError::NoConvergence(max_iter, rnorm))
}
