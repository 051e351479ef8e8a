//! Constant sub/supersolution scans for the elliptic operator.

use crate::lattice::ScalarField;
use crate::upsilon::UpsilonContext;

#[derive(Debug, thiserror::Error)]
pub enum ScanError {
    #[error("no constant supersolution found up to c = {c_max} — V may be untwisted and s not sufficiently positive")]
    NoSupersolution { c_max: f64 },
    #[error("no constant subsolution found down to c = {c_min} — H may be untwisted and s not sufficiently negative")]
    NoSubsolution { c_min: f64 },
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

fn margin(ctx: &UpsilonContext, s: &ScalarField) -> f64 {
    // scale from the operator magnitude at f = 1
    let u1 = ctx.upsilon_constant(s, 1.0);
    1e-8 * (1.0 + u1.linf_norm() + s.linf_norm())
}

/// Scans a log grid of constants upward from 1 to `c_max` and returns the
/// smallest scanned c with node-wise max of the operator below `-margin`.
/// Constant evaluations use the derivative-free fast path.
pub fn find_constant_supersolution(
    ctx: &UpsilonContext,
    s: &ScalarField,
    c_max: f64,
    samples: usize,
) -> Result<f64, ScanError> {
    let m = margin(ctx, s);
    for i in 0..samples {
        let c = if samples == 1 {
            1.0
        } else {
            (c_max.ln() * i as f64 / (samples - 1) as f64).exp()
        };
        let u = ctx.upsilon_constant(s, c);
        if u.max() < -m {
            return Ok(c);
        }
    }
    Err(ScanError::NoSupersolution { c_max })
}

/// Mirror scan downward from 1 to `c_min`; returns the largest scanned c
/// with node-wise min of the operator above `+margin`.
pub fn find_constant_subsolution(
    ctx: &UpsilonContext,
    s: &ScalarField,
    c_min: f64,
    samples: usize,
) -> Result<f64, ScanError> {
    let m = margin(ctx, s);
    for i in 0..samples {
        let c = if samples == 1 {
            1.0
        } else {
            (c_min.ln() * i as f64 / (samples - 1) as f64).exp()
        };
        let u = ctx.upsilon_constant(s, c);
        if u.min() > m {
            return Ok(c);
        }
    }
    Err(ScanError::NoSubsolution { c_min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{orthogonal_complement, MetricField};
    use crate::upsilon::upsilon;
    use crate::lattice::{Grid, Scheme};
    use crate::solve::{preset_distribution, Preset};

    #[test]
    fn flat_integrable_data_has_no_bracket() {
        // all geometric terms vanish; Upsilon(c) = -c^mu (1+c^2)^nu s
        let grid = Grid::torus(&[8, 8], &[1.0, 1.0]).unwrap();
        let g = MetricField::flat(&grid);
        let v = preset_distribution(Preset::Coordinate(1), &grid).unwrap();
        let ctx = UpsilonContext::new(&g, &v, Scheme::Fd4).unwrap();
        // s < 0 makes Upsilon(c) > 0 for every c: no supersolution
        let s_neg = ScalarField::constant(&grid, -1.0);
        assert!(matches!(
            find_constant_supersolution(&ctx, &s_neg, 1e3, 40),
            Err(ScanError::NoSupersolution { .. })
        ));
        // s > 0 makes Upsilon(c) < 0 for every c: no subsolution
        let s_pos = ScalarField::constant(&grid, 1.0);
        assert!(matches!(
            find_constant_subsolution(&ctx, &s_pos, 1e-3, 40),
            Err(ScanError::NoSubsolution { .. })
        ));
    }

    #[test]
    fn twisted_h_gives_small_subsolution_and_rescaled_s_gives_supersolution() {
        // T^4 Lorentz setting: V = line orthogonal to the twisted hyperplane
        let grid = Grid::torus(&[8; 4], &[1.0; 4]).unwrap();
        let g = MetricField::flat(&grid);
        let h = preset_distribution(Preset::RotHyperplane, &grid).unwrap();
        let v = orthogonal_complement(&g, &h).unwrap();
        let ctx = UpsilonContext::new(&g, &v, Scheme::Fd4).unwrap();
        // rescale the positive prescribed function high enough that c = 1
        // becomes a supersolution
        let s = ScalarField::constant(&grid, 2.0).scale(200.0);
        let c_plus = find_constant_supersolution(&ctx, &s, 1e2, 60).unwrap();
        assert!(c_plus < 3.0, "c_plus = {c_plus}");
        let c_minus = find_constant_subsolution(&ctx, &s, 1e-4, 60).unwrap();
        assert!(c_minus < c_plus, "bracket [{c_minus}, {c_plus}]");
    }

    #[test]
    fn twisted_v_gives_large_supersolution() {
        // contact plane as V on T^3: |Twist_V|^2 > 0, so large constants are
        // supersolutions regardless of s
        let grid = Grid::torus(&[12; 3], &[1.0; 3]).unwrap();
        let g = MetricField::flat(&grid);
        let plane = preset_distribution(Preset::Contact3, &grid).unwrap();
        let ctx = UpsilonContext::new(&g, &plane, Scheme::Fd4).unwrap();
        let s = ScalarField::constant(&grid, -3.0);
        let c_plus = find_constant_supersolution(&ctx, &s, 1e3, 80).unwrap();
        assert!(c_plus >= 1.0);
        let f = ScalarField::constant(&grid, c_plus);
        assert!(upsilon(&ctx, &s, &f).unwrap().max() < 0.0);
    }
}
