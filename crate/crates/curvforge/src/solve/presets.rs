//! Explicit distributions on flat tori whose twistedness is verified
//! numerically at construction.

use crate::geometry::{Distribution, GeometryError, MetricField};
use crate::lattice::{lie_bracket, Grid, LatticeError, Scheme, VectorField};
use std::f64::consts::TAU;

/// Catalog of preset distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// span of the first q coordinate fields (integrable)
    Coordinate(usize),
    /// the rotating contact 2-plane on T^3
    Contact3,
    /// a spiralling 2-plane on T^n, n >= 3
    Spiral2,
    /// the rotating hyperplane ker(cos(2 pi x_n) dx_1 - sin(2 pi x_n) dx_2)
    RotHyperplane,
}

fn unit_freq(grid: &Grid, axis: usize) -> f64 {
    TAU / grid.lengths()[axis]
}

/// Builds the preset on a fully periodic grid. Non-coordinate presets must
/// come out everywhere twisted (min node-wise twist^2 > 0) or construction
/// fails — this guards the formulas the presets feed.
pub fn preset_distribution(preset: Preset, grid: &Grid) -> Result<Distribution, GeometryError> {
    if !grid.fully_periodic() {
        return Err(GeometryError::Lattice(LatticeError::GridMismatch));
    }
    let n = grid.dim();
    let dist = match preset {
        Preset::Coordinate(q) => {
            assert!(q >= 1 && q <= n);
            let spans = (0..q).map(|a| VectorField::coordinate_axis(grid, a)).collect();
            let hint = (q..n).map(|a| VectorField::coordinate_axis(grid, a)).collect();
            Distribution::with_hint(spans, Some(hint))?
        }
        Preset::Contact3 => {
            assert_eq!(n, 3, "contact3 preset needs dimension 3");
            let w = unit_freq(grid, 2);
            let spans = vec![
                VectorField::coordinate_axis(grid, 2),
                VectorField::from_fns(grid, |c, x| match c {
                    0 => (w * x[2]).sin(),
                    1 => (w * x[2]).cos(),
                    _ => 0.0,
                }),
            ];
            let hint = vec![VectorField::from_fns(grid, |c, x| match c {
                0 => (w * x[2]).cos(),
                1 => -(w * x[2]).sin(),
                _ => 0.0,
            })];
            Distribution::with_hint(spans, Some(hint))?
        }
        Preset::Spiral2 => {
            assert!(n >= 3, "spiral2 preset needs dimension >= 3");
            let w = unit_freq(grid, 0);
            let spans = vec![
                VectorField::coordinate_axis(grid, 0),
                VectorField::from_fns(grid, |c, x| match c {
                    1 => (w * x[0]).cos(),
                    2 => (w * x[0]).sin(),
                    _ => 0.0,
                }),
            ];
            let mut hint = vec![VectorField::from_fns(grid, |c, x| match c {
                1 => -(w * x[0]).sin(),
                2 => (w * x[0]).cos(),
                _ => 0.0,
            })];
            for a in 3..n {
                hint.push(VectorField::coordinate_axis(grid, a));
            }
            Distribution::with_hint(spans, Some(hint))?
        }
        Preset::RotHyperplane => {
            assert!(n >= 3, "rot_hyperplane preset needs dimension >= 3");
            let w = unit_freq(grid, n - 1);
            let mut spans = vec![VectorField::from_fns(grid, |c, x| match c {
                0 => (w * x[n - 1]).sin(),
                1 => (w * x[n - 1]).cos(),
                _ => 0.0,
            })];
            for a in 2..n {
                spans.push(VectorField::coordinate_axis(grid, a));
            }
            let hint = vec![VectorField::from_fns(grid, |c, x| match c {
                0 => (w * x[n - 1]).cos(),
                1 => -(w * x[n - 1]).sin(),
                _ => 0.0,
            })];
            Distribution::with_hint(spans, Some(hint))?
        }
    };
    if !matches!(preset, Preset::Coordinate(_)) {
        let min_twist = min_twist_sq(grid, &dist)?;
        if min_twist <= 0.0 {
            return Err(GeometryError::Invalid(format!(
                "preset failed its twist verification (min twist^2 = {min_twist:e})"
            )));
        }
    }
    Ok(dist)
}

/// Minimum node-wise twist^2 of the span, computed from the raw brackets and
/// the euclidean projector off the span (independent of any metric surgery).
fn min_twist_sq(grid: &Grid, dist: &Distribution) -> Result<f64, GeometryError> {
    let flat = MetricField::flat(grid);
    let q = dist.rank();
    // project the brackets off the span with the euclidean projector
    let mut min_t = f64::INFINITY;
    let mut totals = vec![0.0; grid.num_nodes()];
    for i in 0..q {
        for j in i + 1..q {
            let br = lie_bracket(&dist.spans()[i], &dist.spans()[j], Scheme::Fd4)?;
            let off = crate::geometry::project(&flat, dist, &br, true)?;
            let sq = flat.inner(&off, &off);
            for (node, t) in totals.iter_mut().enumerate() {
                *t += 2.0 * sq.data()[node];
            }
        }
    }
    for &t in &totals {
        min_t = min_t.min(t);
    }
    Ok(min_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distribution_scalars;

    #[test]
    fn coordinate_preset_untwisted() {
        let grid = Grid::torus(&[12, 12], &[1.0, 1.0]).unwrap();
        let v = preset_distribution(Preset::Coordinate(1), &grid).unwrap();
        assert_eq!(v.rank(), 1);
        let g = MetricField::flat(&grid);
        let s = distribution_scalars(&g, &v, Scheme::Fd4).unwrap();
        assert!(s.twist_sq_v.linf_norm() < 1e-12);
    }

    #[test]
    fn contact3_twisted_everywhere() {
        let grid = Grid::torus(&[16, 16, 16], &[1.0; 3]).unwrap();
        let plane = preset_distribution(Preset::Contact3, &grid).unwrap();
        assert_eq!(plane.rank(), 2);
        let g = MetricField::flat(&grid);
        let s = distribution_scalars(&g, &plane, Scheme::Spectral).unwrap();
        assert!(s.twist_sq_v.min() > 1.0);
    }

    #[test]
    fn spiral2_bracket_leaves_span() {
        // symbolic oracle: [d_1, cos w x_1 d_2 + sin w x_1 d_3]
        //                = w (-sin w x_1 d_2 + cos w x_1 d_3), never in the span
        let grid = Grid::torus(&[16, 16, 16], &[1.0; 3]).unwrap();
        let d = preset_distribution(Preset::Spiral2, &grid).unwrap();
        let br = lie_bracket(&d.spans()[0], &d.spans()[1], Scheme::Spectral).unwrap();
        for node in (0..grid.num_nodes()).step_by(53) {
            let x = grid.node_coords(node);
            let expect = [0.0, -TAU * (TAU * x[0]).sin(), TAU * (TAU * x[0]).cos()];
            let got = br.value(node);
            for c in 0..3 {
                assert!((got[c] - expect[c]).abs() < 1e-9);
            }
        }
        let g = MetricField::flat(&grid);
        let s = distribution_scalars(&g, &d, Scheme::Spectral).unwrap();
        assert!(s.twist_sq_v.min() > 1.0);
    }

    #[test]
    fn rot_hyperplane_twisted_on_t4() {
        let grid = Grid::torus(&[12; 4], &[1.0; 4]).unwrap();
        let h = preset_distribution(Preset::RotHyperplane, &grid).unwrap();
        assert_eq!(h.rank(), 3);
        let g = MetricField::flat(&grid);
        let s = distribution_scalars(&g, &h, Scheme::Fd4).unwrap();
        assert!(s.twist_sq_v.min() > 1.0, "min twist {}", s.twist_sq_v.min());
        // the complement line is untwisted
        let line = crate::geometry::orthogonal_complement(&g, &h).unwrap();
        let sl = distribution_scalars(&g, &line, Scheme::Fd4).unwrap();
        assert!(sl.twist_sq_v.linf_norm() < 1e-9);
    }
}
