use curvforge::geometry::{distribution_scalars, scal_oracle, Distribution, MetricField};
use curvforge::lattice::{Grid, Scheme, VectorField};
use std::f64::consts::TAU;
use std::time::Instant;

fn main() {
    // T^2 decomposition defect, spectral, amplitude 0.2
    for n in [32usize, 48, 64, 96] {
        let grid = Grid::torus(&[n, n], &[1.0, 1.0]).unwrap();
        let g = MetricField::from_fn(&grid, |i, j, x| {
            let base = if i == j { 1.0 } else { 0.0 };
            let bump = match (i.min(j), i.max(j)) {
                (0, 0) => (TAU * x[1]).sin(),
                (0, 1) => (TAU * (x[0] + x[0])).cos(),
                _ => (2.0 * TAU * x[0]).cos(),
            };
            base + 0.2 * bump
        }).unwrap();
        let v = Distribution::new(vec![VectorField::coordinate_axis(&grid, 0)]).unwrap();
        let t0 = Instant::now();
        let s = distribution_scalars(&g, &v, Scheme::Spectral).unwrap();
        let oracle = scal_oracle(&g, Scheme::Spectral).unwrap();
        let defect = oracle.sub(&s.scal()).linf_norm();
        println!("T2 N={n}: decomposition defect {defect:.3e}  ({} ms)", t0.elapsed().as_millis());
    }
    // T^3 with contact plane, spectral
    for n in [24usize, 32, 48, 64] {
        let grid = Grid::torus(&[n, n, n], &[1.0; 3]).unwrap();
        let g = MetricField::from_fn(&grid, |i, j, x| {
            let base = if i == j { 1.0 } else { 0.0 };
            let bump = match (i.min(j), i.max(j)) {
                (0, 0) => (TAU * x[1]).sin(),
                (0, 1) => (TAU * (x[0] + x[2])).cos(),
                (1, 1) => (2.0 * TAU * x[0]).cos(),
                _ => (TAU * x[0]).sin() * (TAU * x[1]).cos(),
            };
            base + 0.2 * bump
        }).unwrap();
        let plane = curvforge::solve::preset_distribution(curvforge::solve::Preset::Contact3, &grid).unwrap();
        let t0 = Instant::now();
        let s = distribution_scalars(&g, &plane, Scheme::Spectral).unwrap();
        let oracle = scal_oracle(&g, Scheme::Spectral).unwrap();
        let defect = oracle.sub(&s.scal()).linf_norm();
        let tw = s.twist_sq_h.sub(&s.sigma_h.sub(&s.tau_h).scale(2.0)).linf_norm();
        println!("T3 N={n}: decomposition {defect:.3e}, twist cross {tw:.3e}  ({} ms)", t0.elapsed().as_millis());
    }
    // fd4 timing at 64^3 for the order branch
    {
        let n = 64usize;
        let grid = Grid::torus(&[n, n, n], &[1.0; 3]).unwrap();
        let g = MetricField::from_fn(&grid, |i, j, x| {
            let base = if i == j { 1.0 } else { 0.0 };
            base + 0.2 * ((TAU * (x[(i + j) % 3])).sin())
        }).unwrap();
        let plane = curvforge::solve::preset_distribution(curvforge::solve::Preset::Contact3, &grid).unwrap();
        let t0 = Instant::now();
        let s = distribution_scalars(&g, &plane, Scheme::Fd4).unwrap();
        let t1 = Instant::now();
        let oracle = scal_oracle(&g, Scheme::Fd4).unwrap();
        println!("T3 N=64 fd4: ds {} ms, oracle {} ms, defect {:.3e}",
            (t1 - t0).as_millis(), t1.elapsed().as_millis(),
            oracle.sub(&s.scal()).linf_norm());
    }
}
