//! Torus diffeomorphisms built from primitive maps (translations, shears by
//! trig polynomials, per-axis warps), with analytic Jacobians, numeric
//! inverses and trigonometric-interpolation pullbacks.

use crate::geometry::{GeometryError, MetricField};
use crate::lattice::{Grid, MatrixField, ScalarField};
use crate::util;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::TAU;

/// Periodic trigonometric polynomial `sum_k amp_k sin(2 pi freq_k t / L + phase_k)`.
#[derive(Debug, Clone)]
pub struct TrigPoly {
    pub terms: Vec<(f64, i32, f64)>, // (amp, freq, phase)
}

impl TrigPoly {
    pub fn eval(&self, t: f64, period: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(a, k, p)| a * (TAU * k as f64 * t / period + p).sin())
            .sum()
    }
    pub fn deriv(&self, t: f64, period: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(a, k, p)| {
                let w = TAU * k as f64 / period;
                a * w * (w * t + p).cos()
            })
            .sum()
    }
}

/// Primitive circle-by-circle diffeomorphisms.
#[derive(Debug, Clone)]
pub enum Primitive {
    /// `x_a -> x_a + c_a`
    Translate { offsets: Vec<f64> },
    /// `x_target -> x_target + psi(x_source)`
    Shear { target: usize, source: usize, psi: TrigPoly },
    /// `x_a -> x_a + rho sin(2 pi x_a / L_a + phase)`
    Warp { axis: usize, rho: f64, phase: f64 },
}

/// Composition of primitives; `maps[0]` acts first. Each warp must be a
/// degree-1 circle diffeomorphism: its derivative stays above 0.05.
#[derive(Debug, Clone)]
pub struct TorusDiffeo {
    pub maps: Vec<Primitive>,
}

impl TorusDiffeo {
    pub fn identity() -> TorusDiffeo {
        TorusDiffeo { maps: Vec::new() }
    }

    pub fn validate(&self, grid: &Grid) -> Result<(), GeometryError> {
        for m in &self.maps {
            match m {
                Primitive::Warp { axis, rho, .. } => {
                    let scale = TAU * rho.abs() / grid.lengths()[*axis];
                    if scale >= 0.95 {
                        return Err(GeometryError::Invalid(format!(
                            "warp is not a diffeomorphism: |2 pi rho / L| = {scale} >= 0.95"
                        )));
                    }
                }
                Primitive::Shear { target, source, .. } => {
                    if target == source {
                        return Err(GeometryError::Invalid(
                            "shear target must differ from its source axis".into(),
                        ));
                    }
                }
                Primitive::Translate { .. } => {}
            }
        }
        Ok(())
    }

    /// Forward image of a point (not wrapped).
    pub fn apply(&self, grid: &Grid, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for m in &self.maps {
            apply_primitive(m, grid, &mut y);
        }
        y
    }

    /// Jacobian `J^a_i = d phi^a / d x_i` at `x` (row-major n x n).
    pub fn jacobian(&self, grid: &Grid, x: &[f64]) -> Vec<f64> {
        let n = grid.dim();
        let mut j = identity_mat(n);
        let mut y = x.to_vec();
        for m in &self.maps {
            let jp = primitive_jacobian(m, grid, &y);
            j = mat_mul(&jp, &j, n);
            apply_primitive(m, grid, &mut y);
        }
        j
    }

    /// Preimage of a point (primitive-by-primitive inversion; warps are
    /// inverted by a few Newton steps on the scalar circle map).
    pub fn apply_inverse(&self, grid: &Grid, y: &[f64]) -> Vec<f64> {
        let mut x = y.to_vec();
        for m in self.maps.iter().rev() {
            invert_primitive(m, grid, &mut x);
        }
        x
    }
}

fn identity_mat(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += a[i * n + k] * b[k * n + j];
            }
            out[i * n + j] = acc;
        }
    }
    out
}

fn apply_primitive(m: &Primitive, grid: &Grid, y: &mut [f64]) {
    match m {
        Primitive::Translate { offsets } => {
            for (a, &c) in offsets.iter().enumerate() {
                y[a] += c;
            }
        }
        Primitive::Shear { target, source, psi } => {
            y[*target] += psi.eval(y[*source], grid.lengths()[*source]);
        }
        Primitive::Warp { axis, rho, phase } => {
            let l = grid.lengths()[*axis];
            y[*axis] += rho * (TAU * y[*axis] / l + phase).sin();
        }
    }
}

fn primitive_jacobian(m: &Primitive, grid: &Grid, y: &[f64]) -> Vec<f64> {
    let n = grid.dim();
    let mut j = identity_mat(n);
    match m {
        Primitive::Translate { .. } => {}
        Primitive::Shear { target, source, psi } => {
            j[target * n + source] = psi.deriv(y[*source], grid.lengths()[*source]);
        }
        Primitive::Warp { axis, rho, phase } => {
            let l = grid.lengths()[*axis];
            j[axis * n + axis] = 1.0 + rho * TAU / l * (TAU * y[*axis] / l + phase).cos();
        }
    }
    j
}

fn invert_primitive(m: &Primitive, grid: &Grid, x: &mut [f64]) {
    match m {
        Primitive::Translate { offsets } => {
            for (a, &c) in offsets.iter().enumerate() {
                x[a] -= c;
            }
        }
        Primitive::Shear { target, source, psi } => {
            // the source coordinate is untouched by the shear
            x[*target] -= psi.eval(x[*source], grid.lengths()[*source]);
        }
        Primitive::Warp { axis, rho, phase } => {
            // solve t + rho sin(2 pi t / L + phase) = x[axis]
            let l = grid.lengths()[*axis];
            let target = x[*axis];
            let mut t = target;
            for _ in 0..60 {
                let f = t + rho * (TAU * t / l + phase).sin() - target;
                let fp = 1.0 + rho * TAU / l * (TAU * t / l + phase).cos();
                let step = f / fp;
                t -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            x[*axis] = t;
        }
    }
}

// ---------------------------------------------------------------------------
// trigonometric interpolation

/// Fourier-series evaluator of a periodic scalar field at arbitrary points.
pub struct TrigInterp {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl TrigInterp {
    pub fn new(f: &ScalarField) -> TrigInterp {
        let grid = f.grid().clone();
        assert!(grid.fully_periodic(), "trig interpolation needs periodic axes");
        let mut coeffs: Vec<Complex64> =
            f.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut planner = FftPlanner::<f64>::new();
        for a in 0..grid.dim() {
            let n = grid.sizes()[a];
            let fft = planner.plan_fft_forward(n);
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            grid.for_each_line(a, |base, stride, len| {
                for k in 0..len {
                    line[k] = coeffs[base + k * stride];
                }
                fft.process(&mut line);
                let norm = 1.0 / len as f64;
                for k in 0..len {
                    coeffs[base + k * stride] = line[k] * norm;
                }
            });
        }
        TrigInterp { grid, coeffs }
    }

    /// Evaluate at an arbitrary point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = self.grid.dim();
        // per-axis complex exponential tables e^{i k_m x_a}
        let tables: Vec<Vec<Complex64>> = (0..n)
            .map(|a| {
                let na = self.grid.sizes()[a];
                let l = self.grid.lengths()[a];
                (0..na)
                    .map(|m| {
                        let m_signed =
                            if m <= na / 2 { m as i64 } else { m as i64 - na as i64 };
                        // split the unmatched Nyquist mode symmetrically
                        let (k, w) = if 2 * m == na {
                            (TAU * m_signed as f64 / l, 0.0)
                        } else {
                            (TAU * m_signed as f64 / l, 1.0)
                        };
                        let ang = k * x[a];
                        // keep the Nyquist cosine half (real part) only
                        if w == 0.0 {
                            Complex64::new((TAU * (na / 2) as f64 / l * x[a]).cos(), 0.0)
                        } else {
                            Complex64::new(ang.cos(), ang.sin())
                        }
                    })
                    .collect()
            })
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (node, &c) in self.coeffs.iter().enumerate() {
            if c.norm_sqr() < 1e-300 {
                continue;
            }
            let multi = self.grid.multi_index(node);
            let mut e = Complex64::new(1.0, 0.0);
            for a in 0..n {
                e *= tables[a][multi[a]];
            }
            acc += c * e;
        }
        acc.re
    }
}

/// `phi* s = s o phi` by trigonometric interpolation.
pub fn pullback_scalar(s: &ScalarField, phi: &TorusDiffeo) -> Result<ScalarField, GeometryError> {
    let grid = s.grid().clone();
    phi.validate(&grid)?;
    let interp = TrigInterp::new(s);
    let data: Vec<f64> = (0..grid.num_nodes())
        .map(|node| interp.eval(&phi.apply(&grid, &grid.node_coords(node))))
        .collect();
    Ok(ScalarField::from_vec(&grid, data)?)
}

/// `(phi* g)_{ij}(x) = d_i phi^a d_j phi^b g_ab(phi(x))`.
pub fn pullback_metric(g: &MetricField, phi: &TorusDiffeo) -> Result<MetricField, GeometryError> {
    let grid = g.grid().clone();
    phi.validate(&grid)?;
    let n = g.n();
    let interps: Vec<TrigInterp> = (0..n * n)
        .map(|k| {
            TrigInterp::new(
                &ScalarField::from_vec(&grid, g.entry(k / n, k % n).to_vec()).expect("finite"),
            )
        })
        .collect();
    let nodes = grid.num_nodes();
    let mut entries = vec![vec![0.0; nodes]; n * n];
    let mut gval = vec![0.0; n * n];
    for node in 0..nodes {
        let x = grid.node_coords(node);
        let y = phi.apply(&grid, &x);
        let j = phi.jacobian(&grid, &x);
        for k in 0..n * n {
            gval[k] = interps[k].eval(&y);
        }
        for i in 0..n {
            for jj in 0..n {
                let mut acc = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        acc += j[a * n + i] * j[b * n + jj] * gval[a * n + b];
                    }
                }
                entries[i * n + jj][node] = acc;
            }
        }
        // symmetrise roundoff
        for i in 0..n {
            for jj in i + 1..n {
                let m = 0.5 * (entries[i * n + jj][node] + entries[jj * n + i][node]);
                entries[i * n + jj][node] = m;
                entries[jj * n + i][node] = m;
            }
        }
    }
    MetricField::new(MatrixField::from_entries(&grid, n, entries)?)
}

/// `((phi^{-1})* g)(x) = J^{-T} g(phi^{-1}(x)) J^{-1}` with J the forward
/// Jacobian at the preimage.
pub fn pullback_metric_inverse(
    g: &MetricField,
    phi: &TorusDiffeo,
) -> Result<MetricField, GeometryError> {
    let grid = g.grid().clone();
    phi.validate(&grid)?;
    let n = g.n();
    let interps: Vec<TrigInterp> = (0..n * n)
        .map(|k| {
            TrigInterp::new(
                &ScalarField::from_vec(&grid, g.entry(k / n, k % n).to_vec()).expect("finite"),
            )
        })
        .collect();
    let nodes = grid.num_nodes();
    let mut entries = vec![vec![0.0; nodes]; n * n];
    let mut gval = vec![0.0; n * n];
    for node in 0..nodes {
        let x = grid.node_coords(node);
        let pre = phi.apply_inverse(&grid, &x);
        let mut j = phi.jacobian(&grid, &pre);
        if !util::invert_in_place(&mut j, n, 1e-13) {
            return Err(GeometryError::Invalid("diffeomorphism Jacobian singular".into()));
        }
        for k in 0..n * n {
            gval[k] = interps[k].eval(&pre);
        }
        for i in 0..n {
            for jj in 0..n {
                let mut acc = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        acc += j[a * n + i] * j[b * n + jj] * gval[a * n + b];
                    }
                }
                entries[i * n + jj][node] = acc;
            }
        }
        for i in 0..n {
            for jj in i + 1..n {
                let m = 0.5 * (entries[i * n + jj][node] + entries[jj * n + i][node]);
                entries[i * n + jj][node] = m;
                entries[jj * n + i][node] = m;
            }
        }
    }
    MetricField::new(MatrixField::from_entries(&grid, n, entries)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::scal_oracle;
    use crate::lattice::Scheme;

    #[test]
    fn identity_pullback_is_identity() {
        let grid = Grid::torus(&[32, 32], &[1.0, 1.0]).unwrap();
        let s = ScalarField::from_fn(&grid, |x| (TAU * x[0]).sin() + 0.3 * (2.0 * TAU * x[1]).cos());
        let phi = TorusDiffeo::identity();
        let p = pullback_scalar(&s, &phi).unwrap();
        assert!(p.sub(&s).linf_norm() < 1e-12);
    }

    #[test]
    fn translation_pullback_translates() {
        let grid = Grid::torus(&[32, 32], &[1.0, 1.0]).unwrap();
        let s = ScalarField::from_fn(&grid, |x| (TAU * x[0]).sin());
        let phi = TorusDiffeo {
            maps: vec![Primitive::Translate { offsets: vec![0.25, 0.0] }],
        };
        let p = pullback_scalar(&s, &phi).unwrap();
        let expect = ScalarField::from_fn(&grid, |x| (TAU * (x[0] + 0.25)).sin());
        assert!(p.sub(&expect).linf_norm() < 1e-11);
    }

    #[test]
    fn warp_inverse_round_trip() {
        let grid = Grid::torus(&[16, 16], &[1.0, 1.0]).unwrap();
        let phi = TorusDiffeo {
            maps: vec![
                Primitive::Warp { axis: 0, rho: 0.9 / TAU, phase: 0.4 },
                Primitive::Shear {
                    target: 1,
                    source: 0,
                    psi: TrigPoly { terms: vec![(0.2, 1, 0.0)] },
                },
                Primitive::Translate { offsets: vec![0.1, -0.3] },
            ],
        };
        phi.validate(&grid).unwrap();
        for node in (0..grid.num_nodes()).step_by(13) {
            let x = grid.node_coords(node);
            let y = phi.apply(&grid, &x);
            let back = phi.apply_inverse(&grid, &y);
            for a in 0..2 {
                assert!((back[a] - x[a]).abs() < 1e-12, "axis {a}");
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let grid = Grid::torus(&[16, 16], &[1.0, 1.0]).unwrap();
        let phi = TorusDiffeo {
            maps: vec![
                Primitive::Shear {
                    target: 0,
                    source: 1,
                    psi: TrigPoly { terms: vec![(0.3, 2, 1.1)] },
                },
                Primitive::Warp { axis: 1, rho: 0.1, phase: 0.0 },
            ],
        };
        let x = [0.23, 0.71];
        let j = phi.jacobian(&grid, &x);
        let eps = 1e-6;
        for i in 0..2 {
            let mut xp = x.to_vec();
            xp[i] += eps;
            let mut xm = x.to_vec();
            xm[i] -= eps;
            let yp = phi.apply(&grid, &xp);
            let ym = phi.apply(&grid, &xm);
            for a in 0..2 {
                let fd = (yp[a] - ym[a]) / (2.0 * eps);
                assert!((j[a * 2 + i] - fd).abs() < 1e-8, "J[{a}][{i}]");
            }
        }
    }

    #[test]
    fn translation_naturality_of_scal() {
        let grid = Grid::torus(&[32, 32], &[1.0, 1.0]).unwrap();
        let g = MetricField::from_fn(&grid, |i, j, x| {
            let base = if i == j { 1.0 } else { 0.0 };
            base + if (i, j) == (0, 1) || (i, j) == (1, 0) {
                0.2 * (TAU * x[0]).sin()
            } else {
                0.0
            }
        })
        .unwrap();
        let phi = TorusDiffeo {
            maps: vec![Primitive::Translate { offsets: vec![0.5, 0.25] }],
        };
        let pg = pullback_metric(&g, &phi).unwrap();
        let s_pg = scal_oracle(&pg, Scheme::Spectral).unwrap();
        let ps = pullback_scalar(&scal_oracle(&g, Scheme::Spectral).unwrap(), &phi).unwrap();
        assert!(s_pg.sub(&ps).linf_norm() < 1e-8);
    }
}
