//! Coordinate-based curvature: Christoffel symbols from metric derivatives,
//! the Riemann-contraction scalar-curvature oracle, and the coordinate
//! Laplace–Beltrami operator.
//!
//! This path never touches orthonormal frames; it is the independent check
//! for every frame-based quantity in the crate.

use super::{GeometryError, MetricField};
use crate::lattice::{partial_raw, Grid, ScalarField, Scheme, VectorField};
use crate::util;

/// Coordinate Christoffel symbols `G^k_{ab}` (symmetric in a,b) stored as
/// per-node fields.
pub struct CoordChristoffel {
    grid: Grid,
    n: usize,
    /// data[k][tri(a,b)][node] with tri the upper-triangle index
    data: Vec<Vec<Vec<f64>>>,
}

fn tri_index(n: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    a * n - a * (a + 1) / 2 + b
}

impl CoordChristoffel {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn get(&self, k: usize, a: usize, b: usize, node: usize) -> f64 {
        self.data[k][tri_index(self.n, a, b)][node]
    }

    /// Covariant derivative of a vector field: `(nabla_a X)^k`.
    pub fn covariant_derivative(
        &self,
        x: &VectorField,
        scheme: Scheme,
    ) -> Result<Vec<Vec<ScalarField>>, GeometryError> {
        let n = self.n;
        let mut dx = Vec::with_capacity(n);
        for a in 0..n {
            let mut row = Vec::with_capacity(n);
            for k in 0..n {
                let mut d = partial_raw(&self.grid, x.comp(k).data(), a, scheme)?;
                for b in 0..n {
                    let xb = x.comp(b).data();
                    let gam = &self.data[k][tri_index(n, a, b)];
                    for (node, v) in d.iter_mut().enumerate() {
                        *v += gam[node] * xb[node];
                    }
                }
                row.push(ScalarField::from_vec(&self.grid, d)?);
            }
            dx.push(row);
        }
        Ok(dx)
    }
}

/// Pointwise inverse metric, |det| density and Laplace–Beltrami coefficients.
pub struct MetricOps {
    grid: Grid,
    n: usize,
    /// inverse entries g^{ab}, row-major
    pub ginv: Vec<Vec<f64>>,
    /// sqrt |det g| per node
    pub density: Vec<f64>,
    /// first-order Laplace–Beltrami coefficients c^b
    lb_c: Vec<Vec<f64>>,
    scheme: Scheme,
}

impl MetricOps {
    pub fn new(g: &MetricField, scheme: Scheme) -> Result<MetricOps, GeometryError> {
        let grid = g.grid().clone();
        let n = g.n();
        let nodes = grid.num_nodes();
        let mut ginv = vec![vec![0.0; nodes]; n * n];
        let mut density = vec![0.0; nodes];
        let mut buf = vec![0.0; n * n];
        for node in 0..nodes {
            g.at(node, &mut buf);
            let d = util::det(&buf, n);
            density[node] = d.abs().sqrt();
            if !util::invert_in_place(&mut buf, n, 1e-14) {
                return Err(GeometryError::Degenerate { node, eig: 0.0 });
            }
            for k in 0..n * n {
                ginv[k][node] = buf[k];
            }
        }
        // c^b = (1/sqrt|det|) d_a ( sqrt|det| g^{ab} )
        let mut lb_c = Vec::with_capacity(n);
        for b in 0..n {
            let mut acc = vec![0.0; nodes];
            for a in 0..n {
                let prod: Vec<f64> = (0..nodes).map(|k| density[k] * ginv[a * n + b][k]).collect();
                let dprod = partial_raw(&grid, &prod, a, scheme)?;
                for k in 0..nodes {
                    acc[k] += dprod[k];
                }
            }
            for k in 0..nodes {
                acc[k] /= density[k];
            }
            lb_c.push(acc);
        }
        Ok(MetricOps { grid, n, ginv, density, lb_c, scheme })
    }

    pub fn density_field(&self) -> ScalarField {
        ScalarField::from_vec(&self.grid, self.density.clone()).expect("finite")
    }

    /// Laplace–Beltrami `div_g grad_g f = g^{ab} d_a d_b f + c^b d_b f`.
    pub fn laplacian(&self, f: &ScalarField) -> Result<ScalarField, GeometryError> {
        let firsts = self.partials(f)?;
        self.laplacian_with_firsts(f.data(), &firsts)
    }

    pub fn partials(&self, f: &ScalarField) -> Result<Vec<Vec<f64>>, GeometryError> {
        (0..self.n)
            .map(|a| Ok(partial_raw(&self.grid, f.data(), a, self.scheme)?))
            .collect()
    }

    /// Same Laplacian, reusing already-computed first derivatives. The
    /// mixed second derivatives exploit the symmetry of the inverse metric.
    pub fn laplacian_with_firsts(
        &self,
        data: &[f64],
        firsts: &[Vec<f64>],
    ) -> Result<ScalarField, GeometryError> {
        let n = self.n;
        let nodes = self.grid.num_nodes();
        let mut out = vec![0.0; nodes];
        for a in 0..n {
            let second = crate::lattice::partial2_raw(&self.grid, data, a, self.scheme)?;
            let gaa = &self.ginv[a * n + a];
            for k in 0..nodes {
                out[k] += gaa[k] * second[k];
            }
            for b in a + 1..n {
                let mixed = partial_raw(&self.grid, &firsts[a], b, self.scheme)?;
                let gab = &self.ginv[a * n + b];
                for k in 0..nodes {
                    out[k] += 2.0 * gab[k] * mixed[k];
                }
            }
        }
        for b in 0..n {
            let cb = &self.lb_c[b];
            for k in 0..nodes {
                out[k] += cb[k] * firsts[b][k];
            }
        }
        Ok(ScalarField::from_vec(&self.grid, out)?)
    }

    /// `g^{ab} u_a w_b` from precomputed partials.
    pub fn grad_inner_from_partials(&self, u: &[Vec<f64>], w: &[Vec<f64>]) -> Vec<f64> {
        let n = self.n;
        let nodes = self.grid.num_nodes();
        let mut out = vec![0.0; nodes];
        for a in 0..n {
            for b in 0..n {
                let gab = &self.ginv[a * n + b];
                for k in 0..nodes {
                    out[k] += gab[k] * u[a][k] * w[b][k];
                }
            }
        }
        out
    }

    /// `<df, dh>_g = g^{ab} d_a f d_b h`.
    pub fn grad_inner(&self, f: &ScalarField, h: &ScalarField) -> Result<ScalarField, GeometryError> {
        let n = self.n;
        let nodes = self.grid.num_nodes();
        let mut df = Vec::with_capacity(n);
        let mut dh = Vec::with_capacity(n);
        for a in 0..n {
            df.push(partial_raw(&self.grid, f.data(), a, self.scheme)?);
            dh.push(partial_raw(&self.grid, h.data(), a, self.scheme)?);
        }
        let mut out = vec![0.0; nodes];
        for a in 0..n {
            for b in 0..n {
                let gab = &self.ginv[a * n + b];
                for k in 0..nodes {
                    out[k] += gab[k] * df[a][k] * dh[b][k];
                }
            }
        }
        Ok(ScalarField::from_vec(&self.grid, out)?)
    }

    /// Gradient vector field `(grad f)^a = g^{ab} d_b f`.
    pub fn gradient(&self, f: &ScalarField) -> Result<VectorField, GeometryError> {
        let n = self.n;
        let nodes = self.grid.num_nodes();
        let mut df = Vec::with_capacity(n);
        for b in 0..n {
            df.push(partial_raw(&self.grid, f.data(), b, self.scheme)?);
        }
        let comps = (0..n)
            .map(|a| {
                let mut out = vec![0.0; nodes];
                for b in 0..n {
                    let gab = &self.ginv[a * n + b];
                    for k in 0..nodes {
                        out[k] += gab[k] * df[b][k];
                    }
                }
                ScalarField::from_vec(&self.grid, out).expect("finite")
            })
            .collect();
        Ok(VectorField::new(comps))
    }
}

/// Measure density `sqrt|det g|` as a scalar field.
pub fn sqrt_abs_det(g: &MetricField) -> ScalarField {
    let grid = g.grid().clone();
    let n = g.n();
    let mut buf = vec![0.0; n * n];
    let data = (0..grid.num_nodes())
        .map(|node| {
            g.at(node, &mut buf);
            util::det(&buf, n).abs().sqrt()
        })
        .collect();
    ScalarField::from_vec(&grid, data).expect("finite")
}

/// Laplace–Beltrami operator of `g` applied to `f` (coordinate route).
pub fn laplace_beltrami(
    g: &MetricField,
    f: &ScalarField,
    scheme: Scheme,
) -> Result<ScalarField, GeometryError> {
    MetricOps::new(g, scheme)?.laplacian(f)
}

/// Coordinate Christoffel symbols
/// `G^k_{ab} = 1/2 g^{km} (d_a g_{bm} + d_b g_{am} - d_m g_{ab})`.
pub fn coord_christoffel(
    g: &MetricField,
    scheme: Scheme,
) -> Result<CoordChristoffel, GeometryError> {
    let grid = g.grid().clone();
    let n = g.n();
    let nodes = grid.num_nodes();

    // derivatives of the distinct metric entries
    let ntri = n * (n + 1) / 2;
    let mut dg: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(ntri); n];
    for a in 0..n {
        for i in 0..n {
            for j in i..n {
                dg[a].push(partial_raw(&grid, g.entry(i, j), a, scheme)?);
            }
        }
    }
    let dget = |a: usize, i: usize, j: usize, node: usize| dg[a][tri_index(n, i, j)][node];

    // inverse metric
    let ops = MetricOps::new(g, scheme)?;

    let mut data: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; nodes]; ntri]; n];
    for k in 0..n {
        for a in 0..n {
            for b in a..n {
                let slot = tri_index(n, a, b);
                for node in 0..nodes {
                    let mut acc = 0.0;
                    for m in 0..n {
                        acc += ops.ginv[k * n + m][node]
                            * (dget(a, b, m, node) + dget(b, a, m, node) - dget(m, a, b, node));
                    }
                    data[k][slot][node] = 0.5 * acc;
                }
            }
        }
    }
    Ok(CoordChristoffel { grid, n, data })
}

/// Scalar curvature via the coordinate Riemann tensor contraction:
/// `Ric_{sn} = d_m G^m_{ns} - d_n G^m_{ms} + G^m_{ml} G^l_{ns} - G^m_{nl} G^l_{ms}`,
/// `scal = g^{sn} Ric_{sn}`.
pub fn scal_oracle(g: &MetricField, scheme: Scheme) -> Result<ScalarField, GeometryError> {
    let grid = g.grid().clone();
    let n = g.n();
    let nodes = grid.num_nodes();
    let gamma = coord_christoffel(g, scheme)?;
    let ops = MetricOps::new(g, scheme)?;

    // derivatives of the symbols: dgam[m][k][tri(a,b)]
    let ntri = n * (n + 1) / 2;
    let mut dgam: Vec<Vec<Vec<Vec<f64>>>> = Vec::with_capacity(n);
    for m in 0..n {
        let mut per_k = Vec::with_capacity(n);
        for k in 0..n {
            let mut per_slot = Vec::with_capacity(ntri);
            for a in 0..n {
                for b in a..n {
                    let _ = (a, b);
                    per_slot.push(partial_raw(
                        &grid,
                        &gamma.data[k][per_slot.len()],
                        m,
                        scheme,
                    )?);
                }
            }
            per_k.push(per_slot);
        }
        dgam.push(per_k);
    }
    let dg = |m: usize, k: usize, a: usize, b: usize, node: usize| dgam[m][k][tri_index(n, a, b)][node];

    let mut out = vec![0.0; nodes];
    for node in 0..nodes {
        let mut scal = 0.0;
        for s in 0..n {
            for nu in 0..n {
                let mut ric = 0.0;
                for m in 0..n {
                    ric += dg(m, m, nu, s, node) - dg(nu, m, m, s, node);
                    for l in 0..n {
                        ric += gamma.get(m, m, l, node) * gamma.get(l, nu, s, node)
                            - gamma.get(m, nu, l, node) * gamma.get(l, m, s, node);
                    }
                }
                scal += ops.ginv[s * n + nu][node] * ric;
            }
        }
        out[node] = scal;
    }
    Ok(ScalarField::from_vec(&grid, out)?)
}
