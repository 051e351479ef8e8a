//! Orthonormal-frame calculus: frame Christoffel symbols (covariant and
//! Koszul routes), block divergences, block Laplacians and pairings.
//!
//! Throughout, a frame leg index `i` belongs to the V block when
//! `i < v_count` and to the H block otherwise; `signs[i]` is g(e_i, e_i).

use super::coord::{coord_christoffel, CoordChristoffel};
use super::{AdaptedONFrame, GeometryError, MetricField};
use crate::lattice::{lie_bracket, partial_raw, Grid, ScalarField, Scheme, VectorField};

/// Frame-leg block selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    V,
    H,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChristoffelMethod {
    /// `Gamma_ij^k = g(nabla_{e_i} e_j, e_k)` through coordinate symbols.
    Covariant,
    /// Koszul bracket formula
    /// `2 Gamma_ij^k = g([e_i,e_j],e_k) + g([e_k,e_i],e_j) + g([e_k,e_j],e_i)`.
    Koszul,
}

/// Frame Christoffel symbols `Gamma_ij^k`, n^3 reals per node.
pub struct ChristoffelField {
    grid: Grid,
    n: usize,
    data: Vec<Vec<f64>>, // data[(i*n+j)*n+k][node]
}

impl ChristoffelField {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, node: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k][node]
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Max violation of the antisymmetry `Gamma_ij^k = -Gamma_ik^j`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                for k in j..self.n {
                    let a = &self.data[(i * self.n + j) * self.n + k];
                    let b = &self.data[(i * self.n + k) * self.n + j];
                    for node in 0..self.grid.num_nodes() {
                        worst = worst.max((a[node] + b[node]).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Frame Christoffel symbols by the requested route.
pub fn on_christoffel(
    g: &MetricField,
    frame: &AdaptedONFrame,
    method: ChristoffelMethod,
    scheme: Scheme,
) -> Result<ChristoffelField, GeometryError> {
    match method {
        ChristoffelMethod::Covariant => {
            let coord = coord_christoffel(g, scheme)?;
            on_christoffel_covariant(g, frame, &coord, scheme)
        }
        ChristoffelMethod::Koszul => on_christoffel_koszul(g, frame, scheme),
    }
}

fn on_christoffel_covariant(
    g: &MetricField,
    frame: &AdaptedONFrame,
    coord: &CoordChristoffel,
    scheme: Scheme,
) -> Result<ChristoffelField, GeometryError> {
    let grid = g.grid().clone();
    let n = g.n();
    let nodes = grid.num_nodes();
    let mut data = vec![vec![0.0; nodes]; n * n * n];
    for j in 0..n {
        // (nabla_a e_j)^c
        let cov = coord.covariant_derivative(frame.leg(j), scheme)?;
        // contract: Gamma_ij^k = e_i^a g_{cd} (nabla_a e_j)^c e_k^d
        for i in 0..n {
            for k in 0..n {
                let slot = &mut data[(i * n + j) * n + k];
                for a in 0..n {
                    let eia = frame.leg(i).comp(a).data();
                    for c in 0..n {
                        let dc = cov[a][c].data();
                        for d in 0..n {
                            let gcd = g.entry(c, d);
                            let ekd = frame.leg(k).comp(d).data();
                            for node in 0..nodes {
                                slot[node] += eia[node] * gcd[node] * dc[node] * ekd[node];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(ChristoffelField { grid, n, data })
}

fn on_christoffel_koszul(
    g: &MetricField,
    frame: &AdaptedONFrame,
    scheme: Scheme,
) -> Result<ChristoffelField, GeometryError> {
    let grid = g.grid().clone();
    let n = g.n();
    let nodes = grid.num_nodes();
    // inner products g([e_i, e_j], e_k) for i < j
    let mut binner: Vec<Vec<Vec<ScalarField>>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            if i < j {
                let br = lie_bracket(frame.leg(i), frame.leg(j), scheme)?;
                let inners: Vec<ScalarField> =
                    (0..n).map(|k| g.inner(&br, frame.leg(k))).collect();
                row.push(inners);
            } else {
                row.push(Vec::new());
            }
        }
        binner.push(row);
    }
    let get_b = |i: usize, j: usize, k: usize, node: usize| -> f64 {
        if i == j {
            0.0
        } else if i < j {
            binner[i][j][k].data()[node]
        } else {
            -binner[j][i][k].data()[node]
        }
    };
    let mut data = vec![vec![0.0; nodes]; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let slot = &mut data[(i * n + j) * n + k];
                for node in 0..nodes {
                    slot[node] = 0.5
                        * (get_b(i, j, k, node) + get_b(k, i, j, node) + get_b(k, j, i, node));
                }
            }
        }
    }
    Ok(ChristoffelField { grid, n, data })
}

/// Cached frame data for the block operators: the covariant-route
/// Christoffels and the block divergences of the frame legs. Owns its
/// inputs so it can be computed once and reused across solver iterations.
pub struct FrameCalculus {
    pub g: MetricField,
    pub frame: AdaptedONFrame,
    pub gamma: ChristoffelField,
    /// div^V(e_j) and div^H(e_j) for every leg j
    pub div_v: Vec<ScalarField>,
    pub div_h: Vec<ScalarField>,
    pub scheme: Scheme,
}

impl FrameCalculus {
    pub fn new(
        g: &MetricField,
        frame: &AdaptedONFrame,
        scheme: Scheme,
    ) -> Result<FrameCalculus, GeometryError> {
        let gamma = on_christoffel(g, frame, ChristoffelMethod::Covariant, scheme)?;
        Self::with_gamma(g, frame, gamma, scheme)
    }

    pub fn with_gamma(
        g: &MetricField,
        frame: &AdaptedONFrame,
        gamma: ChristoffelField,
        scheme: Scheme,
    ) -> Result<FrameCalculus, GeometryError> {
        let n = g.n();
        let grid = g.grid();
        let nodes = grid.num_nodes();
        let mut div_v = Vec::with_capacity(n);
        let mut div_h = Vec::with_capacity(n);
        for j in 0..n {
            let mut dv = vec![0.0; nodes];
            let mut dh = vec![0.0; nodes];
            for k in 0..n {
                let sk = frame.sign(k);
                let slot = |node: usize| gamma.get(k, j, k, node);
                if k < frame.v_count() {
                    for (node, v) in dv.iter_mut().enumerate() {
                        *v += sk * slot(node);
                    }
                } else {
                    for (node, v) in dh.iter_mut().enumerate() {
                        *v += sk * slot(node);
                    }
                }
            }
            div_v.push(ScalarField::from_vec(grid, dv)?);
            div_h.push(ScalarField::from_vec(grid, dh)?);
        }
        Ok(FrameCalculus {
            g: g.clone(),
            frame: frame.clone(),
            gamma,
            div_v,
            div_h,
            scheme,
        })
    }

    pub fn n(&self) -> usize {
        self.frame.n()
    }
    pub fn grid(&self) -> &Grid {
        self.g.grid()
    }

    pub fn div_block(&self, block: Block, j: usize) -> ScalarField {
        match block {
            Block::V => self.div_v[j].clone(),
            Block::H => self.div_h[j].clone(),
            Block::Full => self.div_v[j].add(&self.div_h[j]),
        }
    }

    /// Directional derivative of a scalar along frame leg i, given the
    /// coordinate partials of the scalar.
    pub(crate) fn leg_derivative(&self, partials: &[Vec<f64>], i: usize) -> Vec<f64> {
        let n = self.n();
        let nodes = self.grid().num_nodes();
        let mut out = vec![0.0; nodes];
        for a in 0..n {
            let eia = self.frame.leg(i).comp(a).data();
            for k in 0..nodes {
                out[k] += eia[k] * partials[a][k];
            }
        }
        out
    }

    pub fn partials_of(&self, f: &ScalarField) -> Result<Vec<Vec<f64>>, GeometryError> {
        let n = self.n();
        let mut out = Vec::with_capacity(n);
        for a in 0..n {
            out.push(partial_raw(self.grid(), f.data(), a, self.scheme)?);
        }
        Ok(out)
    }

    /// `df(e_i)` for each leg.
    pub fn frame_derivatives(&self, f: &ScalarField) -> Result<Vec<ScalarField>, GeometryError> {
        let partials = self.partials_of(f)?;
        (0..self.n())
            .map(|i| Ok(ScalarField::from_vec(self.grid(), self.leg_derivative(&partials, i))?))
            .collect()
    }

    /// `<df, dh>_{g,U} = sum_{i:U} eps_i df(e_i) dh(e_i)`.
    pub fn pair_df_dh(
        &self,
        block: Block,
        f: &ScalarField,
        h: &ScalarField,
    ) -> Result<ScalarField, GeometryError> {
        let pf = self.partials_of(f)?;
        let ph = self.partials_of(h)?;
        let nodes = self.grid().num_nodes();
        let mut out = vec![0.0; nodes];
        for i in self.frame.block_indices(block) {
            let dfi = self.leg_derivative(&pf, i);
            let dhi = self.leg_derivative(&ph, i);
            let eps = self.frame.sign(i);
            for k in 0..nodes {
                out[k] += eps * dfi[k] * dhi[k];
            }
        }
        Ok(ScalarField::from_vec(self.grid(), out)?)
    }

    /// `<div^D, df>_{g,P} = sum_{i:P} eps_i div^D(e_i) df(e_i)`.
    pub fn pair_div_df(
        &self,
        div_block: Block,
        pair_block: Block,
        f: &ScalarField,
    ) -> Result<ScalarField, GeometryError> {
        let pf = self.partials_of(f)?;
        let nodes = self.grid().num_nodes();
        let mut out = vec![0.0; nodes];
        for i in self.frame.block_indices(pair_block) {
            let dfi = self.leg_derivative(&pf, i);
            let div = self.div_block(div_block, i);
            let eps = self.frame.sign(i);
            for k in 0..nodes {
                out[k] += eps * div.data()[k] * dfi[k];
            }
        }
        Ok(ScalarField::from_vec(self.grid(), out)?)
    }

    /// `<div^D, div^D>_{g,P} = sum_{i:P} eps_i div^D(e_i)^2`.
    pub fn pair_div_div(&self, div_block: Block, pair_block: Block) -> ScalarField {
        let nodes = self.grid().num_nodes();
        let mut out = vec![0.0; nodes];
        for i in self.frame.block_indices(pair_block) {
            let div = self.div_block(div_block, i);
            let eps = self.frame.sign(i);
            for k in 0..nodes {
                out[k] += eps * div.data()[k] * div.data()[k];
            }
        }
        ScalarField::from_vec(self.grid(), out).expect("finite")
    }

    /// Block Laplacian
    /// `Lap^U_{g,W}(f) = sum_{i:W cap U} eps_i d_{e_i} d_{e_i} f + sum_{i:W} eps_i div^U(e_i) df(e_i)`.
    pub fn sub_laplacian(
        &self,
        f: &ScalarField,
        upper: Block,
        lower: Block,
    ) -> Result<ScalarField, GeometryError> {
        let nodes = self.grid().num_nodes();
        let pf = self.partials_of(f)?;
        let mut out = vec![0.0; nodes];

        let upper_range = self.frame.block_indices(upper);
        let lower_range = self.frame.block_indices(lower);
        // W cap U as an index range intersection
        let inter =
            upper_range.start.max(lower_range.start)..upper_range.end.min(lower_range.end);
        for i in inter {
            // d_{e_i} d_{e_i} f
            let dfi = self.leg_derivative(&pf, i);
            let dfi_field = ScalarField::from_vec(self.grid(), dfi)?;
            let p2 = self.partials_of(&dfi_field)?;
            let second = self.leg_derivative(&p2, i);
            let eps = self.frame.sign(i);
            for k in 0..nodes {
                out[k] += eps * second[k];
            }
        }
        for i in self.frame.block_indices(lower) {
            let dfi = self.leg_derivative(&pf, i);
            let div = self.div_block(upper, i);
            let eps = self.frame.sign(i);
            for k in 0..nodes {
                out[k] += eps * div.data()[k] * dfi[k];
            }
        }
        Ok(ScalarField::from_vec(self.grid(), out)?)
    }

    /// `d_{e_i} u` for a scalar field and a single leg.
    pub fn leg_deriv_field(&self, u: &ScalarField, i: usize) -> Result<ScalarField, GeometryError> {
        let p = self.partials_of(u)?;
        Ok(ScalarField::from_vec(self.grid(), self.leg_derivative(&p, i))?)
    }
}

/// `div_g^U(X) = sum_{i:U} eps_i g(nabla_{e_i} X, e_i)` expanded in frame
/// components: `sum_{i:U} ( d_{e_i} X^i_f + sum_j eps_i X^j_f Gamma_ij^i )`
/// where `X^j_f = eps_j g(X, e_j)`.
pub fn sub_divergence(
    g: &MetricField,
    calc: &FrameCalculus,
    block: Block,
    x: &VectorField,
) -> Result<ScalarField, GeometryError> {
    let n = calc.n();
    let grid = calc.grid().clone();
    let nodes = grid.num_nodes();
    // frame components of X
    let comps: Vec<ScalarField> = (0..n)
        .map(|j| g.inner(x, calc.frame.leg(j)).scale(calc.frame.sign(j)))
        .collect();
    let mut out = vec![0.0; nodes];
    for i in calc.frame.block_indices(block) {
        let d = calc.leg_deriv_field(&comps[i], i)?;
        for k in 0..nodes {
            out[k] += d.data()[k];
        }
        for j in 0..n {
            let eps = calc.frame.sign(i);
            let cj = comps[j].data();
            for k in 0..nodes {
                out[k] += eps * cj[k] * calc.gamma.get(i, j, i, k);
            }
        }
    }
    Ok(ScalarField::from_vec(&grid, out)?)
}

/// Block Laplacian with a fresh frame calculus (convenience wrapper).
pub fn sub_laplacian(
    g: &MetricField,
    frame: &AdaptedONFrame,
    f: &ScalarField,
    upper: Block,
    lower: Block,
    scheme: Scheme,
) -> Result<ScalarField, GeometryError> {
    FrameCalculus::new(g, frame, scheme)?.sub_laplacian(f, upper, lower)
}
