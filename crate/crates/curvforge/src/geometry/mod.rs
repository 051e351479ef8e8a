//! Metric fields, distributions, adapted orthonormal frames and the
//! curvature scalars attached to a metric/distribution pair.

mod coord;
mod frame;
mod scalars;

pub use coord::{laplace_beltrami, scal_oracle, sqrt_abs_det, CoordChristoffel, MetricOps};
pub use frame::{
    on_christoffel, sub_divergence, sub_laplacian, Block, ChristoffelField, ChristoffelMethod,
    FrameCalculus,
};
pub use scalars::{
    distribution_scalars, foliation_scal, integration_identity_residuals,
    line_distribution_scalars, DistributionGeometry, DistributionScalars, LineScalars,
};

use crate::lattice::{Grid, LatticeError, MatrixField, ScalarField, VectorField};
use crate::util;
use thiserror::Error;

pub const INDEX_TOL: f64 = 1e-9;
pub const RANK_TOL: f64 = 1e-8;
pub const LIGHTLIKE_TOL: f64 = 1e-8;
pub const SYMMETRY_TOL: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("metric not symmetric at node {node} (defect {defect:e})")]
    NotSymmetric { node: usize, defect: f64 },
    #[error("metric degenerate at node {node}: eigenvalue {eig:e} within tolerance")]
    Degenerate { node: usize, eig: f64 },
    #[error("metric index varies across nodes ({first} at node 0, {other} at node {node})")]
    IndexVaries { first: usize, other: usize, node: usize },
    #[error("distribution rank deficient at node {node} (smallest singular value {sv:e})")]
    RankDeficient { node: usize, sv: f64 },
    #[error("V not g-good: restriction of the metric degenerate at node {node}")]
    NotGGood { node: usize },
    #[error("no uniformly transverse smooth complement candidate found (best min singular value {best:e})")]
    NoSmoothComplement { best: f64 },
    #[error("near-lightlike direction in Gram-Schmidt at node {node} (|g(v,v)| = {norm:e})")]
    NearLightlike { node: usize, norm: f64 },
    #[error("frame signature varies across nodes (leg {leg}, node {node})")]
    SignatureVaries { leg: usize, node: usize },
    #[error("expected metric of index {expected}, got {got}")]
    WrongIndex { expected: usize, got: usize },
    #[error("distribution is not integrable: max twist^2 = {max_twist:e}")]
    NotIntegrable { max_twist: f64 },
    #[error("boundary values must vanish on bounded grids (node {0})")]
    NonZeroBoundary(usize),
    #[error("positivity violated at node {node}: value {value:e}")]
    NotPositive { node: usize, value: f64 },
    #[error("{0}")]
    Invalid(String),
}

/// Symmetric nondegenerate matrix field of constant index.
#[derive(Debug, Clone)]
pub struct MetricField {
    mat: MatrixField,
    index: usize,
}

impl MetricField {
    /// Validates symmetry, nondegeneracy and constancy of the index.
    pub fn new(mat: MatrixField) -> Result<MetricField, GeometryError> {
        let n = mat.n();
        let grid = mat.grid().clone();
        let mut buf = vec![0.0; n * n];
        let mut index = None;
        for node in 0..grid.num_nodes() {
            mat.at(node, &mut buf);
            for i in 0..n {
                for j in i + 1..n {
                    let defect = (buf[i * n + j] - buf[j * n + i]).abs();
                    if defect > SYMMETRY_TOL {
                        return Err(GeometryError::NotSymmetric { node, defect });
                    }
                }
            }
            let eigs = util::sym_eigenvalues(&buf, n);
            let mut neg = 0usize;
            for &e in &eigs {
                if e.abs() <= INDEX_TOL {
                    return Err(GeometryError::Degenerate { node, eig: e });
                }
                if e < 0.0 {
                    neg += 1;
                }
            }
            match index {
                None => index = Some(neg),
                Some(first) if first != neg => {
                    return Err(GeometryError::IndexVaries { first, other: neg, node })
                }
                _ => {}
            }
        }
        Ok(MetricField { mat, index: index.unwrap() })
    }

    pub fn flat(grid: &Grid) -> MetricField {
        let n = grid.dim();
        let mat = MatrixField::from_fn(grid, n, |i, j, _| if i == j { 1.0 } else { 0.0 });
        MetricField { mat, index: 0 }
    }

    pub fn from_fn<F: FnMut(usize, usize, &[f64]) -> f64>(
        grid: &Grid,
        f: F,
    ) -> Result<MetricField, GeometryError> {
        MetricField::new(MatrixField::from_fn(grid, grid.dim(), f))
    }

    pub fn grid(&self) -> &Grid {
        self.mat.grid()
    }
    pub fn n(&self) -> usize {
        self.mat.n()
    }
    pub fn index(&self) -> usize {
        self.index
    }
    pub fn matrix(&self) -> &MatrixField {
        &self.mat
    }
    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        self.mat.entry(i, j)
    }
    pub fn at(&self, node: usize, out: &mut [f64]) {
        self.mat.at(node, out)
    }

    /// Pointwise inner product of coordinate vectors at a node.
    pub fn inner_at(&self, node: usize, v: &[f64], w: &[f64]) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += self.entry(i, j)[node] * v[i] * w[j];
            }
        }
        acc
    }

    /// g(v, w) as a scalar field.
    pub fn inner(&self, v: &VectorField, w: &VectorField) -> ScalarField {
        let n = self.n();
        let grid = self.grid();
        let mut data = vec![0.0; grid.num_nodes()];
        for i in 0..n {
            for j in 0..n {
                let gij = self.entry(i, j);
                let vi = v.comp(i).data();
                let wj = w.comp(j).data();
                for (k, d) in data.iter_mut().enumerate() {
                    *d += gij[k] * vi[k] * wj[k];
                }
            }
        }
        ScalarField::from_vec(grid, data).expect("finite")
    }

    /// Scale the metric by a constant: `c * g`.
    pub fn scale(&self, c: f64) -> Result<MetricField, GeometryError> {
        let n = self.n();
        let grid = self.grid().clone();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(self.entry(i, j).iter().map(|&v| c * v).collect());
            }
        }
        MetricField::new(MatrixField::from_entries(&grid, n, entries)?)
    }

    /// Negated metric `-g`.
    pub fn negate(&self) -> Result<MetricField, GeometryError> {
        self.scale(-1.0)
    }
}

/// Number of negative eigenvalues, verified constant across nodes.
pub fn metric_index(g: &MetricField) -> usize {
    g.index()
}

/// q spanning vector fields of pointwise full rank, with an optional smooth
/// transversal witness for building the orthogonal complement. The rank-0
/// distribution is allowed (it carries only its grid).
#[derive(Debug, Clone)]
pub struct Distribution {
    grid: Grid,
    spans: Vec<VectorField>,
    complement_hint: Option<Vec<VectorField>>,
}

impl Distribution {
    pub fn new(spans: Vec<VectorField>) -> Result<Distribution, GeometryError> {
        Distribution::with_hint(spans, None)
    }

    pub fn empty(grid: &Grid) -> Distribution {
        Distribution { grid: grid.clone(), spans: Vec::new(), complement_hint: None }
    }

    pub fn with_hint(
        spans: Vec<VectorField>,
        complement_hint: Option<Vec<VectorField>>,
    ) -> Result<Distribution, GeometryError> {
        assert!(!spans.is_empty(), "use Distribution::empty for the 0-plane distribution");
        let grid = spans[0].grid().clone();
        let n = grid.dim();
        let q = spans.len();
        let mut b = vec![0.0; n * q];
        for node in 0..grid.num_nodes() {
            for (c, s) in spans.iter().enumerate() {
                for r in 0..n {
                    b[r * q + c] = s.comp(r).data()[node];
                }
            }
            let sv = util::smallest_singular_value(&b, n, q);
            if sv <= RANK_TOL {
                return Err(GeometryError::RankDeficient { node, sv });
            }
        }
        Ok(Distribution { grid, spans, complement_hint })
    }

    pub fn rank(&self) -> usize {
        self.spans.len()
    }
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn spans(&self) -> &[VectorField] {
        &self.spans
    }
    pub fn complement_hint(&self) -> Option<&[VectorField]> {
        self.complement_hint.as_deref()
    }

    /// Span matrix at a node, column-major by span (n x q row-major slice).
    pub fn span_matrix_at(&self, node: usize, out: &mut [f64]) {
        let n = self.grid().dim();
        let q = self.rank();
        for (c, s) in self.spans.iter().enumerate() {
            for r in 0..n {
                out[r * q + c] = s.comp(r).data()[node];
            }
        }
    }
}

/// g-orthogonal projector onto the span of `v` as a matrix field:
/// `P = B (B^T G B)^{-1} B^T G` per node.
pub fn orthogonal_projector(
    g: &MetricField,
    v: &Distribution,
) -> Result<MatrixField, GeometryError> {
    let grid = g.grid().clone();
    let n = g.n();
    let q = v.rank();
    let mut proj = MatrixField::zeros(&grid, n);
    if q == 0 {
        return Ok(proj);
    }
    let mut b = vec![0.0; n * q];
    let mut gm = vec![0.0; n * n];
    let mut gb = vec![0.0; n * q];
    let mut m = vec![0.0; q * q];
    for node in 0..grid.num_nodes() {
        v.span_matrix_at(node, &mut b);
        g.at(node, &mut gm);
        // gb = G B
        for r in 0..n {
            for c in 0..q {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += gm[r * n + k] * b[k * q + c];
                }
                gb[r * q + c] = acc;
            }
        }
        // m = B^T G B
        for i in 0..q {
            for j in 0..q {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += b[k * q + i] * gb[k * q + j];
                }
                m[i * q + j] = acc;
            }
        }
        if !util::invert_in_place(&mut m, q, 1e-12) {
            return Err(GeometryError::NotGGood { node });
        }
        // P = B m^{-1} (G B)^T
        for r in 0..n {
            for c in 0..n {
                let mut acc = 0.0;
                for i in 0..q {
                    for j in 0..q {
                        acc += b[r * q + i] * m[i * q + j] * gb[c * q + j];
                    }
                }
                proj.entry_mut(r, c)[node] = acc;
            }
        }
    }
    Ok(proj)
}

fn apply_projector(p: &MatrixField, v: &VectorField, complement: bool) -> VectorField {
    let grid = p.grid().clone();
    let n = p.n();
    let comps: Vec<ScalarField> = (0..n)
        .map(|r| {
            let mut data = vec![0.0; grid.num_nodes()];
            for c in 0..n {
                let prc = p.entry(r, c);
                let vc = v.comp(c).data();
                for (k, d) in data.iter_mut().enumerate() {
                    *d += prc[k] * vc[k];
                }
            }
            if complement {
                let vr = v.comp(r).data();
                for (k, d) in data.iter_mut().enumerate() {
                    *d = vr[k] - *d;
                }
            }
            ScalarField::from_vec(&grid, data).expect("finite")
        })
        .collect();
    VectorField::new(comps)
}

/// g-orthogonal projection of a vector field onto V (or off V).
pub fn project(
    g: &MetricField,
    v: &Distribution,
    x: &VectorField,
    onto_complement: bool,
) -> Result<VectorField, GeometryError> {
    let p = orthogonal_projector(g, v)?;
    Ok(apply_projector(&p, x, onto_complement))
}

/// Smooth g-orthogonal complement of a g-good distribution.
///
/// Candidate generators (the supplied transversal witness when present,
/// otherwise fixed subsets of the coordinate fields) are projected off V;
/// the candidate set with the best uniform rank wins. Using a fixed smooth
/// generator set keeps the complement spans globally smooth, which the
/// derivative stencils require.
pub fn orthogonal_complement(
    g: &MetricField,
    v: &Distribution,
) -> Result<Distribution, GeometryError> {
    let grid = g.grid().clone();
    let n = g.n();
    let q = v.rank();
    if q == n {
        let mut h = Distribution::empty(&grid);
        h.complement_hint = Some(v.spans().to_vec());
        return Ok(h);
    }
    let p = orthogonal_projector(g, v)?;

    let mut candidates: Vec<Vec<VectorField>> = Vec::new();
    if let Some(hint) = v.complement_hint() {
        candidates.push(hint.to_vec());
    }
    // all (n-q)-subsets of coordinate axes, in lexicographic order
    let subsets = axis_subsets(n, n - q);
    for subset in subsets {
        candidates.push(
            subset
                .into_iter()
                .map(|a| VectorField::coordinate_axis(&grid, a))
                .collect(),
        );
    }

    let mut best: Option<(f64, Vec<VectorField>)> = None;
    let mut bmat = vec![0.0; n * (n - q)];
    for cand in candidates {
        let projected: Vec<VectorField> =
            cand.iter().map(|w| apply_projector(&p, w, true)).collect();
        let mut min_sv = f64::INFINITY;
        for node in 0..grid.num_nodes() {
            for (c, w) in projected.iter().enumerate() {
                for r in 0..n {
                    bmat[r * (n - q) + c] = w.comp(r).data()[node];
                }
            }
            let sv = util::smallest_singular_value(&bmat, n, n - q);
            min_sv = min_sv.min(sv);
            if min_sv <= RANK_TOL {
                break;
            }
        }
        if best.as_ref().map_or(true, |(b, _)| min_sv > *b) {
            best = Some((min_sv, projected));
        }
        if let Some((b, _)) = &best {
            if *b > 0.5 {
                break; // safely transverse everywhere, no need to try more
            }
        }
    }

    let (min_sv, spans) = best.unwrap();
    if min_sv <= RANK_TOL {
        return Err(GeometryError::NoSmoothComplement { best: min_sv });
    }
    // orthogonality check of the produced complement
    for w in &spans {
        for s in v.spans() {
            let ip = g.inner(w, s);
            if ip.linf_norm() > 1e-10 {
                return Err(GeometryError::Invalid(format!(
                    "complement not g-orthogonal (defect {:e})",
                    ip.linf_norm()
                )));
            }
        }
    }
    Distribution::with_hint(spans, Some(v.spans().to_vec()))
}

fn axis_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for a in start..n {
            cur.push(a);
            rec(a + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Orthonormal frame adapted to a distribution: legs 0..v_count span V, the
/// rest span the complement; `signs[i] = g(e_i, e_i)`.
#[derive(Debug, Clone)]
pub struct AdaptedONFrame {
    legs: Vec<VectorField>,
    signs: Vec<f64>,
    v_count: usize,
}

impl AdaptedONFrame {
    pub fn legs(&self) -> &[VectorField] {
        &self.legs
    }
    pub fn leg(&self, i: usize) -> &VectorField {
        &self.legs[i]
    }
    pub fn sign(&self, i: usize) -> f64 {
        self.signs[i]
    }
    pub fn signs(&self) -> &[f64] {
        &self.signs
    }
    pub fn v_count(&self) -> usize {
        self.v_count
    }
    pub fn n(&self) -> usize {
        self.legs.len()
    }
    pub fn grid(&self) -> &Grid {
        self.legs[0].grid()
    }

    /// Indices of the legs in a block.
    pub fn block_indices(&self, block: Block) -> std::ops::Range<usize> {
        match block {
            Block::V => 0..self.v_count,
            Block::H => self.v_count..self.n(),
            Block::Full => 0..self.n(),
        }
    }

    /// Verifies g(e_i, e_j) = sign_i delta_ij within `tol`.
    pub fn verify(&self, g: &MetricField, tol: f64) -> Result<(), GeometryError> {
        for i in 0..self.n() {
            for j in 0..self.n() {
                let ip = g.inner(&self.legs[i], &self.legs[j]);
                let expect = if i == j { self.signs[i] } else { 0.0 };
                let defect = ip.map(|v| v - expect).linf_norm();
                if defect > tol {
                    return Err(GeometryError::Invalid(format!(
                        "frame not orthonormal: pair ({i},{j}) defect {defect:e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Node-wise Gram-Schmidt within the V block then within the W block, each
/// step dividing by sqrt|g(v,v)| and recording the sign.
pub fn orthonormalize(
    g: &MetricField,
    v: &Distribution,
    w: &Distribution,
) -> Result<AdaptedONFrame, GeometryError> {
    let grid = g.grid().clone();
    let n = g.n();
    let q = v.rank();
    assert_eq!(v.rank() + w.rank(), n, "V and W must be complementary");
    let nodes = grid.num_nodes();

    let mut legs_data: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; nodes]; n]; n];
    let mut signs: Vec<Option<f64>> = vec![None; n];
    let mut gm = vec![0.0; n * n];
    let mut cur = vec![0.0; n];

    let inputs: Vec<&VectorField> = v.spans().iter().chain(w.spans().iter()).collect();
    for node in 0..nodes {
        g.at(node, &mut gm);
        for (leg, src) in inputs.iter().enumerate() {
            for c in 0..n {
                cur[c] = src.comp(c).data()[node];
            }
            // subtract projections on all previously built legs
            for prev in 0..leg {
                let mut ip = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        ip += gm[a * n + b] * cur[a] * legs_data[prev][b][node];
                    }
                }
                let eps = signs[prev].unwrap();
                for c in 0..n {
                    cur[c] -= eps * ip * legs_data[prev][c][node];
                }
            }
            let mut norm2 = 0.0;
            for a in 0..n {
                for b in 0..n {
                    norm2 += gm[a * n + b] * cur[a] * cur[b];
                }
            }
            if norm2.abs() < LIGHTLIKE_TOL {
                return Err(GeometryError::NearLightlike { node, norm: norm2.abs() });
            }
            let eps = norm2.signum();
            let inv = 1.0 / norm2.abs().sqrt();
            match signs[leg] {
                None => signs[leg] = Some(eps),
                Some(s) if s != eps => {
                    return Err(GeometryError::SignatureVaries { leg, node })
                }
                _ => {}
            }
            for c in 0..n {
                legs_data[leg][c][node] = cur[c] * inv;
            }
        }
    }

    let signs: Vec<f64> = signs.into_iter().map(|s| s.unwrap()).collect();
    let neg = signs.iter().filter(|&&s| s < 0.0).count();
    if neg != g.index() {
        return Err(GeometryError::WrongIndex { expected: g.index(), got: neg });
    }
    let legs = legs_data
        .into_iter()
        .map(|comps| {
            VectorField::new(
                comps
                    .into_iter()
                    .map(|d| ScalarField::from_vec(&grid, d).expect("finite"))
                    .collect(),
            )
        })
        .collect();
    Ok(AdaptedONFrame { legs, signs, v_count: q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Scheme;
    use std::f64::consts::TAU;

    fn torus2(n: usize) -> Grid {
        Grid::torus(&[n, n], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn flat_metric_index_zero() {
        let g = MetricField::flat(&Grid::torus(&[8, 8, 8], &[1.0; 3]).unwrap());
        assert_eq!(metric_index(&g), 0);
    }

    #[test]
    fn constant_lorentz_index_one() {
        let grid = Grid::torus(&[8, 8, 8, 8], &[1.0; 4]).unwrap();
        let g = MetricField::from_fn(&grid, |i, j, _| {
            if i != j {
                0.0
            } else if i == 0 {
                -1.0
            } else {
                1.0
            }
        })
        .unwrap();
        assert_eq!(metric_index(&g), 1);
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let grid = torus2(8);
        let m = MatrixField::from_fn(&grid, 2, |i, j, _| if (i, j) == (0, 1) { 0.5 } else if i == j { 1.0 } else { 0.0 });
        assert!(matches!(MetricField::new(m), Err(GeometryError::NotSymmetric { .. })));
    }

    #[test]
    fn complement_of_coordinate_line_flat() {
        let grid = torus2(8);
        let g = MetricField::flat(&grid);
        let v = Distribution::new(vec![VectorField::coordinate_axis(&grid, 0)]).unwrap();
        let h = orthogonal_complement(&g, &v).unwrap();
        assert_eq!(h.rank(), 1);
        // complement is the y-axis up to sign/scale
        for node in 0..grid.num_nodes() {
            let w = h.spans()[0].value(node);
            assert!(w[0].abs() < 1e-12);
            assert!(w[1].abs() > 0.9);
        }
    }

    #[test]
    fn complement_under_lorentz_diagonal() {
        let grid = torus2(8);
        let g = MetricField::from_fn(&grid, |i, j, _| {
            if i != j {
                0.0
            } else if i == 0 {
                -1.0
            } else {
                1.0
            }
        })
        .unwrap();
        let v = Distribution::new(vec![VectorField::coordinate_axis(&grid, 0)]).unwrap();
        let h = orthogonal_complement(&g, &v).unwrap();
        let ip = g.inner(&h.spans()[0], &v.spans()[0]);
        assert!(ip.linf_norm() < 1e-12);
    }

    #[test]
    fn complement_of_contact_plane_is_rotating_normal() {
        // independent oracle: node-wise null space via the projector's action
        // on the euclidean normal, checked against an SVD-style rank test
        let grid = Grid::torus(&[16, 16, 16], &[1.0; 3]).unwrap();
        let g = MetricField::flat(&grid);
        let h_plane = crate::solve::preset_distribution(crate::solve::Preset::Contact3, &grid).unwrap();
        let v = orthogonal_complement(&g, &h_plane).unwrap();
        assert_eq!(v.rank(), 1);
        for node in (0..grid.num_nodes()).step_by(37) {
            let x = grid.node_coords(node);
            let c = (TAU * x[2]).cos();
            let s = (TAU * x[2]).sin();
            let w = v.spans()[0].value(node);
            // expected direction (cos, -sin, 0) up to scale
            let dot = w[0] * c - w[1] * s;
            let norm = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
            assert!((dot.abs() - norm).abs() < 1e-10, "not aligned at node {node}");
        }
    }

    #[test]
    fn orthonormalize_identity_frame_riemannian() {
        let grid = torus2(8);
        let g = MetricField::flat(&grid);
        let v = Distribution::new(vec![VectorField::coordinate_axis(&grid, 0)]).unwrap();
        let w = orthogonal_complement(&g, &v).unwrap();
        let frame = orthonormalize(&g, &v, &w).unwrap();
        frame.verify(&g, 1e-12).unwrap();
        assert_eq!(frame.signs(), &[1.0, 1.0]);
    }

    #[test]
    fn orthonormalize_switch_flips_sign() {
        let grid = torus2(8);
        let g = MetricField::flat(&grid);
        let v = Distribution::new(vec![VectorField::coordinate_axis(&grid, 0)]).unwrap();
        let h = crate::deform::switch(&g, &v).unwrap();
        let w = orthogonal_complement(&h, &v).unwrap();
        let frame = orthonormalize(&h, &v, &w).unwrap();
        frame.verify(&h, 1e-12).unwrap();
        assert_eq!(frame.signs(), &[-1.0, 1.0]);
        assert_eq!(h.index(), 1);
    }

    #[test]
    fn orthonormalize_stretch_scales_v_leg() {
        let grid = torus2(16);
        let g = MetricField::flat(&grid);
        let v = Distribution::new(vec![VectorField::coordinate_axis(&grid, 0)]).unwrap();
        let f = ScalarField::from_fn(&grid, |x| 1.5 + 0.3 * (TAU * x[1]).sin());
        let gbar = crate::deform::stretch(&g, &f, &v).unwrap();
        let w = orthogonal_complement(&gbar, &v).unwrap();
        let frame = orthonormalize(&gbar, &v, &w).unwrap();
        frame.verify(&gbar, 1e-11).unwrap();
        // first leg should be f * d_x
        for node in (0..grid.num_nodes()).step_by(11) {
            let leg = frame.leg(0).value(node);
            assert!((leg[0] - f.data()[node]).abs() < 1e-12);
            assert!(leg[1].abs() < 1e-12);
        }
    }

    #[test]
    fn near_lightlike_rejected() {
        let grid = torus2(8);
        let g = MetricField::from_fn(&grid, |i, j, _| {
            if i != j {
                0.0
            } else if i == 0 {
                -1.0
            } else {
                1.0
            }
        })
        .unwrap();
        // v = d_x + d_y is lightlike for diag(-1, 1)
        let v = Distribution::new(vec![VectorField::from_fns(&grid, |_, _| 1.0)]).unwrap();
        let w = Distribution::new(vec![VectorField::from_fns(&grid, |c, _| if c == 0 { 1.0 } else { -1.0 })]).unwrap();
        assert!(matches!(
            orthonormalize(&g, &v, &w),
            Err(GeometryError::NearLightlike { .. })
        ));
    }

    #[test]
    fn switched_two_plane_on_t4_has_index_two() {
        let grid = Grid::torus(&[8; 4], &[1.0; 4]).unwrap();
        let g = MetricField::flat(&grid);
        let v = Distribution::new(vec![
            VectorField::coordinate_axis(&grid, 0),
            VectorField::coordinate_axis(&grid, 1),
        ])
        .unwrap();
        let h = crate::deform::switch(&g, &v).unwrap();
        assert_eq!(metric_index(&h), 2);
    }

    #[test]
    fn projection_splits_vector() {
        let grid = torus2(12);
        let g = MetricField::from_fn(&grid, |i, j, x| {
            let base = if i == j { 1.0 } else { 0.0 };
            base + if (i, j) == (0, 1) || (i, j) == (1, 0) { 0.2 * (TAU * x[0]).sin() } else { 0.0 }
        })
        .unwrap();
        let v = Distribution::new(vec![VectorField::coordinate_axis(&grid, 0)]).unwrap();
        let x = VectorField::from_fns(&grid, |c, p| (TAU * p[c % 2]).cos() + 0.5);
        let xv = project(&g, &v, &x, false).unwrap();
        let xh = project(&g, &v, &x, true).unwrap();
        let recomposed = xv.add(&xh);
        for c in 0..2 {
            assert!(recomposed.comp(c).sub(x.comp(c)).linf_norm() < 1e-12);
        }
        // xh is g-orthogonal to V
        let ip = g.inner(&xh, &v.spans()[0]);
        assert!(ip.linf_norm() < 1e-12);
        let _ = Scheme::Fd4;
    }
}
