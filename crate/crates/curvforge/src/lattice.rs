//! Uniform lattices over flat tori and annuli, and the fields living on them.
//!
//! A [`Grid`] is an n-dimensional uniform lattice with per-axis periodicity.
//! At most one axis may be bounded (the annulus configuration); the fully
//! periodic case is the torus. All coordinates are dimensionless.
//!
//! Derivatives come in two flavours: `Fd4` (4th-order central stencils, with
//! 4th-order one-sided stencils within two nodes of a boundary) and
//! `Spectral` (FFT differentiation, periodic axes only). Reductions are
//! sequential in row-major node order so results do not depend on any
//! parallel schedule.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::fmt::Write as _;
use thiserror::Error;

pub const MIN_NODES_PER_AXIS: usize = 8;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("resolution too low for stencils: axis {axis} has {nodes} nodes (minimum {MIN_NODES_PER_AXIS})")]
    ResolutionTooLow { axis: usize, nodes: usize },
    #[error("axis length must be positive: axis {axis} has length {length}")]
    NonPositiveLength { axis: usize, length: f64 },
    #[error("dimension mismatch: expected {expected} got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("spectral derivatives require a periodic axis (axis {0} is bounded)")]
    SpectralOnBoundedAxis(usize),
    #[error("non-finite value produced at node {0}")]
    NonFinite(usize),
    #[error("quadrature density must be positive everywhere (node {0})")]
    NonPositiveDensity(usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Derivative discretisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Fd4,
    Spectral,
}

/// Uniform lattice with per-axis periodicity.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    sizes: Vec<usize>,
    lengths: Vec<f64>,
    periodic: Vec<bool>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    nodes: usize,
}

impl Grid {
    fn build(sizes: &[usize], lengths: &[f64], periodic: &[bool]) -> Result<Grid, LatticeError> {
        let n = sizes.len();
        if lengths.len() != n {
            return Err(LatticeError::DimensionMismatch { expected: n, got: lengths.len() });
        }
        for (axis, &s) in sizes.iter().enumerate() {
            if s < MIN_NODES_PER_AXIS {
                return Err(LatticeError::ResolutionTooLow { axis, nodes: s });
            }
        }
        for (axis, &l) in lengths.iter().enumerate() {
            if !(l > 0.0) {
                return Err(LatticeError::NonPositiveLength { axis, length: l });
            }
        }
        let spacing: Vec<f64> = (0..n)
            .map(|a| {
                if periodic[a] {
                    lengths[a] / sizes[a] as f64
                } else {
                    lengths[a] / (sizes[a] - 1) as f64
                }
            })
            .collect();
        let mut strides = vec![0usize; n];
        let mut acc = 1usize;
        for a in (0..n).rev() {
            strides[a] = acc;
            acc *= sizes[a];
        }
        Ok(Grid {
            sizes: sizes.to_vec(),
            lengths: lengths.to_vec(),
            periodic: periodic.to_vec(),
            spacing,
            strides,
            nodes: acc,
        })
    }

    /// Fully periodic grid (flat torus).
    pub fn torus(sizes: &[usize], lengths: &[f64]) -> Result<Grid, LatticeError> {
        assert!(!sizes.is_empty());
        let periodic = vec![true; sizes.len()];
        Grid::build(sizes, lengths, &periodic)
    }

    /// Two-dimensional grid with axis 0 bounded and axis 1 periodic.
    pub fn annulus(sizes: [usize; 2], lengths: [f64; 2]) -> Result<Grid, LatticeError> {
        Grid::build(&sizes, &lengths, &[false, true])
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }
    pub fn is_periodic(&self, axis: usize) -> bool {
        self.periodic[axis]
    }
    pub fn fully_periodic(&self) -> bool {
        self.periodic.iter().all(|&p| p)
    }
    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }
    pub fn num_nodes(&self) -> usize {
        self.nodes
    }
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Coordinate of lattice index `i` along `axis`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        i as f64 * self.spacing[axis]
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let mut rem = node;
        self.strides
            .iter()
            .map(|&s| {
                let i = rem / s;
                rem %= s;
                i
            })
            .collect()
    }

    pub fn node_coords(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.coord(a, i))
            .collect()
    }

    /// Whether `node` touches the boundary of a bounded axis.
    pub fn on_boundary(&self, node: usize) -> bool {
        let multi = self.multi_index(node);
        multi.iter().enumerate().any(|(a, &i)| {
            !self.periodic[a] && (i == 0 || i == self.sizes[a] - 1)
        })
    }

    /// Visits every 1-d line along `axis`: calls `f(base, stride, len)` where
    /// the line's nodes are `base + k*stride` for `k in 0..len`.
    pub fn for_each_line<F: FnMut(usize, usize, usize)>(&self, axis: usize, mut f: F) {
        let stride = self.strides[axis];
        let len = self.sizes[axis];
        let mut base_multi = vec![0usize; self.dim()];
        loop {
            let base = self.node_index(&base_multi);
            f(base, stride, len);
            // advance the multi-index skipping `axis`
            let mut carried = true;
            for a in (0..self.dim()).rev() {
                if a == axis {
                    continue;
                }
                base_multi[a] += 1;
                if base_multi[a] < self.sizes[a] {
                    carried = false;
                    break;
                }
                base_multi[a] = 0;
            }
            if carried {
                break;
            }
        }
    }

    /// Quadrature weight of a node (product of per-axis weights; trapezoid on
    /// bounded axes, rectangle on periodic axes).
    pub fn quad_weight(&self, node: usize) -> f64 {
        let multi = self.multi_index(node);
        let mut w = 1.0;
        for a in 0..self.dim() {
            let mut wa = self.spacing[a];
            if !self.periodic[a] && (multi[a] == 0 || multi[a] == self.sizes[a] - 1) {
                wa *= 0.5;
            }
            w *= wa;
        }
        w
    }
}

fn check_finite(data: &[f64]) -> Result<(), LatticeError> {
    for (i, v) in data.iter().enumerate() {
        if !v.is_finite() {
            return Err(LatticeError::NonFinite(i));
        }
    }
    Ok(())
}

/// One finite real per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn constant(grid: &Grid, value: f64) -> ScalarField {
        ScalarField { grid: grid.clone(), data: vec![value; grid.num_nodes()] }
    }

    pub fn from_fn<F: FnMut(&[f64]) -> f64>(grid: &Grid, mut f: F) -> ScalarField {
        let data: Vec<f64> = (0..grid.num_nodes()).map(|n| f(&grid.node_coords(n))).collect();
        check_finite(&data).expect("field closure produced non-finite value");
        ScalarField { grid: grid.clone(), data }
    }

    pub fn from_vec(grid: &Grid, data: Vec<f64>) -> Result<ScalarField, LatticeError> {
        assert_eq!(data.len(), grid.num_nodes());
        check_finite(&data)?;
        Ok(ScalarField { grid: grid.clone(), data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn map<F: FnMut(f64) -> f64>(&self, mut f: F) -> ScalarField {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        ScalarField { grid: self.grid.clone(), data }
    }

    pub fn zip_map<F: FnMut(f64, f64) -> f64>(&self, other: &ScalarField, mut f: F) -> ScalarField {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let data: Vec<f64> =
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        ScalarField { grid: self.grid.clone(), data }
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }
    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a + b)
    }
    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a - b)
    }
    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a * b)
    }

    /// Accumulate `c * other` into self.
    pub fn axpy(&mut self, c: f64, other: &ScalarField) {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn linf_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }
    pub fn max(&self) -> f64 {
        self.data.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// Discrete partial derivative along `axis` with the requested scheme.
    pub fn partial(&self, axis: usize, scheme: Scheme) -> Result<ScalarField, LatticeError> {
        let data = partial_raw(&self.grid, &self.data, axis, scheme)?;
        Ok(ScalarField { grid: self.grid.clone(), data })
    }

    /// Discrete second derivative along a single axis.
    pub fn partial2(&self, axis: usize, scheme: Scheme) -> Result<ScalarField, LatticeError> {
        let data = partial2_raw(&self.grid, &self.data, axis, scheme)?;
        Ok(ScalarField { grid: self.grid.clone(), data })
    }
}

/// n coordinate components per node.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    comps: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(comps: Vec<ScalarField>) -> VectorField {
        assert!(!comps.is_empty());
        for c in &comps[1..] {
            assert_eq!(c.grid(), comps[0].grid(), "grid mismatch");
        }
        VectorField { comps }
    }

    pub fn from_fns<F: FnMut(usize, &[f64]) -> f64>(grid: &Grid, mut f: F) -> VectorField {
        let comps = (0..grid.dim())
            .map(|c| ScalarField::from_fn(grid, |x| f(c, x)))
            .collect();
        VectorField { comps }
    }

    pub fn coordinate_axis(grid: &Grid, axis: usize) -> VectorField {
        VectorField::from_fns(grid, |c, _| if c == axis { 1.0 } else { 0.0 })
    }

    pub fn zero(grid: &Grid) -> VectorField {
        VectorField::from_fns(grid, |_, _| 0.0)
    }

    pub fn grid(&self) -> &Grid {
        self.comps[0].grid()
    }
    pub fn dim(&self) -> usize {
        self.comps.len()
    }
    pub fn comp(&self, c: usize) -> &ScalarField {
        &self.comps[c]
    }
    pub fn comps(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn value(&self, node: usize) -> Vec<f64> {
        self.comps.iter().map(|c| c.data()[node]).collect()
    }

    pub fn map_comps<F: FnMut(&ScalarField) -> ScalarField>(&self, f: F) -> VectorField {
        VectorField { comps: self.comps.iter().map(f).collect() }
    }

    pub fn scale_by(&self, s: &ScalarField) -> VectorField {
        self.map_comps(|c| c.mul(s))
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        VectorField {
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField {
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }
}

/// n coordinate components per node, lower index.
pub type CovectorField = VectorField;

/// n×n real matrix per node, row-major entry storage.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    grid: Grid,
    n: usize,
    entries: Vec<Vec<f64>>, // entries[i*n+j][node]
}

impl MatrixField {
    pub fn zeros(grid: &Grid, n: usize) -> MatrixField {
        MatrixField {
            grid: grid.clone(),
            n,
            entries: vec![vec![0.0; grid.num_nodes()]; n * n],
        }
    }

    pub fn from_entries(grid: &Grid, n: usize, entries: Vec<Vec<f64>>) -> Result<MatrixField, LatticeError> {
        assert_eq!(entries.len(), n * n);
        for e in &entries {
            assert_eq!(e.len(), grid.num_nodes());
            check_finite(e)?;
        }
        Ok(MatrixField { grid: grid.clone(), n, entries })
    }

    pub fn from_fn<F: FnMut(usize, usize, &[f64]) -> f64>(grid: &Grid, n: usize, mut f: F) -> MatrixField {
        let mut m = MatrixField::zeros(grid, n);
        for i in 0..n {
            for j in 0..n {
                for node in 0..grid.num_nodes() {
                    m.entries[i * n + j][node] = f(i, j, &grid.node_coords(node));
                }
            }
        }
        m
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        &self.entries[i * self.n + j]
    }
    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut Vec<f64> {
        &mut self.entries[i * self.n + j]
    }

    /// Copies the matrix at `node` into `out` (row-major, length n*n).
    pub fn at(&self, node: usize, out: &mut [f64]) {
        for k in 0..self.n * self.n {
            out[k] = self.entries[k][node];
        }
    }
}

// ---------------------------------------------------------------------------
// derivatives

const FD4_CENTRAL: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0]; // / 12h
// 4th-order one-sided first derivatives at the two leftmost nodes.
const FD4_LEFT0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0]; // / 12h
const FD4_LEFT1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0]; // / 12h

const FD4_CENTRAL2: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0]; // / 12h^2
// 4th-order one-sided second derivatives (6 points) at the two leftmost nodes.
const FD4_LEFT0_2: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0]; // / 12h^2
const FD4_LEFT1_2: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0]; // / 12h^2

pub(crate) fn partial_raw(
    grid: &Grid,
    data: &[f64],
    axis: usize,
    scheme: Scheme,
) -> Result<Vec<f64>, LatticeError> {
    match scheme {
        Scheme::Spectral => spectral_derivative(grid, data, axis, 1),
        Scheme::Fd4 => Ok(fd_derivative(grid, data, axis, false)),
    }
}

pub(crate) fn partial2_raw(
    grid: &Grid,
    data: &[f64],
    axis: usize,
    scheme: Scheme,
) -> Result<Vec<f64>, LatticeError> {
    match scheme {
        Scheme::Spectral => spectral_derivative(grid, data, axis, 2),
        Scheme::Fd4 => Ok(fd_derivative(grid, data, axis, true)),
    }
}

fn fd_derivative(grid: &Grid, data: &[f64], axis: usize, second: bool) -> Vec<f64> {
    let n = grid.sizes()[axis];
    let h = grid.spacing(axis);
    let scale = if second { 1.0 / (12.0 * h * h) } else { 1.0 / (12.0 * h) };
    let mut out = vec![0.0; data.len()];
    let mut line = vec![0.0; n];
    let mut dline = vec![0.0; n];
    let periodic = grid.is_periodic(axis);
    grid.for_each_line(axis, |base, stride, len| {
        for k in 0..len {
            line[k] = data[base + k * stride];
        }
        if periodic {
            let central = if second { &FD4_CENTRAL2 } else { &FD4_CENTRAL };
            for k in 0..len {
                let mut acc = 0.0;
                for (o, c) in central.iter().enumerate() {
                    let idx = (k + len + o - 2) % len;
                    acc += c * line[idx];
                }
                dline[k] = acc * scale;
            }
        } else {
            let central = if second { &FD4_CENTRAL2 } else { &FD4_CENTRAL };
            for k in 2..len - 2 {
                let mut acc = 0.0;
                for (o, c) in central.iter().enumerate() {
                    acc += c * line[k + o - 2];
                }
                dline[k] = acc * scale;
            }
            if second {
                dline[0] = stencil_at(&line, &FD4_LEFT0_2, 0, false) * scale;
                dline[1] = stencil_at(&line, &FD4_LEFT1_2, 0, false) * scale;
                dline[len - 1] = stencil_at(&line, &FD4_LEFT0_2, len - 6, true) * scale;
                dline[len - 2] = stencil_at(&line, &FD4_LEFT1_2, len - 6, true) * scale;
            } else {
                dline[0] = stencil_at(&line, &FD4_LEFT0, 0, false) * scale;
                dline[1] = stencil_at(&line, &FD4_LEFT1, 0, false) * scale;
                dline[len - 1] = -stencil_at(&line, &FD4_LEFT0, len - 5, true) * scale;
                dline[len - 2] = -stencil_at(&line, &FD4_LEFT1, len - 5, true) * scale;
            }
        }
        for k in 0..len {
            out[base + k * stride] = dline[k];
        }
    });
    out
}

fn stencil_at(line: &[f64], coeffs: &[f64], start: usize, mirrored: bool) -> f64 {
    let m = coeffs.len();
    let mut acc = 0.0;
    for (o, c) in coeffs.iter().enumerate() {
        let idx = if mirrored { start + (m - 1 - o) } else { start + o };
        acc += c * line[idx];
    }
    acc
}

fn spectral_derivative(
    grid: &Grid,
    data: &[f64],
    axis: usize,
    order: u32,
) -> Result<Vec<f64>, LatticeError> {
    if !grid.is_periodic(axis) {
        return Err(LatticeError::SpectralOnBoundedAxis(axis));
    }
    let n = grid.sizes()[axis];
    let length = grid.lengths()[axis];
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut out = vec![0.0; data.len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let two_pi = std::f64::consts::TAU;
    grid.for_each_line(axis, |base, stride, len| {
        for k in 0..len {
            buf[k] = Complex64::new(data[base + k * stride], 0.0);
        }
        fwd.process(&mut buf);
        for (m, v) in buf.iter_mut().enumerate() {
            let m_signed = if m <= len / 2 { m as i64 } else { m as i64 - len as i64 };
            // zero the unmatched Nyquist mode for odd derivatives
            let kx = if order % 2 == 1 && 2 * m == len {
                0.0
            } else {
                two_pi * m_signed as f64 / length
            };
            let mult = match order {
                1 => Complex64::new(0.0, kx),
                2 => Complex64::new(-kx * kx, 0.0),
                _ => unreachable!(),
            };
            *v *= mult;
        }
        inv.process(&mut buf);
        let norm = 1.0 / len as f64;
        for k in 0..len {
            out[base + k * stride] = buf[k].re * norm;
        }
    });
    Ok(out)
}

// ---------------------------------------------------------------------------
// vector calculus and quadrature

/// Lie bracket of coordinate vector fields: `[v,w]^i = v^a d_a w^i - w^a d_a v^i`.
pub fn lie_bracket(v: &VectorField, w: &VectorField, scheme: Scheme) -> Result<VectorField, LatticeError> {
    if v.grid() != w.grid() {
        return Err(LatticeError::GridMismatch);
    }
    let grid = v.grid().clone();
    let n = grid.dim();
    let mut dv = Vec::with_capacity(n);
    let mut dw = Vec::with_capacity(n);
    for i in 0..n {
        let mut dvi = Vec::with_capacity(n);
        let mut dwi = Vec::with_capacity(n);
        for a in 0..n {
            dvi.push(v.comp(i).partial(a, scheme)?);
            dwi.push(w.comp(i).partial(a, scheme)?);
        }
        dv.push(dvi);
        dw.push(dwi);
    }
    let comps = (0..n)
        .map(|i| {
            let mut data = vec![0.0; grid.num_nodes()];
            for a in 0..n {
                let va = v.comp(a).data();
                let wa = w.comp(a).data();
                let dwi = dw[i][a].data();
                let dvi = dv[i][a].data();
                for (k, d) in data.iter_mut().enumerate() {
                    *d += va[k] * dwi[k] - wa[k] * dvi[k];
                }
            }
            ScalarField::from_vec(&grid, data).expect("finite")
        })
        .collect();
    Ok(VectorField::new(comps))
}

/// Quadrature of `f` against a positive density:
/// rectangle weights on periodic axes, trapezoid weights on bounded axes.
/// The reduction is a fixed sequential sum over row-major node order.
pub fn integrate(f: &ScalarField, density: &ScalarField) -> Result<f64, LatticeError> {
    if f.grid() != density.grid() {
        return Err(LatticeError::GridMismatch);
    }
    let grid = f.grid();
    let mut acc = 0.0;
    for node in 0..grid.num_nodes() {
        let d = density.data()[node];
        if !(d > 0.0) {
            return Err(LatticeError::NonPositiveDensity(node));
        }
        acc += f.data()[node] * d * grid.quad_weight(node);
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// CSV dumps

fn csv_header(grid: &Grid, value_cols: &[String]) -> String {
    let mut s = String::new();
    for a in 0..grid.dim() {
        let _ = write!(s, "axis{},", a);
    }
    s.push_str(&value_cols.join(","));
    s.push('\n');
    s
}

/// Dump a scalar field as CSV: header `axis0,...,value`, row-major, 17
/// significant digits.
pub fn dump_scalar_csv(f: &ScalarField, path: &std::path::Path) -> Result<(), LatticeError> {
    let grid = f.grid();
    let mut s = csv_header(grid, &["value".to_string()]);
    for node in 0..grid.num_nodes() {
        for c in grid.node_coords(node) {
            let _ = write!(s, "{:.16e},", c);
        }
        let _ = writeln!(s, "{:.16e}", f.data()[node]);
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Dump a vector field as CSV with columns `c0..c{n-1}`.
pub fn dump_vector_csv(v: &VectorField, path: &std::path::Path) -> Result<(), LatticeError> {
    let grid = v.grid();
    let cols: Vec<String> = (0..v.dim()).map(|c| format!("c{}", c)).collect();
    let mut s = csv_header(grid, &cols);
    for node in 0..grid.num_nodes() {
        for c in grid.node_coords(node) {
            let _ = write!(s, "{:.16e},", c);
        }
        let vals: Vec<String> = (0..v.dim()).map(|c| format!("{:.16e}", v.comp(c).data()[node])).collect();
        let _ = writeln!(s, "{}", vals.join(","));
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Dump a matrix field (row-major entry columns `m00,m01,...`).
pub fn dump_matrix_csv(m: &MatrixField, path: &std::path::Path) -> Result<(), LatticeError> {
    let grid = m.grid();
    let n = m.n();
    let mut cols = Vec::new();
    for i in 0..n {
        for j in 0..n {
            cols.push(format!("m{}{}", i, j));
        }
    }
    let mut s = csv_header(grid, &cols);
    for node in 0..grid.num_nodes() {
        for c in grid.node_coords(node) {
            let _ = write!(s, "{:.16e},", c);
        }
        let vals: Vec<String> = (0..n * n)
            .map(|k| format!("{:.16e}", m.entry(k / n, k % n)[node]))
            .collect();
        let _ = writeln!(s, "{}", vals.join(","));
    }
    std::fs::write(path, s)?;
    Ok(())
}
