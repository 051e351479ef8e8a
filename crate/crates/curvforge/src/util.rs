//! Small shared helpers: dense linear algebra on per-node matrices,
//! convergence-order measurement and seeded trigonometric test fields.

use crate::lattice::{Grid, ScalarField};
use rand::Rng;

/// Least-squares slope of log(err) against log(h) over `(h, err)` samples.
/// Errors at or below roundoff are clamped away from zero.
pub fn convergence_order(points: &[(f64, f64)]) -> f64 {
    assert!(points.len() >= 2);
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(h, e)| (h.ln(), e.max(1e-300).ln()))
        .collect();
    let m = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    (m * sxy - sx * sy) / (m * sxx - sx * sx)
}

// ---------------------------------------------------------------------------
// dense n x n helpers (row-major slices), n stays tiny

/// In-place Gauss-Jordan inverse with partial pivoting. Returns false when a
/// pivot falls below `tol`.
pub fn invert_in_place(a: &mut [f64], n: usize, tol: f64) -> bool {
    debug_assert_eq!(a.len(), n * n);
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best <= tol {
            return false;
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
                inv.swap(col * n + j, piv * n + j);
            }
        }
        let d = a[col * n + col];
        for j in 0..n {
            a[col * n + j] /= d;
            inv[col * n + j] /= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col];
            if f != 0.0 {
                for j in 0..n {
                    a[r * n + j] -= f * a[col * n + j];
                    inv[r * n + j] -= f * inv[col * n + j];
                }
            }
        }
    }
    a.copy_from_slice(&inv);
    true
}

/// Determinant by LU with partial pivoting.
pub fn det(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    let mut sign = 1.0;
    let mut d = 1.0;
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].abs();
        for r in col + 1..n {
            let v = m[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            sign = -sign;
        }
        d *= m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / m[col * n + col];
            for j in col..n {
                m[r * n + j] -= f * m[col * n + j];
            }
        }
    }
    sign * d
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn sym_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    for _sweep in 0..60 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() < 1e-15 * (1.0 + frob_norm(&m, n)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs
}

fn frob_norm(a: &[f64], n: usize) -> f64 {
    a.iter().take(n * n).map(|v| v * v).sum::<f64>().sqrt()
}

/// Smallest singular value of an n x q matrix (columns are spans), via the
/// eigenvalues of the q x q Gram matrix.
pub fn smallest_singular_value(b: &[f64], n: usize, q: usize) -> f64 {
    debug_assert_eq!(b.len(), n * q);
    let mut gram = vec![0.0; q * q];
    for i in 0..q {
        for j in 0..q {
            let mut acc = 0.0;
            for r in 0..n {
                acc += b[r * q + i] * b[r * q + j];
            }
            gram[i * q + j] = acc;
        }
    }
    let eigs = sym_eigenvalues(&gram, q);
    eigs[0].max(0.0).sqrt()
}

// ---------------------------------------------------------------------------
// seeded trigonometric fields for randomized suites

/// A reproducible low-frequency trigonometric polynomial on a torus.
#[derive(Debug, Clone)]
pub struct TrigMix {
    pub terms: Vec<TrigTerm>,
}

#[derive(Debug, Clone)]
pub struct TrigTerm {
    pub amp: f64,
    pub freqs: Vec<i32>,
    pub phase: f64,
}

impl TrigMix {
    pub fn sample<R: Rng>(rng: &mut R, dim: usize, terms: usize, max_freq: i32) -> TrigMix {
        let mut out = Vec::with_capacity(terms);
        for _ in 0..terms {
            let freqs: Vec<i32> = (0..dim).map(|_| rng.gen_range(-max_freq..=max_freq)).collect();
            let amp = rng.gen_range(-1.0..1.0);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            out.push(TrigTerm { amp, freqs, phase });
        }
        TrigMix { terms: out }
    }

    pub fn eval(&self, lengths: &[f64], x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            let mut arg = t.phase;
            for (a, &k) in t.freqs.iter().enumerate() {
                arg += std::f64::consts::TAU * k as f64 * x[a] / lengths[a];
            }
            acc += t.amp * arg.sin();
        }
        acc
    }

    /// Normalised to sup-norm <= 1 (conservatively by the amplitude sum).
    pub fn normalised(&self) -> TrigMix {
        let s: f64 = self.terms.iter().map(|t| t.amp.abs()).sum::<f64>().max(1e-12);
        TrigMix {
            terms: self
                .terms
                .iter()
                .map(|t| TrigTerm { amp: t.amp / s, freqs: t.freqs.clone(), phase: t.phase })
                .collect(),
        }
    }

    pub fn field(&self, grid: &Grid) -> ScalarField {
        ScalarField::from_fn(grid, |x| self.eval(grid.lengths(), x))
    }
}

/// Random smooth field with values in `[centre-radius, centre+radius]`.
pub fn random_bounded_field<R: Rng>(
    rng: &mut R,
    grid: &Grid,
    centre: f64,
    radius: f64,
) -> ScalarField {
    let mix = TrigMix::sample(rng, grid.dim(), 4, 2).normalised();
    ScalarField::from_fn(grid, |x| centre + radius * mix.eval(grid.lengths(), x))
}
