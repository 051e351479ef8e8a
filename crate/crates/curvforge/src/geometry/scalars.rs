//! Every scalar a metric/distribution pair defines: the sigma/tau pair, the
//! block scalar curvatures, qualar curvatures, the xi and chi coefficients,
//! and the squared twistedness via the direct bracket route.

use super::coord::coord_christoffel;
use super::frame::{Block, FrameCalculus};
use super::{
    orthogonal_complement, orthonormalize, AdaptedONFrame, Distribution, GeometryError,
    MetricField,
};
use crate::lattice::{integrate, lie_bracket, ScalarField, Scheme, VectorField};

/// All distribution-derived scalars of a pair (g, V), with H the
/// g-orthogonal complement of V.
#[derive(Debug, Clone)]
pub struct DistributionScalars {
    pub sigma_v: ScalarField,
    pub tau_v: ScalarField,
    pub sigma_h: ScalarField,
    pub tau_h: ScalarField,
    /// `<div^V, div^V>_{g,H}`
    pub divv_sq_h: ScalarField,
    /// `<div^H, div^H>_{g,V}`
    pub divh_sq_v: ScalarField,
    pub qual_v: ScalarField,
    pub qual_h: ScalarField,
    pub scal_vv: ScalarField,
    pub scal_hh: ScalarField,
    pub scal_vh: ScalarField,
    pub xi: ScalarField,
    pub chi: ScalarField,
    /// squared twistedness of V by the direct bracket-projection route,
    /// summed over ordered leg pairs (equals `2 (sigma_V - tau_V)`)
    pub twist_sq_v: ScalarField,
    /// same for H
    pub twist_sq_h: ScalarField,
}

impl DistributionScalars {
    /// Full scalar curvature from the block decomposition.
    pub fn scal(&self) -> ScalarField {
        self.scal_vv.add(&self.scal_hh).add(&self.scal_vh.scale(2.0))
    }
}

/// Frame machinery plus the scalars; keeps the frame calculus alive so the
/// u-dependent block operators stay available without recomputation.
pub struct DistributionGeometry {
    pub g: MetricField,
    pub v: Distribution,
    pub h: Distribution,
    pub frame: AdaptedONFrame,
    pub scalars: DistributionScalars,
    calc: FrameCalculus,
    scheme: Scheme,
}

impl DistributionGeometry {
    pub fn new(
        g: &MetricField,
        v: &Distribution,
        scheme: Scheme,
    ) -> Result<DistributionGeometry, GeometryError> {
        let h = orthogonal_complement(g, v)?;
        let frame = orthonormalize(g, v, &h)?;
        let calc = FrameCalculus::new(g, &frame, scheme)?;
        let scalars = scalars_from_calculus(g, &calc, scheme)?;
        Ok(DistributionGeometry {
            g: g.clone(),
            v: v.clone(),
            h,
            frame,
            scalars,
            calc,
            scheme,
        })
    }

    pub fn calculus(&self) -> &FrameCalculus {
        &self.calc
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
}

/// All scalars of (g, V); H is computed internally.
pub fn distribution_scalars(
    g: &MetricField,
    v: &Distribution,
    scheme: Scheme,
) -> Result<DistributionScalars, GeometryError> {
    Ok(DistributionGeometry::new(g, v, scheme)?.scalars)
}

pub(crate) fn scalars_from_calculus(
    g: &MetricField,
    calc: &FrameCalculus,
    scheme: Scheme,
) -> Result<DistributionScalars, GeometryError> {
    let grid = g.grid().clone();
    let nodes = grid.num_nodes();
    let frame = &calc.frame;
    let n = frame.n();
    let q = frame.v_count();
    let eps = frame.signs();
    let gam = &calc.gamma;

    let vrange = 0..q;
    let hrange = q..n;

    let mut sigma_v = vec![0.0; nodes];
    let mut tau_v = vec![0.0; nodes];
    let mut sigma_h = vec![0.0; nodes];
    let mut tau_h = vec![0.0; nodes];
    // sigma_U = sum_{i,k:U} sum_{j:perp U} eps_i eps_j eps_k Gamma_ij^k^2
    // tau_U   = sum_{i,k:U} sum_{j:perp U} eps_i eps_j eps_k Gamma_ij^k Gamma_kj^i
    for i in vrange.clone() {
        for k in vrange.clone() {
            for j in hrange.clone() {
                let w = eps[i] * eps[j] * eps[k];
                for node in 0..nodes {
                    let a = gam.get(i, j, k, node);
                    sigma_v[node] += w * a * a;
                    tau_v[node] += w * a * gam.get(k, j, i, node);
                }
            }
        }
    }
    for i in hrange.clone() {
        for k in hrange.clone() {
            for j in vrange.clone() {
                let w = eps[i] * eps[j] * eps[k];
                for node in 0..nodes {
                    let a = gam.get(i, j, k, node);
                    sigma_h[node] += w * a * a;
                    tau_h[node] += w * a * gam.get(k, j, i, node);
                }
            }
        }
    }

    // block divergence pairings
    let divv_sq_h = calc.pair_div_div(Block::V, Block::H);
    let divh_sq_v = calc.pair_div_div(Block::H, Block::V);

    // qual^U = sum_{j:U} eps_j d_{e_j} div^{perp U}(e_j)
    //        + sum_{j:U} eps_j div^U(e_j) div^{perp U}(e_j) + tau_U
    let mut qual_v = tau_v.clone();
    for j in vrange.clone() {
        let d = calc.leg_deriv_field(&calc.div_h[j], j)?;
        for node in 0..nodes {
            qual_v[node] += eps[j]
                * (d.data()[node] + calc.div_v[j].data()[node] * calc.div_h[j].data()[node]);
        }
    }
    let mut qual_h = tau_h.clone();
    for j in hrange.clone() {
        let d = calc.leg_deriv_field(&calc.div_v[j], j)?;
        for node in 0..nodes {
            qual_h[node] += eps[j]
                * (d.data()[node] + calc.div_h[j].data()[node] * calc.div_v[j].data()[node]);
        }
    }

    // scal^{U,U} = -2 sum_{j:U} eps_j d_{e_j} div^U(e_j) - sum_j eps_j div^U(e_j)^2
    //            - sum_{i,j,k:U} eps_i eps_j eps_k Gamma_ij^k Gamma_ji^k + tau_U
    //            - 2 sum_{i,k:U} sum_{j:perp U} eps..  Gamma_ij^k Gamma_ji^k
    let block_scal = |inner: std::ops::Range<usize>,
                      outer: std::ops::Range<usize>,
                      div_inner: &[ScalarField],
                      tau: &[f64]|
     -> Result<Vec<f64>, GeometryError> {
        let mut out = tau.to_vec();
        for j in inner.clone() {
            let d = calc.leg_deriv_field(&div_inner[j], j)?;
            for node in 0..nodes {
                out[node] -= 2.0 * eps[j] * d.data()[node];
            }
        }
        for j in 0..n {
            for node in 0..nodes {
                let dv = div_inner[j].data()[node];
                out[node] -= eps[j] * dv * dv;
            }
        }
        for i in inner.clone() {
            for j in inner.clone() {
                for k in inner.clone() {
                    let w = eps[i] * eps[j] * eps[k];
                    for node in 0..nodes {
                        out[node] -= w * gam.get(i, j, k, node) * gam.get(j, i, k, node);
                    }
                }
            }
        }
        for i in inner.clone() {
            for k in inner.clone() {
                for j in outer.clone() {
                    let w = eps[i] * eps[j] * eps[k];
                    for node in 0..nodes {
                        out[node] -=
                            2.0 * w * gam.get(i, j, k, node) * gam.get(j, i, k, node);
                    }
                }
            }
        }
        Ok(out)
    };
    let scal_vv = block_scal(vrange.clone(), hrange.clone(), &calc.div_v, &tau_v)?;
    let scal_hh = block_scal(hrange.clone(), vrange.clone(), &calc.div_h, &tau_h)?;

    // scal^{V,H} = - sum_{j:V} eps_j d_{e_j} div^H(e_j) - sum_{j:H} eps_j d_{e_j} div^V(e_j)
    //            - sum_j eps_j div^V(e_j) div^H(e_j) - tau_V - tau_H
    let mut scal_vh = vec![0.0; nodes];
    for j in vrange.clone() {
        let d = calc.leg_deriv_field(&calc.div_h[j], j)?;
        for node in 0..nodes {
            scal_vh[node] -= eps[j] * d.data()[node];
        }
    }
    for j in hrange.clone() {
        let d = calc.leg_deriv_field(&calc.div_v[j], j)?;
        for node in 0..nodes {
            scal_vh[node] -= eps[j] * d.data()[node];
        }
    }
    for j in 0..n {
        for node in 0..nodes {
            scal_vh[node] -=
                eps[j] * calc.div_v[j].data()[node] * calc.div_h[j].data()[node];
        }
    }
    for node in 0..nodes {
        scal_vh[node] -= tau_v[node] + tau_h[node];
    }

    // twistedness by the direct bracket route
    let twist_sq_v = twist_direct(g, &calc.frame, vrange.clone(), hrange.clone(), scheme)?;
    let twist_sq_h = twist_direct(g, &calc.frame, hrange.clone(), vrange.clone(), scheme)?;

    // xi and chi
    let mut xi = vec![0.0; nodes];
    let mut chi = vec![0.0; nodes];
    for node in 0..nodes {
        xi[node] = divh_sq_v.data()[node] - divv_sq_h.data()[node]
            + 0.5 * (sigma_h[node] + tau_h[node])
            - 0.5 * (sigma_v[node] + tau_v[node])
            - scal_vv[node]
            + 2.0 * qual_v[node];
        let scal = scal_vv[node] + scal_hh[node] + 2.0 * scal_vh[node];
        chi[node] = scal + xi[node] + 0.5 * (sigma_h[node] - tau_h[node]);
    }

    let mk = |v: Vec<f64>| ScalarField::from_vec(&grid, v).map_err(GeometryError::from);
    Ok(DistributionScalars {
        sigma_v: mk(sigma_v)?,
        tau_v: mk(tau_v)?,
        sigma_h: mk(sigma_h)?,
        tau_h: mk(tau_h)?,
        divv_sq_h,
        divh_sq_v,
        qual_v: mk(qual_v)?,
        qual_h: mk(qual_h)?,
        scal_vv: mk(scal_vv)?,
        scal_hh: mk(scal_hh)?,
        scal_vh: mk(scal_vh)?,
        xi: mk(xi)?,
        chi: mk(chi)?,
        twist_sq_v,
        twist_sq_h,
    })
}

/// `sum over ordered leg pairs (i,j) of U and k off U of
/// eps_i eps_j eps_k g([e_i,e_j], e_k)^2` — the direct projection route.
fn twist_direct(
    g: &MetricField,
    frame: &AdaptedONFrame,
    block: std::ops::Range<usize>,
    off_block: std::ops::Range<usize>,
    scheme: Scheme,
) -> Result<ScalarField, GeometryError> {
    let grid = g.grid().clone();
    let nodes = grid.num_nodes();
    let mut out = vec![0.0; nodes];
    let legs: Vec<usize> = block.collect();
    for (a, &i) in legs.iter().enumerate() {
        for &j in legs.iter().skip(a + 1) {
            let br = lie_bracket(frame.leg(i), frame.leg(j), scheme)?;
            for k in off_block.clone() {
                let ip = g.inner(&br, frame.leg(k));
                let w = frame.sign(i) * frame.sign(j) * frame.sign(k);
                for node in 0..nodes {
                    let c = ip.data()[node];
                    // ordered pairs (i,j) and (j,i) contribute equally
                    out[node] += 2.0 * w * c * c;
                }
            }
        }
    }
    Ok(ScalarField::from_vec(&grid, out)?)
}

/// Sign-independent scalars of a line distribution.
#[derive(Debug, Clone)]
pub struct LineScalars {
    /// `d_V div_g(V)`
    pub dv_div: ScalarField,
    /// `div_g(V)^2`
    pub div_sq: ScalarField,
    /// `nabla_V V` (coordinate components)
    pub nabla_vv: VectorField,
    pub eps_v: f64,
}

/// Scalars of Definition-style line-distribution calculus; `v` must have
/// rank 1 with a definite metric restriction.
pub fn line_distribution_scalars(
    g: &MetricField,
    v: &Distribution,
    scheme: Scheme,
) -> Result<LineScalars, GeometryError> {
    if v.rank() != 1 {
        return Err(GeometryError::Invalid(format!(
            "line scalars need a rank-1 distribution, got rank {}",
            v.rank()
        )));
    }
    let h = orthogonal_complement(g, v)?;
    let frame = orthonormalize(g, v, &h)?;
    let calc = FrameCalculus::new(g, &frame, scheme)?;
    let div_full = calc.div_v[0].add(&calc.div_h[0]);
    let dv_div = calc.leg_deriv_field(&div_full, 0)?;
    let div_sq = div_full.mul(&div_full);
    // nabla_{e_0} e_0 via the coordinate covariant derivative
    let coord = coord_christoffel(g, scheme)?;
    let cov = coord.covariant_derivative(frame.leg(0), scheme)?;
    let n = g.n();
    let grid = g.grid().clone();
    let comps: Vec<ScalarField> = (0..n)
        .map(|c| {
            let mut data = vec![0.0; grid.num_nodes()];
            for a in 0..n {
                let e0a = frame.leg(0).comp(a).data();
                let d = cov[a][c].data();
                for (k, out) in data.iter_mut().enumerate() {
                    *out += e0a[k] * d[k];
                }
            }
            ScalarField::from_vec(&grid, data).expect("finite")
        })
        .collect();
    Ok(LineScalars {
        dv_div,
        div_sq,
        nabla_vv: VectorField::new(comps),
        eps_v: frame.sign(0),
    })
}

/// Leafwise scalar curvature of an integrable distribution:
/// `scal^fol = scal^{H,H} + <div^H, div^H>_{g, perp H} - sigma_H`.
pub fn foliation_scal(
    g: &MetricField,
    h: &Distribution,
    scheme: Scheme,
) -> Result<ScalarField, GeometryError> {
    let geom = DistributionGeometry::new(g, h, scheme)?;
    let max_twist = geom.scalars.twist_sq_v.linf_norm();
    if max_twist > 1e-8 {
        return Err(GeometryError::NotIntegrable { max_twist });
    }
    Ok(geom
        .scalars
        .scal_vv
        .add(&geom.scalars.divv_sq_h)
        .sub(&geom.scalars.sigma_v))
}

/// Residuals of the two partial-integration identities:
/// `int <df,dh>_{g,H} = -int (Lap^H_H(f) + <div^V,df>_H) h` and
/// `int <div^V,du>_H = -int (qual^H + <div^V,div^V>_H - tau_H) u`.
pub fn integration_identity_residuals(
    g: &MetricField,
    v: &Distribution,
    f: &ScalarField,
    h: &ScalarField,
    u: &ScalarField,
    scheme: Scheme,
) -> Result<(f64, f64), GeometryError> {
    let grid = g.grid();
    if !grid.fully_periodic() {
        for node in 0..grid.num_nodes() {
            if grid.on_boundary(node)
                && (h.data()[node].abs() > 0.0 || u.data()[node].abs() > 0.0)
            {
                return Err(GeometryError::NonZeroBoundary(node));
            }
        }
    }
    let geom = DistributionGeometry::new(g, v, scheme)?;
    let calc = geom.calculus();
    let density = super::coord::sqrt_abs_det(g);

    let lhs1 = integrate(&calc.pair_df_dh(Block::H, f, h)?, &density)?;
    let inner1 = calc
        .sub_laplacian(f, Block::H, Block::H)?
        .add(&calc.pair_div_df(Block::V, Block::H, f)?);
    let rhs1 = -integrate(&inner1.mul(h), &density)?;

    let lhs2 = integrate(&calc.pair_div_df(Block::V, Block::H, u)?, &density)?;
    let inner2 = geom
        .scalars
        .qual_h
        .add(&geom.scalars.divv_sq_h)
        .sub(&geom.scalars.tau_h);
    let rhs2 = -integrate(&inner2.mul(u), &density)?;

    Ok(((lhs1 - rhs1).abs(), (lhs2 - rhs2).abs()))
}
