//! Background boundary geometry: coframe, transversal internal vector,
//! reference connection, fibre metric, cosmological constant.
//!
//! The coframe `e` is a real (1,1)-field whose N-1 internal images, together
//! with the distinguished transversal `e_n`, span the internal space at every
//! node. `e_n` is fixed data (its variation is zero throughout); by default it
//! is computed as the eta-orthocomplement of the coframe span, normalized to
//! `|eta(e_n, e_n)| = 1` with a deterministic sign.

use crate::algebra::{FibreElement, Grassmann, InternalMetric};
use crate::fields::field::Field;
use crate::fields::grid::Grid;
use crate::{Error, Result};
use nalgebra::DMatrix;
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct Geometry {
    pub n: usize,
    pub grid: Arc<Grid>,
    pub eta: InternalMetric,
    pub e: Field,
    pub e_n: Field,
    pub omega0: Field,
    pub lambda: f64,
}

impl Geometry {
    /// Axis-aligned constant coframe `e = dx^mu (x) u_mu`, transversal along
    /// the timelike internal axis, zero reference connection.
    pub fn identity(n: usize, grid: &Arc<Grid>, lambda: f64) -> Result<Geometry> {
        if n < 4 {
            return Err(Error::Dimension(n));
        }
        assert_eq!(grid.base_dim(), n - 1);
        let mut ev = FibreElement::new(1, 1);
        for mu in 0..n - 1 {
            ev.add_term(1 << mu, 1 << mu, Grassmann::one());
        }
        let e = Field::constant(grid, ev, 0);
        let omega0 = Field::zeros(grid, 1, 2, 0);
        Geometry::with_coframe(n, grid, e, omega0, lambda)
    }

    /// Build from a given real coframe; `e_n` is solved from the
    /// orthocomplement condition and the frame is checked for degeneracy.
    pub fn with_coframe(
        n: usize,
        grid: &Arc<Grid>,
        e: Field,
        omega0: Field,
        lambda: f64,
    ) -> Result<Geometry> {
        if n < 4 {
            return Err(Error::Dimension(n));
        }
        let eta = InternalMetric::lorentzian(n);
        let e_n = transversal_from_coframe(&e, &eta)?;
        let geo = Geometry {
            n,
            grid: grid.clone(),
            eta,
            e,
            e_n,
            omega0,
            lambda,
        };
        geo.check_nondegenerate()?;
        Ok(geo)
    }

    /// Powers of the coframe under the wedge product; `e_pow(0)` is the unit
    /// scalar field.
    pub fn e_pow(&self, k: usize) -> Field {
        coframe_power(&self.e, k)
    }

    /// Real frame matrix at a node: columns `e_1 .. e_{N-1}, e_n` in the
    /// internal basis.
    pub fn frame_matrix(&self, node: usize) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        let ev = self.e.value(node);
        for mu in 0..n - 1 {
            for a in 0..n {
                m[(a, mu)] = ev.coeff(1 << mu, 1 << a).body();
            }
        }
        let env = self.e_n.value(node);
        for a in 0..n {
            m[(a, n - 1)] = env.coeff(0, 1 << a).body();
        }
        m
    }

    /// Degeneracy audit: full frame invertibility and nondegeneracy of the
    /// induced boundary metric `g = e^T eta e` at every node.
    pub fn check_nondegenerate(&self) -> Result<()> {
        for node in 0..self.grid.len() {
            let m = self.frame_matrix(node);
            let det = m.clone().determinant();
            if det.abs() < 1e-8 {
                return Err(Error::Degenerate(format!(
                    "frame determinant {det:.2e} at node {node}"
                )));
            }
            let n = self.n;
            let mut g = DMatrix::zeros(n - 1, n - 1);
            for i in 0..n - 1 {
                for j in 0..n - 1 {
                    let mut s = 0.0;
                    for a in 0..n {
                        s += m[(a, i)] * self.eta.eta(a) * m[(a, j)];
                    }
                    g[(i, j)] = s;
                }
            }
            let sv = g.svd(false, false);
            let smin = sv.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
            if smin < 1e-8 {
                return Err(Error::Degenerate(format!(
                    "boundary metric singular value {smin:.2e} at node {node}"
                )));
            }
        }
        Ok(())
    }
}

/// Wedge power `e^k` (unit scalar for k = 0).
pub fn coframe_power(e: &Field, k: usize) -> Field {
    let grid = e.grid();
    if k == 0 {
        return Field::constant(grid, FibreElement::real(1.0), 0);
    }
    let mut acc = e.clone();
    for _ in 1..k {
        acc = acc.wedge(e);
    }
    acc
}

/// Solve for the transversal: the eta-orthocomplement of the coframe span,
/// normalized to unit |eta-norm|, sign fixed deterministically. Computed by
/// QR completion: the last column of Q for the square matrix whose first
/// n-1 columns are the eta-lowered coframe legs.
pub fn transversal_from_coframe(e: &Field, eta: &InternalMetric) -> Result<Field> {
    let grid = e.grid().clone();
    let n = eta.dim();
    let mut out = Field::zeros(&grid, 0, 1, 0);
    for node in 0..grid.len() {
        let ev = e.value(node);
        let mut m = DMatrix::zeros(n, n);
        for mu in 0..n - 1 {
            for a in 0..n {
                m[(a, mu)] = ev.coeff(1 << mu, 1 << a).body() * eta.eta(a);
            }
        }
        let q = m.clone().qr().q();
        let mut v: Vec<f64> = (0..n).map(|a| q[(a, n - 1)]).collect();
        // Orthogonality residual certifies that the first n-1 columns were
        // independent (otherwise the completed column is arbitrary).
        for mu in 0..n - 1 {
            let dot: f64 = (0..n).map(|a| m[(a, mu)] * v[a]).sum();
            if dot.abs() > 1e-8 {
                return Err(Error::Degenerate(format!(
                    "coframe legs dependent at node {node} (residual {dot:.2e})"
                )));
            }
        }
        normalize_transversal(&mut v, eta, node)?;
        let mut fe = FibreElement::new(0, 1);
        for (a, &x) in v.iter().enumerate() {
            fe.add_term(0, 1 << a, Grassmann::real(x));
        }
        *out.value_mut(node) = fe;
    }
    Ok(out)
}

fn normalize_transversal(v: &mut [f64], eta: &InternalMetric, node: usize) -> Result<()> {
    let norm2 = eta.pair(v, v);
    if norm2.abs() < 1e-10 {
        return Err(Error::Degenerate(format!(
            "lightlike orthocomplement at node {node}"
        )));
    }
    let s = 1.0 / norm2.abs().sqrt();
    for x in v.iter_mut() {
        *x *= s;
    }
    // Deterministic sign: largest-magnitude component positive.
    let imax = (0..v.len()).max_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs())).unwrap();
    if v[imax] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
    Ok(())
}

/// Decompose an internal-vector-valued field along the (possibly
/// Grassmann-shifted) frame: `x = sum_col parts[col] . col` with the scalar
/// coefficients multiplying from the left, where `col` runs over the N-1
/// coframe legs followed by the transversal. Returns N scalar-coefficient
/// fields of the same base degree as `x`.
pub fn frame_components(e: &Field, e_n: &Field, x: &Field) -> Vec<Field> {
    let grid = x.grid().clone();
    // Internal dimension is base dim + 1 throughout the library.
    let n = grid.base_dim() + 1;
    assert_eq!(x.int_deg(), 1);
    let mut parts = vec![Field::zeros(&grid, x.base_deg(), 0, 0); n];
    let base_masks: Vec<u32> = crate::algebra::subsets(grid.base_dim() as u32, x.base_deg() as u32);
    for node in 0..grid.len() {
        // a[col][m]: internal components of the frame legs.
        let ev = e.value(node);
        let env = e_n.value(node);
        let mut a = vec![vec![Grassmann::zero(); n]; n];
        for col in 0..n - 1 {
            for m in 0..n {
                a[col][m] = ev.coeff(1 << col, 1 << m);
            }
        }
        for m in 0..n {
            a[n - 1][m] = env.coeff(0, 1 << m);
        }
        let xv = x.value(node);
        for &p in &base_masks {
            let rhs: Vec<Grassmann> = (0..n).map(|m| xv.coeff(p, 1 << m)).collect();
            if rhs.iter().all(|g| g.is_zero()) {
                continue;
            }
            let y = left_coefficient_solve(&a, &rhs);
            for (col, part) in parts.iter_mut().enumerate() {
                if !y[col].is_zero() {
                    part.value_mut(node).add_term(p, 0, y[col].clone());
                }
            }
        }
    }
    parts
}

/// Rebuild `sum_col parts[col] . col` from frame components (the exact
/// inverse of [`frame_components`]).
pub fn frame_recompose(parts: &[Field], e: &Field, e_n: &Field) -> Field {
    let n = parts.len();
    let grid = parts[0].grid().clone();
    let mut out = Field::zeros(&grid, parts[0].base_deg(), 1, 0);
    for node in 0..grid.len() {
        let ev = e.value(node);
        let env = e_n.value(node);
        let mut acc = FibreElement::new(parts[0].base_deg(), 1);
        for (col, part) in parts.iter().enumerate() {
            for (p, _, g) in part.value(node).iter() {
                for m in 0..n as u32 {
                    let leg = if col < n - 1 {
                        ev.coeff(1 << col, 1 << m)
                    } else {
                        env.coeff(0, 1 << m)
                    };
                    if !leg.is_zero() {
                        acc.add_term(p, 1 << m, g.mul(&leg));
                    }
                }
            }
        }
        *out.value_mut(node) = acc;
    }
    out
}

/// Solve `sum_col y_col * a[col][m] = x_m` for Grassmann unknowns `y` sitting
/// to the LEFT of the (even-body, possibly nilpotent-soul) matrix entries.
/// The body system is solved by LU; the nilpotent correction iterates to an
/// exact fixed point.
fn left_coefficient_solve(a: &[Vec<Grassmann>], x: &[Grassmann]) -> Vec<Grassmann> {
    let n = x.len();
    let mut body = DMatrix::zeros(n, n);
    for col in 0..n {
        for m in 0..n {
            body[(m, col)] = a[col][m].body();
        }
    }
    let lu = body.lu();
    let solve_body = |rhs: &[Grassmann]| -> Vec<Grassmann> {
        // Solve the real system for every Grassmann monomial appearing in rhs.
        let mut masks: Vec<u64> = rhs.iter().flat_map(|g| g.terms().map(|t| t.0)).collect();
        masks.sort_unstable();
        masks.dedup();
        let mut out = vec![Grassmann::zero(); n];
        for mask in masks {
            let mut v = nalgebra::DVector::zeros(n);
            for m in 0..n {
                v[m] = rhs[m].coeff(mask);
            }
            let sol = lu.solve(&v).expect("frame matrix is invertible");
            for m in 0..n {
                if sol[m] != 0.0 {
                    out[m] = out[m].add(&Grassmann::monomial(mask, sol[m]));
                }
            }
        }
        out
    };
    let coeff_max = |gs: &[Grassmann]| -> f64 {
        gs.iter()
            .flat_map(|g| g.terms().map(|(_, c)| c.abs()))
            .fold(0.0f64, f64::max)
    };
    let scale = coeff_max(x).max(1e-300);
    let mut y = solve_body(x);
    for _ in 0..64 {
        // residual r = x - y * a
        let mut r: Vec<Grassmann> = x.to_vec();
        for m in 0..n {
            for (col, yc) in y.iter().enumerate() {
                r[m] = r[m].sub(&yc.mul(&a[col][m]));
            }
        }
        // Each pass resolves one more nilpotency order exactly, so once the
        // orders are exhausted only accumulation dust remains.
        if coeff_max(&r) <= 1e-12 * scale {
            return y;
        }
        let dy = solve_body(&r);
        for (yc, d) in y.iter_mut().zip(&dy) {
            *yc = yc.add(d);
        }
    }
    // Nilpotent correction must terminate; reaching here means the soul part
    // failed to converge (should be impossible for an invertible body).
    panic!("left coefficient solve did not terminate");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::grid::Backend;

    fn grid3() -> Arc<Grid> {
        Arc::new(Grid::new(&[4, 4, 4], Backend::FiniteDifference))
    }

    #[test]
    fn identity_geometry_has_timelike_transversal() {
        let g = grid3();
        let geo = Geometry::identity(4, &g, 0.0).unwrap();
        let env = geo.e_n.value(0);
        assert_eq!(env.coeff(0, 0b1000).body(), 1.0);
        for a in 0..3 {
            assert_eq!(env.coeff(0, 1 << a).body(), 0.0);
        }
    }

    #[test]
    fn transversal_is_orthogonal_and_unit_after_perturbation() {
        let g = grid3();
        let geo = Geometry::identity(4, &g, 0.0).unwrap();
        // Perturb the coframe and re-solve.
        let mut e = geo.e.clone();
        for node in 0..g.len() {
            let x = g.coord(node, 0);
            e.value_mut(node).add_term(
                0b001,
                0b1000,
                Grassmann::real(0.2 * (std::f64::consts::TAU * x).sin()),
            );
            e.value_mut(node).add_term(0b010, 0b0001, Grassmann::real(0.1));
        }
        let geo2 = Geometry::with_coframe(4, &g, e, Field::zeros(&g, 1, 2, 0), 0.0).unwrap();
        for node in 0..g.len() {
            let ev = geo2.e.value(node);
            let env = geo2.e_n.value(node);
            let vn: Vec<f64> = (0..4).map(|a| env.coeff(0, 1 << a).body()).collect();
            for mu in 0..3 {
                let vm: Vec<f64> = (0..4).map(|a| ev.coeff(1 << mu, 1 << a).body()).collect();
                assert!(geo2.eta.pair(&vm, &vn).abs() < 1e-10, "node {node} mu {mu}");
            }
            assert!((geo2.eta.pair(&vn, &vn).abs() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn frame_components_roundtrip_with_grassmann_shifted_frame() {
        let g = grid3();
        let geo = Geometry::identity(4, &g, 0.0).unwrap();
        // Shift the coframe by an odd direction times the probe parameter.
        let mut dir = Field::zeros(&g, 1, 1, 1);
        for node in 0..g.len() {
            dir.value_mut(node)
                .add_term(0b001, 0b0010, Grassmann::monomial(1 << 2, 0.7));
            dir.value_mut(node)
                .add_term(0b100, 0b1000, Grassmann::monomial(1 << 0, -0.4));
        }
        let e_shifted = geo.e.probe_shift(&dir, (15, 16));
        // Operand with mixed Grassmann content.
        let mut x = Field::zeros(&g, 1, 1, 0);
        for node in 0..g.len() {
            x.value_mut(node).add_term(0b010, 0b0001, Grassmann::real(1.3));
            x.value_mut(node)
                .add_term(0b001, 0b1000, Grassmann::monomial((1 << 0) | (1 << 1), 2.0));
        }
        let parts = frame_components(&e_shifted, &geo.e_n, &x);
        assert_eq!(parts.len(), 4);
        let back = frame_recompose(&parts, &e_shifted, &geo.e_n);
        assert!(back.sub(&x).max_abs() < 1e-12);
    }

    #[test]
    fn degenerate_coframe_is_rejected()  {
        let g = grid3();
        let mut ev = FibreElement::new(1, 1);
        // Two legs along the same internal direction.
        ev.add_term(0b001, 0b0001, Grassmann::one());
        ev.add_term(0b010, 0b0001, Grassmann::one());
        ev.add_term(0b100, 0b0100, Grassmann::one());
        let e = Field::constant(&g, ev, 0);
        assert!(Geometry::with_coframe(4, &g, e, Field::zeros(&g, 1, 2, 0), 0.0).is_err());
    }
}
