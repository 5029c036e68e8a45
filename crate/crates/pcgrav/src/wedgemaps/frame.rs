use nalgebra::DMatrix;
use rand::Rng;

use crate::algebra::{FibreElement, InternalMetric};
use crate::{Error, Result};

/// Fibre-level frame data at a single point: a coframe `e`, the internal
/// metric, and (on a boundary) the completed transversal direction `e_n`.
///
/// `base_dim` is the number of independent coframe legs: equal to the
/// internal dimension `n` in the bulk and `n - 1` on a boundary slice.
#[derive(Debug, Clone)]
pub struct PointFrame {
    pub n: usize,
    pub base_dim: usize,
    pub e: FibreElement,
    pub e_n: Option<FibreElement>,
    pub eta: InternalMetric,
}

impl PointFrame {
    /// Bulk frame with `e = sum_mu dx^mu (x) u_mu`.
    pub fn identity_bulk(n: usize) -> Self {
        let mat = DMatrix::identity(n, n);
        Self::from_matrix_bulk(n, &mat).expect("identity frame is nondegenerate")
    }

    /// Boundary frame whose coframe legs are the first `n - 1` internal
    /// directions; the transversal completes to the last one.
    pub fn identity_boundary(n: usize) -> Self {
        let mut mat = DMatrix::zeros(n, n - 1);
        for mu in 0..n - 1 {
            mat[(mu, mu)] = 1.0;
        }
        Self::from_matrix_boundary(n, &mat).expect("identity frame is nondegenerate")
    }

    /// Bulk frame from an `n x n` component matrix `mat[(a, mu)] = e^a_mu`.
    pub fn from_matrix_bulk(n: usize, mat: &DMatrix<f64>) -> Result<Self> {
        assert_eq!((mat.nrows(), mat.ncols()), (n, n), "bulk coframe shape");
        let det = mat.clone().determinant();
        if det.abs() < 1e-8 {
            return Err(Error::Degenerate(format!(
                "bulk coframe determinant {det:.3e}"
            )));
        }
        Ok(Self {
            n,
            base_dim: n,
            e: coframe_element(mat),
            e_n: None,
            eta: InternalMetric::lorentzian(n),
        })
    }

    /// Boundary frame from an `n x (n-1)` component matrix. Completes the
    /// transversal `e_n` (unit `eta`-norm, orthogonal to every leg) and
    /// rejects coframes whose induced boundary metric degenerates.
    pub fn from_matrix_boundary(n: usize, mat: &DMatrix<f64>) -> Result<Self> {
        assert_eq!((mat.nrows(), mat.ncols()), (n, n - 1), "boundary coframe shape");
        let eta = InternalMetric::lorentzian(n);
        let e_n = complete_transversal(mat, &eta)?;
        let g = boundary_metric(mat, &eta);
        let min_sv = g
            .svd(false, false)
            .singular_values
            .iter()
            .fold(f64::INFINITY, |m, &s| m.min(s));
        if min_sv < 1e-8 {
            return Err(Error::Degenerate(format!(
                "boundary metric near-singular, min singular value {min_sv:.3e}"
            )));
        }
        let mut frame = Self {
            n,
            base_dim: n - 1,
            e: coframe_element(mat),
            e_n: None,
            eta,
        };
        let mut elem = FibreElement::new(0, 1);
        for a in 0..n {
            if e_n[a] != 0.0 {
                elem.add_term(0, 1 << a, crate::algebra::Grassmann::real(e_n[a]));
            }
        }
        frame.e_n = Some(elem);
        Ok(frame)
    }

    /// Random bulk frame with entries in `[-1, 1]`, resampled until the
    /// frame determinant clears a fixed margin. Returns the number of
    /// rejected draws alongside the frame.
    pub fn random_bulk<R: Rng>(n: usize, rng: &mut R) -> (Self, usize) {
        let mut rejected = 0;
        loop {
            let mat = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0f64));
            if mat.clone().determinant().abs() >= 0.05 {
                if let Ok(frame) = Self::from_matrix_bulk(n, &mat) {
                    return (frame, rejected);
                }
            }
            rejected += 1;
        }
    }

    /// Random boundary frame, resampled until both the full frame
    /// `(e, e_n)` and the induced boundary metric are safely nondegenerate.
    pub fn random_boundary<R: Rng>(n: usize, rng: &mut R) -> (Self, usize) {
        let mut rejected = 0;
        loop {
            let mat = DMatrix::from_fn(n, n - 1, |_, _| rng.gen_range(-1.0..1.0f64));
            let eta = InternalMetric::lorentzian(n);
            let g = boundary_metric(&mat, &eta);
            let min_sv = g
                .svd(false, false)
                .singular_values
                .iter()
                .fold(f64::INFINITY, |m, &s| m.min(s));
            if min_sv >= 0.02 {
                if let Ok(frame) = Self::from_matrix_boundary(n, &mat) {
                    return (frame, rejected);
                }
            }
            rejected += 1;
        }
    }

    /// Frame data of a geometry at one grid node.
    pub fn at_node(geo: &crate::fields::Geometry, node: usize) -> Self {
        Self {
            n: geo.n,
            base_dim: geo.grid.base_dim(),
            e: geo.e.value(node).clone(),
            e_n: Some(geo.e_n.value(node).clone()),
            eta: geo.eta.clone(),
        }
    }

    /// Wedge power `e^k`; `k = 0` is the unit scalar.
    pub fn e_pow(&self, k: usize) -> FibreElement {
        let mut acc = FibreElement::real(1.0);
        for _ in 0..k {
            acc = acc.wedge(&self.e);
        }
        acc
    }

    /// `e_n` on a boundary frame; panics on bulk frames.
    pub fn transversal(&self) -> &FibreElement {
        self.e_n.as_ref().expect("transversal requested on a bulk frame")
    }
}

fn coframe_element(mat: &DMatrix<f64>) -> FibreElement {
    let mut e = FibreElement::new(1, 1);
    for mu in 0..mat.ncols() {
        for a in 0..mat.nrows() {
            let c = mat[(a, mu)];
            if c != 0.0 {
                e.add_term(1 << mu, 1 << a, crate::algebra::Grassmann::real(c));
            }
        }
    }
    e
}

fn boundary_metric(mat: &DMatrix<f64>, eta: &InternalMetric) -> DMatrix<f64> {
    let d = mat.ncols();
    DMatrix::from_fn(d, d, |mu, nu| {
        (0..mat.nrows()).map(|a| mat[(a, mu)] * eta.eta(a) * mat[(a, nu)]).sum()
    })
}

/// Completes the coframe legs to a transversal internal vector: the unit
/// `eta`-norm direction orthogonal (w.r.t. `eta`) to every leg, with a
/// deterministic sign fixed by its largest component.
fn complete_transversal(mat: &DMatrix<f64>, eta: &InternalMetric) -> Result<Vec<f64>> {
    let n = mat.nrows();
    let mut lowered = DMatrix::zeros(n, n);
    for mu in 0..n - 1 {
        for a in 0..n {
            lowered[(a, mu)] = eta.eta(a) * mat[(a, mu)];
        }
    }
    let qr = lowered.clone().qr();
    let q = qr.q();
    let v: Vec<f64> = (0..n).map(|a| q[(a, n - 1)]).collect();
    for mu in 0..n - 1 {
        let dot: f64 = (0..n).map(|a| v[a] * lowered[(a, mu)]).sum();
        if dot.abs() > 1e-8 {
            return Err(Error::Degenerate(format!(
                "coframe legs do not span a complement, residual {dot:.3e}"
            )));
        }
    }
    let norm: f64 = (0..n).map(|a| eta.eta(a) * v[a] * v[a]).sum();
    if norm.abs() < 1e-10 {
        return Err(Error::Degenerate(
            "transversal direction is null".to_string(),
        ));
    }
    let scale = 1.0 / norm.abs().sqrt();
    let mut v: Vec<f64> = v.iter().map(|x| x * scale).collect();
    let lead = (0..n).fold(0, |best, a| if v[a].abs() > v[best].abs() { a } else { best });
    if v[lead] < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_boundary_transversal_is_last_axis() {
        for n in 4..=6 {
            let pf = PointFrame::identity_boundary(n);
            let en = pf.transversal();
            assert_eq!(en.coeff(0, 1 << (n - 1)).body(), 1.0);
            assert_eq!(en.num_terms(), 1);
        }
    }

    #[test]
    fn random_boundary_transversal_is_eta_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let (pf, _) = PointFrame::random_boundary(5, &mut rng);
            let en = pf.transversal();
            let v: Vec<f64> = (0..5).map(|a| en.coeff(0, 1 << a).body()).collect();
            let norm: f64 = (0..5).map(|a| pf.eta.eta(a) * v[a] * v[a]).sum();
            assert!((norm.abs() - 1.0).abs() < 1e-12);
            for mu in 0..4 {
                let dot: f64 = (0..5)
                    .map(|a| pf.eta.eta(a) * v[a] * pf.e.coeff(1 << mu, 1 << a).body())
                    .sum();
                assert!(dot.abs() < 1e-12, "leg {mu} not orthogonal: {dot:.3e}");
            }
        }
    }

    #[test]
    fn degenerate_boundary_coframe_is_rejected() {
        let mut mat = DMatrix::zeros(4, 3);
        mat[(0, 0)] = 1.0;
        mat[(1, 1)] = 1.0;
        // third leg parallel to the first
        mat[(0, 2)] = 1.0;
        assert!(PointFrame::from_matrix_boundary(4, &mat).is_err());
    }

    #[test]
    fn lightlike_complement_is_rejected() {
        // Legs spanning u_0, u_1, u_2 + u_3 leave a null complement in
        // Lorentzian signature.
        let mut mat = DMatrix::zeros(4, 3);
        mat[(0, 0)] = 1.0;
        mat[(1, 1)] = 1.0;
        mat[(2, 2)] = 1.0;
        mat[(3, 2)] = 1.0;
        assert!(PointFrame::from_matrix_boundary(4, &mat).is_err());
    }
}
