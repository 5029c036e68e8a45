use nalgebra::DMatrix;

use crate::algebra::{FibreElement, Grassmann};
use crate::wedgemaps::{
    assemble_map, chi_matrix, omega_dim, rank_kernel, FibreBasis, PointFrame, WMapSpec,
};
use crate::{Error, Result};

/// Matrix of `X -> prefix ^ X` from `Omega^{i,j}` into the induced codomain.
fn prefix_map(frame: &PointFrame, prefix: &FibreElement, i: usize, j: usize) -> DMatrix<f64> {
    let dom = FibreBasis::new(frame.base_dim, frame.n, i, j);
    let cod = FibreBasis::new(
        frame.base_dim,
        frame.n,
        i + prefix.base_deg() as usize,
        j + prefix.int_deg() as usize,
    );
    let mut m = DMatrix::zeros(cod.dim(), dom.dim());
    for col in 0..dom.dim() {
        m.set_column(col, &cod.vectorize(&prefix.wedge(&dom.element(col))));
    }
    m
}

/// Outcome of the two-part vanishing test for a boundary (2,1)-form.
#[derive(Debug, Clone)]
pub struct AlphaVerdict {
    /// `max |e^{n-3} ^ alpha|`, relative to the input scale.
    pub wedge_residual: f64,
    /// Least-squares distance of `e_n ^ e^{n-4} ^ alpha` from the image of
    /// the (1,1) wedge map, relative to the input scale.
    pub membership_residual: f64,
    /// Both conditions hold at tolerance: alpha is certified zero.
    pub is_zero: bool,
    /// Column rank of the stacked test map; full rank means the two
    /// conditions jointly detect every nonzero alpha.
    pub stacked_rank: usize,
    pub stacked_expected: usize,
}

impl AlphaVerdict {
    pub fn criterion_faithful(&self) -> bool {
        self.stacked_rank == self.stacked_expected
    }
}

/// Tests whether a boundary (2,1)-form vanishes using only wedge data:
/// `alpha = 0` iff `e^{n-3} ^ alpha = 0` and `e_n ^ e^{n-4} ^ alpha` lies in
/// the image of `W_{n-3}^{(1,1)}`.
pub fn alpha_criterion(alpha: &FibreElement, frame: &PointFrame, tol: f64) -> AlphaVerdict {
    let n = frame.n;
    assert_eq!(frame.base_dim, n - 1, "vanishing test lives on a boundary frame");
    assert_eq!((alpha.base_deg(), alpha.int_deg()), (2, 1), "expected a (2,1)-form");

    let cod21 = FibreBasis::new(n - 1, n, n - 1, n - 2);
    let cod22 = FibreBasis::new(n - 1, n, n - 2, n - 2);
    let scale = alpha.max_abs().max(f64::MIN_POSITIVE);

    let epow = frame.e_pow(n - 3);
    let wedge_residual = epow.wedge(alpha).max_abs() / scale;

    let prefix = frame.transversal().wedge(&frame.e_pow(n - 4));
    let w11 = assemble_map(&WMapSpec::boundary(n, 1, 1, n - 3), frame);
    let svd = w11.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let target = cod22.vectorize(&prefix.wedge(alpha));
    let membership_residual = match svd.solve(&target, 1e-12 * sigma_max) {
        Ok(x) => (&w11 * x - &target).norm() / scale,
        Err(_) => f64::INFINITY,
    };

    // Stacked detection map: alpha -> (e^{n-3} alpha, cokernel part of
    // e_n e^{n-4} alpha). Full column rank certifies that the two residuals
    // vanish only on alpha = 0.
    let m_top = prefix_map(frame, &epow, 2, 1);
    let m_mid = prefix_map(frame, &prefix, 2, 1);
    let u = svd.u.as_ref().expect("left singular vectors");
    let r11 = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-12 * sigma_max)
        .count();
    let u_r = u.columns(0, r11);
    let coker = &m_mid - &u_r * (u_r.transpose() * &m_mid);
    let mut stacked = DMatrix::zeros(m_top.nrows() + coker.nrows(), m_top.ncols());
    stacked.view_mut((0, 0), m_top.shape()).copy_from(&m_top);
    stacked.view_mut((m_top.nrows(), 0), coker.shape()).copy_from(&coker);
    let stacked_rank = rank_kernel(&stacked, 1e-9).rank;
    assert_eq!(cod21.dim() + cod22.dim(), stacked.nrows());

    AlphaVerdict {
        wedge_residual,
        membership_residual,
        is_zero: wedge_residual <= tol && membership_residual <= tol,
        stacked_rank,
        stacked_expected: omega_dim(n - 1, n, 2, 1),
    }
}

/// The unique split of a weighted density `beta` in `Omega^{n-2,n-2}` as
/// `beta = e^{n-3} ^ gamma + e_n ^ e^{n-4} ^ [v, e]` with `gamma` a
/// (1,1)-form and `v` in the kernel of the (1,2) wedge map.
#[derive(Debug, Clone)]
pub struct BetaSplit {
    pub gamma: FibreElement,
    pub v: FibreElement,
    /// `max |reconstruction - beta|`, absolute.
    pub residual: f64,
}

/// Factored solver for the weighted-density split at a fixed frame. The
/// system is square: `dim Omega^{1,1} + dim Ker W^{(1,2)} = dim
/// Omega^{n-2,n-2}` in every dimension.
pub struct BetaSolver {
    frame: PointFrame,
    gamma_basis: FibreBasis,
    v_basis: FibreBasis,
    density_basis: FibreBasis,
    kernel: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    epow: FibreElement,
    chi_prefix: FibreElement,
}

impl BetaSolver {
    pub fn new(frame: &PointFrame) -> Result<Self> {
        let n = frame.n;
        assert_eq!(frame.base_dim, n - 1, "the split lives on a boundary frame");
        let w12 = assemble_map(&WMapSpec::boundary(n, 1, 2, n - 3), frame);
        let rk = rank_kernel(&w12, 1e-9);
        if rk.kernel.ncols() != super::suite::boundary_kernel_dim(n) {
            return Err(Error::Degenerate(format!(
                "unexpected kernel dimension {} for the (1,2) wedge map",
                rk.kernel.ncols()
            )));
        }
        let w11 = assemble_map(&WMapSpec::boundary(n, 1, 1, n - 3), frame);
        let chi_k = chi_matrix(frame) * &rk.kernel;
        let rows = w11.nrows();
        let cols = w11.ncols() + chi_k.ncols();
        if rows != cols {
            return Err(Error::Shape(format!(
                "split system is {rows} x {cols}, expected square"
            )));
        }
        let mut system = DMatrix::zeros(rows, cols);
        system.view_mut((0, 0), w11.shape()).copy_from(&w11);
        system.view_mut((0, w11.ncols()), chi_k.shape()).copy_from(&chi_k);
        let lu = system.lu();
        if !lu.is_invertible() {
            return Err(Error::Degenerate(
                "split system is singular at this frame".to_string(),
            ));
        }
        Ok(Self {
            gamma_basis: FibreBasis::new(n - 1, n, 1, 1),
            v_basis: FibreBasis::new(n - 1, n, 1, 2),
            density_basis: FibreBasis::new(n - 1, n, n - 2, n - 2),
            kernel: rk.kernel,
            lu,
            epow: frame.e_pow(n - 3),
            chi_prefix: frame.transversal().wedge(&frame.e_pow(n - 4)),
            frame: frame.clone(),
        })
    }

    /// Orthonormal basis of `Ker W_{n-3}^{(1,2)}` (columns).
    pub fn kernel_basis(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    /// Orthogonal projector of `Omega^{1,2}` onto the kernel.
    pub fn kernel_projector(&self) -> DMatrix<f64> {
        &self.kernel * self.kernel.transpose()
    }

    /// Orthonormal basis (columns) of the variations of a slice connection
    /// at fixed coframe: `x` in `Omega^{1,2}` with `e_n ^ e^{n-4} ^ [x, e]`
    /// in the image of the (1,1) wedge map. This is the complement of the
    /// kernel selected by the structural split, of dimension `n (n-1)` in
    /// every dimension.
    pub fn tangent_basis(&self) -> DMatrix<f64> {
        let n = self.frame.n;
        let dim = self.v_basis.dim();
        let mut vmat = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            let beta = self.chi_prefix.wedge(
                &self
                    .v_basis
                    .element(i)
                    .bracket(&self.frame.e, &self.frame.eta),
            );
            vmat.set_column(i, &self.v_basis.vectorize(&self.solve(&beta).v));
        }
        let svd = vmat.svd(false, true);
        let v_t = svd.v_t.expect("thin SVD with v requested");
        let cut = 1e-8 * svd.singular_values.max().max(1.0);
        let rows: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&j| svd.singular_values[j] <= cut)
            .collect();
        assert_eq!(rows.len(), n * (n - 1), "slice tangent dimension");
        let mut t = DMatrix::<f64>::zeros(dim, rows.len());
        for (c, &j) in rows.iter().enumerate() {
            t.set_column(c, &v_t.row(j).transpose());
        }
        t
    }

    /// Solves the split for `beta`, coefficient monomial by monomial.
    /// Grassmann-valued densities are supported.
    pub fn solve(&self, beta: &FibreElement) -> BetaSplit {
        let n = self.frame.n;
        assert_eq!(
            (beta.base_deg() as usize, beta.int_deg() as usize),
            (n - 2, n - 2),
            "expected a weighted density"
        );
        let n_gamma = self.gamma_basis.dim();
        let mut gamma = FibreElement::new(1, 1);
        let mut v = FibreElement::new(1, 2);
        for gmask in FibreBasis::monomials_of(beta) {
            let rhs = self.density_basis.vectorize_monomial(beta, gmask);
            let x = self.lu.solve(&rhs).expect("factored system is invertible");
            let gamma_part = x.rows(0, n_gamma).into_owned();
            let v_part = &self.kernel * x.rows(n_gamma, x.len() - n_gamma);
            for (idx, &c) in gamma_part.iter().enumerate() {
                if c != 0.0 {
                    let (bm, im) = self.gamma_basis.masks(idx);
                    gamma.add_term(bm, im, Grassmann::monomial(gmask, c));
                }
            }
            for (idx, &c) in v_part.iter().enumerate() {
                if c != 0.0 {
                    let (bm, im) = self.v_basis.masks(idx);
                    v.add_term(bm, im, Grassmann::monomial(gmask, c));
                }
            }
        }
        let recon = self.reconstruct(&gamma, &v);
        let residual = recon.sub(beta).max_abs();
        BetaSplit { gamma, v, residual }
    }

    /// `e^{n-3} ^ gamma + e_n ^ e^{n-4} ^ [v, e]`.
    pub fn reconstruct(&self, gamma: &FibreElement, v: &FibreElement) -> FibreElement {
        let first = self.epow.wedge(gamma);
        let second = self.chi_prefix.wedge(&v.bracket(&self.frame.e, &self.frame.eta));
        first.add(&second)
    }
}

/// One-shot form of the weighted-density split.
pub fn beta_decompose(beta: &FibreElement, frame: &PointFrame) -> Result<BetaSplit> {
    Ok(BetaSolver::new(frame)?.solve(beta))
}

/// Least-squares / minimum-norm solver for a wedge map at a fixed frame,
/// with Grassmann-valued right-hand sides handled monomial by monomial.
pub struct WedgeSolver {
    spec: WMapSpec,
    domain: FibreBasis,
    codomain: FibreBasis,
    matrix: DMatrix<f64>,
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    cutoff: f64,
}

impl WedgeSolver {
    pub fn new(spec: WMapSpec, frame: &PointFrame) -> Self {
        let matrix = assemble_map(&spec, frame);
        let svd = matrix.clone().svd(true, true);
        let cutoff = 1e-12 * svd.singular_values.max();
        Self {
            spec,
            domain: spec.domain(),
            codomain: spec.codomain(),
            matrix,
            svd,
            cutoff,
        }
    }

    pub fn spec(&self) -> &WMapSpec {
        &self.spec
    }

    /// Minimum-norm least-squares preimage of `rhs` under `X -> X ^ e^k`,
    /// with the euclidean residual norm (absolute, worst monomial).
    pub fn solve_min_norm(&self, rhs: &FibreElement) -> (FibreElement, f64) {
        let mut out = FibreElement::new(self.spec.i as u8, self.spec.j as u8);
        let mut residual = 0.0f64;
        for gmask in FibreBasis::monomials_of(rhs) {
            let b = self.codomain.vectorize_monomial(rhs, gmask);
            let x = self.svd.solve(&b, self.cutoff).expect("SVD solve");
            residual = residual.max((&self.matrix * &x - &b).norm());
            for (idx, &c) in x.iter().enumerate() {
                if c != 0.0 {
                    let (bm, im) = self.domain.masks(idx);
                    out.add_term(bm, im, Grassmann::monomial(gmask, c));
                }
            }
        }
        (out, residual)
    }
}
