use nalgebra::{DMatrix, DVector};

use crate::algebra::{subsets, FibreElement, Grassmann, Mask};
use crate::wedgemaps::PointFrame;

/// Binomial coefficient with the usual `k > n` convention.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `dim Omega^{i,j}` over a `base_dim`-dimensional base with internal
/// dimension `n`: `C(base_dim, i) * C(n, j)`.
pub fn omega_dim(base_dim: usize, n: usize, i: usize, j: usize) -> usize {
    binomial(base_dim, i) * binomial(n, j)
}

/// Ordered monomial basis of the fibre space `Omega^{i,j}`: base masks
/// ascending (outer index), internal masks ascending (inner index).
#[derive(Debug, Clone)]
pub struct FibreBasis {
    pub base_dim: usize,
    pub int_dim: usize,
    pub base_deg: usize,
    pub int_deg: usize,
    base_masks: Vec<Mask>,
    int_masks: Vec<Mask>,
}

impl FibreBasis {
    pub fn new(base_dim: usize, int_dim: usize, base_deg: usize, int_deg: usize) -> Self {
        Self {
            base_dim,
            int_dim,
            base_deg,
            int_deg,
            base_masks: subsets(base_dim as u32, base_deg as u32),
            int_masks: subsets(int_dim as u32, int_deg as u32),
        }
    }

    pub fn dim(&self) -> usize {
        self.base_masks.len() * self.int_masks.len()
    }

    pub fn masks(&self, idx: usize) -> (Mask, Mask) {
        let ni = self.int_masks.len();
        (self.base_masks[idx / ni], self.int_masks[idx % ni])
    }

    pub fn index_of(&self, base_mask: Mask, int_mask: Mask) -> usize {
        let b = self
            .base_masks
            .binary_search(&base_mask)
            .expect("base mask not in basis");
        let i = self
            .int_masks
            .binary_search(&int_mask)
            .expect("internal mask not in basis");
        b * self.int_masks.len() + i
    }

    /// Unit basis element at `idx`.
    pub fn element(&self, idx: usize) -> FibreElement {
        let (bm, im) = self.masks(idx);
        let mut x = FibreElement::new(self.base_deg as u8, self.int_deg as u8);
        x.add_term(bm, im, Grassmann::one());
        x
    }

    /// Coefficient vector of the Grassmann monomial `gmask` across all slots.
    pub fn vectorize_monomial(&self, x: &FibreElement, gmask: u64) -> DVector<f64> {
        assert_eq!(x.base_deg() as usize, self.base_deg);
        assert_eq!(x.int_deg() as usize, self.int_deg);
        let mut v = DVector::zeros(self.dim());
        for (bm, im, g) in x.iter() {
            v[self.index_of(bm, im)] = g.coeff(gmask);
        }
        v
    }

    /// Real-coefficient vectorization (the body of each slot).
    pub fn vectorize(&self, x: &FibreElement) -> DVector<f64> {
        self.vectorize_monomial(x, 0)
    }

    /// Element with real coefficients given by `v`.
    pub fn element_from_vec(&self, v: &DVector<f64>) -> FibreElement {
        assert_eq!(v.len(), self.dim());
        let mut x = FibreElement::new(self.base_deg as u8, self.int_deg as u8);
        for (idx, &c) in v.iter().enumerate() {
            if c != 0.0 {
                let (bm, im) = self.masks(idx);
                x.add_term(bm, im, Grassmann::real(c));
            }
        }
        x
    }

    /// All Grassmann monomial masks appearing in any slot of `x`.
    pub fn monomials_of(x: &FibreElement) -> Vec<u64> {
        let mut masks: Vec<u64> = x
            .iter()
            .flat_map(|(_, _, g)| g.terms().map(|(m, _)| m))
            .collect();
        masks.sort_unstable();
        masks.dedup();
        masks
    }
}

/// A wedge multiplication map `W_k^{(i,j)}: Omega^{i,j} -> Omega^{i+k,j+k}`,
/// `X -> X ^ e^k`, over a base of dimension `base_dim` with internal
/// dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WMapSpec {
    pub base_dim: usize,
    pub n: usize,
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl WMapSpec {
    pub fn bulk(n: usize, i: usize, j: usize, k: usize) -> Self {
        let s = Self { base_dim: n, n, i, j, k };
        s.validate();
        s
    }

    pub fn boundary(n: usize, i: usize, j: usize, k: usize) -> Self {
        let s = Self { base_dim: n - 1, n, i, j, k };
        s.validate();
        s
    }

    fn validate(&self) {
        assert!(
            self.i + self.k <= self.base_dim && self.j + self.k <= self.n,
            "wedge map degrees out of range: {self:?}"
        );
    }

    pub fn domain(&self) -> FibreBasis {
        FibreBasis::new(self.base_dim, self.n, self.i, self.j)
    }

    pub fn codomain(&self) -> FibreBasis {
        FibreBasis::new(self.base_dim, self.n, self.i + self.k, self.j + self.k)
    }
}

/// Matrix of `X -> X ^ e^k` in the monomial bases of domain and codomain.
pub fn assemble_map(spec: &WMapSpec, frame: &PointFrame) -> DMatrix<f64> {
    assert_eq!(frame.base_dim, spec.base_dim, "frame/spec base dimension");
    assert_eq!(frame.n, spec.n, "frame/spec internal dimension");
    let dom = spec.domain();
    let cod = spec.codomain();
    let epow = frame.e_pow(spec.k);
    let mut m = DMatrix::zeros(cod.dim(), dom.dim());
    for col in 0..dom.dim() {
        let image = dom.element(col).wedge(&epow);
        m.set_column(col, &cod.vectorize(&image));
    }
    m
}

/// Matrix of the internal action `rho: Omega^{1,2} -> Omega^{2,1}`,
/// `X -> [X, e]`.
pub fn rho_matrix(frame: &PointFrame) -> DMatrix<f64> {
    let dom = FibreBasis::new(frame.base_dim, frame.n, 1, 2);
    let cod = FibreBasis::new(frame.base_dim, frame.n, 2, 1);
    let mut m = DMatrix::zeros(cod.dim(), dom.dim());
    for col in 0..dom.dim() {
        let image = dom.element(col).bracket(&frame.e, &frame.eta);
        m.set_column(col, &cod.vectorize(&image));
    }
    m
}

/// Matrix of `chi: Omega^{1,2} -> Omega^{n-2,n-2}` on a boundary frame,
/// `v -> e_n ^ e^{n-4} ^ [v, e]`.
pub fn chi_matrix(frame: &PointFrame) -> DMatrix<f64> {
    let n = frame.n;
    assert_eq!(frame.base_dim, n - 1, "chi map lives on a boundary frame");
    let dom = FibreBasis::new(n - 1, n, 1, 2);
    let cod = FibreBasis::new(n - 1, n, n - 2, n - 2);
    let prefix = frame.transversal().wedge(&frame.e_pow(n - 4));
    let mut m = DMatrix::zeros(cod.dim(), dom.dim());
    for col in 0..dom.dim() {
        let image = prefix.wedge(&dom.element(col).bracket(&frame.e, &frame.eta));
        m.set_column(col, &cod.vectorize(&image));
    }
    m
}

/// Numerical rank data: singular values sorted descending, the rank at a
/// relative threshold, the spectral gap across the cut, and an orthonormal
/// kernel basis (columns).
#[derive(Debug, Clone)]
pub struct RankKernel {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// Ratio of the smallest kept to the largest discarded singular value;
    /// infinite for full-rank maps.
    pub gap: f64,
    pub kernel: DMatrix<f64>,
}

/// Rank and kernel of `m` by SVD, keeping singular values above
/// `tol * sigma_max`. Rows are zero-padded so the right singular basis is
/// complete and the kernel comes out orthonormal.
pub fn rank_kernel(m: &DMatrix<f64>, tol: f64) -> RankKernel {
    let (rows, cols) = m.shape();
    let padded = if rows >= cols {
        m.clone()
    } else {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
    });
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let rank = singular_values.iter().filter(|&&s| s > tol * sigma_max).count();
    let gap = if rank == 0 || rank == cols {
        f64::INFINITY
    } else {
        singular_values[rank - 1] / singular_values[rank]
    };
    let mut kernel = DMatrix::zeros(cols, cols - rank);
    for (kcol, &i) in order[rank..].iter().enumerate() {
        for c in 0..cols {
            kernel[(c, kcol)] = v_t[(i, c)];
        }
    }
    RankKernel {
        rank,
        singular_values,
        gap,
        kernel,
    }
}

const PRIMES: [u64; 2] = [2305843009213693951, 2147483647];

/// Exact rank of an integer matrix by Gaussian elimination over two large
/// prime fields. Returns `None` if entries are not (near-)integers or the
/// two fields disagree.
pub fn modular_rank(m: &DMatrix<f64>) -> Option<usize> {
    let mut ints = Vec::with_capacity(m.len());
    for &x in m.iter() {
        let r = x.round();
        if (x - r).abs() > 1e-9 || r.abs() > 1e15 {
            return None;
        }
        ints.push(r as i64);
    }
    let ranks: Vec<usize> = PRIMES
        .iter()
        .map(|&p| rank_mod_p(&ints, m.nrows(), m.ncols(), p))
        .collect();
    (ranks[0] == ranks[1]).then_some(ranks[0])
}

fn rank_mod_p(ints: &[i64], rows: usize, cols: usize, p: u64) -> usize {
    // column-major storage, matching nalgebra's iteration order
    let mut a: Vec<u64> = ints
        .iter()
        .map(|&x| x.rem_euclid(p as i64) as u64)
        .collect();
    let at = |a: &[u64], r: usize, c: usize| a[c * rows + r];
    let mut rank = 0;
    for col in 0..cols {
        let pivot = (rank..rows).find(|&r| at(&a, r, col) != 0);
        let Some(pr) = pivot else { continue };
        for c in 0..cols {
            a.swap(c * rows + pr, c * rows + rank);
        }
        let inv = mod_inverse(at(&a, rank, col), p);
        for r in 0..rows {
            if r == rank || at(&a, r, col) == 0 {
                continue;
            }
            let factor = mod_mul(at(&a, r, col), inv, p);
            for c in col..cols {
                let sub = mod_mul(factor, at(&a, rank, c), p);
                let cur = at(&a, r, c);
                a[c * rows + r] = (cur + p - sub) % p;
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

fn mod_mul(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn mod_inverse(a: u64, p: u64) -> u64 {
    // Fermat: a^(p-2) mod p
    let mut base = a % p;
    let mut exp = p - 2;
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mod_mul(acc, base, p);
        }
        base = mod_mul(base, base, p);
        exp >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dimension_count_matches_basis_enumeration() {
        for (bd, n, i, j) in [(4, 4, 2, 1), (3, 4, 1, 2), (4, 5, 2, 2), (3, 4, 2, 2)] {
            assert_eq!(FibreBasis::new(bd, n, i, j).dim(), omega_dim(bd, n, i, j));
        }
        assert_eq!(omega_dim(4, 4, 2, 1), 24);
        assert_eq!(omega_dim(3, 4, 1, 2), 18);
        assert_eq!(omega_dim(3, 4, 2, 2), 18);
    }

    #[test]
    fn assemble_matches_direct_wedge() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (frame, _) = PointFrame::random_boundary(4, &mut rng);
        let spec = WMapSpec::boundary(4, 1, 2, 1);
        let m = assemble_map(&spec, &frame);
        let dom = spec.domain();
        let cod = spec.codomain();
        let coords = DVector::from_fn(dom.dim(), |_, _| rng.gen_range(-1.0..1.0));
        let x = dom.element_from_vec(&coords);
        let image = x.wedge(&frame.e_pow(1));
        let lhs = &m * &coords;
        let rhs = cod.vectorize(&image);
        assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn zeroth_power_map_is_identity() {
        let frame = PointFrame::identity_boundary(5);
        let spec = WMapSpec::boundary(5, 2, 1, 0);
        let m = assemble_map(&spec, &frame);
        assert_eq!(m, DMatrix::identity(m.nrows(), m.ncols()));
    }

    #[test]
    fn rank_kernel_recovers_a_planted_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // 5x7 rank-4 matrix built from a known row space
        let b = DMatrix::from_fn(4, 7, |_, _| rng.gen_range(-1.0..1.0));
        let c = DMatrix::from_fn(5, 4, |_, _| rng.gen_range(-1.0..1.0));
        let m = &c * &b;
        let rk = rank_kernel(&m, 1e-9);
        assert_eq!(rk.rank, 4);
        assert_eq!(rk.kernel.ncols(), 3);
        assert!(rk.gap > 1e6);
        assert!((&m * &rk.kernel).amax() < 1e-12);
        let gram = rk.kernel.transpose() * &rk.kernel;
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn modular_rank_agrees_with_svd_on_integer_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let r = rng.gen_range(1..5usize);
            let b = DMatrix::from_fn(r, 8, |_, _| rng.gen_range(-4..5) as f64);
            let c = DMatrix::from_fn(6, r, |_, _| rng.gen_range(-4..5) as f64);
            let m = &c * &b;
            let expected = rank_kernel(&m, 1e-9).rank;
            assert_eq!(modular_rank(&m), Some(expected));
        }
        let non_integer = DMatrix::from_element(2, 2, 0.5);
        assert_eq!(modular_rank(&non_integer), None);
    }
}
