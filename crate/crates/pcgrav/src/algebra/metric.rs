//! Internal fibre metric of Lorentzian signature (N-1, 1).

/// Diagonal metric on the internal vector space; the last internal axis is
/// the timelike one by convention.
#[derive(Clone, Debug, PartialEq)]
pub struct InternalMetric {
    diag: Vec<f64>,
}

impl InternalMetric {
    /// `diag(+1, .., +1, -1)` in internal dimension `n`.
    pub fn lorentzian(n: usize) -> Self {
        let mut diag = vec![1.0; n];
        diag[n - 1] = -1.0;
        InternalMetric { diag }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `eta(u_a, u_a)`; off-diagonal pairings vanish.
    #[inline]
    pub fn eta(&self, a: usize) -> f64 {
        self.diag[a]
    }

    /// `eta(x, y)` for component vectors.
    pub fn pair(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.diag)
            .map(|((a, b), d)| a * b * d)
            .sum()
    }
}
