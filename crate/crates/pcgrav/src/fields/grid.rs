//! Periodic structured grid on the unit torus with two derivative backends.
//!
//! Backends:
//! - `FiniteDifference`: second-order central differences. Summation by parts
//!   holds exactly on the periodic grid, `d . d = 0` holds exactly, the
//!   Leibniz rule holds to O(h^2).
//! - `Spectral`: dense Fourier differentiation matrices (the grids here stay
//!   small, so the O(n^2) application is cheaper than bookkeeping an FFT).
//!   Derivatives, products and integrals are exact for trigonometric data
//!   whose total mode content stays under the aliasing limit; the Nyquist
//!   column is projected out, keeping the matrix antisymmetric.

use std::f64::consts::TAU;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    FiniteDifference,
    Spectral,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::FiniteDifference => write!(f, "fd"),
            Backend::Spectral => write!(f, "spectral"),
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "fd" | "finite-difference" => Ok(Backend::FiniteDifference),
            "spectral" | "fourier" => Ok(Backend::Spectral),
            other => Err(crate::Error::Config(format!("unknown backend '{other}'"))),
        }
    }
}

/// Structured periodic grid on `[0,1)^d`.
#[derive(Debug)]
pub struct Grid {
    dims: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
    backend: Backend,
    /// Per axis: n x n Fourier differentiation matrix, row-major (spectral
    /// backend only).
    spectral_d: Vec<Vec<f64>>,
}

impl Grid {
    pub fn new(dims: &[usize], backend: Backend) -> Self {
        assert!(!dims.is_empty());
        assert!(dims.iter().all(|&n| n >= 3), "need at least 3 nodes per axis");
        let mut strides = Vec::with_capacity(dims.len());
        let mut s = 1;
        for &n in dims {
            strides.push(s);
            s *= n;
        }
        let spectral_d = match backend {
            Backend::Spectral => dims.iter().map(|&n| fourier_matrix(n)).collect(),
            Backend::FiniteDifference => Vec::new(),
        };
        Grid {
            dims: dims.to_vec(),
            strides,
            len: s,
            backend,
            spectral_d,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn base_dim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        1.0 / self.dims[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dims.iter().map(|&n| 1.0 / n as f64).product()
    }

    /// Coordinate of a node along one axis.
    pub fn coord(&self, node: usize, axis: usize) -> f64 {
        self.axis_index(node, axis) as f64 / self.dims[axis] as f64
    }

    #[inline]
    pub fn axis_index(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.dims[axis]
    }

    /// Node shifted by `delta` along `axis`, wrapping periodically.
    #[inline]
    pub fn neighbor(&self, node: usize, axis: usize, delta: isize) -> usize {
        let n = self.dims[axis] as isize;
        let i = self.axis_index(node, axis) as isize;
        let j = (i + delta).rem_euclid(n) as usize;
        (node as isize + (j as isize - i) * self.strides[axis] as isize) as usize
    }

    /// Differentiation weights along `axis` as pairs `(offset node, weight)`
    /// relative to a node with axis index `i`; the caller accumulates
    /// `sum_j w_j f(node_j)`.
    pub fn derivative_stencil(&self, node: usize, axis: usize) -> Vec<(usize, f64)> {
        match self.backend {
            Backend::FiniteDifference => {
                let h = self.spacing(axis);
                vec![
                    (self.neighbor(node, axis, 1), 0.5 / h),
                    (self.neighbor(node, axis, -1), -0.5 / h),
                ]
            }
            Backend::Spectral => {
                let n = self.dims[axis];
                let d = &self.spectral_d[axis];
                let i = self.axis_index(node, axis);
                (0..n)
                    .filter_map(|q| {
                        let w = d[i * n + q];
                        if w == 0.0 {
                            None
                        } else {
                            Some((self.neighbor(node, axis, q as isize - i as isize), w))
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Real Fourier differentiation matrix on n periodic nodes of the unit circle
/// (Nyquist mode dropped for even n, keeping the matrix antisymmetric):
/// `D[p][q] = (1/n) sum_{k=1..K} -2 * tau * k * sin(tau k (p - q) / n)`.
fn fourier_matrix(n: usize) -> Vec<f64> {
    let kmax = (n - 1) / 2;
    let mut d = vec![0.0; n * n];
    for p in 0..n {
        for q in 0..n {
            let mut v = 0.0;
            for k in 1..=kmax {
                v -= 2.0 * TAU * k as f64 * (TAU * k as f64 * (p as f64 - q as f64) / n as f64).sin();
            }
            d[p * n + q] = v / n as f64;
        }
    }
    d
}
