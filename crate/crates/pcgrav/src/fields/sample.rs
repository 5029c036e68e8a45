//! Reproducible random field content.
//!
//! Samplers draw low-order trigonometric polynomials so that the spectral
//! backend stays inside its aliasing budget: a profile lists the axes that
//! are allowed to vary and the maximum mode per axis. All draws go through a
//! caller-provided ChaCha generator, so identical seeds give identical fields
//! on every platform.

use crate::algebra::{FibreElement, Grassmann, Mask};
use crate::fields::field::Field;
use crate::fields::grid::Grid;
use rand::Rng;
use std::f64::consts::TAU;
use std::sync::Arc;

/// Spatial richness of a sampled field.
#[derive(Clone, Debug)]
pub struct TrigProfile {
    /// Axes along which the field varies (empty: spatially constant).
    pub axes: Vec<usize>,
    /// Highest Fourier mode per varying axis.
    pub max_mode: u32,
    pub amplitude: f64,
}

impl TrigProfile {
    pub fn constant(amplitude: f64) -> Self {
        TrigProfile {
            axes: Vec::new(),
            max_mode: 0,
            amplitude,
        }
    }

    pub fn axis(axis: usize, max_mode: u32, amplitude: f64) -> Self {
        TrigProfile {
            axes: vec![axis],
            max_mode,
            amplitude,
        }
    }

    pub fn all_axes(dim: usize, max_mode: u32, amplitude: f64) -> Self {
        TrigProfile {
            axes: (0..dim).collect(),
            max_mode,
            amplitude,
        }
    }
}

/// One scalar sample: `a_0 + sum_axis sum_k a cos(tau k x) + b sin(tau k x)`.
pub fn random_scalar(grid: &Arc<Grid>, rng: &mut impl Rng, prof: &TrigProfile) -> Vec<f64> {
    let amp = prof.amplitude;
    let a0: f64 = rng.gen_range(-amp..amp);
    let mut waves: Vec<(usize, f64, f64, f64)> = Vec::new();
    for &axis in &prof.axes {
        for k in 1..=prof.max_mode {
            let a: f64 = rng.gen_range(-amp..amp);
            let b: f64 = rng.gen_range(-amp..amp);
            waves.push((axis, k as f64, a, b));
        }
    }
    (0..grid.len())
        .map(|node| {
            let mut v = a0;
            for &(axis, k, a, b) in &waves {
                let x = TAU * k * grid.coord(node, axis);
                v += a * x.cos() + b * x.sin();
            }
            v
        })
        .collect()
}

/// Random real (even) field of the given bidegree: one independent scalar
/// sample per (base mask, internal mask) slot.
pub fn random_real_field(
    grid: &Arc<Grid>,
    base_deg: u8,
    int_deg: u8,
    rng: &mut impl Rng,
    prof: &TrigProfile,
) -> Field {
    let int_dim = grid.base_dim() as u32 + 1;
    let slots = slots(grid.base_dim() as u32, int_dim, base_deg, int_deg);
    let samples: Vec<Vec<f64>> = slots.iter().map(|_| random_scalar(grid, rng, prof)).collect();
    Field::from_fn(grid, base_deg, int_deg, 0, |node| {
        let mut fe = FibreElement::new(base_deg, int_deg);
        for (slot, sample) in slots.iter().zip(&samples) {
            fe.add_term(slot.0, slot.1, Grassmann::real(sample[node]));
        }
        fe
    })
}

/// Random odd/ghost field: `sum_g th_g * (real sample)` over the given
/// generator indices, tagged with the stated ghost number.
pub fn random_ghost_field(
    grid: &Arc<Grid>,
    base_deg: u8,
    int_deg: u8,
    generators: &[u32],
    ghost: i32,
    rng: &mut impl Rng,
    prof: &TrigProfile,
) -> Field {
    let int_dim = grid.base_dim() as u32 + 1;
    let slots = slots(grid.base_dim() as u32, int_dim, base_deg, int_deg);
    let samples: Vec<(u32, Vec<Vec<f64>>)> = generators
        .iter()
        .map(|&g| {
            (
                g,
                slots.iter().map(|_| random_scalar(grid, rng, prof)).collect(),
            )
        })
        .collect();
    Field::from_fn(grid, base_deg, int_deg, ghost, |node| {
        let mut fe = FibreElement::new(base_deg, int_deg);
        for (g, per_slot) in &samples {
            for (slot, sample) in slots.iter().zip(per_slot) {
                fe.add_term(slot.0, slot.1, Grassmann::monomial(1u64 << g, sample[node]));
            }
        }
        fe
    })
}

/// Geometry whose coframe is the identity plus a random trigonometric
/// perturbation, with vanishing reference connection. The amplitude must be
/// small enough to keep the frame nondegenerate everywhere.
pub fn perturbed_geometry(
    n: usize,
    grid: &Arc<Grid>,
    rng: &mut impl Rng,
    prof: &TrigProfile,
    lambda: f64,
) -> crate::Result<crate::fields::Geometry> {
    let base = crate::fields::Geometry::identity(n, grid, lambda)?;
    let e = base.e.add(&random_real_field(grid, 1, 1, rng, prof));
    let omega0 = Field::zeros(grid, 1, 2, 0);
    crate::fields::Geometry::with_coframe(n, grid, e, omega0, lambda)
}

fn slots(base_dim: u32, int_dim: u32, base_deg: u8, int_deg: u8) -> Vec<(Mask, Mask)> {
    let bases = crate::algebra::subsets(base_dim, base_deg as u32);
    let ints = crate::algebra::subsets(int_dim, int_deg as u32);
    bases
        .iter()
        .flat_map(|&p| ints.iter().map(move |&b| (p, b)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::grid::Backend;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sampling_is_deterministic_by_seed() {
        let g = Arc::new(Grid::new(&[4, 4], Backend::Spectral));
        let f1 = random_real_field(&g, 1, 1, &mut ChaCha8Rng::seed_from_u64(7), &TrigProfile::axis(0, 1, 1.0));
        let f2 = random_real_field(&g, 1, 1, &mut ChaCha8Rng::seed_from_u64(7), &TrigProfile::axis(0, 1, 1.0));
        assert!(f1.sub(&f2).max_abs() == 0.0);
    }

    #[test]
    fn constant_profile_gives_constant_fields() {
        let g = Arc::new(Grid::new(&[4, 4], Backend::Spectral));
        let f = random_real_field(&g, 0, 2, &mut ChaCha8Rng::seed_from_u64(3), &TrigProfile::constant(2.0));
        let d = f.d();
        assert!(d.max_abs() < 1e-12);
    }

    #[test]
    fn ghost_field_carries_declared_generators() {
        let g = Arc::new(Grid::new(&[4, 4], Backend::Spectral));
        let f = random_ghost_field(
            &g,
            0,
            2,
            &[3, 4],
            1,
            &mut ChaCha8Rng::seed_from_u64(3),
            &TrigProfile::axis(1, 1, 1.0),
        );
        for node in 0..g.len() {
            for (_, _, coeff) in f.value(node).iter() {
                for (mask, _) in coeff.terms() {
                    assert!(mask == 1 << 3 || mask == 1 << 4);
                }
            }
        }
        assert_eq!(f.ghost(), Some(1));
    }
}
