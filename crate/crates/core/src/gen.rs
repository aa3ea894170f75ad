//! Seeded instance and image generators. Output depends only on the
//! arguments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{GlsError, Result};
use crate::imaging::{sqrt_fidelity_instance, Image, TvMode};
use crate::instance::{Group, Instance};
use crate::linalg::{SddMatrix, SparseVector};

/// Random instance on `n` variables with `k` groups. A random spanning tree
/// is spread over the groups and group 0 is grounded, so the summed matrix
/// is nonsingular. Edge weights lie in `[0.5, 4)`, potentials in `[-1, 1)`.
pub fn random_instance(n: usize, k: usize, seed: u64) -> Result<Instance> {
    if n == 0 || k == 0 {
        return Err(GlsError::InvalidArgument("need at least one variable and one group".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); k];
    let mut diag: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges[rng.random_range(0..k)].push((u, v, rng.random_range(0.5..4.0)));
    }
    for _ in 0..n {
        let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
        if u != v {
            edges[rng.random_range(0..k)].push((u, v, rng.random_range(0.5..4.0)));
        }
    }
    diag[0].push((rng.random_range(0..n), rng.random_range(0.5..4.0)));
    for d in diag.iter_mut().skip(1) {
        if rng.random_bool(0.25) {
            d.push((rng.random_range(0..n), rng.random_range(0.5..4.0)));
        }
    }
    let groups = edges
        .iter()
        .zip(&diag)
        .map(|(e, d)| {
            let l = SddMatrix::assemble_laplacian(n, e, d)?;
            let s: Vec<(usize, f64)> = l.support().into_iter().map(|u| (u, rng.random_range(-1.0..1.0))).collect();
            Ok(Group::new(l, SparseVector::from_pairs(n, s)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Instance::new(n, groups)
}

/// Piecewise-constant `size x size` test image (background, a bright
/// rectangle and a mid-gray disc) and a copy with Gaussian noise of
/// standard deviation `sigma`, clamped to `[0, 1]`.
pub fn synthetic_image(size: usize, sigma: f64, seed: u64) -> Result<(Image, Image)> {
    if size == 0 {
        return Err(GlsError::InvalidArgument("image size must be positive".into()));
    }
    let noise = Normal::new(0.0, sigma)
        .map_err(|e| GlsError::InvalidArgument(format!("invalid noise level {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = size as f64;
    let mut clean = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let in_rect = px > 0.15 * f && px < 0.55 * f && py > 0.2 * f && py < 0.7 * f;
            let (dx, dy) = (px - 0.68 * f, py - 0.62 * f);
            let in_disc = dx * dx + dy * dy < (0.22 * f).powi(2);
            clean.push(if in_disc {
                0.5
            } else if in_rect {
                0.85
            } else {
                0.15
            });
        }
    }
    let noisy = clean.iter().map(|v| (v + noise.sample(&mut rng)).clamp(0.0, 1.0)).collect();
    Ok((Image::new(size, size, 1, clean)?, Image::new(size, size, 1, noisy)?))
}

/// Square-root-fidelity anisotropic denoising instance of a noisy
/// synthetic image.
pub fn tv_instance(size: usize, lambda: f64, sigma: f64, seed: u64) -> Result<Instance> {
    let (_, noisy) = synthetic_image(size, sigma, seed)?;
    sqrt_fidelity_instance(&noisy, TvMode::Anisotropic, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{serialize_instance, Weights};

    #[test]
    fn deterministic_in_seed() {
        let a = serialize_instance(&random_instance(12, 4, 7).unwrap());
        let b = serialize_instance(&random_instance(12, 4, 7).unwrap());
        let c = serialize_instance(&random_instance(12, 4, 8).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(synthetic_image(8, 0.2, 1).unwrap(), synthetic_image(8, 0.2, 1).unwrap());
    }

    #[test]
    fn random_instances_are_solvable() {
        for seed in 0..20 {
            let inst = random_instance(15, 1 + seed as usize % 5, seed).unwrap();
            let q = inst.quad_min(&Weights::uniform(inst.k()), 1e-12).unwrap();
            assert!(q.relative_residual <= 1e-10);
        }
    }

    #[test]
    fn tv_instance_shape() {
        let inst = tv_instance(4, 0.5, 0.1, 3).unwrap();
        assert_eq!(inst.n(), 16);
        // 24 grid edges plus the fidelity group
        assert_eq!(inst.k(), 25);
    }

    #[test]
    fn noise_free_image_is_piecewise_constant() {
        let (clean, noisy) = synthetic_image(32, 0.0, 0).unwrap();
        assert_eq!(clean, noisy);
        let mut levels: Vec<f64> = clean.data().to_vec();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        assert_eq!(levels, vec![0.15, 0.5, 0.85]);
    }
}
