//! The subsampled DFT-synthesis operator and its adjoint.
//!
//! `forward(theta) = gather(idft3(theta))` at the plan sites;
//! `adjoint(r) = dft3(scatter(r))`. Both transforms are unitary, so the
//! operator has unit norm and `<forward(theta), r> == <theta, adjoint(r)>`.

use num_complex::Complex64;

use super::{fft::fft3_unitary, CoeffVolume, SamplingPlan};

/// Applies the measurement operator: synthesize, then subsample.
pub fn forward(theta: &CoeffVolume, plan: &SamplingPlan) -> Vec<Complex64> {
    assert_eq!(theta.dims(), plan.dims(), "dims must agree");
    let mut volume = theta.values().to_vec();
    fft3_unitary(&mut volume, theta.dims(), true);
    plan.linear_indices().iter().map(|&i| volume[i]).collect()
}

/// Applies the adjoint: zero-fill at the plan sites, then analyze.
pub fn adjoint(residual: &[Complex64], plan: &SamplingPlan) -> CoeffVolume {
    assert_eq!(residual.len(), plan.len(), "residual length must match plan");
    let dims = plan.dims();
    let mut volume = vec![Complex64::new(0.0, 0.0); dims.len()];
    for (&i, &r) in plan.linear_indices().iter().zip(residual) {
        volume[i] = r;
    }
    fft3_unitary(&mut volume, dims, false);
    CoeffVolume::new(dims, volume).expect("dims match by construction")
}

/// Coherence of the sensing/representation pair in the Candès–Romberg
/// normalization: `sqrt(n) * max |<phi_i, f_j>|` over sampled rows and a
/// set of basis columns. For one-hot rows and the DFT this is exactly 1.
pub fn coherence(plan: &SamplingPlan, max_freqs: usize) -> f64 {
    let dims = plan.dims();
    let n = dims.len();
    let sqrt_n = (n as f64).sqrt();
    // Row i of Phi*F is the conjugated DFT atom restricted to site s_i, so
    // the inner product with basis column j has magnitude |F[s_i, j]|.
    // Evaluate a stride of columns directly.
    let step = (n / max_freqs.max(1)).max(1);
    let mut max_mag: f64 = 0.0;
    for &(ix, iy, t) in plan.sites().iter().take(64) {
        let mut j = 0;
        while j < n {
            let fx = j % dims.nx;
            let fy = (j / dims.nx) % dims.ny;
            let ft = j / (dims.nx * dims.ny);
            let phase = 2.0 * std::f64::consts::PI
                * (fx as f64 * ix as f64 / dims.nx as f64
                    + fy as f64 * iy as f64 / dims.ny as f64
                    + ft as f64 * t as f64 / dims.nt as f64);
            let entry = Complex64::from_polar(1.0 / sqrt_n, phase);
            max_mag = max_mag.max(entry.norm());
            j += step;
        }
    }
    sqrt_n * max_mag
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cs::Dims3;
    use rand::{Rng, SeedableRng};

    fn random_plan(dims: Dims3, m: usize, seed: u64) -> SamplingPlan {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut indices: Vec<usize> = (0..dims.len()).collect();
        for i in (1..indices.len()).rev() {
            let j = rng.gen_range(0..=i);
            indices.swap(i, j);
        }
        indices.truncate(m);
        let sites = indices
            .iter()
            .map(|&i| {
                let ix = i % dims.nx;
                let iy = (i / dims.nx) % dims.ny;
                let t = i / (dims.nx * dims.ny);
                (ix as u32, iy as u32, t as u32)
            })
            .collect();
        let measurements = (0..m)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        SamplingPlan::new(dims, sites, measurements).unwrap()
    }

    #[test]
    fn zero_theta_zero_measurements() {
        let dims = Dims3::new(8, 8, 4);
        let plan = random_plan(dims, 32, 1);
        let theta = CoeffVolume::zeros(dims);
        assert!(forward(&theta, &plan).iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn dc_atom_fully_sampled_is_inv_sqrt_n() {
        let dims = Dims3::new(4, 4, 2);
        let n = dims.len();
        let sites: Vec<_> = (0..n)
            .map(|i| {
                (
                    (i % 4) as u32,
                    ((i / 4) % 4) as u32,
                    (i / 16) as u32,
                )
            })
            .collect();
        let plan =
            SamplingPlan::new(dims, sites, vec![Complex64::new(0.0, 0.0); n]).unwrap();
        let mut theta = CoeffVolume::zeros(dims);
        theta.values_mut()[0] = Complex64::new(1.0, 0.0);
        let e = forward(&theta, &plan);
        let expect = 1.0 / (n as f64).sqrt();
        for v in e {
            assert!((v.re - expect).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_identity_random_pairs() {
        let dims = Dims3::new(8, 8, 4);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for trial in 0..20 {
            let plan = random_plan(dims, 40, trial);
            let theta_vals: Vec<Complex64> = (0..dims.len())
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let theta = CoeffVolume::new(dims, theta_vals).unwrap();
            let r: Vec<Complex64> = (0..plan.len())
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let lhs: Complex64 = forward(&theta, &plan)
                .iter()
                .zip(&r)
                .map(|(a, b)| a * b.conj())
                .sum();
            let adj = adjoint(&r, &plan);
            let rhs: Complex64 = theta
                .values()
                .iter()
                .zip(adj.values())
                .map(|(a, b)| a * b.conj())
                .sum();
            let scale = lhs.norm().max(rhs.norm()).max(1e-30);
            assert!(
                (lhs - rhs).norm() / scale <= 1e-10,
                "adjoint identity violated: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn coherence_is_one() {
        let dims = Dims3::new(8, 8, 4);
        let plan = random_plan(dims, 32, 3);
        let mu = coherence(&plan, 128);
        assert!((mu - 1.0).abs() < 1e-12);
    }
}
