//! Randomized invariant checks for the measurement operator and metrics.

use num_complex::Complex64;
use proptest::prelude::*;
use stillwater::cs::{adjoint, fft3_unitary, forward, CoeffVolume, Dims3, SamplingPlan};
use stillwater::imaging::Frame;
use stillwater::metrics::{nmi, rmse, ssim};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// <forward(theta), e> == <theta, adjoint(e)> for any theta, e and
    /// sampling sites: the operator pair really is an adjoint pair.
    #[test]
    fn forward_adjoint_inner_products_match(
        (nx, ny, nt) in (2usize..6, 2usize..6, 2usize..6),
        site_seed in proptest::collection::vec(0usize..1000, 1..20),
        seed in any::<u64>(),
    ) {
        let dims = Dims3::new(nx, ny, nt);
        let mut sites: Vec<(u32, u32, u32)> = site_seed
            .iter()
            .map(|&s| {
                let idx = s % dims.len();
                let t = idx / (nx * ny);
                let rem = idx % (nx * ny);
                ((rem % nx) as u32, (rem / nx) as u32, t as u32)
            })
            .collect();
        sites.sort_unstable();
        sites.dedup();

        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let theta = CoeffVolume::new(
            dims,
            (0..dims.len())
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap();
        let e: Vec<Complex64> = (0..sites.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let plan = SamplingPlan::new(dims, sites, e.clone()).unwrap();

        let ax = forward(&theta, &plan);
        let aty = adjoint(&e, &plan);
        let lhs: Complex64 = ax.iter().zip(&e).map(|(a, b)| a * b.conj()).sum();
        let rhs: Complex64 = theta
            .values()
            .iter()
            .zip(aty.values())
            .map(|(a, b)| a * b.conj())
            .sum();
        prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
    }

    /// The unitary 3D DFT preserves the l2 norm in both directions and
    /// round-trips to the input.
    #[test]
    fn fft3_is_unitary(
        (nx, ny, nt) in (2usize..8, 2usize..8, 2usize..8),
        seed in any::<u64>(),
    ) {
        let dims = Dims3::new(nx, ny, nt);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let orig: Vec<Complex64> = (0..dims.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

        let mut data = orig.clone();
        fft3_unitary(&mut data, dims, false);
        prop_assert!((norm(&data) - norm(&orig)).abs() < 1e-9 * (1.0 + norm(&orig)));
        fft3_unitary(&mut data, dims, true);
        for (a, b) in data.iter().zip(&orig) {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }

    /// Image metrics at their fixed points: a frame compared with itself has
    /// zero RMSE, unit SSIM, and NMI is symmetric in its arguments.
    #[test]
    fn metric_identities(
        pixels in proptest::collection::vec(0.0f32..1.0, 16 * 16),
        other in proptest::collection::vec(0.0f32..1.0, 16 * 16),
    ) {
        let a = Frame::from_data(16, 16, pixels).unwrap();
        let b = Frame::from_data(16, 16, other).unwrap();
        prop_assert!(rmse(&a, &a).unwrap() < 1e-12);
        prop_assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-6);
        let ab = nmi(&a, &b, 64).unwrap();
        let ba = nmi(&b, &a, 64).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
    }
}
