//! Unitary 3D DFT on complex volumes, built from 1D FFT passes.

use num_complex::Complex64;
use rustfft::{num_complex::Complex, FftPlanner};

use super::Dims3;

/// In-place unitary 3D DFT. `inverse = false` analyzes (forward DFT),
/// `inverse = true` synthesizes. Both directions scale by `1/sqrt(n)` so the
/// transform is unitary and `dft3(idft3(x)) == x`.
pub fn fft3_unitary(data: &mut [Complex64], dims: Dims3, inverse: bool) {
    assert_eq!(data.len(), dims.len());
    let mut planner = FftPlanner::new();
    let dir = |n: usize, planner: &mut FftPlanner<f64>| {
        if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        }
    };

    let (nx, ny, nt) = (dims.nx, dims.ny, dims.nt);

    // X axis: contiguous rows.
    if nx > 1 {
        let fft = dir(nx, &mut planner);
        for row in data.chunks_exact_mut(nx) {
            fft.process(row);
        }
    }

    // Y axis: stride nx within each frame.
    if ny > 1 {
        let fft = dir(ny, &mut planner);
        let mut line = vec![Complex::new(0.0, 0.0); ny];
        for t in 0..nt {
            let frame = &mut data[t * nx * ny..(t + 1) * nx * ny];
            for x in 0..nx {
                for y in 0..ny {
                    line[y] = frame[y * nx + x];
                }
                fft.process(&mut line);
                for y in 0..ny {
                    frame[y * nx + x] = line[y];
                }
            }
        }
    }

    // T axis: stride nx*ny.
    if nt > 1 {
        let fft = dir(nt, &mut planner);
        let stride = nx * ny;
        let mut line = vec![Complex::new(0.0, 0.0); nt];
        for i in 0..stride {
            for t in 0..nt {
                line[t] = data[t * stride + i];
            }
            fft.process(&mut line);
            for t in 0..nt {
                data[t * stride + i] = line[t];
            }
        }
    }

    let scale = 1.0 / (dims.len() as f64).sqrt();
    for v in data.iter_mut() {
        *v *= scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_unitarity() {
        use rand::{Rng, SeedableRng};
        let dims = Dims3::new(8, 4, 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let orig: Vec<Complex64> = (0..dims.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut data = orig.clone();
        fft3_unitary(&mut data, dims, false);
        let energy_before: f64 = orig.iter().map(|v| v.norm_sqr()).sum();
        let energy_after: f64 = data.iter().map(|v| v.norm_sqr()).sum();
        assert!((energy_before - energy_after).abs() < 1e-10 * energy_before);
        fft3_unitary(&mut data, dims, true);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn dc_atom_synthesizes_to_constant() {
        let dims = Dims3::new(4, 4, 2);
        let mut data = vec![Complex64::new(0.0, 0.0); dims.len()];
        data[0] = Complex64::new(1.0, 0.0);
        fft3_unitary(&mut data, dims, true);
        let expect = 1.0 / (dims.len() as f64).sqrt();
        for v in &data {
            assert!((v.re - expect).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
    }
}
