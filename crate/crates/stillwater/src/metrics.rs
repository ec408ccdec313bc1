//! Quantitative evaluation: RMSE, normalized mutual information, SSIM,
//! motion reduction, and the scene-difficulty measure sigma_motion.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::imaging::Frame;
use crate::tracking::{DisplacementTrajectory, Trajectory};

/// Scores for one restored video against ground truth.
#[derive(Debug, Clone)]
pub struct QualityReport {
    pub rmse: f64,
    pub nmi: f64,
    pub ssim: f64,
    /// Motion reduction in percent; `None` when no re-tracked trajectories
    /// were available.
    pub motion_reduction: Option<f64>,
    /// RMS tracked displacement of the distorted input, in pixels.
    pub sigma_motion: Option<f64>,
    pub nmi_bins: usize,
    pub ssim_window: usize,
}

impl QualityReport {
    /// Flat `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "rmse={:.6}", self.rmse);
        let _ = writeln!(s, "nmi={:.6}", self.nmi);
        let _ = writeln!(s, "ssim={:.6}", self.ssim);
        match self.motion_reduction {
            Some(mr) => {
                let _ = writeln!(s, "motion_reduction_percent={mr:.4}");
            }
            None => {
                let _ = writeln!(s, "motion_reduction_percent=");
            }
        }
        match self.sigma_motion {
            Some(sm) => {
                let _ = writeln!(s, "sigma_motion_px={sm:.4}");
            }
            None => {
                let _ = writeln!(s, "sigma_motion_px=");
            }
        }
        let _ = writeln!(s, "nmi_bins={}", self.nmi_bins);
        let _ = writeln!(s, "ssim_window={}", self.ssim_window);
        s
    }

    pub const CSV_HEADER: &'static str = "rmse,nmi,ssim,motion_reduction_percent,sigma_motion_px";

    /// One CSV row matching [`Self::CSV_HEADER`].
    pub fn to_csv_row(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{},{}",
            self.rmse,
            self.nmi,
            self.ssim,
            self.motion_reduction
                .map(|v| format!("{v:.4}"))
                .unwrap_or_default(),
            self.sigma_motion
                .map(|v| format!("{v:.4}"))
                .unwrap_or_default(),
        )
    }
}

/// Relative root-mean-square error: `||a - truth||_F / ||truth||_F`.
pub fn rmse(restored: &Frame, truth: &Frame) -> Result<f64> {
    check_dims(restored, truth)?;
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for (&r, &t) in restored.data().iter().zip(truth.data()) {
        num += ((r - t) as f64).powi(2);
        den += (t as f64).powi(2);
    }
    if den == 0.0 {
        return Err(Error::InvalidInput("all-zero reference image".into()));
    }
    Ok((num / den).sqrt())
}

/// Normalized mutual information `(H(A) + H(B)) / H(A, B)` from a joint
/// histogram with `bins` equal-width bins over [0, 1]. Ranges over [1, 2].
pub fn nmi(a: &Frame, b: &Frame, bins: usize) -> Result<f64> {
    check_dims(a, b)?;
    if bins < 2 {
        return Err(Error::InvalidInput("need at least 2 bins".into()));
    }
    let mut joint = vec![0.0f64; bins * bins];
    let n = a.data().len() as f64;
    let scale = bins as f32;
    for (&va, &vb) in a.data().iter().zip(b.data()) {
        let ia = ((va * scale) as usize).min(bins - 1);
        let ib = ((vb * scale) as usize).min(bins - 1);
        joint[ia * bins + ib] += 1.0;
    }
    let mut pa = vec![0.0f64; bins];
    let mut pb = vec![0.0f64; bins];
    let mut h_ab = 0.0f64;
    for ia in 0..bins {
        for ib in 0..bins {
            let p = joint[ia * bins + ib] / n;
            pa[ia] += p;
            pb[ib] += p;
            if p > 0.0 {
                h_ab -= p * p.log2();
            }
        }
    }
    let entropy = |p: &[f64]| -> f64 {
        p.iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| -v * v.log2())
            .sum()
    };
    let h_a = entropy(&pa);
    let h_b = entropy(&pb);
    if h_ab == 0.0 {
        // both images constant: identical distributions by construction
        return Ok(2.0);
    }
    Ok((h_a + h_b) / h_ab)
}

/// Mean structural similarity with the standard 11x11 Gaussian window
/// (sigma 1.5), `C1 = (0.01)^2`, `C2 = (0.03)^2` on a unit dynamic range.
pub fn ssim(a: &Frame, b: &Frame) -> Result<f64> {
    const WINDOW: usize = 11;
    const SIGMA: f32 = 1.5;
    const C1: f64 = 0.01 * 0.01;
    const C2: f64 = 0.03 * 0.03;
    check_dims(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < WINDOW || h < WINDOW {
        return Err(Error::InvalidInput(format!(
            "images must be at least {WINDOW}x{WINDOW}"
        )));
    }
    let kernel: Vec<f32> = {
        let r = (WINDOW / 2) as i64;
        let mut k: Vec<f32> = (-r..=r)
            .map(|i| (-(i * i) as f32 / (2.0 * SIGMA * SIGMA)).exp())
            .collect();
        let s: f32 = k.iter().sum();
        for v in &mut k {
            *v /= s;
        }
        k
    };
    let n = w * h;
    let da = a.data();
    let db = b.data();
    let mut aa = vec![0.0f32; n];
    let mut bb = vec![0.0f32; n];
    let mut ab = vec![0.0f32; n];
    for i in 0..n {
        aa[i] = da[i] * da[i];
        bb[i] = db[i] * db[i];
        ab[i] = da[i] * db[i];
    }
    let blur = |v: &[f32]| crate::tracking::blur_separable(v, w, h, &kernel);
    let mu_a = blur(da);
    let mu_b = blur(db);
    let m_aa = blur(&aa);
    let m_bb = blur(&bb);
    let m_ab = blur(&ab);

    // valid region only: windows fully inside the image
    let r = WINDOW / 2;
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for y in r..h - r {
        for x in r..w - r {
            let i = y * w + x;
            let ma = mu_a[i] as f64;
            let mb = mu_b[i] as f64;
            let va = (m_aa[i] as f64 - ma * ma).max(0.0);
            let vb = (m_bb[i] as f64 - mb * mb).max(0.0);
            let cov = m_ab[i] as f64 - ma * mb;
            let v = ((2.0 * ma * mb + C1) * (2.0 * cov + C2))
                / ((ma * ma + mb * mb + C1) * (va + vb + C2));
            sum += v;
            count += 1;
        }
    }
    Ok(sum / count as f64)
}

/// Motion reduction in percent:
/// `100 * median_i ||d_after_i - d_before_i|| / ||d_before_i||`, where the
/// norms stack each trajectory's per-frame offsets. Residual motion of zero
/// gives 100%; unchanged motion gives 0%.
pub fn motion_reduction(
    before: &[DisplacementTrajectory],
    after: &[DisplacementTrajectory],
) -> Result<f64> {
    if before.len() != after.len() || before.is_empty() {
        return Err(Error::InvalidInput(format!(
            "mismatched trajectory sets: {} vs {}",
            before.len(),
            after.len()
        )));
    }
    let mut ratios = Vec::with_capacity(before.len());
    for (db, da) in before.iter().zip(after) {
        if db.offsets.len() != da.offsets.len() {
            return Err(Error::InvalidInput(
                "trajectories have different lengths".into(),
            ));
        }
        let mut diff = 0.0f64;
        let mut norm = 0.0f64;
        for (&(bx, by), &(ax, ay)) in db.offsets.iter().zip(&da.offsets) {
            diff += (ax as f64 - bx as f64).powi(2) + (ay as f64 - by as f64).powi(2);
            norm += (bx as f64).powi(2) + (by as f64).powi(2);
        }
        if norm == 0.0 {
            return Err(Error::InvalidInput(
                "reference trajectory has zero motion".into(),
            ));
        }
        ratios.push((diff / norm).sqrt());
    }
    ratios.sort_by(|a, b| a.total_cmp(b));
    let m = ratios.len();
    let median = if m % 2 == 1 {
        ratios[m / 2]
    } else {
        0.5 * (ratios[m / 2 - 1] + ratios[m / 2])
    };
    Ok(100.0 * median)
}

/// RMS displacement magnitude across all valid trajectories:
/// `sqrt(sum_i sum_t ((x_it - cx_i)^2 + (y_it - cy_i)^2) / (N T - 1))`
/// with `(cx_i, cy_i)` each trajectory's mean position.
pub fn sigma_motion(trajs: &[Trajectory]) -> Result<f64> {
    let valid: Vec<&Trajectory> = trajs.iter().filter(|t| t.valid).collect();
    if valid.is_empty() {
        return Err(Error::NoSeeds);
    }
    let t_len = valid[0].points.len();
    let nt = valid.len() * t_len;
    if nt <= 1 {
        return Err(Error::InvalidInput(
            "need more than one tracked sample".into(),
        ));
    }
    let mut sum = 0.0f64;
    for traj in &valid {
        let n = traj.points.len() as f64;
        let (cx, cy) = traj
            .points
            .iter()
            .fold((0.0f64, 0.0f64), |(ax, ay), &(x, y)| {
                (ax + x as f64 / n, ay + y as f64 / n)
            });
        for &(x, y) in &traj.points {
            sum += (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        }
    }
    Ok((sum / (nt as f64 - 1.0)).sqrt())
}

fn check_dims(a: &Frame, b: &Frame) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", a.width(), a.height()),
            got: format!("{}x{}", b.width(), b.height()),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn textured(w: usize, h: usize, f: impl Fn(f32, f32) -> f32) -> Frame {
        let data = (0..w * h)
            .map(|i| f((i % w) as f32, (i / w) as f32))
            .collect();
        Frame::from_data(w, h, data).unwrap()
    }

    fn sample_image() -> Frame {
        textured(64, 64, |x, y| {
            0.5 + 0.3 * (x * 0.2).sin() * (y * 0.17).cos()
        })
    }

    #[test]
    fn rmse_identity_and_homogeneity() {
        let img = sample_image();
        assert_eq!(rmse(&img, &img).unwrap(), 0.0);
        let scaled = textured(64, 64, |x, y| {
            (0.5 + 0.3 * (x * 0.2).sin() * (y * 0.17).cos()) * 0.9
        });
        // restored = 0.9 * truth -> relative error 1/9 against the scaled truth
        let r = rmse(&img, &scaled).unwrap();
        assert!((r - 1.0 / 9.0).abs() < 1e-5, "rmse {r}");
    }

    #[test]
    fn rmse_rejects_zero_truth() {
        let img = sample_image();
        let zero = Frame::zeros(64, 64);
        assert!(rmse(&img, &zero).is_err());
    }

    #[test]
    fn nmi_identical_is_two() {
        let img = sample_image();
        let v = nmi(&img, &img, 256).unwrap();
        assert!((v - 2.0).abs() < 1e-12, "nmi {v}");
    }

    #[test]
    fn nmi_independent_noise_near_one() {
        // oracle: independent uniform noise -> joint entropy splits, NMI -> 1
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 512 * 512;
        let a: Vec<f32> = (0..n).map(|_| rng.gen::<f32>()).collect();
        let b: Vec<f32> = (0..n).map(|_| rng.gen::<f32>()).collect();
        let fa = Frame::from_data(512, 512, a).unwrap();
        let fb = Frame::from_data(512, 512, b).unwrap();
        let v = nmi(&fa, &fb, 256).unwrap();
        assert!((v - 1.0).abs() < 0.02, "nmi {v}");
    }

    #[test]
    fn nmi_symmetry_and_relabeling() {
        let a = sample_image();
        let b = textured(64, 64, |x, y| 0.4 + 0.2 * ((x + y) * 0.1).sin());
        assert!((nmi(&a, &b, 256).unwrap() - nmi(&b, &a, 256).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ssim_identical_is_one() {
        let img = sample_image();
        let v = ssim(&img, &img).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "ssim {v}");
    }

    #[test]
    fn ssim_negative_pattern() {
        // structured 0.5 +/- delta pattern against its negative; oracle check
        // at one interior window using the direct formula
        let delta = 0.2f32;
        let a = textured(32, 32, |x, y| {
            0.5 + delta * ((x * 0.7).sin() * (y * 0.6).cos()).signum()
        });
        let b = textured(32, 32, |x, y| {
            0.5 - delta * ((x * 0.7).sin() * (y * 0.6).cos()).signum()
        });
        let v = ssim(&a, &b).unwrap();
        assert!(v < 0.0, "ssim {v}");

        // direct formula at window centered (16, 16): mu_a = mu_b, cov = -var
        let kernel: Vec<f64> = (-5i64..=5)
            .map(|i| (-(i * i) as f64 / (2.0 * 1.5 * 1.5)).exp())
            .collect();
        let ks: f64 = kernel.iter().sum();
        let mut mu_a = 0.0;
        let mut mu_b = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        let mut sab = 0.0;
        for (kj, wj) in kernel.iter().enumerate() {
            for (ki, wi) in kernel.iter().enumerate() {
                let wgt = wi * wj / (ks * ks);
                let va = a.get(11 + ki, 11 + kj) as f64;
                let vb = b.get(11 + ki, 11 + kj) as f64;
                mu_a += wgt * va;
                mu_b += wgt * vb;
                saa += wgt * va * va;
                sbb += wgt * vb * vb;
                sab += wgt * va * vb;
            }
        }
        let var_a = saa - mu_a * mu_a;
        let var_b = sbb - mu_b * mu_b;
        let cov = sab - mu_a * mu_b;
        let c1 = 0.0001;
        let c2 = 0.0009;
        let local = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
            / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        assert!(local < 0.0, "oracle window ssim {local}");
    }

    #[test]
    fn ssim_luminance_shift_below_one() {
        let a = sample_image();
        let b = textured(64, 64, |x, y| {
            0.55 + 0.3 * (x * 0.2).sin() * (y * 0.17).cos()
        });
        let v = ssim(&a, &b).unwrap();
        assert!(v > 0.0 && v < 1.0, "ssim {v}");
    }

    #[test]
    fn ssim_symmetry() {
        let a = sample_image();
        let b = textured(64, 64, |x, y| 0.4 + 0.25 * ((x - y) * 0.13).sin());
        let d = (ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs();
        assert!(d < 1e-12);
    }

    fn dt(offsets: Vec<(f32, f32)>) -> DisplacementTrajectory {
        DisplacementTrajectory {
            anchor: (0.0, 0.0),
            offsets,
        }
    }

    #[test]
    fn motion_reduction_arithmetic_cases() {
        let before = vec![
            dt(vec![(1.0, 0.0), (-1.0, 0.0)]),
            dt(vec![(0.0, 2.0), (0.0, -2.0)]),
        ];
        // perfect restoration: zero residual motion
        let after_zero = vec![dt(vec![(0.0, 0.0); 2]), dt(vec![(0.0, 0.0); 2])];
        assert!((motion_reduction(&before, &after_zero).unwrap() - 100.0).abs() < 1e-12);
        // no restoration
        assert!(motion_reduction(&before, &before).unwrap().abs() < 1e-12);
        // 5% residual
        let after_small = vec![
            dt(vec![(0.05, 0.0), (-0.05, 0.0)]),
            dt(vec![(0.0, 0.1), (0.0, -0.1)]),
        ];
        // 0.05 is not exactly representable; tolerance covers f32 rounding
        assert!((motion_reduction(&before, &after_small).unwrap() - 95.0).abs() < 1e-6);
    }

    #[test]
    fn motion_reduction_rejects_mismatch() {
        let before = vec![dt(vec![(1.0, 0.0)])];
        assert!(motion_reduction(&before, &[]).is_err());
        let zero_ref = vec![dt(vec![(0.0, 0.0)])];
        assert!(motion_reduction(&zero_ref, &before).is_err());
    }

    #[test]
    fn sigma_motion_static_zero() {
        let trajs = vec![Trajectory {
            points: vec![(5.0, 5.0); 10],
            valid: true,
        }];
        assert_eq!(sigma_motion(&trajs).unwrap(), 0.0);
    }

    #[test]
    fn sigma_motion_closed_form() {
        // one point alternating +/- r in x: sigma = r * sqrt(T / (T - 1))
        let r = 3.0f32;
        let t = 8usize;
        let points: Vec<(f32, f32)> = (0..t)
            .map(|k| (10.0 + if k % 2 == 0 { r } else { -r }, 4.0))
            .collect();
        let trajs = vec![Trajectory {
            points,
            valid: true,
        }];
        let expect = r as f64 * ((t as f64) / (t as f64 - 1.0)).sqrt();
        let got = sigma_motion(&trajs).unwrap();
        assert!((got - expect).abs() < 1e-9, "sigma {got} expect {expect}");
    }

    #[test]
    fn sigma_motion_needs_valid_trajectories() {
        let trajs = vec![Trajectory {
            points: vec![(0.0, 0.0); 4],
            valid: false,
        }];
        assert!(sigma_motion(&trajs).is_err());
    }

    #[test]
    fn report_serialization() {
        let rep = QualityReport {
            rmse: 0.05,
            nmi: 1.25,
            ssim: 0.9,
            motion_reduction: Some(92.5),
            sigma_motion: Some(6.1),
            nmi_bins: 256,
            ssim_window: 11,
        };
        let text = rep.to_text();
        assert!(text.contains("rmse=0.050000"));
        assert!(text.contains("motion_reduction_percent=92.5000"));
        let row = rep.to_csv_row();
        assert_eq!(row.split(',').count(), QualityReport::CSV_HEADER.split(',').count());
    }
}
