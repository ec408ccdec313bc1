//! Image and video containers, interpolation, warping and sequence I/O.
//!
//! Frames are grayscale intensity grids in `[0, 1]`, stored row-major as
//! `f32`. All resampling uses bilinear interpolation with clamp-to-edge
//! boundary handling so that warped frames never pick up dark borders.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Luma weights used when converting color inputs to grayscale (ITU-R
/// BT.601: 0.299 R + 0.587 G + 0.114 B).
pub const LUMA_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

/// A 2D displacement in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Displacement2 {
    pub dx: f32,
    pub dy: f32,
}

impl Displacement2 {
    pub fn new(dx: f32, dy: f32) -> Self {
        Self { dx, dy }
    }
}

/// A grayscale frame with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Frame {
    /// Creates a frame from raw intensities, clamping every value to `[0, 1]`.
    /// Non-finite inputs are rejected.
    pub fn from_data(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} = {} samples", width, height, width * height),
                got: format!("{} samples", data.len()),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite intensity at index {pos}"
            )));
        }
        let data = data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v.clamp(0.0, 1.0);
    }

    /// Bilinear sample at a real-valued coordinate. Coordinates outside the
    /// frame use clamp-to-edge replication; this is a total function.
    #[inline]
    pub fn sample_bilinear(&self, x: f32, y: f32) -> f32 {
        sample_bilinear_raw(&self.data, self.width, self.height, x, y)
    }

    /// Warps this frame by a per-pixel displacement grid:
    /// `out(x, y) = self(x + dx(x,y), y + dy(x,y))` (inverse mapping).
    pub fn warp(&self, field: &DisplacementGrid) -> Result<Frame> {
        if field.width != self.width || field.height != self.height {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.width, self.height),
                got: format!("{}x{}", field.width, field.height),
            });
        }
        let mut out = vec![0.0f32; self.width * self.height];
        for y in 0..self.height {
            for x in 0..self.width {
                let i = y * self.width + x;
                out[i] = self.sample_bilinear(x as f32 + field.dx[i], y as f32 + field.dy[i]);
            }
        }
        Ok(Frame {
            width: self.width,
            height: self.height,
            data: out,
        })
    }
}

#[inline]
pub(crate) fn sample_bilinear_raw(data: &[f32], width: usize, height: usize, x: f32, y: f32) -> f32 {
    let xc = x.clamp(0.0, (width - 1) as f32);
    let yc = y.clamp(0.0, (height - 1) as f32);
    let x0 = xc.floor() as usize;
    let y0 = yc.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = xc - x0 as f32;
    let fy = yc - y0 as f32;
    let p00 = data[y0 * width + x0];
    let p10 = data[y0 * width + x1];
    let p01 = data[y1 * width + x0];
    let p11 = data[y1 * width + x1];
    let top = p00 + (p10 - p00) * fx;
    let bot = p01 + (p11 - p01) * fx;
    top + (bot - top) * fy
}

/// A per-pixel displacement grid for one frame.
#[derive(Debug, Clone)]
pub struct DisplacementGrid {
    pub width: usize,
    pub height: usize,
    pub dx: Vec<f32>,
    pub dy: Vec<f32>,
}

impl DisplacementGrid {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            dx: vec![0.0; width * height],
            dy: vec![0.0; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, d: Displacement2) -> Self {
        Self {
            width,
            height,
            dx: vec![d.dx; width * height],
            dy: vec![d.dy; width * height],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Displacement2 {
        let i = y * self.width + x;
        Displacement2::new(self.dx[i], self.dy[i])
    }

    /// Negates every displacement in place.
    pub fn negate(&mut self) {
        for v in &mut self.dx {
            *v = -*v;
        }
        for v in &mut self.dy {
            *v = -*v;
        }
    }
}

/// An ordered sequence of equally sized frames.
#[derive(Debug, Clone)]
pub struct Video {
    frames: Vec<Frame>,
    fps: f32,
}

impl Video {
    pub fn new(frames: Vec<Frame>, fps: f32) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "video needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        let (w, h) = (frames[0].width(), frames[0].height());
        for (i, f) in frames.iter().enumerate() {
            if f.width() != w || f.height() != h {
                return Err(Error::BadFrame {
                    index: i,
                    reason: format!(
                        "dimensions {}x{} differ from first frame {}x{}",
                        f.width(),
                        f.height(),
                        w,
                        h
                    ),
                });
            }
        }
        Ok(Self { frames, fps })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &Frame {
        &self.frames[t]
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> f32 {
        self.fps
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }
}

/// Per-pixel arithmetic mean across time.
pub fn mean_frame(video: &Video) -> Frame {
    let (w, h) = (video.width(), video.height());
    let mut acc = vec![0.0f64; w * h];
    for f in video.frames() {
        for (a, v) in acc.iter_mut().zip(f.data()) {
            *a += *v as f64;
        }
    }
    let n = video.len() as f64;
    let data = acc.into_iter().map(|a| (a / n) as f32).collect();
    Frame::from_data(w, h, data).expect("mean of valid frames is valid")
}

/// Per-pixel median across time. For an even number of frames the average
/// of the two middle values is used.
pub fn median_frame(video: &Video) -> Frame {
    let (w, h) = (video.width(), video.height());
    let t = video.len();
    let mut column = vec![0.0f32; t];
    let mut data = vec![0.0f32; w * h];
    for i in 0..w * h {
        for (k, f) in video.frames().iter().enumerate() {
            column[k] = f.data()[i];
        }
        column.sort_by(|a, b| a.total_cmp(b));
        data[i] = if t % 2 == 1 {
            column[t / 2]
        } else {
            0.5 * (column[t / 2 - 1] + column[t / 2])
        };
    }
    Frame::from_data(w, h, data).expect("median of valid frames is valid")
}

#[derive(Debug, Serialize, Deserialize)]
struct SequenceManifest {
    fps: f32,
    count: usize,
    width: usize,
    height: usize,
    bit_depth: u8,
}

fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.png")
}

/// Saves a video as a directory of zero-padded 16-bit grayscale PNGs plus a
/// small JSON manifest. The round-trip is bit-exact at the stored bit depth.
pub fn save_sequence(video: &Video, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest = SequenceManifest {
        fps: video.fps(),
        count: video.len(),
        width: video.width(),
        height: video.height(),
        bit_depth: 16,
    };
    let manifest_path = dir.join("manifest.json");
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    for (t, frame) in video.frames().iter().enumerate() {
        let path = dir.join(frame_file_name(t));
        let buf: Vec<u16> = frame
            .data()
            .iter()
            .map(|v| (v * 65535.0).round() as u16)
            .collect();
        let img = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(
            frame.width() as u32,
            frame.height() as u32,
            buf,
        )
        .expect("buffer size matches dims");
        img.save(&path).map_err(|e| Error::SequenceIo {
            path: path.clone(),
            reason: e.to_string(),
        })?;
    }
    Ok(())
}

/// Loads a single image file as a grayscale frame. Color inputs are reduced
/// with the BT.601 luma weights; intensities are normalized to `[0, 1]`.
pub fn load_frame(path: &Path) -> Result<Frame> {
    let img = image::open(path).map_err(|e| Error::SequenceIo {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f32> = match img {
        image::DynamicImage::ImageLuma8(g) => {
            g.into_raw().into_iter().map(|v| v as f32 / 255.0).collect()
        }
        image::DynamicImage::ImageLuma16(g) => g
            .into_raw()
            .into_iter()
            .map(|v| v as f32 / 65535.0)
            .collect(),
        other => {
            let rgb = other.to_rgb32f();
            rgb.pixels()
                .map(|p| {
                    LUMA_WEIGHTS[0] * p.0[0] + LUMA_WEIGHTS[1] * p.0[1] + LUMA_WEIGHTS[2] * p.0[2]
                })
                .collect()
        }
    };
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::SequenceIo {
            path: path.to_path_buf(),
            reason: format!("non-finite intensity at index {pos}"),
        });
    }
    Frame::from_data(w, h, data)
}

/// Loads a frame sequence saved by [`save_sequence`]. A gap in the frame
/// numbering produces an error naming the missing index.
pub fn load_sequence(dir: &Path) -> Result<Video> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::SequenceIo {
        path: manifest_path.clone(),
        reason: e.to_string(),
    })?;
    let manifest: SequenceManifest =
        serde_json::from_str(&text).map_err(|e| Error::SequenceIo {
            path: manifest_path,
            reason: e.to_string(),
        })?;
    let mut frames = Vec::with_capacity(manifest.count);
    for t in 0..manifest.count {
        let path = dir.join(frame_file_name(t));
        if !path.exists() {
            return Err(Error::BadFrame {
                index: t,
                reason: format!("missing file {}", path.display()),
            });
        }
        let frame = load_frame(&path).map_err(|e| Error::BadFrame {
            index: t,
            reason: e.to_string(),
        })?;
        if frame.width() != manifest.width || frame.height() != manifest.height {
            return Err(Error::BadFrame {
                index: t,
                reason: format!(
                    "dimensions {}x{} differ from manifest {}x{}",
                    frame.width(),
                    frame.height(),
                    manifest.width,
                    manifest.height
                ),
            });
        }
        frames.push(frame);
    }
    Video::new(frames, manifest.fps)
}

/// Saves a single frame as a 16-bit grayscale PNG.
pub fn save_frame(frame: &Frame, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let buf: Vec<u16> = frame
        .data()
        .iter()
        .map(|v| (v * 65535.0).round() as u16)
        .collect();
    let img = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(
        frame.width() as u32,
        frame.height() as u32,
        buf,
    )
    .expect("buffer size matches dims");
    img.save(path).map_err(|e| Error::SequenceIo {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
