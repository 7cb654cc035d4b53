//! Grayscale frames and the blurred, standardized image distance used to
//! match an observation against a demonstration frame.
//!
//! `dist(u, v) = ‖ N * (ū − v̄) ‖₂` where `ū` is `u` standardized to zero mean
//! and unit population standard deviation, `N` is a normalized Gaussian kernel
//! and `*` is a 2-D convolution with replicated borders.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

/// Width of frames produced by the renderer.
pub const FRAME_WIDTH: usize = 64;
/// Height of frames produced by the renderer.
pub const FRAME_HEIGHT: usize = 48;
/// Default blur standard deviation in pixels.
pub const DEFAULT_SIGMA: f64 = 1.5;

const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum VisionError {
    #[error("frame dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("kernel of size {size} does not fit a {width}x{height} image")]
    KernelTooLarge {
        size: usize,
        width: usize,
        height: usize,
    },
    #[error("cannot average an empty list of frames")]
    EmptyList,
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("invalid kernel sigma {0}")]
    InvalidSigma(f64),
    #[error("PGM error: {0}")]
    Pgm(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Real-valued image, row-major. No range constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, VisionError> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(VisionError::InvalidFrame(format!(
                "{} values for a {width}x{height} field",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn check_same(&self, other: &Field) -> Result<(), VisionError> {
        if self.width != other.width || self.height != other.height {
            return Err(VisionError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Field) -> Result<Field, VisionError> {
        self.check_same(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Field { data, ..*self })
    }

    pub fn add(&self, other: &Field) -> Result<Field, VisionError> {
        self.check_same(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Field { data, ..*self })
    }
}

/// Grayscale image with every pixel finite and inside `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, VisionError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(VisionError::InvalidFrame(format!(
                "{} pixels for a {width}x{height} frame",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels
            .iter()
            .find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0)
        {
            return Err(VisionError::InvalidFrame(format!(
                "pixel value {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds a frame from rows, mostly useful for small hand-written images.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, VisionError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(VisionError::InvalidFrame("ragged rows".into()));
        }
        Self::new(width, height, rows.concat())
    }

    /// Clamps every value into `[0, 1]`; non-finite values become 0.
    pub fn from_clamped(width: usize, height: usize, mut pixels: Vec<f64>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel count mismatch");
        for p in &mut pixels {
            *p = if p.is_finite() { p.clamp(0.0, 1.0) } else { 0.0 };
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Rounds every pixel to the nearest 8-bit level, as an 8-bit camera would.
    pub fn quantized(&self) -> Frame {
        let pixels = self
            .pixels
            .iter()
            .map(|p| (p * 255.0).round() / 255.0)
            .collect();
        Frame { pixels, ..*self }
    }

    pub fn to_field(&self) -> Field {
        Field {
            width: self.width,
            height: self.height,
            data: self.pixels.clone(),
        }
    }

    /// Binary PGM (P5), 8 bit, row-major.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|p| (p * 255.0).round() as u8));
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Frame, VisionError> {
        let mut pos = 0usize;
        let mut tokens = Vec::with_capacity(4);
        while tokens.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(VisionError::Pgm("truncated header".into()));
            }
            tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if tokens[0] != "P5" {
            return Err(VisionError::Pgm(format!("unsupported magic {}", tokens[0])));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| VisionError::Pgm(format!("bad header field {s:?}")))
        };
        let (width, height, maxval) = (parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?);
        if maxval != 255 {
            return Err(VisionError::Pgm(format!("unsupported maxval {maxval}")));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let raster = bytes
            .get(pos..pos + width * height)
            .ok_or_else(|| VisionError::Pgm("truncated raster".into()))?;
        let pixels = raster.iter().map(|b| f64::from(*b) / 255.0).collect();
        Frame::new(width, height, pixels)
    }

    pub fn save_pgm(&self, path: &Path) -> Result<(), VisionError> {
        let mut file = fs::File::create(path)?;
        file.write_all(&self.to_pgm())?;
        Ok(())
    }

    pub fn load_pgm(path: &Path) -> Result<Frame, VisionError> {
        Frame::from_pgm(&fs::read(path)?)
    }
}

/// Normalized, radially symmetric Gaussian kernel of half-width `ceil(3σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    sigma: f64,
    radius: usize,
    // separable factor; the 2-D taps are its outer product
    taps_1d: Vec<f64>,
}

impl Kernel {
    pub fn gaussian(sigma: f64) -> Result<Self, VisionError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(VisionError::InvalidSigma(sigma));
        }
        let radius = (3.0 * sigma).ceil() as usize;
        let mut taps: Vec<f64> = (0..=2 * radius)
            .map(|i| {
                let d = i as f64 - radius as f64;
                (-d * d / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let total: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= total);
        Ok(Self {
            sigma,
            radius,
            taps_1d: taps,
        })
    }

    /// Single unit tap: blurring with it is the identity.
    pub fn identity() -> Self {
        Self {
            sigma: 0.0,
            radius: 0,
            taps_1d: vec![1.0],
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn size(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn taps_1d(&self) -> &[f64] {
        &self.taps_1d
    }

    /// Full `(2k+1)×(2k+1)` tap grid, row-major.
    pub fn taps(&self) -> Vec<f64> {
        let n = self.size();
        let mut out = Vec::with_capacity(n * n);
        for a in &self.taps_1d {
            for b in &self.taps_1d {
                out.push(a * b);
            }
        }
        out
    }
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::gaussian(DEFAULT_SIGMA).expect("default sigma is valid")
    }
}

/// Standardizes to zero mean and unit population standard deviation.
/// Images with standard deviation below 1e-12 map to all zeros.
pub fn normalize(frame: &Frame) -> Field {
    normalize_values(frame.width, frame.height, &frame.pixels)
}

fn normalize_values(width: usize, height: usize, values: &[f64]) -> Field {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let data = if std < STD_FLOOR {
        vec![0.0; values.len()]
    } else {
        values.iter().map(|v| (v - mean) / std).collect()
    };
    Field {
        width,
        height,
        data,
    }
}

/// Convolves with `kernel`, replicating border pixels.
pub fn blur(field: &Field, kernel: &Kernel) -> Result<Field, VisionError> {
    let (w, h) = (field.width, field.height);
    if kernel.size() > w || kernel.size() > h {
        return Err(VisionError::KernelTooLarge {
            size: kernel.size(),
            width: w,
            height: h,
        });
    }
    if kernel.radius == 0 {
        let t = kernel.taps_1d[0];
        let data = field.data.iter().map(|v| v * t * t).collect();
        return Ok(Field { data, ..*field });
    }
    let r = kernel.radius as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

    let mut horizontal = vec![0.0; w * h];
    for y in 0..h {
        let row = &field.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, tap) in kernel.taps_1d.iter().enumerate() {
                acc += tap * row[clamp(x as isize + k as isize - r, w)];
            }
            horizontal[y * w + x] = acc;
        }
    }
    let mut data = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, tap) in kernel.taps_1d.iter().enumerate() {
                acc += tap * horizontal[clamp(y as isize + k as isize - r, h) * w + x];
            }
            data[y * w + x] = acc;
        }
    }
    Ok(Field {
        width: w,
        height: h,
        data,
    })
}

/// Euclidean norm of the blurred difference of the standardized frames.
pub fn dist(u: &Frame, v: &Frame, kernel: &Kernel) -> Result<f64, VisionError> {
    if u.width != v.width || u.height != v.height {
        return Err(VisionError::DimensionMismatch(
            u.width, u.height, v.width, v.height,
        ));
    }
    let diff = normalize(u).sub(&normalize(v))?;
    Ok(blur(&diff, kernel)?.norm())
}

/// Pixelwise arithmetic mean.
pub fn average(frames: &[Frame]) -> Result<Frame, VisionError> {
    let first = frames.first().ok_or(VisionError::EmptyList)?;
    let mut acc = vec![0.0; first.pixels.len()];
    for f in frames {
        if f.width != first.width || f.height != first.height {
            return Err(VisionError::DimensionMismatch(
                first.width,
                first.height,
                f.width,
                f.height,
            ));
        }
        for (a, p) in acc.iter_mut().zip(&f.pixels) {
            *a += p;
        }
    }
    let n = frames.len() as f64;
    Ok(Frame::from_clamped(
        first.width,
        first.height,
        acc.into_iter().map(|a| a / n).collect(),
    ))
}
