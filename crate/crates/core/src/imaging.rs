//! Grayscale frames, Gaussian pyramids, gradients and sub-pixel sampling.
//!
//! Intensities are kept as `f64` in `[0, 255]` after decoding so repeated
//! blurs never accumulate quantization error. Every neighborhood operation
//! clamps to the edge.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImagingError {
    #[error("frame must be at least 1x1 with width*height intensities (got {width}x{height}, {len} values)")]
    BadShape {
        width: usize,
        height: usize,
        len: usize,
    },
    #[error("intensity {value} at index {index} is not finite or outside [0, 255]")]
    BadIntensity { index: usize, value: f64 },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("pyramid too deep: level {level} would be {width}x{height}, below the 8x8 minimum")]
    PyramidTooDeep {
        level: usize,
        width: usize,
        height: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Smallest side length allowed for the coarsest pyramid level.
pub const MIN_LEVEL_SIDE: usize = 8;

/// A row-major grid of reals with no range constraint (gradients, temporal
/// differences).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// One grayscale video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<f64>,
    pub frame_index: u64,
}

impl GrayFrame {
    pub fn new(
        width: usize,
        height: usize,
        data: Vec<f64>,
        frame_index: u64,
    ) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(ImagingError::BadShape {
                width,
                height,
                len: data.len(),
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 255.0)
        {
            return Err(ImagingError::BadIntensity { index, value });
        }
        Ok(Self {
            width,
            height,
            data,
            frame_index,
        })
    }

    /// Builds a frame from `f(x, y)`, clamping the result into `[0, 255]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        frame_index: u64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        assert!(width > 0 && height > 0, "frame must be non-empty");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                data.push(if v.is_nan() { 0.0 } else { v.clamp(0.0, 255.0) });
            }
        }
        Self {
            width,
            height,
            data,
            frame_index,
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self::from_fn(width, height, 0, |_, _| value)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn intensities(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }

    /// Bilinear interpolation at `(x, y)`; coordinates are clamped to the
    /// frame so samples outside return the nearest border value.
    #[inline]
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    pub fn same_shape(&self, other: &GrayFrame) -> Result<(), ImagingError> {
        if self.width != other.width || self.height != other.height {
            return Err(ImagingError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Copies the `width`×`height` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Self {
        assert!(x0 + width <= self.width && y0 + height <= self.height);
        Self::from_fn(width, height, self.frame_index, |x, y| {
            self.get(x0 + x, y0 + y)
        })
    }
}

/// Free-function form of [`GrayFrame::sample_bilinear`].
pub fn sample_bilinear(frame: &GrayFrame, x: f64, y: f64) -> f64 {
    frame.sample_bilinear(x, y)
}

/// Normalized 1-D Gaussian taps for offsets `-radius..=radius`.
pub fn gaussian_kernel(radius: usize, sigma: f64) -> Vec<f64> {
    let r = radius as isize;
    let mut taps: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable Gaussian blur with edge clamping.
pub fn gaussian_blur(
    frame: &GrayFrame,
    kernel_radius: usize,
    sigma: f64,
) -> Result<GrayFrame, ImagingError> {
    if kernel_radius < 1 {
        return Err(ImagingError::InvalidParameter("kernel_radius must be >= 1"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(ImagingError::InvalidParameter("sigma must be > 0"));
    }
    let taps = gaussian_kernel(kernel_radius, sigma);
    let r = kernel_radius as isize;
    let (w, h) = (frame.width, frame.height);

    let mut horizontal = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * frame.get_clamped(x as isize + k as isize - r, y as isize);
            }
            horizontal[y * w + x] = acc;
        }
    }

    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let sy = (y as isize + k as isize - r).clamp(0, h as isize - 1) as usize;
                acc += t * horizontal[sy * w + x];
            }
            // Convex combination of [0, 255] values; clamp only absorbs rounding.
            out[y * w + x] = acc.clamp(0.0, 255.0);
        }
    }
    Ok(GrayFrame {
        width: w,
        height: h,
        data: out,
        frame_index: frame.frame_index,
    })
}

/// Multi-scale stack, level 0 being the original frame.
#[derive(Debug, Clone)]
pub struct ImagePyramid {
    pub levels: Vec<GrayFrame>,
    pub scale_factor: f64,
}

/// Blur parameters applied before each downsampling step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlurParams {
    pub radius: usize,
    pub sigma: f64,
}

impl Default for BlurParams {
    fn default() -> Self {
        Self {
            radius: 2,
            sigma: 1.0,
        }
    }
}

impl ImagePyramid {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Level `level` coordinates of a level-0 point.
    pub fn to_level(&self, level: usize, x: f64, y: f64) -> (f64, f64) {
        let s = self.scale_factor.powi(level as i32);
        (x * s, y * s)
    }
}

fn scaled_side(side: usize, factor: f64) -> usize {
    // Guard against 64 * 0.5 landing a hair above 32.0 in floating point.
    let exact = side as f64 * factor;
    let rounded = exact.round();
    if (exact - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        exact.ceil() as usize
    }
}

/// Level dimensions produced by `num_levels` levels of downsampling.
pub fn pyramid_dims(
    width: usize,
    height: usize,
    num_levels: usize,
    scale_factor: f64,
) -> Vec<(usize, usize)> {
    let mut dims = vec![(width, height)];
    for _ in 1..num_levels {
        let &(w, h) = dims.last().unwrap();
        dims.push((scaled_side(w, scale_factor), scaled_side(h, scale_factor)));
    }
    dims
}

/// Bilinear resampling where output pixel `(x, y)` reads source `(x, y) / factor`.
fn downsample(frame: &GrayFrame, width: usize, height: usize, factor: f64) -> GrayFrame {
    let inv = 1.0 / factor;
    GrayFrame::from_fn(width, height, frame.frame_index, |x, y| {
        frame.sample_bilinear(x as f64 * inv, y as f64 * inv)
    })
}

pub fn build_pyramid(
    frame: &GrayFrame,
    num_levels: usize,
    scale_factor: f64,
) -> Result<ImagePyramid, ImagingError> {
    build_pyramid_with(frame, num_levels, scale_factor, BlurParams::default())
}

pub fn build_pyramid_with(
    frame: &GrayFrame,
    num_levels: usize,
    scale_factor: f64,
    blur: BlurParams,
) -> Result<ImagePyramid, ImagingError> {
    if num_levels < 1 {
        return Err(ImagingError::InvalidParameter("num_levels must be >= 1"));
    }
    if !(scale_factor > 0.0 && scale_factor < 1.0) {
        return Err(ImagingError::InvalidParameter("scale_factor must be in (0, 1)"));
    }
    let dims = pyramid_dims(frame.width, frame.height, num_levels, scale_factor);
    if let Some((level, &(width, height))) = dims
        .iter()
        .enumerate()
        .find(|(_, (w, h))| *w < MIN_LEVEL_SIDE || *h < MIN_LEVEL_SIDE)
    {
        return Err(ImagingError::PyramidTooDeep {
            level,
            width,
            height,
        });
    }

    let mut levels = Vec::with_capacity(num_levels);
    levels.push(frame.clone());
    for &(w, h) in &dims[1..] {
        let blurred = gaussian_blur(levels.last().unwrap(), blur.radius, blur.sigma)?;
        levels.push(downsample(&blurred, w, h, scale_factor));
    }
    Ok(ImagePyramid {
        levels,
        scale_factor,
    })
}

/// Per-pixel intensity derivatives of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub ix: Grid,
    pub iy: Grid,
}

/// Central differences in the interior, one-sided differences on the border.
pub fn spatial_gradients(frame: &GrayFrame) -> Result<GradientField, ImagingError> {
    if frame.width < 3 || frame.height < 3 {
        return Err(ImagingError::InvalidParameter(
            "spatial gradients need at least a 3x3 frame",
        ));
    }
    let (w, h) = (frame.width, frame.height);
    let mut ix = Grid::zeros(w, h);
    let mut iy = Grid::zeros(w, h);
    for y in 0..h {
        let (ym, yp) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (xm, xp) = (x.saturating_sub(1), (x + 1).min(w - 1));
            ix.data[y * w + x] = (frame.get(xp, y) - frame.get(xm, y)) / (xp - xm) as f64;
            iy.data[y * w + x] = (frame.get(x, yp) - frame.get(x, ym)) / (yp - ym) as f64;
        }
    }
    Ok(GradientField { ix, iy })
}

/// Per-pixel `next - prev`.
pub fn temporal_difference(prev: &GrayFrame, next: &GrayFrame) -> Result<Grid, ImagingError> {
    prev.same_shape(next)?;
    Ok(Grid {
        width: prev.width,
        height: prev.height,
        data: next
            .data
            .iter()
            .zip(&prev.data)
            .map(|(n, p)| n - p)
            .collect(),
    })
}
