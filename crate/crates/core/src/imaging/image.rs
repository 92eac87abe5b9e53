use crate::error::{Error, Result};

/// Row-major `height x width x channels` grid of intensities.
///
/// Values are nominally in `[0, 1]`; intermediate results (rain residuals,
/// Laplacian maps, unclipped network outputs) may leave that range, and
/// [`Image::clipped`] brings them back.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Image {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "{} values for a {height}x{width}x{channels} image",
                data.len()
            )));
        }
        Ok(Image {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds an image by evaluating `f(y, x, c)` at every sample.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Image {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        let i = self.index(y, x, c);
        self.data[i] = v;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub fn ensure_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.height, self.width, self.channels, other.height, other.width, other.channels
            )))
        }
    }

    /// Single channel `c` as a 1-channel image.
    pub fn channel(&self, c: usize) -> Image {
        Image::from_fn(self.height, self.width, 1, |y, x, _| self.get(y, x, c))
    }

    /// BT.601 luminance. 1-channel images are returned unchanged.
    pub fn luma(&self) -> Image {
        match self.channels {
            1 => self.clone(),
            3 => Image::from_fn(self.height, self.width, 1, |y, x, _| {
                0.299 * self.get(y, x, 0) + 0.587 * self.get(y, x, 1) + 0.114 * self.get(y, x, 2)
            }),
            c => {
                let n = c as f64;
                Image::from_fn(self.height, self.width, 1, |y, x, _| {
                    (0..c).map(|k| self.get(y, x, k)).sum::<f64>() / n
                })
            }
        }
    }

    /// Repeats a 1-channel image across `channels`.
    pub fn broadcast(&self, channels: usize) -> Result<Image> {
        if self.channels != 1 {
            return Err(Error::Shape(format!(
                "broadcast needs 1 channel, got {}",
                self.channels
            )));
        }
        Ok(Image::from_fn(self.height, self.width, channels, |y, x, _| {
            self.get(y, x, 0)
        }))
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Image {
        Image {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Image, mut f: impl FnMut(f64, f64) -> f64) -> Result<Image> {
        self.ensure_same_shape(other)?;
        Ok(Image {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn clipped(&self) -> Image {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Rotates by 90 degrees clockwise.
    pub fn rotate90(&self) -> Image {
        let (h, w) = (self.height, self.width);
        Image::from_fn(w, h, self.channels, |y, x, c| self.get(h - 1 - x, y, c))
    }

    /// Quantizes to 8-bit levels, as a PPM round trip would.
    pub fn quantized(&self) -> Image {
        self.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
    }
}
