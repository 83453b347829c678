use serde::{Deserialize, Serialize};

/// Dense row-major raster of per-pixel values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = value;
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
}

impl Grid<bool> {
    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&b| b)
    }
}

/// Multi-channel descriptor raster; channels interleaved per pixel.
///
/// A pixel's descriptor represents the surface patch behind the pixel
/// center, so continuous sampling treats the value as living at
/// (x + 0.5, y + 0.5).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureImage {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f64) {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// Bilinear sample at continuous pixel coordinates; `None` when the
    /// sample lacks full four-neighbor support inside the image.
    pub fn sample_bilinear(&self, x: f64, y: f64, c: usize) -> Option<f64> {
        let fx = x - 0.5;
        let fy = y - 0.5;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let tx = fx - fx.floor();
        let ty = fy - fy.floor();
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        // Zero-weight neighbors collapse so exact pixel-center samples stay
        // valid on the last row and column.
        let x1 = if tx == 0.0 { x0 } else { x0 + 1 };
        let y1 = if ty == 0.0 { y0 } else { y0 + 1 };
        if x1 >= self.width || y1 >= self.height {
            return None;
        }
        let v00 = self.at(x0, y0, c);
        let v10 = self.at(x1, y0, c);
        let v01 = self.at(x0, y1, c);
        let v11 = self.at(x1, y1, c);
        Some(v00 * (1.0 - tx) * (1.0 - ty) + v10 * tx * (1.0 - ty) + v01 * (1.0 - tx) * ty + v11 * tx * ty)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_round_trip() {
        let mut g = Grid::filled(4, 3, 0i32);
        g.set(3, 2, 7);
        assert_eq!(g.get(3, 2), 7);
        assert_eq!(g.get(0, 0), 0);
    }

    #[test]
    fn bilinear_at_pixel_center_is_exact() {
        let mut img = FeatureImage::zeros(4, 4, 2);
        img.set(2, 1, 1, 5.0);
        assert_abs_diff_eq!(img.sample_bilinear(2.5, 1.5, 1).unwrap(), 5.0, epsilon = 1e-15);
    }

    #[test]
    fn bilinear_interpolates_midpoint() {
        let mut img = FeatureImage::zeros(2, 1, 1);
        img.set(0, 0, 0, 1.0);
        img.set(1, 0, 0, 3.0);
        // Midpoint between the two pixel centers; y support requires height 2,
        // so use a 2x2 with identical rows.
        let mut img2 = FeatureImage::zeros(2, 2, 1);
        for y in 0..2 {
            img2.set(0, y, 0, 1.0);
            img2.set(1, y, 0, 3.0);
        }
        assert_abs_diff_eq!(img2.sample_bilinear(1.0, 1.0, 0).unwrap(), 2.0, epsilon = 1e-15);
        drop(img);
    }

    #[test]
    fn bilinear_rejects_edges_without_support() {
        let img = FeatureImage::zeros(4, 4, 1);
        assert!(img.sample_bilinear(0.4, 2.0, 0).is_none());
        assert!(img.sample_bilinear(3.6, 2.0, 0).is_none());
        assert!(img.sample_bilinear(2.0, 0.4, 0).is_none());
        assert!(img.sample_bilinear(2.0, 3.6, 0).is_none());
        assert!(img.sample_bilinear(0.5, 0.5, 0).is_some());
        assert!(img.sample_bilinear(3.5, 3.5, 0).is_some());
    }
}
