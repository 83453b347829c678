use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::geometry::{homography_for_depth, DepthPlaneSet, RigidPose};
use crate::scene::{Grid, RenderedView};

use super::PoseError;

/// Soft-argmin temperature default.
pub const DEFAULT_TAU: f64 = 0.05;

/// Per-pixel, per-depth-plane photometric inconsistency. Cells where any
/// source warp leaves its image are NaN (invalid), never zero.
#[derive(Debug, Clone)]
pub struct CostVolume {
    width: usize,
    height: usize,
    planes: DepthPlaneSet,
    /// Indexed (y * width + x) * n_planes + k.
    values: Vec<f64>,
}

impl CostVolume {
    #[inline]
    pub fn at(&self, x: usize, y: usize, k: usize) -> f64 {
        self.values[(y * self.width + x) * self.planes.len() + k]
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn planes(&self) -> &DepthPlaneSet {
        &self.planes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the cheapest valid plane at a pixel.
    pub fn argmin(&self, x: usize, y: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for k in 0..self.planes.len() {
            let v = self.at(x, y, k);
            if v.is_finite() && best.is_none_or(|(_, bv)| v < bv) {
                best = Some((k, v));
            }
        }
        best.map(|(k, _)| k)
    }
}

/// Plane-sweep cost volume: each source view is warped onto the reference
/// pixel grid through the homography of every depth hypothesis, and the
/// cost is the descriptor variance across {reference, warped sources},
/// averaged over channels.
///
/// `rels[i]` maps source-camera-i coordinates into reference-camera
/// coordinates (see [`crate::geometry::relative_extrinsic`]); passing them
/// explicitly lets callers supply kinematic estimates rather than render
/// ground truth.
pub fn build_cost_volume(
    reference: &RenderedView,
    sources: &[&RenderedView],
    rels: &[RigidPose],
    planes: &DepthPlaneSet,
) -> Result<CostVolume, PoseError> {
    if sources.is_empty() {
        return Err(PoseError::NoSourceViews);
    }
    if planes.is_empty() {
        return Err(PoseError::PlaneSetEmpty);
    }
    assert_eq!(sources.len(), rels.len(), "one extrinsic per source view");
    let k = reference.intrinsics;
    let width = reference.feature.width();
    let height = reference.feature.height();
    let channels = reference.feature.channels();
    for s in sources {
        assert_eq!(s.feature.width(), width);
        assert_eq!(s.feature.height(), height);
        assert_eq!(s.feature.channels(), channels);
    }
    let n = planes.len();

    // Homographies are per (source, plane); depth values are validated by
    // DepthPlaneSet construction so the unwrap cannot fire.
    let hs: Vec<Vec<Matrix3<f64>>> = rels
        .iter()
        .map(|rel| {
            planes
                .depths()
                .iter()
                .map(|&d| homography_for_depth(&k, rel, d).expect("plane depths are valid"))
                .collect()
        })
        .collect();

    let mut values = vec![f64::NAN; width * height * n];
    values
        .par_chunks_mut(width * n)
        .enumerate()
        .for_each(|(y, row)| {
            let vf = y as f64 + 0.5;
            for x in 0..width {
                let uf = x as f64 + 0.5;
                for (kk, cell) in row[x * n..(x + 1) * n].iter_mut().enumerate() {
                    let mut sum = vec![0.0f64; channels];
                    let mut sum_sq = vec![0.0f64; channels];
                    for c in 0..channels {
                        let r = reference.feature.at(x, y, c);
                        sum[c] = r;
                        sum_sq[c] = r * r;
                    }
                    let mut valid = true;
                    'src: for (s, src) in sources.iter().enumerate() {
                        let h = &hs[s][kk];
                        let p = h * Vector3::new(uf, vf, 1.0);
                        if p.z.abs() < 1e-12 {
                            valid = false;
                            break 'src;
                        }
                        let sx = p.x / p.z;
                        let sy = p.y / p.z;
                        for c in 0..channels {
                            match src.feature.sample_bilinear(sx, sy, c) {
                                Some(v) => {
                                    sum[c] += v;
                                    sum_sq[c] += v * v;
                                }
                                None => {
                                    valid = false;
                                    break 'src;
                                }
                            }
                        }
                    }
                    if valid {
                        let m = (sources.len() + 1) as f64;
                        let mut acc = 0.0;
                        for c in 0..channels {
                            let mean = sum[c] / m;
                            acc += (sum_sq[c] / m - mean * mean).max(0.0);
                        }
                        *cell = acc / channels as f64;
                    }
                }
            }
        });

    Ok(CostVolume {
        width,
        height,
        planes: planes.clone(),
        values,
    })
}

/// Soft-argmin depth fusion: per pixel, weights proportional to
/// exp(-(cost - min_cost) / tau) over the valid planes; fused depth is the
/// weighted mean of plane depths and confidence is the peak weight.
/// Pixels with no valid plane fuse to NaN depth and zero confidence.
pub fn fuse_depth(volume: &CostVolume, tau: f64) -> (Grid<f64>, Grid<f64>) {
    let n = volume.planes.len();
    let depths = volume.planes.depths();
    let mut depth = Grid::filled(volume.width, volume.height, f64::NAN);
    let mut conf = Grid::filled(volume.width, volume.height, 0.0);
    for y in 0..volume.height {
        for x in 0..volume.width {
            let mut min_cost = f64::INFINITY;
            for k in 0..n {
                let v = volume.at(x, y, k);
                if v.is_finite() && v < min_cost {
                    min_cost = v;
                }
            }
            if !min_cost.is_finite() {
                continue;
            }
            let mut z = 0.0;
            let mut w_sum = 0.0;
            let mut w_max = 0.0f64;
            for k in 0..n {
                let v = volume.at(x, y, k);
                if !v.is_finite() {
                    continue;
                }
                let w = (-(v - min_cost) / tau).exp();
                z += w * depths[k];
                w_sum += w;
                w_max = w_max.max(w);
            }
            depth.set(x, y, z / w_sum);
            conf.set(x, y, w_max / w_sum);
        }
    }
    (depth, conf)
}
