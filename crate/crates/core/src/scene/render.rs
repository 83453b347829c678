use nalgebra::{Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{CameraIntrinsics, RigidPose};

use super::{
    ArticulatedObject, FeatureImage, Grid, LightIntensity, Material, SceneConfig, SceneError,
    Shape,
};

const RAY_EPS: f64 = 1e-7;
const GROUND_EXTENT: f64 = 2.0;

/// Global descriptor scale. Sized so that the variance between descriptors
/// of unrelated surface points is large against the depth-fusion softmax
/// temperature, while bilinear interpolation residue stays well below it.
pub const FEATURE_GAIN: f64 = 16.0;

/// Per-channel texture frequency multiplier, a third-octave ladder. Spreading
/// receptive scales across channels keeps some channels discriminative at any
/// viewing distance, the per-pixel analog of a multi-scale filter bank.
fn channel_freq(c: usize) -> f64 {
    2f64.powf((c % 8) as f64 / 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    pub width: usize,
    pub height: usize,
    /// Descriptor channels per pixel.
    pub channels: usize,
    /// Focal length in pixels (square pixels, centered principal point).
    pub focal: f64,
    /// Base texture frequency in cycles per canonical unit; octaves double it.
    pub texture_base_freq: f64,
    pub octaves: u32,
    /// Additive zero-mean Gaussian descriptor noise (sigma).
    pub descriptor_noise: f64,
    pub seed: u64,
    pub ground: bool,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            channels: 8,
            focal: 400.0,
            texture_base_freq: 12.0,
            octaves: 1,
            descriptor_noise: 0.0,
            seed: 0,
            ground: true,
        }
    }
}

impl RenderSettings {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics::centered(self.focal, self.width, self.height)
            .expect("render settings yield valid intrinsics")
    }

    /// Small fast preset for low-resolution test renders.
    pub fn training() -> Self {
        Self {
            width: 64,
            height: 64,
            channels: 4,
            focal: 100.0,
            ..Self::default()
        }
    }

    /// Preset for the viewpoint scheduler's environment: resolution and
    /// focal length chosen so the texture ladder stays below Nyquist at
    /// working distances, keeping depth fusion informative.
    pub fn scheduler() -> Self {
        Self {
            width: 96,
            height: 96,
            channels: 4,
            focal: 150.0,
            ..Self::default()
        }
    }
}

/// One synthetic observation: descriptor image everywhere, ground truth
/// (mask, canonical coordinates, z-depth) defined exactly on mask pixels
/// (NaN elsewhere).
#[derive(Debug, Clone)]
pub struct RenderedView {
    pub feature: FeatureImage,
    pub mask: Grid<bool>,
    pub gt_coord: Grid<[f64; 3]>,
    pub gt_depth: Grid<f64>,
    pub camera_pose: RigidPose,
    pub intrinsics: CameraIntrinsics,
    /// False when the mask came out empty (object not visible).
    pub visible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SurfaceKind {
    Part,
    Static,
    Ground,
}

struct WorldPrim {
    shape: Shape,
    inv_pose: RigidPose,
    kind: SurfaceKind,
    salt: u64,
}

struct Hit {
    t: f64,
    kind: SurfaceKind,
    salt: u64,
    normal_world: Vector3<f64>,
}

pub fn render_view(
    config: &SceneConfig,
    object: &ArticulatedObject,
    camera: &RigidPose,
    settings: &RenderSettings,
) -> RenderedView {
    let k = settings.intrinsics();
    let link = object.link_pose();
    let link_inv = link.inverse();
    let cam_inv = camera.inverse();

    let mut prims = Vec::new();
    for (i, p) in object.statics().iter().enumerate() {
        prims.push(WorldPrim {
            shape: p.shape,
            inv_pose: object.base_pose.compose(&p.pose).inverse(),
            kind: SurfaceKind::Static,
            salt: 0x51A7_1C00 + i as u64,
        });
    }
    for (i, p) in object.parts().iter().enumerate() {
        prims.push(WorldPrim {
            shape: p.shape,
            inv_pose: link.compose(&p.pose).inverse(),
            kind: SurfaceKind::Part,
            salt: 0x9A87_0000 + i as u64,
        });
    }

    // Static-geometry texture frame: the base-frame bounding box of statics.
    let static_nocs = statics_nocs(object);
    let base_inv = object.base_pose.inverse();

    let light_pos = Vector3::new(
        config.light_position[0],
        config.light_position[1],
        config.light_position[2],
    );
    let light_scale = match config.light_intensity {
        LightIntensity::Strong => 1.0,
        LightIntensity::Weak => 0.45,
    };
    let gain = FEATURE_GAIN;

    let mut feature = FeatureImage::zeros(settings.width, settings.height, settings.channels);
    let mut mask = Grid::filled(settings.width, settings.height, false);
    let mut gt_coord = Grid::filled(settings.width, settings.height, [f64::NAN; 3]);
    let mut gt_depth = Grid::filled(settings.width, settings.height, f64::NAN);

    let origin = camera.translation();
    for v in 0..settings.height {
        for u in 0..settings.width {
            let dir = camera.rotate_vector(&k.pixel_ray(u, v));
            let hit = closest_hit(&prims, settings.ground, &origin, &dir);
            let Some(hit) = hit else {
                for c in 0..settings.channels {
                    let noise = settings.descriptor_noise
                        * hash_gauss(hash3(settings.seed, (u as u64) << 20 | v as u64, c as u64));
                    feature.set(u, v, c, gain * 0.03 + noise);
                }
                continue;
            };
            let p_world = origin + dir * hit.t;
            if hit.kind == SurfaceKind::Part {
                mask.set(u, v, true);
                let p_link = link_inv.transform_point(&p_world);
                let canonical = object.nocs.to_canonical(&p_link);
                gt_coord.set(u, v, [canonical.x, canonical.y, canonical.z]);
                gt_depth.set(u, v, cam_inv.transform_point(&p_world).z);
            }
            // Texture coordinates normalized to the owning body's scale so
            // apparent wavelength tracks projected size.
            let tex = match hit.kind {
                SurfaceKind::Part => {
                    let p_link = link_inv.transform_point(&p_world);
                    object.nocs.to_canonical(&p_link)
                }
                SurfaceKind::Static => {
                    let p_base = base_inv.transform_point(&p_world);
                    static_nocs.to_canonical(&p_base)
                }
                SurfaceKind::Ground => Vector3::new(p_world.x / 1.5, p_world.y / 1.5, 0.0),
            };
            let view_dir = -dir;
            let light_dir = (light_pos - p_world).normalize();
            let lambert = hit.normal_world.dot(&light_dir).max(0.0);
            for c in 0..settings.channels {
                let chan_seed = hit.salt ^ (c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                let amp = match config.material {
                    Material::Diffuse => 0.45,
                    Material::Specular => 0.35,
                    Material::Transparent => 0.12,
                };
                let t = fbm(
                    chan_seed,
                    &(tex * settings.texture_base_freq * channel_freq(c)),
                    settings.octaves,
                );
                let albedo = 0.5 + amp * (2.0 * t - 1.0);
                let mut value = 0.06 + light_scale * albedo * (0.65 + 0.35 * lambert);
                match config.material {
                    Material::Specular => {
                        let r = hit.normal_world * (2.0 * hit.normal_world.dot(&view_dir))
                            - view_dir;
                        value += light_scale * 0.35 * r.dot(&light_dir).max(0.0).powi(16);
                    }
                    Material::Transparent => {
                        let f = 1.0 - hit.normal_world.dot(&view_dir).abs();
                        value += 0.15 * f * f * f;
                    }
                    Material::Diffuse => {}
                }
                let noise = settings.descriptor_noise
                    * hash_gauss(hash3(settings.seed, (u as u64) << 20 | v as u64, c as u64));
                feature.set(u, v, c, gain * value + noise);
            }
        }
    }

    let visible = mask.any();
    RenderedView {
        feature,
        mask,
        gt_coord,
        gt_depth,
        camera_pose: *camera,
        intrinsics: k,
        visible,
    }
}

fn statics_nocs(object: &ArticulatedObject) -> super::NocsFrame {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in object.statics() {
        let half = match p.shape {
            Shape::Cuboid { half } => half,
            Shape::Cylinder {
                radius,
                half_height,
            } => Vector3::new(radius, radius, half_height),
            Shape::Torus { major, minor } => Vector3::new(major + minor, major + minor, minor),
        };
        let c = p.pose.translation();
        lo = lo.inf(&(c - half));
        hi = hi.sup(&(c + half));
    }
    if !lo.x.is_finite() {
        return super::NocsFrame {
            center: Vector3::zeros(),
            scale: 1.0,
        };
    }
    let dims = hi - lo;
    super::NocsFrame {
        center: (hi + lo) / 2.0,
        scale: dims.x.max(dims.y).max(dims.z),
    }
}

fn closest_hit(
    prims: &[WorldPrim],
    ground: bool,
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for prim in prims {
        let lo = prim.inv_pose.transform_point(origin);
        let ld = prim.inv_pose.rotate_vector(dir);
        if let Some((t, ln)) = intersect_local(&prim.shape, &lo, &ld) {
            if best.as_ref().is_none_or(|b| t < b.t) {
                best = Some(Hit {
                    t,
                    kind: prim.kind,
                    salt: prim.salt,
                    normal_world: prim.inv_pose.inverse().rotate_vector(&ln),
                });
            }
        }
    }
    if ground && dir.z.abs() > 1e-12 {
        let t = -origin.z / dir.z;
        if t > RAY_EPS {
            let x = origin.x + t * dir.x;
            let y = origin.y + t * dir.y;
            if x.abs() <= GROUND_EXTENT
                && y.abs() <= GROUND_EXTENT
                && best.as_ref().is_none_or(|b| t < b.t)
            {
                best = Some(Hit {
                    t,
                    kind: SurfaceKind::Ground,
                    salt: 0x6E0D_0001,
                    normal_world: Vector3::z(),
                });
            }
        }
    }
    best
}

/// Ray vs canonical shape in the primitive's own frame; returns the nearest
/// entering intersection beyond RAY_EPS and its local surface normal.
fn intersect_local(shape: &Shape, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
    match *shape {
        Shape::Cuboid { half } => {
            let mut tmin = f64::NEG_INFINITY;
            let mut tmax = f64::INFINITY;
            let mut axis = 0usize;
            let mut sign = 1.0;
            for i in 0..3 {
                if d[i].abs() < 1e-12 {
                    if o[i].abs() > half[i] {
                        return None;
                    }
                    continue;
                }
                let inv = 1.0 / d[i];
                let mut t1 = (-half[i] - o[i]) * inv;
                let mut t2 = (half[i] - o[i]) * inv;
                let mut s = -1.0;
                if t1 > t2 {
                    std::mem::swap(&mut t1, &mut t2);
                    s = 1.0;
                }
                if t1 > tmin {
                    tmin = t1;
                    axis = i;
                    sign = s;
                }
                tmax = tmax.min(t2);
                if tmin > tmax {
                    return None;
                }
            }
            if tmin > RAY_EPS {
                let mut n = Vector3::zeros();
                n[axis] = sign;
                Some((tmin, n))
            } else {
                None
            }
        }
        Shape::Cylinder {
            radius,
            half_height,
        } => {
            let mut best: Option<(f64, Vector3<f64>)> = None;
            let a = d.x * d.x + d.y * d.y;
            if a > 1e-14 {
                let b = 2.0 * (o.x * d.x + o.y * d.y);
                let c = o.x * o.x + o.y * o.y - radius * radius;
                let disc = b * b - 4.0 * a * c;
                if disc >= 0.0 {
                    let sq = disc.sqrt();
                    for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                        let z = o.z + t * d.z;
                        if t > RAY_EPS && z.abs() <= half_height {
                            let n = Vector3::new(o.x + t * d.x, o.y + t * d.y, 0.0) / radius;
                            if best.is_none_or(|(bt, _)| t < bt) {
                                best = Some((t, n));
                            }
                            break;
                        }
                    }
                }
            }
            if d.z.abs() > 1e-12 {
                for zcap in [-half_height, half_height] {
                    let t = (zcap - o.z) / d.z;
                    if t > RAY_EPS {
                        let x = o.x + t * d.x;
                        let y = o.y + t * d.y;
                        if x * x + y * y <= radius * radius && best.is_none_or(|(bt, _)| t < bt) {
                            best = Some((t, Vector3::new(0.0, 0.0, zcap.signum())));
                        }
                    }
                }
            }
            best
        }
        Shape::Torus { major, minor } => {
            let e = o.dot(o) - (major * major + minor * minor);
            let f = o.dot(d);
            let four_r2 = 4.0 * major * major;
            let b3 = 4.0 * f;
            let b2 = 2.0 * e + 4.0 * f * f + four_r2 * d.z * d.z;
            let b1 = 4.0 * f * e + 2.0 * four_r2 * o.z * d.z;
            let b0 = e * e - four_r2 * (minor * minor - o.z * o.z);
            let mut best: Option<f64> = None;
            for root in quartic_real_roots(b3, b2, b1, b0) {
                if root > RAY_EPS && best.is_none_or(|b| root < b) {
                    best = Some(root);
                }
            }
            let t = best?;
            let p = o + d * t;
            let ring = Vector3::new(p.x, p.y, 0.0);
            let rn = ring.norm();
            if rn < 1e-12 {
                return None;
            }
            let q = ring * (major / rn);
            Some((t, (p - q).normalize()))
        }
    }
}

/// Real roots of t^4 + b3 t^3 + b2 t^2 + b1 t + b0 via the companion-matrix
/// eigenvalues, polished by a few Newton steps.
fn quartic_real_roots(b3: f64, b2: f64, b1: f64, b0: f64) -> Vec<f64> {
    let companion = Matrix4::new(
        0.0, 0.0, 0.0, -b0, //
        1.0, 0.0, 0.0, -b1, //
        0.0, 1.0, 0.0, -b2, //
        0.0, 0.0, 1.0, -b3,
    );
    let eigen = companion.complex_eigenvalues();
    let poly = |t: f64| (((t + b3) * t + b2) * t + b1) * t + b0;
    let dpoly = |t: f64| ((4.0 * t + 3.0 * b3) * t + 2.0 * b2) * t + b1;
    let mut roots = Vec::new();
    for ev in eigen.iter() {
        if ev.im.abs() > 1e-6 * ev.re.abs().max(1.0) {
            continue;
        }
        let mut t = ev.re;
        for _ in 0..3 {
            let dp = dpoly(t);
            if dp.abs() < 1e-14 {
                break;
            }
            t -= poly(t) / dp;
        }
        if poly(t).abs() < 1e-6 {
            roots.push(t);
        }
    }
    roots
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash3(seed: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b)
}

fn hash01(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn hash_gauss(h: u64) -> f64 {
    let u1 = hash01(splitmix64(h)).max(1e-12);
    let u2 = hash01(splitmix64(h ^ 0xDEAD_BEEF_CAFE_F00D));
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn lattice(seed: u64, ix: i64, iy: i64, iz: i64) -> f64 {
    let h = hash3(
        splitmix64(seed) ^ (ix as u64).wrapping_mul(0x8538_4F7B_65D4_1F2B),
        (iy as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F),
        (iz as u64).wrapping_mul(0x1656_67B1_9E37_79F9),
    );
    hash01(h)
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Trilinear value noise in [0, 1].
fn value_noise(seed: u64, p: &Vector3<f64>) -> f64 {
    let ix = p.x.floor();
    let iy = p.y.floor();
    let iz = p.z.floor();
    let tx = smooth(p.x - ix);
    let ty = smooth(p.y - iy);
    let tz = smooth(p.z - iz);
    let (ix, iy, iz) = (ix as i64, iy as i64, iz as i64);
    let mut acc = 0.0;
    for (dz, wz) in [(0i64, 1.0 - tz), (1, tz)] {
        for (dy, wy) in [(0i64, 1.0 - ty), (1, ty)] {
            for (dx, wx) in [(0i64, 1.0 - tx), (1, tx)] {
                acc += wx * wy * wz * lattice(seed, ix + dx, iy + dy, iz + dz);
            }
        }
    }
    acc
}

/// Multi-octave value noise, normalized to [0, 1].
fn fbm(seed: u64, p: &Vector3<f64>, octaves: u32) -> f64 {
    let mut amp = 1.0;
    let mut freq = 1.0;
    let mut total = 0.0;
    let mut norm = 0.0;
    for o in 0..octaves.max(1) {
        total += amp * value_noise(seed.wrapping_add(o as u64), &(p * freq));
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    total / norm
}

/// Normalized bounding box of a mask: left/right/down/up in [0, 1] image
/// coordinates, right and up being one-past the extreme pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub l: f64,
    pub r: f64,
    pub d: f64,
    pub u: f64,
}

impl BBox {
    pub fn mid(&self) -> [f64; 2] {
        [(self.l + self.r) / 2.0, (self.d + self.u) / 2.0]
    }
}

pub fn mask_bbox(mask: &Grid<bool>) -> Result<BBox, SceneError> {
    let mut x_min = usize::MAX;
    let mut x_max = 0usize;
    let mut y_min = usize::MAX;
    let mut y_max = 0usize;
    let mut any = false;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                any = true;
                x_min = x_min.min(x);
                x_max = x_max.max(x);
                y_min = y_min.min(y);
                y_max = y_max.max(y);
            }
        }
    }
    if !any {
        return Err(SceneError::EmptyMask);
    }
    let w = mask.width() as f64;
    let h = mask.height() as f64;
    Ok(BBox {
        l: x_min as f64 / w,
        r: (x_max + 1) as f64 / w,
        d: y_min as f64 / h,
        u: (y_max + 1) as f64 / h,
    })
}

/// Camera on the upper hemisphere around `center`: azimuth about world z
/// (0 = +x), elevation above the horizontal plane, looking at `center`.
pub fn hemisphere_camera(
    center: &Vector3<f64>,
    radius: f64,
    azimuth: f64,
    elevation: f64,
) -> RigidPose {
    let eye = center
        + Vector3::new(
            radius * elevation.cos() * azimuth.cos(),
            radius * elevation.cos() * azimuth.sin(),
            radius * elevation.sin(),
        );
    crate::geometry::camera_look_at(&eye, center)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::camera_look_at;
    use crate::scene::{canonical_scene, place_object, sample_scene, TaskId};
    use crate::util::seeded_rng;
    use nalgebra::Vector2;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn prop_scene() -> SceneConfig {
        let mut c = canonical_scene(TaskId::LiftMug);
        c.material = Material::Diffuse;
        c
    }

    #[test]
    fn centered_cube_mask_has_predicted_size() {
        let config = prop_scene();
        let object = ArticulatedObject::prop_box(
            Vector3::new(0.05, 0.05, 0.05),
            RigidPose::from_translation(Vector3::new(1.05, 0.0, 0.0)),
        );
        let camera = camera_look_at(&Vector3::zeros(), &Vector3::new(1.0, 0.0, 0.0));
        let settings = RenderSettings {
            ground: false,
            ..RenderSettings::default()
        };
        let view = render_view(&config, &object, &camera, &settings);
        assert!(view.visible);
        // Near face at 1 m, fx = 400: predicted side 400 * 0.1 / 1.0 = 40 px.
        let bbox = mask_bbox(&view.mask).unwrap();
        let side_x = (bbox.r - bbox.l) * settings.width as f64;
        let side_y = (bbox.u - bbox.d) * settings.height as f64;
        assert_abs_diff_eq!(side_x, 40.0, epsilon = 1.01);
        assert_abs_diff_eq!(side_y, 40.0, epsilon = 1.01);
        let mid = bbox.mid();
        assert_abs_diff_eq!(mid[0], 0.5, epsilon = 0.01);
        assert_abs_diff_eq!(mid[1], 0.5, epsilon = 0.01);
    }

    #[test]
    fn camera_facing_away_yields_empty_mask() {
        let config = prop_scene();
        let object = ArticulatedObject::prop_box(
            Vector3::new(0.05, 0.05, 0.05),
            RigidPose::from_translation(Vector3::new(1.0, 0.0, 0.0)),
        );
        let camera = camera_look_at(&Vector3::zeros(), &Vector3::new(-1.0, 0.0, 0.0));
        let settings = RenderSettings {
            ground: false,
            ..RenderSettings::default()
        };
        let view = render_view(&config, &object, &camera, &settings);
        assert!(!view.visible);
        assert!(!view.mask.any());
        assert!(matches!(mask_bbox(&view.mask), Err(SceneError::EmptyMask)));
    }

    fn views_bit_identical(a: &RenderedView, b: &RenderedView) -> bool {
        let feat = a
            .feature
            .data()
            .iter()
            .zip(b.feature.data())
            .all(|(x, y)| x.to_bits() == y.to_bits());
        let mask = a.mask.data() == b.mask.data();
        let coord = a
            .gt_coord
            .data()
            .iter()
            .zip(b.gt_coord.data())
            .all(|(x, y)| (0..3).all(|i| x[i].to_bits() == y[i].to_bits()));
        let depth = a
            .gt_depth
            .data()
            .iter()
            .zip(b.gt_depth.data())
            .all(|(x, y)| x.to_bits() == y.to_bits());
        feat && mask && coord && depth
    }

    #[test]
    fn rendering_is_deterministic() {
        let mut rng = seeded_rng(5, "render-det");
        let config = sample_scene(TaskId::OpenDoor, &mut rng);
        let object = place_object(&config);
        let center = object.part_center_world();
        let camera = hemisphere_camera(&center, 0.6, 0.4, 0.7);
        let settings = RenderSettings {
            width: 96,
            height: 96,
            descriptor_noise: 0.02,
            seed: 99,
            ..RenderSettings::default()
        };
        let a = render_view(&config, &object, &camera, &settings);
        let b = render_view(&config, &object, &camera, &settings);
        assert!(views_bit_identical(&a, &b));
    }

    #[test]
    fn gt_consistency_all_categories() {
        for (i, task) in [
            TaskId::OpenDoor,
            TaskId::OpenDrawer,
            TaskId::OpenPot,
            TaskId::LiftMug,
        ]
        .iter()
        .enumerate()
        {
            let mut rng = seeded_rng(21 + i as u64, "gt-consistency");
            let config = sample_scene(*task, &mut rng);
            let mut object = place_object(&config);
            // Exercise a displaced joint too.
            let span = object.joint_limits[1] - object.joint_limits[0];
            object.set_joint_state(object.joint_limits[0] + 0.3 * span.min(1.0));
            let center = object.part_center_world();
            // Frontal hemisphere: object fronts face back toward the arm.
            let az = rng.random_range(-0.8..0.8);
            let el = rng.random_range(0.2..1.0);
            let camera =
                hemisphere_camera(&center, 0.55, config.beta + std::f64::consts::PI + az, el);
            let settings = RenderSettings {
                width: 128,
                height: 128,
                focal: 200.0,
                ..RenderSettings::default()
            };
            let view = render_view(&config, &object, &camera, &settings);
            assert!(view.visible, "{task} not visible");
            let link_inv = object.link_pose().inverse();
            let mut checked = 0;
            for y in 0..settings.height {
                for x in 0..settings.width {
                    if !view.mask.get(x, y) {
                        assert!(view.gt_depth.get(x, y).is_nan());
                        continue;
                    }
                    let depth = view.gt_depth.get(x, y);
                    assert!(depth > 0.0);
                    let px = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
                    let p_cam = view.intrinsics.unproject(&px, depth).unwrap();
                    let p_world = view.camera_pose.transform_point(&p_cam);
                    let canonical = object.nocs.to_canonical(&link_inv.transform_point(&p_world));
                    let stored = view.gt_coord.get(x, y);
                    for k in 0..3 {
                        assert!(
                            (canonical[k] - stored[k]).abs() < 1e-6,
                            "{task} coord mismatch at ({x},{y})"
                        );
                        assert!(stored[k] >= -0.5 - 1e-9 && stored[k] <= 0.5 + 1e-9);
                    }
                    checked += 1;
                }
            }
            assert!(checked > 50, "{task}: only {checked} mask pixels");
        }
    }

    #[test]
    fn mask_bbox_full_frame_and_single_pixel() {
        let full = Grid::filled(32, 32, true);
        let b = mask_bbox(&full).unwrap();
        assert_eq!((b.l, b.r, b.d, b.u), (0.0, 1.0, 0.0, 1.0));
        assert_eq!(b.mid(), [0.5, 0.5]);

        let mut single = Grid::filled(33, 33, false);
        single.set(16, 16, true);
        let b = mask_bbox(&single).unwrap();
        let mid = b.mid();
        assert_abs_diff_eq!(mid[0], 0.5, epsilon = 1.0 / 33.0);
        assert_abs_diff_eq!(mid[1], 0.5, epsilon = 1.0 / 33.0);
    }

    #[test]
    fn mask_bbox_matches_brute_force_rectangles() {
        let mut rng = seeded_rng(17, "bbox");
        for _ in 0..50 {
            let w = rng.random_range(4..40usize);
            let h = rng.random_range(4..40usize);
            let x0 = rng.random_range(0..w - 1);
            let x1 = rng.random_range(x0..w);
            let y0 = rng.random_range(0..h - 1);
            let y1 = rng.random_range(y0..h);
            let mut mask = Grid::filled(w, h, false);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    mask.set(x, y, true);
                }
            }
            let b = mask_bbox(&mask).unwrap();
            assert_abs_diff_eq!(b.l, x0 as f64 / w as f64, epsilon = 1e-12);
            assert_abs_diff_eq!(b.r, (x1 + 1) as f64 / w as f64, epsilon = 1e-12);
            assert_abs_diff_eq!(b.d, y0 as f64 / h as f64, epsilon = 1e-12);
            assert_abs_diff_eq!(b.u, (y1 + 1) as f64 / h as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn torus_quartic_finds_mug_handle() {
        let config = prop_scene();
        let object = ArticulatedObject::mug(1.0, RigidPose::identity());
        // Look at the handle side (local +x) from outside.
        let camera = camera_look_at(
            &Vector3::new(0.5, 0.0, 0.05),
            &Vector3::new(0.06, 0.0, 0.05),
        );
        let settings = RenderSettings {
            width: 128,
            height: 128,
            focal: 300.0,
            ground: false,
            ..RenderSettings::default()
        };
        let view = render_view(&config, &object, &camera, &settings);
        assert!(view.visible);
        // The handle ring sticks out beyond the body silhouette; ensure some
        // mask pixels lie beyond the body's projected radius.
        let bbox = mask_bbox(&view.mask).unwrap();
        assert!(bbox.r - bbox.l > 0.0);
        assert!(view.mask.count_true() > 200);
    }

    #[test]
    fn specular_descriptor_is_view_dependent_diffuse_is_not() {
        let mut config = prop_scene();
        let object = ArticulatedObject::prop_box(
            Vector3::new(0.2, 0.2, 0.01),
            RigidPose::from_translation(Vector3::new(0.0, 0.0, 0.3)),
        );
        let settings = RenderSettings {
            width: 64,
            height: 64,
            focal: 100.0,
            ground: false,
            ..RenderSettings::default()
        };
        // Two cameras looking at the same top-face point from different sides.
        let target = Vector3::new(0.0, 0.0, 0.31);
        let cam_a = camera_look_at(&Vector3::new(0.25, 0.0, 0.8), &target);
        let cam_b = camera_look_at(&Vector3::new(-0.25, 0.0, 0.8), &target);

        let sample_center = |cfg: &SceneConfig, cam: &RigidPose| {
            let view = render_view(cfg, &object, cam, &settings);
            // Read the descriptor at the target's projection; bilinear
            // interpolation leaves only small texture-alignment residue.
            let p_cam = cam.inverse().transform_point(&target);
            let px = view.intrinsics.project(&p_cam).unwrap();
            view.feature.sample_bilinear(px.x, px.y, 0).unwrap()
        };
        config.material = Material::Diffuse;
        let diffuse_diff = (sample_center(&config, &cam_a) - sample_center(&config, &cam_b)).abs();
        config.material = Material::Specular;
        let specular_diff = (sample_center(&config, &cam_a) - sample_center(&config, &cam_b)).abs();
        assert!(
            diffuse_diff < 0.05 * FEATURE_GAIN,
            "diffuse mismatch {diffuse_diff}"
        );
        assert!(
            specular_diff > 0.15 * FEATURE_GAIN && specular_diff > 3.0 * diffuse_diff,
            "specular should be view-dependent: {specular_diff} vs diffuse {diffuse_diff}"
        );
    }
}
