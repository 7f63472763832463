use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Image;

/// Random augmentation ranges. Shifts are fractions of the image side; zoom
/// draws a scale factor from `[1 - zoom_range, 1 + zoom_range]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentParams {
    pub rotation_range_deg: f64,
    pub width_shift_range: f64,
    pub height_shift_range: f64,
    pub zoom_range: f64,
    pub horizontal_flip: bool,
    pub vertical_flip: bool,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            rotation_range_deg: 20.0,
            width_shift_range: 0.2,
            height_shift_range: 0.2,
            zoom_range: 0.2,
            horizontal_flip: true,
            vertical_flip: true,
        }
    }
}

impl AugmentParams {
    pub fn none() -> Self {
        AugmentParams {
            rotation_range_deg: 0.0,
            width_shift_range: 0.0,
            height_shift_range: 0.0,
            zoom_range: 0.0,
            horizontal_flip: false,
            vertical_flip: false,
        }
    }

    pub fn sample(&self, seed: u64) -> Transform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sym = |r: f64| (2.0 * rng.random::<f64>() - 1.0) * r;
        let rotation_deg = sym(self.rotation_range_deg);
        let shift_x = sym(self.width_shift_range);
        let shift_y = sym(self.height_shift_range);
        let zoom = 1.0 + sym(self.zoom_range);
        let flip_h = rng.random::<bool>() && self.horizontal_flip;
        let flip_v = rng.random::<bool>() && self.vertical_flip;
        Transform {
            rotation_deg,
            shift_x,
            shift_y,
            zoom,
            flip_h,
            flip_v,
        }
    }
}

/// One concrete augmentation: flip, then rotate about the image centre, then
/// scale, then translate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub rotation_deg: f64,
    pub shift_x: f64,
    pub shift_y: f64,
    pub zoom: f64,
    pub flip_h: bool,
    pub flip_v: bool,
}

impl Transform {
    pub fn identity() -> Self {
        Transform {
            rotation_deg: 0.0,
            shift_x: 0.0,
            shift_y: 0.0,
            zoom: 1.0,
            flip_h: false,
            flip_v: false,
        }
    }
}

pub fn augment(img: &Image, params: &AugmentParams, seed: u64) -> Image {
    apply_transform(img, &params.sample(seed))
}

/// Inverse-maps every output pixel into the source and samples bilinearly;
/// coordinates outside the source clamp to the nearest edge pixel.
pub fn apply_transform(img: &Image, t: &Transform) -> Image {
    let (w, h, ch) = (img.width, img.height, img.channels);
    let cx = w as f64 * 0.5;
    let cy = h as f64 * 0.5;
    let (s, c) = t.rotation_deg.to_radians().sin_cos();
    let zoom = if t.zoom.abs() > 1e-12 { t.zoom } else { 1.0 };
    let mut out = Image {
        data: vec![0.0; img.data.len()],
        ..img.clone()
    };
    for y in 0..h {
        for x in 0..w {
            // centred output coordinate, undo shift and zoom
            let ox = (x as f64 + 0.5 - cx - t.shift_x * w as f64) / zoom;
            let oy = (y as f64 + 0.5 - cy - t.shift_y * h as f64) / zoom;
            // undo rotation
            let mut sx = c * ox + s * oy;
            let mut sy = -s * ox + c * oy;
            if t.flip_h {
                sx = -sx;
            }
            if t.flip_v {
                sy = -sy;
            }
            let fx = (sx + cx - 0.5).clamp(0.0, (w - 1) as f64);
            let fy = (sy + cy - 0.5).clamp(0.0, (h - 1) as f64);
            let x0 = fx.floor() as usize;
            let y0 = fy.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let ax = (fx - x0 as f64) as f32;
            let ay = (fy - y0 as f64) as f32;
            for k in 0..ch {
                let top = img.at(x0, y0, k) * (1.0 - ax) + img.at(x1, y0, k) * ax;
                let bot = img.at(x0, y1, k) * (1.0 - ax) + img.at(x1, y1, k) * ax;
                out.data[(y * w + x) * ch + k] = top * (1.0 - ay) + bot * ay;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(side: usize) -> Image {
        let mut im = Image::filled(side, side, 1, 0.0);
        for y in 0..side {
            for x in 0..side {
                im.data[y * side + x] = ((x * 7 + y * 13) % 17) as f32 / 16.0;
            }
        }
        im
    }

    #[test]
    fn zero_ranges_are_identity() {
        let im = pattern(32);
        let out = augment(&im, &AugmentParams::none(), 99);
        assert_eq!(out.data, im.data);
    }

    #[test]
    fn half_turn_of_symmetric_pattern() {
        let side = 32;
        let mut im = Image::filled(side, side, 1, 0.0);
        for y in 0..side {
            for x in 0..side {
                // symmetric under (x, y) -> (side-1-x, side-1-y)
                let dx = x as f64 + 0.5 - 16.0;
                let dy = y as f64 + 0.5 - 16.0;
                im.data[y * side + x] = ((dx * dx + 0.5 * dy * dy + dx * dy) / 400.0).min(1.0) as f32;
            }
        }
        let t = Transform {
            rotation_deg: 180.0,
            ..Transform::identity()
        };
        let out = apply_transform(&im, &t);
        assert!(out.mean_abs_diff(&im) < 1e-3);
    }

    #[test]
    fn fixed_seed_is_reproducible_and_in_range() {
        let im = pattern(48);
        let p = AugmentParams::default();
        let a = augment(&im, &p, 7);
        let b = augment(&im, &p, 7);
        assert_eq!(a, b);
        assert!(a.data.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_ne!(augment(&im, &p, 8).data, a.data);
    }

    #[test]
    fn sampled_transform_within_ranges() {
        let p = AugmentParams::default();
        for seed in 0..200 {
            let t = p.sample(seed);
            assert!(t.rotation_deg.abs() <= 20.0);
            assert!(t.shift_x.abs() <= 0.2 && t.shift_y.abs() <= 0.2);
            assert!((0.8..=1.2).contains(&t.zoom));
        }
    }

    #[test]
    fn flip_mirrors_columns() {
        let im = pattern(16);
        let out = apply_transform(
            &im,
            &Transform {
                flip_h: true,
                ..Transform::identity()
            },
        );
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(out.at(x, y, 0), im.at(15 - x, y, 0));
            }
        }
    }
}
