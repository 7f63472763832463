//! Multi-view shaded renders of meshes and the training-time image
//! augmentation.

mod augment;
mod camera;
mod image;
mod raster;

use serde::{Deserialize, Serialize};

pub use augment::{apply_transform, augment, AugmentParams, Transform};
pub use camera::{ring_cameras, CameraPose};
pub use image::{read_viewset, write_png, write_viewset, Image, ViewSet};
pub use raster::{render_points, render_view, render_views};

/// Renderer settings. Light direction is given in camera space and points
/// from the surface toward the light.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub view_count: usize,
    pub image_side: usize,
    pub scale: f64,
    pub camera_radius: f64,
    pub fov_deg: f64,
    pub elevation_deg: f64,
    /// Rotation about the x axis applied to the model before rendering.
    pub model_pitch_deg: f64,
    pub light_dir: [f64; 3],
    pub ambient: f64,
    pub diffuse: f64,
    pub background_min: f64,
    pub background_max: f64,
    pub seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            view_count: 4,
            image_side: 224,
            scale: 0.5,
            camera_radius: 2.0,
            fov_deg: 40.0,
            elevation_deg: 0.0,
            model_pitch_deg: 90.0,
            light_dir: [-0.3, 0.5, -1.0],
            ambient: 0.15,
            diffuse: 0.85,
            background_min: 0.5,
            background_max: 1.0,
            seed: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = RenderConfig {
            view_count: 8,
            image_side: 96,
            ..RenderConfig::default()
        };
        let text = toml::to_string(&cfg).unwrap();
        let back: RenderConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: RenderConfig = toml::from_str("view_count = 1").unwrap();
        assert_eq!(partial.view_count, 1);
        assert_eq!(partial.image_side, 224);
    }
}
