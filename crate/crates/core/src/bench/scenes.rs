//! Named ground-truth scenes.

use serde::{Deserialize, Serialize};

use crate::camera::{Aabb, Vec3};
use crate::field::{Emitter, FluxScene, Medium, Shape, VoxelField};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneId {
    /// Smooth Gaussian density blobs with a textured albedo, stored as a
    /// voxel field so the reconstruction can represent it exactly.
    Blobs,
    /// Three analytic spheres inside a faint slab.
    Spheres,
    /// A single uniform slab filling the bounds.
    Slab,
}

impl std::str::FromStr for SceneId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(SceneId::Blobs),
            "spheres" => Ok(SceneId::Spheres),
            "slab" => Ok(SceneId::Slab),
            _ => Err(Error::Config(format!("unknown scene `{s}` (blobs, spheres, slab)"))),
        }
    }
}

/// A ground-truth medium of either kind.
#[derive(Debug, Clone)]
pub enum GroundTruth {
    Field(VoxelField),
    Analytic(FluxScene),
}

impl Medium for GroundTruth {
    fn bounds(&self) -> Aabb {
        match self {
            GroundTruth::Field(f) => f.bounds(),
            GroundTruth::Analytic(s) => s.bounds(),
        }
    }

    fn sample(&self, p: &Vec3) -> (f64, f64) {
        match self {
            GroundTruth::Field(f) => f.sample(p),
            GroundTruth::Analytic(s) => s.sample(p),
        }
    }
}

pub fn build_scene(id: SceneId, resolution: usize) -> Result<GroundTruth> {
    let bounds = Aabb::cube(1.0);
    match id {
        SceneId::Blobs => {
            let blobs = [
                (Vec3::new(0.0, 0.0, 0.0), 0.35, 7.0),
                (Vec3::new(0.45, 0.3, 0.2), 0.2, 6.0),
                (Vec3::new(-0.4, -0.35, 0.3), 0.22, 6.0),
                (Vec3::new(0.15, -0.45, -0.4), 0.18, 5.0),
            ];
            let field = VoxelField::from_fn([resolution; 3], bounds, |p| {
                let density: f64 = blobs
                    .iter()
                    .map(|(c, s, a)| a * (-(p - c).norm_squared() / (2.0 * s * s)).exp())
                    .sum();
                let albedo = 0.5 + 0.35 * (3.0 * p.x).sin() * (3.0 * p.y + 1.0).cos() + 0.1 * (4.0 * p.z).sin();
                (density + 1e-3, albedo.clamp(0.05, 0.95))
            })?;
            Ok(GroundTruth::Field(field))
        }
        SceneId::Spheres => {
            let sphere = |c: [f64; 3], r: f64, density: f64, albedo: f64| Emitter {
                shape: Shape::Sphere { center: c, radius: r },
                density,
                albedo,
            };
            Ok(GroundTruth::Analytic(FluxScene::new(
                bounds,
                vec![
                    sphere([0.0, 0.0, 0.0], 0.4, 20.0, 0.8),
                    sphere([0.5, 0.4, 0.2], 0.25, 20.0, 0.4),
                    sphere([-0.45, -0.4, 0.3], 0.25, 20.0, 0.95),
                    Emitter {
                        shape: Shape::Slab {
                            min: [-1.0, -1.0, -0.9],
                            max: [1.0, 1.0, -0.7],
                        },
                        density: 3.0,
                        albedo: 0.2,
                    },
                ],
            )?))
        }
        SceneId::Slab => Ok(GroundTruth::Analytic(FluxScene::homogeneous(bounds, 1.0, 0.7)?)),
    }
}
