//! Analytic ground-truth scenes built from constant-density primitives.

use serde::{Deserialize, Serialize};

use super::Medium;
use crate::camera::{Aabb, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Sphere { center: [f64; 3], radius: f64 },
    /// Axis-aligned box.
    Slab { min: [f64; 3], max: [f64; 3] },
}

impl Shape {
    pub fn contains(&self, p: &Vec3) -> bool {
        match self {
            Shape::Sphere { center, radius } => (p - Vec3::from(*center)).norm_squared() <= radius * radius,
            Shape::Slab { min, max } => (0..3).all(|a| p[a] >= min[a] && p[a] <= max[a]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Emitter {
    #[serde(flatten)]
    pub shape: Shape,
    pub density: f64,
    pub albedo: f64,
}

/// Overlapping emitters add their densities; albedo is the density-weighted
/// mean of the overlapping albedos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxScene {
    pub bounds: Aabb,
    #[serde(default)]
    pub emitters: Vec<Emitter>,
}

impl FluxScene {
    pub fn new(bounds: Aabb, emitters: Vec<Emitter>) -> Result<Self> {
        let scene = Self { bounds, emitters };
        scene.validate()?;
        Ok(scene)
    }

    pub fn empty(bounds: Aabb) -> Self {
        Self {
            bounds,
            emitters: Vec::new(),
        }
    }

    /// Uniform medium filling the whole bounds.
    pub fn homogeneous(bounds: Aabb, density: f64, albedo: f64) -> Result<Self> {
        Self::new(
            bounds,
            vec![Emitter {
                shape: Shape::Slab {
                    min: bounds.min,
                    max: bounds.max,
                },
                density,
                albedo,
            }],
        )
    }

    pub fn validate(&self) -> Result<()> {
        Aabb::new(self.bounds.min, self.bounds.max)?;
        for e in &self.emitters {
            if !(e.density >= 0.0 && e.density.is_finite()) {
                return Err(Error::invalid(format!("emitter density must be finite and >= 0, got {}", e.density)));
            }
            if !(0.0..=1.0).contains(&e.albedo) {
                return Err(Error::invalid(format!("emitter albedo must lie in [0, 1], got {}", e.albedo)));
            }
            if let Shape::Sphere { radius, .. } = e.shape {
                if !(radius > 0.0) {
                    return Err(Error::invalid("sphere radius must be positive"));
                }
            }
        }
        Ok(())
    }
}

impl Medium for FluxScene {
    fn bounds(&self) -> Aabb {
        self.bounds
    }

    fn sample(&self, p: &Vec3) -> (f64, f64) {
        let mut density = 0.0;
        let mut weighted = 0.0;
        for e in &self.emitters {
            if e.shape.contains(p) {
                density += e.density;
                weighted += e.density * e.albedo;
            }
        }
        if density > 0.0 {
            (density, weighted / density)
        } else {
            (0.0, 0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlapping_emitters_mix_by_density() {
        let b = Aabb::cube(1.0);
        let scene = FluxScene::new(
            b,
            vec![
                Emitter {
                    shape: Shape::Sphere {
                        center: [0.0; 3],
                        radius: 0.5,
                    },
                    density: 1.0,
                    albedo: 1.0,
                },
                Emitter {
                    shape: Shape::Slab {
                        min: [-1.0; 3],
                        max: [1.0, 1.0, 0.0],
                    },
                    density: 3.0,
                    albedo: 0.0,
                },
            ],
        )
        .unwrap();
        assert_eq!(scene.sample(&Vec3::new(0.0, 0.0, -0.1)), (4.0, 0.25));
        assert_eq!(scene.sample(&Vec3::new(0.0, 0.0, 0.1)), (1.0, 1.0));
        assert_eq!(scene.sample(&Vec3::new(0.9, 0.9, 0.9)), (0.0, 0.0));
    }

    #[test]
    fn invalid_emitters_are_rejected() {
        assert!(FluxScene::homogeneous(Aabb::cube(1.0), -1.0, 0.5).is_err());
        assert!(FluxScene::homogeneous(Aabb::cube(1.0), 1.0, 1.5).is_err());
    }

    #[test]
    fn parses_from_toml() {
        let text = r#"
            bounds = { min = [-1.0, -1.0, -1.0], max = [1.0, 1.0, 1.0] }
            [[emitters]]
            shape = "sphere"
            center = [0.0, 0.0, 0.0]
            radius = 0.4
            density = 5.0
            albedo = 0.8
        "#;
        let scene: FluxScene = toml::from_str(text).unwrap();
        scene.validate().unwrap();
        assert_eq!(scene.emitters.len(), 1);
    }
}
