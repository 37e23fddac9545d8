//! Fixtures shared by the benchmarks.

use physcon_core::collision::ConvexPart;
use physcon_core::scenegeom::PointCloud;
use physcon_core::se3::exp_so3;
use physcon_core::synth::{generate_synthetic_scene, NoiseModel};
use physcon_core::{Pose, Scene, Vec3};

/// Two overlapping boxes and two separated cylinders, each with poses.
pub fn part_pairs() -> Vec<(ConvexPart, Pose, ConvexPart, Pose)> {
    let cube = ConvexPart::cuboid(Vec3::new(0.05, 0.04, 0.03)).unwrap();
    let cyl = ConvexPart::cylinder(0.04, 0.1, 16).unwrap();
    let tilt = |w: [f64; 3], t: [f64; 3]| Pose::new(exp_so3(&Vec3::from(w)), Vec3::from(t));
    vec![
        (cube.clone(), tilt([0.1, 0.2, 0.3], [0.0; 3]), cube, tilt([-0.3, 0.1, 0.0], [0.06, 0.01, 0.02])),
        (cyl.clone(), tilt([0.4, 0.0, 0.1], [0.0; 3]), cyl, tilt([0.0, 0.5, 0.2], [0.15, 0.03, 0.0])),
    ]
}

/// Noisy synthetic tabletop scene with `objects` movables.
pub fn tabletop_scene(objects: usize) -> Scene {
    generate_synthetic_scene(7, objects, &NoiseModel::default()).unwrap().scene
}

/// `n` points, 70% on the plane z = 0.8 and the rest scattered above it.
pub fn plane_cloud(n: usize) -> PointCloud {
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let points = (0..n)
        .map(|k| {
            let (x, y) = (next(), next());
            if k % 10 < 7 {
                Vec3::new(x, y, 0.8 + 1e-3 * next())
            } else {
                Vec3::new(x, y, 0.4 + 0.5 * next())
            }
        })
        .collect();
    PointCloud::from_points(points)
}
