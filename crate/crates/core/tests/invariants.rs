use std::path::Path;

use proptest::prelude::*;

use posenet::loss::{loss_pointcloud, loss_pointcloud_penalized, RawPose};
use posenet::mesh::{parse_obj, sample_surface, shapes};
use posenet::occlusion::{apply_occlusion, occlusion_amount, random_spec, OcclusionSpec};
use posenet::render::{rasterize_silhouette, render_shaded, CameraIntrinsics};
use posenet::{Pose, Quaternion};

fn camera() -> CameraIntrinsics {
    CameraIntrinsics::kinect_vga().resized(80, 60).unwrap()
}

fn quaternion() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-1.0f64..1.0).prop_filter("nonzero", |q| q.iter().map(|c| c * c).sum::<f64>() > 1e-2)
}

fn pose() -> impl Strategy<Value = Pose> {
    (-0.1f64..0.1, -0.1f64..0.1, 0.7f64..1.2, quaternion())
        .prop_map(|(x, y, z, q)| Pose::new([x, y, z], Quaternion::from_array(q).canonicalize().unwrap()).unwrap())
}

#[test]
fn builtin_meshes_survive_obj_round_trip() {
    for name in shapes::NAMES {
        let mesh = shapes::by_name(name).unwrap();
        let back = parse_obj(&mesh.to_obj_string(), Path::new(name)).unwrap();
        assert_eq!(back.triangles(), mesh.triangles(), "{name}");
        for (a, b) in back.vertices().iter().zip(mesh.vertices()) {
            assert_eq!(a, b, "{name}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shaded_support_is_the_silhouette(p in pose()) {
        let k = camera();
        let mesh = shapes::tripod();
        let mask = rasterize_silhouette(&mesh, &p, &k).unwrap();
        let shaded = render_shaded(&mesh, &p, &k, [0.0, 0.0, -1.0]).unwrap();
        let support: Vec<bool> = shaded.data().iter().map(|&v| v > 0).collect();
        prop_assert_eq!(support.as_slice(), mask.data());
    }

    #[test]
    fn point_cloud_loss_ignores_sign_and_scale(p in pose(), raw in quaternion(), s in 0.1f64..10.0) {
        let cloud = sample_surface(&shapes::tripod(), 64, 3).unwrap().points;
        let pred = RawPose::new([0.0, 0.0, 1.0], raw);
        let flipped = RawPose::new([0.0, 0.0, 1.0], raw.map(|c| -s * c));
        let a = loss_pointcloud(&pred, &p, &cloud).unwrap().value;
        let b = loss_pointcloud(&flipped, &p, &cloud).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        let pa = loss_pointcloud_penalized(&pred, &p, &cloud).unwrap().value;
        let pb = loss_pointcloud_penalized(&flipped, &p, &cloud).unwrap().value;
        // Exactly one of the two hemispheres pays the penalty.
        prop_assert!(pa >= a && pb >= b);
        let n = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assert!(((pa - a) + (pb - b) - raw[0].abs() / n).abs() < 1e-9);
    }

    #[test]
    fn occlusion_only_removes_pixels(p in pose(), radius in 1.0f64..30.0, seed in any::<u64>()) {
        let mask = rasterize_silhouette(&shapes::tripod(), &p, &camera()).unwrap();
        prop_assume!(mask.count() > 0);
        let spec = random_spec(&mask, radius, seed).unwrap();
        let occluded = apply_occlusion(&mask, &spec).unwrap();
        prop_assert!(occluded.is_subset_of(&mask));
        let amount = occlusion_amount(&mask, &occluded).unwrap();
        // The center is a mask pixel, so at least one pixel goes.
        prop_assert!(amount > 0.0 && amount <= 1.0);
        let tiny = OcclusionSpec { radius: 0.5, ..spec };
        prop_assert!(apply_occlusion(&mask, &tiny).is_err());
    }
}
