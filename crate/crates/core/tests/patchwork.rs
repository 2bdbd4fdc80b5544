use msseg::neuralnet::Tensor4;
use msseg::patchwork::{
    boundary_profile, predict_tiled, reflect_pad, reflect_pad_1d, seam_report, stitch, tile_plan,
    BoundaryProfile, ConstantModel, Dih4, IdentityModel, PatchGeometry, PatchPredictor,
    PatchSampler, PlanarImage,
};
use msseg::raster::BinaryMask;
use msseg::Error;
use ndarray::Array2;
use proptest::prelude::*;

fn probe(n: usize) -> Array2<u32> {
    Array2::from_shape_fn((n, n), |(r, c)| (r * n + c) as u32)
}

/// Reference implementations written directly from the index formulas.
fn oracle(g: Dih4, a: &Array2<u32>) -> Array2<u32> {
    let n = a.nrows();
    let rot90 = |a: &Array2<u32>| Array2::from_shape_fn((n, n), |(r, c)| a[(c, n - 1 - r)]);
    let flip_h = |a: &Array2<u32>| Array2::from_shape_fn((n, n), |(r, c)| a[(r, n - 1 - c)]);
    match g {
        Dih4::Identity => a.clone(),
        Dih4::Rot90 => rot90(a),
        Dih4::Rot180 => rot90(&rot90(a)),
        Dih4::Rot270 => rot90(&rot90(&rot90(a))),
        Dih4::FlipH => flip_h(a),
        Dih4::FlipV => Array2::from_shape_fn((n, n), |(r, c)| a[(n - 1 - r, c)]),
        Dih4::Transpose => a.t().to_owned(),
        Dih4::AntiTranspose => Array2::from_shape_fn((n, n), |(r, c)| a[(n - 1 - c, n - 1 - r)]),
    }
}

#[test]
fn dih4_matches_reference_and_satisfies_group_axioms() {
    for n in [7, 8] {
        let p = probe(n);
        for g in Dih4::ALL {
            assert_eq!(g.apply(&p).unwrap(), oracle(g, &p), "{g:?} n={n}");
            let back = g.inverse().apply(&g.apply(&p).unwrap()).unwrap();
            assert_eq!(back, p);
            for h in Dih4::ALL {
                let sequential = h.apply(&g.apply(&p).unwrap()).unwrap();
                assert_eq!(g.then(h).apply(&p).unwrap(), sequential, "{g:?} then {h:?}");
                for k in Dih4::ALL {
                    assert_eq!(g.then(h).then(k), g.then(h.then(k)));
                }
            }
        }
    }
    let distinct: std::collections::HashSet<Vec<u32>> =
        Dih4::ALL.iter().map(|g| g.apply(&probe(8)).unwrap().into_raw_vec_and_offset().0).collect();
    assert_eq!(distinct.len(), 8);
}

#[test]
fn reflect_pad_examples() {
    assert_eq!(reflect_pad_1d(&[1, 2, 3], 2).unwrap(), vec![3, 2, 1, 2, 3, 2, 1]);
    assert!(matches!(reflect_pad_1d(&[1, 2, 3], 3), Err(Error::MarginTooLarge { .. })));
    let a = Array2::from_shape_fn((3, 4), |(r, c)| (r * 4 + c) as i32);
    let p = reflect_pad(&a, 2).unwrap();
    assert_eq!(p.dim(), (7, 8));
    assert_eq!(p[(0, 0)], a[(2, 2)]);
    assert_eq!(p[(6, 7)], a[(0, 1)]);
}

proptest! {
    #[test]
    fn reflect_pad_keeps_interior_and_value_set(
        w in 2usize..9, h in 2usize..9, margin in 0usize..8, seed in any::<u64>(),
    ) {
        prop_assume!(margin < w.min(h));
        let a = Array2::from_shape_fn((h, w), |(r, c)| (seed ^ (r * 31 + c) as u64) % 1000);
        let p = reflect_pad(&a, margin).unwrap();
        prop_assert_eq!(p.dim(), (h + 2 * margin, w + 2 * margin));
        let set: std::collections::HashSet<u64> = a.iter().copied().collect();
        prop_assert!(p.iter().all(|v| set.contains(v)));
        for r in 0..h {
            for c in 0..w {
                prop_assert_eq!(p[(r + margin, c + margin)], a[(r, c)]);
            }
        }
    }

    #[test]
    fn tile_plan_is_an_exact_cover(w in 8usize..200, h in 8usize..200, half in 1usize..5) {
        let out = 2 * half;
        let geom = PatchGeometry::new(out + 4, out).unwrap();
        let plan = tile_plan(w, h, &geom).unwrap();
        let mut hits = vec![0u8; w * h];
        for t in &plan {
            prop_assert!(t.out_x + out <= w && t.out_y + out <= h);
            for y in t.out_y + t.keep_y..t.out_y + t.keep_y + t.keep_h {
                for x in t.out_x + t.keep_x..t.out_x + t.keep_x + t.keep_w {
                    hits[y * w + x] += 1;
                }
            }
        }
        prop_assert!(hits.iter().all(|&n| n == 1));
        let kept: usize = plan.iter().map(|t| t.keep_w * t.keep_h).sum();
        prop_assert_eq!(kept, w * h);
    }

    #[test]
    fn stitching_true_windows_is_identity(w in 8usize..60, h in 8usize..60, half in 1usize..5) {
        let out = 2 * half;
        let geom = PatchGeometry::new(out + 2, out).unwrap();
        let truth = Array2::from_shape_fn((h, w), |(r, c)| (r * 1000 + c) as u32);
        let plan = tile_plan(w, h, &geom).unwrap();
        let tiles: Vec<_> = plan
            .iter()
            .map(|t| {
                let v = (0..out * out).map(|i| truth[(t.out_y + i / out, t.out_x + i % out)]).collect();
                (*t, v)
            })
            .collect();
        prop_assert_eq!(stitch(w, h, out, &tiles).unwrap(), truth);
    }
}

#[test]
fn identity_model_reconstructs_the_image_through_tiling() {
    let (w, h) = (97, 61);
    let plane: Vec<f32> = (0..w * h).map(|i| ((i * 7919) % 1013) as f32).collect();
    let image = PlanarImage::new(w, h, vec![plane.clone()]).unwrap();
    let geom = PatchGeometry::new(28, 20).unwrap();
    let map = predict_tiled(&image, &geom, &IdentityModel { crop: 4 }, 5).unwrap();
    assert_eq!(map.dim(), (h, w));
    assert_eq!(map.as_slice().unwrap(), &plane[..]);

    let smooth = PlanarImage::new(w, h, vec![(0..w * h).map(|i| (i % w) as f32 / w as f32).collect()]).unwrap();
    let map = predict_tiled(&smooth, &geom, &IdentityModel { crop: 4 }, 5).unwrap();
    let report = seam_report(&map, &tile_plan(w, h, &geom).unwrap());
    assert!(!report.has_artifact(), "{report:?}");
}

#[test]
fn crop_must_match_geometry_margin() {
    let image = PlanarImage::new(32, 32, vec![vec![0.0; 32 * 32]]).unwrap();
    let geom = PatchGeometry::new(28, 20).unwrap();
    assert!(predict_tiled(&image, &geom, &IdentityModel { crop: 2 }, 4).is_err());
    let small = PlanarImage::new(16, 40, vec![vec![0.0; 16 * 40]]).unwrap();
    assert!(matches!(
        predict_tiled(&small, &geom, &IdentityModel { crop: 4 }, 4),
        Err(Error::ImageTooSmall { .. })
    ));
}

fn scene(w: usize, h: usize) -> (PlanarImage, BinaryMask) {
    let a: Vec<f32> = (0..w * h).map(|i| i as f32).collect();
    let b: Vec<f32> = (0..w * h).map(|i| -(i as f32)).collect();
    let mask = BinaryMask::from_fn(w, h, |x, y| (x * 3 + y * 5) % 7 < 3);
    (PlanarImage::new(w, h, vec![a, b]).unwrap(), mask)
}

#[test]
fn sampling_is_deterministic_and_targets_follow_inputs() {
    let (img, mask) = scene(40, 33);
    let (img2, mask2) = scene(25, 25);
    let geom = PatchGeometry::new(12, 8).unwrap();
    let sampler = PatchSampler::new(vec![(&img, &mask), (&img2, &mask2)], geom, 42).unwrap();
    let a = sampler.batch(0, 64);
    let b = PatchSampler::new(vec![(&img, &mask), (&img2, &mask2)], geom, 42).unwrap().batch(0, 64);
    assert_eq!(a.inputs.data, b.inputs.data);
    assert_eq!(a.targets.data, b.targets.data);
    assert_eq!(a.origins, b.origins);
    // Patch k is the same whether drawn alone or inside a batch.
    let single = sampler.batch(17, 1);
    assert_eq!(single.inputs.sample(0), a.inputs.sample(17));

    let seen: std::collections::HashSet<Dih4> = a.origins.iter().map(|o| o.transform).collect();
    assert!(seen.len() > 4);

    let sources = [(&img, &mask), (&img2, &mask2)];
    for (i, o) in a.origins.iter().enumerate() {
        let (src, m) = sources[o.image];
        let undo = o.transform.inverse();
        let input = undo.apply_plane(a.inputs.plane(i, 0), 12);
        for r in 0..12 {
            for c in 0..12 {
                assert_eq!(input[r * 12 + c], src.planes[0][(o.y + r) * src.width + o.x + c]);
            }
        }
        let target = undo.apply_plane(a.targets.plane(i, 0), 8);
        for r in 0..8 {
            for c in 0..8 {
                assert_eq!(target[r * 8 + c], m.get(o.x + 2 + c, o.y + 2 + r) as u8 as f32);
            }
        }
    }
}

#[test]
fn different_seeds_give_different_patches() {
    let (img, mask) = scene(64, 64);
    let geom = PatchGeometry::new(12, 8).unwrap();
    let a = PatchSampler::new(vec![(&img, &mask)], geom, 1).unwrap().batch(0, 16);
    let b = PatchSampler::new(vec![(&img, &mask)], geom, 2).unwrap().batch(0, 16);
    assert_ne!(a.origins, b.origins);
}

#[test]
fn constant_half_profile_is_ln2_everywhere() {
    let (img, mask) = scene(40, 40);
    let profile = boundary_profile(&ConstantModel { value: 0.5, crop: 0 }, vec![(&img, &mask)], 16, 10, 3, 4).unwrap();
    assert_eq!(profile.bins.len(), 8);
    for b in &profile.bins {
        assert!((b.mean_bce - std::f64::consts::LN_2).abs() < 1e-6);
    }
    let total: u64 = profile.bins.iter().map(|b| b.pixel_count).sum();
    assert_eq!(total, 10 * 16 * 16);
    let mut buf = Vec::new();
    profile.write_csv(&mut buf).unwrap();
    assert!(String::from_utf8_lossy(&buf).starts_with("bin,pixel_count,mean_bce\n"));
    assert_eq!(BoundaryProfile::read_csv(&buf[..]).unwrap(), profile.bins);
}

/// Gets worse toward the patch border, like a network short of context.
struct EdgeBlind;

impl PatchPredictor for EdgeBlind {
    fn output_crop(&self) -> usize {
        0
    }

    fn predict_batch(&self, inputs: &Tensor4<f32>) -> msseg::Result<Tensor4<f32>> {
        let n = inputs.h;
        let mut out = Tensor4::zeros(inputs.n, 1, n, n);
        for (i, v) in out.data.iter_mut().enumerate() {
            let (r, c) = ((i / n) % n, i % n);
            let d = msseg::patchwork::chebyshev_bin(r, c, n) as f32 / (n / 2) as f32;
            *v = 0.5 - 0.45 * (1.0 - d);
        }
        Ok(out)
    }
}

#[test]
fn edge_blind_model_has_a_positive_trend() {
    let (img, _) = scene(40, 40);
    let empty = BinaryMask::zeros(40, 40);
    let profile = boundary_profile(&EdgeBlind, vec![(&img, &empty)], 16, 4, 0, 4).unwrap();
    assert!(profile.trend().unwrap() > 0.99);
}
