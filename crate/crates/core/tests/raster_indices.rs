use std::collections::BTreeSet;

use msseg::indices::{
    ccci, connected_components, ndvi, ndwi, split_water_by_area, threshold, Connectivity, Polarity,
};
use msseg::pansharpen::{pansharpen, SharpenMethod, INTENSITY_EPSILON};
use msseg::raster::msr::{decode_mask, decode_raster, encode_mask, encode_raster};
use msseg::raster::{
    normalize, resample, stack, BandName, BinaryMask, ClassLabel, LabelMask, MultispectralRaster,
    RasterData, ResampleMethod,
};
use proptest::prelude::*;

const POOL: [BandName; 8] = BandName::M_BANDS;

fn raster_strategy() -> impl Strategy<Value = MultispectralRaster> {
    (1usize..7, 1usize..7, 1usize..4, 0u8..3).prop_flat_map(|(w, h, b, kind)| {
        let n = w * h * b;
        let data = match kind {
            0 => prop::collection::vec(any::<u8>(), n).prop_map(RasterData::U8).boxed(),
            1 => prop::collection::vec(0u16..2048, n).prop_map(RasterData::U16).boxed(),
            _ => prop::collection::vec(any::<f32>(), n).prop_map(RasterData::F32).boxed(),
        };
        data.prop_map(move |d| {
            let bit_depth = match d {
                RasterData::U8(_) => 8,
                RasterData::U16(_) => 11,
                RasterData::F32(_) => 32,
            };
            MultispectralRaster::new(w, h, POOL[..b].to_vec(), bit_depth, d).unwrap()
        })
    })
}

fn f32_raster(w: usize, h: usize, bands: &[BandName], planes: Vec<Vec<f32>>) -> MultispectralRaster {
    MultispectralRaster::from_f32_planes(w, h, bands.to_vec(), planes).unwrap()
}

fn index_raster() -> impl Strategy<Value = MultispectralRaster> {
    let bands = [BandName::Green, BandName::Red, BandName::RedEdge, BandName::Nir1];
    prop::collection::vec(prop::collection::vec(0.0f32..1.0, 36), 4)
        .prop_map(move |planes| f32_raster(6, 6, &bands, planes))
}

fn scaled(r: &MultispectralRaster, k: f32) -> MultispectralRaster {
    let planes = r.planes_f32().into_iter().map(|p| p.into_iter().map(|v| v * k).collect()).collect();
    f32_raster(r.width(), r.height(), r.bands(), planes)
}

fn area_multiset(areas: &[usize]) -> Vec<usize> {
    let mut a = areas.to_vec();
    a.sort_unstable();
    a
}

proptest! {
    #[test]
    fn msr_round_trip_is_bitwise(r in raster_strategy()) {
        let back = decode_raster(&encode_raster(&r)).unwrap();
        prop_assert_eq!(back, r);
    }

    #[test]
    fn mask_round_trip(bits in prop::collection::vec(0u8..2, 3 * 25)) {
        let classes = vec![ClassLabel::Buildings, ClassLabel::Trees, ClassLabel::Track];
        let m = LabelMask::new(5, 5, classes, bits).unwrap();
        prop_assert_eq!(decode_mask(&encode_mask(&m)).unwrap(), m);
    }

    #[test]
    fn normalize_is_bounded_and_monotone(values in prop::collection::vec(0u16..2048, 64)) {
        let r = MultispectralRaster::new(8, 8, vec![BandName::Red], 11, RasterData::U16(values.clone())).unwrap();
        let n = normalize(&r, 0.01, 0.99).unwrap().raster.band_f32(0);
        prop_assert!(n.iter().all(|v| (0.0..=1.0).contains(v)));
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] < values[j] {
                    prop_assert!(n[i] <= n[j]);
                }
            }
        }
    }

    #[test]
    fn nearest_resample_introduces_no_new_values(
        r in raster_strategy(), tw in 1usize..13, th in 1usize..13,
    ) {
        let out = resample(&r, tw, th, ResampleMethod::Nearest).unwrap();
        prop_assert_eq!(out.dtype(), r.dtype());
        for b in 0..r.band_count() {
            let src: BTreeSet<u32> = r.band_f32(b).iter().map(|v| v.to_bits()).collect();
            prop_assert!(out.band_f32(b).iter().all(|v| src.contains(&v.to_bits())));
        }
    }

    #[test]
    fn stack_then_select_recovers_parts(
        a in prop::collection::vec(0u16..2048, 2 * 16),
        b in prop::collection::vec(0u16..2048, 16),
    ) {
        let ra = MultispectralRaster::new(4, 4, vec![BandName::Red, BandName::Green], 11, RasterData::U16(a)).unwrap();
        let rb = MultispectralRaster::new(4, 4, vec![BandName::Nir1], 11, RasterData::U16(b)).unwrap();
        let s = stack(&[ra.clone(), rb.clone()]).unwrap();
        let expected: Vec<BandName> = ra.bands().iter().chain(rb.bands()).cloned().collect();
        prop_assert_eq!(s.bands(), &expected[..]);
        prop_assert_eq!(s.select_bands(ra.bands()).unwrap(), ra);
        prop_assert_eq!(s.select_bands(rb.bands()).unwrap(), rb);
    }

    #[test]
    fn indices_are_bounded_and_scale_invariant(r in index_raster()) {
        for map in [ndwi(&r).unwrap(), ndvi(&r).unwrap()] {
            prop_assert!(map.defined().all(|v| (-1.0..=1.0).contains(&v)));
        }
        prop_assert!(ccci(&r).unwrap().defined().all(f32::is_finite));
        for k in [0.5f32, 2.0, 10.0] {
            let rk = scaled(&r, k);
            for (f, tol) in [(ndwi as fn(&MultispectralRaster) -> _, 1e-5f32), (ndvi, 1e-5), (ccci, 1e-3)] {
                let a = f(&r).unwrap();
                let b = f(&rk).unwrap();
                for (x, y) in a.values.iter().zip(&b.values) {
                    // Pixels next to the epsilon guard may flip definedness under scaling.
                    if x.is_nan() || y.is_nan() {
                        continue;
                    }
                    prop_assert!((x - y).abs() <= tol * (1.0 + x.abs()), "k={} {} vs {}", k, x, y);
                }
            }
        }
    }

    #[test]
    fn area_split_partitions_foreground(
        bits in prop::collection::vec(any::<bool>(), 100), t in 1usize..30, eight in any::<bool>(),
    ) {
        let m = BinaryMask::from_fn(10, 10, |x, y| bits[y * 10 + x]);
        let conn = if eight { Connectivity::Eight } else { Connectivity::Four };
        let c = connected_components(&m, conn);
        let (ww, st) = split_water_by_area(&c, t).unwrap();
        for p in 0..100 {
            prop_assert!(ww.data()[p] & st.data()[p] == 0);
            prop_assert_eq!(ww.data()[p] | st.data()[p], m.data()[p]);
        }
    }

    #[test]
    fn component_areas_are_stable_under_transposition(bits in prop::collection::vec(any::<bool>(), 90)) {
        // Transposing the mask reorders component ids but keeps the area multiset.
        let m = BinaryMask::from_fn(9, 10, |x, y| bits[y * 9 + x]);
        let t = BinaryMask::from_fn(10, 9, |x, y| m.get(y, x));
        for conn in [Connectivity::Four, Connectivity::Eight] {
            let a = connected_components(&m, conn);
            let b = connected_components(&t, conn);
            prop_assert_eq!(area_multiset(&a.areas), area_multiset(&b.areas));
            prop_assert_eq!(a.foreground(), m.count());
        }
    }

    #[test]
    fn brovey_preserves_band_ratios(
        ms in prop::collection::vec(prop::collection::vec(0.05f32..1.0, 4), 3),
        pan in prop::collection::vec(0.05f32..1.0, 16),
    ) {
        let bands = [BandName::Blue, BandName::Green, BandName::Red];
        let ms = f32_raster(2, 2, &bands, ms);
        let pan = f32_raster(4, 4, &[BandName::Pan], vec![pan]);
        let out = pansharpen(&pan, &ms, SharpenMethod::Brovey).unwrap();
        let up = resample(&ms, 4, 4, ResampleMethod::Bilinear).unwrap();
        prop_assert_eq!(out.bands(), ms.bands());
        for p in 0..16 {
            let intensity: f32 = (0..3).map(|b| up.band_f32(b)[p]).sum::<f32>() / 3.0;
            prop_assume!(intensity > INTENSITY_EPSILON);
            for i in 0..3 {
                for j in 0..3 {
                    let lhs = out.band_f32(i)[p] * up.band_f32(j)[p];
                    let rhs = out.band_f32(j)[p] * up.band_f32(i)[p];
                    prop_assert!((lhs - rhs).abs() <= 1e-5 * (1.0 + lhs.abs()));
                }
            }
        }
    }

    #[test]
    fn weighted_mean_is_affine_in_w(
        ms in prop::collection::vec(0.0f32..1.0, 4),
        pan in prop::collection::vec(0.0f32..1.0, 16),
        w in 0.0f32..1.0,
    ) {
        let ms = f32_raster(2, 2, &[BandName::Red], vec![ms]);
        let pan = f32_raster(4, 4, &[BandName::Pan], vec![pan]);
        let at = |w| pansharpen(&pan, &ms, SharpenMethod::WeightedMean(w)).unwrap().band_f32(0);
        let (o0, o1, ow) = (at(0.0), at(1.0), at(w));
        for p in 0..16 {
            let expected = (1.0 - w) * o0[p] + w * o1[p];
            prop_assert!((ow[p] - expected).abs() < 1e-5);
        }
    }
}

#[test]
fn threshold_then_split_on_two_bodies() {
    // A 600 px river band and a 12 px pond, split at 100 px.
    let m = BinaryMask::from_fn(60, 20, |x, y| y < 10 || (y >= 14 && y < 17 && (50..54).contains(&x)));
    let c = connected_components(&m, Connectivity::Eight);
    assert_eq!(area_multiset(&c.areas), vec![12, 600]);
    let (ww, st) = split_water_by_area(&c, 100).unwrap();
    assert_eq!((ww.count(), st.count()), (600, 12));

    let values: Vec<f32> = m.data().iter().map(|&b| if b == 1 { 0.4 } else { -0.4 }).collect();
    let map = msseg::indices::IndexMap {
        width: 60,
        height: 20,
        name: "ndwi".into(),
        values,
    };
    assert_eq!(threshold(&map, 0.0, Polarity::Above), m);
}
