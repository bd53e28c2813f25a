//! Frame-store round trips, addressing, sampling and virtual exposures.

use proptest::prelude::*;
use qrf_core::frame_store::{pack, row_bytes, inpaint_defects, BinaryFrame, BinaryFrameStore, Defect, DefectMask, StoreMeta};
use qrf_core::image::FluxImage;
use qrf_core::photon_sim::{sample_binary_frame, SpcConfig};

const META: StoreMeta = StoreMeta { frame_rate: 1e4, tau: 1e-4 };

fn frame_strategy(w: usize, h: usize) -> impl Strategy<Value = BinaryFrame> {
    proptest::collection::vec(0u8..=1, w * h).prop_map(move |bits| BinaryFrame::new(w, h, bits).unwrap())
}

fn sequence() -> impl Strategy<Value = Vec<BinaryFrame>> {
    (1usize..40, 1usize..12, 1usize..8)
        .prop_flat_map(|(w, h, n)| proptest::collection::vec(frame_strategy(w, h), n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn store_roundtrip_and_random_access(frames in sequence()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.qrfbin");
        let header = pack(&path, &frames, META).unwrap();
        let (w, h) = (frames[0].width(), frames[0].height());
        prop_assert_eq!(header.payload_bytes(), (row_bytes(w) * h * frames.len()) as u64);
        prop_assert_eq!(std::fs::metadata(&path).unwrap().len(), 44 + header.payload_bytes());
        let store = BinaryFrameStore::open(&path).unwrap();
        for (k, f) in frames.iter().enumerate() {
            prop_assert_eq!(&store.frame(k).unwrap(), f);
            for r in 0..h {
                for c in 0..w {
                    prop_assert_eq!(store.read_pixel(k, r, c).unwrap(), f.get(r, c));
                }
            }
        }
    }

    #[test]
    fn pack_unpack_is_identity(f in (1usize..70, 1usize..6).prop_flat_map(|(w, h)| frame_strategy(w, h))) {
        prop_assert_eq!(BinaryFrame::unpack(f.width(), f.height(), &f.pack()).unwrap(), f);
    }
}

#[test]
fn full_sensor_frame_is_one_eighth() {
    let f = BinaryFrame::zeros(512, 512);
    assert_eq!(f.pack().len(), 32_768);
    assert_eq!(f.pack().len() * 8, 512 * 512);
}

fn store_of(frames: &[BinaryFrame]) -> (tempfile::TempDir, BinaryFrameStore) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.qrfbin");
    pack(&path, frames, META).unwrap();
    let store = BinaryFrameStore::open(&path).unwrap();
    (dir, store)
}

#[test]
fn single_pixel_store_always_samples_that_pixel() {
    let (_dir, store) = store_of(&[BinaryFrame::new(1, 1, vec![1]).unwrap()]);
    for s in store.sample_uniform(1000, 3).unwrap() {
        assert_eq!((s.frame_index, s.row, s.col, s.value), (0, 0, 0, 1));
    }
}

#[test]
fn four_frame_store_samples_frames_uniformly() {
    let frames: Vec<_> = (0..4).map(|k| BinaryFrame::from_fn(5, 3, |r, c| (r + c + k) % 2 == 0)).collect();
    let (_dir, store) = store_of(&frames);
    let n = 1_000_000;
    let mut sampler = store.sampler(17).unwrap();
    let mut counts = [0usize; 4];
    for s in sampler.by_ref().take(n) {
        assert_eq!(s.value, frames[s.frame_index].get(s.row, s.col));
        counts[s.frame_index] += 1;
    }
    // One bit decoded per sample, nothing more.
    assert_eq!(sampler.decoded_pixels(), n);
    for c in counts {
        let f = c as f64 / n as f64;
        assert!((f - 0.25).abs() < 0.005, "{counts:?}");
    }
    assert_eq!(store.sample_uniform(256, 5).unwrap(), store.sample_uniform(256, 5).unwrap());
    assert_ne!(store.sample_uniform(256, 5).unwrap(), store.sample_uniform(256, 6).unwrap());
}

#[test]
fn virtual_exposure_of_ln2_sequence_concentrates_at_half() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.qrfbin");
    let spc = SpcConfig::new(1e-4, 1e4).unwrap();
    let flux = FluxImage::constant(8, 8, (std::f64::consts::LN_2 / 1e-4) as f32).unwrap();
    let frames: Vec<_> = (0..4096u64).map(|k| sample_binary_frame(&flux, &spc, k).unwrap()).collect();
    pack(&path, &frames, META).unwrap();
    let store = BinaryFrameStore::open(&path).unwrap();
    let mean = store.virtual_exposure(0, 4096).unwrap();
    assert!(mean.data().iter().all(|&m| (m - 0.5).abs() < 0.03), "{:?}", mean.data());
    assert_eq!(store.virtual_exposure(7, 1).unwrap(), frames[7].to_image());
}

#[test]
fn checkerboard_dead_pixel_takes_neighbourhood_majority() {
    let (w, h) = (9, 7);
    let frame = BinaryFrame::from_fn(w, h, |r, c| (r + c) % 2 == 0);
    for (r, c) in [(3usize, 4usize), (2, 2), (4, 5)] {
        let mut mask = DefectMask::new(w, h);
        mask.mark(r, c, Defect::Dead).unwrap();
        let out = inpaint_defects(&frame, &mask).unwrap();
        // Brute force over the 8-neighbourhood.
        let mut ones = 0;
        for dr in [-1i32, 0, 1] {
            for dc in [-1i32, 0, 1] {
                if (dr, dc) != (0, 0) {
                    ones += frame.get((r as i32 + dr) as usize, (c as i32 + dc) as usize) as usize;
                }
            }
        }
        assert_eq!(out.get(r, c), (ones > 4) as u8, "pixel ({r}, {c})");
        for rr in 0..h {
            for cc in 0..w {
                if (rr, cc) != (r, c) {
                    assert_eq!(out.get(rr, cc), frame.get(rr, cc));
                }
            }
        }
    }
}
