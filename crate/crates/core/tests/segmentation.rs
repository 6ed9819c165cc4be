use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rangesr::meanshift::segment;
use rangesr::{ColorImage, MsParams, SegmentMap};

/// Flood-fill count of 4-connected components of equal id.
fn components(seg: &SegmentMap) -> usize {
    let (w, h) = (seg.width(), seg.height());
    let ids = seg.ids();
    let mut seen = vec![false; w * h];
    let mut count = 0;
    for start in 0..w * h {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            let mut push = |j: usize| {
                if !seen[j] && ids[j] == ids[i] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                push(i - 1);
            }
            if x + 1 < w {
                push(i + 1);
            }
            if y > 0 {
                push(i - w);
            }
            if y + 1 < h {
                push(i + w);
            }
        }
    }
    count
}

fn quadrants(w: usize, h: usize, rng: &mut ChaCha8Rng) -> ColorImage {
    let colors: Vec<[u8; 3]> = (0..4).map(|_| rng.random()).collect();
    let sharp = ColorImage::from_fn(w, h, |x, y| {
        let q = usize::from(x >= w / 2) + 2 * usize::from(y >= h / 2);
        let c = colors[q];
        let mut px = [0u8; 3];
        for k in 0..3 {
            px[k] = (i16::from(c[k]) + rng.random_range(-6..=6)).clamp(0, 255) as u8;
        }
        px
    });
    box_blur(&sharp)
}

fn box_blur(img: &ColorImage) -> ColorImage {
    let (w, h) = (img.width(), img.height());
    ColorImage::from_fn(w, h, |x, y| {
        let mut sum = [0u32; 3];
        let mut n = 0;
        for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
            for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                let p = img.pixel(xx, yy);
                for k in 0..3 {
                    sum[k] += u32::from(p[k]);
                }
                n += 1;
            }
        }
        sum.map(|s| ((s + n / 2) / n) as u8)
    })
}

#[test]
fn larger_bandwidths_rarely_add_segments() {
    let small = MsParams {
        spatial: 3.0,
        color: 4.0,
        min_region: 4,
        ..MsParams::default()
    };
    let large = MsParams {
        spatial: 6.0,
        color: 8.0,
        min_region: 8,
        ..MsParams::default()
    };
    let mut holds = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = quadrants(32, 32, &mut rng);
        let fine = segment(&img, &small).unwrap().len();
        let coarse = segment(&img, &large).unwrap().len();
        if coarse <= fine {
            holds += 1;
        }
    }
    assert!(
        holds >= 95,
        "coarser segmentation held in {holds}/100 colorings"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn segments_partition_the_image(
        seed in any::<u64>(),
        w in 1usize..24,
        h in 1usize..24,
        palette in 1usize..6,
        min_region in 1usize..12,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let colors: Vec<[u8; 3]> = (0..palette).map(|_| rng.random()).collect();
        let img = ColorImage::from_fn(w, h, |_, _| colors[rng.random_range(0..palette)]);
        let p = MsParams { spatial: 2.5, color: 8.0, min_region, ..MsParams::default() };
        let seg = segment(&img, &p).unwrap();

        prop_assert_eq!(seg.ids().len(), w * h);
        let mut sizes = vec![0usize; seg.len()];
        for &id in seg.ids() {
            prop_assert!((id as usize) < seg.len());
            sizes[id as usize] += 1;
        }
        prop_assert!(sizes.iter().all(|&s| s > 0), "ids are not contiguous");
        prop_assert_eq!(components(&seg), seg.len(), "a segment is not 4-connected");
        let floor = min_region.min(w * h);
        prop_assert!(sizes.iter().all(|&s| s >= floor), "segment below min_region: {:?}", sizes);
    }
}
