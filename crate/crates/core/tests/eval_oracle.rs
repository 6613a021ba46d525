mod common;

use common::{oracle_iou, oracle_metrics, random_instance, to_library};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use strata::eval::{
    build_label_space, evaluate, iou, map_labels, EvalConfig, HashedEmbedder, MappedDetection, Provenance, RawDetection,
};

#[test]
fn evaluator_matches_brute_force_oracle() {
    let cfg = EvalConfig::default();
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (dets, gts, n) = random_instance(&mut rng);
        let (expect_ap, expect_ap50, expect_ar) = oracle_metrics(&dets, &gts, n, cfg.max_dets);
        let (mapped, truth, classes) = to_library(&dets, &gts, n);
        let r = evaluate(&mapped, &truth, &classes, &cfg).unwrap();
        assert!((r.ap - expect_ap).abs() < 1e-9, "seed {seed}: AP {} vs {expect_ap}", r.ap);
        assert!((r.ap50 - expect_ap50).abs() < 1e-9, "seed {seed}: AP50 {} vs {expect_ap50}", r.ap50);
        assert!((r.ar - expect_ar).abs() < 1e-9, "seed {seed}: AR {} vs {expect_ar}", r.ar);
    }
}

#[test]
fn small_max_dets_matches_oracle_recall() {
    let cfg = EvalConfig {
        max_dets: 2,
        ..Default::default()
    };
    for seed in 1000..1050 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (dets, gts, n) = random_instance(&mut rng);
        let (_, _, expect_ar) = oracle_metrics(&dets, &gts, n, 2);
        let (mapped, truth, classes) = to_library(&dets, &gts, n);
        let r = evaluate(&mapped, &truth, &classes, &cfg).unwrap();
        assert!((r.ar - expect_ar).abs() < 1e-9, "seed {seed}");
    }
}

fn arb_box() -> impl Strategy<Value = [f64; 4]> {
    (0.0..50.0f64, 0.0..50.0f64, 0.5..30.0f64, 0.5..30.0f64).prop_map(|(x, y, w, h)| [x, y, x + w, y + h])
}

proptest! {
    #[test]
    fn iou_matches_oracle_and_is_symmetric(a in arb_box(), b in arb_box()) {
        let v = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!((v - iou(&b, &a)).abs() < 1e-15);
        prop_assert!((v - oracle_iou(&a, &b)).abs() < 1e-15);
    }

    #[test]
    fn positive_score_scaling_leaves_metrics_unchanged(seed in 0u64..10_000, c in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (dets, gts, n) = random_instance(&mut rng);
        let (mapped, truth, classes) = to_library(&dets, &gts, n);
        let scaled: Vec<MappedDetection> = mapped.iter().cloned().map(|mut d| { d.score *= c; d }).collect();
        let cfg = EvalConfig::default();
        let a = evaluate(&mapped, &truth, &classes, &cfg).unwrap();
        let b = evaluate(&scaled, &truth, &classes, &cfg).unwrap();
        prop_assert!((a.ap - b.ap).abs() < 1e-12 && (a.ar - b.ar).abs() < 1e-12 && (a.ap50 - b.ap50).abs() < 1e-12);
    }
}

const VOCAB: [&str; 8] = ["cat", "dog", "car", "person", "an object", "a thing", "parts of dog", "tree"];

fn arb_detections() -> impl Strategy<Value = Vec<RawDetection>> {
    prop::collection::vec((0usize..3, 0usize..VOCAB.len(), 0.0..1.0f64, arb_box()), 1..30).prop_map(|v| {
        v.into_iter()
            .map(|(img, t, conf, bbox)| RawDetection {
                sample_id: format!("img{img}"),
                bbox,
                text: VOCAB[t].to_string(),
                confidence: Some(conf),
                objectness: None,
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn argmax_mapping_ignores_class_order(dets in arb_detections()) {
        let e = HashedEmbedder::new(256);
        let cfg = EvalConfig::default();
        let fwd: Vec<String> = ["cat", "dog", "car", "person"].map(String::from).to_vec();
        let rev: Vec<String> = fwd.iter().rev().cloned().collect();
        let a = map_labels(&dets, &build_label_space(&fwd, &cfg, &e).unwrap(), &cfg, &e).unwrap();
        let b = map_labels(&dets, &build_label_space(&rev, &cfg, &e).unwrap(), &cfg, &e).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.label, &y.label);
        }
    }

    #[test]
    fn raising_min_conf_never_keeps_more(dets in arb_detections(), lo in 0.0..1.0f64, step in 0.0..1.0f64) {
        let e = HashedEmbedder::new(64);
        let classes: Vec<String> = ["cat", "dog"].map(String::from).to_vec();
        let kept = |t: f64| {
            let cfg = EvalConfig { min_conf: t, ..Default::default() };
            let space = build_label_space(&classes, &cfg, &e).unwrap();
            map_labels(&dets, &space, &cfg, &e).unwrap().iter().filter(|d| d.is_kept()).count()
        };
        let hi = (lo + step).min(1.0);
        prop_assert!(kept(hi) <= kept(lo));
    }

    #[test]
    fn verbatim_negatives_are_always_filtered(dets in arb_detections()) {
        let e = HashedEmbedder::new(128);
        let cfg = EvalConfig { use_negatives: true, ..Default::default() };
        let classes: Vec<String> = ["cat", "dog"].map(String::from).to_vec();
        let space = build_label_space(&classes, &cfg, &e).unwrap();
        for d in map_labels(&dets, &space, &cfg, &e).unwrap() {
            if cfg.negatives.contains(&d.text) {
                prop_assert!(matches!(d.provenance, Provenance::FilteredNegative | Provenance::FilteredConf));
            }
        }
    }
}
