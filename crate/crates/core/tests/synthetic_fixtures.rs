use ndarray::{s, Array2};
use proptest::prelude::*;
use strata::eval::{build_label_space, evaluate, map_labels, EvalConfig, HashedEmbedder};
use strata::optim::AdamConfig;
use strata::probe::{
    detect_transition, probe_layers, score_probe, train_class_probe, ProbeConfig, ProbeTarget, ProbeTrajectory, ScoreMode,
    TargetSource,
};
use strata::sae::{reconstruction_fvu, NormStats, SaeConfig, SaeTrainer, SaeVariant};
use strata::synth::{
    noisy_confidence_fixture, phase_stack, planted_dictionary, separable_clusters, ungrounded_fixture, DetectionFixture,
    DetectionSpec, DictionarySpec, PhaseStackSpec,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn planted_rows_are_sums_of_k_unit_atoms(seed in 0u64..1000, k in 1usize..6) {
        let spec = DictionarySpec { samples: 40, k, seed, ..Default::default() };
        let p = planted_dictionary(&spec);
        for col in p.dictionary.columns() {
            prop_assert!((col.dot(&col) - 1.0).abs() < 1e-12);
        }
        for (r, code) in p.codes.rows().into_iter().enumerate() {
            let active: Vec<usize> = (0..spec.m).filter(|&i| code[i] != 0.0).collect();
            prop_assert_eq!(active.len(), k);
            for j in 0..spec.d {
                let want: f64 = active.iter().map(|&i| code[i] * p.dictionary[[j, i]]).sum();
                prop_assert!((p.data[[r, j]] - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn topk_sae_fits_a_planted_dictionary() {
    let spec = DictionarySpec {
        samples: 10_000,
        ..Default::default()
    };
    let mut x = planted_dictionary(&spec).data;
    let stats = NormStats::fit(|| x.rows().into_iter().map(|r| r.to_slice().unwrap())).unwrap();
    for mut row in x.rows_mut() {
        stats.apply_in_place(row.as_slice_mut().unwrap());
    }
    let mut t = SaeTrainer::new(SaeConfig {
        optimizer: AdamConfig {
            lr: 1e-3,
            ..Default::default()
        },
        ..SaeConfig::new(spec.d, 2, SaeVariant::TopK, 8)
    })
    .unwrap();
    let before = reconstruction_fvu(&t.model, x.view(), x.view()).unwrap();
    for _ in 0..20 {
        for start in (0..x.nrows()).step_by(256) {
            let end = (start + 256).min(x.nrows());
            t.step(x.slice(s![start..end, ..]), None).unwrap();
        }
    }
    let after = reconstruction_fvu(&t.model, x.view(), x.view()).unwrap();
    assert!(after < 0.15 && after < before / 4.0, "FVU {before} -> {after}");
}

#[test]
fn separable_clusters_probe_reaches_full_ap50() {
    let (x, labels) = separable_clusters(600, 8, 12.0, 4);
    let probe = train_class_probe(x.view(), &labels, 2, 0, &ProbeConfig::default()).unwrap();
    let slots: Vec<(String, u32)> = (0..labels.len()).map(|i| (format!("s{i:04}"), 0)).collect();
    let refs: Vec<ProbeTarget> = labels
        .iter()
        .map(|&y| ProbeTarget {
            source: TargetSource::GroundTruth,
            y_class: y,
            y_bbox: [0.5, 0.5, 0.2, 0.2],
        })
        .collect();
    let ap50 = score_probe(ScoreMode::ClassOnly, Some(&probe), None, x.view(), &slots, &refs, 2).unwrap();
    assert!(ap50 >= 0.99, "AP50 {ap50}");
}

#[test]
fn phase_stack_dips_at_the_bottleneck() {
    let spec = PhaseStackSpec::default();
    let stack = phase_stack(&spec);
    let cfg = ProbeConfig {
        epochs: 50,
        optimizer: AdamConfig {
            lr: 1e-2,
            ..Default::default()
        },
        ..Default::default()
    };
    let results = probe_layers(&stack.layers, &stack.slots, &stack.targets, spec.classes, &cfg).unwrap();
    let curve: Vec<(u16, f64)> = results.iter().map(|r| (r.layer_index, r.joint_ap50)).collect();
    let report = detect_transition(&ProbeTrajectory::new("joint", curve.clone()), cfg.delta).unwrap();
    assert_eq!(report.l_star, Some(4), "{curve:?}");
    assert!(report.dip_depth >= 0.1);
}

fn ap(f: &DetectionFixture, cfg: &EvalConfig) -> f64 {
    let provider = HashedEmbedder::new(512);
    let space = build_label_space(&f.classes, cfg, &provider).unwrap();
    let mapped = map_labels(&f.detections, &space, cfg, &provider).unwrap();
    evaluate(&mapped, &f.ground_truth, &f.classes, cfg).unwrap().ap
}

#[test]
fn negatives_and_objectness_help_their_fixtures() {
    let spec = DetectionSpec::default();
    let ungrounded = ungrounded_fixture(&spec);
    let with_neg = EvalConfig {
        use_negatives: true,
        ..Default::default()
    };
    assert!(ap(&ungrounded, &with_neg) > ap(&ungrounded, &EvalConfig::default()));

    let noisy = noisy_confidence_fixture(&spec);
    let with_obj = EvalConfig {
        use_objectness: true,
        ..Default::default()
    };
    assert!(ap(&noisy, &with_obj) > ap(&noisy, &EvalConfig::default()));
}

#[test]
fn planted_data_is_seed_deterministic() {
    let a = planted_dictionary(&DictionarySpec {
        samples: 100,
        ..Default::default()
    });
    let b = planted_dictionary(&DictionarySpec {
        samples: 100,
        ..Default::default()
    });
    let bits = |m: &Array2<f64>| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.data), bits(&b.data));
}
