mod common;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cbf_core::ontology::apply_intra_in_order;
use cbf_core::synth::{corrupt_probmap, default_benchmark, CorruptionModel};
use cbf_core::{
    aggregate_units, apply_intra, argmax_labels, build_graph, builtin_rules, slic_segment,
    SlicParams,
};

#[test]
fn correction_ignores_unit_order() {
    let scenes = default_benchmark(20, 11).unwrap();
    let model = CorruptionModel {
        seed: 11,
        ..CorruptionModel::default()
    };
    let slic = SlicParams {
        k_target: 1000,
        compactness: 10.0,
        max_iters: 10,
        seed: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut corrected = 0;
    for (i, s) in scenes.iter().enumerate() {
        let tax = s.labels.taxonomy().clone();
        let rules = builtin_rules(&tax).unwrap().intra();
        let probs = corrupt_probmap(&s.labels, &model.for_scene(i)).unwrap();
        let (stage1, conf) = argmax_labels(&probs, tax).unwrap();
        let spmap = slic_segment(&probs.as_image(), &slic).unwrap();
        let units = aggregate_units(&spmap, &stage1, &conf, common::F_T).unwrap();
        let graph = build_graph(&units, stage1.width(), stage1.height()).unwrap();
        let (base, log) = apply_intra(&units, &graph, &rules, &stage1).unwrap();
        corrected += log.len();
        let mut order: Vec<usize> = (0..units.len()).collect();
        for _ in 0..10 {
            order.shuffle(&mut rng);
            let (out, l) = apply_intra_in_order(&units, &graph, &rules, &stage1, &order).unwrap();
            assert_eq!(out, base, "scene {i}");
            assert_eq!(l, log, "scene {i}");
        }
    }
    assert!(corrected > 0, "the scenes must exercise the reasoner");
}

#[test]
fn order_must_be_a_permutation() {
    let b = common::build(&["GGG", "GvG", "GGG"]);
    let rules = builtin_rules(&common::ucm()).unwrap().intra();
    assert!(apply_intra_in_order(&b.units, &b.graph, &rules, &b.stage1, &[0]).is_err());
    assert!(apply_intra_in_order(&b.units, &b.graph, &rules, &b.stage1, &[0, 0]).is_err());
}
