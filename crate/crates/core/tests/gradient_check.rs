mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cbf_core::classifier::ClassifierParams;
use common::reference_loss;

#[test]
fn analytic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let h = 1e-5;
    for case in 0..20u64 {
        let dim = rng.random_range(1..10);
        let n = rng.random_range(2..7);
        let hidden = (case % 2 == 1).then(|| rng.random_range(1..6));
        let mut p = ClassifierParams::<f64>::init(dim, n, hidden, case).unwrap();
        let flat: Vec<f64> = p
            .flatten()
            .iter()
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        p.set_flat(&flat).unwrap();
        let m = rng.random_range(1..12);
        let xs: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ys: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
        let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();

        let (loss, grad) = p.loss_and_gradient(&refs, &ys).unwrap();
        assert!(
            (loss - reference_loss(&p, &xs, &ys)).abs() <= 1e-9 * loss.abs().max(1.0),
            "case {case}: loss"
        );

        let analytic = grad.flatten();
        let mut probe = p.clone();
        for k in 0..flat.len() {
            let mut v = flat.clone();
            v[k] = flat[k] + h;
            probe.set_flat(&v).unwrap();
            let up = reference_loss(&probe, &xs, &ys);
            v[k] = flat[k] - h;
            probe.set_flat(&v).unwrap();
            let down = reference_loss(&probe, &xs, &ys);
            let numeric = (up - down) / (2.0 * h);
            let err =
                (numeric - analytic[k]).abs() / numeric.abs().max(analytic[k].abs()).max(1e-6);
            assert!(
                err <= 1e-4,
                "case {case} param {k}: analytic {} numeric {numeric}",
                analytic[k]
            );
        }
    }
}

#[test]
fn f32_gradient_tracks_f64() {
    let p64 = ClassifierParams::<f64>::init(4, 3, Some(3), 9).unwrap();
    let mut p32 = ClassifierParams::<f32>::init(4, 3, Some(3), 9).unwrap();
    p32.set_flat(&p64.flatten().iter().map(|&v| v as f32).collect::<Vec<_>>())
        .unwrap();
    let x64 = [0.3, -0.2, 0.8, 0.1];
    let x32 = x64.map(|v| v as f32);
    let (_, g64) = p64.loss_and_gradient(&[&x64], &[2]).unwrap();
    let (_, g32) = p32.loss_and_gradient(&[&x32], &[2]).unwrap();
    for (a, b) in g64.flatten().iter().zip(g32.flatten()) {
        assert!((a - b as f64).abs() < 1e-5);
    }
}
