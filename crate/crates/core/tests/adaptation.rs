use scwls::adapt::{adapt_weights, pair_gradient, sequence_pairs, AdaptConfig};
use scwls::simulator::{generate_sequence, ImagePairParams, SceneParams, SequenceParams};
use scwls::weight_fit::WeightParams;

fn clean_sequence(seed: u64) -> scwls::simulator::SyntheticSequence {
    let params = SequenceParams {
        scene: SceneParams {
            outlier_fraction: 0.0,
            pixel_noise_sigma: 0.0,
            coord_noise_sigma: 0.0,
            ..SceneParams::default()
        },
        n_frames: 4,
        ..SequenceParams::default()
    };
    generate_sequence(&params, seed).unwrap()
}

#[test]
fn perfect_weights_on_clean_data_are_a_fixed_point() {
    let seq = clean_sequence(2);
    let pairs = sequence_pairs(&seq, &[0, 1, 2], 1, &ImagePairParams::default()).unwrap();
    let theta = WeightParams::optimistic(seq.gt_points.len());
    let cfg = AdaptConfig::default();
    for pair in &pairs {
        let (_, grad) = pair_gradient(pair, &theta, &cfg).unwrap();
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(norm < 1e-6, "gradient norm {norm}");
    }
    let out = adapt_weights(&pairs, &theta, &AdaptConfig { iterations: 5, ..cfg }).unwrap();
    let moved = out.theta.theta.iter().zip(&theta.theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(moved < 1e-3, "θ moved by {moved}");
}

#[test]
fn noiseless_adaptation_never_ends_above_its_start() {
    let seq = clean_sequence(3);
    let pairs = sequence_pairs(&seq, &[0, 1], 1, &ImagePairParams::default()).unwrap();
    let n = seq.gt_points.len();
    let theta = WeightParams::new((0..n).map(|i| 0.3 + (i % 5) as f64 * 0.4).collect()).unwrap();
    let out = adapt_weights(&pairs, &theta, &AdaptConfig { iterations: 10, ..AdaptConfig::default() }).unwrap();
    assert_eq!(out.loss_curve.len(), 10);
    assert!(out.loss_curve.last().unwrap() <= &(out.loss_curve[0] + 1e-12));
}

#[test]
fn adaptation_is_deterministic_and_leaves_coordinates_alone() {
    let seq = generate_sequence(&SequenceParams::default(), 4).unwrap();
    let pairs = sequence_pairs(&seq, &[1, 2], 1, &ImagePairParams::default()).unwrap();
    let snapshot = pairs.clone();
    let theta = WeightParams::new(
        seq.outlier_mask
            .iter()
            .map(|&o| if o { -1.0 } else { 1.0 })
            .collect(),
    )
    .unwrap();
    let cfg = AdaptConfig { iterations: 5, ..AdaptConfig::default() };
    let a = adapt_weights(&pairs, &theta, &cfg).unwrap();
    let b = adapt_weights(&pairs, &theta, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(pairs, snapshot);
}

#[test]
fn mismatched_theta_is_rejected() {
    let seq = clean_sequence(5);
    let pairs = sequence_pairs(&seq, &[0], 1, &ImagePairParams::default()).unwrap();
    let theta = WeightParams::optimistic(seq.gt_points.len() - 1);
    assert!(adapt_weights(&pairs, &theta, &AdaptConfig::default()).is_err());
    assert!(adapt_weights(&[], &theta, &AdaptConfig::default()).is_err());
}
