use hypertrust::data::{generate_synthetic, SyntheticConfig};
use hypertrust::social::{build_social_hypergraph, SocialConfig};
use hypertrust::trainer::{train, TrainConfig};

fn window_means(values: &[f64], width: usize) -> Vec<f64> {
    values.chunks_exact(width).map(|c| c.iter().sum::<f64>() / width as f64).collect()
}

// Views and negatives are redrawn every epoch, so the per-epoch loss is a
// sample of a moving objective. Smoothed over 10 epochs it falls steadily
// at first and then fluctuates by about 1% on a plateau.
#[test]
fn loss_history_is_finite_deterministic_and_falls() {
    let ds = generate_synthetic(&SyntheticConfig::default()).unwrap();
    let hg = build_social_hypergraph(&ds.profiles(), &SocialConfig::default()).unwrap().hypergraph;
    let cfg = TrainConfig {
        embedding_dim: 32,
        ..TrainConfig::default()
    };
    let model = train(&hg, &cfg).unwrap();
    let losses: Vec<f64> = model.loss_history.iter().map(|r| r.loss.total).collect();
    assert_eq!(losses.len(), 200);
    assert!(losses.iter().all(|l| l.is_finite()));

    let means = window_means(&losses, 10);
    let first_half: f64 = means[..10].iter().sum::<f64>() / 10.0;
    let second_half: f64 = means[10..].iter().sum::<f64>() / 10.0;
    assert!(second_half < first_half, "{means:?}");
    assert!(means.iter().skip(1).all(|m| *m < means[0]), "{means:?}");
    assert!(means[..4].windows(2).all(|w| w[1] < w[0]), "{means:?}");

    let again = train(&hg, &cfg).unwrap();
    assert_eq!(
        losses.iter().map(|l| l.to_bits()).collect::<Vec<_>>(),
        again.loss_history.iter().map(|r| r.loss.total.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn zero_epochs_rejected() {
    let ds = generate_synthetic(&SyntheticConfig {
        num_devices: 8,
        num_communities: 2,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let hg = build_social_hypergraph(&ds.profiles(), &SocialConfig::default()).unwrap().hypergraph;
    let cfg = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    assert!(matches!(train(&hg, &cfg), Err(hypertrust::Error::Parameter(_))));
}
