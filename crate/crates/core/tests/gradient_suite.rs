use desireme::training::gradcheck::{grad_check, random_instance, FaultInjection, GradCheckOptions};
use desireme::training::total_loss;
use desireme::{GateNormalization, MoeMode, Pooling, Similarity, TrainConfig};

fn config_for(i: usize) -> (MoeMode, TrainConfig) {
    let (pooling, normalization, similarity) = match i % 4 {
        0 => (Pooling::Weighted, GateNormalization::None, Similarity::Dot),
        1 => (Pooling::Weighted, GateNormalization::SumToOne, Similarity::Dot),
        2 => (Pooling::Top1, GateNormalization::None, Similarity::Dot),
        _ => (Pooling::Weighted, GateNormalization::None, Similarity::Cosine),
    };
    let config = TrainConfig {
        pooling,
        normalization,
        similarity,
        temperature: [1.0, 0.5, 2.0][i % 3],
        bce_weight: [1.0, 0.3, 0.0][i % 3],
        ..Default::default()
    };
    (config.mode(), config)
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut instance = 0;
    for d in [4, 8, 16] {
        for m in [2, 3, 4] {
            for b in [2, 4, 8] {
                let (mode, config) = config_for(instance);
                let (params, batch) = random_instance(d, m, b, mode, 1000 + instance as u64).unwrap();
                let refs: Vec<_> = batch.iter().collect();
                let report = grad_check(&params, &refs, &config, &GradCheckOptions::default()).unwrap();
                assert!(
                    report.passed(),
                    "d={d} M={m} B={b} {config:?}: {:?}",
                    &report.mismatches[..report.mismatches.len().min(5)]
                );
                assert_eq!(report.checked + report.kink_skipped, params.num_parameters());
                assert!(report.checked * 2 > params.num_parameters(), "too many kinks skipped");
                instance += 1;
            }
        }
    }
    assert!(instance >= 20);
}

#[test]
fn fault_injection_is_detected_in_every_tensor() {
    let (params, batch) = random_instance(8, 3, 4, MoeMode::default(), 5).unwrap();
    let refs: Vec<_> = batch.iter().collect();
    let config = TrainConfig::default();
    let (_, grads) = total_loss(&refs, &params, &config).unwrap();
    let names = params.tensor_names();
    for (tensor, g) in grads.tensors().iter().enumerate() {
        let (index, &value) = g
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        if value.abs() < 1e-3 {
            continue;
        }
        let options = GradCheckOptions {
            fault: Some(FaultInjection { tensor, index, factor: 1.05 }),
            ..Default::default()
        };
        let report = grad_check(&params, &refs, &config, &options).unwrap();
        assert!(
            report.mismatches.iter().any(|m| m.tensor == names[tensor] && m.index == index),
            "fault in {} not caught",
            names[tensor]
        );
    }
}
