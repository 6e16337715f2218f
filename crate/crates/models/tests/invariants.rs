use aggrobench_models::nn::{argmax, softmax};
use aggrobench_models::{
    bilstm_sequence, lstm_step, BiLstmParams, LstmParams, LstmState, Recurrence, RecurrentNet,
};
use ndarray::Array1;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vector(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, len)
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-50.0f64..50.0, 1..8)) {
        let p = softmax(Array1::from(logits.clone()).view());
        prop_assert!((p.sum() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert_eq!(argmax(p.as_slice().unwrap()), argmax(&logits));
    }

    #[test]
    fn softmax_ignores_a_shift(logits in vector(3), shift in -100.0f64..100.0) {
        let a = softmax(Array1::from(logits.clone()).view());
        let b = softmax(Array1::from(logits).mapv(|v| v + shift).view());
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn lstm_state_stays_bounded(seed in any::<u64>(), x in vector(3), steps in 1usize..12) {
        let p = LstmParams::random(3, 4, &mut ChaCha8Rng::seed_from_u64(seed));
        let x = Array1::from(x);
        let mut state = LstmState::zeros(4);
        for t in 1..=steps {
            state = lstm_step(x.view(), &state, &p).unwrap();
            // |h| < 1 and |C_t| grows by at most 1 per step.
            prop_assert!(state.h.iter().all(|v| v.abs() < 1.0));
            prop_assert!(state.c.iter().all(|v| v.abs() <= t as f64));
        }
    }

    #[test]
    fn bilstm_reversal_swaps_directions(seed in any::<u64>(), len in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = BiLstmParams::new(
            Recurrence::Gated(LstmParams::random(2, 3, &mut rng)),
            Recurrence::Gated(LstmParams::random(2, 3, &mut rng)),
            ndarray::Array2::from_elem((3, 3), 0.1),
            ndarray::Array2::from_elem((3, 3), -0.2),
            Array1::zeros(3),
        ).unwrap();
        let inputs: Vec<Array1<f64>> = (0..len)
            .map(|t| Array1::from(vec![t as f64 * 0.3 - 0.5, (seed % 7) as f64 * 0.1]))
            .collect();
        let reversed: Vec<Array1<f64>> = inputs.iter().rev().cloned().collect();
        let a = bilstm_sequence(&inputs, &p).unwrap();
        let b = bilstm_sequence(&reversed, &p.swapped()).unwrap();
        for t in 0..len {
            for (x, y) in a.outputs[t].iter().zip(b.outputs[len - 1 - t].iter()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn recurrent_probabilities_are_distributions(
        seed in any::<u64>(),
        ids in prop::collection::vec(0u32..20, 0..15),
        bidirectional in any::<bool>(),
    ) {
        let net = RecurrentNet::random(20, 4, 5, bidirectional, &mut ChaCha8Rng::seed_from_u64(seed));
        let p = net.probabilities(&ids).unwrap();
        prop_assert_eq!(p.len(), 3);
        prop_assert!((p.sum() - 1.0).abs() < 1e-9);
    }
}
