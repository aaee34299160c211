use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use kernel_bandits::harness::{emit_trace, parse_trace, TraceRow};
use kernel_bandits::quadprog::{kkt_certificate, trs_minimize};
use kernel_bandits::weights::softmax;
use kernel_bandits::{QuadraticObjective, RegretTrace, WeightState};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6f64..1e6, -1.0f64..1.0, Just(0.0), Just(f64::MIN_POSITIVE), Just(-1e-300)]
}

proptest! {
    #[test]
    fn trace_csv_round_trips(rows in prop::collection::vec((0usize..50, finite(), finite(), finite()), 1..40),
                             best in 0usize..50, best_loss in finite()) {
        let rows: Vec<TraceRow> = rows
            .into_iter()
            .enumerate()
            .map(|(t, (a, l, c, r))| TraceRow { round: t + 1, action_index: a, loss: l, cum_loss: c, cum_regret: r })
            .collect();
        let trace = RegretTrace { rows, best_action: best, best_fixed_cum_loss: best_loss };
        let mut buf = Vec::new();
        emit_trace(&trace, &mut buf).unwrap();
        let back = parse_trace(std::io::Cursor::new(buf)).unwrap();
        prop_assert_eq!(back, trace);
    }

    #[test]
    fn trs_solution_is_certified(d in 1usize..6, entries in prop::collection::vec(-5.0f64..5.0, 36),
                                 lin in prop::collection::vec(-5.0f64..5.0, 6)) {
        let a = DMatrix::from_fn(d, d, |i, j| entries[i * 6 + j]);
        let b = (&a + a.transpose()) * 0.5;
        let obj = QuadraticObjective::new(b, DVector::from_column_slice(&lin[..d])).unwrap();
        let sol = trs_minimize(&obj, 1e-12).unwrap();
        prop_assert!(sol.point.norm() <= 1.0 + 1e-12);
        let cert = kkt_certificate(&obj, &sol.point.to_dvector(), 1e-8);
        prop_assert!(cert.holds, "{:?}", cert);
    }

    #[test]
    fn weights_equal_softmax_of_cumulative_losses(losses in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 1..60),
                                                  eta in 0.0f64..5.0) {
        let mut state = WeightState::uniform(4).unwrap();
        let mut cum = [0.0; 4];
        for l in &losses {
            state.update(eta, l).unwrap();
            for (c, x) in cum.iter_mut().zip(l) {
                *c += x;
            }
        }
        let oracle = softmax(&cum.iter().map(|c| -eta * c).collect::<Vec<_>>());
        for (p, q) in state.probabilities().iter().zip(&oracle) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }
}
