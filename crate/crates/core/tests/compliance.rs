use activesearch_core::acqopt::FocusSearchParams;
use activesearch_core::acquisition::{AcquisitionKind, AcquisitionSpec};
use activesearch_core::boloop::{run_random, Trace};
use activesearch_core::compliance::{
    aggregate, label_of, propose, record_from_verdicts, strategy_of, ComplianceRecord,
};
use activesearch_core::kernels::KernelFamily;
use activesearch_core::surrogate::SurrogateSpec;
use activesearch_core::testfns::FunctionId;
use proptest::prelude::*;

fn focus(seed: u64) -> FocusSearchParams {
    FocusSearchParams {
        n_points: 200,
        n_shrinks: 3,
        n_restarts: 2,
        seed,
        ..Default::default()
    }
}

fn trace(f: usize, seed: u64, len: usize) -> Trace {
    run_random(FunctionId::new(f).unwrap(), len, seed)
}

fn acqs(beta: f64) -> Vec<AcquisitionSpec> {
    vec![AcquisitionSpec::pi(), AcquisitionSpec::ei(), AcquisitionSpec::ucb(beta)]
}

fn surrogate() -> impl proptest::strategy::Strategy<Value = SurrogateSpec> {
    prop_oneof![
        prop::sample::select(KernelFamily::ALL.to_vec()).prop_map(SurrogateSpec::gp),
        Just(SurrogateSpec::rf()),
    ]
}

fn spec_of(kind: usize, beta: f64) -> AcquisitionSpec {
    match kind {
        0 => AcquisitionSpec::pi(),
        1 => AcquisitionSpec::ei(),
        _ => AcquisitionSpec::ucb(beta),
    }
}

proptest! {
    #[test]
    fn label_is_none_exactly_when_nothing_is_close(
        ds in prop::collection::vec((0usize..3, 0.0..0.5f64), 1..4),
        threshold in 0.01..0.4f64,
    ) {
        let mut seen = Vec::new();
        let distances: Vec<(AcquisitionSpec, f64)> = ds
            .into_iter()
            .filter(|(k, _)| if seen.contains(k) { false } else { seen.push(*k); true })
            .map(|(k, d)| (spec_of(k, 1.0), d))
            .collect();
        let min = distances.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
        let label = label_of(&distances, threshold);
        prop_assert_eq!(label.is_none(), min > threshold);
        if let Some(k) = label {
            let d = distances.iter().find(|x| x.0.kind == k).unwrap().1;
            prop_assert_eq!(d, min);
        }
        // Exactly at the threshold still counts.
        prop_assert!(label_of(&distances, min).is_some());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn distances_do_not_depend_on_acquisition_order(
        s in surrogate(),
        f in 0usize..15,
        seed in any::<u64>(),
        beta in prop::sample::select(vec![0.0, 0.5, 1.0]),
    ) {
        let t = trace(f, seed, 8);
        let forward = acqs(beta);
        let mut backward = forward.clone();
        backward.reverse();
        let a = propose(&t, &s, &forward, 3, &focus(seed)).unwrap();
        let b = propose(&t, &s, &backward, 3, &focus(seed)).unwrap();
        let ra = a.classify(&forward, 0.1).unwrap();
        let rb = b.classify(&backward, 0.1).unwrap();
        prop_assert_eq!(ra.strategy, rb.strategy);
        for (va, vb) in ra.verdicts.iter().zip(&rb.verdicts) {
            prop_assert_eq!(va.label, vb.label);
            for kind in [AcquisitionKind::Pi, AcquisitionKind::Ei, AcquisitionKind::Ucb] {
                prop_assert_eq!(va.distance_of(kind), vb.distance_of(kind));
            }
        }
    }

    #[test]
    fn raising_the_threshold_keeps_compliant_iterations(
        s in surrogate(),
        f in 0usize..15,
        seed in any::<u64>(),
        lo in 0.02..0.2f64,
        extra in 0.0..0.2f64,
    ) {
        let t = trace(f, seed, 9);
        let table = propose(&t, &s, &acqs(1.0), 3, &focus(seed)).unwrap();
        let narrow = table.classify(&acqs(1.0), lo).unwrap().compliant_iterations();
        let wide = table.classify(&acqs(1.0), lo + extra).unwrap().compliant_iterations();
        prop_assert!(narrow.iter().all(|n| wide.contains(n)), "{narrow:?} vs {wide:?}");
    }

    #[test]
    fn stored_records_reproduce_their_strategy(
        s in surrogate(),
        f in 0usize..15,
        seed in any::<u64>(),
        threshold in 0.05..0.3f64,
    ) {
        let t = trace(f, seed, 9);
        let table = propose(&t, &s, &acqs(0.5), 3, &focus(seed)).unwrap();
        let r = table.classify(&acqs(0.5), threshold).unwrap();
        prop_assert_eq!(strategy_of(&r.verdicts), r.strategy);

        let json = serde_json::to_string(&r).unwrap();
        let back: ComplianceRecord = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(&back, &r);
        let rebuilt = record_from_verdicts(back.trace_id, back.surrogate, back.threshold, back.verdicts);
        prop_assert_eq!(&rebuilt, &r);

        let table = aggregate([&r, &rebuilt]);
        prop_assert_eq!(table.total(), 2);
        prop_assert_eq!(table.count(&r.surrogate, r.strategy), 2);
    }
}

#[test]
fn reanalysis_is_reproducible() {
    let t = trace(4, 17, 10);
    let s = SurrogateSpec::gp(KernelFamily::Matern52);
    let a = propose(&t, &s, &acqs(1.0), 3, &focus(2)).unwrap();
    let b = propose(&t, &s, &acqs(1.0), 3, &focus(2)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 7);
    assert!(activesearch_core::compliance::Strategy::ALL.contains(&a.classify(&acqs(1.0), 0.1).unwrap().strategy));
}
