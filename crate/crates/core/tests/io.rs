use barter_core::io::{instance_to_json, parse_instance, AllocationDocument, IoError};
use barter_core::oracle::{brute_force, random_instance, RandomSpec, RandomWeights};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn instances_round_trip(agents in 1usize..6, items in 1usize..5, density in 0.1f64..0.9,
                            caps in 1u32..4, explicit in any::<bool>(), seed in any::<u64>()) {
        let spec = RandomSpec {
            agents,
            items,
            density,
            values: (1, 9),
            caps: (1, caps),
            weights: if explicit { RandomWeights::Explicit } else { RandomWeights::ItemValue },
        };
        let inst = random_instance(&spec, seed).unwrap();
        let text = instance_to_json(&inst);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(instance_to_json(&back), text);
    }
}

#[test]
fn unknown_field_is_a_parse_error() {
    let text = r#"{"items": [{"id": "a", "value": 1}], "agents": [], "colour": 1}"#;
    match parse_instance(text) {
        Err(IoError::Parse { message, .. }) => assert!(message.contains("colour"), "{message}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn allocation_documents_round_trip() {
    for seed in 0..20 {
        let spec = RandomSpec {
            agents: 4,
            items: 3,
            density: 0.6,
            ..Default::default()
        };
        let inst = random_instance(&spec, seed).unwrap();
        let best = brute_force(&inst).unwrap();
        let doc = AllocationDocument::new(&inst, &best.best_allocation, seed, &best.best_utility)
            .unwrap();
        assert_eq!(doc.report.utility, best.best_utility);
        let back = AllocationDocument::parse(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.allocation(), best.best_allocation);
    }
}
