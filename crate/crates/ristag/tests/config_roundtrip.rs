use proptest::prelude::*;

use ristag::config::{LinkSpec, Policy, ScenarioConfig, Sweep, SweepVar, TagSpec};

fn link() -> impl Strategy<Value = LinkSpec> {
    (0.5f64..20.0, 1.0f64..1e3).prop_map(|(m, d)| LinkSpec::new(m, d))
}

fn policy() -> impl Strategy<Value = Policy> {
    prop_oneof![
        Just(Policy::Optimal),
        Just(Policy::Random),
        Just(Policy::NoRis),
        (1u32..=16).prop_map(|bits| Policy::Quantized { bits }),
    ]
}

fn sweep() -> impl Strategy<Value = Option<Sweep>> {
    proptest::option::of(
        (0usize..SweepVar::ALL.len(), -50.0f64..50.0, 1usize..20).prop_map(|(i, lo, steps)| {
            Sweep {
                var: SweepVar::ALL[i],
                lo,
                hi: lo + 1.0,
                steps,
            }
        }),
    )
}

fn scenario() -> impl Strategy<Value = ScenarioConfig> {
    (
        (
            -30.0f64..50.0,
            0.01f64..0.99,
            0.01f64..1.0,
            0.01f64..1.0,
            0usize..1000,
        ),
        (link(), link(), link(), link(), any::<bool>()),
        proptest::collection::vec((link(), link(), link()), 0..4),
        (
            policy(),
            -20.0f64..30.0,
            any::<bool>(),
            sweep(),
            1usize..1_000_000,
            any::<u64>(),
        ),
        proptest::option::of("[a-z/._]{1,20}"),
    )
        .prop_map(|(sys, links, tags, run, output)| {
            let mut c = ScenarioConfig {
                power_dbm: sys.0,
                beta: sys.1,
                phi: sys.2,
                eta: sys.3,
                elements: sys.4,
                derive_d_g: links.4,
                tags: tags
                    .into_iter()
                    .map(|(f, u, g)| TagSpec { f, u, g })
                    .collect(),
                policy: run.0,
                gamma_th_db: run.1,
                energy_constraints: run.2,
                sweep: run.3,
                trials: run.4,
                seed: run.5,
                output,
                ..ScenarioConfig::default()
            };
            c.links.f = links.0;
            c.links.u = links.1;
            c.links.g = links.2;
            c.links.h = links.3;
            c
        })
}

proptest! {
    #[test]
    fn emit_parse_emit_is_idempotent(c in scenario()) {
        let once = c.to_json();
        let parsed = ScenarioConfig::from_json(&once).unwrap();
        prop_assert_eq!(&parsed, &c);
        prop_assert_eq!(parsed.to_json(), once);
        prop_assert_eq!(parsed.hash(), c.hash());
    }
}
