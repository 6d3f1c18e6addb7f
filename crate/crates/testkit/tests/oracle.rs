use agriflow_core::model::{parse_definition, serialize_definition, validate_definition, NodeKind};
use agriflow_testkit::gen::count_nodes;
use agriflow_testkit::{engine_reachable, isomorphic, oracle_reachable, random_definition, GenOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn generated_definitions_validate_and_respect_the_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..200 {
        let def = random_definition(&mut rng, &format!("g{i}"), &GenOptions::engine());
        validate_definition(&def).unwrap_or_else(|e| panic!("g{i}: {e}\n{def:#?}"));
        assert!(count_nodes(&def.nodes) <= 8);
    }
    for i in 0..100 {
        let def = random_definition(&mut rng, &format!("h{i}"), &GenOptions::full());
        validate_definition(&def).unwrap_or_else(|e| panic!("h{i}: {e}\n{def:#?}"));
        assert!(count_nodes(&def.nodes) <= 24);
    }
}

#[test]
fn engine_matches_the_reference_simulator() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..60 {
        let def = random_definition(&mut rng, &format!("g{i}"), &GenOptions::engine());
        for x in 0..4 {
            let want = oracle_reachable(&def, x);
            let got = engine_reachable(&def, x).unwrap();
            assert_eq!(got, want, "g{i} with x={x}\n{def:#?}");
        }
    }
}

#[test]
fn round_trip_is_isomorphic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..50 {
        let def = random_definition(&mut rng, &format!("h{i}"), &GenOptions::full());
        let back = parse_definition(&serialize_definition(&def)).unwrap();
        assert!(isomorphic(&def, &back), "h{i}");
    }
}

#[test]
fn isomorphism_ignores_ids_but_not_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let def = loop {
        let d = random_definition(&mut rng, "p", &GenOptions::full());
        if count_nodes(&d.nodes) > 6 {
            break d;
        }
    };
    let mut renamed = def.clone();
    let rename = |s: &mut String| *s = format!("z_{s}");
    for n in renamed.nodes.iter_mut() {
        rename(&mut n.id);
        if let NodeKind::ExclusiveGateway { default_flow: Some(d) } = &mut n.kind {
            rename(d);
        }
        if let NodeKind::SubProcess { nodes, flows } = &mut n.kind {
            for n in nodes {
                rename(&mut n.id);
                if let NodeKind::ExclusiveGateway { default_flow: Some(d) } = &mut n.kind {
                    rename(d);
                }
            }
            for f in flows {
                rename(&mut f.id);
                rename(&mut f.source);
                rename(&mut f.target);
            }
        }
    }
    for f in renamed.flows.iter_mut() {
        rename(&mut f.id);
        rename(&mut f.source);
        rename(&mut f.target);
    }
    renamed.nodes.reverse();
    assert!(isomorphic(&def, &renamed));

    let mut broken = def.clone();
    let last = broken.flows.len() - 1;
    broken.flows[last].target = broken.start_nodes[0].clone();
    assert!(!isomorphic(&def, &broken));
}
