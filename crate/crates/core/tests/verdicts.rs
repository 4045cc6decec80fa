//! Static verdicts on the bundled fixtures, and agreement between the
//! static analysis and simulation on randomized networks.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use satflow_core::constraint::ConstrainedNetwork;
use satflow_core::dynamics::{classify_trajectory, simulate, Classification, ClassifyTolerances, NetworkSystem, SimOptions};
use satflow_core::spec_file::{random_state, NetworkSpecFile, RandomInitial};
use satflow_core::stability::{analyze_cycle, analyze_network, certify_consensus, CertificateOptions, CycleClass};

fn fixture(name: &str) -> NetworkSpecFile {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    NetworkSpecFile::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn fixture_verdicts() {
    let expected = [
        ("bidirectional_edge.json", "Consensus"),
        ("example1_reversed_edge.json", "Unstable"),
        ("example2_bounded_below_by_zero.json", "EquilibriumWithoutConsensusPossible"),
        ("example3_pinned_flow.json", "Unstable"),
        ("example4_clustering.json", "Clustering"),
        ("example4_consensus.json", "Consensus"),
        ("example4_unstable.json", "Unstable"),
        ("example5_widened_shared_edge.json", "Consensus"),
        ("final_example.json", "Inconclusive"),
        ("quartic_triangle.json", "Consensus"),
        ("triangle_disturbed.json", "Consensus"),
        ("unconstrained_path.json", "ComponentConsensus"),
    ];
    for (name, label) in expected {
        let spec = fixture(name);
        let report = analyze_network(&spec.to_system().unwrap(), &CertificateOptions::default()).unwrap();
        assert_eq!(report.verdict.label(), label, "{name}");
        assert_eq!(report.exit_code(), if label == "Inconclusive" { 2 } else { 0 }, "{name}");
        // the report round-trips through JSON
        let text = serde_json::to_string(&report).unwrap();
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["verdict"]["status"], label);
    }
}

#[test]
fn fixture_simulations_match_definite_verdicts() {
    let expected = [
        ("bidirectional_edge.json", "Consensus"),
        ("example1_reversed_edge.json", "Divergent"),
        ("example3_pinned_flow.json", "Divergent"),
        ("example4_clustering.json", "Clustering"),
        ("example4_consensus.json", "Consensus"),
        ("example4_unstable.json", "Divergent"),
        ("example5_widened_shared_edge.json", "Consensus"),
        ("quartic_triangle.json", "Consensus"),
        ("triangle_disturbed.json", "Consensus"),
    ];
    for (name, label) in expected {
        let spec = fixture(name);
        let (s0, _) = spec.initial_state(None);
        let traj = simulate(&spec.to_system().unwrap(), &s0, &SimOptions::with_horizon(200.0)).unwrap();
        let class = classify_trajectory(&traj, &ClassifyTolerances::default());
        assert_eq!(class.label(), label, "{name}: {class:?}");
    }
}

#[test]
fn zero_inflow_consensus_level_is_the_mean() {
    let spec = fixture("example4_consensus.json");
    let (s0, _) = spec.initial_state(None);
    let traj = simulate(&spec.to_system().unwrap(), &s0, &SimOptions::with_horizon(200.0)).unwrap();
    let Classification::Consensus { alpha } = classify_trajectory(&traj, &ClassifyTolerances::default()) else {
        panic!("expected consensus");
    };
    let mean = s0.x.iter().sum::<f64>() / s0.x.len() as f64;
    assert!((alpha - mean).abs() < 1e-3, "alpha {alpha} vs mean {mean}");
}

/// Random directed cycles of length 3 to 5 with intervals drawn so that
/// all three verdicts occur; the static verdict must match simulation.
#[test]
fn random_cycles_agree_with_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut seen = [0usize; 3];
    for k in 0..50u64 {
        let n = rng.random_range(3..=5usize);
        let target = k % 3;
        // every edge contains [p - gap·s, p + gap·s]; two chosen edges then
        // close it to a point (s = 0) or past each other (s < 0)
        let p: f64 = rng.random_range(0.5..1.5);
        let gap: f64 = match target {
            0 => rng.random_range(0.2..0.5),
            1 => -rng.random_range(0.1..0.4),
            _ => 0.0,
        };
        let mut records: Vec<(usize, usize, f64, f64)> = (0..n)
            .map(|i| {
                let lo = (p - gap.abs() - rng.random_range(0.0..1.0)).max(0.0);
                (i, (i + 1) % n, lo, p + gap.abs() + rng.random_range(0.0..1.0))
            })
            .collect();
        let a = rng.random_range(0..n);
        let b = (a + rng.random_range(1..n)) % n;
        records[a].3 = p + gap;
        records[a].2 = records[a].2.min(p + gap - 0.1).max(0.0);
        records[b].2 = p - gap;
        records[b].3 = records[b].3.max(p - gap + 0.1);
        let net = ConstrainedNetwork::from_records(n, &records).unwrap();
        let verdict = analyze_cycle(&net, &(0..n).collect::<Vec<_>>()).unwrap();
        let expected = match verdict.classification {
            CycleClass::Consensus => "Consensus",
            CycleClass::Clustering => "Clustering",
            CycleClass::Unstable => "Divergent",
        };
        seen[verdict.classification as usize] += 1;
        let sys = NetworkSystem::saturated_identity(net);
        let s0 = random_state(n, n, &RandomInitial { seed: k, x_range: [-3.0, 3.0], xc_range: [-0.5, 0.5] });
        // single-point intersections can settle slowly
        let traj = simulate(&sys, &s0, &SimOptions { sample_interval: 1.0, ..SimOptions::with_horizon(1000.0) }).unwrap();
        let got = classify_trajectory(&traj, &ClassifyTolerances::default());
        assert_eq!(got.label(), expected, "cycle {k}: {records:?} gave {got:?}");
    }
    assert!(seen.iter().all(|&c| c > 0), "verdict counts {seen:?}");
}

/// A certificate must never coexist with a diverging simulation.
#[test]
fn certificates_are_never_contradicted_by_divergence() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let ends = [(0, 1), (1, 2), (2, 0), (0, 3), (3, 2)];
    let mut certified = 0;
    for k in 0..40u64 {
        let rec: Vec<_> = ends
            .iter()
            .map(|&(t, h)| {
                let lo: f64 = rng.random_range(0.0..1.0);
                (t, h, lo, lo + rng.random_range(0.1..2.0))
            })
            .collect();
        let net = ConstrainedNetwork::from_records(4, &rec).unwrap();
        let outcome = certify_consensus(&net, &CertificateOptions::default());
        let Some(cert) = outcome.certificate() else { continue };
        cert.verify(&net).unwrap();
        certified += 1;
        let sys = NetworkSystem::saturated_identity(net);
        let s0 = random_state(4, 5, &RandomInitial { seed: k, x_range: [-3.0, 3.0], xc_range: [-0.5, 0.5] });
        let traj = simulate(&sys, &s0, &SimOptions::with_horizon(200.0)).unwrap();
        let got = classify_trajectory(&traj, &ClassifyTolerances::default());
        assert!(!matches!(got, Classification::Divergent { .. }), "graph {k}: {rec:?}");
    }
    assert!(certified >= 5, "only {certified} certified draws");
}
