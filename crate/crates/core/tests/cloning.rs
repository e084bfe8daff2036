use std::path::Path;

use cvsim::circuit::execute_shot;
use cvsim::fock::{self, oracle_execute, OracleOptions, OutcomePolicy};
use cvsim::{parse, RandomStream};

fn cloning_source() -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../circuits/cloning.cvq");
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn both_clones_reach_two_thirds_fidelity() {
    let text = cloning_source();
    let trace = execute_shot(&parse(&text).unwrap(), RandomStream::new(0, 0)).unwrap();
    let state = &trace.final_state;
    for mode in 0..2 {
        let (mean, cov) = state.mode_moments(mode).unwrap();
        assert!((mean[0] - 1.2).abs() < 1e-12 && (mean[1] + 0.4).abs() < 1e-12, "{mean}");
        assert!((cov - nalgebra::Matrix2::identity() * 2.0).abs().max() < 1e-12, "{cov}");
    }
    // Overlap with the input coherent state is the vacuum probability after
    // displacing it back to the origin.
    for mode in ["in", "ancilla"] {
        let shifted = format!("{text}\ndisplace {mode} -1.2 0.4;");
        let trace = execute_shot(&parse(&shifted).unwrap(), RandomStream::new(0, 0)).unwrap();
        let index = trace.modes.iter().position(|m| m == mode).unwrap();
        let fidelity = trace.final_state.vacuum_projection_prob(index).unwrap();
        assert!((fidelity - 2.0 / 3.0).abs() < 1e-12, "{mode}: {fidelity}");
    }
}

#[test]
fn cloner_matches_the_oracle() {
    let program = parse(&cloning_source()).unwrap();
    let gauss = execute_shot(&program, RandomStream::new(0, 0)).unwrap();
    let run = oracle_execute(&program, &OracleOptions::new(36), OutcomePolicy::Sample(RandomStream::new(0, 0))).unwrap();
    let report = fock::compare(&gauss.final_state, &run.state, 1e-6, true).unwrap();
    assert!(report.pass, "{report:?}");
}
