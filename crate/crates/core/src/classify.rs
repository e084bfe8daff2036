//! Static simulatability analysis.
//!
//! A program is reduced to an [`IngredientProfile`] (which kinds of states,
//! gates and measurements it uses) and the profile is mapped to a
//! three-valued [`Verdict`]. `NotCovered` means no efficient simulation is
//! certified, not that the circuit is proven hard.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::circuit::{CircuitProgram, InitialState, Instruction, Opcode, Statement};
use crate::citation::Citation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateClass {
    Vacuum,
    Coherent,
    Squeezed,
    Thermal,
    Fock,
}

impl StateClass {
    pub fn of(init: &InitialState) -> StateClass {
        match init {
            InitialState::Vacuum | InitialState::Fock(0) => StateClass::Vacuum,
            InitialState::Coherent { .. } => StateClass::Coherent,
            InitialState::Squeezed { .. } => StateClass::Squeezed,
            InitialState::Thermal { .. } => StateClass::Thermal,
            InitialState::Fock(_) => StateClass::Fock,
        }
    }

    pub fn is_gaussian(self) -> bool {
        self != StateClass::Fock
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GateClass {
    LinearOptics,
    Squeezing,
    GaussianChannel,
    Kerr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementClass {
    Homodyne,
    Heterodyne,
    VacuumBranch,
    PhotonCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngredientClass {
    Gate(GateClass),
    Measurement(MeasurementClass),
}

impl IngredientClass {
    /// The class of every opcode. The match is exhaustive, so a new opcode
    /// does not compile until it is classified.
    pub fn of(op: Opcode) -> IngredientClass {
        use GateClass::*;
        use IngredientClass::{Gate, Measurement};
        match op {
            Opcode::Displace | Opcode::Rotate | Opcode::Bs => Gate(LinearOptics),
            Opcode::Squeeze | Opcode::Tms => Gate(Squeezing),
            Opcode::Loss | Opcode::Amplify | Opcode::Noise | Opcode::Channel => Gate(GaussianChannel),
            Opcode::Kerr => Gate(Kerr),
            Opcode::Homodyne => Measurement(MeasurementClass::Homodyne),
            Opcode::Heterodyne => Measurement(MeasurementClass::Heterodyne),
            Opcode::VacProject => Measurement(MeasurementClass::VacuumBranch),
            Opcode::PhotonCount => Measurement(MeasurementClass::PhotonCount),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngredientProfile {
    pub state_classes: BTreeSet<StateClass>,
    pub gate_classes: BTreeSet<GateClass>,
    pub measurement_classes: BTreeSet<MeasurementClass>,
    pub uses_feedforward: bool,
    /// Some parameter depends on a homodyne outcome.
    pub homodyne_feedforward: bool,
}

impl IngredientProfile {
    pub fn is_empty(&self) -> bool {
        self.state_classes.is_empty() && self.gate_classes.is_empty() && self.measurement_classes.is_empty()
    }
}

pub fn profile(program: &CircuitProgram) -> IngredientProfile {
    let mut out = IngredientProfile::default();
    let mut homodyne_registers: BTreeSet<&str> = BTreeSet::new();
    for statement in program.statements() {
        let instr: &Instruction = match statement {
            Statement::Mode { init, .. } => {
                out.state_classes.insert(StateClass::of(init));
                continue;
            }
            Statement::Op(i) => i,
        };
        match IngredientClass::of(instr.opcode()) {
            IngredientClass::Gate(g) => {
                out.gate_classes.insert(g);
            }
            IngredientClass::Measurement(m) => {
                out.measurement_classes.insert(m);
            }
        }
        for p in instr.params() {
            for r in p.registers() {
                out.uses_feedforward = true;
                if homodyne_registers.contains(r) {
                    out.homodyne_feedforward = true;
                }
            }
        }
        if let Instruction::Homodyne { register, .. } = instr {
            homodyne_registers.insert(register);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Simulatable,
    NotCovered,
    Unknown,
}

impl Status {
    /// Exit code used by the command-line tool.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Simulatable => 0,
            Status::NotCovered => 2,
            Status::Unknown => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub status: Status,
    /// Sorted, without duplicates.
    pub citations: Vec<Citation>,
    pub narrative: String,
}

const KERR: &str = "The circuit applies a Kerr gate, one of the \"higher-order optical nonlinear processes\" \
that can yield non-Gaussian states; it lies outside the Gaussian toolkit";

const PHOTON_COUNT: &str = "The circuit conditions on photon counting. Only Gaussian-preserving maps \
\"conditioned on the no-absorption outcome\" of a photodetector remain simulatable; the absorption branch does not";

const PHOTON_COUNT_ROWS: &str = "Photon counting appears in two rows marked as not simulatable, \
with single-photon inputs";

const NONDETERMINISTIC: &str = "Any nonlinear gate built from linear optics and photon counting \
\"must be nondeterministic\", since the zero-photon outcome is itself simulatable.";

pub fn classify(profile: &IngredientProfile) -> Verdict {
    let kerr = profile.gate_classes.contains(&GateClass::Kerr);
    let counting = profile.measurement_classes.contains(&MeasurementClass::PhotonCount);
    let fock = profile.state_classes.contains(&StateClass::Fock);
    let vacuum_branch = profile.measurement_classes.contains(&MeasurementClass::VacuumBranch);

    let mut citations = BTreeSet::new();
    let mut text = Vec::new();
    let status = if kerr || counting {
        if kerr {
            citations.insert(Citation::Table1Row(2));
            text.push(format!("{KERR} ({}).", Citation::Table1Row(2)));
        }
        if counting {
            citations.extend([Citation::Corollary2, Citation::Table1Row(3), Citation::Table1Row(4)]);
            text.push(format!("{PHOTON_COUNT} ({}).", Citation::Corollary2));
            text.push(format!(
                "{PHOTON_COUNT_ROWS} ({}) and with vacua, squeezing and homodyne ({}).",
                Citation::Table1Row(3),
                Citation::Table1Row(4)
            ));
            text.push(NONDETERMINISTIC.to_string());
        }
        if fock {
            text.push("The Fock-state inputs are not Gaussian either.".to_string());
        }
        text.push(
            "NotCovered means no efficient classical simulation is certified for this circuit, \
             not that none exists."
                .to_string(),
        );
        Status::NotCovered
    } else if fock {
        citations.insert(Citation::Table1Row(5));
        text.push(format!(
            "The circuit starts from Fock states, which are not Gaussian, and otherwise uses only \
             Gaussian operations. Table 1 marks this case \"?\" ({}); the verdict stays open.",
            Citation::Table1Row(5)
        ));
        Status::Unknown
    } else {
        citations.extend([Citation::Theorem1, Citation::Theorem2, Citation::Table1Row(1)]);
        text.push(format!(
            "Every initial state is Gaussian and every operation is a Gaussian unitary, a Gaussian CP \
             map or a Gaussian measurement, so means and covariances describe the state at every step \
             ({}; {}). This is the setting of {}.",
            Citation::Theorem1,
            Citation::Theorem2,
            Citation::Table1Row(1)
        ));
        if profile.homodyne_feedforward {
            citations.insert(Citation::Corollary1);
            text.push(format!(
                "Later operations depend on homodyne outcomes; such feedforward \"cannot induce a \
                 nonlinearity\" ({}).",
                Citation::Corollary1
            ));
        }
        if vacuum_branch {
            citations.insert(Citation::Corollary2);
            text.push(format!(
                "Vacuum projections are maps \"conditioned on the no-absorption outcome\" and stay \
                 Gaussian ({}). {NONDETERMINISTIC}",
                Citation::Corollary2
            ));
        }
        Status::Simulatable
    };

    let narrative = format!("Verdict: {status:?}.\n{}", text.join(" "));
    Verdict {
        status,
        citations: citations.into_iter().collect(),
        narrative,
    }
}

/// Human-readable report for a verdict. Each citation appears exactly once,
/// in parentheses after the claim it supports.
pub fn explain(verdict: &Verdict) -> String {
    format!("{}\n", verdict.narrative)
}

/// Machine-readable twin of [`explain`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub status: Status,
    pub citations: Vec<Citation>,
    pub profile: IngredientProfile,
    pub narrative: String,
}

pub fn check(program: &CircuitProgram) -> CheckReport {
    let profile = profile(program);
    let verdict = classify(&profile);
    CheckReport {
        status: verdict.status,
        citations: verdict.citations,
        profile,
        narrative: verdict.narrative,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse;

    fn verdict(src: &str) -> Verdict {
        classify(&profile(&parse(src).unwrap()))
    }

    fn cites_each_once(v: &Verdict) {
        let report = explain(v);
        for c in &v.citations {
            assert_eq!(report.matches(&c.to_string()).count(), 1, "{c} in {report}");
        }
    }

    #[test]
    fn profile_examples() {
        let p = profile(&parse("mode a; squeeze a 0.5 0; m = homodyne a 0 1.0;").unwrap());
        assert_eq!(p.state_classes, BTreeSet::from([StateClass::Vacuum]));
        assert_eq!(p.gate_classes, BTreeSet::from([GateClass::Squeezing]));
        assert_eq!(p.measurement_classes, BTreeSet::from([MeasurementClass::Homodyne]));

        let p = profile(&parse("mode a init=fock(1); mode b init=fock(1); bs a b 0.3 0; n = photoncount a;").unwrap());
        assert_eq!(p.state_classes, BTreeSet::from([StateClass::Fock]));
        assert_eq!(p.gate_classes, BTreeSet::from([GateClass::LinearOptics]));
        assert_eq!(p.measurement_classes, BTreeSet::from([MeasurementClass::PhotonCount]));

        assert!(profile(&CircuitProgram::new()).is_empty());
    }

    #[test]
    fn every_opcode_has_a_class() {
        let gates = Opcode::ALL
            .iter()
            .filter(|op| matches!(IngredientClass::of(**op), IngredientClass::Gate(_)))
            .count();
        let measurements = Opcode::ALL.iter().filter(|op| op.is_measurement()).count();
        assert_eq!(gates + measurements, Opcode::ALL.len());
        for op in Opcode::ALL {
            assert_eq!(
                matches!(IngredientClass::of(op), IngredientClass::Measurement(_)),
                op.is_measurement()
            );
        }
    }

    #[test]
    fn simulatable_cites_both_theorems() {
        let v = verdict("mode a; mode b; bs a b 0.2 0; squeeze a 0.3 0; m = homodyne a 0 1.0;");
        assert_eq!(v.status, Status::Simulatable);
        assert!(v.narrative.contains("Theorem 1") && v.narrative.contains("Theorem 2"));
        assert!(!v.citations.contains(&Citation::Corollary1));
        cites_each_once(&v);
    }

    #[test]
    fn homodyne_feedforward_quotes_corollary_one() {
        let v = verdict("mode a; mode b; tms a b 0.3; m = homodyne a 0 1.0; displace b m 0;");
        assert!(v.citations.contains(&Citation::Corollary1));
        assert!(v.narrative.contains("\"cannot induce a nonlinearity\""));
        cites_each_once(&v);
        // Heterodyne feedforward alone does not invoke it.
        let v = verdict("mode a; mode b; tms a b 0.3; m = heterodyne a; displace b m 0;");
        assert!(!v.citations.contains(&Citation::Corollary1));
    }

    #[test]
    fn vacuum_branch_stays_simulatable_photon_count_does_not() {
        let v = verdict("mode a; mode b; tms a b 0.3; v = vacproject a;");
        assert_eq!(v.status, Status::Simulatable);
        assert!(v.citations.contains(&Citation::Corollary2));
        assert!(v.narrative.contains("\"must be nondeterministic\""));
        cites_each_once(&v);

        let v = verdict("mode a; mode b; tms a b 0.3; n = photoncount a;");
        assert_eq!(v.status, Status::NotCovered);
        assert!(v.narrative.contains("\"conditioned on the no-absorption outcome\""));
        assert_eq!(
            v.citations,
            vec![Citation::Corollary2, Citation::Table1Row(3), Citation::Table1Row(4)]
        );
        cites_each_once(&v);
    }

    #[test]
    fn kerr_and_fock_rules() {
        let v = verdict("mode a; squeeze a 0.2 0; kerr a 0.1; m = homodyne a 0 1.0;");
        assert_eq!(v.status, Status::NotCovered);
        assert_eq!(v.citations, vec![Citation::Table1Row(2)]);
        cites_each_once(&v);

        let v = verdict("mode a init=fock(1); mode b; bs a b 0.4 0; squeeze b 0.1 0; m = homodyne a 0 1.0;");
        assert_eq!(v.status, Status::Unknown);
        assert!(v.narrative.contains("Table 1 marks this case \"?\""));
        cites_each_once(&v);

        let v = verdict("mode a init=fock(1); mode b init=fock(1); bs a b 0.4 0; n = photoncount a;");
        assert_eq!(v.status, Status::NotCovered);

        let v = verdict("mode a init=fock(0); m = homodyne a 0 1.0;");
        assert_eq!(v.status, Status::Simulatable);
    }

    #[test]
    fn explain_is_stable_and_json_has_all_fields() {
        let p = parse("mode a; kerr a 0.2; n = photoncount a;").unwrap();
        let v = classify(&profile(&p));
        cites_each_once(&v);
        assert_eq!(explain(&v), explain(&classify(&profile(&p))));
        let json = serde_json::to_value(check(&p)).unwrap();
        assert_eq!(json["status"], "NotCovered");
        assert_eq!(json["citations"][0], "Corollary 2");
        assert_eq!(json["profile"]["gate_classes"][0], "kerr");
        assert!(json["narrative"].as_str().unwrap().starts_with("Verdict: NotCovered."));
    }
}
