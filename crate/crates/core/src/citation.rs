use std::fmt;

use serde::{Serialize, Serializer};

/// A reference into the simulatability results the classifier encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Citation {
    /// Gaussian inputs, quadratic unitaries, homodyne, feedforward.
    Theorem1,
    /// Gaussian inputs, Gaussian CP maps.
    Theorem2,
    /// Homodyne feedforward cannot induce a nonlinearity.
    Corollary1,
    /// Vacuum branch is simulatable, absorption branch is not.
    Corollary2,
    /// A row (1-based) of the simulatability table.
    Table1Row(u8),
}

impl fmt::Display for Citation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Citation::Theorem1 => f.write_str("Theorem 1"),
            Citation::Theorem2 => f.write_str("Theorem 2"),
            Citation::Corollary1 => f.write_str("Corollary 1"),
            Citation::Corollary2 => f.write_str("Corollary 2"),
            Citation::Table1Row(k) => write!(f, "Table 1 row {k}"),
        }
    }
}

impl Serialize for Citation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

pub(crate) fn absorption_branch() -> String {
    format!(
        "{}: conditioning on the absorption outcome leaves the Gaussian toolkit",
        Citation::Corollary2
    )
}

pub(crate) fn kerr_gate() -> String {
    format!(
        "{}: a Kerr nonlinearity is outside the Gaussian toolkit",
        Citation::Table1Row(2)
    )
}

pub(crate) fn fock_input() -> String {
    format!(
        "{}: Fock-state inputs are not Gaussian; the table leaves this case open",
        Citation::Table1Row(5)
    )
}
