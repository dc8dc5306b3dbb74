//! Single-qubit Pauli matrices and computational-basis projectors.

use super::{Operator, SiteSpace, C64};
use crate::error::{Error, Result};

fn qubit(entries: [[C64; 2]; 2]) -> Operator {
    let space = SiteSpace::site(2).expect("qubit space");
    Operator::from_row_major(space, entries.concat()).expect("2x2 entries")
}

const fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn x() -> Operator {
    qubit([[re(0.0), re(1.0)], [re(1.0), re(0.0)]])
}

pub fn y() -> Operator {
    qubit([[re(0.0), C64::new(0.0, -1.0)], [C64::new(0.0, 1.0), re(0.0)]])
}

pub fn z() -> Operator {
    qubit([[re(1.0), re(0.0)], [re(0.0), re(-1.0)]])
}

/// `|0⟩⟨0|`
pub fn p0() -> Operator {
    qubit([[re(1.0), re(0.0)], [re(0.0), re(0.0)]])
}

/// `|1⟩⟨1|`
pub fn p1() -> Operator {
    qubit([[re(0.0), re(0.0)], [re(0.0), re(1.0)]])
}

/// Identity on one site of dimension `d`.
pub fn identity(d: usize) -> Operator {
    Operator::identity(SiteSpace::site(d).expect("d >= 2"))
}

/// Looks up `I`, `X`, `Y`, `Z`, `P0` or `P1` (case-insensitive).
pub fn from_letter(letter: &str) -> Result<Operator> {
    match letter.trim().to_ascii_uppercase().as_str() {
        "I" => Ok(identity(2)),
        "X" => Ok(x()),
        "Y" => Ok(y()),
        "Z" => Ok(z()),
        "P0" => Ok(p0()),
        "P1" => Ok(p1()),
        other => Err(Error::InvalidArgument(format!("unknown Pauli letter '{other}'"))),
    }
}
