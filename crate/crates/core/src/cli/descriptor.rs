//! Parsers for the small text formats accepted on the command line.
//!
//! * sections: `avg(X)`, `sym2(X,Z)`, `freq(1)`; a bare letter means `avg(letter)`
//! * site lists: `2..12` (inclusive) or `1,2,4`
//! * states: comma-separated amplitudes, each `a`, `bi`, `a+bi` or `a-bi`
//! * mixtures: `w:x,y,z;w:x,y,z`
//! * events: `b<k>=<bit>`, `and(e,...)`, `or(e,...)`, `not(e)`

use crate::error::{Error, Result};
use crate::linalg::{pauli, tensor, C64};
use crate::sections::{FrequencySpec, SymmetricSection};
use crate::states::PureState;
use crate::definetti::DiscreteMixture;
use crate::stochastics::BooleanExpr;

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// Splits `name(a,b,...)` into the name and its top-level arguments.
fn call(s: &str) -> Option<(&str, Vec<&str>)> {
    let s = s.trim();
    let open = s.find('(')?;
    let inner = s.strip_suffix(')')?.get(open + 1..)?;
    let mut args = Vec::new();
    let (mut depth, mut start) = (0usize, 0);
    for (i, ch) in inner.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.checked_sub(1)?,
            ',' if depth == 0 => {
                args.push(inner[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return None;
    }
    args.push(inner[start..].trim());
    Some((s[..open].trim(), args))
}

pub fn parse_section(s: &str) -> Result<SymmetricSection> {
    let Some((name, args)) = call(s) else {
        return SymmetricSection::averaged(pauli::from_letter(s)?);
    };
    match (name.to_ascii_lowercase().as_str(), args.as_slice()) {
        ("avg", [a]) => SymmetricSection::averaged(pauli::from_letter(a)?),
        ("sym2", [a, b]) => {
            let (a, b) = (pauli::from_letter(a)?, pauli::from_letter(b)?);
            let ab = tensor(&a, &b)?;
            let ba = tensor(&b, &a)?;
            Ok(SymmetricSection::new((&ab + &ba).scale_real(0.5)))
        }
        ("freq", [k]) => {
            let k: usize = k.parse().map_err(|_| bad(format!("bad outcome index '{k}'")))?;
            Ok(FrequencySpec::basis(2, k)?.section())
        }
        _ => Err(bad(format!("unknown section descriptor '{s}'"))),
    }
}

/// `a..b` (inclusive) or a comma list; must be strictly increasing.
pub fn parse_n_list(s: &str) -> Result<Vec<usize>> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad(format!("bad site count '{t}'")));
    let list = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        if a > b {
            return Err(bad(format!("empty range {s}")));
        }
        (a..=b).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if let Some(w) = list.windows(2).find(|w| w[0] >= w[1]) {
        return Err(bad(format!("site list not strictly increasing at {}", w[1])));
    }
    Ok(list)
}

pub fn parse_complex(s: &str) -> Result<C64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let err = || bad(format!("bad complex number '{s}'"));
    let Some(body) = t.strip_suffix('i') else {
        return Ok(C64::new(t.parse().map_err(|_| err())?, 0.0));
    };
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let coef = |x: &str| -> Result<f64> {
        match x {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => x.parse().map_err(|_| err()),
        }
    };
    match split {
        Some(i) => Ok(C64::new(body[..i].parse().map_err(|_| err())?, coef(&body[i..])?)),
        None => Ok(C64::new(0.0, coef(body)?)),
    }
}

/// Amplitudes, normalized.
pub fn parse_state(s: &str) -> Result<PureState> {
    let amps = s.split(',').map(parse_complex).collect::<Result<Vec<_>>>()?;
    PureState::normalized(amps)
}

pub fn parse_mixture(s: &str) -> Result<DiscreteMixture> {
    let atoms = s
        .split(';')
        .filter(|a| !a.trim().is_empty())
        .map(|atom| {
            let (w, v) = atom.split_once(':').ok_or_else(|| bad(format!("atom '{atom}' lacks 'w:'")))?;
            let w: f64 = w.trim().parse().map_err(|_| bad(format!("bad weight '{w}'")))?;
            let v = v
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| bad(format!("bad coordinate '{x}'"))))
                .collect::<Result<Vec<_>>>()?;
            let v: [f64; 3] = v.try_into().map_err(|_| bad(format!("atom '{atom}' needs 3 coordinates")))?;
            Ok((w, v))
        })
        .collect::<Result<Vec<_>>>()?;
    DiscreteMixture::from_bloch(&atoms)
}

pub fn parse_expr(s: &str) -> Result<BooleanExpr> {
    let s = s.trim();
    if let Some((name, args)) = call(s) {
        let parsed = args.iter().map(|a| parse_expr(a)).collect::<Result<Vec<_>>>()?;
        return match name.to_ascii_lowercase().as_str() {
            "not" if parsed.len() == 1 => Ok(BooleanExpr::not(parsed.into_iter().next().unwrap())),
            "and" | "or" if parsed.len() >= 2 => {
                let join = if name.eq_ignore_ascii_case("and") { BooleanExpr::and } else { BooleanExpr::or };
                Ok(parsed.into_iter().reduce(join).unwrap())
            }
            _ => Err(bad(format!("bad expression '{s}'"))),
        };
    }
    let leaf = s.strip_prefix('b').and_then(|r| r.split_once('='));
    let Some((k, bit)) = leaf else {
        return Err(bad(format!("bad event '{s}', expected b<site>=<bit>")));
    };
    let k = k.parse().map_err(|_| bad(format!("bad site in '{s}'")))?;
    let bit = bit.parse().map_err(|_| bad(format!("bad bit in '{s}'")))?;
    BooleanExpr::leaf(k, bit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sections::Section;

    #[test]
    fn sections() {
        let s = parse_section("sym2(X,Z)").unwrap();
        assert_eq!(s.seed_order(), 2);
        let want = (&tensor(&pauli::x(), &pauli::z()).unwrap() + &tensor(&pauli::z(), &pauli::x()).unwrap())
            .scale_real(0.5);
        assert_eq!(s.seed(), &want);
        assert_eq!(parse_section("Z").unwrap(), parse_section("avg(z)").unwrap());
        assert_eq!(parse_section("freq(1)").unwrap().seed(), &pauli::p1());
        assert!(parse_section("sym3(X,X,X)").is_err());
        assert!(parse_section("avg(Q)").is_err());
    }

    #[test]
    fn site_lists() {
        assert_eq!(parse_n_list("2..5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_n_list("1, 3,8").unwrap(), vec![1, 3, 8]);
        assert!(parse_n_list("3,3").is_err());
        assert!(parse_n_list("5..2").is_err());
        assert!(parse_n_list("a..2").is_err());
    }

    #[test]
    fn complex_numbers() {
        assert_eq!(parse_complex("0.6").unwrap(), C64::new(0.6, 0.0));
        assert_eq!(parse_complex("0.6i").unwrap(), C64::new(0.0, 0.6));
        assert_eq!(parse_complex("-i").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(parse_complex("1-2i").unwrap(), C64::new(1.0, -2.0));
        assert_eq!(parse_complex("1e-3+2.5e+1i").unwrap(), C64::new(1e-3, 25.0));
        assert!(parse_complex("x").is_err());
    }

    #[test]
    fn mixtures_and_states() {
        let m = parse_mixture("0.5:0,0,1; 0.5:1,0,0").unwrap();
        assert_eq!(m.weights(), vec![0.5, 0.5]);
        assert!(parse_mixture("0.5:0,0").is_err());
        assert!(parse_mixture("1:0,0,2").is_err());
        let psi = parse_state("3,4i").unwrap();
        assert!((psi.amplitudes()[1] - C64::new(0.0, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn expressions() {
        let e = parse_expr("or(and(b1=1, b2=0), not(b3=1))").unwrap();
        assert_eq!(e.to_string(), "or(and(b1=1,b2=0),not(b3=1))");
        assert_eq!(parse_expr(&e.to_string()).unwrap(), e);
        assert_eq!(parse_expr("and(b1=1,b2=1,b3=1)").unwrap().leaf_count(), 3);
        assert!(parse_expr("b1=2").is_err());
        assert!(parse_expr("xor(b1=1,b2=1)").is_err());
        assert!(parse_expr("and(b1=1").is_err());
    }
}
