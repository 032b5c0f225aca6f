//! Text and JSON encodings for patterns and configurations.
//!
//! Text form: a header line `d n q` (add a fourth token `torus` for a
//! periodic domain of length `n + 1`), then the `(n + 1)^d` symbol indices
//! in row-major order. The encoder writes one last-axis row per line; the
//! decoder accepts any whitespace. Lines starting with `#` are ignored.
//!
//! Both encodings round-trip bit-exactly. Configurations whose cube does
//! not sit at the origin are encoded relative to their origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Configuration, Cube, Domain, LatticeVector, Pattern, MAX_DIM};

/// Largest site count a decoder will allocate.
pub const MAX_DECODED_SITES: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldJson {
    pub dim: usize,
    pub side: usize,
    pub alphabet: usize,
    #[serde(default)]
    pub torus: bool,
    pub values: Vec<u8>,
}

fn checked_sites(dim: usize, side: usize) -> Result<usize> {
    if !(1..=MAX_DIM).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    let len = side
        .checked_add(1)
        .ok_or_else(|| Error::DomainTooSmall("side overflows".into()))?;
    let mut count = 1usize;
    for _ in 0..dim {
        count = count
            .checked_mul(len)
            .filter(|&c| c <= MAX_DECODED_SITES)
            .ok_or_else(|| Error::DomainTooSmall(format!("more than {MAX_DECODED_SITES} sites")))?;
    }
    Ok(count)
}

fn domain_for(dim: usize, side: usize, torus: bool) -> Domain {
    if torus {
        Domain::Torus { dim, len: side + 1 }
    } else {
        Domain::Cube(Cube::at_origin(dim, side))
    }
}

fn write_text(dim: usize, side: usize, alphabet: usize, torus: bool, values: &[u8]) -> String {
    let mut out = format!("{dim} {side} {alphabet}");
    if torus {
        out.push_str(" torus");
    }
    out.push('\n');
    for row in values.chunks(side + 1) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn pattern_to_text(p: &Pattern) -> String {
    write_text(p.dim(), p.side(), p.alphabet(), false, p.values())
}

pub fn configuration_to_text(c: &Configuration) -> String {
    let cube = c.domain().storage_cube();
    write_text(
        c.dim(),
        cube.side,
        c.alphabet(),
        c.domain().is_torus(),
        c.values(),
    )
}

fn parse_text(text: &str) -> Result<(usize, usize, usize, bool, Vec<u8>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing header".into(),
    })?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let torus = match tokens.len() {
        3 => false,
        4 if tokens[3] == "torus" => true,
        _ => {
            return Err(Error::Parse {
                line: hline,
                msg: "header must be `d n q` or `d n q torus`".into(),
            })
        }
    };
    let num = |s: &str, what: &str| {
        s.parse::<usize>().map_err(|_| Error::Parse {
            line: hline,
            msg: format!("{what} `{s}` is not a nonnegative integer"),
        })
    };
    let dim = num(tokens[0], "dimension")?;
    let side = num(tokens[1], "side")?;
    let alphabet = num(tokens[2], "alphabet size")?;
    if !(1..=256).contains(&alphabet) {
        return Err(Error::Parse {
            line: hline,
            msg: format!("alphabet size {alphabet} outside 1..=256"),
        });
    }
    let sites = checked_sites(dim, side).map_err(|e| Error::Parse {
        line: hline,
        msg: e.to_string(),
    })?;
    let mut values = Vec::with_capacity(sites.min(1 << 16));
    for (line, body) in lines {
        for tok in body.split_whitespace() {
            let v: usize = tok.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("symbol `{tok}` is not a nonnegative integer"),
            })?;
            if v >= alphabet {
                return Err(Error::Parse {
                    line,
                    msg: format!("symbol {v} outside alphabet of size {alphabet}"),
                });
            }
            if values.len() == sites {
                return Err(Error::Parse {
                    line,
                    msg: format!("more than {sites} symbols"),
                });
            }
            values.push(v as u8);
        }
    }
    if values.len() != sites {
        return Err(Error::Parse {
            line: text.lines().count().max(1),
            msg: format!("expected {sites} symbols, found {}", values.len()),
        });
    }
    Ok((dim, side, alphabet, torus, values))
}

pub fn pattern_from_text(text: &str) -> Result<Pattern> {
    let (dim, side, alphabet, torus, values) = parse_text(text)?;
    if torus {
        return Err(Error::Parse {
            line: 1,
            msg: "a pattern cannot live on a torus".into(),
        });
    }
    Pattern::new(dim, side, alphabet, values)
}

pub fn configuration_from_text(text: &str) -> Result<Configuration> {
    let (dim, side, alphabet, torus, values) = parse_text(text)?;
    Configuration::new(domain_for(dim, side, torus), alphabet, values)
}

fn from_json(j: FieldJson) -> Result<Configuration> {
    let sites = checked_sites(j.dim, j.side)?;
    if j.values.len() != sites {
        return Err(Error::DomainTooSmall(format!(
            "expected {sites} symbols, found {}",
            j.values.len()
        )));
    }
    Configuration::new(domain_for(j.dim, j.side, j.torus), j.alphabet, j.values)
}

pub fn pattern_to_json(p: &Pattern) -> String {
    serde_json::to_string(&FieldJson {
        dim: p.dim(),
        side: p.side(),
        alphabet: p.alphabet(),
        torus: false,
        values: p.values().to_vec(),
    })
    .expect("pattern json")
}

pub fn pattern_from_json(text: &str) -> Result<Pattern> {
    let j: FieldJson = serde_json::from_str(text)?;
    if j.torus {
        return Err(Error::Unsupported(
            "a pattern cannot live on a torus".into(),
        ));
    }
    from_json(j)?.into_pattern()
}

pub fn configuration_to_json(c: &Configuration) -> String {
    let cube = c.domain().storage_cube();
    serde_json::to_string(&FieldJson {
        dim: c.dim(),
        side: cube.side,
        alphabet: c.alphabet(),
        torus: c.domain().is_torus(),
        values: c.values().to_vec(),
    })
    .expect("configuration json")
}

pub fn configuration_from_json(text: &str) -> Result<Configuration> {
    from_json(serde_json::from_str(text)?)
}

/// Re-anchors a cube configuration at the origin (the codecs drop origins).
pub fn anchored(c: &Configuration) -> Configuration {
    match c.domain() {
        Domain::Cube(cube) if !cube.origin.is_zero() => Configuration::new(
            Domain::Cube(Cube::new(LatticeVector::zero(c.dim()), cube.side)),
            c.alphabet(),
            c.values().to_vec(),
        )
        .expect("same sizes"),
        _ => c.clone(),
    }
}
