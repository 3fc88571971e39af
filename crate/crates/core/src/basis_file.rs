//! Text format for the basis.
//!
//! ```text
//! # comment
//! class A
//!   mask 1?0
//!   adjective q=1 poly=x2
//!   verb act=1 op=xor poly=q1 + x0
//!   speech internal
//! end
//! class E
//!   sentence A A
//! end
//! ```
//!
//! Classes get indices in file order. A `sentence` line lists earlier or later
//! class names; such a class gets no `mask` line, its mask is built from the
//! slot encoding. `speech` marks a conditioning class and its direction.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boolalg::{ActionOp, AdjectivePredicate, QualityId, VerbPredicate, ZhegalkinPoly};
use crate::classes::{Basis, ClassId, SimpleClass};
use crate::error::{Error, Result};
use crate::store::{sentence_mask, slot_width};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SpeechDirection {
    Internal,
    External,
}

#[derive(Debug, Clone)]
pub struct BasisFile {
    pub basis: Arc<Basis>,
    pub speech: Vec<(ClassId, SpeechDirection)>,
}

#[derive(Default)]
struct Draft {
    name: String,
    line: usize,
    mask: Option<String>,
    sentence: Vec<String>,
    adjectives: Vec<AdjectivePredicate>,
    verbs: Vec<VerbPredicate>,
    speech: Option<SpeechDirection>,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn field<'a>(parts: &[&'a str], key: &str, line: usize) -> Result<&'a str> {
    parts
        .iter()
        .find_map(|p| p.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .ok_or_else(|| perr(line, format!("missing {key}=")))
}

/// `poly=` runs to the end of the line since polynomials contain spaces.
fn poly_field(text: &str, line: usize) -> Result<ZhegalkinPoly> {
    let at = text.find("poly=").ok_or_else(|| perr(line, "missing poly="))?;
    text[at + 5..].trim().parse().map_err(|e: Error| perr(line, e.to_string()))
}

pub fn parse_basis(text: &str, derived_budget: usize) -> Result<BasisFile> {
    let mut drafts: Vec<Draft> = Vec::new();
    let mut open: Option<Draft> = None;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        match (parts[0], open.as_mut()) {
            ("class", None) => {
                let name = parts.get(1).ok_or_else(|| perr(n, "class needs a name"))?;
                if drafts.iter().any(|d| d.name == *name) {
                    return Err(perr(n, format!("duplicate class {name}")));
                }
                open = Some(Draft { name: name.to_string(), line: n, ..Draft::default() });
            }
            ("end", Some(_)) => drafts.push(open.take().unwrap()),
            ("mask", Some(d)) => d.mask = Some(parts.get(1).ok_or_else(|| perr(n, "mask needs a pattern"))?.to_string()),
            ("sentence", Some(d)) => d.sentence = parts[1..].iter().map(|s| s.to_string()).collect(),
            ("adjective", Some(d)) => {
                let q: u32 = field(&parts, "q", n)?.parse().map_err(|_| perr(n, "bad quality id"))?;
                if q & QualityId::DERIVED_BIT != 0 {
                    return Err(perr(n, "quality ids at or above 2^31 are reserved"));
                }
                let a = AdjectivePredicate::new(poly_field(line, n)?, QualityId(q)).map_err(|e| perr(n, e.to_string()))?;
                d.adjectives.push(a);
            }
            ("verb", Some(d)) => {
                let act: usize = field(&parts, "act", n)?.parse().map_err(|_| perr(n, "bad action point"))?;
                let op = match field(&parts, "op", n).unwrap_or("xor") {
                    "xor" => ActionOp::Xor,
                    "and" => ActionOp::And,
                    other => return Err(perr(n, format!("unknown op {other}"))),
                };
                d.verbs.push(VerbPredicate::new(poly_field(line, n)?, act, op));
            }
            ("speech", Some(d)) => {
                d.speech = Some(match parts.get(1).copied() {
                    Some("internal") => SpeechDirection::Internal,
                    Some("external") => SpeechDirection::External,
                    _ => return Err(perr(n, "speech must be internal or external")),
                })
            }
            (kw, _) => return Err(perr(n, format!("unexpected `{kw}`"))),
        }
    }
    if let Some(d) = open {
        return Err(perr(d.line, format!("class {} is not closed", d.name)));
    }

    let width = slot_width(drafts.len(), derived_budget);
    let mut classes = Vec::new();
    let mut speech = Vec::new();
    for (i, d) in drafts.iter().enumerate() {
        let sentence = d
            .sentence
            .iter()
            .map(|s| {
                drafts
                    .iter()
                    .position(|x| x.name == *s)
                    .map(|p| ClassId(p as u32))
                    .ok_or_else(|| perr(d.line, format!("unknown class {s} in sentence")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mask = match (&d.mask, sentence.is_empty()) {
            (Some(m), true) => m.parse().map_err(|e: Error| perr(d.line, e.to_string()))?,
            (None, false) => sentence_mask(&sentence, width)?,
            (Some(_), false) => return Err(perr(d.line, "a sentence class takes no mask line")),
            (None, true) => return Err(perr(d.line, "class needs a mask or a sentence")),
        };
        let mut c = SimpleClass::basis(mask, d.adjectives.clone(), d.verbs.clone(), i as u32)
            .map_err(|e| perr(d.line, e.to_string()))?;
        c.sentence = sentence;
        if let Some(s) = d.speech {
            speech.push((ClassId(i as u32), s));
        }
        classes.push((d.name.clone(), c));
    }
    Ok(BasisFile { basis: Arc::new(Basis::new(classes)?), speech })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "
class A   # first
  mask 1?1
  adjective q=1 poly=x1
  verb act=1 op=and poly=q1 + 1
end
class B
  mask 00
end
class E
  sentence A B
end
";

    #[test]
    fn parses() {
        let f = parse_basis(TEXT, 5).unwrap();
        let b = &f.basis;
        assert_eq!(b.len(), 3);
        assert_eq!(b.name(2), Some("E"));
        let a = b.get(0).unwrap();
        assert_eq!(a.noun.mask.to_string(), "1?1");
        assert_eq!(a.verbs[0].op, ActionOp::And);
        let e = b.get(2).unwrap();
        assert_eq!(e.sentence, vec![ClassId(0), ClassId(1)]);
        // 3 + 5 classes need 3 index bits plus the guard.
        assert_eq!(e.noun.mask.to_string(), "10001001");
    }

    #[test]
    fn errors_carry_lines() {
        assert!(matches!(parse_basis("class A\n mask 1\n bogus\nend", 0), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_basis("class A\n mask 1\n", 0), Err(Error::Parse { line: 1, .. })));
        assert!(parse_basis("class A\n adjective q=1 poly=x5\n mask 1\nend", 0).is_err());
    }
}
