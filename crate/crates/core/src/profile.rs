//! Option profiles and the spontaneous operations they select.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::boolalg::BoolOp;
use crate::classes::{ClassOp, PredicateTarget};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ContextOption {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NounOption {
    Ratio,
    Irratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VerbOption {
    Logic,
    Ethics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AdjectiveOption {
    Intuition,
    Sensorics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

macro_rules! named {
    ($t:ty { $($v:ident => $s:literal),* }) => {
        impl $t {
            pub fn name(self) -> &'static str {
                match self { $(Self::$v => $s),* }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok(Self::$v),)*
                    other => Err(Error::Config(format!("unknown {} value `{other}`", stringify!($t)))),
                }
            }
        }
    };
}

named!(ContextOption { Static => "static", Dynamic => "dynamic" });
named!(NounOption { Ratio => "ratio", Irratio => "irratio" });
named!(VerbOption { Logic => "logic", Ethics => "ethics" });
named!(AdjectiveOption { Intuition => "intuition", Sensorics => "sensorics" });
named!(Gender { Male => "male", Female => "female" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OptionProfile {
    pub context: ContextOption,
    pub noun: NounOption,
    pub verb: VerbOption,
    pub adjective: AdjectiveOption,
    pub gender: Gender,
}

impl Default for OptionProfile {
    fn default() -> Self {
        OptionProfile {
            context: ContextOption::Static,
            noun: NounOption::Ratio,
            verb: VerbOption::Logic,
            adjective: AdjectiveOption::Intuition,
            gender: Gender::Male,
        }
    }
}

impl OptionProfile {
    /// The 16 packing behaviors in canonical order, all with `gender`.
    pub fn all(gender: Gender) -> Vec<OptionProfile> {
        let mut out = Vec::with_capacity(16);
        for context in [ContextOption::Static, ContextOption::Dynamic] {
            for noun in [NounOption::Ratio, NounOption::Irratio] {
                for verb in [VerbOption::Logic, VerbOption::Ethics] {
                    for adjective in [AdjectiveOption::Intuition, AdjectiveOption::Sensorics] {
                        out.push(OptionProfile { context, noun, verb, adjective, gender });
                    }
                }
            }
        }
        out
    }

    /// Name without gender, e.g. `static-ratio-logic-intuition`.
    pub fn name(&self) -> String {
        format!("{}-{}-{}-{}", self.context, self.noun, self.verb, self.adjective)
    }

    /// Config lines selecting this profile.
    pub fn config_fragment(&self, with_gender: bool) -> String {
        let mut s = format!(
            "option.context={} option.noun={} option.verb={} option.adjective={}",
            self.context, self.noun, self.verb, self.adjective
        );
        if with_gender {
            s.push_str(&format!(" gender={}", self.gender));
        }
        s
    }

    pub fn spontaneous(&self) -> SpontaneousOps {
        spontaneous_ops(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NounOp {
    Specialize,
    Argument,
}

/// Kind of a class operation with its parameters dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OpKind {
    Noun(NounOp),
    Verb(BoolOp),
    Adjective(BoolOp),
}

impl OpKind {
    pub fn of(op: &ClassOp) -> OpKind {
        match *op {
            ClassOp::Specialize { .. } => OpKind::Noun(NounOp::Specialize),
            ClassOp::Argument { .. } => OpKind::Noun(NounOp::Argument),
            ClassOp::Predicate { target: PredicateTarget::Verb, op, .. } => OpKind::Verb(op),
            ClassOp::Predicate { target: PredicateTarget::Adjective, op, .. } => OpKind::Adjective(op),
        }
    }

    pub fn all() -> [OpKind; 6] {
        [
            OpKind::Noun(NounOp::Specialize),
            OpKind::Noun(NounOp::Argument),
            OpKind::Verb(BoolOp::Xor),
            OpKind::Verb(BoolOp::And),
            OpKind::Adjective(BoolOp::Xor),
            OpKind::Adjective(BoolOp::And),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpontaneousOps {
    pub noun: NounOp,
    pub verb: BoolOp,
    pub adjective: BoolOp,
}

impl SpontaneousOps {
    pub fn contains(&self, kind: OpKind) -> bool {
        match kind {
            OpKind::Noun(n) => n == self.noun,
            OpKind::Verb(v) => v == self.verb,
            OpKind::Adjective(a) => a == self.adjective,
        }
    }

    pub fn kinds(&self) -> [OpKind; 3] {
        [OpKind::Noun(self.noun), OpKind::Verb(self.verb), OpKind::Adjective(self.adjective)]
    }

    /// The three operations this profile never applies on its own.
    pub fn complement(&self) -> Vec<OpKind> {
        OpKind::all().into_iter().filter(|k| !self.contains(*k)).collect()
    }
}

pub fn spontaneous_ops(profile: &OptionProfile) -> SpontaneousOps {
    SpontaneousOps {
        noun: match profile.noun {
            NounOption::Ratio => NounOp::Specialize,
            NounOption::Irratio => NounOp::Argument,
        },
        verb: match profile.verb {
            VerbOption::Logic => BoolOp::Xor,
            VerbOption::Ethics => BoolOp::And,
        },
        adjective: match profile.adjective {
            AdjectiveOption::Intuition => BoolOp::Xor,
            AdjectiveOption::Sensorics => BoolOp::And,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn sixteen_distinct() {
        let all = OptionProfile::all(Gender::Male);
        let names: BTreeSet<String> = all.iter().map(|p| p.name()).collect();
        assert_eq!(names.len(), 16);
        let first = all[0].spontaneous();
        assert_eq!(first, SpontaneousOps { noun: NounOp::Specialize, verb: BoolOp::Xor, adjective: BoolOp::Xor });
        assert_eq!(first.complement().len(), 3);
    }

    #[test]
    fn parse_names() {
        assert_eq!("ethics".parse::<VerbOption>().unwrap(), VerbOption::Ethics);
        assert!("neither".parse::<VerbOption>().is_err());
    }
}
