//! Closed vocabularies shared across stages.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

macro_rules! closed_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let s = s.trim();
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str().eq_ignore_ascii_case(s))
                    .ok_or_else(|| format!("unknown {} `{}`", stringify!($name), s))
            }
        }
    };
}

closed_enum!(
    /// Part-of-speech tags produced by the lexicon+suffix tagger.
    PosTag {
        Det => "DET",
        Adj => "ADJ",
        Noun => "NOUN",
        Propn => "PROPN",
        Verb => "VERB",
        Adp => "ADP",
        Pron => "PRON",
        Num => "NUM",
        Other => "OTHER",
    }
);

closed_enum!(
    /// The four coarse types every canonical object is assigned.
    ObjectType {
        Person => "Person",
        Object => "Object",
        Location => "Location",
        Concept => "Concept",
    }
);

closed_enum!(
    /// The journalism interrogatives, in the order queries are emitted.
    Interrogative {
        Who => "Who",
        What => "What",
        Why => "Why",
        When => "When",
        Where => "Where",
        How => "How",
    }
);

closed_enum!(
    QueryKind {
        ObjectJournalism => "ObjectJournalism",
        PairJournalism => "PairJournalism",
        Comparative => "Comparative",
        Analogy => "Analogy",
        AnalogyExtension => "AnalogyExtension",
        Correlation => "Correlation",
    }
);

impl PosTag {
    pub fn is_nominal(self) -> bool {
        matches!(self, PosTag::Noun | PosTag::Propn)
    }
}

/// Parses a comma-separated list of object types, e.g. `Person,Concept`.
pub fn parse_type_list(s: &str) -> Result<Vec<ObjectType>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let t: ObjectType = part.parse()?;
        if !out.contains(&t) {
            out.push(t);
        }
    }
    if out.is_empty() {
        return Err(format!("empty type list `{s}`"));
    }
    out.sort();
    Ok(out)
}

pub fn format_type_list(types: &[ObjectType]) -> String {
    types.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_strings() {
        for t in ObjectType::ALL {
            assert_eq!(t.as_str().parse::<ObjectType>().unwrap(), *t);
        }
        assert_eq!("propn".parse::<PosTag>().unwrap(), PosTag::Propn);
        assert!("Thing".parse::<ObjectType>().is_err());
    }

    #[test]
    fn type_lists_are_sorted_and_deduplicated() {
        let types = parse_type_list("Concept, Person,Concept").unwrap();
        assert_eq!(types, vec![ObjectType::Person, ObjectType::Concept]);
        assert!(parse_type_list(" , ").is_err());
    }
}
