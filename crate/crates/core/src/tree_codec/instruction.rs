use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// One decoder output symbol.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Instruction {
    /// A qualified name: verb, attribute or enum member.
    Path(String),
    Next,
    Copy,
    Flush,
    End,
}

impl Instruction {
    pub fn path(name: impl Into<String>) -> Self {
        Instruction::Path(name.into())
    }

    pub fn is_control(&self) -> bool {
        !matches!(self, Instruction::Path(_))
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Path(p) => f.write_str(p),
            Instruction::Next => f.write_str("NEXT"),
            Instruction::Copy => f.write_str("COPY"),
            Instruction::Flush => f.write_str("FLUSH"),
            Instruction::End => f.write_str("END"),
        }
    }
}

impl FromStr for Instruction {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "NEXT" => Instruction::Next,
            "COPY" => Instruction::Copy,
            "FLUSH" => Instruction::Flush,
            "END" => Instruction::End,
            other => Instruction::Path(other.to_string()),
        })
    }
}

impl Serialize for Instruction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Instruction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.parse().expect("infallible"))
    }
}

/// Whitespace-separated symbol line.
pub fn render_sequence(seq: &[Instruction]) -> String {
    seq.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

pub fn parse_sequence(line: &str) -> Vec<Instruction> {
    line.split_whitespace()
        .map(|s| s.parse().expect("infallible"))
        .collect()
}

/// Bijection between decoder symbols and dense indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<Instruction>,
    index: HashMap<Instruction, usize>,
}

impl Vocabulary {
    pub fn new(symbols: Vec<Instruction>) -> Self {
        let index = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect::<HashMap<_, _>>();
        assert_eq!(index.len(), symbols.len(), "duplicate vocabulary symbol");
        Vocabulary { symbols, index }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol(&self, i: usize) -> &Instruction {
        &self.symbols[i]
    }

    pub fn symbols(&self) -> &[Instruction] {
        &self.symbols
    }

    pub fn index_of(&self, s: &Instruction) -> Option<usize> {
        self.index.get(s).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_line_round_trip() {
        let line = "Alarm.create NEXT COPY Alarm.name FLUSH END";
        let seq = parse_sequence(line);
        assert_eq!(seq.len(), 6);
        assert_eq!(seq[2], Instruction::Copy);
        assert_eq!(render_sequence(&seq), line);
        let json = serde_json::to_string(&seq).unwrap();
        assert_eq!(serde_json::from_str::<Vec<Instruction>>(&json).unwrap(), seq);
    }

    #[test]
    fn vocabulary_is_a_bijection() {
        let v = Vocabulary::new(parse_sequence("A.b A.c NEXT COPY FLUSH END"));
        for i in 0..v.len() {
            assert_eq!(v.index_of(v.symbol(i)), Some(i));
        }
        assert_eq!(v.index_of(&Instruction::path("Z.z")), None);
    }
}
