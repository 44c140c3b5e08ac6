use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CONTEXT_LEN: usize = 7;
pub const CANDIDATES: usize = 6;

/// Role of a candidate answer. Every category except `Correct` names the
/// kind of error the candidate embodies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Correct,
    /// Second attractor coordinated instead of embedded.
    Coord,
    /// Wrong number of attractors.
    #[serde(rename = "WNA")]
    Wna,
    /// Agreement error between subject and verb.
    #[serde(rename = "AE")]
    Ae,
    /// Wrong number on the first attractor.
    #[serde(rename = "WN1")]
    Wn1,
    /// Wrong number on the second attractor.
    #[serde(rename = "WN2")]
    Wn2,
}

impl Category {
    pub const ALL: [Category; 6] =
        [Category::Correct, Category::Coord, Category::Wna, Category::Ae, Category::Wn1, Category::Wn2];
    pub const ERRORS: [Category; 5] = [Category::Coord, Category::Wna, Category::Ae, Category::Wn1, Category::Wn2];

    pub fn name(self) -> &'static str {
        match self {
            Category::Correct => "Correct",
            Category::Coord => "Coord",
            Category::Wna => "WNA",
            Category::Ae => "AE",
            Category::Wn1 => "WN1",
            Category::Wn2 => "WN2",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DataType {
    I,
    II,
    III,
}

impl DataType {
    pub const ALL: [DataType; 3] = [DataType::I, DataType::II, DataType::III];

    pub fn name(self) -> &'static str {
        match self {
            DataType::I => "I",
            DataType::II => "II",
            DataType::III => "III",
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DataType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().trim_start_matches("type_").to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(DataType::I),
            "II" | "2" => Ok(DataType::II),
            "III" | "3" => Ok(DataType::III),
            _ => Err(Error::Config(format!("unknown data type {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub category: Category,
}

/// One multiple-choice problem: seven context sentences and six answers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlmEpisode {
    pub data_type: DataType,
    pub context: Vec<String>,
    pub candidates: Vec<Candidate>,
}

impl BlmEpisode {
    pub fn validate(&self) -> Result<()> {
        if self.context.len() != CONTEXT_LEN {
            return Err(Error::Data(format!(
                "episode has {} context sentences, expected {CONTEXT_LEN}",
                self.context.len()
            )));
        }
        if self.candidates.len() != CANDIDATES {
            return Err(Error::Data(format!(
                "episode has {} candidates, expected {CANDIDATES}",
                self.candidates.len()
            )));
        }
        for cat in Category::ALL {
            let n = self.candidates.iter().filter(|c| c.category == cat).count();
            if n != 1 {
                return Err(Error::Data(format!("episode has {n} candidates of category {cat}")));
            }
        }
        Ok(())
    }

    pub fn correct_index(&self) -> usize {
        self.candidates
            .iter()
            .position(|c| c.category == Category::Correct)
            .expect("validated episodes have a correct answer")
    }

    /// Every sentence id the episode references, context first.
    pub fn sentence_ids(&self) -> impl Iterator<Item = &str> {
        self.context.iter().map(String::as_str).chain(self.candidates.iter().map(|c| c.id.as_str()))
    }
}
