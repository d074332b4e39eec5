use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the three protocol participants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
    Charlie,
}

impl Party {
    pub const ALL: [Party; 3] = [Party::Alice, Party::Bob, Party::Charlie];

    pub fn as_str(self) -> &'static str {
        match self {
            Party::Alice => "alice",
            Party::Bob => "bob",
            Party::Charlie => "charlie",
        }
    }

    /// Wire code used in handshake messages.
    pub fn code(self) -> u8 {
        match self {
            Party::Alice => 1,
            Party::Bob => 2,
            Party::Charlie => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Party> {
        match code {
            1 => Some(Party::Alice),
            2 => Some(Party::Bob),
            3 => Some(Party::Charlie),
            _ => None,
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown party `{0}` (expected alice, bob or charlie)")]
pub struct UnknownParty(pub String);

impl FromStr for Party {
    type Err = UnknownParty;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "alice" => Ok(Party::Alice),
            "bob" => Ok(Party::Bob),
            "charlie" => Ok(Party::Charlie),
            _ => Err(UnknownParty(s.to_owned())),
        }
    }
}
