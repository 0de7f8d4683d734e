use serde::{Deserialize, Serialize};

/// Which partition of the corpus a series belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// One univariate series plus where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub series_id: u64,
    pub dataset_id: String,
    pub class_label: String,
    pub split: Split,
    /// Set when the raw series was constant and normalized to all zeros.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub constant: bool,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Relevance group key: series sharing it are mutually relevant.
    pub fn group(&self) -> (&str, &str) {
        (&self.dataset_id, &self.class_label)
    }

    pub fn is_relevant_to(&self, other: &TimeSeries) -> bool {
        self.group() == other.group()
    }
}
