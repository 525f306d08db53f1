//! Interaction labels shared across the corpus, the models and evaluation.

use serde::{Deserialize, Serialize};

/// Five-way interaction label. The first four are the positive types; the
/// fifth marks a candidate pair with no interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Mechanism,
    Effect,
    Advice,
    Int,
    Negative,
}

impl Label {
    pub const ALL: [Label; 5] = [
        Label::Mechanism,
        Label::Effect,
        Label::Advice,
        Label::Int,
        Label::Negative,
    ];

    pub const POSITIVE: [Label; 4] = [Label::Mechanism, Label::Effect, Label::Advice, Label::Int];

    pub fn index(self) -> usize {
        match self {
            Label::Mechanism => 0,
            Label::Effect => 1,
            Label::Advice => 2,
            Label::Int => 3,
            Label::Negative => 4,
        }
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Mechanism => "mechanism",
            Label::Effect => "effect",
            Label::Advice => "advice",
            Label::Int => "int",
            Label::Negative => "negative",
        }
    }

    /// Case-insensitive parse. Accepts the corpus spelling "advise" as well
    /// as "advice", and "false"/"none" as the negative class.
    pub fn parse(text: &str) -> Option<Label> {
        match text.to_ascii_lowercase().as_str() {
            "mechanism" => Some(Label::Mechanism),
            "effect" => Some(Label::Effect),
            "advice" | "advise" => Some(Label::Advice),
            "int" => Some(Label::Int),
            "negative" | "false" | "none" => Some(Label::Negative),
            _ => None,
        }
    }

    pub fn is_positive(self) -> bool {
        self != Label::Negative
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_spelling_maps_to_advice() {
        assert_eq!(Label::parse("Advise"), Some(Label::Advice));
        assert_eq!(Label::parse("ADVICE"), Some(Label::Advice));
    }

    #[test]
    fn index_round_trip() {
        for label in Label::ALL {
            assert_eq!(Label::from_index(label.index()), Some(label));
        }
    }
}
