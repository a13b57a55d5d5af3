//! The 20-emotion wheel taxonomy and its projection onto the four
//! valence/control quadrants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the twenty wheel emotions.
///
/// Integer codes follow the column-major order of the quadrant table, so
/// codes `5*q .. 5*q + 5` all belong to quadrant `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EmotionLabel {
    Anger,
    Contempt,
    Disgust,
    Hate,
    Regret,
    Amusement,
    Interest,
    Joy,
    Pleasure,
    Pride,
    Disappointment,
    Fear,
    Guilt,
    Sadness,
    Shame,
    Admiration,
    Compassion,
    Contentment,
    Love,
    Relief,
}

impl EmotionLabel {
    pub const COUNT: usize = 20;

    pub const ALL: [EmotionLabel; 20] = [
        EmotionLabel::Anger,
        EmotionLabel::Contempt,
        EmotionLabel::Disgust,
        EmotionLabel::Hate,
        EmotionLabel::Regret,
        EmotionLabel::Amusement,
        EmotionLabel::Interest,
        EmotionLabel::Joy,
        EmotionLabel::Pleasure,
        EmotionLabel::Pride,
        EmotionLabel::Disappointment,
        EmotionLabel::Fear,
        EmotionLabel::Guilt,
        EmotionLabel::Sadness,
        EmotionLabel::Shame,
        EmotionLabel::Admiration,
        EmotionLabel::Compassion,
        EmotionLabel::Contentment,
        EmotionLabel::Love,
        EmotionLabel::Relief,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Anger => "Anger",
            EmotionLabel::Contempt => "Contempt",
            EmotionLabel::Disgust => "Disgust",
            EmotionLabel::Hate => "Hate",
            EmotionLabel::Regret => "Regret",
            EmotionLabel::Amusement => "Amusement",
            EmotionLabel::Interest => "Interest",
            EmotionLabel::Joy => "Joy",
            EmotionLabel::Pleasure => "Pleasure",
            EmotionLabel::Pride => "Pride",
            EmotionLabel::Disappointment => "Disappointment",
            EmotionLabel::Fear => "Fear",
            EmotionLabel::Guilt => "Guilt",
            EmotionLabel::Sadness => "Sadness",
            EmotionLabel::Shame => "Shame",
            EmotionLabel::Admiration => "Admiration",
            EmotionLabel::Compassion => "Compassion",
            EmotionLabel::Contentment => "Contentment",
            EmotionLabel::Love => "Love",
            EmotionLabel::Relief => "Relief",
        }
    }

    pub fn quadrant(self) -> Quadrant {
        quadrant_of(self)
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_label(s)
    }
}

/// Valence/control quadrant of the wheel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quadrant {
    /// High control, negative valence.
    HCN,
    /// High control, positive valence.
    HCP,
    /// Low control, negative valence.
    LCN,
    /// Low control, positive valence.
    LCP,
}

impl Quadrant {
    pub const COUNT: usize = 4;
    pub const ALL: [Quadrant; 4] = [Quadrant::HCN, Quadrant::HCP, Quadrant::LCN, Quadrant::LCP];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Quadrant::HCN => "HCN",
            Quadrant::HCP => "HCP",
            Quadrant::LCN => "LCN",
            Quadrant::LCP => "LCP",
        }
    }

    pub fn members(self) -> [EmotionLabel; 5] {
        let base = self.code() * 5;
        std::array::from_fn(|i| EmotionLabel::ALL[base + i])
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn quadrant_of(e: EmotionLabel) -> Quadrant {
    use EmotionLabel::*;
    match e {
        Anger | Contempt | Disgust | Hate | Regret => Quadrant::HCN,
        Amusement | Interest | Joy | Pleasure | Pride => Quadrant::HCP,
        Disappointment | Fear | Guilt | Sadness | Shame => Quadrant::LCN,
        Admiration | Compassion | Contentment | Love | Relief => Quadrant::LCP,
    }
}

/// Case-insensitive match against the twenty label names, ignoring
/// surrounding whitespace.
pub fn parse_label(text: &str) -> Result<EmotionLabel> {
    let wanted = text.trim();
    EmotionLabel::ALL
        .iter()
        .copied()
        .find(|e| e.name().eq_ignore_ascii_case(wanted))
        .ok_or_else(|| Error::UnknownLabel {
            label: text.to_string(),
            valid: EmotionLabel::ALL.map(EmotionLabel::name).join(", "),
        })
}
