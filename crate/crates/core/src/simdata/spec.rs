use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Motion {
    Pull,
    Push,
    Slide,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Hand {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Speed {
    Slowly,
    Fast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Green,
    Yellow,
}

impl Motion {
    pub const ALL: [Motion; 3] = [Motion::Pull, Motion::Push, Motion::Slide];

    /// Label of the verb synonym group naming this motion.
    pub fn group(self) -> &'static str {
        match self {
            Motion::Pull => "pull",
            Motion::Push => "push",
            Motion::Slide => "slide",
        }
    }
}

impl Hand {
    pub const ALL: [Hand; 2] = [Hand::Left, Hand::Right];

    pub fn flipped(self) -> Hand {
        match self {
            Hand::Left => Hand::Right,
            Hand::Right => Hand::Left,
        }
    }
}

impl Speed {
    pub const ALL: [Speed; 2] = [Speed::Slowly, Speed::Fast];

    pub fn group(self) -> &'static str {
        match self {
            Speed::Slowly => "slowly",
            Speed::Fast => "fast",
        }
    }
}

impl Color {
    pub const ALL: [Color; 3] = [Color::Red, Color::Green, Color::Yellow];

    pub fn group(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::Yellow => "yellow",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Two distinct cubes in front of the robot, `(left, right)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "[Color; 2]", try_from = "[Color; 2]")]
pub struct Arrangement {
    pub left: Color,
    pub right: Color,
}

impl From<Arrangement> for [Color; 2] {
    fn from(a: Arrangement) -> Self {
        [a.left, a.right]
    }
}

impl TryFrom<[Color; 2]> for Arrangement {
    type Error = String;

    fn try_from([left, right]: [Color; 2]) -> Result<Self, Self::Error> {
        Arrangement::new(left, right).ok_or_else(|| format!("cubes must differ, got {left:?} twice"))
    }
}

impl Arrangement {
    pub fn new(left: Color, right: Color) -> Option<Self> {
        (left != right).then_some(Self { left, right })
    }

    /// The 3P2 = 6 ordered placements.
    pub fn all() -> Vec<Arrangement> {
        Color::ALL
            .iter()
            .flat_map(|&l| Color::ALL.iter().filter_map(move |&r| Arrangement::new(l, r)))
            .collect()
    }

    pub fn on_side(&self, hand: Hand) -> Color {
        match hand {
            Hand::Left => self.left,
            Hand::Right => self.right,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionSpec {
    pub motion: Motion,
    pub hand: Hand,
    pub speed: Speed,
    pub arrangement: Arrangement,
}

impl ActionSpec {
    /// Colour of the cube the acting hand manipulates.
    pub fn target_color(&self) -> Color {
        self.arrangement.on_side(self.hand)
    }
}

impl fmt::Display for ActionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let up = |s: String| s.to_uppercase();
        write!(
            f,
            "{}-{}-{} ({}|{})",
            up(format!("{:?}", self.motion)),
            up(format!("{:?}", self.hand)),
            up(format!("{:?}", self.speed)),
            self.arrangement.left.group(),
            self.arrangement.right.group()
        )
    }
}

/// Every action pattern in canonical order: arrangement, then motion, hand
/// and speed. 6 arrangements × 12 actions = 72.
pub fn enumerate_action_specs() -> Vec<ActionSpec> {
    let mut out = Vec::with_capacity(72);
    for arrangement in Arrangement::all() {
        for motion in Motion::ALL {
            for hand in Hand::ALL {
                for speed in Speed::ALL {
                    out.push(ActionSpec { motion, hand, speed, arrangement });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn pattern_counts() {
        let specs = enumerate_action_specs();
        assert_eq!(specs.len(), 72);
        assert_eq!(specs.iter().collect::<HashSet<_>>().len(), 72);
        assert_eq!(Arrangement::all().len(), 6);
        let first = specs[0].arrangement;
        assert_eq!(specs.iter().filter(|s| s.arrangement == first).count(), 12);
    }

    #[test]
    fn serde_shape() {
        let s = ActionSpec {
            motion: Motion::Slide,
            hand: Hand::Right,
            speed: Speed::Slowly,
            arrangement: Arrangement::new(Color::Green, Color::Red).unwrap(),
        };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"motion":"SLIDE","hand":"RIGHT","speed":"SLOWLY","arrangement":["green","red"]}"#);
        assert_eq!(serde_json::from_str::<ActionSpec>(&j).unwrap(), s);
        assert!(serde_json::from_str::<Arrangement>(r#"["red","red"]"#).is_err());
        assert_eq!(s.target_color(), Color::Red);
        assert_eq!(s.to_string(), "SLIDE-RIGHT-SLOWLY (green|red)");
    }
}
