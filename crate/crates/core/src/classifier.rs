//! Five-class body-shape taxonomy over bust, waist and hip measurements.
//!
//! Rules are evaluated in a fixed priority order and the first match wins;
//! `Rectangle` is the fallback, so every positive triple gets exactly one
//! class. Every rule depends only on pairwise differences between the three
//! measurements.
//!
//! Default thresholds are the inch-denominated values of the classic
//! circumference rules (1", 3.6", 9", 10", 2", 7") expressed in centimetres.
//! When measurements are frontal widths rather than circumferences, the
//! thresholds are multiplied by [`ClassifierConfig::width_factor`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::anthropometry::{Convention, Measurements};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BodyShape {
    Rectangle,
    Triangle,
    InvertedTriangle,
    Spoon,
    Hourglass,
}

impl BodyShape {
    pub const ALL: [BodyShape; 5] = [
        BodyShape::Rectangle,
        BodyShape::Triangle,
        BodyShape::InvertedTriangle,
        BodyShape::Spoon,
        BodyShape::Hourglass,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BodyShape::Rectangle => "Rectangle",
            BodyShape::Triangle => "Triangle",
            BodyShape::InvertedTriangle => "InvertedTriangle",
            BodyShape::Spoon => "Spoon",
            BodyShape::Hourglass => "Hourglass",
        }
    }

    /// Position in [`BodyShape::ALL`]; used as the confusion-matrix index.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BodyShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BodyShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BodyShape::ALL
            .into_iter()
            .find(|shape| shape.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown body shape label `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub t_hourglass_bh: f64,
    pub t_shape_diff: f64,
    pub t_bw_drop: f64,
    pub t_hw_drop: f64,
    pub t_spoon_hb: f64,
    pub t_spoon_hw: f64,
    /// Threshold multiplier applied for frontal-width measurements
    /// (inverse of a nominal circumference/width ratio of 2.5).
    pub width_factor: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            t_hourglass_bh: 2.54,
            t_shape_diff: 9.14,
            t_bw_drop: 22.86,
            t_hw_drop: 25.40,
            t_spoon_hb: 5.08,
            t_spoon_hw: 17.78,
            width_factor: 0.40,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("t_hourglass_bh", self.t_hourglass_bh),
            ("t_shape_diff", self.t_shape_diff),
            ("t_bw_drop", self.t_bw_drop),
            ("t_hw_drop", self.t_hw_drop),
            ("t_spoon_hb", self.t_spoon_hb),
            ("t_spoon_hw", self.t_spoon_hw),
            ("width_factor", self.width_factor),
        ];
        for (name, value) in all {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be > 0, got {value}")));
            }
        }
        if self.t_spoon_hw >= self.t_hw_drop {
            return Err(Error::InvalidConfig(
                "t_spoon_hw must be smaller than t_hw_drop".into(),
            ));
        }
        if self.t_spoon_hb >= self.t_shape_diff {
            return Err(Error::InvalidConfig(
                "t_spoon_hb must be smaller than t_shape_diff".into(),
            ));
        }
        Ok(())
    }

    /// Thresholds in the units of `convention`.
    pub fn scaled_for(&self, convention: Convention) -> ClassifierConfig {
        let k = match convention {
            Convention::EstCircumference => 1.0,
            Convention::FrontalWidth => self.width_factor,
        };
        ClassifierConfig {
            t_hourglass_bh: self.t_hourglass_bh * k,
            t_shape_diff: self.t_shape_diff * k,
            t_bw_drop: self.t_bw_drop * k,
            t_hw_drop: self.t_hw_drop * k,
            t_spoon_hb: self.t_spoon_hb * k,
            t_spoon_hw: self.t_spoon_hw * k,
            width_factor: self.width_factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl Relation {
    fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Relation::Lt => lhs < rhs,
            Relation::Le => lhs <= rhs,
            Relation::Gt => lhs > rhs,
            Relation::Ge => lhs >= rhs,
        }
    }
}

/// One threshold test inside a rule, e.g. `hip - bust >= 9.14`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub quantity: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleStep {
    pub rule: BodyShape,
    pub matched: bool,
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleTrace {
    pub steps: Vec<RuleStep>,
    pub shape: BodyShape,
}

struct Diffs {
    bust_hip: f64,
    hip_bust: f64,
    bust_waist: f64,
    hip_waist: f64,
}

fn cmp(quantity: &str, value: f64, relation: Relation, threshold: f64) -> Comparison {
    Comparison {
        quantity: quantity.to_owned(),
        value,
        relation,
        threshold,
        holds: relation.holds(value, threshold),
    }
}

/// Rules in priority order; Rectangle is the implicit fallback.
const RULES: [BodyShape; 4] = [
    BodyShape::Hourglass,
    BodyShape::Spoon,
    BodyShape::Triangle,
    BodyShape::InvertedTriangle,
];

fn evaluate_rule(rule: BodyShape, d: &Diffs, t: &ClassifierConfig) -> RuleStep {
    use Relation::*;
    let (comparisons, matched) = match rule {
        BodyShape::Hourglass => {
            let c = vec![
                cmp("bust - hip", d.bust_hip, Le, t.t_hourglass_bh),
                cmp("hip - bust", d.hip_bust, Lt, t.t_shape_diff),
                cmp("bust - waist", d.bust_waist, Ge, t.t_bw_drop),
                cmp("hip - waist", d.hip_waist, Ge, t.t_hw_drop),
            ];
            let m = c[0].holds && c[1].holds && (c[2].holds || c[3].holds);
            (c, m)
        }
        BodyShape::Spoon => {
            let c = vec![
                cmp("hip - bust", d.hip_bust, Gt, t.t_spoon_hb),
                cmp("hip - waist", d.hip_waist, Ge, t.t_spoon_hw),
            ];
            let m = c.iter().all(|c| c.holds);
            (c, m)
        }
        BodyShape::Triangle => {
            let c = vec![
                cmp("hip - bust", d.hip_bust, Ge, t.t_shape_diff),
                cmp("hip - waist", d.hip_waist, Lt, t.t_bw_drop),
            ];
            let m = c.iter().all(|c| c.holds);
            (c, m)
        }
        BodyShape::InvertedTriangle => {
            let c = vec![
                cmp("bust - hip", d.bust_hip, Ge, t.t_shape_diff),
                cmp("bust - waist", d.bust_waist, Lt, t.t_bw_drop),
            ];
            let m = c.iter().all(|c| c.holds);
            (c, m)
        }
        BodyShape::Rectangle => unreachable!("Rectangle is the fallback, not a rule"),
    };
    RuleStep {
        rule,
        matched,
        comparisons,
    }
}

fn check_positive(m: &Measurements) -> Result<()> {
    let ok = |v: f64| v.is_finite() && v > 0.0;
    if ok(m.bust) && ok(m.waist) && ok(m.hip) {
        Ok(())
    } else {
        Err(Error::NonPositiveMeasurement {
            bust: m.bust,
            waist: m.waist,
            hip: m.hip,
        })
    }
}

/// Walks the rules in priority order, recording each evaluation up to and
/// including the first match.
pub fn rule_trace(m: &Measurements, cfg: &ClassifierConfig) -> Result<RuleTrace> {
    check_positive(m)?;
    let t = cfg.scaled_for(m.convention);
    let d = Diffs {
        bust_hip: m.bust - m.hip,
        hip_bust: m.hip - m.bust,
        bust_waist: m.bust - m.waist,
        hip_waist: m.hip - m.waist,
    };
    let mut steps = Vec::with_capacity(RULES.len());
    for rule in RULES {
        let step = evaluate_rule(rule, &d, &t);
        let matched = step.matched;
        steps.push(step);
        if matched {
            return Ok(RuleTrace { steps, shape: rule });
        }
    }
    Ok(RuleTrace {
        steps,
        shape: BodyShape::Rectangle,
    })
}

pub fn classify(m: &Measurements, cfg: &ClassifierConfig) -> Result<BodyShape> {
    rule_trace(m, cfg).map(|t| t.shape)
}
