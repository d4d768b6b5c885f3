//! Serializable univariate maps for function files.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::UnivariateFn;

/// A small closed-form map. `chain` applies its steps left to right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum MapExpr {
    Identity,
    Square,
    Sqrt,
    Exp,
    Ln,
    Affine { scale: f64, offset: f64 },
    Power { exponent: f64 },
    Chain { steps: Vec<MapExpr> },
}

impl MapExpr {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            MapExpr::Identity => x,
            MapExpr::Square => x * x,
            MapExpr::Sqrt => x.sqrt(),
            MapExpr::Exp => x.exp(),
            MapExpr::Ln => x.ln(),
            MapExpr::Affine { scale, offset } => scale * x + offset,
            MapExpr::Power { exponent } => x.powf(*exponent),
            MapExpr::Chain { steps } => steps.iter().fold(x, |acc, s| s.apply(acc)),
        }
    }

    pub fn to_fn(&self) -> UnivariateFn {
        let e = self.clone();
        Arc::new(move |x| e.apply(x))
    }
}
