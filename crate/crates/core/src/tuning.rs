//! Algorithm knobs that are not part of the network model: the
//! constant-relaxation factor, sketch sizing, and the interpretation
//! switches for ambiguous update rules.

use serde::{Deserialize, Serialize};

/// Sign used for `w·φ′` in the centering step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSign {
    /// `t·c + w·φ′` in both the progress measure and the step.
    Gradient,
    /// `t·c + w·φ′` in the progress measure, `t·c − w·φ′` in the step.
    Literal,
}

/// Direction handed to the mixed-ball projection in the weight update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightDirection {
    /// `−(η/12R)·(z − log w)`.
    ScaledResidual,
    /// Gradient of the soft-max potential `Σ cosh(μ v)` at
    /// `v = (η/12R)·(z − log w)`, negated.
    PotentialGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogBase {
    Natural,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    /// Divides every large numeric constant of the solver (`2²⁷`, `2¹⁸`,
    /// `2¹⁶`, `2²⁰`, `2²²`, `256`, `1600`, `768`, `80`, `36` and the `4` of
    /// the refinement loop). `1` reproduces the constants verbatim.
    pub relax: f64,
    /// `k = ⌈c_jl · ln m / η²⌉` sketch rows per leverage computation.
    pub c_jl: f64,
    /// Loosest precision a leverage computation is ever run at: requests
    /// for a smaller `η` are served at this floor.
    pub jl_eta_floor: f64,
    /// Upper bound on the path-following step `α`.
    pub alpha_max: f64,
    pub step_sign: StepSign,
    pub weight_direction: WeightDirection,
    pub log_base: LogBase,
}

impl Default for Tuning {
    fn default() -> Self {
        Self {
            relax: 1.0,
            c_jl: 24.0,
            jl_eta_floor: 0.0,
            alpha_max: 0.5,
            step_sign: StepSign::Gradient,
            weight_direction: WeightDirection::ScaledResidual,
            log_base: LogBase::Natural,
        }
    }
}

impl Tuning {
    /// Settings under which desk-scale instances finish in well under a
    /// second.
    pub fn desk() -> Self {
        Self { relax: DESK_RELAX, jl_eta_floor: 0.5, alpha_max: 0.04, ..Self::default() }
    }

    pub fn with_relax(mut self, relax: f64) -> Self {
        self.relax = relax;
        self
    }

    pub fn log(&self, x: f64) -> f64 {
        match self.log_base {
            LogBase::Natural => x.ln(),
            LogBase::Binary => x.log2(),
        }
    }

    /// A large constant of the solver after relaxation.
    pub fn k(&self, c: f64) -> f64 {
        c / self.relax
    }
}

pub const DESK_RELAX: f64 = 32768.0;
