use serde::{Deserialize, Serialize};

/// Fixed-point grid for transmitted scalars.
///
/// Every value that crosses an edge is rounded to a multiple of
/// `epsilon_machine = 2^-value_bits`, and each scalar costs `value_bits` bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionBudget {
    pub value_bits: u32,
    pub epsilon_machine: f64,
}

impl Default for PrecisionBudget {
    fn default() -> Self {
        Self::with_bits(64)
    }
}

impl PrecisionBudget {
    pub fn with_bits(value_bits: u32) -> Self {
        let value_bits = value_bits.clamp(1, 1000);
        Self { value_bits, epsilon_machine: (-f64::from(value_bits)).exp2() }
    }

    /// `2·⌈log₂(m·U/ε)⌉` bits, never fewer than 16. Slacks on the path go
    /// down to about `ε/m`, so a single `log₂(mU/ε)` would put the contact
    /// floor right where the path ends.
    pub fn for_lp(m: usize, magnitude: f64, epsilon: f64) -> Self {
        let bits = 2.0 * ((m as f64) * magnitude / epsilon).log2().ceil();
        Self::with_bits(if bits.is_finite() { bits.max(16.0) as u32 } else { 1000 })
    }

    pub fn quantize(&self, x: f64) -> f64 {
        if !x.is_finite() || x.abs() >= self.epsilon_machine * 4_503_599_627_370_496.0 {
            return x;
        }
        (x / self.epsilon_machine).round() * self.epsilon_machine
    }

    pub fn quantize_in_place<'a>(&self, xs: impl IntoIterator<Item = &'a mut f64>) {
        for x in xs {
            *x = self.quantize(*x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rounding() {
        let b = PrecisionBudget::with_bits(4);
        assert_eq!(b.epsilon_machine, 0.0625);
        assert_eq!(b.quantize(0.1), 0.125);
        assert_eq!(b.quantize(-0.03), 0.0);
        assert_eq!(b.quantize(3.0), 3.0);
    }

    #[test]
    fn huge_values_pass_through() {
        let b = PrecisionBudget::with_bits(200);
        assert_eq!(b.quantize(1.2345), 1.2345);
        assert_eq!(b.quantize(f64::INFINITY), f64::INFINITY);
    }

    #[test]
    fn lp_budget_tracks_log_ratio() {
        let b = PrecisionBudget::for_lp(16, 4.0, 1.0 / 1024.0);
        assert_eq!(b.value_bits, 32);
        let b = PrecisionBudget::for_lp(1 << 10, 1024.0, 1e-30);
        assert_eq!(b.value_bits, 2 * (1e36f64).log2().ceil() as u32);
        assert_eq!(PrecisionBudget::for_lp(2, 1.0, 1.0).value_bits, 16);
    }
}
