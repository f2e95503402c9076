use serde::{Deserialize, Serialize};

use crate::model::{SignMatrix, StiefelPoint};

/// Diagnostics for one iterate `C^k = (P^k, Q^k, Q^{k−1})`.
///
/// Record `0` describes the starting point; record `k ≥ 1` the iterate
/// produced by the `k`-th update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub k: usize,
    pub h_value: f64,
    pub psi_value: f64,
    #[serde(rename = "delta_P_norm")]
    pub delta_p_norm: f64,
    #[serde(rename = "delta_Q_norm")]
    pub delta_q_norm: f64,
    #[serde(rename = "delta_C_norm")]
    pub delta_c_norm: f64,
    pub wall_time_seconds: f64,
    /// `h_k − h_{k−1}` evaluated from the increments, free of the cancellation
    /// in subtracting two nearly equal objective values.
    #[serde(default)]
    pub h_step: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterateTrace {
    pub records: Vec<IterateRecord>,
}

impl IterateTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterateRecord> {
        self.records.last()
    }

    /// Equality of every field except wall time.
    pub fn same_iterates(&self, other: &IterateTrace) -> bool {
        self.len() == other.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.k == b.k
                    && a.h_value.to_bits() == b.h_value.to_bits()
                    && a.psi_value.to_bits() == b.psi_value.to_bits()
                    && a.delta_p_norm.to_bits() == b.delta_p_norm.to_bits()
                    && a.delta_q_norm.to_bits() == b.delta_q_norm.to_bits()
                    && a.delta_c_norm.to_bits() == b.delta_c_norm.to_bits()
                    && a.h_step.to_bits() == b.h_step.to_bits()
            })
    }

    /// `h_k − h_final` for every record, accumulated from `h_step` suffix sums.
    pub fn h_gaps(&self) -> Vec<f64> {
        let mut gaps = vec![0.0; self.len()];
        let mut acc = 0.0;
        for i in (0..self.len().saturating_sub(1)).rev() {
            acc -= self.records[i + 1].h_step;
            gaps[i] = acc;
        }
        gaps
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Converged,
    MaxIterations,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveResult {
    pub p_final: SignMatrix,
    pub q_final: StiefelPoint,
    pub trace: IterateTrace,
    pub iterations: usize,
    pub converged: bool,
    pub termination_reason: TerminationReason,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(k: usize, h: f64, step: f64) -> IterateRecord {
        IterateRecord {
            k,
            h_value: h,
            psi_value: h,
            delta_p_norm: 0.0,
            delta_q_norm: 0.0,
            delta_c_norm: 0.0,
            wall_time_seconds: k as f64,
            h_step: step,
        }
    }

    #[test]
    fn h_gaps_from_steps() {
        let t = IterateTrace {
            records: vec![rec(0, 0.0, 0.0), rec(1, -3.0, -3.0), rec(2, -3.5, -0.5)],
        };
        assert_eq!(t.h_gaps(), vec![3.5, 0.5, 0.0]);
    }

    #[test]
    fn same_iterates_ignores_wall_time() {
        let a = IterateTrace { records: vec![rec(0, 1.0, 0.0)] };
        let mut b = a.clone();
        b.records[0].wall_time_seconds = 9.0;
        assert!(a.same_iterates(&b));
        b.records[0].h_value = 1.0 + f64::EPSILON;
        assert!(!a.same_iterates(&b));
    }
}
