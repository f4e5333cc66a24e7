//! Shift plans: which bins carry bits, where they go, and how every other
//! occupied bin moves out of the way.

mod search;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::histogram::PEHistogram;
use crate::matching::MatchingError;
use crate::Rational;

pub use search::{
    enumerate_plans, joint_bigraph, optimize_f, optimize_g1_and_f, shift_bigraph,
    traditional_plan, JointSolution, PlanPolicy, PlanRequest,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("no candidate peak set yields a feasible plan for {payload} bits")]
    NoFeasiblePlan { payload: u64 },
    #[error("invalid peak configuration: {0}")]
    InvalidPeaks(String),
    #[error("plan invariant violated: {0}")]
    Invariant(String),
    #[error("error bin {0} is claimed by more than one decoding branch")]
    AmbiguousBin(i32),
    #[error(transparent)]
    Matching(#[from] MatchingError),
}

/// One stage's embedding map.
///
/// `peaks[i]` sends bit 0 to `g0[i]` and bit 1 to `g1[i]`; every other
/// occupied bin `y` moves to `shifts[y]`. Bins outside the histogram support
/// are left alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftPlan {
    pub peaks: Vec<i32>,
    pub g0: Vec<i32>,
    pub g1: Vec<i32>,
    /// `(bin, target)` pairs sorted by bin.
    pub shifts: Vec<(i32, i32)>,
    pub bound: u32,
    /// Squared error over the embedded sites against the layer-0 original.
    pub predicted_sse: Rational,
    /// Whether `predicted_sse` used the real message bits.
    pub exact: bool,
}

/// What the encoder does with a site whose error falls in a given bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Peak(usize),
    Shift(i32),
    Keep,
}

/// Decoded meaning of a marked error value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoded {
    Bit { bit: bool, error: i32 },
    Shifted { error: i32 },
}

impl ShiftPlan {
    pub fn m(&self) -> usize {
        self.peaks.len()
    }

    /// Bins the plan touches: peaks and the shifting domain, ascending.
    pub fn support(&self) -> Vec<i32> {
        let mut bins: Vec<i32> = self
            .peaks
            .iter()
            .copied()
            .chain(self.shifts.iter().map(|&(y, _)| y))
            .collect();
        bins.sort_unstable();
        bins
    }

    pub fn shift_target(&self, y: i32) -> Option<i32> {
        self.shifts
            .binary_search_by_key(&y, |&(b, _)| b)
            .ok()
            .map(|i| self.shifts[i].1)
    }

    /// Marked error for error `e` carrying `bit` (ignored outside peaks).
    pub fn forward(&self, e: i32, bit: bool) -> i32 {
        if let Some(i) = self.peaks.iter().position(|&p| p == e) {
            return if bit { self.g1[i] } else { self.g0[i] };
        }
        self.shift_target(e).unwrap_or(e)
    }

    /// Structural checks that make the map injective and bounded.
    pub fn validate(&self, levels: i32) -> Result<(), PlanError> {
        let fail = |msg: String| Err(PlanError::Invariant(msg));
        let m = self.peaks.len();
        if self.g0.len() != m || self.g1.len() != m {
            return fail("g0/g1 length differs from peak count".into());
        }
        if self.bound == 0 {
            return fail("shift bound must be positive".into());
        }
        if self.peaks.windows(2).any(|w| w[0] >= w[1]) {
            return fail("peaks must be strictly increasing".into());
        }
        if self.shifts.windows(2).any(|w| w[0].0 >= w[1].0) {
            return fail("shift domain must be strictly increasing".into());
        }
        let in_universe = |v: i32| v > -levels && v < levels;
        let bound = self.bound;
        let mut targets = BTreeSet::new();
        for i in 0..m {
            let p = self.peaks[i];
            for (name, t) in [("g0", self.g0[i]), ("g1", self.g1[i])] {
                if !in_universe(p) || !in_universe(t) {
                    return fail(format!("{name}({p}) = {t} leaves the bin universe"));
                }
                if p.abs_diff(t) > bound {
                    return fail(format!("{name}({p}) = {t} exceeds the shift bound {bound}"));
                }
                if !targets.insert(t) {
                    return fail(format!("target {t} used twice by g0/g1"));
                }
            }
        }
        for &(y, t) in &self.shifts {
            if self.peaks.binary_search(&y).is_ok() {
                return fail(format!("peak {y} also in the shift domain"));
            }
            if !in_universe(y) || !in_universe(t) {
                return fail(format!("f({y}) = {t} leaves the bin universe"));
            }
            if y.abs_diff(t) > bound {
                return fail(format!("f({y}) = {t} exceeds the shift bound {bound}"));
            }
            if !targets.insert(t) {
                return fail(format!("f({y}) = {t} collides with another target"));
            }
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus agreement with a histogram's support.
    pub fn validate_for(&self, hist: &PEHistogram) -> Result<(), PlanError> {
        self.validate(hist.levels())?;
        for &p in &self.peaks {
            if hist.count(p) == 0 {
                return Err(PlanError::Invariant(format!("peak {p} is an empty bin")));
            }
        }
        let expected: Vec<i32> = hist
            .support()
            .into_iter()
            .filter(|v| self.peaks.binary_search(v).is_err())
            .collect();
        let domain: Vec<i32> = self.shifts.iter().map(|&(y, _)| y).collect();
        if domain != expected {
            return Err(PlanError::Invariant(
                "shift domain differs from the non-peak support".into(),
            ));
        }
        Ok(())
    }

    /// Dense lookup of the encoder action for every bin of the universe.
    pub fn encoder(&self, levels: i32) -> PlanEncoder {
        let mut actions = vec![Action::Keep; (2 * levels - 1) as usize];
        for (i, &p) in self.peaks.iter().enumerate() {
            actions[(p + levels - 1) as usize] = Action::Peak(i);
        }
        for &(y, t) in &self.shifts {
            actions[(y + levels - 1) as usize] = Action::Shift(t);
        }
        PlanEncoder { levels, actions }
    }

    /// Dense inverse map; fails if two branches claim the same marked bin.
    pub fn decoder(&self, levels: i32) -> Result<PlanDecoder, PlanError> {
        let mut slots: Vec<Option<Decoded>> = vec![None; (2 * levels - 1) as usize];
        let mut claim = |t: i32, d: Decoded| -> Result<(), PlanError> {
            let slot = slots
                .get_mut((t + levels - 1) as usize)
                .ok_or(PlanError::Invariant(format!("target {t} outside universe")))?;
            if slot.is_some() {
                return Err(PlanError::AmbiguousBin(t));
            }
            *slot = Some(d);
            Ok(())
        };
        for (i, &p) in self.peaks.iter().enumerate() {
            claim(self.g0[i], Decoded::Bit { bit: false, error: p })?;
            claim(self.g1[i], Decoded::Bit { bit: true, error: p })?;
        }
        for &(y, t) in &self.shifts {
            claim(t, Decoded::Shifted { error: y })?;
        }
        Ok(PlanDecoder { levels, slots })
    }

    /// One-line summary, e.g. `P[0,1] g0[0,1] g1[-1,2] |f|=6`.
    pub fn summary(&self) -> String {
        format!(
            "P{} g0{} g1{} |f|={}",
            compact(&self.peaks),
            compact(&self.g0),
            compact(&self.g1),
            self.shifts.len()
        )
    }
}

fn compact(values: &[i32]) -> String {
    let inner: Vec<String> = values.iter().map(i32::to_string).collect();
    format!("[{}]", inner.join(","))
}

impl fmt::Display for ShiftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "T = {}", self.bound)?;
        writeln!(f, "peaks = {:?}", self.peaks)?;
        for i in 0..self.peaks.len() {
            writeln!(
                f,
                "  {} -> bit0 {}  bit1 {}",
                self.peaks[i], self.g0[i], self.g1[i]
            )?;
        }
        writeln!(f, "f:")?;
        for &(y, t) in &self.shifts {
            writeln!(f, "  {y} -> {t}")?;
        }
        write!(
            f,
            "predicted sse = {} ({})",
            self.predicted_sse,
            if self.exact { "exact" } else { "estimated" }
        )
    }
}

#[derive(Debug, Clone)]
pub struct PlanEncoder {
    levels: i32,
    actions: Vec<Action>,
}

impl PlanEncoder {
    #[inline]
    pub fn action(&self, e: i32) -> Action {
        self.actions[(e + self.levels - 1) as usize]
    }
}

#[derive(Debug, Clone)]
pub struct PlanDecoder {
    levels: i32,
    slots: Vec<Option<Decoded>>,
}

impl PlanDecoder {
    /// `None` when no branch of the plan produces `marked`.
    #[inline]
    pub fn decode(&self, marked: i32) -> Option<Decoded> {
        let idx = marked + self.levels - 1;
        if idx < 0 {
            return None;
        }
        self.slots.get(idx as usize).copied().flatten()
    }
}

#[cfg(test)]
mod tests;
