//! Emax dose-response primitives and the multi-schedule trial design.
//!
//! Doses live on per-schedule scales: the same total exposure corresponds to
//! different per-administration doses depending on how often a drug is given.
//! `convert_dose` moves a dose between schedules proportionally to the dosing
//! interval, and `rescale_ed50` is its inverse view for the ED50 parameter,
//! mapping a reference-scale ED50 onto a schedule's own dose scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An administration schedule, identified by its dosing interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub label: String,
    /// Hours between administrations; weekly = 168, biweekly = 336, monthly = 672.
    pub interval_hours: f64,
}

impl Schedule {
    pub fn new(label: impl Into<String>, interval_hours: f64) -> Self {
        Self {
            label: label.into(),
            interval_hours,
        }
    }
}

/// One treatment arm: a dose, in the units of its own schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub schedule_id: usize,
    pub dose: f64,
    pub n_planned: u32,
}

/// The trial layout: schedules, arms, and the reference schedule used when
/// parameters from different schedules are pooled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDesign {
    pub schedules: Vec<Schedule>,
    pub arms: Vec<Arm>,
    pub reference_schedule_id: usize,
}

impl TrialDesign {
    pub fn new(
        schedules: Vec<Schedule>,
        arms: Vec<Arm>,
        reference_schedule_id: usize,
    ) -> Result<Self> {
        let design = Self {
            schedules,
            arms,
            reference_schedule_id,
        };
        design.validate()?;
        Ok(design)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schedules.is_empty() {
            return Err(Error::InvalidDesign("no schedules".into()));
        }
        if self.arms.is_empty() {
            return Err(Error::InvalidDesign("no arms".into()));
        }
        for s in &self.schedules {
            if !(s.interval_hours.is_finite() && s.interval_hours > 0.0) {
                return Err(Error::InvalidDesign(format!(
                    "schedule '{}' has non-positive interval {}",
                    s.label, s.interval_hours
                )));
            }
        }
        if self.reference_schedule_id >= self.schedules.len() {
            return Err(Error::InvalidDesign(format!(
                "reference schedule id {} out of range",
                self.reference_schedule_id
            )));
        }
        for (i, arm) in self.arms.iter().enumerate() {
            if arm.schedule_id >= self.schedules.len() {
                return Err(Error::InvalidDesign(format!(
                    "arm {} refers to unknown schedule id {}",
                    i, arm.schedule_id
                )));
            }
            if !(arm.dose.is_finite() && arm.dose >= 0.0) {
                return Err(Error::InvalidDesign(format!(
                    "arm {} has invalid dose {}",
                    i, arm.dose
                )));
            }
            if arm.n_planned == 0 {
                return Err(Error::InvalidDesign(format!(
                    "arm {} has zero planned size",
                    i
                )));
            }
        }
        Ok(())
    }

    pub fn reference(&self) -> &Schedule {
        &self.schedules[self.reference_schedule_id]
    }

    /// Largest dose after conversion to the reference schedule.
    pub fn max_dose(&self) -> f64 {
        self.arms
            .iter()
            .map(|a| convert_dose(a.dose, &self.schedules[a.schedule_id], self.reference()))
            .fold(0.0, f64::max)
    }

    /// Largest dose in the arms' own units, with no conversion.
    pub fn max_arm_dose(&self) -> f64 {
        self.arms.iter().map(|a| a.dose).fold(0.0, f64::max)
    }

    pub fn schedule_index(&self, label: &str) -> Option<usize> {
        self.schedules.iter().position(|s| s.label == label)
    }
}

/// Parameters of the hyperbolic Emax curve. `ed50` is on the same dose scale
/// as the doses the curve is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmaxParams {
    pub e0: f64,
    pub emax: f64,
    pub ed50: f64,
}

/// f(d) = E0 + Emax * d / (ED50 + d).
pub fn emax_response(params: &EmaxParams, dose: f64) -> f64 {
    params.e0 + params.emax * dose / (params.ed50 + dose)
}

/// Express a dose given under `from` on the dose scale of `to`, keeping the
/// administered amount per unit time fixed.
pub fn convert_dose(dose: f64, from: &Schedule, to: &Schedule) -> f64 {
    dose * to.interval_hours / from.interval_hours
}

/// Map a reference-scale ED50 onto `target`'s own dose scale.
pub fn rescale_ed50(ed50_star: f64, target: &Schedule, reference: &Schedule) -> f64 {
    ed50_star * target.interval_hours / reference.interval_hours
}

pub const WEEKLY_HOURS: f64 = 168.0;
pub const BIWEEKLY_HOURS: f64 = 336.0;
pub const MONTHLY_HOURS: f64 = 672.0;

/// Dosing interval for the conventional schedule labels; `None` for labels
/// that need an explicit interval.
pub fn interval_for_label(label: &str) -> Option<f64> {
    match label.to_ascii_lowercase().as_str() {
        "weekly" | "qw" => Some(WEEKLY_HOURS),
        "biweekly" | "q2w" => Some(BIWEEKLY_HOURS),
        "monthly" | "q4w" => Some(MONTHLY_HOURS),
        _ => None,
    }
}
