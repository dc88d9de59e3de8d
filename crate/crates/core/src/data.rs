//! Observation containers and CSV/JSON ingestion.
//!
//! CSV schema: `schedule,interval_hours,dose,response[,se,n]` with a header
//! row. A non-empty `se` column marks arm-level summaries (one row per arm);
//! otherwise rows are patient-level responses. `interval_hours` may be
//! omitted for the conventional labels weekly/biweekly/monthly.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{interval_for_label, Arm, Schedule, TrialDesign};

/// One arm-level summary: an observed mean response with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmObs {
    pub schedule_id: usize,
    pub dose: f64,
    pub mean: f64,
    pub se: f64,
    pub n: Option<u32>,
}

/// One patient-level response.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientObs {
    pub schedule_id: usize,
    pub dose: f64,
    pub response: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Observations {
    ArmLevel(Vec<ArmObs>),
    PatientLevel(Vec<PatientObs>),
}

impl Observations {
    pub fn len(&self) -> usize {
        match self {
            Observations::ArmLevel(v) => v.len(),
            Observations::PatientLevel(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_arm_level(&self) -> bool {
        matches!(self, Observations::ArmLevel(_))
    }
}

/// A trial design together with its observed outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub design: TrialDesign,
    pub observations: Observations,
}

impl Dataset {
    pub fn new(design: TrialDesign, observations: Observations) -> Result<Self> {
        design.validate()?;
        let n_sched = design.schedules.len();
        let check = |sid: usize, row: usize| -> Result<()> {
            if sid >= n_sched {
                return Err(Error::Data {
                    row,
                    message: format!("unknown schedule id {sid}"),
                });
            }
            Ok(())
        };
        match &observations {
            Observations::ArmLevel(v) => {
                for (i, o) in v.iter().enumerate() {
                    check(o.schedule_id, i + 1)?;
                    if !(o.se.is_finite() && o.se > 0.0) {
                        return Err(Error::Data {
                            row: i + 1,
                            message: format!("standard error must be positive, got {}", o.se),
                        });
                    }
                }
            }
            Observations::PatientLevel(v) => {
                for (i, o) in v.iter().enumerate() {
                    check(o.schedule_id, i + 1)?;
                }
            }
        }
        Ok(Self {
            design,
            observations,
        })
    }

    pub fn from_csv_path(path: impl AsRef<Path>, reference: Option<&str>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, reference)
    }

    /// Parse the CSV schema above. `reference` picks the reference schedule
    /// by label; the first schedule in file order is used when absent.
    pub fn from_csv_reader(reader: impl Read, reference: Option<&str>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let c_schedule = col("schedule").ok_or_else(|| Error::Data {
            row: 0,
            message: "missing required column 'schedule'".into(),
        })?;
        let c_dose = col("dose").ok_or_else(|| Error::Data {
            row: 0,
            message: "missing required column 'dose'".into(),
        })?;
        let c_response = col("response").ok_or_else(|| Error::Data {
            row: 0,
            message: "missing required column 'response'".into(),
        })?;
        let c_interval = col("interval_hours");
        let c_se = col("se");
        let c_n = col("n");

        let mut schedules: Vec<Schedule> = Vec::new();
        let mut sched_ids: HashMap<String, usize> = HashMap::new();
        struct Row {
            schedule_id: usize,
            dose: f64,
            response: f64,
            se: Option<f64>,
            n: Option<u32>,
        }
        let mut rows: Vec<Row> = Vec::new();

        for (idx, record) in rdr.records().enumerate() {
            let row = idx + 2; // 1-based, after the header line
            let record = record?;
            let field = |c: usize, name: &str| -> Result<&str> {
                record.get(c).ok_or_else(|| Error::Data {
                    row,
                    message: format!("missing field '{name}'"),
                })
            };
            let parse_f64 = |c: usize, name: &str| -> Result<f64> {
                let raw = field(c, name)?;
                raw.parse::<f64>().map_err(|_| Error::Data {
                    row,
                    message: format!("column '{name}': cannot parse '{raw}' as a number"),
                })
            };

            let label = field(c_schedule, "schedule")?.to_string();
            if label.is_empty() {
                return Err(Error::Data {
                    row,
                    message: "empty schedule label".into(),
                });
            }
            let interval = match c_interval {
                Some(c) if !record.get(c).unwrap_or("").is_empty() => {
                    Some(parse_f64(c, "interval_hours")?)
                }
                _ => None,
            };
            let schedule_id = match sched_ids.get(&label) {
                Some(&id) => {
                    if let Some(iv) = interval {
                        let known = schedules[id].interval_hours;
                        if (iv - known).abs() > 1e-9 {
                            return Err(Error::Data {
                                row,
                                message: format!(
                                    "schedule '{label}' previously declared with interval {known}, now {iv}"
                                ),
                            });
                        }
                    }
                    id
                }
                None => {
                    let iv = interval
                        .or_else(|| interval_for_label(&label))
                        .ok_or_else(|| Error::Data {
                            row,
                            message: format!(
                            "schedule '{label}' is not a conventional label; provide interval_hours"
                        ),
                        })?;
                    if !(iv.is_finite() && iv > 0.0) {
                        return Err(Error::Data {
                            row,
                            message: format!("interval_hours must be positive, got {iv}"),
                        });
                    }
                    schedules.push(Schedule::new(label.clone(), iv));
                    sched_ids.insert(label, schedules.len() - 1);
                    schedules.len() - 1
                }
            };

            let dose = parse_f64(c_dose, "dose")?;
            if !(dose.is_finite() && dose >= 0.0) {
                return Err(Error::Data {
                    row,
                    message: format!("dose must be non-negative, got {dose}"),
                });
            }
            let response = parse_f64(c_response, "response")?;
            if !response.is_finite() {
                return Err(Error::Data {
                    row,
                    message: "response is not finite".into(),
                });
            }
            let se = match c_se {
                Some(c) if !record.get(c).unwrap_or("").is_empty() => {
                    let v = parse_f64(c, "se")?;
                    if !(v.is_finite() && v > 0.0) {
                        return Err(Error::Data {
                            row,
                            message: format!("se must be positive, got {v}"),
                        });
                    }
                    Some(v)
                }
                _ => None,
            };
            let n = match c_n {
                Some(c) if !record.get(c).unwrap_or("").is_empty() => {
                    let raw = record.get(c).unwrap();
                    Some(raw.parse::<u32>().map_err(|_| Error::Data {
                        row,
                        message: format!("column 'n': cannot parse '{raw}' as a count"),
                    })?)
                }
                _ => None,
            };
            rows.push(Row {
                schedule_id,
                dose,
                response,
                se,
                n,
            });
        }

        if rows.is_empty() {
            return Err(Error::Data {
                row: 0,
                message: "no data rows".into(),
            });
        }
        let with_se = rows.iter().filter(|r| r.se.is_some()).count();
        if with_se != 0 && with_se != rows.len() {
            return Err(Error::Data {
                row: 0,
                message: format!(
                    "column 'se' must be given for all rows or none (present on {with_se} of {})",
                    rows.len()
                ),
            });
        }

        let reference_schedule_id = match reference {
            Some(label) => schedules
                .iter()
                .position(|s| s.label == label)
                .ok_or_else(|| Error::Data {
                    row: 0,
                    message: format!("reference schedule '{label}' not present in the data"),
                })?,
            None => 0,
        };

        // Arms: distinct (schedule, dose) pairs in order of first appearance.
        let mut arms: Vec<Arm> = Vec::new();
        let mut arm_of_row = Vec::with_capacity(rows.len());
        for r in &rows {
            let pos = arms
                .iter()
                .position(|a| a.schedule_id == r.schedule_id && (a.dose - r.dose).abs() < 1e-12);
            let pos = match pos {
                Some(p) => p,
                None => {
                    arms.push(Arm {
                        schedule_id: r.schedule_id,
                        dose: r.dose,
                        n_planned: 1,
                    });
                    arms.len() - 1
                }
            };
            arm_of_row.push(pos);
        }
        let observations = if with_se > 0 {
            let obs = rows
                .iter()
                .map(|r| ArmObs {
                    schedule_id: r.schedule_id,
                    dose: r.dose,
                    mean: r.response,
                    se: r.se.unwrap(),
                    n: r.n,
                })
                .collect::<Vec<_>>();
            for (r, &a) in rows.iter().zip(&arm_of_row) {
                arms[a].n_planned = r.n.unwrap_or(1).max(1);
            }
            Observations::ArmLevel(obs)
        } else {
            let mut counts = vec![0u32; arms.len()];
            for &a in &arm_of_row {
                counts[a] += 1;
            }
            for (arm, c) in arms.iter_mut().zip(counts) {
                arm.n_planned = c;
            }
            Observations::PatientLevel(
                rows.iter()
                    .map(|r| PatientObs {
                        schedule_id: r.schedule_id,
                        dose: r.dose,
                        response: r.response,
                    })
                    .collect(),
            )
        };

        let design = TrialDesign::new(schedules, arms, reference_schedule_id)?;
        Dataset::new(design, observations)
    }
}

/// Arm-level results of the phase IIb dupilumab dose-finding trial in atopic
/// dermatitis: least-squares mean percent change in EASI score with standard
/// errors, for three administration schedules. Reference schedule: biweekly.
pub fn dupilumab() -> Dataset {
    let schedules = vec![
        Schedule::new("weekly", 168.0),
        Schedule::new("biweekly", 336.0),
        Schedule::new("monthly", 672.0),
    ];
    let raw: [(usize, f64, f64, f64, u32); 6] = [
        (0, 0.0, -18.1, 5.2, 61),
        (0, 300.0, -73.7, 5.2, 63),
        (1, 200.0, -65.4, 5.2, 61),
        (1, 300.0, -68.2, 5.1, 64),
        (2, 100.0, -44.8, 5.0, 65),
        (2, 300.0, -63.5, 4.9, 65),
    ];
    let arms = raw
        .iter()
        .map(|&(s, d, _, _, n)| Arm {
            schedule_id: s,
            dose: d,
            n_planned: n,
        })
        .collect();
    let obs = raw
        .iter()
        .map(|&(s, d, m, se, n)| ArmObs {
            schedule_id: s,
            dose: d,
            mean: m,
            se,
            n: Some(n),
        })
        .collect();
    let design = TrialDesign::new(schedules, arms, 1).expect("static design is valid");
    Dataset::new(design, Observations::ArmLevel(obs)).expect("static dataset is valid")
}
