//! Qualitative grading of topology families from measured survivability at
//! a failed-element ratio of 0.4.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::analytic::FailureType;
use crate::error::{Error, Result};
use crate::simulation::Metric;
use crate::topology::{TopologyKind, TopologyParams};

/// Ratio at which every grade is judged.
pub const GRADING_FER: f64 = 0.4;
/// Largest ASR distance still considered "near" a reference value.
pub const REFERENCE_PROXIMITY: f64 = 0.01;
pub const ASR_THRESHOLD: f64 = 0.8;
pub const EXCELLENT_PATH_LENGTH: f64 = 6.0;
pub const FAIR_PATH_LENGTH: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Grade {
    Bad,
    Poor,
    Fair,
    Good,
    Excellent,
}

impl Grade {
    pub fn name(&self) -> &'static str {
        match self {
            Grade::Bad => "bad",
            Grade::Poor => "poor",
            Grade::Fair => "fair",
            Grade::Good => "good",
            Grade::Excellent => "excellent",
        }
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Criterion {
    Reachability,
    PathQuality,
}

impl Criterion {
    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Reachability => "reachability",
            Criterion::PathQuality => "path-quality",
        }
    }
}

/// One measured mean at the grading ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub params: TopologyParams,
    pub failure: FailureType,
    pub metric: Metric,
    pub value: f64,
}

const FAILURES: [FailureType; 3] = [FailureType::Link, FailureType::Switch, FailureType::Server];
const FAMILIES: [TopologyKind; 4] = [
    TopologyKind::ThreeLayer,
    TopologyKind::FatTree,
    TopologyKind::BCube,
    TopologyKind::DCell,
];

fn family_order(kind: TopologyKind) -> usize {
    FAMILIES.iter().position(|&k| k == kind).expect("all kinds listed")
}

fn failure_order(f: FailureType) -> usize {
    FAILURES.iter().position(|&x| x == f).expect("all failure types listed")
}

/// Grades per (failure type, criterion, topology family).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GradeTable {
    grades: BTreeMap<(usize, Criterion, usize), Grade>,
}

impl GradeTable {
    pub fn get(&self, failure: FailureType, criterion: Criterion, family: TopologyKind) -> Option<Grade> {
        self.grades
            .get(&(failure_order(failure), criterion, family_order(family)))
            .copied()
    }

    fn set(&mut self, failure: FailureType, criterion: Criterion, family: TopologyKind, grade: Grade) {
        self.grades
            .insert((failure_order(failure), criterion, family_order(family)), grade);
    }

    pub fn families(&self) -> Vec<TopologyKind> {
        let mut out: Vec<usize> = self.grades.keys().map(|k| k.2).collect();
        out.sort_unstable();
        out.dedup();
        out.into_iter().map(|i| FAMILIES[i]).collect()
    }

    /// `failure_type,criterion,topology,grade` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("failure_type,criterion,topology,grade\n");
        for (&(f, c, t), g) in &self.grades {
            s.push_str(&format!("{},{},{},{}\n", FAILURES[f], c.name(), FAMILIES[t].name(), g));
        }
        s
    }
}

/// Configurations that take part in grading: BCube with five interfaces
/// per server is left out because no DCell of that size is compared.
fn graded(params: &TopologyParams) -> bool {
    !(params.kind == TopologyKind::BCube && params.l == 4)
}

fn is_excellent_reference(params: &TopologyParams) -> bool {
    params.kind == TopologyKind::DCell && params.l == 2
}

fn is_poor_reference(params: &TopologyParams) -> bool {
    params.kind == TopologyKind::FatTree
}

/// Applies the grading rules to measured ASR and ASPL means.
///
/// Families are graded when they appear in `measurements`. A graded family
/// needs ASR for link and switch failures and ASPL for all three failure
/// types, except the three-layer family, whose reachability is fixed at
/// "bad" and therefore needs only ASPL. Missing series are reported together
/// in a configuration error.
pub fn classify(measurements: &[Measurement]) -> Result<GradeTable> {
    let usable: Vec<&Measurement> = measurements
        .iter()
        .filter(|m| graded(&m.params) && matches!(m.metric, Metric::Asr | Metric::Aspl))
        .collect();

    let mut families: Vec<TopologyKind> = usable.iter().map(|m| m.params.kind).collect();
    families.sort_by_key(|&k| family_order(k));
    families.dedup();
    if families.is_empty() {
        return Err(Error::Config(
            "classify: no ASR or ASPL measurements for a graded configuration".into(),
        ));
    }

    let values = |kind: TopologyKind, failure: FailureType, metric: Metric| -> Vec<(TopologyParams, f64)> {
        let mut configs: Vec<(TopologyParams, f64)> = Vec::new();
        for m in &usable {
            if m.params.kind == kind && m.failure == failure && m.metric == metric {
                if let Some(slot) = configs.iter_mut().find(|(p, _)| *p == m.params) {
                    slot.1 = m.value;
                } else {
                    configs.push((m.params, m.value));
                }
            }
        }
        configs
    };
    let reference = |pick: fn(&TopologyParams) -> bool, failure: FailureType| -> Option<f64> {
        usable
            .iter()
            .find(|m| pick(&m.params) && m.failure == failure && m.metric == Metric::Asr)
            .map(|m| m.value)
    };

    let mut missing = Vec::new();
    for &kind in &families {
        for failure in FAILURES {
            let need_asr = failure != FailureType::Server && kind != TopologyKind::ThreeLayer;
            if need_asr && values(kind, failure, Metric::Asr).is_empty() {
                missing.push(format!("{kind}/{failure}/asr"));
            }
            if values(kind, failure, Metric::Aspl).is_empty() {
                missing.push(format!("{kind}/{failure}/aspl"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Config(format!("classify: missing series {}", missing.join(", "))));
    }

    let mut table = GradeTable::default();
    for &kind in &families {
        for failure in FAILURES {
            let reach = if failure == FailureType::Server {
                Grade::Excellent
            } else if kind == TopologyKind::ThreeLayer {
                Grade::Bad
            } else {
                let asr: Vec<f64> = values(kind, failure, Metric::Asr).into_iter().map(|x| x.1).collect();
                let near = |r: Option<f64>| r.is_some_and(|r| asr.iter().any(|a| (a - r).abs() <= REFERENCE_PROXIMITY + 1e-12));
                let all_above = asr.iter().all(|&a| a > ASR_THRESHOLD);
                let all_below = asr.iter().all(|&a| a < ASR_THRESHOLD);
                if near(reference(is_excellent_reference, failure)) && all_above {
                    Grade::Excellent
                } else if near(reference(is_poor_reference, failure)) && all_below {
                    Grade::Poor
                } else if all_above {
                    Grade::Good
                } else {
                    Grade::Fair
                }
            };
            table.set(failure, Criterion::Reachability, kind, reach);

            let aspl: Vec<f64> = values(kind, failure, Metric::Aspl).into_iter().map(|x| x.1).collect();
            let path = if aspl.iter().all(|&a| a <= EXCELLENT_PATH_LENGTH) {
                Grade::Excellent
            } else if aspl.iter().any(|&a| a > FAIR_PATH_LENGTH) {
                Grade::Fair
            } else {
                Grade::Good
            };
            table.set(failure, Criterion::PathQuality, kind, path);
        }
    }
    Ok(table)
}

/// Extracts grading inputs from CSV reports: single-failure rows of the
/// `asr` and `aspl` metrics at the grading ratio.
pub fn measurements_from_csv(text: &str) -> Result<Vec<Measurement>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse("header", e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse("header", format!("missing column {name:?}")))
    };
    let (c_topo, c_params, c_failure, c_metric, c_mean) =
        (col("topology")?, col("params")?, col("failure_type")?, col("metric")?, col("mean")?);
    let fer_cols = [col("fer_link")?, col("fer_switch")?, col("fer_server")?];

    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let location = format!("row {}", i + 1);
        let record = record.map_err(|e| Error::parse(&location, e.to_string()))?;
        let Some(metric) = Metric::parse(&record[c_metric]).filter(|m| matches!(m, Metric::Asr | Metric::Aspl)) else {
            continue;
        };
        let Some(failure) = FailureType::parse(&record[c_failure]) else {
            continue;
        };
        let fers: Vec<Option<f64>> = fer_cols
            .iter()
            .map(|&c| record[c].parse::<f64>().ok())
            .collect();
        if fers.iter().flatten().count() != 1 {
            continue;
        }
        let Some(fer) = fers[failure_order(failure)] else {
            continue;
        };
        if (fer - GRADING_FER).abs() > 1e-9 || record[c_mean].is_empty() {
            continue;
        }
        let kind = TopologyKind::parse(&record[c_topo])
            .ok_or_else(|| Error::parse(&location, format!("unknown topology {:?}", &record[c_topo])))?;
        let params = TopologyParams::from_label(kind, &record[c_params])
            .ok_or_else(|| Error::parse(&location, format!("unreadable params {:?}", &record[c_params])))?;
        let value = record[c_mean]
            .parse()
            .map_err(|_| Error::parse(&location, format!("mean {:?} is not a number", &record[c_mean])))?;
        out.push(Measurement {
            params,
            failure,
            metric,
            value,
        });
    }
    Ok(out)
}
