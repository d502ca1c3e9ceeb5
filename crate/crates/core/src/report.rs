//! Experiment reports: a flat CSV projection and a nested JSON document
//! (plan, then series, then points), plus an optional gnuplot script.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simulation::{MetricSample, ReliabilityResult};
use crate::topology::TopologyParams;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column order of every CSV report.
pub const CSV_COLUMNS: [&str; 12] = [
    "topology",
    "params",
    "failure_type",
    "fer_link",
    "fer_switch",
    "fer_server",
    "normalized_time",
    "metric",
    "mean",
    "ci95_half",
    "samples",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// One measured value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    pub metric: String,
    pub fer_link: Option<f64>,
    pub fer_switch: Option<f64>,
    pub fer_server: Option<f64>,
    pub normalized_time: Option<f64>,
    pub mean: Option<f64>,
    pub ci95_half: Option<f64>,
    pub samples: u32,
}

impl Point {
    /// A deterministic value with no sweep coordinates.
    pub fn scalar(metric: impl Into<String>, value: f64) -> Self {
        Point {
            metric: metric.into(),
            fer_link: None,
            fer_switch: None,
            fer_server: None,
            normalized_time: None,
            mean: Some(value),
            ci95_half: None,
            samples: 1,
        }
    }
}

impl From<&MetricSample> for Point {
    fn from(s: &MetricSample) -> Self {
        Point {
            metric: s.metric.name().to_string(),
            fer_link: s.fer_link,
            fer_switch: s.fer_switch,
            fer_server: s.fer_server,
            normalized_time: s.normalized_time,
            mean: s.mean,
            ci95_half: s.ci95_half,
            samples: s.samples,
        }
    }
}

/// Rows for a reliability run: simulated NMTTF with its interval, critical
/// FER, and, when available, the closed form and the relative error.
pub fn reliability_points(r: &ReliabilityResult) -> Vec<Point> {
    let mut points = vec![
        Point {
            ci95_half: r.nmttf_sim.half_width,
            samples: r.samples,
            ..Point::scalar("nmttf_sim", r.nmttf_sim.mean)
        },
        Point {
            samples: r.samples,
            ..Point::scalar("critical_fer", r.critical_fer)
        },
    ];
    if let Some(theo) = r.nmttf_theoretical {
        points.push(Point::scalar("nmttf_theo", theo));
    }
    if let Some(re) = r.relative_error {
        points.push(Point {
            samples: r.samples,
            ..Point::scalar("re", re)
        });
    }
    points
}

/// Points sharing one topology and failure description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub topology: String,
    pub params: String,
    pub failure_type: String,
    pub points: Vec<Point>,
}

impl Series {
    pub fn new(params: &TopologyParams, failure_type: impl Into<String>, points: Vec<Point>) -> Self {
        Series {
            topology: params.kind.name().to_string(),
            params: params.label(),
            failure_type: failure_type.into(),
            points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub master_seed: u64,
    /// Echo of the request that produced the report.
    pub plan: serde_json::Value,
    pub series: Vec<Series>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(master_seed: u64, plan: &impl Serialize) -> Result<Self> {
        let plan = serde_json::to_value(plan).map_err(|e| Error::Numeric(format!("plan echo: {e}")))?;
        Ok(Report {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            master_seed,
            plan,
            series: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn push(&mut self, series: Series) {
        self.series.push(series);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report values are finite or null");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(CSV_COLUMNS).expect("in-memory write");
        let seed = self.master_seed.to_string();
        for s in &self.series {
            for p in &s.points {
                let record = [
                    s.topology.clone(),
                    s.params.clone(),
                    s.failure_type.clone(),
                    opt(p.fer_link),
                    opt(p.fer_switch),
                    opt(p.fer_server),
                    opt(p.normalized_time),
                    p.metric.clone(),
                    opt(p.mean),
                    opt(p.ci95_half),
                    p.samples.to_string(),
                    seed.clone(),
                ];
                w.write_record(&record).expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// A gnuplot script plotting every (series, metric) curve of `report`
/// against the swept ratio, reading the CSV file at `csv_path`.
pub fn gnuplot_script(report: &Report, csv_path: &str) -> String {
    let mut curves = Vec::new();
    for s in &report.series {
        let mut metrics: Vec<&str> = Vec::new();
        for p in &s.points {
            if !metrics.contains(&p.metric.as_str()) {
                metrics.push(&p.metric);
            }
        }
        for m in metrics {
            let axis = s
                .points
                .iter()
                .find(|p| p.metric == m)
                .map(|p| {
                    if p.fer_link.is_some() {
                        4
                    } else if p.fer_switch.is_some() {
                        5
                    } else {
                        6
                    }
                })
                .unwrap_or(4);
            curves.push(format!(
                "'{csv}' using (strcol(3) eq '{ft}' && strcol(2) eq '{params}' && strcol(8) eq '{m}' ? ${axis} : 1/0):9:10 \
                 with yerrorlines title '{topo} {params} {ft} {m}'",
                csv = csv_path.replace('\'', "''"),
                ft = s.failure_type,
                params = s.params,
                topo = s.topology,
            ));
        }
    }
    let mut out = String::new();
    out.push_str("set datafile separator ','\n");
    out.push_str("set key outside right\n");
    out.push_str("set xlabel 'Failed Elements Ratio'\n");
    out.push_str("set ylabel 'value'\n");
    out.push_str("set grid\n");
    if curves.is_empty() {
        out.push_str("# no curves\n");
    } else {
        out.push_str("plot ");
        out.push_str(&curves.join(", \\\n     "));
        out.push('\n');
    }
    out
}
