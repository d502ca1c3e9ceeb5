//! Seeded Monte Carlo experiments: time to first server disconnection and
//! survivability sweeps over failed-element ratios.

use std::fmt;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{closed_form_mttf, normalized_time, relative_error, Accuracy, FailureType};
use crate::capacity::{CapacityAssignment, Resource};
use crate::error::{Error, Result};
use crate::reachability::{
    accessible_nodes, compensated_sum, accessible_server_ratio, average_shortest_path_length, partition,
    remaining_capacity_ratio, server_connectivity, DegradedNetwork, PairSampling,
};
use crate::topology::{build, NodeId, NodeKind, SwitchLayer, Topology, TopologyKind, TopologyParams};

/// Environment variable capping the number of worker threads (0 = all cores).
pub const THREADS_ENV: &str = "DCN_ROBUST_THREADS";

pub const DEFAULT_NMTTF_SAMPLES: u32 = 2000;
pub const DEFAULT_SWEEP_SAMPLES: u32 = 100;

/// Worker count from [`THREADS_ENV`]; 0 when unset or unparsable.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one independent random stream, derived from the master seed and a
/// path of stream indices (experiment tag, grid point, sample...).
pub fn sub_seed(master_seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(master_seed), |acc, &x| splitmix(acc ^ splitmix(x)))
}

fn stream(master_seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(master_seed, path))
}

const TAG_NMTTF: u64 = 1;
const TAG_SWEEP: u64 = 2;
const TAG_SWEEP_2D: u64 = 3;
const TAG_CLASSED: u64 = 4;
const TAG_ASPL: u64 = 5;

/// Runs `task(0..count)` on `threads` workers (0 = all cores) and returns the
/// results in index order.
pub fn run_indexed<T: Send>(count: usize, threads: usize, task: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if threads == 1 || count <= 1 {
        return (0..count).map(task).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| (0..count).into_par_iter().map(&task).collect())
}

/// A uniformly random subset of `count` indices out of `0..universe`.
pub fn sample_removals(rng: &mut ChaCha8Rng, universe: usize, count: usize) -> Vec<usize> {
    sample(rng, universe, count).into_vec()
}

/// Number of elements failed at ratio `fer` out of `total`: `floor(fer * total)`.
pub fn failed_count(fer: f64, total: usize) -> usize {
    // absorb representation error of grid values such as 0.35 * 20
    ((fer * total as f64 + 1e-9).floor() as usize).min(total)
}

/// Elements of one failure type: edge indices for links, node ids otherwise.
pub fn element_universe(topology: &Topology, failure: FailureType) -> Vec<usize> {
    match failure {
        FailureType::Link => (0..topology.edge_count()).collect(),
        FailureType::Switch => topology.switches().iter().map(|v| v.index()).collect(),
        FailureType::Server => topology.servers().iter().map(|v| v.index()).collect(),
    }
}

fn apply(degraded: &mut DegradedNetwork<'_>, failure: FailureType, element: usize) {
    let fresh = match failure {
        FailureType::Link => degraded.remove_link(element),
        FailureType::Switch => degraded.remove_switch(NodeId(element as u32)),
        FailureType::Server => degraded.remove_server(NodeId(element as u32)),
    };
    fresh.expect("element drawn from the topology's own universe");
}

/// Mean with the half-width of a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    /// Absent with fewer than two samples.
    pub half_width: Option<f64>,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.half_width.is_some_and(|h| (x - self.mean).abs() <= h)
    }
}

/// `mean ± 1.96 s / sqrt(N)` with the sample standard deviation `s`.
pub fn confidence_interval(samples: &[f64]) -> Option<Interval> {
    if samples.is_empty() {
        return None;
    }
    let n = samples.len() as f64;
    let mean = compensated_sum(samples.iter().copied()) / n;
    let half_width = (samples.len() >= 2).then(|| {
        let var = compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0);
        1.96 * var.sqrt() / n.sqrt()
    });
    Some(Interval { mean, half_width })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Asr,
    Sc,
    Aspl,
    RcrCpu,
    RcrMem,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Asr => "asr",
            Metric::Sc => "sc",
            Metric::Aspl => "aspl",
            Metric::RcrCpu => "rcr_cpu",
            Metric::RcrMem => "rcr_mem",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "asr" => Some(Metric::Asr),
            "sc" => Some(Metric::Sc),
            "aspl" => Some(Metric::Aspl),
            "rcr_cpu" | "rcr-cpu" => Some(Metric::RcrCpu),
            "rcr_mem" | "rcr-mem" => Some(Metric::RcrMem),
            _ => None,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A Monte Carlo experiment on one topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub topology: TopologyParams,
    /// One failure type for reliability runs and 1-D sweeps, two for 2-D sweeps.
    pub failures: Vec<FailureType>,
    /// Failed-element ratios, one grid per entry of `failures`.
    #[serde(default)]
    pub fer_grids: Vec<Vec<f64>>,
    /// Defaults to 2000 for reliability runs and 100 for sweeps.
    #[serde(default)]
    pub samples: Option<u32>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    /// Worker threads (0 = all cores). Never affects results.
    #[serde(skip)]
    pub threads: usize,
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::Asr]
}

impl ExperimentPlan {
    pub fn reliability(topology: TopologyParams, failure: FailureType) -> Self {
        ExperimentPlan {
            topology,
            failures: vec![failure],
            fer_grids: Vec::new(),
            samples: None,
            master_seed: 0,
            metrics: default_metrics(),
            threads: 0,
        }
    }

    pub fn sweep(topology: TopologyParams, failure: FailureType, grid: Vec<f64>) -> Self {
        ExperimentPlan {
            fer_grids: vec![grid],
            ..Self::reliability(topology, failure)
        }
    }

    pub fn sweep_2d(topology: TopologyParams, first: (FailureType, Vec<f64>), second: (FailureType, Vec<f64>)) -> Self {
        ExperimentPlan {
            topology,
            failures: vec![first.0, second.0],
            fer_grids: vec![first.1, second.1],
            samples: None,
            master_seed: 0,
            metrics: default_metrics(),
            threads: 0,
        }
    }

    pub fn with_samples(mut self, samples: u32) -> Self {
        self.samples = Some(samples);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_metrics(mut self, metrics: Vec<Metric>) -> Self {
        self.metrics = metrics;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    /// Checks the structural invariants shared by every experiment.
    pub fn validate(&self) -> Result<()> {
        self.topology
            .validate()
            .map_err(|e| Error::Config(format!("topology: {e}")))?;
        if self.samples == Some(0) {
            return Err(Error::Config("samples: must be >= 1".into()));
        }
        if self.failures.is_empty() || self.failures.len() > 2 {
            return Err(Error::Config("failures: expected one or two failure types".into()));
        }
        if self.failures.len() == 2 && self.failures[0] == self.failures[1] {
            return Err(Error::Config("failures: the two failure types must differ".into()));
        }
        for (i, grid) in self.fer_grids.iter().enumerate() {
            for (j, &x) in grid.iter().enumerate() {
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::Config(format!("fer_grids[{i}][{j}]: {x} outside [0, 1]")));
                }
                if j > 0 && grid[j - 1] > x {
                    return Err(Error::Config(format!("fer_grids[{i}]: values must be sorted")));
                }
            }
        }
        Ok(())
    }

    fn sweep_grids(&self, dims: usize) -> Result<()> {
        self.validate()?;
        if self.failures.len() != dims {
            return Err(Error::Config(format!("failures: expected {dims} failure type(s)")));
        }
        if self.fer_grids.len() != dims || self.fer_grids.iter().any(|g| g.is_empty()) {
            return Err(Error::Config(format!("fer_grids: expected {dims} non-empty grid(s)")));
        }
        if self.metrics.is_empty() {
            return Err(Error::Config("metrics: at least one metric is required".into()));
        }
        Ok(())
    }
}

/// Number of removals after which some server first loses every gateway.
///
/// Equivalent to failing `order` one element at a time and checking gateway
/// reachability after each step, but computed by re-inserting the elements
/// in reverse into a union-find structure.
pub fn first_disconnection(topology: &Topology, failure: FailureType, order: &[usize]) -> usize {
    assert!(failure != FailureType::Server, "server failures disconnect at the first removal");
    let n = topology.node_count();
    let total_servers = topology.server_count();
    // a failed switch is a singleton set until re-inserted, so its gateway
    // flag cannot leak into the sets of its neighbours
    let mut sets = GatewaySets::new(topology);
    let mut present = vec![true; n];
    let adj = topology.adjacency();

    match failure {
        FailureType::Link => {
            // no link survives once every element of `order` failed; links not
            // in `order` never fail
            let mut failing = vec![false; topology.edge_count()];
            for &e in order {
                failing[e] = true;
            }
            for (e, &(a, b)) in topology.edges().iter().enumerate() {
                if !failing[e] {
                    sets.union(a.index(), b.index());
                }
            }
        }
        _ => {
            let mut failing = vec![false; n];
            for &v in order {
                failing[v] = true;
            }
            for v in 0..n {
                present[v] = !failing[v];
            }
            for &(a, b) in topology.edges() {
                if present[a.index()] && present[b.index()] {
                    sets.union(a.index(), b.index());
                }
            }
        }
    }
    if sets.connected == total_servers {
        return order.len() + 1;
    }
    for (k, &x) in order.iter().enumerate().rev() {
        match failure {
            FailureType::Link => {
                let (a, b) = topology.edges()[x];
                sets.union(a.index(), b.index());
            }
            _ => {
                present[x] = true;
                for (w, _) in adj.neighbors(x) {
                    if present[w] {
                        sets.union(x, w);
                    }
                }
            }
        }
        if sets.connected == total_servers {
            // state after k removals is the last fully connected one
            return k + 1;
        }
    }
    0
}

struct GatewaySets {
    parent: Vec<u32>,
    servers: Vec<u32>,
    gateway: Vec<bool>,
    /// Servers in sets that hold a gateway.
    connected: usize,
}

impl GatewaySets {
    fn new(topology: &Topology) -> Self {
        let n = topology.node_count();
        let mut servers = vec![0u32; n];
        let mut gateway = vec![false; n];
        for v in 0..n {
            match topology.kinds()[v] {
                NodeKind::Server => servers[v] = 1,
                NodeKind::Switch(_) => gateway[v] = topology.is_gateway(NodeId(v as u32)),
            }
        }
        GatewaySets {
            parent: (0..n as u32).collect(),
            servers,
            gateway,
            connected: 0,
        }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] as usize != v {
            let p = self.parent[v] as usize;
            self.parent[v] = self.parent[p];
            v = p;
        }
        v
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.servers[ra] < self.servers[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        match (self.gateway[ra], self.gateway[rb]) {
            (true, false) => self.connected += self.servers[rb] as usize,
            (false, true) => self.connected += self.servers[ra] as usize,
            _ => {}
        }
        self.parent[rb] = ra as u32;
        self.servers[ra] += self.servers[rb];
        self.gateway[ra] |= self.gateway[rb];
    }
}

/// Literal forward check: fail elements in `order` one by one and traverse
/// from the surviving gateways after each failure.
pub fn first_disconnection_by_traversal(topology: &Topology, failure: FailureType, order: &[usize]) -> usize {
    let mut degraded = DegradedNetwork::new(topology);
    let all_reached = |d: &DegradedNetwork<'_>| {
        let reached = accessible_nodes(d);
        topology
            .servers()
            .iter()
            .all(|s| !d.is_node_up(s.index()) || reached[s.index()])
    };
    if !all_reached(&degraded) {
        return 0;
    }
    for (k, &x) in order.iter().enumerate() {
        apply(&mut degraded, failure, x);
        if !all_reached(&degraded) {
            return k + 1;
        }
    }
    order.len() + 1
}

/// Outcome of a reliability experiment. Times are normalized by the mean
/// element lifetime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityResult {
    pub failure: FailureType,
    /// Number of elements of the failing type.
    pub elements: usize,
    pub samples: u32,
    pub nmttf_sim: Interval,
    /// Mean critical point divided by the element count.
    pub critical_fer: f64,
    pub nmttf_theoretical: Option<f64>,
    pub accuracy: Option<Accuracy>,
    pub relative_error: Option<f64>,
    /// Why the analytic comparison is missing, when it is.
    pub note: Option<String>,
    pub critical_points: Vec<usize>,
}

/// Mean time to the first server disconnection under link or switch failures.
pub fn simulate_nmttf(plan: &ExperimentPlan) -> Result<ReliabilityResult> {
    plan.validate()?;
    let topology = build(&plan.topology)?;
    simulate_nmttf_on(&topology, plan)
}

/// [`simulate_nmttf`] on an already built topology; `plan.topology` is ignored.
pub fn simulate_nmttf_on(topology: &Topology, plan: &ExperimentPlan) -> Result<ReliabilityResult> {
    if plan.failures.len() != 1 {
        return Err(Error::Config("failures: a reliability run takes exactly one failure type".into()));
    }
    let failure = plan.failures[0];
    if failure == FailureType::Server {
        return Err(Error::Config(
            "failures: server failures end the reliable phase at the first failure; use link or switch".into(),
        ));
    }
    let samples = plan.samples.unwrap_or(DEFAULT_NMTTF_SAMPLES);
    if samples == 0 {
        return Err(Error::Config("samples: must be >= 1".into()));
    }
    let universe = element_universe(topology, failure);
    let total = universe.len();
    if total == 0 {
        return Err(Error::Config(format!("topology has no {failure} elements")));
    }
    let seed = plan.master_seed;
    let points = run_indexed(samples as usize, plan.threads, |k| {
        let mut rng = stream(seed, &[TAG_NMTTF, k as u64]);
        let mut order = universe.clone();
        order.shuffle(&mut rng);
        first_disconnection(topology, failure, &order).min(total)
    });
    let times: Vec<f64> = points
        .iter()
        .map(|&f| normalized_time(f as u64, total as u64).expect("critical point within range"))
        .collect();
    let nmttf_sim = confidence_interval(&times).expect("at least one sample");
    let critical_fer = points.iter().sum::<usize>() as f64 / points.len() as f64 / total as f64;

    let (theo, accuracy, note) = match closed_form_mttf(topology.params(), failure, 1.0) {
        Ok(c) => (Some(c.mttf), Some(c.accuracy), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    Ok(ReliabilityResult {
        failure,
        elements: total,
        samples,
        nmttf_sim,
        critical_fer,
        nmttf_theoretical: theo,
        accuracy,
        relative_error: theo.map(|t| relative_error(nmttf_sim.mean, t)),
        note,
        critical_points: points,
    })
}

/// One aggregated point of a survival sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSample {
    pub fer_link: Option<f64>,
    pub fer_switch: Option<f64>,
    pub fer_server: Option<f64>,
    /// Normalized time of the removal count, for single-type sweeps.
    pub normalized_time: Option<f64>,
    pub metric: Metric,
    /// Absent when the metric was undefined in every sample.
    pub mean: Option<f64>,
    pub ci95_half: Option<f64>,
    /// Samples in which the metric was defined.
    pub samples: u32,
    /// Smallest number of server pairs behind a sampled path length.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampled_pairs: Option<u64>,
}

impl MetricSample {
    fn new(metric: Metric, values: &[Option<f64>], pairs: Option<u64>) -> Self {
        let defined: Vec<f64> = values.iter().flatten().copied().collect();
        let ci = confidence_interval(&defined);
        MetricSample {
            fer_link: None,
            fer_switch: None,
            fer_server: None,
            normalized_time: None,
            metric,
            mean: ci.map(|c| c.mean),
            ci95_half: ci.and_then(|c| c.half_width),
            samples: defined.len() as u32,
            sampled_pairs: pairs,
        }
    }

    fn set_fer(&mut self, failure: FailureType, fer: f64) {
        match failure {
            FailureType::Link => self.fer_link = Some(fer),
            FailureType::Switch => self.fer_switch = Some(fer),
            FailureType::Server => self.fer_server = Some(fer),
        }
    }

    pub fn fer(&self, failure: FailureType) -> Option<f64> {
        match failure {
            FailureType::Link => self.fer_link,
            FailureType::Switch => self.fer_switch,
            FailureType::Server => self.fer_server,
        }
    }
}

struct SampleValues {
    values: Vec<Option<f64>>,
    sampled_pairs: Option<u64>,
}

fn evaluate(
    degraded: &DegradedNetwork<'_>,
    metrics: &[Metric],
    capacity: Option<&CapacityAssignment>,
    aspl_seed: u64,
) -> Result<SampleValues> {
    let topology = degraded.base();
    let part = partition(degraded);
    let mut sampled_pairs = None;
    let mut values = Vec::with_capacity(metrics.len());
    for metric in metrics {
        let v = match metric {
            Metric::Asr => Some(accessible_server_ratio(&part, topology.server_count())?),
            Metric::Sc => Some(server_connectivity(&part)),
            Metric::Aspl => {
                let sampling = PairSampling::Auto {
                    exact_limit: 4000,
                    target_pairs: 100_000,
                    seed: aspl_seed,
                };
                average_shortest_path_length(degraded, &part, sampling).map(|a| {
                    if a.sampled {
                        sampled_pairs = Some(a.pairs);
                    }
                    a.mean
                })
            }
            Metric::RcrCpu | Metric::RcrMem => {
                let assignment = capacity.ok_or_else(|| {
                    Error::Config(format!("metrics: {metric} requires a capacity assignment"))
                })?;
                let resource = if *metric == Metric::RcrCpu { Resource::Cpu } else { Resource::Memory };
                Some(remaining_capacity_ratio(degraded, &part, &assignment.weights(resource))?)
            }
        };
        values.push(v);
    }
    Ok(SampleValues { values, sampled_pairs })
}

fn aggregate(metrics: &[Metric], per_sample: &[SampleValues]) -> Vec<MetricSample> {
    metrics
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let values: Vec<Option<f64>> = per_sample.iter().map(|s| s.values[i]).collect();
            let pairs = if m == Metric::Aspl {
                per_sample.iter().filter_map(|s| s.sampled_pairs).min()
            } else {
                None
            };
            MetricSample::new(m, &values, pairs)
        })
        .collect()
}

/// Survivability at each ratio of a single failure-type grid.
pub fn survival_sweep(plan: &ExperimentPlan, capacity: Option<&CapacityAssignment>) -> Result<Vec<MetricSample>> {
    plan.sweep_grids(1)?;
    let topology = build(&plan.topology)?;
    survival_sweep_on(&topology, plan, capacity)
}

/// [`survival_sweep`] on an already built topology.
pub fn survival_sweep_on(
    topology: &Topology,
    plan: &ExperimentPlan,
    capacity: Option<&CapacityAssignment>,
) -> Result<Vec<MetricSample>> {
    plan.sweep_grids(1)?;
    let failure = plan.failures[0];
    let grid = &plan.fer_grids[0];
    let samples = plan.samples.unwrap_or(DEFAULT_SWEEP_SAMPLES) as usize;
    let universe = element_universe(topology, failure);
    let seed = plan.master_seed;

    let mut out = Vec::new();
    for (g, &fer) in grid.iter().enumerate() {
        let f = failed_count(fer, universe.len());
        let per_sample = run_indexed(samples, plan.threads, |k| {
            let mut rng = stream(seed, &[TAG_SWEEP, g as u64, k as u64]);
            let mut degraded = DegradedNetwork::new(topology);
            for i in sample_removals(&mut rng, universe.len(), f) {
                apply(&mut degraded, failure, universe[i]);
            }
            evaluate(&degraded, &plan.metrics, capacity, sub_seed(seed, &[TAG_ASPL, g as u64, k as u64]))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let time = if universe.is_empty() {
            None
        } else {
            Some(normalized_time(f as u64, universe.len() as u64)?)
        };
        for mut row in aggregate(&plan.metrics, &per_sample) {
            row.set_fer(failure, fer);
            row.normalized_time = time;
            out.push(row);
        }
    }
    Ok(out)
}

/// Survivability over the product of two failure-type grids. The two kinds
/// of elements are drawn independently from their full populations.
pub fn survival_sweep_2d(plan: &ExperimentPlan, capacity: Option<&CapacityAssignment>) -> Result<Vec<MetricSample>> {
    plan.sweep_grids(2)?;
    let topology = build(&plan.topology)?;
    survival_sweep_2d_on(&topology, plan, capacity)
}

pub fn survival_sweep_2d_on(
    topology: &Topology,
    plan: &ExperimentPlan,
    capacity: Option<&CapacityAssignment>,
) -> Result<Vec<MetricSample>> {
    plan.sweep_grids(2)?;
    let (fa, fb) = (plan.failures[0], plan.failures[1]);
    let (ua, ub) = (element_universe(topology, fa), element_universe(topology, fb));
    let samples = plan.samples.unwrap_or(DEFAULT_SWEEP_SAMPLES) as usize;
    let seed = plan.master_seed;

    let mut out = Vec::new();
    for (i, &ra) in plan.fer_grids[0].iter().enumerate() {
        for (j, &rb) in plan.fer_grids[1].iter().enumerate() {
            let (ka, kb) = (failed_count(ra, ua.len()), failed_count(rb, ub.len()));
            let per_sample = run_indexed(samples, plan.threads, |k| {
                let path = [TAG_SWEEP_2D, i as u64, j as u64, k as u64];
                let mut rng = stream(seed, &path);
                let mut degraded = DegradedNetwork::new(topology);
                for x in sample_removals(&mut rng, ua.len(), ka) {
                    apply(&mut degraded, fa, ua[x]);
                }
                for x in sample_removals(&mut rng, ub.len(), kb) {
                    apply(&mut degraded, fb, ub[x]);
                }
                evaluate(&degraded, &plan.metrics, capacity, sub_seed(seed, &[TAG_ASPL, i as u64, j as u64, k as u64]))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            for mut row in aggregate(&plan.metrics, &per_sample) {
                row.set_fer(fa, ra);
                row.set_fer(fb, rb);
                out.push(row);
            }
        }
    }
    Ok(out)
}

/// Element classes of the three-layer topology with their own failure ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementClass {
    EdgeSwitch,
    AggSwitch,
    CoreSwitch,
    /// Server to edge switch.
    EdgeLink,
    /// Edge to aggregation switch.
    AggLink,
    /// Aggregation to core switch.
    CoreLink,
}

impl ElementClass {
    pub const ALL: [ElementClass; 6] = [
        ElementClass::EdgeSwitch,
        ElementClass::AggSwitch,
        ElementClass::CoreSwitch,
        ElementClass::EdgeLink,
        ElementClass::AggLink,
        ElementClass::CoreLink,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ElementClass::EdgeSwitch => "edge_switch",
            ElementClass::AggSwitch => "agg_switch",
            ElementClass::CoreSwitch => "core_switch",
            ElementClass::EdgeLink => "edge_link",
            ElementClass::AggLink => "agg_link",
            ElementClass::CoreLink => "core_link",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s.replace('-', "_"))
    }

    pub fn failure_type(&self) -> FailureType {
        match self {
            ElementClass::EdgeSwitch | ElementClass::AggSwitch | ElementClass::CoreSwitch => FailureType::Switch,
            _ => FailureType::Link,
        }
    }

    /// Members of this class: switch node ids or edge indices.
    pub fn members(&self, topology: &Topology) -> Vec<usize> {
        let layer = |v: usize| match topology.kinds()[v] {
            NodeKind::Switch(l) => Some(l),
            NodeKind::Server => None,
        };
        let switch_of = |l: SwitchLayer| -> Vec<usize> {
            topology
                .switches()
                .iter()
                .map(|v| v.index())
                .filter(|&v| layer(v) == Some(l))
                .collect()
        };
        let links_between = |a: Option<SwitchLayer>, b: Option<SwitchLayer>| -> Vec<usize> {
            topology
                .edges()
                .iter()
                .enumerate()
                .filter(|(_, &(x, y))| {
                    let (lx, ly) = (layer(x.index()), layer(y.index()));
                    (lx == a && ly == b) || (lx == b && ly == a)
                })
                .map(|(e, _)| e)
                .collect()
        };
        match self {
            ElementClass::EdgeSwitch => switch_of(SwitchLayer::Edge),
            ElementClass::AggSwitch => switch_of(SwitchLayer::Aggregation),
            ElementClass::CoreSwitch => switch_of(SwitchLayer::Core),
            ElementClass::EdgeLink => links_between(None, Some(SwitchLayer::Edge)),
            ElementClass::AggLink => links_between(Some(SwitchLayer::Edge), Some(SwitchLayer::Aggregation)),
            ElementClass::CoreLink => links_between(Some(SwitchLayer::Aggregation), Some(SwitchLayer::Core)),
        }
    }
}

impl fmt::Display for ElementClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-class sweep on a three-layer topology: `swept` follows `grid` while
/// every class in `fixed` keeps its ratio. Aggregation-aggregation and
/// core-core links never fail.
pub fn classed_sweep(
    plan: &ExperimentPlan,
    swept: ElementClass,
    grid: &[f64],
    fixed: &[(ElementClass, f64)],
    capacity: Option<&CapacityAssignment>,
) -> Result<Vec<MetricSample>> {
    plan.validate()?;
    if plan.topology.kind != TopologyKind::ThreeLayer {
        return Err(Error::Config(format!(
            "topology: per-class sweeps need a three-layer topology, got {}",
            plan.topology.kind
        )));
    }
    if grid.is_empty() {
        return Err(Error::Config("grid: at least one ratio is required".into()));
    }
    for (i, &(class, ratio)) in fixed.iter().enumerate() {
        if class == swept {
            return Err(Error::Config(format!("fixed[{i}]: {class} is the swept class")));
        }
        if !(0.0..=1.0).contains(&ratio) {
            return Err(Error::Config(format!("fixed[{i}]: ratio {ratio} outside [0, 1]")));
        }
    }
    for (j, &x) in grid.iter().enumerate() {
        if !(0.0..=1.0).contains(&x) || (j > 0 && grid[j - 1] > x) {
            return Err(Error::Config(format!("grid[{j}]: ratios must be sorted within [0, 1]")));
        }
    }
    let topology = build(&plan.topology)?;
    let samples = plan.samples.unwrap_or(DEFAULT_SWEEP_SAMPLES) as usize;
    let seed = plan.master_seed;
    let swept_members = swept.members(&topology);
    let fixed_members: Vec<(ElementClass, Vec<usize>, usize)> = fixed
        .iter()
        .map(|&(c, r)| {
            let m = c.members(&topology);
            let k = failed_count(r, m.len());
            (c, m, k)
        })
        .collect();

    let mut out = Vec::new();
    for (g, &fer) in grid.iter().enumerate() {
        let f = failed_count(fer, swept_members.len());
        let per_sample = run_indexed(samples, plan.threads, |k| {
            let mut rng = stream(seed, &[TAG_CLASSED, g as u64, k as u64]);
            let mut degraded = DegradedNetwork::new(&topology);
            for i in sample_removals(&mut rng, swept_members.len(), f) {
                apply(&mut degraded, swept.failure_type(), swept_members[i]);
            }
            for (class, members, count) in &fixed_members {
                for i in sample_removals(&mut rng, members.len(), *count) {
                    apply(&mut degraded, class.failure_type(), members[i]);
                }
            }
            evaluate(&degraded, &plan.metrics, capacity, sub_seed(seed, &[TAG_ASPL, g as u64, k as u64]))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let time = (!swept_members.is_empty())
            .then(|| normalized_time(f as u64, swept_members.len() as u64))
            .transpose()?;
        for mut row in aggregate(&plan.metrics, &per_sample) {
            row.set_fer(swept.failure_type(), fer);
            row.normalized_time = time;
            out.push(row);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_bcube, build_dcell, build_fat_tree, build_three_layer};
    use proptest::prelude::*;

    #[test]
    fn interval_examples() {
        let c = confidence_interval(&[0.3; 10]).unwrap();
        assert_eq!((c.mean, c.half_width), (0.3, Some(0.0)));
        let mut xs = vec![0.0; 1000];
        xs.extend(vec![1.0; 1000]);
        let c = confidence_interval(&xs).unwrap();
        assert_eq!(c.mean, 0.5);
        let h = c.half_width.unwrap();
        assert!((h - 1.96 * (0.25f64 * 2000.0 / 1999.0).sqrt() / 2000f64.sqrt()).abs() < 1e-15);
        assert!((h - 0.0219).abs() < 1e-4);
        let c = confidence_interval(&[0.7]).unwrap();
        assert_eq!((c.mean, c.half_width), (0.7, None));
        assert!(confidence_interval(&[]).is_none());
    }

    #[test]
    fn sub_seeds_differ_per_path() {
        let a = sub_seed(7, &[1, 0]);
        assert_ne!(a, sub_seed(7, &[1, 1]));
        assert_ne!(a, sub_seed(7, &[0, 1]));
        assert_ne!(a, sub_seed(8, &[1, 0]));
        assert_eq!(a, sub_seed(7, &[1, 0]));
    }

    #[test]
    fn failed_count_rounds_down() {
        assert_eq!(failed_count(0.3, 10368), 3110);
        assert_eq!(failed_count(0.35, 20), 7);
        assert_eq!(failed_count(0.0, 5), 0);
        assert_eq!(failed_count(1.0, 5), 5);
    }

    #[test]
    fn union_find_agrees_with_traversal_on_fixed_orders() {
        for t in [
            build_bcube(2, 1).unwrap(),
            build_dcell(3, 1).unwrap(),
            build_fat_tree(4).unwrap(),
            build_three_layer(2, 2, 2, true).unwrap(),
        ] {
            for failure in [FailureType::Link, FailureType::Switch] {
                let universe = element_universe(&t, failure);
                for seed in 0..40 {
                    let mut order = universe.clone();
                    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                    assert_eq!(
                        first_disconnection(&t, failure, &order),
                        first_disconnection_by_traversal(&t, failure, &order),
                        "{:?} {failure}",
                        t.kind()
                    );
                }
            }
        }
    }

    #[test]
    fn single_switch_fails_at_first_removal() {
        let t = build_bcube(3, 0).unwrap();
        assert_eq!(first_disconnection(&t, FailureType::Switch, &[3]), 1);
    }

    #[test]
    fn zero_ratio_keeps_everything() {
        for params in [TopologyParams::dcell(3, 1), TopologyParams::fat_tree(4)] {
            for failure in [FailureType::Link, FailureType::Switch, FailureType::Server] {
                let plan = ExperimentPlan::sweep(params, failure, vec![0.0])
                    .with_samples(3)
                    .with_metrics(vec![Metric::Asr, Metric::Sc]);
                let rows = survival_sweep(&plan, None).unwrap();
                assert_eq!(rows.len(), 2);
                assert!(rows.iter().all(|r| r.mean == Some(1.0)));
                assert_eq!(rows[0].normalized_time, Some(0.0));
            }
        }
    }

    #[test]
    fn nmttf_rejects_server_failures() {
        let plan = ExperimentPlan::reliability(TopologyParams::fat_tree(4), FailureType::Server);
        assert!(matches!(simulate_nmttf(&plan), Err(Error::Config(_))));
    }

    #[test]
    fn nmttf_reports_missing_closed_form() {
        let plan = ExperimentPlan::reliability(TopologyParams::dcell(2, 3), FailureType::Switch).with_samples(20);
        let r = simulate_nmttf(&plan).unwrap();
        assert!(r.relative_error.is_none());
        assert!(r.note.unwrap().contains("out of scope"));
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let base = ExperimentPlan::sweep(TopologyParams::bcube(4, 1), FailureType::Link, vec![0.1, 0.3])
            .with_samples(30)
            .with_seed(99)
            .with_metrics(vec![Metric::Asr, Metric::Aspl]);
        let one = survival_sweep(&base.clone().with_threads(1), None).unwrap();
        let four = survival_sweep(&base.with_threads(4), None).unwrap();
        assert_eq!(one, four);

        let rel = ExperimentPlan::reliability(TopologyParams::dcell(4, 1), FailureType::Link).with_samples(50);
        let a = simulate_nmttf(&rel.clone().with_threads(1)).unwrap();
        let b = simulate_nmttf(&rel.with_threads(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn plan_validation_names_fields() {
        let mut plan = ExperimentPlan::sweep(TopologyParams::fat_tree(4), FailureType::Link, vec![0.2, 0.1]);
        match survival_sweep(&plan, None) {
            Err(Error::Config(m)) => assert!(m.starts_with("fer_grids[0]"), "{m}"),
            other => panic!("{other:?}"),
        }
        plan.fer_grids = vec![vec![1.5]];
        assert!(matches!(survival_sweep(&plan, None), Err(Error::Config(m)) if m.contains("fer_grids[0][0]")));
        plan.fer_grids = vec![vec![0.1]];
        plan.samples = Some(0);
        assert!(matches!(survival_sweep(&plan, None), Err(Error::Config(m)) if m.starts_with("samples")));
        let fat = ExperimentPlan::reliability(TopologyParams::fat_tree(4), FailureType::Link);
        assert!(classed_sweep(&fat, ElementClass::EdgeSwitch, &[0.1], &[], None).is_err());
    }

    #[test]
    fn rcr_needs_assignment() {
        let plan = ExperimentPlan::sweep(TopologyParams::fat_tree(4), FailureType::Link, vec![0.1])
            .with_samples(2)
            .with_metrics(vec![Metric::RcrCpu]);
        assert!(matches!(survival_sweep(&plan, None), Err(Error::Config(_))));
    }

    #[test]
    fn class_members_of_three_layer() {
        let t = build_three_layer(3, 4, 2, true).unwrap();
        let count = |c: ElementClass| c.members(&t).len();
        assert_eq!(count(ElementClass::EdgeSwitch), 6);
        assert_eq!(count(ElementClass::AggSwitch), 4);
        assert_eq!(count(ElementClass::CoreSwitch), 2);
        assert_eq!(count(ElementClass::EdgeLink), 24);
        assert_eq!(count(ElementClass::AggLink), 12);
        assert_eq!(count(ElementClass::CoreLink), 8);
        assert_eq!(ElementClass::parse("agg-link"), Some(ElementClass::AggLink));
    }

    #[test]
    fn classed_sweep_with_zero_ratios_is_lossless() {
        let plan = ExperimentPlan::reliability(TopologyParams::three_layer(2, 3, 2), FailureType::Switch)
            .with_samples(4)
            .with_metrics(vec![Metric::Asr]);
        let rows = classed_sweep(
            &plan,
            ElementClass::EdgeLink,
            &[0.0],
            &[(ElementClass::AggSwitch, 0.0), (ElementClass::CoreLink, 0.0)],
            None,
        )
        .unwrap();
        assert_eq!(rows[0].mean, Some(1.0));
        assert_eq!(rows[0].fer_link, Some(0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn union_find_matches_traversal(
            params in prop_oneof![
                (1u32..3, 1u32..3, 1u32..3).prop_map(|(a, e, p)| TopologyParams::three_layer(a, e, p).with_core_core_link(true)),
                (1u32..4).prop_map(|h| TopologyParams::fat_tree(2 * h)),
                (2u32..4, 0u32..3).prop_map(|(n, l)| TopologyParams::bcube(n, l)),
                (2u32..4, 0u32..3).prop_map(|(n, l)| TopologyParams::dcell(n, l)),
            ],
            switch in any::<bool>(),
            gw in 1u32..4,
            seed in any::<u64>(),
        ) {
            let base = build(&params).unwrap();
            let g = gw.min(base.top_level_switches().len() as u32);
            let t = base.with_gateway_policy(crate::topology::GatewayPolicy::Count(g)).unwrap();
            let failure = if switch { FailureType::Switch } else { FailureType::Link };
            let mut order = element_universe(&t, failure);
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(
                first_disconnection(&t, failure, &order),
                first_disconnection_by_traversal(&t, failure, &order)
            );
        }
    }
}
