//! Data center network topologies as typed, undirected graphs.
//!
//! Four generators are provided: the conventional three-layer tree, the
//! Fat-tree Clos network, and the server-centric BCube and DCell designs.
//! Every generator numbers servers first and switches second, both in
//! construction order, so two builds with identical parameters produce
//! identical graphs.

mod builders;
mod document;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use builders::{build, build_bcube, build_dcell, build_fat_tree, build_three_layer};
pub use document::{parse_topology, serialize_topology, DOCUMENT_FORMAT};

/// Index of a node, unique within one topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Position of a switch inside its topology's hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SwitchLayer {
    Edge,
    Aggregation,
    Core,
    /// BCube level `k` switch; DCell switches are all level 0.
    Level(u8),
}

impl SwitchLayer {
    pub fn as_str(&self) -> String {
        match self {
            SwitchLayer::Edge => "edge".to_string(),
            SwitchLayer::Aggregation => "aggregation".to_string(),
            SwitchLayer::Core => "core".to_string(),
            SwitchLayer::Level(k) => format!("level{k}"),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "edge" => Some(SwitchLayer::Edge),
            "aggregation" => Some(SwitchLayer::Aggregation),
            "core" => Some(SwitchLayer::Core),
            _ => s
                .strip_prefix("level")
                .and_then(|k| k.parse::<u8>().ok())
                .map(SwitchLayer::Level),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Server,
    Switch(SwitchLayer),
}

impl NodeKind {
    #[inline]
    pub fn is_server(&self) -> bool {
        matches!(self, NodeKind::Server)
    }

    #[inline]
    pub fn is_switch(&self) -> bool {
        matches!(self, NodeKind::Switch(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    ThreeLayer,
    FatTree,
    #[serde(rename = "bcube")]
    BCube,
    #[serde(rename = "dcell")]
    DCell,
}

impl TopologyKind {
    pub fn name(&self) -> &'static str {
        match self {
            TopologyKind::ThreeLayer => "three-layer",
            TopologyKind::FatTree => "fat-tree",
            TopologyKind::BCube => "bcube",
            TopologyKind::DCell => "dcell",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "three-layer" | "threelayer" | "three_layer" | "3-layer" => Some(TopologyKind::ThreeLayer),
            "fat-tree" | "fattree" | "fat_tree" => Some(TopologyKind::FatTree),
            "bcube" => Some(TopologyKind::BCube),
            "dcell" => Some(TopologyKind::DCell),
            _ => None,
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which switches act as gateways to the outside world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "policy", content = "g")]
pub enum GatewayPolicy {
    /// Every top-level switch is a gateway.
    #[default]
    MaxGpd,
    /// The `g` top-level switches with the smallest node ids.
    Count(u32),
    /// A single gateway (the top-level switch with the smallest id).
    MinGpd,
}

impl GatewayPolicy {
    /// Parses `max`, `min` or `count=<g>`.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "max" => Some(GatewayPolicy::MaxGpd),
            "min" => Some(GatewayPolicy::MinGpd),
            _ => s
                .strip_prefix("count=")
                .and_then(|g| g.parse().ok())
                .map(GatewayPolicy::Count),
        }
    }
}

impl fmt::Display for GatewayPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GatewayPolicy::MaxGpd => f.write_str("max"),
            GatewayPolicy::MinGpd => f.write_str("min"),
            GatewayPolicy::Count(g) => write!(f, "count={g}"),
        }
    }
}

/// Formation parameters of a topology.
///
/// `n` is the switch port count for Fat-tree, BCube and DCell. For the
/// three-layer topology it is the number of aggregation-facing ports of a
/// core switch (`2 * pairs`), which is what the gateway port density uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TopologyParams {
    pub kind: TopologyKind,
    #[serde(default)]
    pub n: u32,
    #[serde(default)]
    pub l: u32,
    #[serde(default)]
    pub n_a: u32,
    #[serde(default)]
    pub n_e: u32,
    #[serde(default)]
    pub pairs: u32,
    #[serde(default)]
    pub include_core_core_link: bool,
    #[serde(default)]
    pub gateway_policy: GatewayPolicy,
}

impl TopologyParams {
    pub fn three_layer(n_a: u32, n_e: u32, pairs: u32) -> Self {
        TopologyParams {
            kind: TopologyKind::ThreeLayer,
            n: 2 * pairs,
            l: 0,
            n_a,
            n_e,
            pairs,
            include_core_core_link: false,
            gateway_policy: GatewayPolicy::MaxGpd,
        }
    }

    pub fn fat_tree(n: u32) -> Self {
        Self::simple(TopologyKind::FatTree, n, 0)
    }

    pub fn bcube(n: u32, l: u32) -> Self {
        Self::simple(TopologyKind::BCube, n, l)
    }

    pub fn dcell(n: u32, l: u32) -> Self {
        Self::simple(TopologyKind::DCell, n, l)
    }

    fn simple(kind: TopologyKind, n: u32, l: u32) -> Self {
        TopologyParams {
            kind,
            n,
            l,
            n_a: 0,
            n_e: 0,
            pairs: 0,
            include_core_core_link: false,
            gateway_policy: GatewayPolicy::MaxGpd,
        }
    }

    pub fn with_gateway_policy(mut self, policy: GatewayPolicy) -> Self {
        self.gateway_policy = policy;
        self
    }

    pub fn with_core_core_link(mut self, include: bool) -> Self {
        self.include_core_core_link = include;
        self
    }

    /// Checks the per-kind parameter bounds.
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            TopologyKind::ThreeLayer => {
                if self.n_a < 1 {
                    return Err(Error::param("n_a", "must be >= 1"));
                }
                if self.n_e < 1 {
                    return Err(Error::param("n_e", "must be >= 1"));
                }
                if self.pairs < 1 {
                    return Err(Error::param("pairs", "must be >= 1"));
                }
            }
            TopologyKind::FatTree => {
                if self.n < 2 {
                    return Err(Error::param("n", format!("fat-tree needs n >= 2, got {}", self.n)));
                }
                if self.n % 2 != 0 {
                    return Err(Error::param("n", format!("fat-tree needs an even n, got {}", self.n)));
                }
            }
            TopologyKind::BCube | TopologyKind::DCell => {
                if self.n < 2 {
                    return Err(Error::param("n", format!("{} needs n >= 2, got {}", self.kind, self.n)));
                }
            }
        }
        let top = top_level_switch_count(self)?;
        match self.gateway_policy {
            GatewayPolicy::Count(0) => Err(Error::param("gateway_policy", "gateway count must be positive")),
            GatewayPolicy::Count(g) if u64::from(g) > top => Err(Error::param(
                "gateway_policy",
                format!("{g} gateways requested but only {top} top-level switches exist"),
            )),
            _ => Ok(()),
        }
    }

    /// Short `key=value;...` rendering used in report rows.
    pub fn label(&self) -> String {
        let mut s = match self.kind {
            TopologyKind::ThreeLayer => format!("n_a={};n_e={};pairs={}", self.n_a, self.n_e, self.pairs),
            TopologyKind::FatTree => format!("n={}", self.n),
            TopologyKind::BCube | TopologyKind::DCell => format!("n={};l={}", self.n, self.l),
        };
        if self.include_core_core_link {
            s.push_str(";core_core=1");
        }
        if self.gateway_policy != GatewayPolicy::MaxGpd {
            s.push_str(&format!(";gw={}", self.gateway_policy));
        }
        s
    }

    /// Inverse of [`TopologyParams::label`].
    pub fn from_label(kind: TopologyKind, label: &str) -> Option<Self> {
        let mut p = Self::simple(kind, 0, 0);
        for field in label.split(';').filter(|f| !f.is_empty()) {
            let (key, value) = field.split_once('=')?;
            match key {
                "core_core" => p.include_core_core_link = value == "1",
                "gw" => p.gateway_policy = GatewayPolicy::parse(value)?,
                _ => {
                    let v: u32 = value.parse().ok()?;
                    match key {
                        "n" => p.n = v,
                        "l" => p.l = v,
                        "n_a" => p.n_a = v,
                        "n_e" => p.n_e = v,
                        "pairs" => p.pairs = v,
                        _ => return None,
                    }
                }
            }
        }
        if kind == TopologyKind::ThreeLayer {
            p.n = 2 * p.pairs;
        }
        Some(p)
    }

    /// Number of network interfaces per server.
    pub fn server_ports(&self) -> u32 {
        match self.kind {
            TopologyKind::ThreeLayer | TopologyKind::FatTree => 1,
            TopologyKind::BCube | TopologyKind::DCell => self.l + 1,
        }
    }
}

fn checked_pow(base: u64, exp: u32, what: &'static str) -> Result<u64> {
    base.checked_pow(exp)
        .ok_or_else(|| Error::param(what, "topology size overflows"))
}

/// Number of servers of a DCell_l built from n-port switches (`t_l`).
pub fn dcell_server_count(n: u64, l: u32) -> Result<u64> {
    let mut t = n;
    for _ in 0..l {
        t = t
            .checked_add(1)
            .and_then(|g| g.checked_mul(t))
            .ok_or_else(|| Error::param("l", "DCell size overflows"))?;
    }
    Ok(t)
}

/// Closed-form `(servers, switches, links)` of the generator for `params`.
pub fn expected_counts(params: &TopologyParams) -> Result<(u64, u64, u64)> {
    let n = u64::from(params.n);
    let l = params.l;
    Ok(match params.kind {
        TopologyKind::ThreeLayer => {
            let (n_a, n_e, pairs) = (
                u64::from(params.n_a),
                u64::from(params.n_e),
                u64::from(params.pairs),
            );
            let servers = pairs * n_a * n_e;
            let switches = 2 + 2 * pairs + pairs * n_a;
            let links = servers + 2 * pairs * n_a + 4 * pairs + pairs + u64::from(params.include_core_core_link);
            (servers, switches, links)
        }
        TopologyKind::FatTree => {
            let h = n / 2;
            (n * n * n / 4, h * h + 2 * n * h, 3 * n * n * n / 4)
        }
        TopologyKind::BCube => {
            let servers = checked_pow(n, l + 1, "l")?;
            let switches = u64::from(l + 1) * checked_pow(n, l, "l")?;
            (servers, switches, u64::from(l + 1) * servers)
        }
        TopologyKind::DCell => {
            let servers = dcell_server_count(n, l)?;
            (servers, servers / n, servers + servers * u64::from(l) / 2)
        }
    })
}

fn top_level_switch_count(params: &TopologyParams) -> Result<u64> {
    let n = u64::from(params.n);
    Ok(match params.kind {
        TopologyKind::ThreeLayer => 2,
        TopologyKind::FatTree => (n / 2) * (n / 2),
        TopologyKind::BCube => checked_pow(n, params.l, "l")?,
        TopologyKind::DCell => dcell_server_count(n, params.l)? / n,
    })
}

/// Compressed adjacency: for node `v`, `targets[offsets[v]..offsets[v+1]]`
/// are its neighbours and `edge_ids` the matching edge indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    offsets: Vec<u32>,
    targets: Vec<u32>,
    edge_ids: Vec<u32>,
}

impl Adjacency {
    fn new(node_count: usize, edges: &[(NodeId, NodeId)]) -> Self {
        let mut degree = vec![0u32; node_count + 1];
        for &(a, b) in edges {
            degree[a.index() + 1] += 1;
            degree[b.index() + 1] += 1;
        }
        for i in 1..degree.len() {
            degree[i] += degree[i - 1];
        }
        let offsets = degree.clone();
        let mut cursor = degree;
        let mut targets = vec![0u32; edges.len() * 2];
        let mut edge_ids = vec![0u32; edges.len() * 2];
        for (e, &(a, b)) in edges.iter().enumerate() {
            for (from, to) in [(a, b), (b, a)] {
                let slot = cursor[from.index()] as usize;
                targets[slot] = to.0;
                edge_ids[slot] = e as u32;
                cursor[from.index()] += 1;
            }
        }
        Adjacency {
            offsets,
            targets,
            edge_ids,
        }
    }

    /// `(neighbour, edge index)` pairs of `v`.
    #[inline]
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (lo, hi) = (self.offsets[v] as usize, self.offsets[v + 1] as usize);
        self.targets[lo..hi]
            .iter()
            .zip(&self.edge_ids[lo..hi])
            .map(|(&t, &e)| (t as usize, e as usize))
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        (self.offsets[v + 1] - self.offsets[v]) as usize
    }
}

/// An immutable data center network graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    params: TopologyParams,
    kinds: Vec<NodeKind>,
    edges: Vec<(NodeId, NodeId)>,
    gateways: Vec<NodeId>,
    servers: Vec<NodeId>,
    switches: Vec<NodeId>,
    adjacency: Adjacency,
}

impl Topology {
    /// Assembles a topology from raw parts, checking the structural invariants.
    pub fn from_parts(
        params: TopologyParams,
        kinds: Vec<NodeKind>,
        edges: Vec<(NodeId, NodeId)>,
        mut gateways: Vec<NodeId>,
    ) -> Result<Self> {
        let count = kinds.len();
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        let mut normalized = Vec::with_capacity(edges.len());
        for (i, &(a, b)) in edges.iter().enumerate() {
            if a.index() >= count || b.index() >= count {
                return Err(Error::parse(
                    format!("edges[{i}]"),
                    format!("edge ({a}, {b}) references an unknown node"),
                ));
            }
            if a == b {
                return Err(Error::parse(format!("edges[{i}]"), format!("self-loop on node {a}")));
            }
            let key = if a < b { (a, b) } else { (b, a) };
            if !seen.insert(key) {
                return Err(Error::parse(
                    format!("edges[{i}]"),
                    format!("parallel edge ({}, {})", key.0, key.1),
                ));
            }
            normalized.push(key);
        }
        gateways.sort_unstable();
        for (i, w) in gateways.windows(2).enumerate() {
            if w[0] == w[1] {
                return Err(Error::parse(format!("gateways[{i}]"), format!("duplicate gateway {}", w[0])));
            }
        }
        for (i, g) in gateways.iter().enumerate() {
            match kinds.get(g.index()) {
                None => {
                    return Err(Error::parse(format!("gateways[{i}]"), format!("unknown node {g}")));
                }
                Some(NodeKind::Server) => {
                    return Err(Error::parse(
                        format!("gateways[{i}]"),
                        format!("node {g} is a server; gateways must be switches"),
                    ));
                }
                Some(_) => {}
            }
        }
        let servers = (0..count as u32)
            .map(NodeId)
            .filter(|v| kinds[v.index()].is_server())
            .collect();
        let switches = (0..count as u32)
            .map(NodeId)
            .filter(|v| kinds[v.index()].is_switch())
            .collect();
        let adjacency = Adjacency::new(count, &normalized);
        Ok(Topology {
            params,
            kinds,
            edges: normalized,
            gateways,
            servers,
            switches,
            adjacency,
        })
    }

    pub fn params(&self) -> &TopologyParams {
        &self.params
    }

    pub fn kind(&self) -> TopologyKind {
        self.params.kind
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn node_kind(&self, v: NodeId) -> NodeKind {
        self.kinds[v.index()]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sorted gateway switches.
    pub fn gateways(&self) -> &[NodeId] {
        &self.gateways
    }

    pub fn is_gateway(&self, v: NodeId) -> bool {
        self.gateways.binary_search(&v).is_ok()
    }

    pub fn servers(&self) -> &[NodeId] {
        &self.servers
    }

    pub fn switches(&self) -> &[NodeId] {
        &self.switches
    }

    pub fn server_count(&self) -> usize {
        self.servers.len()
    }

    pub fn switch_count(&self) -> usize {
        self.switches.len()
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adjacency.degree(v.index())
    }

    /// Switches of the highest hierarchical level, i.e. the gateway candidates.
    pub fn top_level_switches(&self) -> Vec<NodeId> {
        let top = |k: &NodeKind| match (self.params.kind, k) {
            (TopologyKind::ThreeLayer | TopologyKind::FatTree, NodeKind::Switch(SwitchLayer::Core)) => true,
            (TopologyKind::BCube, NodeKind::Switch(SwitchLayer::Level(lv))) => u32::from(*lv) == self.params.l,
            (TopologyKind::DCell, NodeKind::Switch(_)) => true,
            _ => false,
        };
        self.switches
            .iter()
            .copied()
            .filter(|v| top(&self.kinds[v.index()]))
            .collect()
    }

    /// Returns a copy of this topology with gateways re-chosen under `policy`.
    pub fn with_gateway_policy(&self, policy: GatewayPolicy) -> Result<Self> {
        let mut params = self.params;
        params.gateway_policy = policy;
        params.validate()?;
        let gateways = select_gateways(&self.top_level_switches(), policy)?;
        let mut t = self.clone();
        t.params = params;
        t.gateways = gateways;
        Ok(t)
    }

    /// Whether the failure-free graph is a single connected component.
    pub fn is_connected(&self) -> bool {
        if self.kinds.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.kinds.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for (w, _) in self.adjacency.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.kinds.len()
    }
}

pub(crate) fn select_gateways(top: &[NodeId], policy: GatewayPolicy) -> Result<Vec<NodeId>> {
    let mut sorted = top.to_vec();
    sorted.sort_unstable();
    let g = match policy {
        GatewayPolicy::MaxGpd => sorted.len(),
        GatewayPolicy::MinGpd => 1,
        GatewayPolicy::Count(g) => g as usize,
    };
    if g == 0 || g > sorted.len() {
        return Err(Error::param(
            "gateway_policy",
            format!("{g} gateways requested but {} top-level switches exist", sorted.len()),
        ));
    }
    sorted.truncate(g);
    Ok(sorted)
}

/// Ports per server offered by the gateways: `n * g / |S|`.
///
/// For the three-layer topology the port count of a core switch is the number
/// of its aggregation-facing ports.
pub fn gateway_port_density(topology: &Topology) -> Result<f64> {
    let g = topology.gateways().len();
    if g == 0 {
        return Err(Error::Config("topology has no gateway".into()));
    }
    let p = topology.params();
    let ports = match p.kind {
        TopologyKind::ThreeLayer => 2 * p.pairs,
        _ => p.n,
    };
    Ok(f64::from(ports) * g as f64 / topology.server_count() as f64)
}
