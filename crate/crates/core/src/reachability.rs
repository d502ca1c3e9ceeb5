//! Operational subnetworks of a degraded topology and the survivability
//! metrics computed on them.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::topology::{NodeId, Topology};

/// A topology with some links, switches and servers removed.
///
/// A removed node makes its incident links unusable without marking them as
/// removed links.
#[derive(Debug, Clone)]
pub struct DegradedNetwork<'a> {
    base: &'a Topology,
    link_down: Vec<bool>,
    node_down: Vec<bool>,
    removed_links: usize,
    removed_switches: usize,
    removed_servers: usize,
}

impl<'a> DegradedNetwork<'a> {
    pub fn new(base: &'a Topology) -> Self {
        DegradedNetwork {
            base,
            link_down: vec![false; base.edge_count()],
            node_down: vec![false; base.node_count()],
            removed_links: 0,
            removed_switches: 0,
            removed_servers: 0,
        }
    }

    /// Builds a degraded view from removal lists; repeated entries are an error.
    pub fn with_removals(
        base: &'a Topology,
        links: &[usize],
        switches: &[NodeId],
        servers: &[NodeId],
    ) -> Result<Self> {
        let mut d = Self::new(base);
        for &e in links {
            if !d.remove_link(e)? {
                return Err(Error::Domain(format!("link {e} listed twice")));
            }
        }
        for &v in switches {
            if !d.remove_switch(v)? {
                return Err(Error::Domain(format!("switch {v} listed twice")));
            }
        }
        for &v in servers {
            if !d.remove_server(v)? {
                return Err(Error::Domain(format!("server {v} listed twice")));
            }
        }
        Ok(d)
    }

    pub fn base(&self) -> &'a Topology {
        self.base
    }

    /// Marks edge `e` as failed. Returns false if it already was.
    pub fn remove_link(&mut self, e: usize) -> Result<bool> {
        if e >= self.link_down.len() {
            return Err(Error::Domain(format!("link {e} does not exist")));
        }
        let fresh = !self.link_down[e];
        if fresh {
            self.link_down[e] = true;
            self.removed_links += 1;
        }
        Ok(fresh)
    }

    pub fn remove_switch(&mut self, v: NodeId) -> Result<bool> {
        match self.base.kinds().get(v.index()) {
            Some(k) if k.is_switch() => {}
            _ => return Err(Error::Domain(format!("node {v} is not a switch"))),
        }
        let fresh = !self.node_down[v.index()];
        if fresh {
            self.node_down[v.index()] = true;
            self.removed_switches += 1;
        }
        Ok(fresh)
    }

    pub fn remove_server(&mut self, v: NodeId) -> Result<bool> {
        match self.base.kinds().get(v.index()) {
            Some(k) if k.is_server() => {}
            _ => return Err(Error::Domain(format!("node {v} is not a server"))),
        }
        let fresh = !self.node_down[v.index()];
        if fresh {
            self.node_down[v.index()] = true;
            self.removed_servers += 1;
        }
        Ok(fresh)
    }

    /// `(links, switches, servers)` removed so far.
    pub fn removed_counts(&self) -> (usize, usize, usize) {
        (self.removed_links, self.removed_switches, self.removed_servers)
    }

    #[inline]
    pub fn is_node_up(&self, v: usize) -> bool {
        !self.node_down[v]
    }

    #[inline]
    pub fn is_link_failed(&self, e: usize) -> bool {
        self.link_down[e]
    }

    #[inline]
    fn usable(&self, w: usize, e: usize) -> bool {
        !self.link_down[e] && !self.node_down[w]
    }
}

const NO_COMPONENT: u32 = u32::MAX;

/// Connected components of the surviving graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubnetworkPartition {
    component_of: Vec<u32>,
    server_counts: Vec<usize>,
    has_gateway: Vec<bool>,
}

impl SubnetworkPartition {
    pub fn component_count(&self) -> usize {
        self.server_counts.len()
    }

    /// Component index of node `v`, `None` if the node was removed.
    pub fn component_of(&self, v: NodeId) -> Option<usize> {
        match self.component_of[v.index()] {
            NO_COMPONENT => None,
            c => Some(c as usize),
        }
    }

    pub fn is_accessible(&self, component: usize) -> bool {
        self.has_gateway[component]
    }

    /// Whether node `v` survived and lies in a component with a gateway.
    pub fn node_accessible(&self, v: NodeId) -> bool {
        self.component_of(v).is_some_and(|c| self.has_gateway[c])
    }

    /// Indices of the components holding at least one surviving gateway.
    pub fn accessible(&self) -> Vec<usize> {
        (0..self.component_count()).filter(|&c| self.has_gateway[c]).collect()
    }

    /// Server count `s_k` of every accessible component.
    pub fn accessible_server_counts(&self) -> Vec<usize> {
        self.accessible().into_iter().map(|c| self.server_counts[c]).collect()
    }

    pub fn server_counts(&self) -> &[usize] {
        &self.server_counts
    }

    /// Node sets of all components, in component index order.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.component_count()];
        for (v, &c) in self.component_of.iter().enumerate() {
            if c != NO_COMPONENT {
                out[c as usize].push(NodeId(v as u32));
            }
        }
        out
    }
}

/// Finds the connected components of the surviving graph. Components reached
/// from surviving gateways come first.
pub fn partition(degraded: &DegradedNetwork<'_>) -> SubnetworkPartition {
    let topo = degraded.base;
    let adj = topo.adjacency();
    let n = topo.node_count();
    let mut component_of = vec![NO_COMPONENT; n];
    let mut server_counts = Vec::new();
    let mut has_gateway = Vec::new();
    let mut queue: Vec<u32> = Vec::with_capacity(n);

    let roots = topo
        .gateways()
        .iter()
        .map(|g| g.index())
        .chain(0..n);
    for root in roots {
        if component_of[root] != NO_COMPONENT || !degraded.is_node_up(root) {
            continue;
        }
        let id = server_counts.len() as u32;
        let mut servers = 0;
        let mut gateway = false;
        component_of[root] = id;
        queue.clear();
        queue.push(root as u32);
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head] as usize;
            head += 1;
            if topo.kinds()[v].is_server() {
                servers += 1;
            } else if !gateway && topo.is_gateway(NodeId(v as u32)) {
                gateway = true;
            }
            for (w, e) in adj.neighbors(v) {
                if component_of[w] == NO_COMPONENT && degraded.usable(w, e) {
                    component_of[w] = id;
                    queue.push(w as u32);
                }
            }
        }
        server_counts.push(servers);
        has_gateway.push(gateway);
    }
    SubnetworkPartition {
        component_of,
        server_counts,
        has_gateway,
    }
}

/// Marks every node reachable from a surviving gateway.
pub fn accessible_nodes(degraded: &DegradedNetwork<'_>) -> Vec<bool> {
    let topo = degraded.base;
    let adj = topo.adjacency();
    let mut seen = vec![false; topo.node_count()];
    let mut stack: Vec<usize> = Vec::new();
    for g in topo.gateways() {
        let g = g.index();
        if degraded.is_node_up(g) && !seen[g] {
            seen[g] = true;
            stack.push(g);
        }
    }
    while let Some(v) = stack.pop() {
        for (w, e) in adj.neighbors(v) {
            if !seen[w] && degraded.usable(w, e) {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// `sum(s_k) / total_servers`.
pub fn accessible_ratio_of(accessible_server_counts: &[usize], total_servers: usize) -> f64 {
    accessible_server_counts.iter().sum::<usize>() as f64 / total_servers as f64
}

/// `sum(s_k (s_k - 1)) / (S_a (S_a - 1))`, or 0 when `S_a <= 1`.
pub fn connectivity_of(accessible_server_counts: &[usize]) -> f64 {
    let total: usize = accessible_server_counts.iter().sum();
    if total <= 1 {
        return 0.0;
    }
    let within: f64 = accessible_server_counts
        .iter()
        .map(|&s| s as f64 * (s as f64 - 1.0))
        .sum();
    within / (total as f64 * (total as f64 - 1.0))
}

/// Fraction of the original servers that can still reach a gateway.
pub fn accessible_server_ratio(partition: &SubnetworkPartition, total_servers: usize) -> Result<f64> {
    if total_servers == 0 {
        return Err(Error::Domain("topology has no servers".into()));
    }
    Ok(accessible_ratio_of(&partition.accessible_server_counts(), total_servers))
}

/// Density of the server-to-server reachability graph over accessible servers.
pub fn server_connectivity(partition: &SubnetworkPartition) -> f64 {
    connectivity_of(&partition.accessible_server_counts())
}

/// How server pairs are chosen for the average shortest path length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSampling {
    /// Every ordered pair of accessible servers.
    Exact,
    /// Exact up to `exact_limit` accessible servers. Above it, whole BFS
    /// trees are grown from uniformly chosen source servers until at least
    /// `target_pairs` pairs are measured.
    Auto {
        exact_limit: usize,
        target_pairs: u64,
        seed: u64,
    },
}

impl Default for PairSampling {
    fn default() -> Self {
        PairSampling::Auto {
            exact_limit: 4000,
            target_pairs: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLength {
    pub mean: f64,
    /// Ordered server pairs measured.
    pub pairs: u64,
    pub sampled: bool,
}

/// Mean hop count between accessible servers of the same component.
///
/// Returns `None` when no component holds two accessible servers.
pub fn average_shortest_path_length(
    degraded: &DegradedNetwork<'_>,
    partition: &SubnetworkPartition,
    sampling: PairSampling,
) -> Option<PathLength> {
    let topo = degraded.base;
    let n = topo.node_count();

    // Compact adjacency over the surviving nodes of accessible components.
    let mut local = vec![u32::MAX; n];
    let mut nodes: Vec<usize> = Vec::new();
    for v in 0..n {
        if partition.node_accessible(NodeId(v as u32)) {
            local[v] = nodes.len() as u32;
            nodes.push(v);
        }
    }
    let mut offsets = Vec::with_capacity(nodes.len() + 1);
    let mut targets: Vec<u32> = Vec::new();
    offsets.push(0u32);
    for &v in &nodes {
        for (w, e) in topo.adjacency().neighbors(v) {
            if local[w] != u32::MAX && !degraded.is_link_failed(e) {
                targets.push(local[w]);
            }
        }
        offsets.push(targets.len() as u32);
    }
    let is_server: Vec<bool> = nodes.iter().map(|&v| topo.kinds()[v].is_server()).collect();

    // Sources must share a component with another accessible server.
    let sources: Vec<u32> = (0..nodes.len() as u32)
        .filter(|&i| {
            is_server[i as usize]
                && partition
                    .component_of(NodeId(nodes[i as usize] as u32))
                    .is_some_and(|c| partition.server_counts()[c] >= 2)
        })
        .collect();
    if sources.is_empty() {
        return None;
    }

    let (chosen, sampled) = match sampling {
        PairSampling::Auto {
            exact_limit,
            target_pairs,
            seed,
        } if sources.len() > exact_limit => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let order = sample(&mut rng, sources.len(), sources.len());
            let order: Vec<u32> = order.into_iter().map(|i| sources[i]).collect();
            (order, Some(target_pairs))
        }
        _ => (sources, None),
    };

    let m = nodes.len();
    let mut visited = vec![0u64; m];
    let mut frontier = vec![0u64; m];
    let mut next = vec![0u64; m];
    let mut total_hops = 0u128;
    let mut pairs = 0u64;

    for batch in chosen.chunks(64) {
        visited.iter_mut().for_each(|x| *x = 0);
        frontier.iter_mut().for_each(|x| *x = 0);
        for (bit, &s) in batch.iter().enumerate() {
            visited[s as usize] |= 1 << bit;
            frontier[s as usize] |= 1 << bit;
        }
        let mut depth = 0u64;
        loop {
            depth += 1;
            let mut any = false;
            for v in 0..m {
                let mut acc = 0u64;
                for &w in &targets[offsets[v] as usize..offsets[v + 1] as usize] {
                    acc |= frontier[w as usize];
                }
                let fresh = acc & !visited[v];
                next[v] = fresh;
                if fresh != 0 {
                    any = true;
                    visited[v] |= fresh;
                    if is_server[v] {
                        let k = u64::from(fresh.count_ones());
                        pairs += k;
                        total_hops += u128::from(k * depth);
                    }
                }
            }
            if !any {
                break;
            }
            std::mem::swap(&mut frontier, &mut next);
        }
        if sampled.is_some_and(|target| pairs >= target) {
            break;
        }
    }
    if pairs == 0 {
        return None;
    }
    Some(PathLength {
        mean: total_hops as f64 / pairs as f64,
        pairs,
        sampled: sampled.is_some(),
    })
}

/// Capacity-weighted share of servers that remain accessible. `weights` is
/// indexed by server node id.
pub fn remaining_capacity_ratio(
    degraded: &DegradedNetwork<'_>,
    partition: &SubnetworkPartition,
    weights: &[f64],
) -> Result<f64> {
    let topo = degraded.base;
    if weights.len() != topo.server_count() {
        return Err(Error::Config(format!(
            "capacity assignment covers {} servers, topology has {}",
            weights.len(),
            topo.server_count()
        )));
    }
    let total = compensated_sum(weights.iter().copied());
    let kept = compensated_sum(
        topo.servers()
            .iter()
            .zip(weights)
            .filter(|(s, _)| partition.node_accessible(**s))
            .map(|(_, &z)| z),
    );
    if total <= 0.0 {
        return Err(Error::Config("total capacity must be positive".into()));
    }
    Ok(kept / total)
}

/// Neumaier summation; sums of short decimal capacities come out exact.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    sum + carry
}
