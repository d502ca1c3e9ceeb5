use super::{
    expected_counts, select_gateways, NodeId, NodeKind, SwitchLayer, Topology, TopologyKind,
    TopologyParams,
};
use crate::error::{Error, Result};

/// Graph under construction: servers are allocated first, then switches.
struct Builder {
    kinds: Vec<NodeKind>,
    edges: Vec<(NodeId, NodeId)>,
}

impl Builder {
    fn new(servers: usize, switches: usize, links: usize) -> Self {
        let mut kinds = Vec::with_capacity(servers + switches);
        kinds.resize(servers, NodeKind::Server);
        Builder {
            kinds,
            edges: Vec::with_capacity(links),
        }
    }

    fn add_switch(&mut self, layer: SwitchLayer) -> NodeId {
        self.kinds.push(NodeKind::Switch(layer));
        NodeId((self.kinds.len() - 1) as u32)
    }

    fn link(&mut self, a: usize, b: usize) {
        self.edges.push((NodeId(a as u32), NodeId(b as u32)));
    }

    fn finish(self, params: TopologyParams) -> Result<Topology> {
        let mut topology = Topology::from_parts(params, self.kinds, self.edges, Vec::new())?;
        topology.gateways = select_gateways(&topology.top_level_switches(), params.gateway_policy)?;
        Ok(topology)
    }
}

fn sizes(params: &TopologyParams) -> Result<(usize, usize, usize)> {
    let (s, c, e) = expected_counts(params)?;
    let limit = u64::from(u32::MAX) / 2;
    if s + c > limit || e > limit {
        return Err(Error::param("n", "topology too large"));
    }
    Ok((s as usize, c as usize, e as usize))
}

/// Builds any topology from its parameters.
pub fn build(params: &TopologyParams) -> Result<Topology> {
    let mut params = *params;
    if params.kind == TopologyKind::ThreeLayer {
        params.n = 2 * params.pairs;
    }
    params.validate()?;
    match params.kind {
        TopologyKind::ThreeLayer => three_layer(params),
        TopologyKind::FatTree => fat_tree(params),
        TopologyKind::BCube => bcube(params),
        TopologyKind::DCell => dcell(params),
    }
}

/// Conventional three-layer topology: two core switches, `pairs` aggregation
/// pairs, each pair serving `n_a` edge switches of `n_e` servers.
pub fn build_three_layer(n_a: u32, n_e: u32, pairs: u32, include_core_core_link: bool) -> Result<Topology> {
    build(&TopologyParams::three_layer(n_a, n_e, pairs).with_core_core_link(include_core_core_link))
}

pub fn build_fat_tree(n: u32) -> Result<Topology> {
    build(&TopologyParams::fat_tree(n))
}

pub fn build_bcube(n: u32, l: u32) -> Result<Topology> {
    build(&TopologyParams::bcube(n, l))
}

pub fn build_dcell(n: u32, l: u32) -> Result<Topology> {
    build(&TopologyParams::dcell(n, l))
}

fn three_layer(params: TopologyParams) -> Result<Topology> {
    let (servers, switches, links) = sizes(&params)?;
    let (n_a, n_e, pairs) = (params.n_a as usize, params.n_e as usize, params.pairs as usize);
    let mut b = Builder::new(servers, switches, links);

    let core = [b.add_switch(SwitchLayer::Core), b.add_switch(SwitchLayer::Core)];
    let aggs: Vec<[NodeId; 2]> = (0..pairs)
        .map(|_| [b.add_switch(SwitchLayer::Aggregation), b.add_switch(SwitchLayer::Aggregation)])
        .collect();
    let edge_switches: Vec<NodeId> = (0..pairs * n_a).map(|_| b.add_switch(SwitchLayer::Edge)).collect();

    // server p*n_a*n_e + e*n_e + s hangs off edge switch p*n_a + e
    for (e, sw) in edge_switches.iter().enumerate() {
        for s in 0..n_e {
            b.link(e * n_e + s, sw.index());
        }
    }
    for (p, pair) in aggs.iter().enumerate() {
        for sw in &edge_switches[p * n_a..(p + 1) * n_a] {
            for agg in pair {
                b.link(sw.index(), agg.index());
            }
        }
    }
    for pair in &aggs {
        b.link(pair[0].index(), pair[1].index());
    }
    for pair in &aggs {
        for agg in pair {
            for c in core {
                b.link(agg.index(), c.index());
            }
        }
    }
    if params.include_core_core_link {
        b.link(core[0].index(), core[1].index());
    }
    b.finish(params)
}

fn fat_tree(params: TopologyParams) -> Result<Topology> {
    let (servers, switches, links) = sizes(&params)?;
    let n = params.n as usize;
    let half = n / 2;
    let mut b = Builder::new(servers, switches, links);

    let core: Vec<NodeId> = (0..half * half).map(|_| b.add_switch(SwitchLayer::Core)).collect();
    let aggs: Vec<NodeId> = (0..n * half).map(|_| b.add_switch(SwitchLayer::Aggregation)).collect();
    let edges: Vec<NodeId> = (0..n * half).map(|_| b.add_switch(SwitchLayer::Edge)).collect();

    // server (pod, edge, host) = (pod*half + edge)*half + host
    for (e, sw) in edges.iter().enumerate() {
        for h in 0..half {
            b.link(e * half + h, sw.index());
        }
    }
    for pod in 0..n {
        for e in 0..half {
            for a in 0..half {
                b.link(edges[pod * half + e].index(), aggs[pod * half + a].index());
            }
        }
    }
    // core switch (group, i) reaches every pod through aggregation switch `group`
    for group in 0..half {
        for i in 0..half {
            let c = core[group * half + i];
            for pod in 0..n {
                b.link(aggs[pod * half + group].index(), c.index());
            }
        }
    }
    b.finish(params)
}

fn bcube(params: TopologyParams) -> Result<Topology> {
    let (servers, switches, links) = sizes(&params)?;
    let n = params.n as usize;
    let l = params.l as usize;
    let per_level = switches / (l + 1);
    let mut b = Builder::new(servers, switches, links);

    // A server's address is its index written in base n, digits a_l..a_0.
    // The level-k switch it attaches to is addressed by the remaining digits,
    // and the server uses port a_k of that switch.
    let mut stride = 1usize;
    for level in 0..=l {
        let first = b.kinds.len();
        for _ in 0..per_level {
            b.add_switch(SwitchLayer::Level(level as u8));
        }
        for server in 0..servers {
            let low = server % stride;
            let high = server / (stride * n);
            let switch = high * stride + low;
            b.link(server, first + switch);
        }
        stride *= n;
    }
    b.finish(params)
}

fn dcell(params: TopologyParams) -> Result<Topology> {
    let (servers, switches, links) = sizes(&params)?;
    let n = params.n as usize;
    let l = params.l as usize;
    let mut b = Builder::new(servers, switches, links);

    for cell in 0..switches {
        let sw = b.add_switch(SwitchLayer::Level(0));
        for s in 0..n {
            b.link(cell * n + s, sw.index());
        }
    }

    // DCell_k is g_k = t_{k-1} + 1 copies of DCell_{k-1}; for every pair of
    // sub-cells i < j, server j-1 of sub-cell i links to server i of sub-cell j.
    let mut sub = n;
    for _ in 1..=l {
        let groups = sub + 1;
        let unit = groups * sub;
        for base in (0..servers).step_by(unit) {
            for i in 0..groups {
                for j in i + 1..groups {
                    b.link(base + i * sub + (j - 1), base + j * sub + i);
                }
            }
        }
        sub = unit;
    }
    b.finish(params)
}
