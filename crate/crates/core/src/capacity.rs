//! Heterogeneous server capacities, their placement across topology modules
//! and targeted module removal.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reachability::{compensated_sum, DegradedNetwork};
use crate::topology::{dcell_server_count, NodeId, NodeKind, SwitchLayer, Topology, TopologyKind};

/// One machine type: normalized CPU and memory, and its share of the fleet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServerClass {
    pub type_number: u32,
    pub cpu: f64,
    pub memory: f64,
    pub fraction: f64,
}

const fn class(type_number: u32, cpu: f64, memory: f64, fraction: f64) -> ServerClass {
    ServerClass {
        type_number,
        cpu,
        memory,
        fraction,
    }
}

/// The built-in `google` (five merged machine types) and `synthetic` datasets.
pub fn builtin_dataset(name: &str) -> Result<Vec<ServerClass>> {
    match name {
        "google" => Ok(vec![
            class(1, 0.50, 0.50, 0.53),
            class(2, 0.50, 0.25, 0.31),
            class(3, 0.50, 0.75, 0.08),
            class(4, 1.00, 1.00, 0.07),
            class(5, 0.25, 0.25, 0.01),
        ]),
        "synthetic" => Ok(vec![class(1, 1.00, 1.00, 1.0 / 6.0), class(2, 0.20, 0.20, 5.0 / 6.0)]),
        other => Err(Error::Config(format!(
            "dataset: unknown dataset {other:?} (expected google or synthetic)"
        ))),
    }
}

/// Checks ratios in (0, 1] and fractions summing to 1.
pub fn validate_dataset(classes: &[ServerClass]) -> Result<()> {
    if classes.is_empty() {
        return Err(Error::Config("dataset: no server classes".into()));
    }
    for (i, c) in classes.iter().enumerate() {
        for (field, v) in [("cpu", c.cpu), ("memory", c.memory), ("fraction", c.fraction)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("dataset[{i}].{field}: {v} outside (0, 1]")));
            }
        }
    }
    let sum: f64 = compensated_sum(classes.iter().map(|c| c.fraction));
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("dataset: fractions sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Reads a CSV table with columns `type_number,cpu,memory,fraction`.
pub fn parse_dataset(text: &str) -> Result<Vec<ServerClass>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut classes = Vec::new();
    for (i, row) in reader.deserialize::<ServerClass>().enumerate() {
        let row = row.map_err(|e| Error::parse(format!("row {}", i + 1), e.to_string()))?;
        classes.push(row);
    }
    validate_dataset(&classes)?;
    Ok(classes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Balanced,
    Unbalanced,
}

impl Placement {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "balanced" => Some(Placement::Balanced),
            "unbalanced" => Some(Placement::Unbalanced),
            _ => None,
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Placement::Balanced => "balanced",
            Placement::Unbalanced => "unbalanced",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resource {
    Cpu,
    Memory,
}

impl Resource {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cpu" => Some(Resource::Cpu),
            "memory" | "mem" | "ram" => Some(Resource::Memory),
            _ => None,
        }
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Resource::Cpu => "cpu",
            Resource::Memory => "memory",
        })
    }
}

/// Servers grouped by the module whose loss is studied: aggregation pairs,
/// pods, or the sub-structures one level below the top.
pub fn module_partition(topology: &Topology) -> Vec<Vec<NodeId>> {
    let p = topology.params();
    let size = match p.kind {
        TopologyKind::ThreeLayer => (p.n_a * p.n_e) as usize,
        TopologyKind::FatTree => (p.n * p.n / 4) as usize,
        TopologyKind::BCube | TopologyKind::DCell if p.l == 0 => p.n as usize,
        TopologyKind::BCube => (p.n as usize).pow(p.l),
        TopologyKind::DCell => dcell_server_count(u64::from(p.n), p.l - 1).expect("built topology") as usize,
    };
    topology.servers().chunks(size.max(1)).map(|c| c.to_vec()).collect()
}

/// Number of servers of each class: `floor(fraction * servers)`, with the
/// remainder added to the class of largest fraction.
pub fn class_counts(classes: &[ServerClass], servers: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = classes
        .iter()
        .map(|c| (c.fraction * servers as f64 + 1e-9).floor() as usize)
        .collect();
    let assigned: usize = counts.iter().sum();
    if let Some(largest) = (0..classes.len()).max_by(|&a, &b| {
        classes[a]
            .fraction
            .total_cmp(&classes[b].fraction)
            .then(b.cmp(&a))
    }) {
        counts[largest] += servers.saturating_sub(assigned);
    }
    counts
}

/// Per-server capacities plus the module partition they were placed on.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityAssignment {
    /// Class index (into the dataset) of each server, by server id.
    class_of: Vec<usize>,
    classes: Vec<ServerClass>,
    modules: Vec<Vec<NodeId>>,
    placement: Placement,
}

impl CapacityAssignment {
    pub fn placement(&self) -> Placement {
        self.placement
    }

    pub fn modules(&self) -> &[Vec<NodeId>] {
        &self.modules
    }

    pub fn classes(&self) -> &[ServerClass] {
        &self.classes
    }

    pub fn class_of(&self, server: NodeId) -> &ServerClass {
        &self.classes[self.class_of[server.index()]]
    }

    /// Capacity of every server, indexed by server id.
    pub fn weights(&self, resource: Resource) -> Vec<f64> {
        self.class_of
            .iter()
            .map(|&c| match resource {
                Resource::Cpu => self.classes[c].cpu,
                Resource::Memory => self.classes[c].memory,
            })
            .collect()
    }

    /// Servers of each class inside `module`, in dataset order.
    pub fn module_class_counts(&self, module: usize) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for s in &self.modules[module] {
            counts[self.class_of[s.index()]] += 1;
        }
        counts
    }

    pub fn module_capacity(&self, module: usize, resource: Resource) -> f64 {
        let w = self.weights(resource);
        compensated_sum(self.modules[module].iter().map(|s| w[s.index()]))
    }

    /// Module with the largest total capacity; ties go to the smallest index.
    pub fn richest_module(&self, resource: Resource) -> usize {
        let mut best = 0;
        let mut best_cap = f64::NEG_INFINITY;
        for m in 0..self.modules.len() {
            let cap = self.module_capacity(m, resource);
            if cap > best_cap + 1e-9 {
                best = m;
                best_cap = cap;
            }
        }
        best
    }
}

/// Places the dataset's classes on the topology's servers.
///
/// Balanced deals class instances round-robin over the modules. Unbalanced
/// fills modules in order from the class list sorted by decreasing CPU, then
/// decreasing memory.
pub fn assign_capacities(topology: &Topology, classes: &[ServerClass], placement: Placement) -> Result<CapacityAssignment> {
    validate_dataset(classes)?;
    let modules = module_partition(topology);
    let counts = class_counts(classes, topology.server_count());
    let mut class_of = vec![0usize; topology.server_count()];

    match placement {
        Placement::Unbalanced => {
            let mut order: Vec<usize> = (0..classes.len()).collect();
            order.sort_by(|&a, &b| {
                let (x, y) = (&classes[a], &classes[b]);
                y.cpu
                    .total_cmp(&x.cpu)
                    .then(y.memory.total_cmp(&x.memory))
                    .then(x.type_number.cmp(&y.type_number))
            });
            let sequence = order.iter().flat_map(|&c| std::iter::repeat_n(c, counts[c]));
            let slots = modules.iter().flatten();
            for (slot, c) in slots.zip(sequence) {
                class_of[slot.index()] = c;
            }
        }
        Placement::Balanced => {
            let sequence = (0..classes.len()).flat_map(|c| std::iter::repeat_n(c, counts[c]));
            let mut fill = vec![0usize; modules.len()];
            let mut m = 0;
            for c in sequence {
                // skip modules that are already full (only with unequal sizes)
                while fill[m] == modules[m].len() {
                    m = (m + 1) % modules.len();
                }
                class_of[modules[m][fill[m]].index()] = c;
                fill[m] += 1;
                m = (m + 1) % modules.len();
            }
        }
    }
    Ok(CapacityAssignment {
        class_of,
        classes: classes.to_vec(),
        modules,
        placement,
    })
}

/// Switches whose removal cuts `module` off: the aggregation switches above
/// it for three-layer and Fat-tree, otherwise every switch whose neighbours
/// all belong to the module.
pub fn module_isolating_switches(topology: &Topology, module: &[NodeId]) -> Vec<NodeId> {
    let adj = topology.adjacency();
    let mut inside = vec![false; topology.node_count()];
    for s in module {
        inside[s.index()] = true;
    }
    let mut chosen = Vec::new();
    match topology.kind() {
        TopologyKind::ThreeLayer | TopologyKind::FatTree => {
            let mut seen = vec![false; topology.node_count()];
            for s in module {
                for (edge, _) in adj.neighbors(s.index()) {
                    for (agg, _) in adj.neighbors(edge) {
                        if topology.kinds()[agg] == NodeKind::Switch(SwitchLayer::Aggregation) && !seen[agg] {
                            seen[agg] = true;
                            chosen.push(NodeId(agg as u32));
                        }
                    }
                }
            }
            chosen.sort_unstable();
        }
        TopologyKind::BCube | TopologyKind::DCell => {
            for &sw in topology.switches() {
                if adj.degree(sw.index()) > 0 && adj.neighbors(sw.index()).all(|(w, _)| inside[w]) {
                    chosen.push(sw);
                }
            }
        }
    }
    chosen
}

/// Removes the switches isolating the module with the most `resource`.
pub fn remove_richest_module<'a>(
    topology: &'a Topology,
    assignment: &CapacityAssignment,
    resource: Resource,
) -> Result<DegradedNetwork<'a>> {
    if assignment.modules().is_empty() {
        return Err(Error::Config("capacity assignment has no modules".into()));
    }
    if assignment.class_of.len() != topology.server_count() {
        return Err(Error::Config("capacity assignment belongs to another topology".into()));
    }
    let module = assignment.richest_module(resource);
    let switches = module_isolating_switches(topology, &assignment.modules()[module]);
    DegradedNetwork::with_removals(topology, &[], &switches, &[])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reachability::{accessible_server_ratio, partition, remaining_capacity_ratio};
    use crate::topology::{build, build_bcube, build_fat_tree, build_three_layer, TopologyParams};
    use proptest::prelude::*;

    fn three_layer_3k() -> Topology {
        build_three_layer(12, 48, 6, false).unwrap()
    }

    fn rcr_after_targeted(t: &Topology, a: &CapacityAssignment, r: Resource) -> f64 {
        let d = remove_richest_module(t, a, r).unwrap();
        let p = partition(&d);
        remaining_capacity_ratio(&d, &p, &a.weights(r)).unwrap()
    }

    #[test]
    fn builtin_tables() {
        let g = builtin_dataset("google").unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!((g[3].type_number, g[3].cpu, g[3].fraction), (4, 1.0, 0.07));
        let s = builtin_dataset("synthetic").unwrap();
        assert_eq!(s.len(), 2);
        assert!((s[0].fraction - 0.166_666_666).abs() < 1e-9);
        assert!((s[1].fraction - 0.833_333_333).abs() < 1e-9);
        for d in [g, s] {
            validate_dataset(&d).unwrap();
        }
        assert!(matches!(builtin_dataset("azure"), Err(Error::Config(_))));
    }

    #[test]
    fn dataset_file_round_trip() {
        let parsed = parse_dataset("type_number,cpu,memory,fraction\n1, 1.0, 1.0, 0.25\n2,0.5,0.25,0.75\n").unwrap();
        assert_eq!(parsed[1], class(2, 0.5, 0.25, 0.75));
        assert!(parse_dataset("type_number,cpu,memory,fraction\n1,1.0,1.0,0.5\n").is_err());
        assert!(matches!(
            parse_dataset("type_number,cpu,memory,fraction\n1,x,1.0,1.0\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn module_sizes() {
        let sizes = |t: &Topology| module_partition(t).iter().map(|m| m.len()).collect::<Vec<_>>();
        assert_eq!(sizes(&three_layer_3k()), vec![576; 6]);
        assert_eq!(sizes(&build_fat_tree(24).unwrap()), vec![144; 24]);
        assert_eq!(sizes(&build_bcube(58, 1).unwrap()), vec![58; 58]);
        assert_eq!(sizes(&build(&TopologyParams::dcell(3, 2)).unwrap()), vec![12; 13]);
    }

    #[test]
    fn synthetic_placements() {
        let t = three_layer_3k();
        let s = builtin_dataset("synthetic").unwrap();
        let un = assign_capacities(&t, &s, Placement::Unbalanced).unwrap();
        assert_eq!(un.module_class_counts(0), vec![576, 0]);
        for m in 1..6 {
            assert_eq!(un.module_class_counts(m), vec![0, 576]);
        }
        let bal = assign_capacities(&t, &s, Placement::Balanced).unwrap();
        for m in 0..6 {
            assert_eq!(bal.module_class_counts(m), vec![96, 480]);
        }
    }

    #[test]
    fn targeted_three_layer_removal() {
        let t = three_layer_3k();
        let s = builtin_dataset("synthetic").unwrap();
        let un = assign_capacities(&t, &s, Placement::Unbalanced).unwrap();
        assert_eq!(rcr_after_targeted(&t, &un, Resource::Cpu), 0.5);
        let bal = assign_capacities(&t, &s, Placement::Balanced).unwrap();
        assert_eq!(rcr_after_targeted(&t, &bal, Resource::Cpu), 5.0 / 6.0);

        let h = vec![class(1, 0.5, 0.5, 1.0)];
        for placement in [Placement::Balanced, Placement::Unbalanced] {
            let a = assign_capacities(&t, &h, placement).unwrap();
            assert_eq!(rcr_after_targeted(&t, &a, Resource::Memory), 1.0 - 576.0 / 3456.0);
        }
    }

    #[test]
    fn homogeneous_placements_coincide() {
        let t = build_fat_tree(6).unwrap();
        let h = vec![class(7, 0.3, 0.9, 1.0)];
        let a = assign_capacities(&t, &h, Placement::Balanced).unwrap();
        let b = assign_capacities(&t, &h, Placement::Unbalanced).unwrap();
        assert_eq!(a.weights(Resource::Cpu), b.weights(Resource::Cpu));
        assert_eq!(a.weights(Resource::Memory), b.weights(Resource::Memory));
    }

    #[test]
    fn fat_tree_pod_removal_isolates_the_pod() {
        let t = build_fat_tree(4).unwrap();
        let g = builtin_dataset("google").unwrap();
        let a = assign_capacities(&t, &g, Placement::Unbalanced).unwrap();
        let d = remove_richest_module(&t, &a, Resource::Cpu).unwrap();
        assert_eq!(d.removed_counts(), (0, 2, 0));
        let p = partition(&d);
        assert_eq!(accessible_server_ratio(&p, 16).unwrap(), 0.75);
    }

    #[test]
    fn google_cpu_gap_below_memory_gap() {
        let t = three_layer_3k();
        let g = builtin_dataset("google").unwrap();
        let un = assign_capacities(&t, &g, Placement::Unbalanced).unwrap();
        let bal = assign_capacities(&t, &g, Placement::Balanced).unwrap();
        let gap = |r| rcr_after_targeted(&t, &bal, r) - rcr_after_targeted(&t, &un, r);
        let (cpu, mem) = (gap(Resource::Cpu), gap(Resource::Memory));
        assert!(cpu >= 0.0 && mem >= 0.0);
        assert!(cpu < mem, "cpu gap {cpu}, memory gap {mem}");
    }

    proptest! {
        #[test]
        fn class_counts_conserve_servers(servers in 1usize..20_000, pick in 0usize..2) {
            let d = builtin_dataset(["google", "synthetic"][pick]).unwrap();
            let counts = class_counts(&d, servers);
            prop_assert_eq!(counts.iter().sum::<usize>(), servers);
            let largest = (0..d.len()).max_by(|&a, &b| d[a].fraction.total_cmp(&d[b].fraction)).unwrap();
            for (i, (&n, c)) in counts.iter().zip(&d).enumerate() {
                let ideal = c.fraction * servers as f64;
                // the largest class absorbs every other class's rounding loss
                let slack = if i == largest { d.len() as f64 } else { 1.0 };
                prop_assert!((n as f64 - ideal).abs() < slack, "class {} got {} for {}", i, n, ideal);
            }
        }

        #[test]
        fn balanced_never_worse_for_synthetic(pairs in 1u32..8, n_a in 1u32..5, n_e in 1u32..13) {
            let t = build_three_layer(n_a, n_e, pairs, false).unwrap();
            let s = builtin_dataset("synthetic").unwrap();
            let bal = assign_capacities(&t, &s, Placement::Balanced).unwrap();
            let un = assign_capacities(&t, &s, Placement::Unbalanced).unwrap();
            for m in 0..bal.modules().len() {
                let counts = bal.module_class_counts(m);
                let first = bal.module_class_counts(0);
                prop_assert!(counts[0].abs_diff(first[0]) <= 1);
            }
            let rb = rcr_after_targeted(&t, &bal, Resource::Cpu);
            let ru = rcr_after_targeted(&t, &un, Resource::Cpu);
            prop_assert!(rb >= ru - 1e-12);
        }
    }
}
