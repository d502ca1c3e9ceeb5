use serde::{Deserialize, Serialize};

use super::{NodeId, NodeKind, SwitchLayer, Topology, TopologyParams};
use crate::error::{Error, Result};

/// Value of the `format` field of every topology document.
pub const DOCUMENT_FORMAT: &str = "dcn-topology/1";

#[derive(Serialize, Deserialize)]
struct NodeEntry {
    id: u32,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layer: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    params: TopologyParams,
    nodes: Vec<NodeEntry>,
    edges: Vec<[u32; 2]>,
    gateways: Vec<u32>,
}

/// Renders a topology as a JSON document.
pub fn serialize_topology(topology: &Topology) -> String {
    let doc = Document {
        format: DOCUMENT_FORMAT.to_string(),
        params: *topology.params(),
        nodes: topology
            .kinds()
            .iter()
            .enumerate()
            .map(|(i, k)| match k {
                NodeKind::Server => NodeEntry {
                    id: i as u32,
                    kind: "server".into(),
                    layer: None,
                },
                NodeKind::Switch(layer) => NodeEntry {
                    id: i as u32,
                    kind: "switch".into(),
                    layer: Some(layer.as_str()),
                },
            })
            .collect(),
        edges: topology.edges().iter().map(|&(a, b)| [a.0, b.0]).collect(),
        gateways: topology.gateways().iter().map(|g| g.0).collect(),
    };
    let mut out = String::with_capacity(64 * (doc.nodes.len() + doc.edges.len()));
    // one node / edge per line keeps diffs readable without bloating the file
    out.push_str("{\n");
    out.push_str(&format!("  \"format\": {},\n", json(&doc.format)));
    out.push_str(&format!("  \"params\": {},\n", json(&doc.params)));
    push_list(&mut out, "nodes", &doc.nodes, true);
    push_list(&mut out, "edges", &doc.edges, true);
    push_list(&mut out, "gateways", &doc.gateways, false);
    out.push_str("}\n");
    out
}

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string(value).expect("document values always serialize")
}

fn push_list<T: Serialize>(out: &mut String, name: &str, items: &[T], trailing_comma: bool) {
    out.push_str(&format!("  \"{name}\": ["));
    for (i, item) in items.iter().enumerate() {
        out.push_str(if i == 0 { "\n    " } else { ",\n    " });
        out.push_str(&json(item));
    }
    if !items.is_empty() {
        out.push_str("\n  ");
    }
    out.push(']');
    if trailing_comma {
        out.push(',');
    }
    out.push('\n');
}

/// Parses a document produced by [`serialize_topology`] and re-checks every
/// structural invariant.
pub fn parse_topology(document: &str) -> Result<Topology> {
    let doc: Document = serde_json::from_str(document).map_err(|e| {
        Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string())
    })?;
    if doc.format != DOCUMENT_FORMAT {
        return Err(Error::parse(
            "format",
            format!("expected {DOCUMENT_FORMAT:?}, found {:?}", doc.format),
        ));
    }
    doc.params.validate().map_err(|e| Error::parse("params", e.to_string()))?;

    let mut kinds = Vec::with_capacity(doc.nodes.len());
    for (i, node) in doc.nodes.iter().enumerate() {
        if node.id as usize != i {
            return Err(Error::parse(
                format!("nodes[{i}]"),
                format!("node ids must be consecutive from 0, found {}", node.id),
            ));
        }
        let kind = match (node.kind.as_str(), &node.layer) {
            ("server", None) => NodeKind::Server,
            ("server", Some(_)) => {
                return Err(Error::parse(format!("nodes[{i}]"), "servers carry no layer"));
            }
            ("switch", Some(layer)) => NodeKind::Switch(SwitchLayer::parse(layer).ok_or_else(|| {
                Error::parse(format!("nodes[{i}].layer"), format!("unknown layer {layer:?}"))
            })?),
            ("switch", None) => {
                return Err(Error::parse(format!("nodes[{i}]"), "switch without layer"));
            }
            (other, _) => {
                return Err(Error::parse(format!("nodes[{i}].kind"), format!("unknown kind {other:?}")));
            }
        };
        kinds.push(kind);
    }
    let edges = doc.edges.iter().map(|&[a, b]| (NodeId(a), NodeId(b))).collect();
    let gateways = doc.gateways.iter().map(|&g| NodeId(g)).collect();
    Topology::from_parts(doc.params, kinds, edges, gateways)
}
