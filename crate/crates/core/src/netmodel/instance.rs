use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Link, Node, NodeRole, RoadNetwork};
use crate::error::{Error, Result};

/// On-disk instance document. One arc entry per direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub nodes: Vec<NodeEntry>,
    pub arcs: Vec<ArcEntry>,
    pub fr_nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub demand: f64,
    pub role: RoleEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleEntry {
    Interior,
    Exit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcEntry {
    pub from: usize,
    pub to: usize,
    pub capacity: f64,
    pub free_flow_time: f64,
    pub lanes: u32,
}

impl From<&RoadNetwork> for InstanceFile {
    fn from(net: &RoadNetwork) -> Self {
        Self {
            nodes: net
                .nodes()
                .iter()
                .map(|n| NodeEntry {
                    id: n.id,
                    x: n.x,
                    y: n.y,
                    demand: n.demand,
                    role: match n.role {
                        NodeRole::Interior => RoleEntry::Interior,
                        NodeRole::Exit => RoleEntry::Exit,
                    },
                })
                .collect(),
            arcs: net
                .links()
                .iter()
                .map(|l| ArcEntry {
                    from: l.from,
                    to: l.to,
                    capacity: l.capacity,
                    free_flow_time: l.free_flow_time,
                    lanes: l.lanes,
                })
                .collect(),
            fr_nodes: net.fr_nodes().to_vec(),
        }
    }
}

impl TryFrom<InstanceFile> for RoadNetwork {
    type Error = Error;

    fn try_from(file: InstanceFile) -> Result<Self> {
        let mut nodes: Vec<Node> = file
            .nodes
            .into_iter()
            .map(|n| Node {
                id: n.id,
                x: n.x,
                y: n.y,
                demand: n.demand,
                role: match n.role {
                    RoleEntry::Interior => NodeRole::Interior,
                    RoleEntry::Exit => NodeRole::Exit,
                },
            })
            .collect();
        nodes.sort_by_key(|n| n.id);
        let links = file
            .arcs
            .into_iter()
            .map(|a| Link {
                from: a.from,
                to: a.to,
                capacity: a.capacity,
                free_flow_time: a.free_flow_time,
                lanes: a.lanes,
            })
            .collect();
        RoadNetwork::new(nodes, links, file.fr_nodes)
    }
}

impl RoadNetwork {
    pub fn from_json(text: &str) -> std::result::Result<Self, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text).map_err(InstanceError::Json)?;
        RoadNetwork::try_from(file).map_err(InstanceError::Invalid)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&InstanceFile::from(self)).expect("instance serializes")
    }
}

#[derive(Debug)]
pub enum InstanceError {
    Json(serde_json::Error),
    Invalid(Error),
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<RoadNetwork> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    RoadNetwork::from_json(&text).map_err(|e| match e {
        InstanceError::Json(source) => Error::Parse {
            path: path.to_path_buf(),
            source,
        },
        InstanceError::Invalid(e) => e,
    })
}

pub fn save_instance(net: &RoadNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, net.to_json() + "\n").map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
