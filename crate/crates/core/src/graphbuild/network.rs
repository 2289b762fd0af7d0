// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{Month, Topic, UNCLASSIFIED};
use crate::error::{Error, Result};

/// Center month and reach of a sliding window (inclusive on both ends).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub center: Month,
    pub half_width: u32,
}

impl Window {
    pub fn first(&self) -> Month {
        self.center.offset(-(self.half_width as i64))
    }

    pub fn last(&self) -> Month {
        self.center.offset(self.half_width as i64)
    }

    pub fn contains(&self, m: Month) -> bool {
        self.first() <= m && m <= self.last()
    }
}

/// Symmetric weighted graph over topics with a zero diagonal.
///
/// Weights are stored densely in row-major order. A pair is an edge
/// (`a_ij = 1`) iff its weight is strictly positive; negative weights are
/// only meaningful to signed modularity and are ignored by every other
/// measure.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicNetwork {
    nodes: Vec<Topic>,
    weights: Vec<f64>,
    window: Option<Window>,
    provenance: String,
}

impl TopicNetwork {
    pub fn new(
        nodes: Vec<Topic>,
        weights: Vec<f64>,
        window: Option<Window>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let n = nodes.len();
        if weights.len() != n * n {
            return Err(Error::InvalidNetwork(format!(
                "{} weights for {n} nodes",
                weights.len()
            )));
        }
        for i in 0..n {
            if weights[i * n + i] != 0.0 {
                return Err(Error::InvalidNetwork(format!("nonzero diagonal at node {i}")));
            }
            for j in (i + 1)..n {
                let w = weights[i * n + j];
                if !w.is_finite() {
                    return Err(Error::InvalidNetwork(format!("non-finite weight at ({i},{j})")));
                }
                if w.to_bits() != weights[j * n + i].to_bits() {
                    return Err(Error::InvalidNetwork(format!("asymmetric weight at ({i},{j})")));
                }
            }
        }
        Ok(TopicNetwork {
            nodes,
            weights,
            window,
            provenance: provenance.into(),
        })
    }

    /// Network with placeholder node metadata (`n0`, `n1`, ...).
    pub fn from_weights(n: usize, weights: Vec<f64>) -> Result<Self> {
        TopicNetwork::new(placeholder_nodes(n), weights, None, "synthetic")
    }

    /// Undirected edge list; later duplicates overwrite earlier ones.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut weights = vec![0.0; n * n];
        for &(i, j, w) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidNetwork(format!("bad edge ({i},{j}) for {n} nodes")));
            }
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
        TopicNetwork::from_weights(n, weights)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Topic] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.nodes.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.nodes.len();
        &self.weights[i * n..(i + 1) * n]
    }

    pub fn window(&self) -> Option<Window> {
        self.window
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn classifications(&self) -> Vec<String> {
        self.nodes.iter().map(|t| t.classification.clone()).collect()
    }

    /// Positive-weight edges `(i, j, w)` with `i < j`, row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.nodes.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.weights[i * n + j];
                if w > 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// Count of positive-weight undirected edges (E).
    pub fn edge_count(&self) -> usize {
        let n = self.nodes.len();
        (0..n)
            .map(|i| self.weights[i * n + i + 1..(i + 1) * n].iter().filter(|&&w| w > 0.0).count())
            .sum()
    }

    pub fn has_negative(&self) -> bool {
        self.weights.iter().any(|&w| w < 0.0)
    }

    /// Positive neighbors of every node, ascending by index.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let n = self.nodes.len();
        (0..n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(j, &w)| (j, w))
                    .collect()
            })
            .collect()
    }

    /// Same metadata, new weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        TopicNetwork::new(self.nodes.clone(), weights, self.window, self.provenance.clone())
    }

    /// Negative weights set to zero.
    pub fn positive_part(&self) -> Self {
        let weights = self.weights.iter().map(|&w| w.max(0.0)).collect();
        TopicNetwork {
            weights,
            ..self.clone()
        }
    }

    /// All weights multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let weights = self.weights.iter().map(|&w| w * factor).collect();
        TopicNetwork {
            weights,
            ..self.clone()
        }
    }

    /// Relabel so that old node `i` becomes new node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.nodes.len();
        assert_eq!(perm.len(), n);
        let mut weights = vec![0.0; n * n];
        let mut nodes = self.nodes.clone();
        for i in 0..n {
            nodes[perm[i]] = self.nodes[i].clone();
            for j in 0..n {
                weights[perm[i] * n + perm[j]] = self.weights[i * n + j];
            }
        }
        TopicNetwork {
            nodes,
            weights,
            ..self.clone()
        }
    }
}

pub(crate) fn placeholder_nodes(n: usize) -> Vec<Topic> {
    (0..n)
        .map(|i| Topic {
            phrase: format!("n{i}"),
            prevalence: 0.0,
            classification: UNCLASSIFIED.to_string(),
        })
        .collect()
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn format_weight(w: f64) -> String {
    format!("{w:.16e}")
}

#[derive(Serialize, Deserialize)]
struct NodeSidecar {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    manifest_hash: Option<String>,
    provenance: String,
    window: Option<Window>,
    nodes: Vec<Topic>,
}

/// CSV edge list `topic_a,topic_b,weight` of nonzero weights, optionally
/// preceded by a `# manifest: <hash>` comment line.
pub fn write_edge_list<W: Write>(net: &TopicNetwork, out: W, manifest_hash: Option<&str>) -> Result<()> {
    let mut out = out;
    if let Some(h) = manifest_hash {
        writeln!(out, "# manifest: {h}").map_err(|e| Error::io("<edge list>", e))?;
    }
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["topic_a", "topic_b", "weight"])?;
    let n = net.node_count();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = net.weight(i, j);
            if w != 0.0 {
                wtr.write_record([
                    net.nodes[i].phrase.as_str(),
                    net.nodes[j].phrase.as_str(),
                    format_weight(w).as_str(),
                ])?;
            }
        }
    }
    wtr.flush().map_err(|e| Error::io("<edge list>", e))?;
    Ok(())
}

/// Sidecar JSON with node metadata, window and provenance.
pub fn write_node_metadata<W: Write>(net: &TopicNetwork, out: W, manifest_hash: Option<&str>) -> Result<()> {
    let sidecar = NodeSidecar {
        manifest_hash: manifest_hash.map(String::from),
        provenance: net.provenance.clone(),
        window: net.window,
        nodes: net.nodes.clone(),
    };
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, &sidecar)?;
    writeln!(out).map_err(|e| Error::io("<node metadata>", e))?;
    Ok(())
}

/// Inverse of [`write_edge_list`] + [`write_node_metadata`].
pub fn read_network<R1: Read, R2: Read>(edges: R1, nodes: R2) -> Result<TopicNetwork> {
    let sidecar: NodeSidecar = serde_json::from_reader(nodes)?;
    let n = sidecar.nodes.len();
    let index: HashMap<&str, usize> = sidecar
        .nodes
        .iter()
        .enumerate()
        .map(|(i, t)| (t.phrase.as_str(), i))
        .collect();
    if index.len() != n {
        return Err(Error::InvalidNetwork("duplicate node phrase in sidecar".into()));
    }
    let mut weights = vec![0.0; n * n];
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(edges);
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let lookup = |k: usize| -> Result<usize> {
            let p = rec.get(k).unwrap_or_default();
            index.get(p).copied().ok_or_else(|| Error::Schema {
                line,
                message: format!("unknown topic `{p}`"),
            })
        };
        let (i, j) = (lookup(0)?, lookup(1)?);
        let w: f64 = rec
            .get(2)
            .unwrap_or_default()
            .trim()
            .parse()
            .map_err(|_| Error::Schema {
                line,
                message: "bad weight".into(),
            })?;
        weights[i * n + j] = w;
        weights[j * n + i] = w;
    }
    TopicNetwork::new(sidecar.nodes, weights, sidecar.window, sidecar.provenance)
}
