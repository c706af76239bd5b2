use serde::{Deserialize, Serialize};

use super::TemporalGraph;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub node_count: usize,
    pub edge_count: usize,
    pub illicit_count: usize,
    pub licit_count: usize,
    pub unknown_count: usize,
    pub time_step_count: usize,
    /// Index `t - 1` holds the node count of step `t`.
    pub per_step_node_counts: Vec<usize>,
    pub cross_step_edge_count: usize,
    /// Weakly connected components per step.
    pub components_per_step: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Recounts everything from the graph. Several components in one step is
/// reported as a warning only.
pub fn validate(graph: &TemporalGraph) -> ValidationReport {
    let [illicit_count, licit_count, unknown_count] = graph.label_counts();
    let steps = graph.max_step();
    let per_step_node_counts: Vec<usize> = (1..=steps).map(|t| graph.step_nodes(t).len()).collect();
    let cross_step_edge_count = graph
        .edges()
        .iter()
        .filter(|&&(u, v)| graph.time_step(u) != graph.time_step(v))
        .count();

    let mut dsu = DisjointSets::new(graph.node_count());
    for &(u, v) in graph.edges() {
        dsu.union(u, v);
    }
    let components_per_step: Vec<usize> = (1..=steps)
        .map(|t| graph.step_nodes(t).iter().filter(|&&i| dsu.find(i) == i).count())
        .collect();

    let mut warnings: Vec<String> = graph.warnings().to_vec();
    for (k, &c) in components_per_step.iter().enumerate() {
        if c > 1 {
            warnings.push(format!("time step {} has {c} connected components", k + 1));
        }
    }
    for (k, &n) in per_step_node_counts.iter().enumerate() {
        if n == 0 {
            warnings.push(format!("time step {} has no nodes", k + 1));
        }
    }
    if cross_step_edge_count > 0 {
        warnings.push(format!("{cross_step_edge_count} edges cross time steps"));
    }

    ValidationReport {
        node_count: graph.node_count(),
        edge_count: graph.edge_count(),
        illicit_count,
        licit_count,
        unknown_count,
        time_step_count: steps as usize,
        per_step_node_counts,
        cross_step_edge_count,
        components_per_step,
        warnings,
    }
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::three_node;
    use crate::graph::{NodeTable, TxId};
    use crate::numerics::DenseMatrix;

    #[test]
    fn fixture_report() {
        let r = validate(&three_node());
        assert_eq!(r.components_per_step, vec![1, 1]);
        assert!(r.warnings.is_empty());
        assert_eq!(r.per_step_node_counts, vec![2, 1]);
        assert_eq!((r.illicit_count, r.licit_count, r.unknown_count), (1, 1, 1));
        assert_eq!(r.illicit_count + r.licit_count + r.unknown_count, r.node_count);
        assert_eq!(r.cross_step_edge_count, 0);
    }

    #[test]
    fn split_component_is_a_warning() {
        let table = NodeTable::new(
            vec![TxId(1), TxId(2), TxId(3)],
            DenseMatrix::from_vec(3, 1, vec![1.0, 1.0, 1.0]).unwrap(),
            1,
        )
        .unwrap();
        let g = TemporalGraph::from_parts(table, &[(TxId(1), TxId(2))], &[]).unwrap();
        let r = validate(&g);
        assert_eq!(r.components_per_step, vec![2]);
        assert_eq!(r.warnings.len(), 1);
    }
}
