use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{OntologyError, SchemaSet};

/// Table dependency graph. An edge `a -> b` means table `a` holds a reference
/// column drawn from table `b`, so `b` must be populated first.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub nodes: Vec<String>,
    pub edges: BTreeMap<String, BTreeSet<String>>,
}

impl DependencyGraph {
    /// Tables `t` depends on, self-loops included.
    pub fn dependencies(&self, t: &str) -> impl Iterator<Item = &str> {
        self.edges.get(t).into_iter().flatten().map(String::as_str)
    }

    /// Number of tables that depend on `t`.
    pub fn in_degree(&self, t: &str) -> usize {
        self.edges.iter().filter(|(from, to)| from.as_str() != t && to.contains(t)).count()
    }

    /// Number of tables `t` depends on, self-loops excluded.
    pub fn out_degree(&self, t: &str) -> usize {
        self.dependencies(t).filter(|d| *d != t).count()
    }

    pub fn has_self_loop(&self, t: &str) -> bool {
        self.edges.get(t).is_some_and(|s| s.contains(t))
    }

    /// Returns one cycle (first node repeated at the end) if the graph, with
    /// self-loops ignored, is cyclic.
    pub fn find_cycle(&self) -> Option<Vec<String>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let mut mark: BTreeMap<&str, Mark> = self.nodes.iter().map(|n| (n.as_str(), Mark::New)).collect();
        let mut stack: Vec<&str> = Vec::new();

        fn visit<'a>(
            g: &'a DependencyGraph,
            n: &'a str,
            mark: &mut BTreeMap<&'a str, Mark>,
            stack: &mut Vec<&'a str>,
        ) -> Option<Vec<String>> {
            mark.insert(n, Mark::Active);
            stack.push(n);
            for d in g.dependencies(n).filter(|d| *d != n) {
                match mark.get(d).copied().unwrap_or(Mark::Done) {
                    Mark::Active => {
                        let start = stack.iter().position(|s| *s == d).expect("active node on stack");
                        let mut cycle: Vec<String> = stack[start..].iter().map(|s| s.to_string()).collect();
                        cycle.push(d.to_string());
                        return Some(cycle);
                    }
                    Mark::New => {
                        if let Some(c) = visit(g, d, mark, stack) {
                            return Some(c);
                        }
                    }
                    Mark::Done => {}
                }
            }
            stack.pop();
            mark.insert(n, Mark::Done);
            None
        }

        for n in &self.nodes {
            if mark[n.as_str()] == Mark::New {
                if let Some(c) = visit(self, n, &mut mark, &mut stack) {
                    return Some(c);
                }
            }
        }
        None
    }
}

/// Builds the dependency graph of a schema set. Fails with
/// [`OntologyError::Cycle`] when the non-self-loop edges are cyclic.
pub fn build_dependency_graph(s: &SchemaSet) -> Result<DependencyGraph, OntologyError> {
    let nodes: Vec<String> = s.tables.iter().map(|t| t.name.clone()).collect();
    let mut edges: BTreeMap<String, BTreeSet<String>> = nodes.iter().map(|n| (n.clone(), BTreeSet::new())).collect();
    for j in &s.relationships {
        edges.entry(j.from.table.clone()).or_default().insert(j.to.table.clone());
    }
    let g = DependencyGraph { nodes, edges };
    if let Some(cycle) = g.find_cycle() {
        return Err(OntologyError::Cycle { cycle });
    }
    Ok(g)
}
