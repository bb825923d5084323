//! Rooted (partial) trees stored as parent maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// A rooted tree on a subset of `0..n`. `parent[root] == Some(root)`;
/// `None` marks a non-member.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootedTree {
    root: usize,
    parent: Vec<Option<usize>>,
}

impl RootedTree {
    /// The one-vertex tree.
    pub fn singleton(n: usize, root: usize) -> Self {
        let mut parent = vec![None; n];
        parent[root] = Some(root);
        Self { root, parent }
    }

    /// Builds and validates a tree against `g`: every member reaches the
    /// root, no cycles, every tree edge is a graph edge.
    pub fn from_parents(g: &Graph, root: usize, parent: Vec<Option<usize>>) -> Result<Self> {
        let t = Self { root, parent };
        t.validate(g)?;
        Ok(t)
    }

    pub fn validate(&self, g: &Graph) -> Result<()> {
        let n = self.parent.len();
        if n != g.vertex_count() {
            return Err(Error::InvalidGraph(format!(
                "tree has {n} slots, graph has {} vertices",
                g.vertex_count()
            )));
        }
        if self.root >= n || self.parent[self.root] != Some(self.root) {
            return Err(Error::InvalidGraph(format!("root {} must map to itself", self.root)));
        }
        // 0 = unknown, 1 = on current walk, 2 = reaches root.
        let mut state = vec![0u8; n];
        state[self.root] = 2;
        let mut walk = Vec::new();
        for start in 0..n {
            if self.parent[start].is_none() || state[start] == 2 {
                continue;
            }
            let mut v = start;
            while state[v] == 0 {
                state[v] = 1;
                walk.push(v);
                let p = match self.parent[v] {
                    Some(p) if p < n => p,
                    _ => return Err(Error::InvalidGraph(format!("vertex {v} has an invalid parent"))),
                };
                if p == v {
                    return Err(Error::InvalidGraph(format!("non-root vertex {v} is its own parent")));
                }
                if self.parent[p].is_none() {
                    return Err(Error::InvalidGraph(format!("parent {p} of {v} is not a member")));
                }
                if !g.has_edge(v, p) {
                    return Err(Error::InvalidGraph(format!("tree edge {v}-{p} is not a graph edge")));
                }
                v = p;
            }
            if state[v] == 1 {
                return Err(Error::InvalidGraph(format!("cycle through vertex {v}")));
            }
            for w in walk.drain(..) {
                state[w] = 2;
            }
        }
        Ok(())
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn contains(&self, v: usize) -> bool {
        self.parent[v].is_some()
    }

    pub fn member_count(&self) -> usize {
        self.parent.iter().filter(|p| p.is_some()).count()
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.parent.len()).filter(|&v| self.parent[v].is_some())
    }

    pub fn is_spanning(&self) -> bool {
        self.parent.iter().all(Option::is_some)
    }

    /// Tree edges `(child, parent)` in child order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.members()
            .filter(|&v| v != self.root)
            .map(|v| (v, self.parent[v].unwrap()))
            .collect()
    }

    /// Attaches `v` below the member `p`. The caller guarantees the edge.
    pub(crate) fn attach(&mut self, v: usize, p: usize) {
        debug_assert!(self.parent[v].is_none() && self.parent[p].is_some());
        self.parent[v] = Some(p);
    }

    /// Path `v, parent(v), ..., root`.
    pub fn path_to_root(&self, v: usize) -> Vec<usize> {
        let mut path = vec![v];
        let mut cur = v;
        while cur != self.root {
            cur = self.parent[cur].expect("member");
            path.push(cur);
        }
        path
    }

    /// Path `root, ..., v`.
    pub fn path_from_root(&self, v: usize) -> Vec<usize> {
        let mut p = self.path_to_root(v);
        p.reverse();
        p
    }

    /// Depth of every member (`u32::MAX` for non-members).
    pub fn depths(&self) -> Vec<u32> {
        let n = self.parent.len();
        let mut depth = vec![u32::MAX; n];
        depth[self.root] = 0;
        let mut stack = Vec::new();
        for v in 0..n {
            if self.parent[v].is_none() {
                continue;
            }
            let mut cur = v;
            while depth[cur] == u32::MAX {
                stack.push(cur);
                cur = self.parent[cur].unwrap();
            }
            let mut d = depth[cur];
            while let Some(w) = stack.pop() {
                d += 1;
                depth[w] = d;
            }
        }
        depth
    }
}
