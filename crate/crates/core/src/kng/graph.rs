//! Neuron topology with lazily aged edges.
//!
//! Every accepted sample is one aging event: the edge it touches is
//! refreshed and every other edge grows one step older. Instead of
//! incrementing all ages, each edge records the event index of its last
//! refresh and its age is `event_counter - last_refresh`.

use std::collections::BTreeMap;

use crate::error::{bail, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TopologyGraph {
    edges: BTreeMap<(usize, usize), u64>,
    event_counter: u64,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TopologyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn from_parts(edges: BTreeMap<(usize, usize), u64>, event_counter: u64) -> Self {
        Self {
            edges,
            event_counter,
        }
    }

    pub fn event_counter(&self) -> u64 {
        self.event_counter
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Creates the edge or resets its age to zero, aging all others by one.
    pub fn touch(&mut self, s1: usize, s2: usize) -> Result<()> {
        if s1 == s2 {
            bail!(Argument, "self-loop on neuron {s1}");
        }
        self.event_counter += 1;
        self.edges.insert(key(s1, s2), self.event_counter);
        Ok(())
    }

    pub fn age(&self, a: usize, b: usize) -> Option<u64> {
        self.edges
            .get(&key(a, b))
            .map(|&refresh| self.event_counter - refresh)
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.edges.contains_key(&key(a, b))
    }

    /// Removes every edge older than `age_max` (strictly greater).
    pub fn sweep(&mut self, age_max: u64) -> usize {
        let before = self.edges.len();
        let now = self.event_counter;
        self.edges.retain(|_, refresh| now - *refresh <= age_max);
        before - self.edges.len()
    }

    /// `(a, b, last_refresh)` in ascending pair order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.edges.iter().map(|(&(a, b), &r)| (a, b, r))
    }

    /// `(a, b, age)` in ascending pair order.
    pub fn aged_edges(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.edges
            .iter()
            .map(move |(&(a, b), &r)| (a, b, self.event_counter - r))
    }

    pub fn max_age(&self) -> Option<u64> {
        self.aged_edges().map(|(_, _, age)| age).max()
    }

    /// Neighbor lists for neurons `0..n`, each sorted ascending.
    pub fn adjacency(&self, n: usize) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in self.edges.keys() {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}
