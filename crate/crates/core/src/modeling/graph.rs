use std::collections::VecDeque;

use crate::error::{GlsError, Result};

/// Undirected graph with positive edge values (lengths or capacities).
/// Parallel edges are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(u, v, w) in &edges {
            for x in [u, v] {
                if x >= n {
                    return Err(GlsError::IndexOutOfRange { index: x, n });
                }
            }
            if u == v {
                return Err(GlsError::SelfLoop { u, v });
            }
            if !w.is_finite() {
                return Err(GlsError::NonFinite("edge value"));
            }
            if w <= 0.0 {
                return Err(GlsError::NonPositiveWeight(w));
            }
        }
        Ok(Self { n, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn max_value(&self) -> f64 {
        self.edges.iter().map(|e| e.2).fold(0.0, f64::max)
    }

    pub fn is_integral(&self) -> bool {
        self.edges.iter().all(|e| e.2.fract() == 0.0)
    }

    pub(crate) fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.n {
            Ok(())
        } else {
            Err(GlsError::IndexOutOfRange { index: v, n: self.n })
        }
    }

    /// Edges (by index) of a fewest-hop path from `s` to `t`, each with the
    /// direction it is traversed in (`+1` from the stored `u` to `v`).
    pub fn bfs_path(&self, s: usize, t: usize) -> Option<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (idx, &(u, v, _)) in self.edges.iter().enumerate() {
            adj[u].push((v, idx, 1.0));
            adj[v].push((u, idx, -1.0));
        }
        let mut parent: Vec<Option<(usize, usize, f64)>> = vec![None; self.n];
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([s]);
        seen[s] = true;
        while let Some(a) = queue.pop_front() {
            if a == t {
                break;
            }
            for &(b, idx, dir) in &adj[a] {
                if !seen[b] {
                    seen[b] = true;
                    parent[b] = Some((a, idx, dir));
                    queue.push_back(b);
                }
            }
        }
        if !seen[t] {
            return None;
        }
        let mut path = Vec::new();
        let mut cur = t;
        while let Some((prev, idx, dir)) = parent[cur] {
            path.push((idx, dir));
            cur = prev;
        }
        path.reverse();
        Some(path)
    }
}

/// Parses `graph <n> <m>` followed by `m` lines `<u> <v> <value>`.
/// `#` starts a comment.
pub fn parse_graph(text: &str) -> Result<WeightedGraph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let err = |line: usize, msg: &str| GlsError::Parse {
        line,
        msg: msg.to_string(),
    };
    let (line, header) = lines.next().ok_or_else(|| err(1, "missing header `graph <n> <m>`"))?;
    let tok: Vec<&str> = header.split_whitespace().collect();
    if tok.len() != 3 || tok[0] != "graph" {
        return Err(err(line, "expected header `graph <n> <m>`"));
    }
    let n: usize = tok[1].parse().map_err(|_| err(line, "invalid vertex count"))?;
    let m: usize = tok[2].parse().map_err(|_| err(line, "invalid edge count"))?;
    let mut edges = Vec::with_capacity(m);
    let mut last_line = line;
    for (line, content) in lines {
        last_line = line;
        let tok: Vec<&str> = content.split_whitespace().collect();
        if tok.len() != 3 {
            return Err(err(line, "expected `<u> <v> <value>`"));
        }
        let u: usize = tok[0].parse().map_err(|_| err(line, "invalid vertex index"))?;
        let v: usize = tok[1].parse().map_err(|_| err(line, "invalid vertex index"))?;
        let w: f64 = tok[2].parse().map_err(|_| err(line, "invalid edge value"))?;
        if edges.len() == m {
            return Err(err(line, "more edges than declared"));
        }
        WeightedGraph::new(n, vec![(u, v, w)]).map_err(|e| err(line, &e.to_string()))?;
        edges.push((u, v, w));
    }
    if edges.len() != m {
        return Err(err(last_line, &format!("expected {m} edges, found {}", edges.len())));
    }
    WeightedGraph::new(n, edges)
}

pub fn serialize_graph(g: &WeightedGraph) -> String {
    let mut out = format!("graph {} {}\n", g.n, g.m());
    for &(u, v, w) in &g.edges {
        out.push_str(&format!("{u} {v} {w}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_round_trip() {
        let g = parse_graph("# triangle\ngraph 3 3\n0 1 1\n1 2 1\n0 2 3\n").unwrap();
        assert_eq!((g.n(), g.m()), (3, 3));
        assert!(g.is_integral());
        assert_eq!(parse_graph(&serialize_graph(&g)).unwrap(), g);
    }

    #[test]
    fn parse_errors() {
        for (text, line) in [
            ("graph 2 1\n0 0 1\n", 2),
            ("graph 2 1\n0 1 -1\n", 2),
            ("graph 2 2\n0 1 1\n", 2),
            ("grph 2 1\n", 1),
            ("graph 2 1\n0 5 1\n", 2),
        ] {
            match parse_graph(text) {
                Err(GlsError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn bfs_path_directions() {
        let g = WeightedGraph::new(3, vec![(1, 0, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(g.bfs_path(0, 2).unwrap(), vec![(0, -1.0), (1, 1.0)]);
        let g = WeightedGraph::new(3, vec![(0, 1, 1.0)]).unwrap();
        assert!(g.bfs_path(0, 2).is_none());
    }
}
