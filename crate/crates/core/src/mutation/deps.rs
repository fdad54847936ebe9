use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::minilang::{ExprKind, NodeRef, SourceProgram};

/// Shortest directed call-graph distances between classes.
/// `None` stands for "unreachable".
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyMatrix {
    pub classes: Vec<String>,
    pub distance: Vec<Vec<Option<u32>>>,
}

impl DependencyMatrix {
    pub fn get(&self, from: &str, to: &str) -> Option<u32> {
        let i = self.classes.iter().position(|c| c == from)?;
        let j = self.classes.iter().position(|c| c == to)?;
        self.distance[i][j]
    }
}

/// Class A is at distance 1 from B when some function of A calls into B.
pub fn class_call_graph(program: &SourceProgram) -> Vec<BTreeSet<usize>> {
    let mut edges = vec![BTreeSet::new(); program.classes.len()];
    program.walk(|r, node| {
        if let NodeRef::Expr(e) = node {
            if let ExprKind::Call { target, .. } = &e.kind {
                if target.class != r.class {
                    edges[r.class as usize].insert(target.class as usize);
                }
            }
        }
    });
    edges
}

pub fn dependency_distance(program: &SourceProgram) -> DependencyMatrix {
    let edges = class_call_graph(program);
    let n = edges.len();
    let distance = (0..n)
        .map(|src| {
            let mut dist = vec![None; n];
            dist[src] = Some(0);
            let mut queue = VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                let d = dist[u].unwrap_or(0);
                for &v in &edges[u] {
                    if dist[v].is_none() {
                        dist[v] = Some(d + 1);
                        queue.push_back(v);
                    }
                }
            }
            dist
        })
        .collect();
    DependencyMatrix {
        classes: program.classes.iter().map(|c| c.name.clone()).collect(),
        distance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::parse_program;

    #[test]
    fn chain_distances() {
        let p = parse_program(
            "class A { fn f() -> int { return B.g(); } }
             class B { fn g() -> int { return C.h(); } }
             class C { fn h() -> int { return 1; } }",
        )
        .unwrap();
        let m = dependency_distance(&p);
        assert_eq!(m.get("A", "B"), Some(1));
        assert_eq!(m.get("A", "C"), Some(2));
        assert_eq!(m.get("C", "A"), None);
        assert_eq!(m.get("B", "B"), Some(0));
    }

    #[test]
    fn isolated_class_is_unreachable() {
        let p = parse_program("class A { fn f() -> int { return 1; } } class B { }").unwrap();
        let m = dependency_distance(&p);
        assert_eq!(m.distance, vec![vec![Some(0), None], vec![None, Some(0)]]);
    }

    #[test]
    fn two_cycle() {
        let p = parse_program(
            "class A { fn f(n: int) -> int { if (n < 1) { return 0; } return B.g(n - 1); } }
             class B { fn g(n: int) -> int { return A.f(n); } }",
        )
        .unwrap();
        let m = dependency_distance(&p);
        assert_eq!(m.get("A", "B"), Some(1));
        assert_eq!(m.get("B", "A"), Some(1));
    }
}
