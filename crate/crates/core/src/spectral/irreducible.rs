use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Largest dimension for the exhaustive subset search (`2^n - 2` subsets).
pub const MAX_EXHAUSTIVE_DIM: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Irreducibility {
    Irreducible,
    /// `witness` is a nonempty proper index set `I` (0-based) such that
    /// `A[i_1, i_2, ..., i_k] = 0` whenever `i_1 ∈ I` and every head index
    /// lies outside `I`.
    Reducible { witness: Vec<usize> },
}

impl Irreducibility {
    pub fn is_irreducible(&self) -> bool {
        matches!(self, Irreducibility::Irreducible)
    }
}

/// Exact irreducibility test.
///
/// A strongly connected "pure head" digraph (edge `i -> j` when
/// `A[i, j, ..., j] != 0`) proves irreducibility and is tried first. Otherwise
/// every nonempty proper subset is checked against the definition, which is
/// only done for `n <= 20`.
pub fn is_irreducible(a: &Tensor) -> Result<Irreducibility> {
    if strongly_connected_prepass(a) {
        return Ok(Irreducibility::Irreducible);
    }
    let n = a.dim();
    if n > MAX_EXHAUSTIVE_DIM {
        return Err(Error::UnsupportedDimension {
            n,
            reason: "exhaustive irreducibility search is limited to n <= 20",
        });
    }
    let heads = a.order() - 1;
    for mask in 1u32..(1u32 << n) - 1 {
        let inside: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let outside: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).collect();
        if inside
            .iter()
            .all(|&tail| heads_outside_vanish(a, tail, &outside, heads))
        {
            return Ok(Irreducibility::Reducible { witness: inside });
        }
    }
    Ok(Irreducibility::Irreducible)
}

/// Sufficient condition only: `true` means irreducible, `false` means unknown.
pub fn strongly_connected_prepass(a: &Tensor) -> bool {
    let n = a.dim();
    if n == 1 {
        return true;
    }
    let mut g = DiGraph::<(), ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    let mut idx = vec![0; a.order()];
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            idx[0] = i;
            idx[1..].iter_mut().for_each(|h| *h = j);
            if a.get(&idx) != 0.0 {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    kosaraju_scc(&g).len() == 1
}

fn heads_outside_vanish(a: &Tensor, tail: usize, outside: &[usize], heads: usize) -> bool {
    // odometer over outside^heads
    let mut pos = vec![0usize; heads];
    let mut idx = vec![tail; heads + 1];
    loop {
        for (slot, &p) in pos.iter().enumerate() {
            idx[slot + 1] = outside[p];
        }
        if a.get(&idx) != 0.0 {
            return false;
        }
        let mut s = heads;
        loop {
            if s == 0 {
                return true;
            }
            s -= 1;
            pos[s] += 1;
            if pos[s] < outside.len() {
                break;
            }
            pos[s] = 0;
        }
    }
}
