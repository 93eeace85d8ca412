//! Exact enumeration of labeled graphs on `k <= 16` vertices.
//!
//! Vertices are `0..k` (vertex `i` carries the label `i + 1` in text dumps).
//! A graph is a bit field over the `k(k-1)/2` unordered pairs in lexicographic
//! order `(0,1), (0,2), ..., (0,k-1), (1,2), ...`, so enumerating all graphs is
//! counting through masks, and enumeration can be split into mask ranges.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::{Error, Result};

pub const MAX_VERTICES: usize = 16;
/// Largest `k` for which all `2^{k(k-1)/2}` graphs are streamed.
pub const MAX_ENUMERATE: usize = 8;
/// Largest `k` for which all `k^{k-2}` trees are streamed.
pub const MAX_TREES: usize = 9;

#[inline]
pub const fn pair_count(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

/// Slot index of the pair `{a, b}`, `a != b`.
#[inline]
pub fn pair_slot(k: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    debug_assert!(b < k && a != b);
    a * (2 * k - a - 1) / 2 + (b - a - 1)
}

/// Inverse of [`pair_slot`].
pub fn slot_pair(k: usize, slot: usize) -> (usize, usize) {
    let mut s = slot;
    for a in 0..k {
        let row = k - a - 1;
        if s < row {
            return (a, a + 1 + s);
        }
        s -= row;
    }
    panic!("slot {slot} out of range for k = {k}");
}

/// Undirected simple graph on vertices `0..k`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Graph {
    k: u8,
    mask: u128,
}

impl Graph {
    pub fn empty(k: usize) -> Self {
        assert!(k <= MAX_VERTICES, "graphs are limited to {MAX_VERTICES} vertices");
        Graph { k: k as u8, mask: 0 }
    }

    pub fn from_mask(k: usize, mask: u128) -> Self {
        assert!(k <= MAX_VERTICES);
        let slots = pair_count(k);
        assert!(slots == 128 || mask >> slots == 0, "mask has bits beyond the pair slots");
        Graph { k: k as u8, mask }
    }

    pub fn from_edges(k: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if k > MAX_VERTICES {
            return Err(Error::Guard {
                what: "graph vertex count",
                requested: k,
                limit: MAX_VERTICES,
                estimate: None,
            });
        }
        let mut g = Graph::empty(k);
        for &(a, b) in edges {
            if a == b || a >= k || b >= k {
                return Err(Error::invalid(format!("bad edge {a}-{b} for k = {k}")));
            }
            g.add_edge(a, b);
        }
        Ok(g)
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k as usize
    }

    #[inline]
    pub fn mask(&self) -> u128 {
        self.mask
    }

    #[inline]
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a != b && self.mask >> pair_slot(self.k(), a, b) & 1 == 1
    }

    #[inline]
    pub fn add_edge(&mut self, a: usize, b: usize) {
        self.mask |= 1u128 << pair_slot(self.k(), a, b);
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.mask &= !(1u128 << pair_slot(self.k(), a, b));
    }

    pub fn edge_count(&self) -> usize {
        self.mask.count_ones() as usize
    }

    /// Edges `(a, b)` with `a < b`, in slot order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let k = self.k();
        let mut m = self.mask;
        std::iter::from_fn(move || {
            if m == 0 {
                return None;
            }
            let s = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(slot_pair(k, s))
        })
    }

    /// Neighbour bit sets, one per vertex.
    pub fn adjacency(&self) -> [u16; MAX_VERTICES] {
        let mut adj = [0u16; MAX_VERTICES];
        for (a, b) in self.edges() {
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
        }
        adj
    }

    pub fn degree(&self, v: usize) -> usize {
        (0..self.k()).filter(|&u| self.has_edge(u, v)).count()
    }

    /// Vertex sets of the connected components, ordered by smallest vertex.
    pub fn components(&self) -> Vec<u16> {
        let adj = self.adjacency();
        components_of(&adj, self.k())
    }

    /// True iff every pair of vertices is joined by a path; `k <= 1` is
    /// connected.
    pub fn is_connected(&self) -> bool {
        let k = self.k();
        if k <= 1 {
            return true;
        }
        if self.edge_count() < k - 1 {
            return false;
        }
        let adj = self.adjacency();
        reach(&adj, 1, full_set(k)) == full_set(k)
    }

    pub fn is_forest(&self) -> bool {
        self.edge_count() + self.components().len() == self.k()
    }

    pub fn is_tree(&self) -> bool {
        self.k() >= 1 && self.edge_count() + 1 == self.k() && self.is_connected()
    }
}

#[inline]
fn full_set(k: usize) -> u16 {
    if k >= 16 {
        u16::MAX
    } else {
        (1u16 << k) - 1
    }
}

/// Vertices reachable from `start` inside `within`.
fn reach(adj: &[u16; MAX_VERTICES], start: u16, within: u16) -> u16 {
    let mut seen = start & within;
    let mut frontier = seen;
    while frontier != 0 {
        let mut next = 0u16;
        let mut f = frontier;
        while f != 0 {
            let v = f.trailing_zeros() as usize;
            f &= f - 1;
            next |= adj[v];
        }
        next &= within & !seen;
        seen |= next;
        frontier = next;
    }
    seen
}

fn components_of(adj: &[u16; MAX_VERTICES], k: usize) -> Vec<u16> {
    let mut left = full_set(k);
    let mut out = Vec::new();
    while left != 0 {
        let start = left & left.wrapping_neg();
        let comp = reach(adj, start, left);
        out.push(comp);
        left &= !comp;
    }
    out
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph({self})")
    }
}

/// Dump format: `k:` followed by comma-separated 1-based `a-b` edges.
impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.k)?;
        for (i, (a, b)) in self.edges().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}-{}", a + 1, b + 1)?;
        }
        Ok(())
    }
}

impl FromStr for Graph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (k, rest) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("graph dump `{s}` lacks `k:`")))?;
        let k: usize = k
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad vertex count in `{s}`")))?;
        let mut edges = Vec::new();
        for e in rest.split(',').map(str::trim).filter(|e| !e.is_empty()) {
            let (a, b) = e
                .split_once('-')
                .ok_or_else(|| Error::invalid(format!("bad edge `{e}`")))?;
            let a: usize = a.trim().parse().map_err(|_| Error::invalid(format!("bad edge `{e}`")))?;
            let b: usize = b.trim().parse().map_err(|_| Error::invalid(format!("bad edge `{e}`")))?;
            if a == 0 || b == 0 {
                return Err(Error::invalid("graph dump labels start at 1"));
            }
            edges.push((a - 1, b - 1));
        }
        Graph::from_edges(k, &edges)
    }
}

fn guard_all_graphs(k: usize) -> Result<()> {
    if k == 0 || k > MAX_ENUMERATE {
        let estimate = if k <= MAX_VERTICES && pair_count(k) < 128 {
            Some(1u128 << pair_count(k))
        } else {
            None
        };
        return Err(Error::Guard {
            what: "full graph enumeration",
            requested: k,
            limit: MAX_ENUMERATE,
            estimate,
        });
    }
    Ok(())
}

/// Number of graphs on `k` labeled vertices, `2^{k(k-1)/2}`.
pub fn graph_count(k: usize) -> u128 {
    1u128 << pair_count(k)
}

/// Streams every graph on `k` vertices once, in ascending mask order.
pub fn enumerate_graphs(k: usize) -> Result<impl Iterator<Item = Graph>> {
    guard_all_graphs(k)?;
    Ok(enumerate_graphs_in(k, 0..graph_count(k) as u64))
}

/// Graphs whose masks fall in `masks`; used to split enumeration across
/// workers.
pub fn enumerate_graphs_in(k: usize, masks: Range<u64>) -> impl Iterator<Item = Graph> {
    masks.map(move |m| Graph::from_mask(k, m as u128))
}

/// Splits the mask space of `k`-vertex graphs into `n` contiguous ranges.
pub fn mask_chunks(k: usize, n: usize) -> Vec<Range<u64>> {
    let total = graph_count(k) as u64;
    let n = (n.max(1) as u64).min(total);
    (0..n).map(|i| total * i / n..total * (i + 1) / n).collect()
}

/// Streams the connected graphs on `k` vertices.
pub fn enumerate_connected(k: usize) -> Result<impl Iterator<Item = Graph>> {
    Ok(enumerate_graphs(k)?.filter(Graph::is_connected))
}

fn binomial(n: u64, r: u64) -> u128 {
    if r > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..r.min(n - r) {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Connected-graph counts by the rooted-component recursion
/// `c_n = 2^{C(n,2)} - sum_{m<n} C(n-1, m-1) c_m 2^{C(n-m,2)}`.
pub fn connected_count_recursive(k: usize) -> u128 {
    assert!(k <= 16);
    let mut c = vec![0u128; k + 1];
    for n in 1..=k {
        let mut rest: u128 = 0;
        for m in 1..n {
            rest += binomial(n as u64 - 1, m as u64 - 1) * c[m] * graph_count(n - m);
        }
        c[n] = graph_count(n) - rest;
    }
    c[k]
}

/// Prüfer code of a labeled tree on `k >= 2` vertices.
pub fn prufer_encode(t: &Graph) -> Result<Vec<usize>> {
    if !t.is_tree() {
        return Err(Error::invalid("Prüfer encoding needs a tree"));
    }
    let k = t.k();
    if k <= 2 {
        return Ok(vec![]);
    }
    let adj = t.adjacency();
    let mut deg: Vec<usize> = (0..k).map(|v| adj[v].count_ones() as usize).collect();
    let mut removed = 0u16;
    let mut code = Vec::with_capacity(k - 2);
    for _ in 0..k - 2 {
        let leaf = (0..k).find(|&v| removed >> v & 1 == 0 && deg[v] == 1).unwrap();
        let nb = (adj[leaf] & !removed).trailing_zeros() as usize;
        code.push(nb);
        removed |= 1 << leaf;
        deg[nb] -= 1;
    }
    Ok(code)
}

/// Tree on `k` vertices with the given Prüfer code (length `k - 2`).
pub fn prufer_decode(k: usize, code: &[usize]) -> Result<Graph> {
    if k == 0 || k > MAX_VERTICES || code.len() + 2 != k.max(2) || code.iter().any(|&c| c >= k) {
        return Err(Error::invalid(format!("invalid Prüfer code {code:?} for k = {k}")));
    }
    let mut g = Graph::empty(k);
    if k == 1 {
        return Ok(g);
    }
    let mut deg = vec![1usize; k];
    for &c in code {
        deg[c] += 1;
    }
    for &c in code {
        let leaf = (0..k).find(|&v| deg[v] == 1).unwrap();
        g.add_edge(leaf, c);
        deg[leaf] = 0;
        deg[c] -= 1;
    }
    let last: Vec<usize> = (0..k).filter(|&v| deg[v] == 1).collect();
    g.add_edge(last[0], last[1]);
    Ok(g)
}

/// Odometer over `{0..base}^len` in lexicographic order.
struct Odometer {
    digits: Vec<usize>,
    base: usize,
    done: bool,
}

impl Odometer {
    fn new(len: usize, base: usize) -> Self {
        Odometer {
            digits: vec![0; len],
            base,
            done: base == 0 && len > 0,
        }
    }
}

impl Iterator for Odometer {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.digits.clone();
        let mut i = self.digits.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.digits[i] += 1;
            if self.digits[i] < self.base {
                break;
            }
            self.digits[i] = 0;
        }
        Some(out)
    }
}

/// Streams the `k^{k-2}` labeled trees on `k` vertices by Prüfer decoding,
/// in lexicographic order of the codes.
pub fn enumerate_trees(k: usize) -> Result<impl Iterator<Item = Graph>> {
    if k == 0 || k > MAX_TREES {
        return Err(Error::Guard {
            what: "tree enumeration",
            requested: k,
            limit: MAX_TREES,
            estimate: (k > 0).then(|| (k as u128).pow(k.saturating_sub(2) as u32)),
        });
    }
    Ok(Odometer::new(k.saturating_sub(2), k).map(move |c| prufer_decode(k, &c).expect("valid code")))
}

/// Forest on `J ∪ I` in which every component contains exactly one root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RootedForest {
    pub roots: u16,
    pub others: u16,
    pub graph: Graph,
}

impl RootedForest {
    /// Independent check: only edges inside `J ∪ I`, no cycles, exactly one
    /// root per component of `J ∪ I`.
    pub fn is_valid(&self) -> bool {
        let vs = self.roots | self.others;
        if self.roots & self.others != 0 {
            return false;
        }
        let k = self.graph.k();
        let mut parent: Vec<usize> = (0..k).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (a, b) in self.graph.edges() {
            if vs >> a & 1 == 0 || vs >> b & 1 == 0 {
                return false;
            }
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                return false;
            }
            parent[ra] = rb;
        }
        let mut roots_per = vec![0usize; k];
        let mut members = vec![false; k];
        for v in 0..k {
            if vs >> v & 1 == 1 {
                let r = find(&mut parent, v);
                members[r] = true;
                if self.roots >> v & 1 == 1 {
                    roots_per[r] += 1;
                }
            }
        }
        (0..k).all(|r| !members[r] || roots_per[r] == 1)
    }
}

fn bits(mask: u16) -> Vec<usize> {
    (0..16).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Streams the forests on `J ∪ I` rooted in `J`.
///
/// Contracting `J` to a single super-root turns each forest into a tree on
/// `1 + |I|` vertices plus a choice of root for every edge at the
/// super-root; trees are taken in Prüfer order and root choices by odometer.
pub fn enumerate_rooted_forests(roots: &[usize], others: &[usize]) -> Result<Vec<RootedForest>> {
    let jm = to_mask(roots)?;
    let im = to_mask(others)?;
    if jm == 0 {
        return Err(Error::invalid("rooted forests need at least one root"));
    }
    if jm & im != 0 {
        return Err(Error::invalid("root set and vertex set overlap"));
    }
    let (j, i) = (jm.count_ones() as usize, im.count_ones() as usize);
    if j + i > MAX_TREES {
        return Err(Error::Guard {
            what: "rooted forest enumeration",
            requested: j + i,
            limit: MAX_TREES,
            estimate: None,
        });
    }
    let k = (16 - (jm | im).leading_zeros()) as usize;
    let root_list = bits(jm);
    let other_list = bits(im);
    let mut out = Vec::new();
    if i == 0 {
        out.push(RootedForest {
            roots: jm,
            others: im,
            graph: Graph::empty(k),
        });
        return Ok(out);
    }
    // contracted vertex 0 is the super-root, vertex t+1 is other_list[t]
    for tree in enumerate_trees(i + 1)? {
        let at_root: Vec<usize> = tree
            .edges()
            .filter(|&(a, _)| a == 0)
            .map(|(_, b)| other_list[b - 1])
            .collect();
        let inner: Vec<(usize, usize)> = tree
            .edges()
            .filter(|&(a, _)| a != 0)
            .map(|(a, b)| (other_list[a - 1], other_list[b - 1]))
            .collect();
        for choice in Odometer::new(at_root.len(), j) {
            let mut g = Graph::empty(k);
            for &(a, b) in &inner {
                g.add_edge(a, b);
            }
            for (v, &c) in at_root.iter().zip(&choice) {
                g.add_edge(root_list[c], *v);
            }
            out.push(RootedForest {
                roots: jm,
                others: im,
                graph: g,
            });
        }
    }
    Ok(out)
}

fn to_mask(labels: &[usize]) -> Result<u16> {
    let mut m = 0u16;
    for &l in labels {
        if l >= MAX_VERTICES {
            return Err(Error::invalid(format!("label {l} exceeds {MAX_VERTICES} vertices")));
        }
        if m >> l & 1 == 1 {
            return Err(Error::invalid(format!("label {l} repeated")));
        }
        m |= 1 << l;
    }
    Ok(m)
}

/// Degree-one vertices of `g` outside `protected`, ascending.
pub fn leaves(g: &Graph, protected: u16) -> Vec<usize> {
    let adj = g.adjacency();
    (0..g.k())
        .filter(|&v| protected >> v & 1 == 0 && adj[v].count_ones() == 1)
        .collect()
}
