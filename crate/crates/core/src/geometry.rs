//! Lengths of trees spanning a point configuration: tree length, minimum
//! spanning tree, brackets on the Steiner minimal length `L`, and the
//! number `n0` of extra points needed to chain the configuration together.

use serde::{Deserialize, Serialize};

use crate::graphs::{self, Graph};
use crate::points::{distance, PointSet};
use crate::{Error, Result, Scalar};

/// Largest configuration handled by topology enumeration in `Optimize`.
pub const MAX_TOPOLOGY_TERMINALS: usize = 5;
/// Largest configuration accepted by `ExactSmall`.
pub const MAX_EXACT_TERMINALS: usize = 4;
const SOLVER_TOL: f64 = 1e-10;
const SOLVER_MAX_ITER: usize = 200_000;

/// `sum_{edges} |x_a - x_b|` for a tree on the indices of `xs`.
pub fn tree_length<S: Scalar>(t: &Graph, xs: &PointSet<S>) -> Result<S> {
    if t.k() != xs.len() || !t.is_tree() {
        return Err(Error::invalid(format!("{t} is not a spanning tree of {} points", xs.len())));
    }
    Ok(t.edges().fold(S::zero(), |acc, (a, b)| acc + xs.dist(a, b)))
}

/// Edges of a minimum spanning tree (Prim, `O(n^2)`).
pub fn mst_edges<S: Scalar>(xs: &PointSet<S>) -> Vec<(usize, usize)> {
    let n = xs.len();
    if n <= 1 {
        return vec![];
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![S::infinity(); n];
    let mut parent = vec![0usize; n];
    in_tree[0] = true;
    for v in 1..n {
        best[v] = xs.dist(0, v);
    }
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut v = usize::MAX;
        for u in 0..n {
            if !in_tree[u] && (v == usize::MAX || best[u] < best[v]) {
                v = u;
            }
        }
        in_tree[v] = true;
        edges.push((parent[v].min(v), parent[v].max(v)));
        for u in 0..n {
            if !in_tree[u] {
                let d = xs.dist(v, u);
                if d < best[u] {
                    best[u] = d;
                    parent[u] = v;
                }
            }
        }
    }
    edges
}

pub fn mst_length<S: Scalar>(xs: &PointSet<S>) -> S {
    mst_edges(xs)
        .into_iter()
        .fold(S::zero(), |acc, (a, b)| acc + xs.dist(a, b))
}

/// Largest pairwise distance.
pub fn diameter<S: Scalar>(xs: &PointSet<S>) -> S {
    let mut d = S::zero();
    for a in 0..xs.len() {
        for b in a + 1..xs.len() {
            d = d.max(xs.dist(a, b));
        }
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LengthMethod {
    #[serde(rename = "exact-steiner")]
    ExactSteiner,
    #[serde(rename = "mst-bracket")]
    MstBracket,
    #[serde(rename = "local-opt")]
    LocalOpt,
}

impl LengthMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            LengthMethod::ExactSteiner => "exact-steiner",
            LengthMethod::MstBracket => "mst-bracket",
            LengthMethod::LocalOpt => "local-opt",
        }
    }
}

/// Certified interval containing the Steiner minimal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBracket<S> {
    pub lower: S,
    pub upper: S,
    pub method: LengthMethod,
    /// Set when the requested effort was not available for this input.
    pub notice: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Effort {
    #[serde(rename = "bracket")]
    Bracket,
    #[serde(rename = "optimize")]
    Optimize,
    #[serde(rename = "exact_small")]
    ExactSmall,
}

/// Brackets the minimal length of a tree connecting `xs`, extra vertices
/// allowed.
///
/// The lower end is `max(MST/2, diameter)`: every connecting tree contains a
/// path between the two farthest points, and the metric Steiner ratio is at
/// least one half. `Optimize` lowers the upper end by local optimization of
/// Steiner points; `ExactSmall` (at most four points in the plane) solves
/// every full topology and certifies the lower end by a dual bound.
pub fn steiner_length<S: Scalar>(xs: &PointSet<S>, effort: Effort) -> LengthBracket<S> {
    let mst = mst_length(xs);
    let lower = (mst / S::lit(2.0)).max(diameter(xs));
    let bracket = LengthBracket {
        lower: lower.min(mst),
        upper: mst,
        method: LengthMethod::MstBracket,
        notice: None,
    };
    let j = xs.len();
    if j <= 2 {
        return bracket;
    }
    match effort {
        Effort::Bracket => bracket,
        Effort::Optimize => {
            let upper = if j <= MAX_TOPOLOGY_TERMINALS {
                solve_topologies(xs).upper
            } else {
                iterated_one_steiner(xs)
            };
            LengthBracket {
                lower: bracket.lower.min(upper),
                upper: upper.min(mst),
                method: LengthMethod::LocalOpt,
                notice: None,
            }
        }
        Effort::ExactSmall => {
            if j > MAX_EXACT_TERMINALS || xs.dim() != 2 {
                return LengthBracket {
                    notice: Some(format!(
                        "exact_small needs at most {MAX_EXACT_TERMINALS} points in 2 dimensions (got {j} in {}); fell back to bracket",
                        xs.dim()
                    )),
                    ..bracket
                };
            }
            let sol = solve_topologies(xs);
            let upper = sol.upper.min(mst);
            let lower = sol.certified_lower.max(bracket.lower).min(upper);
            let exact = upper - lower <= S::lit(1e-6) * upper;
            LengthBracket {
                lower,
                upper,
                method: if exact {
                    LengthMethod::ExactSteiner
                } else {
                    LengthMethod::LocalOpt
                },
                notice: None,
            }
        }
    }
}

struct TopologySolution<S> {
    upper: S,
    certified_lower: S,
}

/// Trees on `j` terminals plus `s <= j - 2` Steiner points in which every
/// Steiner point has degree 3 and every terminal degree at most 3, as edge
/// lists (Steiner points are vertices `j..j+s`).
fn full_topologies(j: usize, s: usize) -> Vec<Vec<(usize, usize)>> {
    let k = j + s;
    let mut out = Vec::new();
    let Ok(trees) = graphs::enumerate_trees(k) else {
        return out;
    };
    for t in trees {
        let adj = t.adjacency();
        let ok = (0..k).all(|v| {
            let deg = adj[v].count_ones();
            if v >= j {
                deg == 3
            } else {
                deg <= 3
            }
        });
        if ok {
            out.push(t.edges().collect());
        }
    }
    out
}

fn solve_topologies<S: Scalar>(xs: &PointSet<S>) -> TopologySolution<S> {
    let j = xs.len();
    let scale = diameter(xs).max(S::min_positive_value());
    let mut upper = S::infinity();
    let mut lower = S::infinity();
    for s in 0..=j - 2 {
        for edges in full_topologies(j, s) {
            let (len, lb, degenerate) = solve_topology(xs, s, &edges, scale);
            upper = upper.min(len);
            // a degenerate optimum coincides with a tree on fewer points and
            // therefore cannot undercut the minimum over the other topologies
            if !degenerate {
                lower = lower.min(lb);
            }
        }
    }
    if lower == S::infinity() {
        lower = S::zero();
    }
    TopologySolution {
        upper,
        certified_lower: lower,
    }
}

/// Minimizes the total length of one topology over its Steiner points by
/// Gauss-Seidel Weiszfeld sweeps. Returns the length, a dual lower bound
/// valid for every placement of the Steiner points, and whether an edge
/// collapsed.
fn solve_topology<S: Scalar>(xs: &PointSet<S>, s: usize, edges: &[(usize, usize)], scale: S) -> (S, S, bool) {
    let j = xs.len();
    let d = xs.dim();
    let k = j + s;
    let mut pos: Vec<Vec<S>> = (0..j).map(|i| xs.point(i).to_vec()).collect();
    let mut nbrs = vec![Vec::new(); k];
    for &(a, b) in edges {
        nbrs[a].push(b);
        nbrs[b].push(a);
    }
    // start every Steiner point at the terminal centroid, nudged apart
    let centroid: Vec<S> = (0..d)
        .map(|c| (0..j).fold(S::zero(), |acc, i| acc + xs.point(i)[c]) / S::from_usize(j).unwrap())
        .collect();
    for t in 0..s {
        let mut p = centroid.clone();
        p[t % d] = p[t % d] + scale * S::lit(1e-3) * S::from_usize(t + 1).unwrap();
        pos.push(p);
    }
    let tiny = scale * S::lit(1e-15);
    let omega = S::lit(0.9);
    for _ in 0..SOLVER_MAX_ITER {
        if s == 0 {
            break;
        }
        let mut moved = S::zero();
        for v in j..k {
            let mut num = vec![S::zero(); d];
            let mut den = S::zero();
            for &u in &nbrs[v] {
                let w = S::one() / distance(&pos[v], &pos[u]).max(tiny);
                for c in 0..d {
                    num[c] = num[c] + w * pos[u][c];
                }
                den = den + w;
            }
            let mut step = S::zero();
            for c in 0..d {
                let target = num[c] / den;
                let next = pos[v][c] + omega * (target - pos[v][c]);
                step = step + (next - pos[v][c]) * (next - pos[v][c]);
                pos[v][c] = next;
            }
            moved = moved.max(step.sqrt());
        }
        if moved <= S::lit(SOLVER_TOL) * scale {
            break;
        }
    }
    let len = edges
        .iter()
        .fold(S::zero(), |acc, &(a, b)| acc + distance(&pos[a], &pos[b]));
    let degenerate = edges
        .iter()
        .any(|&(a, b)| distance(&pos[a], &pos[b]) <= S::lit(1e-7) * scale);
    let lb = if s == 0 { len } else { dual_bound(&pos, j, edges, d) };
    (len, lb, degenerate)
}

/// Lower bound `sum_e <u_e, p_a - p_b> / max|u_e|` for any Steiner placement,
/// with `u_e` the edge directions corrected (leaf-to-root toward terminal 0)
/// so that they balance at every Steiner point.
fn dual_bound<S: Scalar>(pos: &[Vec<S>], j: usize, edges: &[(usize, usize)], d: usize) -> S {
    let k = pos.len();
    let mut u: Vec<Vec<S>> = edges
        .iter()
        .map(|&(a, b)| {
            let len = distance(&pos[a], &pos[b]);
            (0..d)
                .map(|c| if len > S::zero() { (pos[a][c] - pos[b][c]) / len } else { S::zero() })
                .collect()
        })
        .collect();
    let mut inc = vec![Vec::new(); k];
    for (e, &(a, b)) in edges.iter().enumerate() {
        inc[a].push(e);
        inc[b].push(e);
    }
    // breadth-first order from terminal 0, parents recorded by edge
    let mut order = vec![0usize];
    let mut parent_edge = vec![usize::MAX; k];
    let mut seen = vec![false; k];
    seen[0] = true;
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for &e in &inc[v] {
            let (a, b) = edges[e];
            let w = if a == v { b } else { a };
            if !seen[w] {
                seen[w] = true;
                parent_edge[w] = e;
                order.push(w);
            }
        }
    }
    for &v in order.iter().rev() {
        if v < j {
            continue;
        }
        // residual sum over incident edges of sign * u_e, sign +1 when v is
        // the first endpoint
        let mut g = vec![S::zero(); d];
        for &e in &inc[v] {
            let sign = if edges[e].0 == v { S::one() } else { -S::one() };
            for c in 0..d {
                g[c] = g[c] + sign * u[e][c];
            }
        }
        let pe = parent_edge[v];
        let sign = if edges[pe].0 == v { S::one() } else { -S::one() };
        for c in 0..d {
            u[pe][c] = u[pe][c] - sign * g[c];
        }
    }
    let norm = u
        .iter()
        .map(|x| x.iter().fold(S::zero(), |a, &c| a + c * c).sqrt())
        .fold(S::one(), |m, x| m.max(x));
    let value = edges.iter().enumerate().fold(S::zero(), |acc, (e, &(a, b))| {
        acc + (0..d).fold(S::zero(), |s2, c| s2 + u[e][c] * (pos[a][c] - pos[b][c]))
    });
    value / norm
}

/// Geometric median of three points (Weiszfeld).
fn fermat_point<S: Scalar>(a: &[S], b: &[S], c: &[S], scale: S) -> Vec<S> {
    let d = a.len();
    let mut p: Vec<S> = (0..d).map(|i| (a[i] + b[i] + c[i]) / S::lit(3.0)).collect();
    let tiny = scale * S::lit(1e-15);
    for _ in 0..10_000 {
        let mut num = vec![S::zero(); d];
        let mut den = S::zero();
        for q in [a, b, c] {
            let w = S::one() / distance(&p, q).max(tiny);
            for i in 0..d {
                num[i] = num[i] + w * q[i];
            }
            den = den + w;
        }
        let next: Vec<S> = num.iter().map(|&x| x / den).collect();
        let moved = distance(&next, &p);
        p = next;
        if moved <= S::lit(SOLVER_TOL) * scale {
            break;
        }
    }
    p
}

/// Iterated 1-Steiner heuristic: repeatedly add the Fermat point of a
/// triple that shortens the spanning tree most.
fn iterated_one_steiner<S: Scalar>(xs: &PointSet<S>) -> S {
    let j = xs.len();
    let scale = diameter(xs).max(S::min_positive_value());
    let mut pts = xs.clone();
    let mut best = mst_length(&pts);
    for _ in 0..j.saturating_sub(2) {
        let mut cand: Option<(S, Vec<S>)> = None;
        for a in 0..j {
            for b in a + 1..j {
                for c in b + 1..j {
                    let f = fermat_point(xs.point(a), xs.point(b), xs.point(c), scale);
                    let mut trial = pts.clone();
                    trial.push(&f);
                    let len = mst_length(&trial);
                    if len < best && cand.as_ref().is_none_or(|(l, _)| len < *l) {
                        cand = Some((len, f));
                    }
                }
            }
        }
        match cand {
            Some((len, f)) => {
                pts.push(&f);
                best = len;
            }
            None => break,
        }
    }
    best
}

/// How consecutive points of a chain must be spaced to count as connected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connection {
    /// Consecutive centers closer than `eps`.
    #[serde(rename = "edge")]
    Edge,
    /// Consecutive `eps`-balls overlapping: centers closer than `2 eps`.
    #[serde(rename = "ball-overlap")]
    BallOverlap,
}

impl Connection {
    pub fn spacing(&self, eps: f64) -> f64 {
        match self {
            Connection::Edge => eps,
            Connection::BallOverlap => 2.0 * eps,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Connection::Edge => "edge",
            Connection::BallOverlap => "ball-overlap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NZeroBounds {
    pub lower: u64,
    pub upper: u64,
    pub connection: Connection,
}

/// Bounds on the number of extra points needed to join `xs` into one chain
/// with links shorter than the spacing `s` of `connection`:
/// `lower = max(0, ceil(L_lower / s) - j)`, `upper = sum_{MST edges} floor(l / s)`.
pub fn n_zero_bounds(xs: &PointSet<f64>, eps: f64, connection: Connection) -> Result<NZeroBounds> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    let s = connection.spacing(eps);
    let j = xs.len() as i64;
    let l = steiner_length(xs, Effort::ExactSmall).lower;
    // a relative tolerance keeps exact multiples of the spacing from rounding up
    let lower = (((l / s) * (1.0 - 1e-12)).ceil() as i64 - j).max(0) as u64;
    let upper: u64 = mst_edges(xs)
        .into_iter()
        .map(|(a, b)| (xs.dist(a, b) / s).floor() as u64)
        .sum();
    Ok(NZeroBounds {
        lower: lower.min(upper),
        upper,
        connection,
    })
}
