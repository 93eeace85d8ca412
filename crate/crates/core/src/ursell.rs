//! Ursell functions of a fixed point configuration.
//!
//! Two independent evaluators are provided: the connected-graph sum
//! [`ursell_graph_sum`] and the pivot recursion for the generalized functions
//! [`generalized_ursell`]. The tree and forest majorants bound them from
//! above.
//!
//! Labels are indices into the configuration the context was built from.

use std::collections::HashMap;

use crate::graphs::{self, Graph};
use crate::points::PointSet;
use crate::potential::{ModelParams, PairPotential};
use crate::{Error, Result, Scalar};

pub const MAX_GRAPH_SUM: usize = 8;
pub const MAX_RECURSION: usize = 10;
pub const MAX_TREE_MAJORANT: usize = 9;
/// Relative slack allowed when comparing a floating-point value with its
/// majorant.
pub const MAJORANT_SLACK: f64 = 1e-9;
/// Absolute floor for the same comparison, absorbing rounding when the
/// majorant is exactly zero.
pub const MAJORANT_FLOOR: f64 = 1e-14;

/// Pairwise Mayer functions and energies of one configuration.
#[derive(Debug, Clone)]
pub struct UrsellContext<S> {
    potential: PairPotential<S>,
    params: ModelParams<S>,
    n: usize,
    zeta: Vec<S>,
    phi: Vec<S>,
}

impl<S: Scalar> UrsellContext<S> {
    pub fn new(potential: PairPotential<S>, params: ModelParams<S>, xs: &PointSet<S>) -> Result<Self> {
        if xs.dim() != params.dim {
            return Err(Error::invalid("configuration dimension differs from model dimension"));
        }
        let n = xs.len();
        let mut zeta = vec![S::zero(); n * n];
        let mut phi = vec![S::zero(); n * n];
        for a in 0..n {
            for b in a + 1..n {
                let r = xs.dist(a, b) / params.eps;
                let z = potential.zeta_scaled(params.beta, r);
                let e = potential.evaluate(r);
                zeta[a * n + b] = z;
                zeta[b * n + a] = z;
                phi[a * n + b] = e;
                phi[b * n + a] = e;
            }
        }
        Ok(UrsellContext {
            potential,
            params,
            n,
            zeta,
            phi,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn potential(&self) -> &PairPotential<S> {
        &self.potential
    }

    pub fn params(&self) -> &ModelParams<S> {
        &self.params
    }

    #[inline]
    pub fn zeta(&self, a: usize, b: usize) -> S {
        self.zeta[a * self.n + b]
    }

    /// Rescaled pair energy `phi((x_a - x_b)/eps)`.
    #[inline]
    pub fn phi(&self, a: usize, b: usize) -> S {
        self.phi[a * self.n + b]
    }

    fn stability_factor(&self) -> S {
        (S::lit(2.0) * self.params.beta * self.potential.declared_b()).exp()
    }

    fn check_labels(&self, labels: &[usize], limit: usize, what: &'static str) -> Result<()> {
        if labels.len() > limit {
            return Err(Error::Guard {
                what,
                requested: labels.len(),
                limit,
                estimate: None,
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= self.n) {
            return Err(Error::invalid(format!("label {l} outside configuration of {} points", self.n)));
        }
        let mut sorted = labels.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("repeated label"));
        }
        Ok(())
    }
}

/// `W_kappa(J) = sum_{a in J, a != kappa} phi(x_kappa - x_a)`.
pub fn pivot_energy<S: Scalar>(ctx: &UrsellContext<S>, kappa: usize, j: &[usize]) -> S {
    j.iter()
        .filter(|&&a| a != kappa)
        .fold(S::zero(), |w, &a| w + ctx.phi(kappa, a))
}

/// Element of `J` with the largest `W`, ties to the smallest label. The
/// choice guarantees `exp(-beta W) <= exp(2 beta B)` for a `B`-stable
/// potential.
pub fn pivot<S: Scalar>(ctx: &UrsellContext<S>, j: &[usize]) -> Result<usize> {
    if j.is_empty() {
        return Err(Error::invalid("pivot of an empty set"));
    }
    let mut sorted = j.to_vec();
    sorted.sort_unstable();
    let mut best = sorted[0];
    let mut best_w = pivot_energy(ctx, best, &sorted);
    for &k in &sorted[1..] {
        let w = pivot_energy(ctx, k, &sorted);
        if w > best_w {
            best = k;
            best_w = w;
        }
    }
    Ok(best)
}

/// Sum over connected graphs on `labels` of the product of edge Mayer
/// functions. Graphs containing a vanishing edge contribute nothing, so only
/// edge subsets of the support graph are visited.
pub fn ursell_graph_sum<S: Scalar>(ctx: &UrsellContext<S>, labels: &[usize]) -> Result<S> {
    ctx.check_labels(labels, MAX_GRAPH_SUM, "Ursell graph sum")?;
    let k = labels.len();
    match k {
        0 => return Ok(S::zero()),
        1 => return Ok(S::one()),
        _ => {}
    }
    let mut edges = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let z = ctx.zeta(labels[a], labels[b]);
            if z != S::zero() {
                edges.push((a, b, z));
            }
        }
    }
    if edges.len() < k - 1 {
        return Ok(S::zero());
    }
    let support = Graph::from_edges(k, &edges.iter().map(|&(a, b, _)| (a, b)).collect::<Vec<_>>())?;
    if !support.is_connected() {
        return Ok(S::zero());
    }
    let mut total = S::zero();
    let full: u16 = (1u16 << k) - 1;
    for m in 0u64..1u64 << edges.len() {
        if (m.count_ones() as usize) < k - 1 {
            continue;
        }
        let mut adj = [0u16; 16];
        let mut prod = S::one();
        let mut bits = m;
        while bits != 0 {
            let e = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let (a, b, z) = edges[e];
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
            prod = prod * z;
        }
        // breadth-first closure from vertex 0
        let mut seen = 1u16;
        let mut frontier = 1u16;
        while frontier != 0 {
            let mut next = 0u16;
            let mut f = frontier;
            while f != 0 {
                let v = f.trailing_zeros() as usize;
                f &= f - 1;
                next |= adj[v];
            }
            next &= !seen;
            seen |= next;
            frontier = next;
        }
        if seen == full {
            total = total + prod;
        }
    }
    Ok(total)
}

/// Ursell function from the Boltzmann factors of all sub-configurations:
/// `psi_S = sum_{B containing min S} u_B psi_{S \ B}` solved for `u_S`.
/// Agrees with [`ursell_graph_sum`] and costs `O(3^k)`; used in sampling
/// loops.
pub fn ursell_value<S: Scalar>(ctx: &UrsellContext<S>, labels: &[usize]) -> Result<S> {
    ctx.check_labels(labels, 16, "Ursell subset recursion")?;
    let k = labels.len();
    match k {
        0 => return Ok(S::zero()),
        1 => return Ok(S::one()),
        _ => {}
    }
    let full = (1usize << k) - 1;
    let mut psi = vec![S::one(); full + 1];
    let mut support = [0u16; 16];
    for a in 0..k {
        for b in a + 1..k {
            if ctx.zeta(labels[a], labels[b]) != S::zero() {
                support[a] |= 1 << b;
                support[b] |= 1 << a;
            }
        }
    }
    // connected support is necessary for a nonzero value
    let mut seen = 1u16;
    let mut frontier = 1u16;
    while frontier != 0 {
        let mut next = 0u16;
        let mut f = frontier;
        while f != 0 {
            let v = f.trailing_zeros() as usize;
            f &= f - 1;
            next |= support[v];
        }
        next &= !seen;
        seen |= next;
        frontier = next;
    }
    if seen as usize != full {
        return Ok(S::zero());
    }
    for s in 1..=full {
        let top = usize::BITS as usize - 1 - s.leading_zeros() as usize;
        let rest = s & !(1 << top);
        let mut p = psi[rest];
        let mut r = rest;
        while r != 0 && p != S::zero() {
            let a = r.trailing_zeros() as usize;
            r &= r - 1;
            p = p * (S::one() + ctx.zeta(labels[top], labels[a]));
        }
        psi[s] = p;
    }
    let mut u = vec![S::zero(); full + 1];
    for s in 1..=full {
        let low = s & s.wrapping_neg();
        let rest = s & !low;
        let mut acc = psi[s];
        // proper blocks B = low | sub with sub a proper subset of rest
        let mut sub = rest;
        while sub != 0 {
            sub = (sub - 1) & rest;
            let b = low | sub;
            acc = acc - u[b] * psi[s & !b];
        }
        u[s] = acc;
    }
    Ok(u[full])
}

/// Generalized Ursell function `u~_{J,I}` by the pivot recursion
/// `u~_{J,I} = exp(-beta W_kappa) sum_{S subset I} prod_{a in S} zeta(x_a, x_kappa) u~_{J_kappa + S, I - S}`
/// with `u~_{0,I} = delta_{0,I}`. A pivot with `W = +inf` makes its branch
/// vanish.
pub fn generalized_ursell<S: Scalar>(ctx: &UrsellContext<S>, j: &[usize], i: &[usize]) -> Result<S> {
    let all = disjoint_union(ctx, j, i, "generalized Ursell recursion")?;
    let jm = (1u32 << j.len()) - 1;
    let im = ((1u32 << all.len()) - 1) & !jm;
    let mut memo = HashMap::new();
    Ok(u_tilde(ctx, &all, jm, im, &mut memo))
}

/// Forest majorant `theta~_{J,I}` by
/// `theta~_{J,I} = exp(2 beta B) sum_{L subset I} prod_{a in L} |zeta(x_a, x_kappa)| theta~_{J_kappa + L, I - L}`.
pub fn forest_majorant<S: Scalar>(ctx: &UrsellContext<S>, j: &[usize], i: &[usize]) -> Result<S> {
    let all = disjoint_union(ctx, j, i, "forest majorant recursion")?;
    let jm = (1u32 << j.len()) - 1;
    let im = ((1u32 << all.len()) - 1) & !jm;
    let mut memo = HashMap::new();
    let e2b = ctx.stability_factor();
    Ok(theta_tilde(ctx, &all, jm, im, e2b, &mut memo))
}

fn disjoint_union<S: Scalar>(ctx: &UrsellContext<S>, j: &[usize], i: &[usize], what: &'static str) -> Result<Vec<usize>> {
    let all: Vec<usize> = j.iter().chain(i).copied().collect();
    ctx.check_labels(&all, MAX_RECURSION, what)?;
    Ok(all)
}

fn mask_labels(all: &[usize], mask: u32) -> Vec<usize> {
    (0..all.len()).filter(|&p| mask >> p & 1 == 1).map(|p| all[p]).collect()
}

fn u_tilde<S: Scalar>(ctx: &UrsellContext<S>, all: &[usize], jm: u32, im: u32, memo: &mut HashMap<(u32, u32), S>) -> S {
    if jm == 0 {
        return if im == 0 { S::one() } else { S::zero() };
    }
    if let Some(&v) = memo.get(&(jm, im)) {
        return v;
    }
    let j_labels = mask_labels(all, jm);
    let kappa_label = pivot(ctx, &j_labels).expect("nonempty J");
    let kp = all.iter().position(|&l| l == kappa_label).unwrap();
    let w = pivot_energy(ctx, kappa_label, &j_labels);
    let value = if w == S::infinity() {
        S::zero()
    } else {
        let prefactor = (-ctx.params.beta * w).exp();
        let rest_j = jm & !(1 << kp);
        let mut sum = S::zero();
        let mut s = im;
        loop {
            let mut prod = S::one();
            let mut bits = s;
            while bits != 0 && prod != S::zero() {
                let a = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                prod = prod * ctx.zeta(all[a], kappa_label);
            }
            if prod != S::zero() {
                sum = sum + prod * u_tilde(ctx, all, rest_j | s, im & !s, memo);
            }
            if s == 0 {
                break;
            }
            s = (s - 1) & im;
        }
        prefactor * sum
    };
    memo.insert((jm, im), value);
    value
}

fn theta_tilde<S: Scalar>(
    ctx: &UrsellContext<S>,
    all: &[usize],
    jm: u32,
    im: u32,
    e2b: S,
    memo: &mut HashMap<(u32, u32), S>,
) -> S {
    if jm == 0 {
        return if im == 0 { S::one() } else { S::zero() };
    }
    if let Some(&v) = memo.get(&(jm, im)) {
        return v;
    }
    let kp = jm.trailing_zeros() as usize;
    let rest_j = jm & !(1 << kp);
    let mut sum = S::zero();
    let mut l = im;
    loop {
        let mut prod = S::one();
        let mut bits = l;
        while bits != 0 && prod != S::zero() {
            let a = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            prod = prod * ctx.zeta(all[a], all[kp]).abs();
        }
        if prod != S::zero() {
            sum = sum + prod * theta_tilde(ctx, all, rest_j | l, im & !l, e2b, memo);
        }
        if l == 0 {
            break;
        }
        l = (l - 1) & im;
    }
    let value = e2b * sum;
    memo.insert((jm, im), value);
    value
}

/// `exp(2 k beta B) sum_{T in trees on labels} prod_{edges} |zeta|`, by
/// enumerating all `k^{k-2}` labeled trees.
pub fn tree_majorant<S: Scalar>(ctx: &UrsellContext<S>, labels: &[usize]) -> Result<S> {
    ctx.check_labels(labels, MAX_TREE_MAJORANT, "tree majorant")?;
    let k = labels.len();
    if k == 0 {
        return Ok(S::zero());
    }
    let mut abs = vec![S::zero(); k * k];
    for a in 0..k {
        for b in 0..k {
            if a != b {
                abs[a * k + b] = ctx.zeta(labels[a], labels[b]).abs();
            }
        }
    }
    let mut sum = S::zero();
    for t in graphs::enumerate_trees(k)? {
        let mut prod = S::one();
        for (a, b) in t.edges() {
            prod = prod * abs[a * k + b];
            if prod == S::zero() {
                break;
            }
        }
        sum = sum + prod;
    }
    let factor = (S::lit(2.0) * S::from_usize(k).unwrap() * ctx.params.beta * ctx.potential.declared_b()).exp();
    Ok(factor * sum)
}

/// `exp(2(j+i) beta B) sum_{F rooted forests on J+I} prod_{edges} |zeta|` by
/// explicit forest enumeration; the closed form of [`forest_majorant`].
pub fn forest_majorant_by_enumeration<S: Scalar>(ctx: &UrsellContext<S>, j: &[usize], i: &[usize]) -> Result<S> {
    let all = disjoint_union(ctx, j, i, "forest enumeration")?;
    if j.is_empty() {
        return Ok(if i.is_empty() { S::one() } else { S::zero() });
    }
    let jp: Vec<usize> = (0..j.len()).collect();
    let ip: Vec<usize> = (j.len()..all.len()).collect();
    let mut sum = S::zero();
    for f in graphs::enumerate_rooted_forests(&jp, &ip)? {
        let prod = f
            .graph
            .edges()
            .fold(S::one(), |p, (a, b)| p * ctx.zeta(all[a], all[b]).abs());
        sum = sum + prod;
    }
    let factor = (S::lit(2.0) * S::from_usize(all.len()).unwrap() * ctx.params.beta * ctx.potential.declared_b()).exp();
    Ok(factor * sum)
}

/// Outcome of one comparison of a value with its majorant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MajorantReport<S> {
    pub lhs: S,
    pub rhs: S,
    pub holds: bool,
}

fn within_slack<S: Scalar>(lhs: S, rhs: S) -> bool {
    lhs <= rhs * S::lit(1.0 + MAJORANT_SLACK) + S::lit(MAJORANT_FLOOR)
}

/// Checks `|u_k| <= exp(2 k beta B) sum_T prod |zeta|` on `labels`. The left
/// side comes from the graph sum when `k` is within its guard and from the
/// subset recursion otherwise.
pub fn verify_tree_graph<S: Scalar>(ctx: &UrsellContext<S>, labels: &[usize]) -> Result<MajorantReport<S>> {
    let u = if labels.len() <= 6 {
        ursell_graph_sum(ctx, labels)?
    } else {
        ursell_value(ctx, labels)?
    };
    let lhs = u.abs();
    let rhs = tree_majorant(ctx, labels)?;
    Ok(MajorantReport {
        lhs,
        rhs,
        holds: within_slack(lhs, rhs),
    })
}

/// Checks `u~_{J,I} <= theta~_{J,I}` (no absolute value on the left).
pub fn verify_forest_bound<S: Scalar>(ctx: &UrsellContext<S>, j: &[usize], i: &[usize]) -> Result<MajorantReport<S>> {
    let lhs = generalized_ursell(ctx, j, i)?;
    let rhs = forest_majorant(ctx, j, i)?;
    Ok(MajorantReport {
        lhs,
        rhs,
        holds: within_slack(lhs, rhs),
    })
}

/// True when `a` and `b` agree to relative `rel`, with absolute floor
/// `floor`.
pub fn close<S: Scalar>(a: S, b: S, rel: f64, floor: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= S::lit(rel) * scale + S::lit(floor)
}
