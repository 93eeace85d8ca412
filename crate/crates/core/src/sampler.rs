//! Grand-canonical Metropolis sampling of a maximally chaotic state, binned
//! estimators of the correlation functions, and an exact quadrature oracle
//! for tiny one-dimensional systems.

use log::warn;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cumulants::{truncate, SubsetTable};
use crate::estimate::{Estimate, MeanAccumulator};
use crate::expansion::{BoxDomain, MCSModel};
use crate::points::{distance, PointSet};
use crate::quadrature::gauss_legendre;
use crate::rng::{stream_id, substream, Rng};
use crate::{Error, Result};

pub const P_INSERT: f64 = 0.3;
pub const P_DELETE: f64 = 0.3;
pub const P_TRANSLATE: f64 = 0.4;
/// Translation half-width in units of `eps`.
pub const TRANSLATE_STEP: f64 = 0.5;
pub const BURN_IN_FRACTION: f64 = 0.1;
pub const BATCHES: usize = 50;
/// Moves between recomputations of the cached energy.
pub const AUDIT_EVERY: u64 = 1_000_000;
const ACCEPT_WINDOW: u64 = 100_000;
const MAX_GRID_CELLS: usize = 50_000;
const CHECKPOINT_VERSION: u32 = 1;
const TAG_GCMC: u64 = 11;

/// Particle positions and velocities with the cached total pair energy
/// `sum phi(|x_a - x_b| / eps)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GCState {
    pub positions: PointSet<f64>,
    pub velocities: PointSet<f64>,
    pub cached_energy: f64,
}

impl GCState {
    pub fn empty(dim: usize) -> Self {
        GCState {
            positions: PointSet::new(dim),
            velocities: PointSet::new(dim),
            cached_energy: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// One proposed move.
#[derive(Debug, Clone, PartialEq)]
pub enum Move {
    /// Append a particle.
    Insert { x: Vec<f64>, v: Vec<f64> },
    /// Remove particle `k` (the last particle takes its slot).
    Delete { k: usize },
    /// Move particle `k` to `x`.
    Translate { k: usize, x: Vec<f64> },
}

/// Attempted and accepted counts for insert, delete and translate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveStats {
    pub attempted: [u64; 3],
    pub accepted: [u64; 3],
}

impl MoveStats {
    fn merge(&mut self, o: &MoveStats) {
        for i in 0..3 {
            self.attempted[i] += o.attempted[i];
            self.accepted[i] += o.accepted[i];
        }
    }

    pub fn acceptance(&self) -> f64 {
        let a: u64 = self.attempted.iter().sum();
        let b: u64 = self.accepted.iter().sum();
        if a == 0 {
            0.0
        } else {
            b as f64 / a as f64
        }
    }
}

/// Pair energy of `x` against `others` (skipping `exclude`), or `None` if a
/// hard core overlaps or positions coincide.
fn energy_against<'a, I: Iterator<Item = (usize, &'a [f64])>>(model: &MCSModel, x: &[f64], others: I, exclude: Option<usize>) -> Option<f64> {
    let eps = model.eps();
    let mut e = 0.0;
    for (i, y) in others {
        if Some(i) == exclude {
            continue;
        }
        let r = distance(x, y);
        if r == 0.0 {
            return None;
        }
        let phi = model.potential.evaluate(r / eps);
        if phi == f64::INFINITY {
            return None;
        }
        e += phi;
    }
    Some(e)
}

/// Total pair energy, `None` when some pair is forbidden.
pub fn total_energy(model: &MCSModel, xs: &PointSet<f64>) -> Option<f64> {
    let mut e = 0.0;
    for a in 0..xs.len() {
        let rest = (a + 1..xs.len()).map(|b| (b, xs.point(b)));
        e += energy_against(model, xs.point(a), rest, None)?;
    }
    Some(e)
}

/// Unnormalized density of an unordered state, `mu^n prod f(z_a) psi_n`.
pub fn target_density(model: &MCSModel, s: &GCState) -> f64 {
    let Some(e) = total_energy(model, &s.positions) else {
        return 0.0;
    };
    let mut w = (-model.params.beta * e).exp();
    for a in 0..s.len() {
        w *= model.mu() * model.f(s.positions.point(a), Some(s.velocities.point(a)));
    }
    w
}

/// Metropolis acceptance probability of `mv` from a state with `n`
/// particles, given the energy change `de` (finite).
fn acceptance(model: &MCSModel, state: &GCState, mv: &Move, de: f64) -> f64 {
    let n = state.len() as f64;
    let boltz = (-model.params.beta * de).exp();
    let vol = model.domain.volume();
    let ratio = match mv {
        Move::Insert { x, .. } => model.mu() * model.rho(x) * vol * boltz / (n + 1.0),
        Move::Delete { k } => n * boltz / (model.mu() * model.rho(state.positions.point(*k)) * vol),
        Move::Translate { k, x } => model.rho(x) / model.rho(state.positions.point(*k)) * boltz,
    };
    ratio.min(1.0)
}

/// Energy change of `mv`, `None` for a forbidden target.
fn energy_change(model: &MCSModel, s: &GCState, mv: &Move) -> Option<f64> {
    let all = || (0..s.len()).map(|i| (i, s.positions.point(i)));
    match mv {
        Move::Insert { x, .. } => {
            if model.rho(x) == 0.0 {
                return None;
            }
            energy_against(model, x, all(), None)
        }
        Move::Delete { k } => Some(-energy_against(model, s.positions.point(*k), all(), Some(*k))?),
        Move::Translate { k, x } => {
            if model.rho(x) == 0.0 {
                return None;
            }
            let new = energy_against(model, x, all(), Some(*k))?;
            let old = energy_against(model, s.positions.point(*k), all(), Some(*k))?;
            Some(new - old)
        }
    }
}

/// Proposal density times acceptance for `mv` from `s`, with respect to the
/// reference measure of the target state.
pub fn transition_density(model: &MCSModel, s: &GCState, mv: &Move) -> f64 {
    let Some(de) = energy_change(model, s, mv) else {
        return 0.0;
    };
    let n = s.len() as f64;
    let d = model.dim() as i32;
    let prop = match mv {
        Move::Insert { v, .. } => P_INSERT / model.domain.volume() * model.velocity.density(v),
        Move::Delete { .. } => P_DELETE / n,
        Move::Translate { k, x } => {
            let h = TRANSLATE_STEP * model.eps();
            let y = s.positions.point(*k);
            if x.iter().zip(y).any(|(a, b)| (a - b).abs() > h) {
                return 0.0;
            }
            P_TRANSLATE / n / (2.0 * h).powi(d)
        }
    };
    prop * acceptance(model, s, mv, de)
}

/// State after `mv` (energy updated by recomputation).
pub fn apply_move(model: &MCSModel, s: &GCState, mv: &Move) -> GCState {
    let mut t = s.clone();
    match mv {
        Move::Insert { x, v } => {
            t.positions.push(x);
            t.velocities.push(v);
        }
        Move::Delete { k } => {
            t.positions.swap_remove(*k);
            t.velocities.swap_remove(*k);
        }
        Move::Translate { k, x } => t.positions.point_mut(*k).copy_from_slice(x),
    }
    t.cached_energy = total_energy(model, &t.positions).unwrap_or(f64::INFINITY);
    t
}

/// Uniform neighbor grid with cells no smaller than the interaction radius.
#[derive(Debug, Clone)]
struct CellList {
    lo: Vec<f64>,
    width: Vec<f64>,
    n_axis: Vec<usize>,
    cells: Vec<Vec<usize>>,
    of: Vec<usize>,
}

impl CellList {
    fn new(domain: &BoxDomain, min_size: f64) -> Self {
        let d = domain.dim();
        let mut n_axis = Vec::with_capacity(d);
        let mut width = Vec::with_capacity(d);
        for c in 0..d {
            let side = domain.hi[c] - domain.lo[c];
            let n = if min_size > 0.0 { ((side / min_size).floor() as usize).clamp(1, 1 << 10) } else { 1 };
            n_axis.push(n);
            width.push(side / n as f64);
        }
        let total = n_axis.iter().product();
        CellList {
            lo: domain.lo.clone(),
            width,
            n_axis,
            cells: vec![Vec::new(); total],
            of: Vec::new(),
        }
    }

    fn coords(&self, x: &[f64]) -> Vec<usize> {
        (0..x.len())
            .map(|c| (((x[c] - self.lo[c]) / self.width[c]).floor().max(0.0) as usize).min(self.n_axis[c] - 1))
            .collect()
    }

    fn index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.n_axis).fold(0, |acc, (c, n)| acc * n + c)
    }

    fn insert(&mut self, idx: usize, x: &[f64]) {
        let cell = self.index(&self.coords(x));
        self.cells[cell].push(idx);
        if idx == self.of.len() {
            self.of.push(cell);
        } else {
            self.of[idx] = cell;
        }
    }

    fn detach(&mut self, idx: usize) {
        let list = &mut self.cells[self.of[idx]];
        let pos = list.iter().position(|&i| i == idx).expect("particle registered");
        list.swap_remove(pos);
    }

    /// Mirrors `PointSet::swap_remove(idx)`.
    fn swap_remove(&mut self, idx: usize) {
        self.detach(idx);
        let last = self.of.len() - 1;
        if idx != last {
            let cell = self.of[last];
            let list = &mut self.cells[cell];
            let pos = list.iter().position(|&i| i == last).expect("particle registered");
            list[pos] = idx;
            self.of[idx] = cell;
        }
        self.of.pop();
    }

    fn relocate(&mut self, idx: usize, x: &[f64]) {
        let cell = self.index(&self.coords(x));
        if cell != self.of[idx] {
            self.detach(idx);
            self.cells[cell].push(idx);
            self.of[idx] = cell;
        }
    }

    /// Particles in the cells adjacent to the one containing `x`.
    fn neighbors(&self, x: &[f64], out: &mut Vec<usize>) {
        out.clear();
        let center = self.coords(x);
        let d = center.len();
        let lo: Vec<usize> = center.iter().map(|&c| c.saturating_sub(1)).collect();
        let hi: Vec<usize> = center.iter().zip(&self.n_axis).map(|(&c, &n)| (c + 1).min(n - 1)).collect();
        let mut cur = lo.clone();
        loop {
            out.extend_from_slice(&self.cells[self.index(&cur)]);
            let mut axis = d;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                if cur[axis] < hi[axis] {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = lo[axis];
            }
        }
    }
}

/// Serialized chain: state, random stream position and counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub state: GCState,
    pub rng: Rng,
    pub moves: u64,
    pub sweeps: u64,
    pub stats: MoveStats,
    pub max_drift: f64,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!("unsupported checkpoint version {}", c.version)));
        }
        Ok(c)
    }
}

/// One Metropolis chain targeting `(mu^n / n!) f^{(x)n} psi_n`.
pub struct Chain<'m> {
    model: &'m MCSModel,
    state: GCState,
    cells: CellList,
    rng: Rng,
    moves: u64,
    sweeps: u64,
    stats: MoveStats,
    max_drift: f64,
    window: (u64, u64),
    scratch: Vec<usize>,
}

impl<'m> Chain<'m> {
    pub fn new(model: &'m MCSModel, seed: u64, chain: u64) -> Self {
        Chain {
            model,
            state: GCState::empty(model.dim()),
            cells: CellList::new(&model.domain, model.interaction_radius()),
            rng: substream(seed, stream_id(&[TAG_GCMC, chain])),
            moves: 0,
            sweeps: 0,
            stats: MoveStats::default(),
            max_drift: 0.0,
            window: (0, 0),
            scratch: Vec::new(),
        }
    }

    pub fn from_checkpoint(model: &'m MCSModel, ck: &Checkpoint) -> Result<Self> {
        if ck.state.positions.dim() != model.dim() || ck.state.velocities.len() != ck.state.len() {
            return Err(Error::invalid("checkpoint does not match the model dimension"));
        }
        if (0..ck.state.len()).any(|i| model.rho(ck.state.positions.point(i)) == 0.0) {
            return Err(Error::invalid("checkpoint has particles outside the support of the density"));
        }
        let mut cells = CellList::new(&model.domain, model.interaction_radius());
        for i in 0..ck.state.len() {
            cells.insert(i, ck.state.positions.point(i));
        }
        Ok(Chain {
            model,
            state: ck.state.clone(),
            cells,
            rng: ck.rng.clone(),
            moves: ck.moves,
            sweeps: ck.sweeps,
            stats: ck.stats,
            max_drift: ck.max_drift,
            window: (0, 0),
            scratch: Vec::new(),
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            state: self.state.clone(),
            rng: self.rng.clone(),
            moves: self.moves,
            sweeps: self.sweeps,
            stats: self.stats,
            max_drift: self.max_drift,
        }
    }

    pub fn state(&self) -> &GCState {
        &self.state
    }

    pub fn stats(&self) -> MoveStats {
        self.stats
    }

    /// Largest relative drift of the cached energy seen at an audit.
    pub fn max_drift(&self) -> f64 {
        self.max_drift
    }

    fn local_energy(&mut self, x: &[f64], exclude: Option<usize>) -> Option<f64> {
        if self.model.potential.is_ideal() {
            return Some(0.0);
        }
        let mut nb = std::mem::take(&mut self.scratch);
        self.cells.neighbors(x, &mut nb);
        let pos = &self.state.positions;
        let e = energy_against(self.model, x, nb.iter().map(|&i| (i, pos.point(i))), exclude);
        self.scratch = nb;
        e
    }

    /// Attempts one move.
    pub fn step(&mut self) {
        let model = self.model;
        let d = model.dim();
        let n = self.state.len();
        let u: f64 = self.rng.gen();
        let kind = if u < P_INSERT {
            0
        } else if u < P_INSERT + P_DELETE {
            1
        } else {
            2
        };
        self.stats.attempted[kind] += 1;
        self.moves += 1;
        let accepted = match kind {
            0 => {
                let mut x = vec![0.0; d];
                let mut v = vec![0.0; d];
                model.domain.sample(&mut self.rng, &mut x);
                model.velocity.sample(&mut self.rng, &mut v);
                match self.local_energy(&x, None) {
                    Some(de) if model.rho(&x) > 0.0 => {
                        let mv = Move::Insert { x, v };
                        let a = acceptance(model, &self.state, &mv, de);
                        if self.rng.gen::<f64>() < a {
                            let Move::Insert { x, v } = mv else { unreachable!() };
                            self.cells.insert(n, &x);
                            self.state.positions.push(&x);
                            self.state.velocities.push(&v);
                            self.state.cached_energy += de;
                            true
                        } else {
                            false
                        }
                    }
                    _ => false,
                }
            }
            1 if n > 0 => {
                let k = self.rng.gen_range(0..n);
                let x = self.state.positions.point(k).to_vec();
                let e = self.local_energy(&x, Some(k)).expect("current state is allowed");
                let a = acceptance(model, &self.state, &Move::Delete { k }, -e);
                if self.rng.gen::<f64>() < a {
                    self.cells.swap_remove(k);
                    self.state.positions.swap_remove(k);
                    self.state.velocities.swap_remove(k);
                    self.state.cached_energy -= e;
                    true
                } else {
                    false
                }
            }
            2 if n > 0 => {
                let k = self.rng.gen_range(0..n);
                let h = TRANSLATE_STEP * model.eps();
                let old = self.state.positions.point(k).to_vec();
                let x: Vec<f64> = old.iter().map(|&c| c + self.rng.gen_range(-h..h)).collect();
                if model.rho(&x) == 0.0 {
                    false
                } else {
                    match self.local_energy(&x, Some(k)) {
                        Some(e_new) => {
                            let e_old = self.local_energy(&old, Some(k)).expect("current state is allowed");
                            let de = e_new - e_old;
                            let mv = Move::Translate { k, x };
                            let a = acceptance(model, &self.state, &mv, de);
                            if self.rng.gen::<f64>() < a {
                                let Move::Translate { x, .. } = mv else { unreachable!() };
                                self.cells.relocate(k, &x);
                                self.state.positions.point_mut(k).copy_from_slice(&x);
                                self.state.cached_energy += de;
                                true
                            } else {
                                false
                            }
                        }
                        None => false,
                    }
                }
            }
            _ => false,
        };
        if accepted {
            self.stats.accepted[kind] += 1;
            self.window.1 += 1;
        }
        self.window.0 += 1;
        if self.window.0 == ACCEPT_WINDOW {
            if (self.window.1 as f64) < 1e-3 * ACCEPT_WINDOW as f64 {
                warn!("acceptance below 0.1% over the last {ACCEPT_WINDOW} moves; eps may be too large for the box");
            }
            self.window = (0, 0);
        }
        if self.moves % AUDIT_EVERY == 0 {
            self.audit();
        }
    }

    /// Recomputes the total energy, records the relative drift of the cache
    /// and resets it.
    pub fn audit(&mut self) -> f64 {
        let exact = total_energy(self.model, &self.state.positions).expect("chain state is allowed");
        let drift = (self.state.cached_energy - exact).abs() / exact.abs().max(1.0);
        self.max_drift = self.max_drift.max(drift);
        self.state.cached_energy = exact;
        drift
    }

    /// Move attempts per sweep, `max(1, ceil(mu))`, the ideal-gas occupancy.
    /// Fixed so that observation times do not depend on the state.
    pub fn moves_per_sweep(&self) -> u64 {
        self.model.mu().ceil().max(1.0) as u64
    }

    pub fn sweep(&mut self) {
        for _ in 0..self.moves_per_sweep() {
            self.step();
        }
        self.sweeps += 1;
    }
}

/// Counts of ordered `j`-tuples of particles per product bin of a regular
/// grid on the box, kept per batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorGrid {
    pub j: usize,
    pub bins_per_axis: usize,
    pub domain: BoxDomain,
    /// `batch * cells + cell`.
    pub counts: Vec<u64>,
    pub batch_sweeps: Vec<u64>,
}

impl EstimatorGrid {
    pub fn new(j: usize, bins_per_axis: usize, domain: BoxDomain, batches: usize) -> Result<Self> {
        if j == 0 || bins_per_axis == 0 || batches == 0 {
            return Err(Error::invalid("estimator grid needs j, bins and batches >= 1"));
        }
        let sites = (bins_per_axis as u128).pow(domain.dim() as u32);
        let cells = sites.checked_pow(j as u32).unwrap_or(u128::MAX);
        if cells > MAX_GRID_CELLS as u128 {
            return Err(Error::Guard {
                what: "estimator grid cells",
                requested: usize::try_from(cells).unwrap_or(usize::MAX),
                limit: MAX_GRID_CELLS,
                estimate: Some(cells),
            });
        }
        Ok(EstimatorGrid {
            j,
            bins_per_axis,
            domain,
            counts: vec![0; batches * cells as usize],
            batch_sweeps: vec![0; batches],
        })
    }

    pub fn batches(&self) -> usize {
        self.batch_sweeps.len()
    }

    pub fn sites(&self) -> usize {
        self.bins_per_axis.pow(self.domain.dim() as u32)
    }

    pub fn cells(&self) -> usize {
        self.sites().pow(self.j as u32)
    }

    pub fn sweeps(&self) -> u64 {
        self.batch_sweeps.iter().sum()
    }

    pub fn site_volume(&self) -> f64 {
        self.domain.volume() / self.sites() as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.site_volume().powi(self.j as i32)
    }

    pub fn site_of(&self, x: &[f64]) -> usize {
        let b = self.bins_per_axis;
        (0..x.len()).fold(0, |acc, c| {
            let w = (self.domain.hi[c] - self.domain.lo[c]) / b as f64;
            let i = (((x[c] - self.domain.lo[c]) / w).floor().max(0.0) as usize).min(b - 1);
            acc * b + i
        })
    }

    /// Corner coordinates `(lo, hi)` of a site bin.
    pub fn site_bounds(&self, site: usize) -> (Vec<f64>, Vec<f64>) {
        let d = self.domain.dim();
        let b = self.bins_per_axis;
        let mut lo = vec![0.0; d];
        let mut hi = vec![0.0; d];
        let mut rest = site;
        for c in (0..d).rev() {
            let i = rest % b;
            rest /= b;
            let w = (self.domain.hi[c] - self.domain.lo[c]) / b as f64;
            lo[c] = self.domain.lo[c] + i as f64 * w;
            hi[c] = lo[c] + w;
        }
        (lo, hi)
    }

    /// Cell index of a tuple of sites.
    pub fn cell_of(&self, sites: &[usize]) -> usize {
        sites.iter().fold(0, |acc, s| acc * self.sites() + s)
    }

    pub fn sites_of(&self, cell: usize) -> Vec<usize> {
        let s = self.sites();
        let mut out = vec![0; self.j];
        let mut rest = cell;
        for k in (0..self.j).rev() {
            out[k] = rest % s;
            rest /= s;
        }
        out
    }

    /// Adds one sweep's ordered tuples of distinct particles at the given sites.
    pub fn record(&mut self, batch: usize, sites: &[usize]) {
        let base = batch * self.cells();
        let n = sites.len();
        let s = self.sites();
        let mut idx = vec![0usize; self.j];
        // odometer over ordered tuples of distinct particles
        fn rec(g: &mut EstimatorGrid, base: usize, sites: &[usize], idx: &mut [usize], depth: usize, n: usize, s: usize, acc: usize) {
            if depth == idx.len() {
                g.counts[base + acc] += 1;
                return;
            }
            for p in 0..n {
                if idx[..depth].contains(&p) {
                    continue;
                }
                idx[depth] = p;
                rec(g, base, sites, idx, depth + 1, n, s, acc * s + sites[p]);
            }
        }
        if n >= self.j {
            rec(self, base, sites, &mut idx, 0, n, s, 0);
        }
        self.batch_sweeps[batch] += 1;
    }

    /// Adds the counts of a grid with the same layout.
    pub fn merge(&mut self, other: &EstimatorGrid) -> Result<()> {
        if self.j != other.j || self.bins_per_axis != other.bins_per_axis || self.domain != other.domain || self.batches() != other.batches() {
            return Err(Error::invalid("estimator grids have different layouts"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.batch_sweeps.iter_mut().zip(&other.batch_sweeps) {
            *a += b;
        }
        Ok(())
    }

    pub fn total_count(&self, cell: usize) -> u64 {
        let c = self.cells();
        (0..self.batches()).map(|b| self.counts[b * c + cell]).sum()
    }

    fn batch_value(&self, batch: usize, cell: usize, mu: f64) -> f64 {
        let sw = self.batch_sweeps[batch] as f64;
        self.counts[batch * self.cells() + cell] as f64 / (sw * self.cell_volume() * mu.powi(self.j as i32))
    }
}

fn batch_mean(values: impl Iterator<Item = f64>) -> Estimate {
    let mut acc = MeanAccumulator::new();
    values.for_each(|v| acc.push(v));
    acc.estimate()
}

/// `rho_j / mu^j` averaged over each cell, with batch-means errors; `None`
/// for cells that were never visited.
pub fn estimate_rho(grid: &EstimatorGrid, mu: f64) -> Vec<Option<Estimate>> {
    (0..grid.cells())
        .map(|cell| {
            if grid.total_count(cell) == 0 {
                return None;
            }
            Some(batch_mean((0..grid.batches()).filter(|&b| grid.batch_sweeps[b] > 0).map(|b| grid.batch_value(b, cell, mu))))
        })
        .collect()
}

/// `rho^T_j / mu^j` on the cells of `grids[j - 1]`, obtained by truncating the
/// per-batch table of all sub-tuple densities (`grids[i]` holds order
/// `i + 1`). `None` when a one-particle bin involved was never visited;
/// unvisited higher-order bins enter as zero density.
pub fn estimate_truncated(grids: &[EstimatorGrid], j: usize, mu: f64) -> Result<Vec<Option<Estimate>>> {
    if j == 0 || grids.len() < j {
        return Err(Error::invalid("truncated estimate needs grids of every order up to j"));
    }
    for (i, g) in grids.iter().take(j).enumerate() {
        if g.j != i + 1 || g.bins_per_axis != grids[0].bins_per_axis || g.batch_sweeps != grids[0].batch_sweeps {
            return Err(Error::invalid("grids must come from one run, ordered by j"));
        }
    }
    let top = &grids[j - 1];
    let mut out = Vec::with_capacity(top.cells());
    for cell in 0..top.cells() {
        let sites = top.sites_of(cell);
        if sites.iter().any(|&s| grids[0].total_count(s) == 0) {
            out.push(None);
            continue;
        }
        let mut acc = MeanAccumulator::new();
        for b in 0..top.batches() {
            if top.batch_sweeps[b] == 0 {
                continue;
            }
            let table = SubsetTable::from_fn(j, |mask| {
                let sub: Vec<usize> = (0..j).filter(|&i| mask >> i & 1 == 1).map(|i| sites[i]).collect();
                let g = &grids[sub.len() - 1];
                g.batch_value(b, g.cell_of(&sub), mu)
            })?;
            acc.push(*truncate(&table).get((1u32 << j) - 1));
        }
        out.push(Some(acc.estimate()));
    }
    Ok(out)
}

/// Run parameters of [`gcmc_run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcmcOptions {
    pub sweeps: u64,
    pub seed: u64,
    /// Independent chains, run concurrently and pooled by batch.
    pub chains: usize,
    pub bins_per_axis: usize,
    /// Highest correlation order recorded.
    pub j_max: usize,
}

/// Pooled output of [`gcmc_run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcmcRun {
    pub options: GcmcOptions,
    pub burn_in: u64,
    /// `grids[i]` counts ordered `(i + 1)`-tuples.
    pub grids: Vec<EstimatorGrid>,
    /// Sweeps observed with `n` particles, indexed by `n`.
    pub number_histogram: Vec<u64>,
    pub mean_n: Estimate,
    pub var_n: Estimate,
    pub stats: MoveStats,
    pub max_drift: f64,
    pub final_states: Vec<Checkpoint>,
}

/// Runs `chains` independent Metropolis chains with burn-in and batch
/// statistics.
pub fn gcmc_run(model: &MCSModel, opts: &GcmcOptions) -> Result<GcmcRun> {
    let burn_in = (opts.sweeps as f64 * BURN_IN_FRACTION).ceil() as u64;
    let measured = opts.sweeps.saturating_sub(burn_in);
    if measured < BATCHES as u64 || opts.chains == 0 {
        return Err(Error::invalid(format!("need at least {} measured sweeps and one chain", BATCHES)));
    }
    if opts.j_max == 0 {
        return Err(Error::invalid("j_max must be at least 1"));
    }
    for j in 1..=opts.j_max {
        EstimatorGrid::new(j, opts.bins_per_axis, model.domain.clone(), BATCHES)?;
    }
    type ChainOut = (Vec<EstimatorGrid>, Vec<u64>, Vec<(f64, f64, f64)>, MoveStats, f64, Checkpoint);
    let outs: Vec<ChainOut> = (0..opts.chains as u64)
        .into_par_iter()
        .map(|c| {
            let mut chain = Chain::new(model, opts.seed, c);
            let mut grids: Vec<EstimatorGrid> = (1..=opts.j_max)
                .map(|j| EstimatorGrid::new(j, opts.bins_per_axis, model.domain.clone(), BATCHES).expect("validated"))
                .collect();
            let mut hist = Vec::new();
            let mut moments = vec![(0.0, 0.0, 0.0); BATCHES];
            for _ in 0..burn_in {
                chain.sweep();
            }
            let mut sites = Vec::new();
            for s in 0..measured {
                chain.sweep();
                let batch = (s as u128 * BATCHES as u128 / measured as u128) as usize;
                let st = chain.state();
                let n = st.len();
                if hist.len() <= n {
                    hist.resize(n + 1, 0);
                }
                hist[n] += 1;
                let m = &mut moments[batch];
                m.0 += 1.0;
                m.1 += n as f64;
                m.2 += (n * n) as f64;
                sites.clear();
                sites.extend((0..n).map(|i| grids[0].site_of(st.positions.point(i))));
                for g in grids.iter_mut() {
                    g.record(batch, &sites);
                }
            }
            chain.audit();
            let stats = chain.stats();
            let drift = chain.max_drift();
            (grids, hist, moments, stats, drift, chain.checkpoint())
        })
        .collect();
    let mut it = outs.into_iter();
    let (mut grids, mut hist, mut moments, mut stats, mut drift, ck) = it.next().expect("one chain");
    let mut finals = vec![ck];
    for (g, h, m, s, d, ck) in it {
        for (a, b) in grids.iter_mut().zip(&g) {
            a.merge(b)?;
        }
        if hist.len() < h.len() {
            hist.resize(h.len(), 0);
        }
        for (a, b) in hist.iter_mut().zip(&h) {
            *a += b;
        }
        for (a, b) in moments.iter_mut().zip(&m) {
            a.0 += b.0;
            a.1 += b.1;
            a.2 += b.2;
        }
        stats.merge(&s);
        drift = drift.max(d);
        finals.push(ck);
    }
    let mean_n = batch_mean(moments.iter().filter(|m| m.0 > 0.0).map(|m| m.1 / m.0));
    let var_n = batch_mean(moments.iter().filter(|m| m.0 > 1.0).map(|m| {
        let mean = m.1 / m.0;
        (m.2 / m.0 - mean * mean) * m.0 / (m.0 - 1.0)
    }));
    Ok(GcmcRun {
        options: opts.clone(),
        burn_in,
        grids,
        number_histogram: hist,
        mean_n,
        var_n,
        stats,
        max_drift: drift,
        final_states: finals,
    })
}

/// Largest particle number handled by the tiny-system oracle.
pub const ORACLE_MAX_PARTICLES: usize = 4;

/// Deterministic reference values for a one-dimensional system with at most
/// `n_max` particles.
#[derive(Debug, Clone)]
pub struct TinyOracle {
    model: MCSModel,
    n_max: usize,
    nodes: usize,
    radii: Vec<f64>,
    /// Partition function with at most `n_max` particles.
    pub z: Estimate,
    /// Weight of the `n_max`-particle sector in `z`.
    pub z_tail: f64,
}

/// Builds the oracle with `nodes` Gauss-Legendre nodes per smooth piece
/// (checked against `nodes + 4`).
pub fn exact_tiny_oracle(model: &MCSModel, n_max: usize, nodes: usize) -> Result<TinyOracle> {
    if model.dim() != 1 {
        return Err(Error::invalid("the tiny-system oracle is one-dimensional"));
    }
    if n_max > ORACLE_MAX_PARTICLES {
        return Err(Error::Guard {
            what: "oracle particle number",
            requested: n_max,
            limit: ORACLE_MAX_PARTICLES,
            estimate: None,
        });
    }
    let len = model.domain.hi[0] - model.domain.lo[0];
    if len > 4.0 * model.eps() * (1.0 + 1e-12) {
        return Err(Error::invalid(format!("box length {len} exceeds 4 eps")));
    }
    let radii: Vec<f64> = match model.potential.kind() {
        crate::potential::PotentialKind::Tabulated { .. } => {
            return Err(Error::invalid("the tiny-system oracle needs a piecewise-constant potential"));
        }
        _ => model.potential.breakpoints().iter().map(|r| r * model.eps()).collect(),
    };
    if nodes < 2 {
        return Err(Error::invalid("need at least two quadrature nodes"));
    }
    let mut o = TinyOracle {
        model: model.clone(),
        n_max,
        nodes,
        radii,
        z: Estimate::exact(1.0),
        z_tail: 0.0,
    };
    let sectors = o.sectors(&[], n_max)?;
    let value: f64 = sectors.iter().map(|s| s.value).sum();
    let error: f64 = sectors.iter().map(|s| s.error).sum();
    o.z = Estimate { value, error };
    o.z_tail = sectors.last().map_or(0.0, |s| s.value.abs());
    Ok(o)
}

impl TinyOracle {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// `(mu^n / n!) int psi_{j+n}(x, y) rho^n(y) dy` for `n = 0..=m`.
    fn sectors(&self, fixed: &[f64], m: usize) -> Result<Vec<Estimate>> {
        let mu = self.model.mu();
        let mut out = Vec::with_capacity(m + 1);
        for n in 0..=m {
            let a = self.ordered_integral(fixed, n, self.nodes);
            let b = self.ordered_integral(fixed, n, self.nodes + 4);
            let err = (a - b).abs();
            if err > 1e-8 * b.abs().max(1e-300) && err > 1e-14 {
                return Err(Error::Quadrature { achieved: err, requested: 1e-8 * b.abs() });
            }
            // ordered integration covers one of n! orderings
            out.push(Estimate {
                value: b * mu.powi(n as i32),
                error: (err + 4.0 * f64::EPSILON * b.abs()) * mu.powi(n as i32),
            });
        }
        Ok(out)
    }

    fn psi(&self, pts: &[f64]) -> f64 {
        let eps = self.model.eps();
        let mut e = 0.0;
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                let phi = self.model.potential.evaluate((pts[a] - pts[b]).abs() / eps);
                if phi == f64::INFINITY {
                    return 0.0;
                }
                e += phi;
            }
        }
        (-self.model.params.beta * e).exp()
    }

    /// Signed sums of up to `k` discontinuity radii.
    fn shifts(&self, k: usize) -> Vec<f64> {
        let mut set = vec![0.0];
        for _ in 0..k {
            let mut next = set.clone();
            for s in &set {
                for r in &self.radii {
                    next.push(s + r);
                    next.push(s - r);
                }
            }
            next.sort_by(f64::total_cmp);
            next.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
            set = next;
        }
        set
    }

    /// `int_{y_1 < .. < y_n} psi(fixed, y) prod rho(y_i) dy`.
    fn ordered_integral(&self, fixed: &[f64], n: usize, nodes: usize) -> f64 {
        let (xs, ws) = gauss_legendre(nodes);
        let shifts: Vec<Vec<f64>> = (0..=n).map(|k| self.shifts(k)).collect();
        let mut pts = fixed.to_vec();
        let lo = self.model.domain.lo[0];
        self.nested(&mut pts, n, lo, &xs, &ws, &shifts)
    }

    fn nested(&self, pts: &mut Vec<f64>, remaining: usize, lower: f64, xs: &[f64], ws: &[f64], shifts: &[Vec<f64>]) -> f64 {
        if remaining == 0 {
            return self.psi(pts);
        }
        let (a, b) = (self.model.domain.lo[0], self.model.domain.hi[0]);
        let mut cuts = vec![lower, b];
        for c in pts.iter().copied().chain([a, b]) {
            for s in &shifts[remaining] {
                let p = c + s;
                if p > lower && p < b {
                    cuts.push(p);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|p, q| (*p - *q).abs() < 1e-13 * (b - a));
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (p, q) = (w[0], w[1]);
            let half = 0.5 * (q - p);
            let mid = 0.5 * (q + p);
            for (t, wt) in xs.iter().zip(ws) {
                let y = mid + half * t;
                let r = self.model.rho(&[y]);
                if r == 0.0 {
                    continue;
                }
                pts.push(y);
                total += wt * half * r * self.nested(pts, remaining - 1, y, xs, ws, shifts);
                pts.pop();
            }
        }
        total
    }

    /// `rho_j / mu^j` at `xs` in the system with at most `n_max` particles.
    /// The error adds the quadrature error and the weight of the last sector
    /// as a proxy for the omitted larger particle numbers.
    pub fn rho(&self, xs: &[f64]) -> Result<Estimate> {
        let j = xs.len();
        if j == 0 || j > self.n_max {
            return Err(Error::invalid("need 1 <= j <= n_max points"));
        }
        let f: f64 = xs.iter().map(|&x| self.model.rho(&[x])).product();
        if f == 0.0 {
            return Ok(Estimate::exact(0.0));
        }
        let sectors = self.sectors(xs, self.n_max - j)?;
        let num: f64 = sectors.iter().map(|s| s.value).sum();
        let num_err: f64 = sectors.iter().map(|s| s.error).sum();
        let tail = sectors.last().map_or(0.0, |s| s.value.abs());
        let value = f * num / self.z.value;
        let rel = (num_err + tail) / num.abs().max(f64::MIN_POSITIVE) + (self.z.error + self.z_tail) / self.z.value;
        Ok(Estimate {
            value,
            error: if num == 0.0 { f * (num_err + tail) / self.z.value } else { value.abs() * rel },
        })
    }

    /// `rho^T_j / mu^j` at `xs`, by truncating the table of sub-tuple
    /// densities; errors add linearly.
    pub fn truncated(&self, xs: &[f64]) -> Result<Estimate> {
        let j = xs.len();
        let mut vals = SubsetTable::from_fn(j, |_| 0.0)?;
        let mut errs = SubsetTable::from_fn(j, |_| 0.0)?;
        for mask in 1u32..1 << j {
            let sub: Vec<f64> = (0..j).filter(|&i| mask >> i & 1 == 1).map(|i| xs[i]).collect();
            let e = self.rho(&sub)?;
            vals.set(mask, e.value);
            errs.set(mask, e.error);
        }
        let t = truncate(&vals);
        // linear propagation: perturb each entry by its error with the sign
        // that maximizes the change in the full-set cumulant
        let full = (1u32 << j) - 1;
        let mut err = 0.0;
        for mask in 1u32..=full {
            let mut p = vals.clone();
            p.set(mask, vals.get(mask) + errs.get(mask));
            err += (truncate(&p).get(full) - t.get(full)).abs();
        }
        Ok(Estimate { value: *t.get(full), error: err })
    }
}
