//! Monte Carlo evaluation of the cluster expansion of a maximally chaotic
//! state: the log-partition series, (truncated) correlation series, tree
//! cluster integrals, and both sides of the pointwise decay bound on
//! truncated correlations.
//!
//! Integrals over free points use importance sampling adapted to the
//! support of the Ursell functions: a configuration contributes only if its
//! Mayer graph is connected, so each new point is drawn uniformly in the
//! interaction ball of an earlier point.

use log::warn;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cumulants::{enumerate_partitions, BlockMode};
use crate::estimate::{Estimate, MeanAccumulator, SeriesEstimate};
use crate::geometry::{steiner_length, Effort, LengthBracket};
use crate::graphs::Graph;
use crate::points::{distance, PhaseConfiguration, PointSet};
use crate::potential::{c_beta, unit_ball_volume, ModelParams, PairPotential};
use crate::quadrature::piecewise_simpson;
use crate::rng::{stream_id, substream, Rng};
use crate::ursell::{ursell_value, UrsellContext};
use crate::{Error, Result};

/// Largest number of points entering one Ursell function in a series.
pub const MAX_SERIES_POINTS: usize = 8;
/// Largest number of points entering one Boltzmann factor in the ratio route.
pub const MAX_PSI_POINTS: usize = 12;
const BATCH: u64 = 1024;

const TAG_LOGZ: u64 = 1;
const TAG_TRUNC: u64 = 2;
const TAG_CLUSTER: u64 = 3;
const TAG_PSI: u64 = 4;
const TAG_NORM: u64 = 5;

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::invalid("box needs lo < hi in every coordinate"));
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn cube(dim: usize, side: f64) -> Result<Self> {
        BoxDomain::new(vec![0.0; dim], vec![side; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| *a <= *x && *x < *b)
    }

    pub fn sample(&self, rng: &mut Rng, out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = rng.gen_range(self.lo[c]..self.hi[c]);
        }
    }
}

/// Spatial one-particle density on the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Density {
    Uniform,
    /// `exp(-|x - center|^2 / (2 width^2))`, restricted to the box and
    /// normalized.
    GaussianBump { center: Vec<f64>, width: f64 },
}

/// Velocity factor of `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VelocityLaw {
    /// Velocities are not resolved; `f` is the spatial density.
    Marginal,
    /// `(beta / 2 pi)^{d/2} exp(-beta |v|^2 / 2)`.
    Maxwellian { beta: f64 },
}

impl VelocityLaw {
    pub fn density(&self, v: &[f64]) -> f64 {
        match *self {
            VelocityLaw::Marginal => 1.0,
            VelocityLaw::Maxwellian { beta } => {
                let d = v.len() as f64;
                let v2: f64 = v.iter().map(|x| x * x).sum();
                (beta / (2.0 * std::f64::consts::PI)).powf(d / 2.0) * (-0.5 * beta * v2).exp()
            }
        }
    }

    pub fn sample(&self, rng: &mut Rng, out: &mut [f64]) {
        match *self {
            VelocityLaw::Marginal => out.iter_mut().for_each(|o| *o = 0.0),
            VelocityLaw::Maxwellian { beta } => {
                let s = 1.0 / beta.sqrt();
                for o in out.iter_mut() {
                    *o = s * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
    }
}

/// Maximally chaotic state: potential, scale parameters and one-particle
/// density `f(x, v) = rho(x) M(v)` on a box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MCSModel {
    pub potential: PairPotential<f64>,
    pub params: ModelParams<f64>,
    pub domain: BoxDomain,
    pub density: Density,
    pub velocity: VelocityLaw,
    norm: f64,
    rho_bar: f64,
    c_beta: f64,
}

impl MCSModel {
    pub fn new(
        potential: PairPotential<f64>,
        params: ModelParams<f64>,
        domain: BoxDomain,
        density: Density,
        velocity: VelocityLaw,
    ) -> Result<Self> {
        if domain.dim() != params.dim {
            return Err(Error::invalid("box dimension differs from model dimension"));
        }
        let (norm, rho_bar) = match &density {
            Density::Uniform => {
                let v = domain.volume();
                (v, 1.0 / v)
            }
            Density::GaussianBump { center, width } => {
                if center.len() != params.dim || !(*width > 0.0) {
                    return Err(Error::invalid("gaussian bump needs a center in the model dimension and width > 0"));
                }
                let mut norm = 1.0;
                let mut peak = 1.0;
                for c in 0..params.dim {
                    let (a, b, m) = (domain.lo[c], domain.hi[c], center[c]);
                    let g = |x: f64| (-(x - m) * (x - m) / (2.0 * width * width)).exp();
                    norm *= piecewise_simpson(&g, a, b, &[m], 1e-13 * (b - a))?.value;
                    peak *= g(m.clamp(a, b));
                }
                (norm, peak / norm)
            }
        };
        if let VelocityLaw::Maxwellian { beta } = velocity {
            if !(beta > 0.0) {
                return Err(Error::invalid("Maxwellian needs beta > 0"));
            }
        }
        let c_beta = c_beta(&potential, params.beta, params.dim)?.value;
        Ok(MCSModel {
            potential,
            params,
            domain,
            density,
            velocity,
            norm,
            rho_bar,
            c_beta,
        })
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        MCSModel {
            params: self.params.with_eps(eps),
            ..self.clone()
        }
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn mu(&self) -> f64 {
        self.params.mu_eps()
    }

    pub fn eps(&self) -> f64 {
        self.params.eps
    }

    /// Spatial density; zero outside the box.
    pub fn rho(&self, x: &[f64]) -> f64 {
        if !self.domain.contains(x) {
            return 0.0;
        }
        match &self.density {
            Density::Uniform => 1.0 / self.norm,
            Density::GaussianBump { center, width } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                (-r2 / (2.0 * width * width)).exp() / self.norm
            }
        }
    }

    pub fn rho_bar(&self) -> f64 {
        self.rho_bar
    }

    pub fn c_beta(&self) -> f64 {
        self.c_beta
    }

    /// `f(z) = rho(x) M(v)`; without a velocity the spatial marginal.
    pub fn f(&self, x: &[f64], v: Option<&[f64]>) -> f64 {
        self.rho(x) * v.map_or(1.0, |v| self.velocity.density(v))
    }

    /// `f^{(x)j}(z_j)`.
    pub fn f_product(&self, z: &PhaseConfiguration<f64>) -> f64 {
        (0..z.len())
            .map(|i| self.f(z.positions.point(i), z.velocities.as_ref().map(|v| v.point(i))))
            .product()
    }

    /// Distance below which the rescaled Mayer function can be nonzero.
    pub fn interaction_radius(&self) -> f64 {
        self.params.eps * self.potential.range()
    }

    /// `1 / (rho_bar C_beta e^{2 beta B + 1})`, the convergence radius in `eps`.
    pub fn lemma_radius(&self) -> f64 {
        let b = self.potential.declared_b();
        1.0 / (self.rho_bar * self.c_beta * (2.0 * self.params.beta * b + 1.0).exp())
    }

    /// Monte Carlo check of `int rho = 1` and of `rho <= rho_bar` on the
    /// sampled points.
    pub fn check_density(&self, samples: u64, seed: u64) -> (Estimate, bool) {
        let mut rng = substream(seed, stream_id(&[TAG_NORM]));
        let vol = self.domain.volume();
        let mut acc = MeanAccumulator::new();
        let mut bounded = true;
        let mut x = vec![0.0; self.dim()];
        for _ in 0..samples {
            self.domain.sample(&mut rng, &mut x);
            let r = self.rho(&x);
            bounded &= r <= self.rho_bar * (1.0 + 1e-12);
            acc.push(r * vol);
        }
        (acc.estimate(), bounded)
    }

    pub(crate) fn sample_in_ball(&self, center: &[f64], radius: f64, rng: &mut Rng, out: &mut [f64]) {
        loop {
            let mut r2 = 0.0;
            for (o, c) in out.iter_mut().zip(center) {
                let u: f64 = rng.gen_range(-1.0..1.0);
                r2 += u * u;
                *o = c + radius * u;
            }
            if r2 < 1.0 {
                return;
            }
        }
    }
}

/// `eps0 = 1 / (2 rho_bar C_beta e^{2 beta B + 1})` and the convergence
/// radius `2 eps0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonZero {
    pub eps0: f64,
    pub lemma_radius: f64,
}

pub fn epsilon_zero(model: &MCSModel) -> EpsilonZero {
    let r = model.lemma_radius();
    EpsilonZero {
        eps0: r / 2.0,
        lemma_radius: r,
    }
}

/// Sample count and seed of a Monte Carlo evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McOptions {
    pub samples: u64,
    pub seed: u64,
}

fn run_batches<F>(opts: McOptions, tag: &[u64], f: F) -> Estimate
where
    F: Fn(&mut Rng, u64) -> MeanAccumulator + Sync,
{
    let nb = opts.samples.div_ceil(BATCH).max(1);
    let parts: Vec<MeanAccumulator> = (0..nb)
        .into_par_iter()
        .map(|b| {
            let mut key = tag.to_vec();
            key.push(b);
            let mut rng = substream(opts.seed, stream_id(&key));
            let count = BATCH.min(opts.samples - b * BATCH.min(opts.samples));
            f(&mut rng, count)
        })
        .collect();
    let mut total = MeanAccumulator::new();
    for p in &parts {
        total.merge(p);
    }
    total.estimate()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `int u_{j+n}(x_j, y_1..y_n) rho(y_1)..rho(y_n) dy` by random-attachment
/// importance sampling (`j = 0`: the first point is drawn uniformly in the
/// box). Exact zero when no sample has a connected Mayer graph.
pub fn ursell_integral(model: &MCSModel, anchors: &PointSet<f64>, n: usize, opts: McOptions, tag: &[u64]) -> Result<Estimate> {
    let j = anchors.len();
    let d = model.dim();
    if j + n > MAX_SERIES_POINTS {
        return Err(Error::Guard {
            what: "series order (points per Ursell function)",
            requested: j + n,
            limit: MAX_SERIES_POINTS,
            estimate: None,
        });
    }
    if anchors.dim() != d {
        return Err(Error::invalid("anchor dimension differs from model dimension"));
    }
    if n == 0 {
        let ctx = UrsellContext::new(model.potential.clone(), model.params, anchors)?;
        let labels: Vec<usize> = (0..j).collect();
        return Ok(Estimate::exact(ursell_value(&ctx, &labels)?));
    }
    if j == 0 && n == 1 {
        return Ok(Estimate::exact(1.0));
    }
    let radius = model.interaction_radius();
    let vball = unit_ball_volume::<f64>(d) * radius.powi(d as i32);
    let vbox = model.domain.volume();
    // order-independent part of the proposal density, inverted
    let mut inv_k = 1.0;
    for k in 1..=n {
        if j == 0 && k == 1 {
            inv_k *= vbox;
        } else {
            inv_k *= (j + k - 1) as f64 * vball;
        }
    }
    let nfact = factorial(n);
    let labels: Vec<usize> = (0..j + n).collect();
    let est = run_batches(opts, tag, |rng, count| {
        let mut acc = MeanAccumulator::new();
        let mut pts = anchors.clone();
        let mut y = vec![0.0; d];
        for _ in 0..count {
            pts.truncate(j);
            for k in 0..n {
                if j == 0 && k == 0 {
                    model.domain.sample(rng, &mut y);
                } else {
                    let parent = rng.gen_range(0..j + k);
                    let c = pts.point(parent).to_vec();
                    model.sample_in_ball(&c, radius, rng, &mut y);
                }
                pts.push(&y);
            }
            let mut w = 1.0;
            for k in 0..n {
                w *= model.rho(pts.point(j + k));
                if w == 0.0 {
                    break;
                }
            }
            if w == 0.0 {
                acc.push(0.0);
                continue;
            }
            let ctx = UrsellContext::new(model.potential.clone(), model.params, &pts).expect("dimensions checked");
            let u = ursell_value(&ctx, &labels).expect("guarded size");
            if u == 0.0 {
                acc.push(0.0);
                continue;
            }
            let orderings = attachment_orderings(&pts, j, n, radius);
            acc.push(u * w * nfact * inv_k / orderings);
        }
        acc
    });
    Ok(est)
}

/// Sum over orderings of the free points of the product of attachment
/// counts (number of earlier points within `radius`); with no anchors the
/// first point counts once.
fn attachment_orderings(pts: &PointSet<f64>, j: usize, n: usize, radius: f64) -> f64 {
    let mut anchor_count = vec![0u32; n];
    let mut free_adj = vec![0u32; n];
    for a in 0..n {
        let pa = pts.point(j + a);
        anchor_count[a] = (0..j).filter(|&i| distance(pts.point(i), pa) < radius).count() as u32;
        for b in 0..n {
            if a != b && distance(pts.point(j + b), pa) < radius {
                free_adj[a] |= 1 << b;
            }
        }
    }
    let full = (1usize << n) - 1;
    let mut dp = vec![0.0f64; full + 1];
    dp[0] = 1.0;
    for s in 0..full {
        if dp[s] == 0.0 {
            continue;
        }
        for y in 0..n {
            if s >> y & 1 == 1 {
                continue;
            }
            let c = if j == 0 && s == 0 {
                1
            } else {
                anchor_count[y] + (free_adj[y] & s as u32).count_ones()
            };
            if c > 0 {
                dp[s | 1 << y] += dp[s] * c as f64;
            }
        }
    }
    dp[full]
}

/// `log Z = mu sum_{m <= m_max} (mu^{m-1}/m!) int u_m d rho^m`, term `m`
/// stored at index `m - 1`.
pub fn log_partition(model: &MCSModel, m_max: usize, opts: McOptions) -> Result<SeriesEstimate> {
    if m_max == 0 || m_max > MAX_SERIES_POINTS {
        return Err(Error::Guard {
            what: "log-partition order",
            requested: m_max,
            limit: MAX_SERIES_POINTS,
            estimate: None,
        });
    }
    if model.eps() >= model.lemma_radius() {
        warn!(
            "eps = {} is outside the convergence radius {}; terms need not decay",
            model.eps(),
            model.lemma_radius()
        );
    }
    let mu = model.mu();
    let empty = PointSet::new(model.dim());
    let mut terms = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        let i = ursell_integral(model, &empty, m, opts, &[TAG_LOGZ, m as u64])?;
        terms.push(i.scale(mu.powi(m as i32) / factorial(m)));
    }
    Ok(SeriesEstimate::from_terms(terms, opts.samples))
}

/// `rho^T_j / mu^j = f^{(x)j}(z_j) sum_{n <= n_max} (mu^n/n!) int u_{j+n} d rho^n`.
pub fn truncated_correlation(model: &MCSModel, z: &PhaseConfiguration<f64>, n_max: usize, opts: McOptions) -> Result<SeriesEstimate> {
    truncated_with_tag(model, z, n_max, opts, 0)
}

fn truncated_with_tag(model: &MCSModel, z: &PhaseConfiguration<f64>, n_max: usize, opts: McOptions, subset: u64) -> Result<SeriesEstimate> {
    let j = z.len();
    if j == 0 {
        return Err(Error::invalid("truncated correlation needs at least one point"));
    }
    if j + n_max > MAX_SERIES_POINTS {
        return Err(Error::Guard {
            what: "truncated-correlation order j + n_max",
            requested: j + n_max,
            limit: MAX_SERIES_POINTS,
            estimate: None,
        });
    }
    let fj = model.f_product(z);
    let mu = model.mu();
    let mut terms = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if fj == 0.0 {
            terms.push(Estimate::exact(0.0));
            continue;
        }
        let i = ursell_integral(model, &z.positions, n, opts, &[TAG_TRUNC, subset, n as u64])?;
        terms.push(i.scale(fj * mu.powi(n as i32) / factorial(n)));
    }
    Ok(SeriesEstimate::from_terms(terms, opts.samples))
}

/// How [`correlation`] is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationRoute {
    /// Sum over set partitions of products of truncated series.
    Cumulant,
    /// Ratio of the Boltzmann-factor series to the partition-function series,
    /// both truncated at `j + n_max` particles; practical only for tiny
    /// systems.
    PsiOverZ,
}

/// `rho_j / mu^j` at `z`.
pub fn correlation(
    model: &MCSModel,
    z: &PhaseConfiguration<f64>,
    n_max: usize,
    opts: McOptions,
    route: CorrelationRoute,
) -> Result<SeriesEstimate> {
    match route {
        CorrelationRoute::Cumulant => correlation_by_cumulants(model, z, n_max, opts),
        CorrelationRoute::PsiOverZ => correlation_by_psi(model, z, n_max, opts),
    }
}

fn select(z: &PhaseConfiguration<f64>, mask: u32) -> PhaseConfiguration<f64> {
    let idx: Vec<usize> = (0..z.len()).filter(|&i| mask >> i & 1 == 1).collect();
    PhaseConfiguration {
        positions: z.positions.select(&idx),
        velocities: z.velocities.as_ref().map(|v| v.select(&idx)),
    }
}

fn convolve(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, x) in a.iter().enumerate() {
        for (k, y) in b.iter().enumerate() {
            if i + k < len {
                out[i + k] += x * y;
            }
        }
    }
    out
}

fn correlation_by_cumulants(model: &MCSModel, z: &PhaseConfiguration<f64>, n_max: usize, opts: McOptions) -> Result<SeriesEstimate> {
    let j = z.len();
    if j == 0 || j > 6 {
        return Err(Error::Guard {
            what: "correlation order j",
            requested: j,
            limit: 6,
            estimate: None,
        });
    }
    let len = n_max + 1;
    let mut series = vec![None; 1 << j];
    for m in 1u32..1 << j {
        series[m as usize] = Some(truncated_with_tag(model, &select(z, m), n_max, opts, m as u64)?);
    }
    let terms_of = |m: u32| series[m as usize].as_ref().unwrap();
    let mut total = vec![0.0; len];
    // derivative of each order of the result with respect to each
    // (subset, order) input term
    let mut grad = vec![vec![vec![0.0; len]; len]; 1 << j];
    let set: Vec<usize> = (0..j).collect();
    for p in enumerate_partitions(&set, BlockMode::NonEmpty)? {
        let mut prod = vec![0.0; len];
        prod[0] = 1.0;
        for &b in &p.blocks {
            prod = convolve(&prod, &terms_of(b).terms, len);
        }
        for (t, v) in total.iter_mut().zip(&prod) {
            *t += v;
        }
        for (bi, &b) in p.blocks.iter().enumerate() {
            let mut others = vec![0.0; len];
            others[0] = 1.0;
            for (ci, &c) in p.blocks.iter().enumerate() {
                if ci != bi {
                    others = convolve(&others, &terms_of(c).terms, len);
                }
            }
            for m in 0..len {
                for n in m..len {
                    grad[b as usize][m][n] += others[n - m];
                }
            }
        }
    }
    let mut stat_var = 0.0;
    let mut term_var = vec![0.0; len];
    for b in 1usize..1 << j {
        let s = terms_of(b as u32);
        for m in 0..len {
            let sig2 = s.term_errors[m] * s.term_errors[m];
            let dtot: f64 = grad[b][m].iter().sum();
            stat_var += dtot * dtot * sig2;
            for n in 0..len {
                term_var[n] += grad[b][m][n] * grad[b][m][n] * sig2;
            }
        }
    }
    let value = total.iter().sum();
    Ok(SeriesEstimate {
        value,
        stat_error: stat_var.sqrt(),
        truncation_error: total.last().map_or(0.0, |t| t.abs()),
        n_max,
        terms: total,
        term_errors: term_var.into_iter().map(f64::sqrt).collect(),
        samples: opts.samples,
    })
}

/// `int psi_{j+n}(x_j, y) d rho^n(y)` by uniform sampling in the box.
fn psi_integral(model: &MCSModel, anchors: &PointSet<f64>, n: usize, opts: McOptions, tag: &[u64]) -> Result<Estimate> {
    let j = anchors.len();
    if j + n > MAX_PSI_POINTS {
        return Err(Error::Guard {
            what: "Boltzmann-factor series order",
            requested: j + n,
            limit: MAX_PSI_POINTS,
            estimate: None,
        });
    }
    let psi = |pts: &PointSet<f64>| crate::potential::boltzmann_psi(&model.potential, &model.params, pts);
    if n == 0 {
        return Ok(Estimate::exact(psi(anchors)));
    }
    let vbox = model.domain.volume();
    let d = model.dim();
    Ok(run_batches(opts, tag, |rng, count| {
        let mut acc = MeanAccumulator::new();
        let mut pts = anchors.clone();
        let mut y = vec![0.0; d];
        for _ in 0..count {
            pts.truncate(j);
            let mut w = 1.0;
            for _ in 0..n {
                model.domain.sample(rng, &mut y);
                w *= model.rho(&y) * vbox;
                pts.push(&y);
            }
            acc.push(if w == 0.0 { 0.0 } else { w * psi(&pts) });
        }
        acc
    }))
}

fn correlation_by_psi(model: &MCSModel, z: &PhaseConfiguration<f64>, n_max: usize, opts: McOptions) -> Result<SeriesEstimate> {
    let j = z.len();
    let mu = model.mu();
    let total = j + n_max;
    let empty = PointSet::new(model.dim());
    let mut zsum = Estimate::exact(0.0);
    for m in 0..=total {
        let t = psi_integral(model, &empty, m, opts, &[TAG_PSI, 0, m as u64])?.scale(mu.powi(m as i32) / factorial(m));
        zsum = Estimate {
            value: zsum.value + t.value,
            error: zsum.error.hypot(t.error),
        };
    }
    let fj = model.f_product(z);
    let mut num = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        num.push(psi_integral(model, &z.positions, n, opts, &[TAG_PSI, 1, n as u64])?.scale(fj * mu.powi(n as i32) / factorial(n)));
    }
    let s = SeriesEstimate::from_terms(num, opts.samples);
    let ratio = s.value / zsum.value;
    let rel = (s.stat_error / s.value.abs().max(f64::MIN_POSITIVE)).hypot(zsum.error / zsum.value);
    let mut out = s.scaled(1.0 / zsum.value);
    out.stat_error = if s.value == 0.0 {
        s.stat_error / zsum.value
    } else {
        ratio.abs() * rel
    };
    Ok(out)
}

/// `int prod_{edges of T} |zeta^eps| d rho(x_{j+1}) .. d rho(x_{j+n})` for a
/// tree `T` on `j + n` labels whose first `j` labels are the anchors.
///
/// Free vertices are placed in breadth-first order from anchor 0, each
/// uniformly in the interaction ball of its tree parent, with weight
/// `rho * ball volume`. Exactly zero when two anchors are farther apart than
/// the number of tree edges between them allows.
pub fn cluster_integral(model: &MCSModel, anchors: &PointSet<f64>, tree: &Graph, opts: McOptions) -> Result<SeriesEstimate> {
    let j = anchors.len();
    let k = tree.k();
    if j == 0 || k < j || !tree.is_tree() {
        return Err(Error::invalid("cluster integral needs a spanning tree over the anchors and free points"));
    }
    let d = model.dim();
    let radius = model.interaction_radius();
    let adj = tree.adjacency();
    // breadth-first order and tree distances from every anchor
    let bfs = |root: usize| {
        let mut dist = vec![usize::MAX; k];
        let mut parent = vec![usize::MAX; k];
        let mut order = vec![root];
        dist[root] = 0;
        let mut h = 0;
        while h < order.len() {
            let v = order[h];
            h += 1;
            let mut nb = adj[v];
            while nb != 0 {
                let w = nb.trailing_zeros() as usize;
                nb &= nb - 1;
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    parent[w] = v;
                    order.push(w);
                }
            }
        }
        (order, parent, dist)
    };
    for a in 0..j {
        let (_, _, dist) = bfs(a);
        for b in a + 1..j {
            if anchors.dist(a, b) >= dist[b] as f64 * radius {
                return Ok(SeriesEstimate::from_terms(vec![Estimate::exact(0.0)], opts.samples));
            }
        }
    }
    let (order, parent, _) = bfs(0);
    let vball = unit_ball_volume::<f64>(d) * radius.powi(d as i32);
    let pot = &model.potential;
    let beta = model.params.beta;
    let eps = model.params.eps;
    let edges: Vec<(usize, usize)> = tree.edges().collect();
    let est = run_batches(opts, &[TAG_CLUSTER, k as u64, tree.mask() as u64], |rng, count| {
        let mut acc = MeanAccumulator::new();
        let mut pos = vec![vec![0.0; d]; k];
        for a in 0..j {
            pos[a] = anchors.point(a).to_vec();
        }
        let mut y = vec![0.0; d];
        for _ in 0..count {
            let mut w = 1.0;
            for &v in &order {
                if v < j {
                    continue;
                }
                let c = pos[parent[v]].clone();
                model.sample_in_ball(&c, radius, rng, &mut y);
                pos[v].copy_from_slice(&y);
                w *= model.rho(&y) * vball;
            }
            if w != 0.0 {
                for &(a, b) in &edges {
                    w *= pot.zeta_scaled(beta, distance(&pos[a], &pos[b]) / eps).abs();
                    if w == 0.0 {
                        break;
                    }
                }
            }
            acc.push(w);
        }
        acc
    });
    Ok(SeriesEstimate::from_terms(vec![est], opts.samples))
}

/// `(1 + e^{2 beta B})^{j-1} (eps^d rho_bar C_beta)^n`.
pub fn cluster_integral_bound(model: &MCSModel, j: usize, n: usize) -> f64 {
    let e2b = (2.0 * model.params.beta * model.potential.declared_b()).exp();
    (1.0 + e2b).powi(j as i32 - 1) * (model.eps().powi(model.dim() as i32) * model.rho_bar() * model.c_beta()).powi(n as i32)
}

/// Result of the grid search for `A'` in
/// `(j+n)^{j+n-2} / n! <= j^{j-2} A'^j (2e)^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct APrimeFit {
    pub a_prime: f64,
    pub grid_step: f64,
    pub j_max: usize,
    pub n_max: usize,
    /// Cell that forces the value.
    pub worst_j: usize,
    pub worst_n: usize,
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

fn a_prime_cell(j: usize, n: usize) -> f64 {
    let jn = (j + n) as f64;
    let lhs = (jn - 2.0) * jn.ln() - ln_factorial(n);
    let rhs_fixed = (j as f64 - 2.0) * (j as f64).ln() + n as f64 * (2.0 * std::f64::consts::E).ln();
    (lhs - rhs_fixed) / j as f64
}

/// Smallest `A'` on the grid `{k * grid_step}` satisfying the factorial bound
/// on every cell `1 <= j <= j_max`, `0 <= n <= n_max` (log domain).
pub fn fit_a_prime(j_max: usize, n_max: usize) -> Result<APrimeFit> {
    const GRID_STEP: f64 = 1e-3;
    if j_max == 0 || j_max > 40 || n_max > 40 {
        return Err(Error::Guard {
            what: "A' search grid",
            requested: j_max.max(n_max),
            limit: 40,
            estimate: None,
        });
    }
    let mut worst = (f64::NEG_INFINITY, 1, 0);
    for j in 1..=j_max {
        for n in 0..=n_max {
            let c = a_prime_cell(j, n);
            if c > worst.0 {
                worst = (c, j, n);
            }
        }
    }
    let mut k = (worst.0.exp() / GRID_STEP).ceil().max(1.0);
    // confirm on the grid point itself, stepping up if rounding bites
    loop {
        let a = k * GRID_STEP;
        let ok = (1..=j_max).all(|j| (0..=n_max).all(|n| a_prime_cell(j, n) <= a.ln()));
        if ok {
            break;
        }
        k += 1.0;
    }
    Ok(APrimeFit {
        a_prime: k * GRID_STEP,
        grid_step: GRID_STEP,
        j_max,
        n_max,
        worst_j: worst.1,
        worst_n: worst.2,
    })
}

/// `A = A' e^{2 beta B} (1 + e^{2 beta B})`.
pub fn a_from_a_prime(a_prime: f64, beta: f64, b: f64) -> f64 {
    let e2b = (2.0 * beta * b).exp();
    a_prime * e2b * (1.0 + e2b)
}

/// Certified lower end of the cluster length used for the bound: exact
/// planar solves for up to four points, the bracket otherwise.
pub fn length_lower(xs: &PointSet<f64>) -> LengthBracket<f64> {
    steiner_length(xs, Effort::ExactSmall)
}

/// Right side of the decay bound,
/// `(A f)^{(x)j} j^{j-2} (eps/eps0)^{(L/eps - j + 1)_+} / (1 - eps/eps0)`.
pub fn theorem_rhs(model: &MCSModel, z: &PhaseConfiguration<f64>, a: f64, eps0: f64) -> Result<f64> {
    Ok(theorem_rhs_parts(model, z, a, eps0)?.0)
}

fn theorem_rhs_parts(model: &MCSModel, z: &PhaseConfiguration<f64>, a: f64, eps0: f64) -> Result<(f64, f64, f64)> {
    let eps = model.eps();
    if eps >= eps0 {
        return Err(Error::invalid(format!("eps = {eps} is not below eps0 = {eps0}")));
    }
    let j = z.len();
    let l = length_lower(&z.positions).lower;
    let exponent = (l / eps - j as f64 + 1.0).max(0.0);
    let ratio = eps / eps0;
    let jf = j as f64;
    let rhs = a.powi(j as i32) * model.f_product(z) * jf.powf(jf - 2.0) * ratio.powf(exponent) / (1.0 - ratio);
    Ok((rhs, l, exponent))
}

/// One configuration of a decay-bound check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremRow {
    pub j: usize,
    pub value: f64,
    pub stat_error: f64,
    /// `|value| + 2 stat_error`.
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
    pub length_lower: f64,
    pub exponent: f64,
    pub holds: bool,
}

/// Evaluates both sides of the bound on each configuration.
pub fn verify_theorem(
    model: &MCSModel,
    configs: &[PhaseConfiguration<f64>],
    n_max: usize,
    opts: McOptions,
    a: f64,
) -> Result<Vec<TheoremRow>> {
    let eps0 = epsilon_zero(model).eps0;
    let mut rows = Vec::with_capacity(configs.len());
    for (i, z) in configs.iter().enumerate() {
        let opts_i = McOptions {
            samples: opts.samples,
            seed: opts.seed ^ stream_id(&[i as u64]),
        };
        let s = truncated_correlation(model, z, n_max, opts_i)?;
        let (rhs, l, exponent) = theorem_rhs_parts(model, z, a, eps0)?;
        let lhs = s.value.abs() + 2.0 * s.stat_error;
        rows.push(TheoremRow {
            j: z.len(),
            value: s.value,
            stat_error: s.stat_error,
            lhs,
            rhs,
            margin: rhs - lhs,
            length_lower: l,
            exponent,
            holds: lhs <= rhs,
        });
    }
    Ok(rows)
}
