//! Radial pair potentials, their Mayer functions and Boltzmann factors, and
//! the two structural constants used throughout the expansion: the stability
//! constant `B` and the integral `C_beta` of the Mayer function.
//!
//! Potentials are given in rescaled units: the physical interaction between
//! particles at `x` and `y` is `phi(|x - y| / eps)`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::points::{distance, PointSet};
use crate::quadrature::{piecewise_simpson, Quadrature};
use crate::{Error, Result, Scalar};

/// Shape of a radial pair potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PotentialKind<S> {
    /// `phi == 0`.
    Ideal,
    /// `+inf` for `r < r0`, zero beyond.
    HardSphere { r0: S },
    /// `+inf` for `r < r0`, `-depth` for `r0 <= r < r0 + well_width`, zero
    /// beyond.
    SquareWell { r0: S, well_width: S, depth: S },
    /// Linear interpolation of `(radius, value)` samples, clamped to the last
    /// sample up to `range`. Values may be `+inf` (hard core).
    Tabulated { radii: Vec<S>, values: Vec<S> },
}

/// A radial pair interaction with finite range and a declared stability
/// constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPotential<S> {
    kind: PotentialKind<S>,
    declared_b: S,
    range: S,
}

impl<S: Scalar> PairPotential<S> {
    pub fn ideal() -> Self {
        PairPotential {
            kind: PotentialKind::Ideal,
            declared_b: S::zero(),
            range: S::lit(0.5),
        }
    }

    /// Hard spheres of core radius `r0`; the range is `r0` and `B = 0`.
    pub fn hard_sphere(r0: S) -> Result<Self> {
        if !(r0 > S::zero()) || !r0.is_finite() {
            return Err(Error::invalid("hard-sphere core radius must be positive"));
        }
        Ok(PairPotential {
            kind: PotentialKind::HardSphere { r0 },
            declared_b: S::zero(),
            range: r0,
        })
    }

    pub fn square_well(r0: S, well_width: S, depth: S, declared_b: S) -> Result<Self> {
        if !(r0 >= S::zero() && well_width > S::zero() && depth > S::zero()) {
            return Err(Error::invalid(
                "square well needs r0 >= 0, well_width > 0 and depth > 0",
            ));
        }
        if !(declared_b >= S::zero()) {
            return Err(Error::invalid("stability constant B must be nonnegative"));
        }
        Ok(PairPotential {
            kind: PotentialKind::SquareWell {
                r0,
                well_width,
                depth,
            },
            declared_b,
            range: r0 + well_width,
        })
    }

    pub fn tabulated(radii: Vec<S>, values: Vec<S>, range: S, declared_b: S) -> Result<Self> {
        if radii.is_empty() || radii.len() != values.len() {
            return Err(Error::invalid(
                "tabulated potential needs matching, nonempty radius and value columns",
            ));
        }
        if radii.windows(2).any(|w| !(w[0] < w[1])) || radii[0] < S::zero() {
            return Err(Error::invalid(
                "tabulated radii must be nonnegative and strictly ascending",
            ));
        }
        if values.iter().any(|v| v.is_nan() || *v == S::neg_infinity()) {
            return Err(Error::invalid("tabulated values must be bounded below"));
        }
        if !(range > S::zero()) || !range.is_finite() {
            return Err(Error::invalid("range must be positive and finite"));
        }
        if !(declared_b >= S::zero()) {
            return Err(Error::invalid("stability constant B must be nonnegative"));
        }
        let nonnegative = values.iter().all(|v| *v >= S::zero());
        Ok(PairPotential {
            kind: PotentialKind::Tabulated { radii, values },
            declared_b: if nonnegative { S::zero() } else { declared_b },
            range,
        })
    }

    pub fn kind(&self) -> &PotentialKind<S> {
        &self.kind
    }

    pub fn declared_b(&self) -> S {
        self.declared_b
    }

    pub fn range(&self) -> S {
        self.range
    }

    pub fn is_ideal(&self) -> bool {
        matches!(self.kind, PotentialKind::Ideal)
    }

    /// True when `phi >= 0` everywhere, so every Mayer function lies in
    /// `[-1, 0]`.
    pub fn is_nonnegative(&self) -> bool {
        match &self.kind {
            PotentialKind::Ideal | PotentialKind::HardSphere { .. } => true,
            PotentialKind::SquareWell { .. } => false,
            PotentialKind::Tabulated { values, .. } => values.iter().all(|v| *v >= S::zero()),
        }
    }

    /// Short label for reports.
    pub fn label(&self) -> &'static str {
        match self.kind {
            PotentialKind::Ideal => "ideal",
            PotentialKind::HardSphere { .. } => "hard-sphere",
            PotentialKind::SquareWell { .. } => "square-well",
            PotentialKind::Tabulated { .. } => "tabulated",
        }
    }

    /// `phi(r)` for a rescaled distance `r >= 0`, possibly `+inf`.
    pub fn evaluate(&self, r: S) -> S {
        debug_assert!(r >= S::zero());
        if r >= self.range {
            return S::zero();
        }
        match &self.kind {
            PotentialKind::Ideal => S::zero(),
            PotentialKind::HardSphere { r0 } => {
                if r < *r0 {
                    S::infinity()
                } else {
                    S::zero()
                }
            }
            PotentialKind::SquareWell {
                r0,
                well_width,
                depth,
            } => {
                if r < *r0 {
                    S::infinity()
                } else if r < *r0 + *well_width {
                    -*depth
                } else {
                    S::zero()
                }
            }
            PotentialKind::Tabulated { radii, values } => interpolate(radii, values, r),
        }
    }

    /// Mayer function `exp(-beta phi(r)) - 1` at rescaled distance `r`.
    #[inline]
    pub fn zeta_scaled(&self, beta: S, r: S) -> S {
        if r >= self.range {
            return S::zero();
        }
        let phi = self.evaluate(r);
        if phi == S::infinity() {
            -S::one()
        } else {
            (-beta * phi).exp_m1()
        }
    }

    /// Interior radii where `phi` may jump.
    pub fn breakpoints(&self) -> Vec<S> {
        match &self.kind {
            PotentialKind::Ideal => vec![],
            PotentialKind::HardSphere { r0 } => vec![*r0],
            PotentialKind::SquareWell { r0, well_width, .. } => vec![*r0, *r0 + *well_width],
            PotentialKind::Tabulated { radii, .. } => {
                let mut b = radii.clone();
                b.push(self.range);
                b
            }
        }
    }

    /// Lower bound on `phi` (so `-min_energy` bounds the attraction), or zero
    /// for nonnegative potentials.
    pub fn min_energy(&self) -> S {
        match &self.kind {
            PotentialKind::Ideal | PotentialKind::HardSphere { .. } => S::zero(),
            PotentialKind::SquareWell { depth, .. } => -*depth,
            PotentialKind::Tabulated { values, .. } => values
                .iter()
                .copied()
                .fold(S::zero(), |m, v| if v < m { v } else { m }),
        }
    }
}

fn interpolate<S: Scalar>(radii: &[S], values: &[S], r: S) -> S {
    if r <= radii[0] {
        return values[0];
    }
    let last = radii.len() - 1;
    if r >= radii[last] {
        return values[last];
    }
    let i = radii.partition_point(|&x| x <= r) - 1;
    let (r0, r1) = (radii[i], radii[i + 1]);
    let (v0, v1) = (values[i], values[i + 1]);
    if v0.is_infinite() || v1.is_infinite() {
        return S::infinity();
    }
    let t = (r - r0) / (r1 - r0);
    v0 + t * (v1 - v0)
}

/// Inverse temperature, core scale and dimension of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<S> {
    pub beta: S,
    pub eps: S,
    pub dim: usize,
}

impl<S: Scalar> ModelParams<S> {
    pub fn new(beta: S, eps: S, dim: usize) -> Result<Self> {
        if !(beta > S::zero()) || !(eps > S::zero()) || dim == 0 {
            return Err(Error::invalid("need beta > 0, eps > 0 and dim >= 1"));
        }
        Ok(ModelParams { beta, eps, dim })
    }

    /// Boltzmann-Grad activity `eps^-(d-1)`; always recomputed.
    pub fn mu_eps(&self) -> S {
        self.eps.powi(-(self.dim as i32 - 1))
    }

    pub fn with_eps(&self, eps: S) -> Self {
        ModelParams { eps, ..*self }
    }
}

/// `zeta^eps(xi, xk) = exp(-beta phi(|xi - xk| / eps)) - 1`.
pub fn mayer_zeta<S: Scalar>(p: &PairPotential<S>, m: &ModelParams<S>, xi: &[S], xk: &[S]) -> S {
    p.zeta_scaled(m.beta, distance(xi, xk) / m.eps)
}

/// Boltzmann factor `psi_n = prod_{a < a'} exp(-beta phi((x_a - x_a')/eps))`.
pub fn boltzmann_psi<S: Scalar>(p: &PairPotential<S>, m: &ModelParams<S>, xs: &PointSet<S>) -> S {
    let n = xs.len();
    let mut energy = S::zero();
    for a in 0..n {
        for b in a + 1..n {
            let r = xs.dist(a, b) / m.eps;
            let phi = p.evaluate(r);
            if phi == S::infinity() {
                return S::zero();
            }
            energy = energy + phi;
        }
    }
    (-m.beta * energy).exp()
}

/// Surface area of the unit sphere in `R^d`.
pub fn unit_sphere_area<S: Scalar>(dim: usize) -> S {
    // 2 pi^{d/2} / Gamma(d/2)
    let pi = S::PI();
    let mut gamma = if dim % 2 == 0 { S::one() } else { pi.sqrt() };
    let mut x = if dim % 2 == 0 { S::one() } else { S::lit(0.5) };
    let target = S::lit(dim as f64 / 2.0);
    while x < target {
        gamma = gamma * x;
        x = x + S::one();
    }
    S::lit(2.0) * pi.powf(target) / gamma
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume<S: Scalar>(dim: usize) -> S {
    unit_sphere_area::<S>(dim) / S::lit(dim as f64)
}

/// `C_beta = int_{R^d} |exp(-beta phi(x)) - 1| dx` by radial quadrature,
/// split at the potential's breakpoints. Fails if the relative error estimate
/// exceeds `1e-6`.
pub fn c_beta<S: Scalar>(p: &PairPotential<S>, beta: S, dim: usize) -> Result<Quadrature<S>> {
    if p.is_ideal() {
        return Ok(Quadrature {
            value: S::zero(),
            error: S::zero(),
        });
    }
    let area = unit_sphere_area::<S>(dim);
    let range = p.range();
    let f = |r: S| p.zeta_scaled(beta, r).abs() * r.powi(dim as i32 - 1);
    // absolute target relative to the trivial bound max|zeta| * range^d
    let scale = p.zeta_scaled(beta, S::zero()).abs().max(S::one()) * range.powi(dim as i32);
    let tol = scale * S::lit(1e-12f64.max(S::epsilon().to_f64_lossy() * 64.0));
    let q = piecewise_simpson(&f, S::zero(), range, &p.breakpoints(), tol)?;
    let value = q.value * area;
    let error = q.error * area;
    if error > value.abs() * S::lit(1e-6) {
        return Err(Error::Quadrature {
            achieved: (error / value).to_f64_lossy(),
            requested: 1e-6,
        });
    }
    Ok(Quadrature { value, error })
}

/// Outcome of a randomized stability falsification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StabilityVerdict<S> {
    Pass { checked: usize },
    Counterexample { index: usize, n: usize, energy: S, bound: S, points: Vec<Vec<S>> },
}

impl<S> StabilityVerdict<S> {
    pub fn passed(&self) -> bool {
        matches!(self, StabilityVerdict::Pass { .. })
    }
}

/// Total pair energy `sum_{i<k} phi(x_i - x_k)` in unrescaled units.
pub fn pair_energy<S: Scalar>(p: &PairPotential<S>, xs: &PointSet<S>) -> S {
    let mut e = S::zero();
    for a in 0..xs.len() {
        for b in a + 1..xs.len() {
            let phi = p.evaluate(xs.dist(a, b));
            if phi == S::infinity() {
                return S::infinity();
            }
            e = e + phi;
        }
    }
    e
}

/// Checks `sum_{i<k} phi(x_i - x_k) >= -B n` on each configuration and returns
/// the first violation. Not a proof of stability.
pub fn check_stability<S: Scalar>(p: &PairPotential<S>, configs: &[PointSet<S>]) -> StabilityVerdict<S> {
    for (index, xs) in configs.iter().enumerate() {
        let n = xs.len();
        let energy = pair_energy(p, xs);
        let bound = -p.declared_b() * S::lit(n as f64);
        if energy < bound {
            return StabilityVerdict::Counterexample {
                index,
                n,
                energy,
                bound,
                points: xs.rows(),
            };
        }
    }
    StabilityVerdict::Pass {
        checked: configs.len(),
    }
}

/// Random configurations packed densely enough to probe the attractive part:
/// `n` uniform points in a cube whose side scales as `range * n^(1/d)`.
pub fn random_stability_configs<R: Rng>(
    p: &PairPotential<f64>,
    dim: usize,
    trials: usize,
    max_n: usize,
    rng: &mut R,
) -> Vec<PointSet<f64>> {
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let n = rng.gen_range(2..=max_n.max(2));
        let side = p.range() * (n as f64).powf(1.0 / dim as f64) * rng.gen_range(0.3..1.2);
        let mut xs = PointSet::new(dim);
        let mut buf = vec![0.0; dim];
        for _ in 0..n {
            for c in buf.iter_mut() {
                *c = rng.gen_range(0.0..side);
            }
            xs.push(&buf);
        }
        out.push(xs);
    }
    out
}

/// Plain key-value description of a potential, as read from config files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub well_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_path: Option<String>,
}

impl PotentialSpec {
    pub const KEYS: [&'static str; 7] = ["kind", "r0", "well_width", "depth", "B", "range", "table_path"];

    /// Builds the potential. Relative `table_path`s resolve against `base`.
    pub fn build(&self, base: Option<&Path>) -> Result<PairPotential<f64>> {
        let need = |v: Option<f64>, k: &str| {
            v.ok_or_else(|| Error::Config(format!("potential kind `{}` needs `{k}`", self.kind)))
        };
        let p = match self.kind.as_str() {
            "ideal" => PairPotential::ideal(),
            "hard-sphere" => {
                let r0 = need(self.r0, "r0")?;
                if let Some(b) = self.b {
                    if b != 0.0 {
                        return Err(Error::Config("hard spheres have B = 0".into()));
                    }
                }
                let p = PairPotential::hard_sphere(r0)?;
                if let Some(range) = self.range {
                    if range != r0 {
                        return Err(Error::Config(format!(
                            "hard-sphere range must equal r0 ({r0}), got {range}"
                        )));
                    }
                }
                p
            }
            "square-well" => {
                let p = PairPotential::square_well(
                    need(self.r0, "r0")?,
                    need(self.well_width, "well_width")?,
                    need(self.depth, "depth")?,
                    self.b.unwrap_or(0.0),
                )?;
                if let Some(range) = self.range {
                    if (range - p.range()).abs() > 1e-12 {
                        return Err(Error::Config(format!(
                            "square-well range must equal r0 + well_width ({}), got {range}",
                            p.range()
                        )));
                    }
                }
                p
            }
            "tabulated" => {
                let path = self
                    .table_path
                    .as_ref()
                    .ok_or_else(|| Error::Config("tabulated potential needs `table_path`".into()))?;
                let full = match base {
                    Some(b) if Path::new(path).is_relative() => b.join(path),
                    _ => Path::new(path).to_path_buf(),
                };
                let text = std::fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
                let (radii, values) = parse_table(&text)?;
                let range = self.range.unwrap_or(*radii.last().unwrap());
                PairPotential::tabulated(radii, values, range, self.b.unwrap_or(0.0))?
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown potential kind `{other}` (expected ideal, hard-sphere, square-well, tabulated)"
                )))
            }
        };
        Ok(p)
    }
}

/// Parses a two-column `radius value` table; `#` starts a comment and `inf`
/// marks a hard core.
pub fn parse_table(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut radii = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
        if cols.len() != 2 {
            return Err(Error::Config(format!(
                "potential table line {}: expected two columns",
                lineno + 1
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| {
                Error::Config(format!("potential table line {}: bad number `{s}`", lineno + 1))
            })
        };
        radii.push(parse(cols[0])?);
        values.push(parse(cols[1])?);
    }
    Ok((radii, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{E, PI};

    fn sw() -> PairPotential<f64> {
        PairPotential::square_well(0.25, 0.25, 1.0, 0.0).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let hs = PairPotential::hard_sphere(0.5).unwrap();
        assert_eq!(hs.evaluate(0.3), f64::INFINITY);
        assert_eq!(hs.evaluate(0.7), 0.0);
        assert_eq!(sw().evaluate(0.3), -1.0);
        assert_eq!(sw().evaluate(0.1), f64::INFINITY);
        assert_eq!(sw().evaluate(0.5), 0.0);
    }

    #[test]
    fn zeta_examples() {
        let m = ModelParams::new(1.0, 0.1, 2).unwrap();
        let hs = PairPotential::hard_sphere(0.5).unwrap();
        assert_eq!(mayer_zeta(&hs, &m, &[0.0, 0.0], &[0.03, 0.0]), -1.0);
        assert_eq!(mayer_zeta(&hs, &m, &[0.0, 0.0], &[1.0, 0.0]), 0.0);
        let z = mayer_zeta(&sw(), &m, &[0.0, 0.0], &[0.03, 0.0]);
        assert!((z - (E - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn psi_examples() {
        let m = ModelParams::new(1.0, 0.1, 1).unwrap();
        let hs = PairPotential::hard_sphere(0.5).unwrap();
        assert_eq!(boltzmann_psi(&hs, &m, &PointSet::new(1)), 1.0);
        assert_eq!(boltzmann_psi(&hs, &m, &PointSet::on_axis(1, &[0.5])), 1.0);
        assert_eq!(boltzmann_psi(&hs, &m, &PointSet::on_axis(1, &[0.0, 0.03])), 0.0);
        let ideal = PairPotential::ideal();
        assert_eq!(boltzmann_psi(&ideal, &m, &PointSet::on_axis(1, &[0.0, 0.0, 0.01])), 1.0);
    }

    #[test]
    fn c_beta_closed_forms() {
        let hs = PairPotential::hard_sphere(0.5).unwrap();
        let c2 = c_beta(&hs, 1.0, 2).unwrap().value;
        let c3 = c_beta(&hs, 1.0, 3).unwrap().value;
        assert!((c2 - PI / 4.0).abs() < 1e-6 * PI / 4.0);
        assert!((c3 - PI / 6.0).abs() < 1e-6 * PI / 6.0);
        let c1 = c_beta(&sw(), 1.0, 1).unwrap().value;
        let closed = 2.0 * (0.25 + 0.25 * (E - 1.0));
        assert!((c1 - closed).abs() < 1e-9, "{c1} vs {closed}");
        assert!((closed - 1.359141).abs() < 1e-6);
    }

    #[test]
    fn c_beta_square_well_2d_matches_annulus() {
        // |zeta| = 1 on the core disk, e - 1 on the annulus
        let c = c_beta(&sw(), 1.0, 2).unwrap().value;
        let exact = PI * 0.0625 + (E - 1.0) * PI * (0.25 - 0.0625);
        assert!((c - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn c_beta_generic_f32() {
        let hs = PairPotential::<f32>::hard_sphere(0.5).unwrap();
        let c = c_beta(&hs, 1.0f32, 2).unwrap().value;
        assert!((c - std::f32::consts::PI / 4.0).abs() < 1e-5);
    }

    #[test]
    fn unit_sphere_areas() {
        assert!((unit_sphere_area::<f64>(1) - 2.0).abs() < 1e-15);
        assert!((unit_sphere_area::<f64>(2) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area::<f64>(3) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_ball_volume::<f64>(4) - PI * PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn stability_examples() {
        let hs = PairPotential::hard_sphere(0.5).unwrap();
        let mut rng = crate::rng::substream(1, 0);
        let configs = random_stability_configs(&hs, 2, 200, 6, &mut rng);
        assert!(check_stability(&hs, &configs).passed());
        assert!(check_stability(&PairPotential::ideal(), &configs).passed());
        // three points mutually inside the well: energy -3 < 0 = -B n
        let h = 0.3 * 3f64.sqrt() / 2.0;
        let tri = PointSet::from_rows(2, &[[0.0, 0.0], [0.3, 0.0], [0.15, h]]).unwrap();
        match check_stability(&sw(), &[tri]) {
            StabilityVerdict::Counterexample { energy, n, .. } => {
                assert_eq!(n, 3);
                assert!((energy + 3.0).abs() < 1e-12);
            }
            v => panic!("expected counterexample, got {v:?}"),
        }
    }

    #[test]
    fn tabulated_interpolation_and_clamping() {
        let p = PairPotential::tabulated(vec![0.0, 0.1, 0.2], vec![f64::INFINITY, 2.0, -1.0], 0.4, 1.0).unwrap();
        assert_eq!(p.evaluate(0.05), f64::INFINITY);
        assert!((p.evaluate(0.15) - 0.5).abs() < 1e-15);
        assert_eq!(p.evaluate(0.3), -1.0);
        assert_eq!(p.evaluate(0.4), 0.0);
        assert_eq!(p.declared_b(), 1.0);
        assert!(PairPotential::tabulated(vec![0.2, 0.1], vec![0.0, 0.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn spec_builds_each_kind() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("t.txt"), "# r v\n0.0 inf\n0.25 0\n0.5 -0.5\n").unwrap();
        let spec = PotentialSpec {
            kind: "tabulated".into(),
            table_path: Some("t.txt".into()),
            range: Some(0.6),
            b: Some(2.0),
            ..Default::default()
        };
        let p = spec.build(Some(dir.path())).unwrap();
        assert_eq!(p.range(), 0.6);
        assert_eq!(p.evaluate(0.55), -0.5);
        let bad = PotentialSpec { kind: "hard-sphere".into(), ..Default::default() };
        assert!(bad.build(None).is_err());
    }

    proptest! {
        #[test]
        fn psi_is_product_of_one_plus_zeta(
            pts in prop::collection::vec(prop::collection::vec(0.0f64..0.3, 2), 0..8),
            kind in 0usize..3,
        ) {
            let p = match kind {
                0 => PairPotential::hard_sphere(0.5).unwrap(),
                1 => sw(),
                _ => PairPotential::tabulated(vec![0.0, 0.3, 0.6], vec![3.0, -0.7, 0.2], 0.8, 1.0).unwrap(),
            };
            let m = ModelParams::new(0.8, 0.2, 2).unwrap();
            let xs = PointSet::from_rows(2, &pts).unwrap();
            let psi = boltzmann_psi(&p, &m, &xs);
            let mut prod = 1.0;
            for a in 0..xs.len() {
                for b in a + 1..xs.len() {
                    let z = mayer_zeta(&p, &m, xs.point(a), xs.point(b));
                    prop_assert!(z >= -1.0);
                    prod *= 1.0 + z;
                }
            }
            prop_assert!((psi - prod).abs() <= 1e-12 * psi.abs().max(prod.abs()));
        }

        #[test]
        fn zeta_vanishes_beyond_scaled_range(r in 0.0f64..10.0, eps in 0.01f64..1.0) {
            let p = sw();
            let m = ModelParams::new(1.3, eps, 3).unwrap();
            let z = mayer_zeta(&p, &m, &[0.0, 0.0, 0.0], &[r, 0.0, 0.0]);
            prop_assert!(z >= -1.0);
            if r >= eps * p.range() {
                prop_assert_eq!(z, 0.0);
            }
        }
    }

    #[test]
    fn scaled_zeta_integral_is_eps_d_c_beta() {
        // int |zeta^eps(x, 0)| dx = eps^d C_beta, by radial quadrature in physical units
        for dim in 1..=3 {
            for &eps in &[0.05, 0.3] {
                let p = sw();
                let m = ModelParams::new(1.0, eps, dim).unwrap();
                let f = |r: f64| mayer_zeta(&p, &m, &[0.0], &[r]).abs() * r.powi(dim as i32 - 1);
                let q = piecewise_simpson(&f, 0.0, eps * p.range(), &[0.25 * eps, 0.5 * eps], 1e-14).unwrap();
                let lhs = q.value * unit_sphere_area::<f64>(dim);
                let rhs = eps.powi(dim as i32) * c_beta(&p, 1.0, dim).unwrap().value;
                assert!((lhs - rhs).abs() < 1e-9 * rhs, "d={dim} eps={eps}");
            }
        }
    }
}
