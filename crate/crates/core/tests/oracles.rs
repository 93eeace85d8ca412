//! Independent reference values: Tonks' closed form for hard rods and a
//! brute-force Fermat point search.

use clex::cumulants::truncate;
use clex::expansion::{BoxDomain, Density, MCSModel, VelocityLaw};
use clex::geometry::{steiner_length, Effort};
use clex::sampler::{estimate_rho, estimate_truncated, exact_tiny_oracle, gcmc_run, GcmcOptions};
use clex::{ModelParams, PairPotential, PointSet, SubsetTable};

fn rods(r0: f64, len: f64) -> MCSModel {
    MCSModel::new(
        PairPotential::hard_sphere(r0).unwrap(),
        ModelParams::new(1.0, 1.0, 1).unwrap(),
        BoxDomain::new(vec![0.0], vec![len]).unwrap(),
        Density::Uniform,
        VelocityLaw::Marginal,
    )
    .unwrap()
}

/// Hard rods of length `sigma`, uniform density `a` (activity times
/// density) on `[0, len]`, all particle numbers.
struct Tonks {
    sigma: f64,
    a: f64,
    len: f64,
}

impl Tonks {
    /// Weight of any number of rods in a free interval of length `g`
    /// whose ends must stay `sigma` clear of `closed` neighbours.
    fn gap(&self, g: f64, closed: usize) -> f64 {
        let mut total = 0.0;
        let mut fact = 1.0;
        for k in 0.. {
            if k > 0 {
                fact *= k as f64;
            }
            let free = g - (k as f64 + closed as f64 - 1.0) * self.sigma;
            if free < 0.0 || (k == 0 && closed == 2 && g < self.sigma) {
                break;
            }
            total += self.a.powi(k) * free.powi(k as i32) / fact;
        }
        total
    }

    fn xi(&self) -> f64 {
        // one "closed" end per rod beyond the first
        let mut total = 0.0;
        let mut fact = 1.0;
        for n in 0.. {
            if n > 0 {
                fact *= n as f64;
            }
            let free = self.len - (n as f64 - 1.0).max(0.0) * self.sigma;
            if free < 0.0 {
                break;
            }
            total += self.a.powi(n) * free.powi(n as i32) / fact;
        }
        total
    }

    /// `rho_j / mu^j`.
    fn rho(&self, xs: &[f64]) -> f64 {
        let mut p = xs.to_vec();
        p.sort_by(f64::total_cmp);
        let dens = self.a;
        let mut w = dens.powi(p.len() as i32);
        w *= self.gap(p[0], 1);
        for s in p.windows(2) {
            if s[1] - s[0] < self.sigma {
                return 0.0;
            }
            w *= self.gap(s[1] - s[0], 2);
        }
        w *= self.gap(self.len - p[p.len() - 1], 1);
        w / self.xi()
    }

    fn truncated(&self, xs: &[f64]) -> f64 {
        let t = SubsetTable::from_fn(xs.len(), |m| {
            let sub: Vec<f64> = (0..xs.len()).filter(|&i| m >> i & 1 == 1).map(|i| xs[i]).collect();
            self.rho(&sub)
        })
        .unwrap();
        *truncate(&t).get((1 << xs.len()) - 1)
    }
}

#[test]
fn tonks_gap_weights() {
    let t = Tonks { sigma: 1.0, a: 0.5, len: 2.5 };
    // edge gap of length 1.5 beside a rod: k = 0, 1 (free 0.5)
    assert!((t.gap(1.5, 1) - (1.0 + 0.5 * 0.5)).abs() < 1e-15);
    // interior gap of length 2.5: k = 0, 1 (free 0.5)
    assert!((t.gap(2.5, 2) - (1.0 + 0.5 * 0.5)).abs() < 1e-15);
    assert_eq!(t.gap(0.5, 2), 0.0);
    // n = 0..3 with free lengths 2.5, 2.5, 1.5, 0.5
    let xi = 1.0 + 0.5 * 2.5 + 0.25 * 1.5f64.powi(2) / 2.0 + 0.125 * 0.5f64.powi(3) / 6.0;
    assert!((t.xi() - xi).abs() < 1e-15);
}

#[test]
fn nested_quadrature_oracle_matches_tonks() {
    // at most three rods of length 1.4 fit in [0, 4], so four particles is exact
    let m = rods(1.4, 4.0);
    let oracle = exact_tiny_oracle(&m, 4, 8).unwrap();
    let t = Tonks { sigma: 1.4, a: 0.25, len: 4.0 };
    for xs in [vec![0.3], vec![1.0], vec![2.1], vec![0.2, 1.9], vec![0.5, 3.5], vec![0.1, 1.7, 3.3], vec![1.0, 1.2]] {
        let o = oracle.rho(&xs).unwrap();
        let exact = t.rho(&xs);
        assert!((o.value - exact).abs() <= 1e-9 * exact.abs().max(1e-3), "{xs:?}: {} vs {exact}", o.value);
        assert!(o.error <= 1e-6, "{xs:?}: error {}", o.error);
    }
    for xs in [vec![0.2, 1.9], vec![0.5, 3.5], vec![1.0, 2.0]] {
        let o = oracle.truncated(&xs).unwrap();
        let exact = t.truncated(&xs);
        assert!((o.value - exact).abs() <= 1e-9, "{xs:?}: {} vs {exact}", o.value);
    }
}

#[test]
fn gcmc_matches_tonks_on_a_small_box() {
    let m = rods(0.5, 4.0);
    let t = Tonks { sigma: 0.5, a: 0.25, len: 4.0 };
    let run = gcmc_run(
        &m,
        &GcmcOptions {
            sweeps: 400_000,
            seed: 21,
            chains: 2,
            bins_per_axis: 40,
            j_max: 2,
        },
    )
    .unwrap();
    let avg = |lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| {
        let n = 64;
        (0..n).map(|i| f(lo + (i as f64 + 0.5) * (hi - lo) / n as f64)).sum::<f64>() / n as f64
    };
    let grid = &run.grids[0];
    let rho1 = estimate_rho(grid, 1.0);
    for site in [0, 5, 16, 20, 39] {
        let e = rho1[site].unwrap();
        let (lo, hi) = grid.site_bounds(site);
        let exact = avg(lo[0], hi[0], &|x| t.rho(&[x]));
        assert!((e.value - exact).abs() <= 3.0 * e.error, "site {site}: {e:?} vs {exact}");
    }
    let t2 = estimate_truncated(&run.grids, 2, 1.0).unwrap();
    for (s1, s2) in [(16, 18), (16, 23), (16, 28)] {
        let e = t2[run.grids[1].cell_of(&[s1, s2])].unwrap();
        let (a, b) = (grid.site_bounds(s1), grid.site_bounds(s2));
        let exact = avg(a.0[0], a.1[0], &|x| avg(b.0[0], b.1[0], &|y| t.rho(&[x, y])))
            - avg(a.0[0], a.1[0], &|x| t.rho(&[x])) * avg(b.0[0], b.1[0], &|y| t.rho(&[y]));
        assert!((e.value - exact).abs() <= 3.0 * e.error, "({s1},{s2}): {e:?} vs {exact}");
    }
}

/// Minimizes the sum of distances to three points by compass search.
fn fermat_point_length(p: &[[f64; 2]; 3]) -> f64 {
    let cost = |x: f64, y: f64| p.iter().map(|q| (q[0] - x).hypot(q[1] - y)).sum::<f64>();
    let (mut x, mut y) = (0.0, 0.0);
    let mut step = 1.0;
    let mut best = cost(x, y);
    while step > 1e-12 {
        let mut moved = false;
        for (dx, dy) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let c = cost(x + dx, y + dy);
            if c < best {
                best = c;
                x += dx;
                y += dy;
                moved = true;
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    best
}

#[test]
fn exact_small_matches_brute_force_fermat_points() {
    let h = 3f64.sqrt() / 2.0;
    let triangles = [[[0.0, 0.0], [1.0, 0.0], [0.5, h]], [[0.0, 0.0], [2.0, 0.1], [0.7, 1.3]], [[-0.4, 0.2], [0.9, -0.3], [0.1, 0.8]]];
    for t in &triangles {
        let xs = PointSet::from_rows(2, t).unwrap();
        let b = steiner_length(&xs, Effort::ExactSmall);
        let brute = fermat_point_length(t);
        assert!((b.upper - brute).abs() < 1e-6, "{t:?}: {} vs {brute}", b.upper);
        assert!(b.upper - b.lower < 1e-6);
    }
    let xs = PointSet::from_rows(2, &triangles[0]).unwrap();
    assert!((steiner_length(&xs, Effort::ExactSmall).upper - 3f64.sqrt()).abs() < 1e-6);
}
