//! Moment and cumulant tables over the subsets of a small ground set, set
//! partitions, and the finite-truncation transforms between densities and
//! correlation functions.
//!
//! Subsets of `{1..j}` are bit masks: bit `i` stands for label `i + 1`.

use std::collections::BTreeMap;

use num_traits::{FromPrimitive, Num};

use crate::estimate::{Estimate, SeriesEstimate};
use crate::{Error, Result};

pub const MAX_TABLE: usize = 12;
pub const MAX_PARTITION: usize = 12;

/// Values on every nonempty subset of `{1..j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetTable<T> {
    j: usize,
    values: Vec<T>,
}

fn guard_table(j: usize) -> Result<()> {
    if j > MAX_TABLE {
        return Err(Error::Guard {
            what: "subset table size",
            requested: j,
            limit: MAX_TABLE,
            estimate: Some((1u128 << j) - 1),
        });
    }
    Ok(())
}

impl<T: Clone + Num> SubsetTable<T> {
    /// Table with `f(mask)` on every nonempty subset.
    pub fn from_fn<F: FnMut(u32) -> T>(j: usize, mut f: F) -> Result<Self> {
        guard_table(j)?;
        let mut values = Vec::with_capacity(1 << j);
        values.push(T::zero());
        for m in 1..1u32 << j {
            values.push(f(m));
        }
        Ok(SubsetTable { j, values })
    }

    /// Product table `m_S = prod_{i in S} singles[i]`.
    pub fn product(singles: &[T]) -> Result<Self> {
        Self::from_fn(singles.len(), |m| {
            (0..singles.len())
                .filter(|&i| m >> i & 1 == 1)
                .fold(T::one(), |acc, i| acc * singles[i].clone())
        })
    }

    pub fn j(&self) -> usize {
        self.j
    }

    #[inline]
    pub fn get(&self, mask: u32) -> &T {
        assert!(mask != 0 && (mask as usize) < self.values.len(), "subset {mask} outside table");
        &self.values[mask as usize]
    }

    pub fn set(&mut self, mask: u32, v: T) {
        assert!(mask != 0 && (mask as usize) < self.values.len(), "subset {mask} outside table");
        self.values[mask as usize] = v;
    }

    /// Nonempty subsets and their values in ascending mask order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &T)> + '_ {
        self.values.iter().enumerate().skip(1).map(|(m, v)| (m as u32, v))
    }

    pub fn map<U: Clone + Num, F: FnMut(u32, &T) -> U>(&self, mut f: F) -> SubsetTable<U> {
        let mut values = Vec::with_capacity(self.values.len());
        values.push(U::zero());
        values.extend(self.iter().map(|(m, v)| f(m, v)));
        SubsetTable { j: self.j, values }
    }

    // value with the convention that the empty subset carries 1
    #[inline]
    fn with_empty(&self, mask: usize) -> T {
        if mask == 0 {
            T::one()
        } else {
            self.values[mask].clone()
        }
    }
}

/// Element type of tables passed through [`truncate`] and [`untruncate`].
///
/// Exact types use the ring operations as they are. `f64` carries the
/// recursion in double-word arithmetic (error-free products and sums), so
/// each output is close to correctly rounded despite the large intermediate
/// cumulants of high orders.
pub trait Moment: Clone + Num {
    /// `out_S = in_S + sign * sum_{B containing min S, B != S} out_B in_{S - B}`,
    /// or `in_B out_{S - B}` in the sum when `multiply_output` is set.
    fn partition_recursion(input: &SubsetTable<Self>, sign_negative: bool, multiply_output: bool) -> SubsetTable<Self> {
        let full = (1usize << input.j) - 1;
        let mut out = input.clone();
        for s in 1..=full {
            let low = s & s.wrapping_neg();
            let rest = s & !low;
            let mut acc = input.values[s].clone();
            let mut sub = rest;
            while sub != 0 {
                sub = (sub - 1) & rest;
                let b = low | sub;
                let term = if multiply_output {
                    input.values[b].clone() * out.with_empty(s & !b)
                } else {
                    out.values[b].clone() * input.with_empty(s & !b)
                };
                acc = if sign_negative { acc - term } else { acc + term };
            }
            out.values[s] = acc;
        }
        out
    }
}

impl<I: Clone + num_integer::Integer> Moment for num_rational::Ratio<I> {}
impl Moment for f32 {}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy)]
struct DoubleWord(f64, f64);

impl DoubleWord {
    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        DoubleWord(s, (a - (s - bb)) + (b - bb))
    }

    fn normalized(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        DoubleWord(s, lo - (s - hi))
    }

    fn add(self, o: Self) -> Self {
        let DoubleWord(s, e) = Self::two_sum(self.0, o.0);
        Self::normalized(s, e + self.1 + o.1)
    }

    fn mul(self, o: Self) -> Self {
        let p = self.0 * o.0;
        let e = self.0.mul_add(o.0, -p);
        Self::normalized(p, e + self.0 * o.1 + self.1 * o.0)
    }

    fn neg(self) -> Self {
        DoubleWord(-self.0, -self.1)
    }
}

impl Moment for f64 {
    fn partition_recursion(input: &SubsetTable<f64>, sign_negative: bool, multiply_output: bool) -> SubsetTable<f64> {
        let full = (1usize << input.j) - 1;
        let exact = |m: usize| DoubleWord(if m == 0 { 1.0 } else { input.values[m] }, 0.0);
        let mut out = vec![DoubleWord(0.0, 0.0); full + 1];
        out[0] = DoubleWord(1.0, 0.0);
        for s in 1..=full {
            let low = s & s.wrapping_neg();
            let rest = s & !low;
            let mut acc = exact(s);
            let mut sub = rest;
            while sub != 0 {
                sub = (sub - 1) & rest;
                let b = low | sub;
                let term = if multiply_output { exact(b).mul(out[s & !b]) } else { out[b].mul(exact(s & !b)) };
                acc = acc.add(if sign_negative { term.neg() } else { term });
            }
            out[s] = acc;
        }
        let mut table = input.clone();
        for s in 1..=full {
            table.values[s] = out[s].0 + out[s].1;
        }
        table
    }
}

/// Cumulants from moments by
/// `m^T_S = m_S - sum_{B containing min S, B != S} m^T_B m_{S - B}`,
/// which is the partition recursion written over the block holding the
/// smallest element. Singletons are copied.
pub fn truncate<T: Moment>(moments: &SubsetTable<T>) -> SubsetTable<T> {
    T::partition_recursion(moments, true, false)
}

/// Moments from cumulants: `m_S = sum_{partitions of S} prod_blocks m^T`.
pub fn untruncate<T: Moment>(cumulants: &SubsetTable<T>) -> SubsetTable<T> {
    T::partition_recursion(cumulants, false, true)
}

/// Cumulants by the Möbius closed form
/// `m^T_S = sum_{partitions} (-1)^{k-1} (k-1)! prod_blocks m`.
pub fn truncate_mobius<T: Clone + Num + FromPrimitive>(moments: &SubsetTable<T>) -> Result<SubsetTable<T>> {
    let mut out = moments.clone();
    for s in 1u32..1 << moments.j {
        let elems: Vec<usize> = (0..moments.j).filter(|&i| s >> i & 1 == 1).collect();
        let mut acc = T::zero();
        for p in enumerate_partitions(&elems, BlockMode::NonEmpty)? {
            let k = p.blocks.len();
            let mut coef = T::one();
            for f in 1..k {
                coef = coef * T::from_usize(f).unwrap();
            }
            let prod = p
                .blocks
                .iter()
                .fold(T::one(), |a, &b| a * moments.get(b).clone());
            if k % 2 == 1 {
                acc = acc + coef * prod;
            } else {
                acc = acc - coef * prod;
            }
        }
        out.values[s as usize] = acc;
    }
    Ok(out)
}

/// Partition of a ground set into blocks given as masks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SetPartition {
    pub blocks: Vec<u32>,
}

impl SetPartition {
    /// Blocks pairwise disjoint with union `ground`; empty blocks are
    /// accepted only when `allow_empty`.
    pub fn is_valid(&self, ground: u32, allow_empty: bool) -> bool {
        let mut union = 0u32;
        for &b in &self.blocks {
            if (b == 0 && !allow_empty) || union & b != 0 {
                return false;
            }
            union |= b;
        }
        union == ground
    }
}

/// Whether blocks must be nonempty (unordered partitions) or may be empty
/// (ordered `k`-tuples of disjoint blocks covering the set).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockMode {
    NonEmpty,
    PossiblyEmpty { k: usize },
}

/// Streams every partition of `set` (labels `< 32`). Unordered partitions
/// come from restricted-growth strings in lexicographic order; ordered
/// tuples from block assignments in lexicographic order.
pub fn enumerate_partitions(set: &[usize], mode: BlockMode) -> Result<PartitionIter> {
    if set.len() > MAX_PARTITION {
        return Err(Error::Guard {
            what: "set partition enumeration",
            requested: set.len(),
            limit: MAX_PARTITION,
            estimate: None,
        });
    }
    if set.iter().any(|&e| e >= 32) {
        return Err(Error::invalid("partition labels must be below 32"));
    }
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("repeated element in partition ground set"));
    }
    if let BlockMode::PossiblyEmpty { k } = mode {
        if k == 0 && !set.is_empty() {
            return Err(Error::invalid("cannot cover a nonempty set with zero blocks"));
        }
    }
    Ok(PartitionIter {
        set: set.to_vec(),
        mode,
        code: vec![0; set.len()],
        done: false,
    })
}

pub struct PartitionIter {
    set: Vec<usize>,
    mode: BlockMode,
    code: Vec<usize>,
    done: bool,
}

impl Iterator for PartitionIter {
    type Item = SetPartition;

    fn next(&mut self) -> Option<SetPartition> {
        if self.done {
            return None;
        }
        let n = self.set.len();
        let nblocks = match self.mode {
            BlockMode::NonEmpty => self.code.iter().max().map_or(0, |m| m + 1),
            BlockMode::PossiblyEmpty { k } => k,
        };
        let mut blocks = vec![0u32; nblocks];
        for (e, &c) in self.set.iter().zip(&self.code) {
            blocks[c] |= 1 << e;
        }
        // advance
        let mut i = n;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            let limit = match self.mode {
                // restricted growth: code[i] <= max(code[..i]) + 1
                BlockMode::NonEmpty => self.code[..i].iter().max().map_or(0, |m| m + 1),
                BlockMode::PossiblyEmpty { k } => k - 1,
            };
            if self.code[i] < limit {
                self.code[i] += 1;
                for c in &mut self.code[i + 1..] {
                    *c = 0;
                }
                break;
            }
        }
        Some(SetPartition { blocks })
    }
}

/// Bell numbers by `B_{n+1} = sum_k C(n,k) B_k`.
pub fn bell_number(n: usize) -> u128 {
    let mut bell = vec![1u128];
    for m in 0..n {
        let mut c: u128 = 1;
        let mut next = 0u128;
        for (k, b) in bell.iter().enumerate() {
            next += c * b;
            c = c * (m - k) as u128 / (k + 1) as u128;
        }
        bell.push(next);
    }
    bell[n]
}

/// Source of the order-`n` integrals `int F_{j+n}(z_j, z_{j+1..j+n}) dz`
/// over `n` free phase points at a fixed `z_j`.
pub trait OrderIntegrator {
    fn order(&mut self, n: usize) -> Result<Estimate>;
}

/// Adapts a closure `n -> integral` into an [`OrderIntegrator`].
pub struct ClosureIntegrator<F>(pub F);

impl<F: FnMut(usize) -> Result<Estimate>> OrderIntegrator for ClosureIntegrator<F> {
    fn order(&mut self, n: usize) -> Result<Estimate> {
        (self.0)(n)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `rho_j(z_j) = sum_{n <= n_max} (1/n!) int W_{j+n}`, where the integrator
/// evaluates the integrals of `W`.
pub fn rho_from_w<I: OrderIntegrator>(w: &mut I, n_max: usize) -> Result<SeriesEstimate> {
    series(w, n_max, false)
}

/// `W_j(z_j) = sum_{n <= n_max} ((-1)^n/n!) int rho_{j+n}`, where the
/// integrator evaluates the integrals of `rho`.
pub fn w_from_rho<I: OrderIntegrator>(rho: &mut I, n_max: usize) -> Result<SeriesEstimate> {
    series(rho, n_max, true)
}

fn series<I: OrderIntegrator>(integ: &mut I, n_max: usize, alternating: bool) -> Result<SeriesEstimate> {
    let mut terms = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let sign = if alternating && n % 2 == 1 { -1.0 } else { 1.0 };
        terms.push(integ.order(n)?.scale(sign / factorial(n)));
    }
    Ok(SeriesEstimate::from_terms(terms, 0))
}

/// Builds a full table by evaluating one series per nonempty subset.
pub fn table_from_series<F>(j: usize, mut per_subset: F) -> Result<(SubsetTable<f64>, SubsetTable<f64>)>
where
    F: FnMut(u32) -> Result<SeriesEstimate>,
{
    guard_table(j)?;
    let mut values = SubsetTable::from_fn(j, |_| 0.0)?;
    let mut errors = values.clone();
    for m in 1u32..1 << j {
        let s = per_subset(m)?;
        values.set(m, s.value);
        errors.set(m, s.total_error());
    }
    Ok((values, errors))
}

impl SubsetTable<f64> {
    /// JSON object keyed by decimal subset bit masks.
    pub fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .iter()
            .map(|(m, v)| (m.to_string(), serde_json::json!(v)))
            .collect();
        serde_json::Value::Object(map)
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::invalid("subset table must be a JSON object"))?;
        let mut entries = BTreeMap::new();
        for (k, v) in obj {
            let m: u32 = k
                .parse()
                .map_err(|_| Error::invalid(format!("subset key `{k}` is not a decimal mask")))?;
            let x = v
                .as_f64()
                .ok_or_else(|| Error::invalid(format!("subset {k} has a non-numeric value")))?;
            if m == 0 {
                return Err(Error::invalid("the empty subset has no entry"));
            }
            entries.insert(m, x);
        }
        let max = entries.keys().next_back().copied().unwrap_or(0);
        let j = (32 - max.leading_zeros()) as usize;
        guard_table(j)?;
        if entries.len() != (1usize << j) - 1 {
            return Err(Error::invalid(format!(
                "incomplete subset table: {} of {} subsets present",
                entries.len(),
                (1usize << j) - 1
            )));
        }
        SubsetTable::from_fn(j, |m| entries[&m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, Zero};
    use proptest::prelude::*;
    use rand::Rng;

    fn random_table(j: usize, seed: u64) -> SubsetTable<f64> {
        let mut rng = substream(seed, 0);
        SubsetTable::from_fn(j, |_| rng.gen_range(-1.0..1.0)).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn partition_counts() {
        assert_eq!(enumerate_partitions(&[0, 1, 2], BlockMode::NonEmpty).unwrap().count(), 5);
        assert_eq!(enumerate_partitions(&[0, 1, 2, 3], BlockMode::NonEmpty).unwrap().count(), 15);
        assert_eq!(enumerate_partitions(&[4], BlockMode::NonEmpty).unwrap().count(), 1);
        assert_eq!(enumerate_partitions(&[], BlockMode::NonEmpty).unwrap().count(), 1);
        for n in 0..=10 {
            let set: Vec<usize> = (0..n).collect();
            let parts: Vec<SetPartition> = enumerate_partitions(&set, BlockMode::NonEmpty).unwrap().collect();
            assert_eq!(parts.len() as u128, bell_number(n));
            if n <= 6 {
                assert!(parts.iter().all(|p| p.is_valid((1 << n) - 1, false)));
            }
        }
        assert_eq!(bell_number(10), 115975);
        assert!(enumerate_partitions(&(0..13).collect::<Vec<_>>(), BlockMode::NonEmpty).is_err());
    }

    #[test]
    fn ordered_tuples_with_empty_blocks() {
        let parts: Vec<SetPartition> = enumerate_partitions(&[0, 1, 2], BlockMode::PossiblyEmpty { k: 2 }).unwrap().collect();
        assert_eq!(parts.len(), 8);
        assert!(parts.iter().all(|p| p.blocks.len() == 2 && p.is_valid(0b111, true)));
        assert_eq!(parts[0].blocks, vec![0b111, 0]);
    }

    #[test]
    fn two_point_cumulant() {
        let m = random_table(2, 1);
        let c = truncate(&m);
        assert_eq!(c.get(1), m.get(1));
        assert!((c.get(3) - (m.get(3) - m.get(1) * m.get(2))).abs() < 1e-15);
        let back = untruncate(&c);
        assert!((back.get(3) - (c.get(3) + c.get(1) * c.get(2))).abs() < 1e-15);
    }

    #[test]
    fn product_table_has_no_cumulants() {
        let t = SubsetTable::product(&[0.3f64, 1.7, -0.4, 2.2, 0.9]).unwrap();
        let c = truncate(&t);
        for (m, v) in c.iter() {
            if m.count_ones() >= 2 {
                assert!(v.abs() < 1e-14, "{m}: {v}");
            }
        }
        let singles_only = SubsetTable::from_fn(3, |m| if m.count_ones() == 1 { m as f64 } else { 0.0 }).unwrap();
        let expect = SubsetTable::product(&[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(untruncate(&singles_only), expect);
    }

    #[test]
    fn recursion_matches_mobius_closed_form() {
        for j in 1..=6 {
            for seed in 0..5 {
                let m = random_table(j, 10 * j as u64 + seed);
                let a = truncate(&m);
                let b = truncate_mobius(&m).unwrap();
                for (s, v) in a.iter() {
                    assert!(close(*v, *b.get(s), 1e-12), "j={j} s={s}: {v} vs {}", b.get(s));
                }
            }
        }
    }

    #[test]
    fn exact_in_rationals() {
        let mut rng = substream(5, 5);
        let m: SubsetTable<BigRational> = SubsetTable::from_fn(5, |_| {
            BigRational::new(BigInt::from(rng.gen_range(-50i64..50)), BigInt::from(rng.gen_range(1i64..20)))
        })
        .unwrap();
        let c = truncate(&m);
        assert_eq!(untruncate(&c), m);
        assert_eq!(truncate_mobius(&m).unwrap(), c);
        let p = SubsetTable::product(&[BigRational::new(2.into(), 3.into()), BigRational::one(), BigRational::new((-5).into(), 7.into())]).unwrap();
        assert!(truncate(&p).iter().filter(|(s, _)| s.count_ones() > 1).all(|(_, v)| v.is_zero()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn roundtrip_is_identity(j in 1usize..=8, seed in any::<u64>()) {
            let m = random_table(j, seed);
            let back = untruncate(&truncate(&m));
            for (s, v) in m.iter() {
                prop_assert!(close(*v, *back.get(s), 1e-12));
            }
        }

        #[test]
        fn multilinear_scaling(j in 1usize..=6, seed in any::<u64>(), c in -3.0f64..3.0) {
            let m = random_table(j, seed);
            let scaled = m.map(|s, v| c.powi(s.count_ones() as i32) * v);
            let lhs = truncate(&scaled);
            let rhs = truncate(&m);
            for (s, v) in lhs.iter() {
                let expect = c.powi(s.count_ones() as i32) * rhs.get(s);
                prop_assert!((v - expect).abs() <= 1e-10 * expect.abs().max(1.0));
            }
        }
    }

    #[test]
    fn json_roundtrip_and_completeness() {
        let t = random_table(3, 7);
        let v = t.to_json();
        assert_eq!(v.as_object().unwrap().len(), 7);
        assert!(v.get("5").is_some());
        assert_eq!(SubsetTable::from_json(&v).unwrap(), t);
        let mut obj = v.as_object().unwrap().clone();
        obj.remove("6");
        assert!(SubsetTable::from_json(&serde_json::Value::Object(obj)).is_err());
    }

    #[test]
    fn w_zero_beyond_vacuum_gives_unit_density() {
        // W_0 = 1 and W_n = 0 otherwise, at j = 0
        let mut w = ClosureIntegrator(|n: usize| Ok(Estimate::exact(if n == 0 { 1.0 } else { 0.0 })));
        let rho = rho_from_w(&mut w, 4).unwrap();
        assert_eq!(rho.value, 1.0);
    }

    #[test]
    fn vanishing_densities_give_vanishing_w() {
        let mut r = ClosureIntegrator(|_n: usize| Ok(Estimate::exact(0.0)));
        assert_eq!(w_from_rho(&mut r, 5).unwrap().value, 0.0);
    }

    #[test]
    fn ideal_gas_poisson_algebra() {
        // Poisson gas with activity mu and a normalized density: at z with
        // f(z) = fz, W_{1+n} integrates to exp(-mu) mu^{1+n} fz, and
        // rho_{1+n} integrates to mu^{1+n} fz.
        let (mu, fz) = (1.3f64, 0.7);
        let mut w = ClosureIntegrator(|n: usize| Ok(Estimate::exact((-mu).exp() * mu.powi(1 + n as i32) * fz)));
        let rho = rho_from_w(&mut w, 25).unwrap();
        assert!((rho.value - mu * fz).abs() < 1e-14);
        let mut r = ClosureIntegrator(|n: usize| Ok(Estimate::exact(mu.powi(1 + n as i32) * fz)));
        let w1 = w_from_rho(&mut r, 25).unwrap();
        assert!((w1.value - mu * fz * (-mu).exp()).abs() < 1e-14);
    }

    #[test]
    fn two_particle_system_inverts() {
        // At most two particles on [0, 1]: W_1(x) = a g(x), W_2(x, y) = b g(x) g(y) h(x - y)
        // with g(x) = 1 + x and h a hard-rod indicator of width 0.2.
        let (a, b, x) = (0.4, 0.3, 0.35);
        let g = |t: f64| 1.0 + t;
        let h = |t: f64| if t.abs() < 0.2 { 0.0 } else { 1.0 };
        let w2 = |y: f64| b * g(x) * g(y) * h(x - y);
        let int_w2 = crate::quadrature::piecewise_simpson(&w2, 0.0, 1.0, &[x - 0.2, x + 0.2], 1e-13).unwrap().value;
        let closed = b * g(x) * ((1.0 - (x + 0.2)) + 0.5 * (1.0 * 1.0 - (x + 0.2).powi(2)) + (x - 0.2) + 0.5 * (x - 0.2).powi(2));
        assert!((int_w2 - closed).abs() < 1e-10);
        let mut wint = ClosureIntegrator(|n: usize| {
            Ok(Estimate::exact(match n {
                0 => a * g(x),
                1 => int_w2,
                _ => 0.0,
            }))
        });
        let rho1 = rho_from_w(&mut wint, 3).unwrap().value;
        // rho_1 = W_1 + int W_2 and rho_2 = W_2 recover W_1
        let mut rint = ClosureIntegrator(|n: usize| {
            Ok(Estimate::exact(match n {
                0 => rho1,
                1 => int_w2,
                _ => 0.0,
            }))
        });
        let w1 = w_from_rho(&mut rint, 3).unwrap().value;
        assert!((w1 - a * g(x)).abs() < 1e-12);
    }
}
