//! Cluster-expansion toolkit for maximally chaotic low-density gas states.
//!
//! The crate is organised bottom-up:
//!
//! * [`potential`]: pair potentials, Mayer functions, Boltzmann factors and
//!   the structural constants `B` (stability) and `C_beta` (integrability).
//! * [`graphs`]: exact enumeration of labeled graphs, connected graphs,
//!   trees (Prüfer decoding) and rooted forests.
//! * [`ursell`]: Ursell functions by connected-graph summation and by the
//!   pivot recursion, tree/forest majorants, tree-graph inequality checks.
//! * [`cumulants`]: moment/cumulant transforms over set partitions and the
//!   finite-truncation correlation/density inversion pair.
//! * [`geometry`]: tree lengths, minimum spanning trees, Steiner brackets and
//!   the connection count `n0`.
//! * [`expansion`]: Monte Carlo evaluation of the cluster series and of both
//!   sides of the truncated-correlation decay bound.
//! * [`sampler`]: grand-canonical Metropolis sampler and an exact quadrature
//!   oracle for tiny one-dimensional systems.
//! * [`config`]: key-value experiment configuration files.
//!
//! The deterministic numerical core (potentials, Ursell functions, lengths)
//! is generic over [`Scalar`]; cumulant tables are generic over any exact or
//! floating field so the algebra can be checked in rationals. The Monte Carlo
//! layers are `f64` only. Concrete aliases for the common instantiations live
//! at the crate root.

pub mod config;
pub mod cumulants;
pub mod error;
pub mod estimate;
pub mod expansion;
pub mod geometry;
pub mod graphs;
pub mod points;
pub mod potential;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod ursell;

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive};

pub use error::{Error, Result};
pub use estimate::SeriesEstimate;

/// Floating-point scalar the deterministic numerical core is generic over.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + Debug + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Every `Scalar` can represent (a rounding of)
    /// any finite `f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type PairPotential = potential::PairPotential<f64>;
pub type ModelParams = potential::ModelParams<f64>;
pub type PointSet = points::PointSet<f64>;
pub type UrsellContext = ursell::UrsellContext<f64>;
pub type LengthBracket = geometry::LengthBracket<f64>;
pub type SubsetTable = cumulants::SubsetTable<f64>;
/// Cumulant tables over exact rationals, for bit-exact algebra checks.
pub type RationalTable = cumulants::SubsetTable<num_rational::BigRational>;

pub type PairPotentialF32 = potential::PairPotential<f32>;
pub type UrsellContextF32 = ursell::UrsellContext<f32>;
