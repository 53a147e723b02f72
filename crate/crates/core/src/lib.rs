//! Linear optimization, feasibility, membership and certificate problems over
//! the cone of truncated moment sequences admitting representing measures on
//! a compact semialgebraic set, and its dual cone of polynomials nonnegative
//! on that set.
//!
//! The toolchain is a convergent hierarchy of semidefinite relaxations with
//! flat-truncation stopping and atom extraction:
//!
//! - [`algebra`]: multi-indices, sparse polynomials, moment sequences, the
//!   Riesz pairing, atomic measures.
//! - [`moments`]: moment and localizing matrices, numeric and symbolic.
//! - [`sdp`]: a dense homogeneous self-dual interior-point SDP solver with
//!   infeasibility detection.
//! - [`hierarchy`]: the order-k moment relaxation / weighted-sum-of-squares
//!   program pair, Lasserre lower bounds and SOS membership programs.
//! - [`extraction`]: numeric rank, the flatness test, and recovery of
//!   finitely atomic representing measures.
//! - [`membership`]: membership checks for the moment cone and the
//!   nonnegative-polynomial cone.
//! - [`linopt`]: the outer loop solving linear moment optimization by
//!   increasing relaxation order.
//! - [`feascert`]: feasible-point search and infeasibility certificates.
//! - [`apps`]: adapters for copositive/completely positive matrix problems,
//!   CP completion, and sums of even powers of linear forms.
//!
//! All numeric code is generic over the scalar type through [`scalar::Real`];
//! the `*64` aliases below fix `f64`, the intended production scalar.

pub mod algebra;
pub mod apps;
pub mod extraction;
pub mod feascert;
pub mod hierarchy;
pub mod linopt;
pub mod membership;
pub mod moments;
pub mod scalar;
pub mod sdp;

pub use scalar::Real;

/// `f64` aliases for the central types.
pub type Poly64 = algebra::Poly<f64>;
pub type Tms64 = algebra::Tms<f64>;
pub type AtomicMeasure64 = algebra::AtomicMeasure<f64>;
pub type SemialgSet64 = moments::SemialgSet<f64>;
pub type SdpProblem64 = sdp::SdpProblem<f64>;
pub type SdpSolution64 = sdp::SdpSolution<f64>;
pub type MomentLp64 = hierarchy::MomentLp<f64>;
pub type LinOptOutcome64 = linopt::LinOptOutcome<f64>;
pub type Certificate64 = feascert::Certificate<f64>;
