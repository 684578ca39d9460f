//! Fredholm analysis of `c·I + K` (K the double layer operator) on polygonal
//! domains with conical points and cracks.
//!
//! Limit operators at each vertex are Mellin convolutions; their symbols are
//! scanned for invertibility along weight lines and the verdicts are cross
//! checked with a graded Nyström discretization.

pub mod geometry;
pub mod quad;
pub mod mellin;
pub mod groupoid;
pub mod layerpot;
pub mod cli;
