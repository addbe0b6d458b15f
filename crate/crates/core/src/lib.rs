//! Capped-precision p-adic toolkit for Wach-module matrices of two-dimensional
//! crystalline representations, with congruence certificates.

pub mod padics;
pub mod series;
pub mod wach;
pub mod deform;
pub mod trianguline;
