//! Fully nonlinear parabolic Hessian equations on Riemannian charts.

pub mod cli;
pub mod estimates;
pub mod expr;
pub mod geometry;
pub mod operator;
pub mod report;
pub mod solver;
pub mod symfunc;
