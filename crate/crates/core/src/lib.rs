//! Magnetic Weyl pseudodifferential calculus on a discretized phase space.

pub mod bessel;
pub mod error;
pub mod exec;
pub mod fft;
pub mod geometry;
pub mod grid;
pub mod mixed;
pub mod moyal;
pub mod quadrature;
pub mod schatten;
pub mod symbol;
pub mod weyl;

pub use error::{Error, Result};
pub use grid::{make_grid, symplectic_form, PhaseGrid, PhasePoint, Point};
pub use symbol::{Factor1D, FnSymbol, JapaneseBracket, MultiIndex, ProductSymbol, Symbol, SymbolField};
