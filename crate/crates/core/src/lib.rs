//! Algorithms for light, open, discrete planar maps: normal domains, path
//! lifting, local degree, branch-set detection and the local power-map
//! normal form `f = φ⁻¹ ∘ (z ↦ zᵏ) ∘ ψ`.

pub mod branch;
pub mod error;
pub mod factor;
pub mod index;
pub mod lifting;
pub mod map;
pub mod normal;
pub mod region;
pub mod winding;

pub use error::{Error, Result};
pub use map::{C64, PlanarMap, Rect};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
