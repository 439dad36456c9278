//! Solving angles-only initial orbit determination by searching the
//! projective plane of orbital-plane normals with a labeled subdivision of
//! the octahedron.

pub mod dyadic;
pub mod interval;
pub mod mastermap;
pub mod pplane;
pub mod scalar;
pub mod geometry;
pub mod oracles;
pub mod engine;
pub mod io;
pub mod synthgen;
pub mod render;
