//! Second-order compatible-strain mixed finite elements for 2D compressible
//! nonlinear elasticity in plane strain.
//!
//! The formulation treats displacement, displacement gradient and first
//! Piola-Kirchhoff stress as independent fields of a three-field functional.
//! Displacements are interpolated with quadratic Lagrange triangles; the
//! displacement gradient with a tangential-continuous quadratic vector
//! family and the stress with a normal-continuous reduced family, both with
//! explicit shape functions transformed by Piola maps. The resulting
//! indefinite saddle-point systems are solved by Newton-Raphson load
//! stepping with a sparse direct factorization.

pub mod bench;
pub mod element;
pub mod generator;
pub mod materials;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod verify;
pub mod shapefn;
