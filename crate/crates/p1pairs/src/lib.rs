//! Exact-arithmetic toolkit for chains of stable pairs on the projective line.
//!
//! Everything is computed over the rationals with no floating point and no
//! symbolic dependencies. The building blocks:
//!
//! - [`rat`], [`qmat`]: exact rational scalars and dense matrices with the
//!   kernel/cokernel/minor machinery the rest of the crate leans on.
//! - [`binform`]: homogeneous binary forms and their multiplication maps.
//! - [`tailmod`]: coherent sheaves on the line presented as truncated graded
//!   modules, with kernels, cokernels, torsion, splitting types and duals.
//! - [`pairchain`]: stable pairs, the two equivalent chain descriptions, and
//!   conversion both ways.
//! - [`collin`]: the embedding of chains into spaces of collineations and the
//!   determinantal strata that receive them, with tangent-space dimensions.
//! - [`expanded`]: equivariant sheaves on the product surface, elementary
//!   modifications, and the expanded-pair construction.
//! - [`duality`]: the dual chain of complete quotients attached to a chain.
//!
//! See the `examples/` directory for end-to-end walkthroughs of each layer.

pub mod binform;
pub mod cli;
pub mod collin;
pub mod duality;
pub mod expanded;
pub mod pairchain;
pub mod qmat;
pub mod rat;
pub mod rng;
pub mod tailmod;
