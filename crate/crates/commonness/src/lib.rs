//! Commonness of linear systems over finite abelian groups and the integers.

pub mod certify;
pub mod classify;
pub mod grids;
pub mod linalg;
pub mod montecarlo;
pub mod search;
pub mod sysalg;
pub mod templates;
