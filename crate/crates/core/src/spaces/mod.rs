//! Concrete metric spaces with explicit bicombings.

pub mod normed;
pub mod shift;
pub mod slab;

pub use normed::{make_normed_space, parse_directions, NormKind, NormSpec, NormedSpace, Vector};
pub use shift::{make_shift_space, phi_closed_form, ShiftPoint, ShiftSpace};
pub use slab::{make_ex22_space, make_ex63_space, tent, Point3, SlabSpace, StripSpace, WedgeSpace};
