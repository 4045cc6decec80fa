pub mod circulation;
pub mod constraint;
pub mod cover;
pub mod dynamics;
pub mod graph;
pub mod spec_file;
pub mod stability;
