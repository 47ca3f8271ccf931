pub mod extract;
pub mod fit;
pub mod simulate;
pub mod sweep;
