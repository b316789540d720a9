pub mod exponent;
pub mod novikov;
pub mod rational;
pub mod laurent;
pub mod lp;
pub mod tropical;
pub mod toric;
pub mod fibration;
pub mod mirror;
pub mod sampling;
pub mod lg;
