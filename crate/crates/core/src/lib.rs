pub mod cli;
pub mod expr;
pub mod extreal;
pub mod lhospital;
pub mod limit;
pub mod lsmeasure;
pub mod mvt;
pub mod regulated;
pub mod sequence;
pub mod stieltjes;
pub mod tol;
