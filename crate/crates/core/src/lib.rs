mod linalg;
pub mod calc;
pub mod flow;
pub mod foliation;
pub mod morse;
pub mod polar;
pub mod sampling;
pub mod transversality;
pub mod models;
pub mod experiments;
