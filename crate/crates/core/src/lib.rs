pub mod cspsearch;
pub mod enumeration;
pub mod gen;
pub mod io;
pub mod matrix;
pub mod model;
pub mod properties;
pub mod scf;
