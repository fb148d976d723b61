pub mod classes;
pub mod codegen;
pub mod frontend;
pub mod interp;
pub mod invert;
pub mod pipeline;
pub mod rtm;
pub mod types;
