pub mod char_roots;
pub mod cli;
pub mod error;
pub mod model_params;
pub mod registry;
pub mod spectral_solution;
pub mod wave_kernels;
pub mod quadrature;
pub mod rate_lab;
