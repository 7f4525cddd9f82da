//! Reduced qubit dynamics built on g(t).

pub mod coefficients;
pub mod master;
pub mod nonmarkov;
pub mod qfi;

pub use coefficients::{
    coefficients_from_g, f_ode_oracle, f_w_at, f_w_from_f_z, f_z_at, f_z_from_g, CoefficientSource,
    OCoefficients, POLE_BLOWUP, POLE_G_TOL,
};
pub use master::{
    closed_form_density, evolve_master_equation, expectations_sigma, integrate_lindblad, lindblad_rhs,
    trace_distance, DensitySeries, SigmaSeries, POSITIVITY_TOL,
};
pub use nonmarkov::{non_markovianity_from_abs_g, non_markovianity_nt, NonMarkovReport};
pub use qfi::{qfi_from_derivative, qfi_theta, qfi_theta_fd, StateConvention, QFI_FD_STEP};
