//! Exact kernels, functional inequalities and Monte Carlo checks.

pub mod dirichlet;
pub mod exit;
pub mod heat_kernel;
pub mod hk_bounds;
pub mod lrp_events;
pub mod qip;
pub mod report;
pub mod stats;
pub mod trap_mc;

pub use dirichlet::{
    check_localization_bounds, check_nash, check_sobolev, dirichlet_form, mollifier,
    nash_terms, random_test_functions, sobolev_terms, DirichletForm, FormVariant, Mollifier,
};
pub use exit::{exit_tail_fit, ExitTailFit};
pub use heat_kernel::{heat_kernel_column, heat_kernel_exact, HeatKernelTable, KernelEnv, KernelVariant};
pub use hk_bounds::{check_hk_bounds, killed_kernel_terms, localized_kernel_terms, within_slope};
pub use lrp_events::{a_event, gamma_window, scan_lrp_events, LrpEventScan};
pub use qip::{qip_stats, QipStats};
pub use report::{fit_then_validate, BoundCheck, BoundInstance, VerificationReport};
pub use trap_mc::{trap_probability_exact, trap_probability_mc, TrapProbability};
