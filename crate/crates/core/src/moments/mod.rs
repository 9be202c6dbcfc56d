//! Fourth-moment tensors and everything computed from them: the limiting
//! laws, quantile bands, the variance parameters 𝒱 and ν, and the
//! finite-sample threshold.

pub mod law;
pub mod tensors;
pub mod threshold;
pub mod variance;

pub use law::{
    asymptotic_law, nonasymptotic_bound, projector_quantile_band, quantile_band, AsymptoticLaw,
    QuantileBand,
};
pub use tensors::{
    empirical_fourth_moments, gaussian_fourth_moments, generalized_fourth_moments,
    generalized_fourth_moments_weighted, spiked_fourth_moments, FourthMomentTensors, Latent,
    MomentSource, SpikeSpec, Tensor4,
};
pub use threshold::{
    c_of_d, s_param_gaussian, s_param_monte_carlo, sample_size_threshold, MaxDeviationEstimator,
    Threshold, DEFAULT_REPLICATES,
};
pub use variance::{
    gaussian_closed_forms, nu_objective, v_objective, v_operator, variance_param_nu,
    variance_param_v, variance_params, GaussianClosedForms, NuEstimate, VBig, VarianceParams,
    DEFAULT_RESTARTS,
};
