//! Pairwise dependence: DCC(1,1) Student-t copulas on PIT series, their
//! conditional correlations and lower tail dependence.

pub mod copula;
pub mod dcc;
pub mod tensor;

pub use copula::{t_copula_cdf, t_copula_lower_tail_dep, Comonotone, Copula, Independence, StudentTCopula};
pub use dcc::{
    dcc_filter, fit_pair_copula, pair_loglik, CopulaFitOptions, DccCopulaParams, PairDependence, NU_COP_MAX, NU_COP_MIN,
};
pub use tensor::{tail_dep_tensor, TailDepTensor};
