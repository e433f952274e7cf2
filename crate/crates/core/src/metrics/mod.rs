//! Dependence measures, divergences, generalization bounds and Monte-Carlo
//! risk under the unconfounded distribution.

mod bounds;
mod dependence;
mod ood;
mod quadrature;
mod tv;

pub use bounds::{
    aug_bound, renyi_bound, BoundKind, BoundReport, BoundVariant, LambdaInputs, BOUND_CSV_HEADER,
};
pub use dependence::{
    mutual_information, mutual_information_in, renyi_dependence, JointTable, MiUnit, RenyiOrder,
};
pub use ood::{ood_risk_mc, Classifier, McEstimate};
pub use quadrature::GaussLegendre;
pub use tv::{expected_corruption_tv, std_normal_cdf, tv_discrete, tv_gaussian_shared_cov, XiLaw};
