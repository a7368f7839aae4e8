//! Kernel density estimation, KL divergence, the trivariate normal model
//! and Metropolis–Hastings sampling.

mod kde;
mod kld;
mod mcmc;
mod mvn;

pub use kde::{kde_pdf, quantile, silverman_bandwidth, KdeModel, UniformGrid};
pub use kld::kld;
pub use mcmc::{mh_chain, Chain, ChainOptions};
pub use mvn::{mvn_pdf, mvn_sample, TriNormal};
