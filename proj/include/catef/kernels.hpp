#pragma once

#include <Eigen/Core>

#include <string>

namespace catef {

enum class KernelKind { gaussian, biweight, epanechnikov };

//! A univariate kernel together with the closed-form constants consumed by
//! the smoothing and band modules:
//!   r_k    = ∫K²(u)du
//!   mu2    = ∫u²K(u)du
//!   lambda = ∫K'(u)²du / ∫K²(u)du  (= -∫K K''/∫K², the curvature of the
//!            kernel correlation at zero)
struct KernelSpec {
  KernelKind kind = KernelKind::gaussian;
  double r_k = 0.0;
  double mu2 = 0.0;
  double lambda = 0.0;
};

KernelSpec make_kernel(KernelKind kind);
KernelKind kernel_from_string(const std::string& name);
std::string to_string(KernelKind kind);

double eval_kernel(const KernelSpec& spec, double u);

// Product kernel K(s) = prod_j K(s_j).
double eval_product_kernel(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& s);

double kernel_lambda(const KernelSpec& spec);

//! Kernel correlation rho(s) = ∫K(u)K(u-s)du / ∫K²(u)du.
//! Closed form for the Gaussian; exact fixed-order Gauss-Legendre for the
//! polynomial compact kernels. rho(0) = 1, rho is even, |rho| <= 1.
double rho(const KernelSpec& spec, double s);

} // namespace catef
