#include "catef/kernels.hpp"

#include "catef/errors.hpp"

#include <cmath>

namespace catef {

namespace {

const double kInvSqrt2Pi = 0.3989422804014326779;

// 8-point Gauss-Legendre rule on [-1, 1]; exact for polynomials up to
// degree 15, which covers the biweight overlap integrand (degree 8).
const double kGlNode[8] = {-0.9602898564975362316, -0.7966664774136267396,
                           -0.5255324099163289859, -0.1834346424956498049,
                           0.1834346424956498049,  0.5255324099163289859,
                           0.7966664774136267396,  0.9602898564975362316};
const double kGlWeight[8] = {0.1012285362903762592, 0.2223810344533744705,
                             0.3137066458778872873, 0.3626837833783619830,
                             0.3626837833783619830, 0.3137066458778872873,
                             0.2223810344533744705, 0.1012285362903762592};

} // namespace

KernelSpec make_kernel(KernelKind kind) {
  KernelSpec spec;
  spec.kind = kind;
  switch (kind) {
    case KernelKind::gaussian:
      spec.r_k = 0.28209479177387814347; // 1/(2*sqrt(pi))
      spec.mu2 = 1.0;
      spec.lambda = 0.5;
      break;
    case KernelKind::biweight:
      spec.r_k = 5.0 / 7.0;
      spec.mu2 = 1.0 / 7.0;
      spec.lambda = 3.0; // = (15/7)/(5/7); see rho identity tests
      break;
    case KernelKind::epanechnikov:
      spec.r_k = 0.6;
      spec.mu2 = 0.2;
      spec.lambda = 2.5;
      break;
  }
  return spec;
}

KernelKind kernel_from_string(const std::string& name) {
  if (name == "gaussian") return KernelKind::gaussian;
  if (name == "biweight") return KernelKind::biweight;
  if (name == "epanechnikov") return KernelKind::epanechnikov;
  throw InputError("unknown kernel '" + name + "' (expected gaussian|biweight|epanechnikov)");
}

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::gaussian: return "gaussian";
    case KernelKind::biweight: return "biweight";
    case KernelKind::epanechnikov: return "epanechnikov";
  }
  return "gaussian";
}

double eval_kernel(const KernelSpec& spec, double u) {
  switch (spec.kind) {
    case KernelKind::gaussian:
      return kInvSqrt2Pi * std::exp(-0.5 * u * u);
    case KernelKind::biweight: {
      if (std::fabs(u) >= 1.0) return 0.0;
      const double t = 1.0 - u * u;
      return 0.9375 * t * t;
    }
    case KernelKind::epanechnikov:
      if (std::fabs(u) >= 1.0) return 0.0;
      return 0.75 * (1.0 - u * u);
  }
  return 0.0;
}

double eval_product_kernel(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& s) {
  double out = 1.0;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    out *= eval_kernel(spec, s[j]);
    if (out == 0.0) return 0.0;
  }
  return out;
}

double kernel_lambda(const KernelSpec& spec) { return spec.lambda; }

double rho(const KernelSpec& spec, double s) {
  s = std::fabs(s);
  if (spec.kind == KernelKind::gaussian) {
    // ∫φ(u)φ(u-s)du is the N(0,2) density at s.
    return std::exp(-0.25 * s * s);
  }
  // Compact support [-1,1]: overlap is [s-1, 1], empty for s >= 2.
  if (s >= 2.0) return 0.0;
  const double lo = s - 1.0;
  const double hi = 1.0;
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  double acc = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double u = mid + half * kGlNode[i];
    acc += kGlWeight[i] * eval_kernel(spec, u) * eval_kernel(spec, u - s);
  }
  return half * acc / spec.r_k;
}

} // namespace catef
