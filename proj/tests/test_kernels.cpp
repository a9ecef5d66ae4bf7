#include "catef/kernels.hpp"

#include "catef/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace catef;

namespace {

double quad_support(const KernelSpec& spec) {
  return spec.kind == KernelKind::gaussian ? 10.0 : 1.0;
}

} // namespace

TEST_CASE("gaussian kernel closed-form values") {
  const KernelSpec k = make_kernel(KernelKind::gaussian);
  CHECK(eval_kernel(k, 0.0) == doctest::Approx(0.3989423).epsilon(1e-6));
  CHECK(eval_kernel(k, 1.0) == doctest::Approx(0.2419707).epsilon(1e-6));
  CHECK(eval_kernel(k, -1.0) == eval_kernel(k, 1.0));
}

TEST_CASE("compact kernels vanish outside support") {
  CHECK(eval_kernel(make_kernel(KernelKind::epanechnikov), 2.0) == 0.0);
  CHECK(eval_kernel(make_kernel(KernelKind::biweight), -1.5) == 0.0);
}

TEST_CASE("product kernel values") {
  const KernelSpec k = make_kernel(KernelKind::gaussian);
  Eigen::VectorXd s(2);
  s << 0.0, 0.0;
  CHECK(eval_product_kernel(k, s) == doctest::Approx(0.1591549).epsilon(1e-6));
  s << 1.0, -1.0;
  CHECK(eval_product_kernel(k, s) == doctest::Approx(0.0585498).epsilon(1e-5));

  const KernelSpec epa = make_kernel(KernelKind::epanechnikov);
  s << 0.3, 2.0;
  CHECK(eval_product_kernel(epa, s) == 0.0);

  // dX = 1 product equals the univariate kernel exactly.
  Eigen::VectorXd one(1);
  one << 0.37;
  for (const auto kind : {KernelKind::gaussian, KernelKind::biweight, KernelKind::epanechnikov}) {
    const KernelSpec spec = make_kernel(kind);
    CHECK(eval_product_kernel(spec, one) == eval_kernel(spec, 0.37));
  }
}

TEST_CASE("kernel integrates to one with zero first moment") {
  for (const auto kind : {KernelKind::gaussian, KernelKind::biweight, KernelKind::epanechnikov}) {
    const KernelSpec spec = make_kernel(kind);
    const double support = quad_support(spec);
    const double mass =
        oracle::simpson([&](double u) { return eval_kernel(spec, u); }, -support, support);
    const double first =
        oracle::simpson([&](double u) { return u * eval_kernel(spec, u); }, -support, support);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(std::fabs(first) < 1e-8);
  }
}

TEST_CASE("stored constants match quadrature") {
  for (const auto kind : {KernelKind::gaussian, KernelKind::biweight, KernelKind::epanechnikov}) {
    const KernelSpec spec = make_kernel(kind);
    const double support = quad_support(spec);
    const double r_k = oracle::simpson(
        [&](double u) { return eval_kernel(spec, u) * eval_kernel(spec, u); }, -support, support);
    const double mu2 = oracle::simpson(
        [&](double u) { return u * u * eval_kernel(spec, u); }, -support, support);
    CHECK(r_k == doctest::Approx(spec.r_k).epsilon(1e-9));
    CHECK(mu2 == doctest::Approx(spec.mu2).epsilon(1e-9));

    // lambda = ∫K'^2 / ∫K^2 via central-difference derivative of K.
    const double eps = 1e-5;
    const double kprime2 = oracle::simpson(
        [&](double u) {
          const double d = (eval_kernel(spec, u + eps) - eval_kernel(spec, u - eps)) / (2.0 * eps);
          return d * d;
        },
        -support, support);
    CHECK(kprime2 / r_k == doctest::Approx(kernel_lambda(spec)).epsilon(1e-3));
  }
}

TEST_CASE("kernel lambda constants") {
  CHECK(kernel_lambda(make_kernel(KernelKind::gaussian)) == 0.5);
  CHECK(kernel_lambda(make_kernel(KernelKind::epanechnikov)) == 2.5);
  // The defining integral for the standard biweight evaluates to exactly 3
  // (= (15/7)/(5/7)); see also the rho curvature check below.
  CHECK(kernel_lambda(make_kernel(KernelKind::biweight)) == 3.0);
}

TEST_CASE("rho properties and gaussian closed form") {
  const KernelSpec g = make_kernel(KernelKind::gaussian);
  CHECK(rho(g, 0.0) == 1.0);
  CHECK(rho(g, 2.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  for (const auto kind : {KernelKind::gaussian, KernelKind::biweight, KernelKind::epanechnikov}) {
    const KernelSpec spec = make_kernel(kind);
    CHECK(rho(spec, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    for (const double s : {0.1, 0.45, 0.9, 1.7, 2.5}) {
      CHECK(rho(spec, s) == doctest::Approx(rho(spec, -s)).epsilon(1e-14));
      CHECK(std::fabs(rho(spec, s)) <= 1.0 + 1e-12);
    }
    // Cross-check rho against direct quadrature of the convolution.
    const double support = quad_support(spec);
    for (const double s : {0.2, 0.8}) {
      const double conv = oracle::simpson(
          [&](double u) { return eval_kernel(spec, u) * eval_kernel(spec, u - s); }, -support,
          support + s);
      CHECK(rho(spec, s) == doctest::Approx(conv / spec.r_k).epsilon(1e-8));
    }
  }
}

TEST_CASE("minus rho'' at zero equals lambda") {
  for (const auto kind : {KernelKind::gaussian, KernelKind::biweight, KernelKind::epanechnikov}) {
    const KernelSpec spec = make_kernel(kind);
    const double eps = 1e-3;
    const double second =
        oracle::second_derivative([&](double s) { return rho(spec, s); }, 0.0, eps);
    CHECK(-second == doctest::Approx(kernel_lambda(spec)).epsilon(1e-3));
  }
}

TEST_CASE("kernel name round trip") {
  for (const auto kind : {KernelKind::gaussian, KernelKind::biweight, KernelKind::epanechnikov}) {
    CHECK(kernel_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(kernel_from_string("uniform"), InputError);
}
