#pragma once

#include <Eigen/Core>

#include <string>
#include <utility>
#include <vector>

namespace catef {

//! Immutable sample of (Y, D, Z) observations plus the index set that selects
//! the covariates of interest X within Z. Safe to share read-only across
//! parallel workers once constructed.
struct Dataset {
  Eigen::VectorXd y;                  // outcome, length n
  Eigen::VectorXd d;                  // treatment indicator in {0,1}, length n
  Eigen::MatrixXd z;                  // covariates, n x p
  std::vector<Eigen::Index> x_cols;   // distinct indices into columns of z

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return z.cols(); }
  Eigen::Index dim_x() const { return static_cast<Eigen::Index>(x_cols.size()); }
};

// Validates all Dataset invariants (shapes, binary treatment, finite values,
// x_cols distinct and in range) and returns the assembled value.
Dataset make_dataset(Eigen::VectorXd y, Eigen::VectorXd d, Eigen::MatrixXd z,
                     std::vector<Eigen::Index> x_cols);

// The n x dX matrix of the covariates of interest, in x_cols order.
Eigen::MatrixXd x_matrix(const Dataset& data);

//! Recipe for expanding Z into a regression design: selected base columns,
//! optional intercept, squared columns, and pairwise interactions. Columns of
//! the expanded design are ordered [intercept?, base..., squares...,
//! interactions...].
struct DesignSpec {
  std::vector<Eigen::Index> base_cols;
  bool add_intercept = true;
  std::vector<Eigen::Index> squares;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> interactions;

  Eigen::Index width() const {
    return static_cast<Eigen::Index>((add_intercept ? 1 : 0) + base_cols.size() +
                                     squares.size() + interactions.size());
  }
};

// Throws InputError when spec references columns outside [0, p) or repeats a
// column specification.
void validate_design(const DesignSpec& spec, Eigen::Index p);

Eigen::MatrixXd build_design(const Dataset& data, const DesignSpec& spec);

//! Loads a header-row CSV with decimal-point reals. Column selection is by
//! name; x_cols must name a subset of covariates. Any missing, non-numeric or
//! non-finite cell in a selected column rejects the load.
Dataset load_csv(const std::string& path, const std::string& outcome,
                 const std::string& treatment, const std::vector<std::string>& covariates,
                 const std::vector<std::string>& x_cols);

} // namespace catef
