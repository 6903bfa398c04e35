#pragma once

#include <Eigen/Dense>
#include <vector>

namespace svytree {

/// Householder QR built one column at a time, in the order columns are
/// offered. A column is dropped when its pivot (the norm of what remains
/// after projecting out the kept columns) is at most
/// tol * max(largest kept pivot, the column's own norm); earlier columns are
/// therefore always preferred over later, collinear ones.
class OrderedQR {
 public:
  explicit OrderedQR(Eigen::Index rows, double tol = 1e-10);

  /// Response to be reduced alongside the columns. May be set before or
  /// after columns are appended.
  void set_response(const Eigen::VectorXd& z);

  /// Appends columns left to right; returns one keep flag per column.
  std::vector<bool> append(const Eigen::MatrixXd& cols);
  bool append_column(const Eigen::VectorXd& col);

  Eigen::Index rows() const noexcept { return rows_; }
  Eigen::Index rank() const noexcept { return rank_; }

  /// Residual sum of squares of the response on the kept columns.
  double rss() const;

  /// Least-squares coefficients on the kept columns.
  Eigen::VectorXd coefficients() const;

  /// Solves (R^T R) x = rhs, i.e. the normal equations A^T A x = rhs for the
  /// kept columns.
  Eigen::VectorXd solve_normal(const Eigen::VectorXd& rhs) const;

 private:
  Eigen::Index rows_;
  double tol_;
  Eigen::Index rank_ = 0;
  double max_pivot_ = 0.0;
  Eigen::MatrixXd factors_;   // R on and above the diagonal, reflectors below
  Eigen::VectorXd tau_;
  Eigen::VectorXd original_z_;
  Eigen::VectorXd z_;         // Q^T z
  bool has_response_ = false;
};

}  // namespace svytree
