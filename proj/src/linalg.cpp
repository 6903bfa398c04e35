#include "svytree/linalg.hpp"

#include <algorithm>

namespace svytree {

OrderedQR::OrderedQR(Eigen::Index rows, double tol)
    : rows_(rows), tol_(tol), factors_(rows, 0), tau_(0) {}

void OrderedQR::set_response(const Eigen::VectorXd& z) {
  original_z_ = z;
  z_ = z;
  for (Eigen::Index k = 0; k < rank_; ++k) {
    double workspace = 0.0;
    z_.tail(rows_ - k).applyHouseholderOnTheLeft(
        factors_.col(k).tail(rows_ - k - 1), tau_(k), &workspace);
  }
  has_response_ = true;
}

bool OrderedQR::append_column(const Eigen::VectorXd& col) {
  Eigen::VectorXd v = col;
  for (Eigen::Index k = 0; k < rank_; ++k) {
    double workspace = 0.0;
    v.tail(rows_ - k).applyHouseholderOnTheLeft(
        factors_.col(k).tail(rows_ - k - 1), tau_(k), &workspace);
  }
  const Eigen::Index r = rank_;
  if (r >= rows_) return false;
  const double pivot = v.tail(rows_ - r).norm();
  const double scale = std::max(max_pivot_, col.norm());
  if (!(pivot > tol_ * scale)) return false;

  double tau = 0.0;
  double beta = 0.0;
  Eigen::VectorXd essential(rows_ - r - 1);
  v.tail(rows_ - r).makeHouseholder(essential, tau, beta);
  v(r) = beta;
  v.tail(rows_ - r - 1) = essential;

  factors_.conservativeResize(Eigen::NoChange, r + 1);
  factors_.col(r) = v;
  tau_.conservativeResize(r + 1);
  tau_(r) = tau;
  if (has_response_) {
    double workspace = 0.0;
    z_.tail(rows_ - r).applyHouseholderOnTheLeft(essential, tau, &workspace);
  }
  max_pivot_ = std::max(max_pivot_, std::abs(beta));
  ++rank_;
  return true;
}

std::vector<bool> OrderedQR::append(const Eigen::MatrixXd& cols) {
  std::vector<bool> kept;
  kept.reserve(static_cast<std::size_t>(cols.cols()));
  for (Eigen::Index c = 0; c < cols.cols(); ++c) {
    kept.push_back(append_column(cols.col(c)));
  }
  return kept;
}

double OrderedQR::rss() const {
  if (!has_response_) return 0.0;
  return z_.tail(rows_ - rank_).squaredNorm();
}

Eigen::VectorXd OrderedQR::coefficients() const {
  const auto R = factors_.topLeftCorner(rank_, rank_)
                     .triangularView<Eigen::Upper>();
  return R.solve(z_.head(rank_));
}

Eigen::VectorXd OrderedQR::solve_normal(const Eigen::VectorXd& rhs) const {
  const auto R = factors_.topLeftCorner(rank_, rank_);
  Eigen::VectorXd u =
      R.transpose().triangularView<Eigen::Lower>().solve(rhs);
  return R.triangularView<Eigen::Upper>().solve(u);
}

}  // namespace svytree
