#include "pontryagin/lp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pontryagin::lp {
namespace {

constexpr int kMaxPivots = 100000;

class Tableau {
 public:
  Tableau(Index rows, Index cols) : t_(Matrix::Zero(rows + 1, cols + 1)), basis_(rows, -1) {}

  Index rows() const { return t_.rows() - 1; }
  Index cols() const { return t_.cols() - 1; }
  double& at(Index i, Index j) { return t_(i, j); }
  double at(Index i, Index j) const { return t_(i, j); }
  double& rhs(Index i) { return t_(i, cols()); }
  double rhs(Index i) const { return t_(i, cols()); }
  double& cost(Index j) { return t_(rows(), j); }
  double& objective_rhs() { return t_(rows(), cols()); }
  std::vector<Index>& basis() { return basis_; }
  const std::vector<Index>& basis() const { return basis_; }

  void pivot(Index r, Index e) {
    t_.row(r) /= t_(r, e);
    for (Index i = 0; i < t_.rows(); ++i) {
      if (i == r) continue;
      const double factor = t_(i, e);
      if (factor != 0.0) t_.row(i) -= factor * t_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = e;
  }

  // Runs Bland-rule simplex iterations over columns [0, allowed). Returns the
  // entering column of an unbounded ray, or -1 once optimal.
  Index optimize(Index allowed, double tol) {
    for (int iter = 0; iter < kMaxPivots; ++iter) {
      Index enter = -1;
      for (Index j = 0; j < allowed; ++j) {
        if (cost(j) > tol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return -1;

      Index leave = -1;
      double best = kInfinity;
      for (Index i = 0; i < rows(); ++i) {
        const double a = at(i, enter);
        if (a <= tol) continue;
        const double ratio = rhs(i) / a;
        if (ratio < best - tol ||
            (std::abs(ratio - best) <= tol && leave >= 0 &&
             basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) return enter;
      pivot(leave, enter);
    }
    throw Error("simplex: pivot limit exceeded");
  }

 private:
  Matrix t_;
  std::vector<Index> basis_;
};

}  // namespace

Solution solve(const LinearProgram& program, double tol) {
  const Index n = program.num_variables();
  const Index n_ub = program.ub_matrix.rows();
  const Index n_eq = program.eq_matrix.rows();
  if ((n_ub > 0 && program.ub_matrix.cols() != n) ||
      (n_eq > 0 && program.eq_matrix.cols() != n) ||
      program.ub_rhs.size() != n_ub || program.eq_rhs.size() != n_eq) {
    throw DimensionError("lp::solve: inconsistent constraint dimensions");
  }
  const bool any_free = !program.free_variable.empty();
  if (any_free && static_cast<Index>(program.free_variable.size()) != n) {
    throw DimensionError("lp::solve: free_variable size mismatch");
  }

  // Column layout: split structural columns, then slacks, then artificials.
  std::vector<Index> pos_col(static_cast<std::size_t>(n));
  std::vector<Index> neg_col(static_cast<std::size_t>(n), -1);
  Index n_struct = 0;
  for (Index j = 0; j < n; ++j) {
    pos_col[static_cast<std::size_t>(j)] = n_struct++;
    if (any_free && program.free_variable[static_cast<std::size_t>(j)]) {
      neg_col[static_cast<std::size_t>(j)] = n_struct++;
    }
  }
  const Index m = n_ub + n_eq;
  const Index slack0 = n_struct;
  const Index art0 = slack0 + n_ub;
  Tableau tab(m, art0 + m);

  for (Index i = 0; i < m; ++i) {
    const bool is_ub = i < n_ub;
    const auto row = is_ub ? program.ub_matrix.row(i) : program.eq_matrix.row(i - n_ub);
    double b = is_ub ? program.ub_rhs(i) : program.eq_rhs(i - n_ub);
    for (Index j = 0; j < n; ++j) {
      tab.at(i, pos_col[static_cast<std::size_t>(j)]) = row(j);
      if (neg_col[static_cast<std::size_t>(j)] >= 0) {
        tab.at(i, neg_col[static_cast<std::size_t>(j)]) = -row(j);
      }
    }
    if (is_ub) tab.at(i, slack0 + i) = 1.0;
    if (b < 0.0) {
      for (Index j = 0; j < art0; ++j) tab.at(i, j) = -tab.at(i, j);
      b = -b;
    }
    tab.rhs(i) = b;
    tab.at(i, art0 + i) = 1.0;
    tab.basis()[static_cast<std::size_t>(i)] = art0 + i;
  }

  // Phase 1: maximize -sum(artificials).
  double b_scale = 1.0;
  for (Index i = 0; i < m; ++i) {
    b_scale = std::max(b_scale, tab.rhs(i));
    for (Index j = 0; j < art0; ++j) tab.cost(j) += tab.at(i, j);
    tab.objective_rhs() += tab.rhs(i);
  }
  tab.optimize(art0 + m, tol);
  Solution out;
  if (tab.objective_rhs() > 1e-9 * b_scale) {
    out.status = Status::infeasible;
    return out;
  }

  // Drive artificial variables out of the basis where possible.
  for (Index i = 0; i < m; ++i) {
    if (tab.basis()[static_cast<std::size_t>(i)] < art0) continue;
    Index enter = -1;
    double best = 1e-9;
    for (Index j = 0; j < art0; ++j) {
      if (std::abs(tab.at(i, j)) > best) {
        best = std::abs(tab.at(i, j));
        enter = j;
      }
    }
    if (enter >= 0) tab.pivot(i, enter);
  }

  // Phase 2 objective row.
  Vector cost = Vector::Zero(art0 + m);
  for (Index j = 0; j < n; ++j) {
    cost(pos_col[static_cast<std::size_t>(j)]) = program.objective(j);
    if (neg_col[static_cast<std::size_t>(j)] >= 0) {
      cost(neg_col[static_cast<std::size_t>(j)]) = -program.objective(j);
    }
  }
  for (Index j = 0; j <= tab.cols(); ++j) tab.at(m, j) = 0.0;
  for (Index j = 0; j < art0 + m; ++j) tab.cost(j) = cost(j);
  for (Index i = 0; i < m; ++i) {
    const double cb = cost(tab.basis()[static_cast<std::size_t>(i)]);
    if (cb == 0.0) continue;
    for (Index j = 0; j < art0 + m; ++j) tab.cost(j) -= cb * tab.at(i, j);
    tab.objective_rhs() -= cb * tab.rhs(i);
  }
  const Index unbounded_col = tab.optimize(art0, tol);

  auto to_original = [&](const Vector& structural) {
    Vector x(n);
    for (Index j = 0; j < n; ++j) {
      x(j) = structural(pos_col[static_cast<std::size_t>(j)]);
      if (neg_col[static_cast<std::size_t>(j)] >= 0) {
        x(j) -= structural(neg_col[static_cast<std::size_t>(j)]);
      }
    }
    return x;
  };

  Vector structural = Vector::Zero(art0 + m);
  for (Index i = 0; i < m; ++i) {
    structural(tab.basis()[static_cast<std::size_t>(i)]) = tab.rhs(i);
  }
  out.x = to_original(structural);
  out.value = program.objective.dot(out.x);

  if (unbounded_col >= 0) {
    Vector dir = Vector::Zero(art0 + m);
    dir(unbounded_col) = 1.0;
    for (Index i = 0; i < m; ++i) {
      dir(tab.basis()[static_cast<std::size_t>(i)]) = -tab.at(i, unbounded_col);
    }
    out.status = Status::unbounded;
    out.ray = to_original(dir);
    out.value = kInfinity;
    return out;
  }
  out.status = Status::optimal;
  return out;
}

Vector nnls(const Matrix& a, const Vector& b, double tol) {
  const Index n = a.cols();
  if (a.rows() != b.size()) throw DimensionError("nnls: row mismatch");
  Vector x = Vector::Zero(n);
  if (n == 0) return x;

  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  std::vector<bool> excluded(static_cast<std::size_t>(n), false);
  const double threshold = tol * (1.0 + a.norm() * (1.0 + b.norm()));

  auto solve_passive = [&]() {
    std::vector<Index> idx;
    for (Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    }
    Matrix sub(a.rows(), static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Index>(k)) = a.col(idx[k]);
    const Vector zs = sub.completeOrthogonalDecomposition().solve(b);
    Vector z = Vector::Zero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = zs(static_cast<Index>(k));
    return z;
  };

  const int max_outer = static_cast<int>(3 * n + 30);
  for (int outer = 0; outer < max_outer; ++outer) {
    const Vector w = a.transpose() * (b - a * x);
    Index enter = -1;
    double best = threshold;
    for (Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && !excluded[static_cast<std::size_t>(j)] &&
          w(j) > best) {
        best = w(j);
        enter = j;
      }
    }
    if (enter < 0) break;
    passive[static_cast<std::size_t>(enter)] = true;

    for (int inner = 0; inner < max_outer; ++inner) {
      const Vector z = solve_passive();
      bool all_positive = true;
      for (Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) all_positive = false;
      }
      if (all_positive) {
        x = z;
        break;
      }
      double alpha = 1.0;
      for (Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) {
          const double denom = x(j) - z(j);
          if (denom > 0.0) alpha = std::min(alpha, x(j) / denom);
        }
      }
      x += alpha * (z - x);
      for (Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x(j) <= 1e-15) {
          passive[static_cast<std::size_t>(j)] = false;
          x(j) = 0.0;
        }
      }
      // The entering column could not be kept positive: numerical stall.
      if (!passive[static_cast<std::size_t>(enter)]) {
        excluded[static_cast<std::size_t>(enter)] = true;
        break;
      }
    }
  }
  return x;
}

Vector mixed_nnls(const Matrix& a, const Vector& b, Index free_count, double tol) {
  if (free_count < 0 || free_count > a.cols()) {
    throw DimensionError("mixed_nnls: bad free_count");
  }
  const Index n = a.cols();
  Matrix split(a.rows(), n + free_count);
  split.leftCols(n) = a;
  split.rightCols(free_count) = -a.leftCols(free_count);
  const Vector y = nnls(split, b, tol);
  Vector x = y.head(n);
  x.head(free_count) -= y.tail(free_count);
  return x;
}

}  // namespace pontryagin::lp
