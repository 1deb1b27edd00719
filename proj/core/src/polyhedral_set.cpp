#include "pontryagin/polyhedral_set.hpp"

#include "pontryagin/linalg.hpp"
#include "pontryagin/lp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pontryagin {
namespace {

constexpr long long kMaxEnumeration = 2'000'000;

long long binomial(Index n, Index k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (Index i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > kMaxEnumeration) return r;
  }
  return r;
}

// Calls fn(indices) for every k-subset of {0..n-1} in lexicographic order.
template <typename Fn>
void for_each_subset(Index n, Index k, Fn&& fn) {
  std::vector<Index> idx(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  if (k > n) return;
  while (true) {
    fn(idx);
    Index i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < k; ++j) {
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
}

bool is_zero_or_inf(double v) { return v == 0.0 || std::isinf(v); }

// Rows scaled to unit norm; zero rows dropped.
Matrix normalized_rows(const Matrix& g) {
  Matrix out(g.rows(), g.cols());
  Index k = 0;
  for (Index i = 0; i < g.rows(); ++i) {
    const double nrm = g.row(i).norm();
    if (nrm > 1e-14) out.row(k++) = g.row(i) / nrm;
  }
  return out.topRows(k);
}

void push_unique(std::vector<Vector>& out, const Vector& v, double tol) {
  for (const auto& w : out) {
    if ((w - v).norm() <= tol) return;
  }
  out.push_back(v);
}

Matrix columns(const std::vector<Vector>& vs, Index rows) {
  Matrix m(rows, static_cast<Index>(vs.size()));
  for (std::size_t i = 0; i < vs.size(); ++i) m.col(static_cast<Index>(i)) = vs[i];
  return m;
}

}  // namespace

PolyhedralSet PolyhedralSet::all_space(Index dim) {
  if (dim <= 0) throw DimensionError("PolyhedralSet: dimension must be positive");
  PolyhedralSet s;
  s.kind_ = SetKind::all_space;
  s.dim_ = dim;
  return s;
}

PolyhedralSet PolyhedralSet::box(Vector lower, Vector upper) {
  if (lower.size() != upper.size() || lower.size() == 0) {
    throw DimensionError("PolyhedralSet::box: bound sizes differ or are empty");
  }
  for (Index i = 0; i < lower.size(); ++i) {
    if (std::isnan(lower(i)) || std::isnan(upper(i))) {
      throw NonFiniteError("PolyhedralSet::box: NaN bound");
    }
    if (lower(i) > upper(i) || lower(i) == kInfinity || upper(i) == -kInfinity) {
      throw MembershipError("PolyhedralSet::box: empty box at coordinate " +
                            std::to_string(i));
    }
  }
  PolyhedralSet s;
  s.kind_ = SetKind::box;
  s.dim_ = lower.size();
  s.lower_ = std::move(lower);
  s.upper_ = std::move(upper);
  return s;
}

PolyhedralSet PolyhedralSet::half_spaces(Matrix normals, Vector offsets) {
  if (normals.rows() != offsets.size() || normals.cols() == 0) {
    throw DimensionError("PolyhedralSet::half_spaces: inconsistent dimensions");
  }
  linalg::require_finite(normals, "half-space normals");
  linalg::require_finite(offsets, "half-space offsets");
  if (normals.rows() == 0) return all_space(normals.cols());

  lp::LinearProgram feas;
  feas.objective = Vector::Zero(normals.cols());
  feas.ub_matrix = normals;
  feas.ub_rhs = offsets;
  feas.free_variable.assign(static_cast<std::size_t>(normals.cols()), true);
  if (lp::solve(feas).status == lp::Status::infeasible) {
    throw MembershipError("PolyhedralSet::half_spaces: empty polyhedron");
  }
  PolyhedralSet s;
  s.kind_ = SetKind::half_spaces;
  s.dim_ = normals.cols();
  s.normals_ = std::move(normals);
  s.offsets_ = std::move(offsets);
  return s;
}

bool operator==(const PolyhedralSet& a, const PolyhedralSet& b) {
  return a.kind_ == b.kind_ && a.dim_ == b.dim_ && linalg::identical(a.lower_, b.lower_) &&
         linalg::identical(a.upper_, b.upper_) && linalg::identical(a.normals_, b.normals_) &&
         linalg::identical(a.offsets_, b.offsets_);
}

double PolyhedralSet::violation(const Vector& u) const {
  if (u.size() != dim_) {
    throw DimensionError("PolyhedralSet: point has dimension " +
                         std::to_string(u.size()) + ", set has " + std::to_string(dim_));
  }
  double worst = 0.0;
  switch (kind_) {
    case SetKind::all_space:
      break;
    case SetKind::box:
      for (Index i = 0; i < dim_; ++i) {
        worst = std::max({worst, lower_(i) - u(i), u(i) - upper_(i)});
      }
      break;
    case SetKind::half_spaces:
      worst = std::max(worst, (normals_ * u - offsets_).maxCoeff());
      break;
  }
  return worst;
}

bool PolyhedralSet::is_cone() const {
  switch (kind_) {
    case SetKind::all_space:
      return true;
    case SetKind::box:
      for (Index i = 0; i < dim_; ++i) {
        if (!is_zero_or_inf(lower_(i)) || !is_zero_or_inf(upper_(i))) return false;
      }
      return true;
    case SetKind::half_spaces:
      return offsets_.cwiseAbs().maxCoeff() == 0.0;
  }
  return false;
}

bool PolyhedralSet::is_bounded() const {
  switch (kind_) {
    case SetKind::all_space:
      return false;
    case SetKind::box:
      return lower_.allFinite() && upper_.allFinite();
    case SetKind::half_spaces: {
      const auto rec = decompose_cone(half_spaces(normals_, Vector::Zero(normals_.rows())));
      return rec.lineality.cols() == 0 && rec.rays.cols() == 0;
    }
  }
  return false;
}

PolyhedralSet PolyhedralSet::as_half_spaces() const {
  if (kind_ == SetKind::half_spaces) return *this;
  if (kind_ == SetKind::all_space) return *this;
  std::vector<std::pair<Vector, double>> rows;
  for (Index i = 0; i < dim_; ++i) {
    if (std::isfinite(upper_(i))) {
      Vector a = Vector::Zero(dim_);
      a(i) = 1.0;
      rows.emplace_back(a, upper_(i));
    }
    if (std::isfinite(lower_(i))) {
      Vector a = Vector::Zero(dim_);
      a(i) = -1.0;
      rows.emplace_back(a, -lower_(i));
    }
  }
  if (rows.empty()) return all_space(dim_);
  Matrix g(static_cast<Index>(rows.size()), dim_);
  Vector b(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    g.row(static_cast<Index>(k)) = rows[k].first.transpose();
    b(static_cast<Index>(k)) = rows[k].second;
  }
  return half_spaces(std::move(g), std::move(b));
}

PolyhedralSet tangent_cone(const PolyhedralSet& set, const Vector& point, double tol) {
  const double viol = set.violation(point);
  if (viol > tol) {
    throw MembershipError("tangent_cone: point violates the set by " + std::to_string(viol));
  }
  const Index m = set.dim();
  switch (set.kind()) {
    case SetKind::all_space:
      return PolyhedralSet::all_space(m);
    case SetKind::box: {
      Vector lo(m), hi(m);
      bool any_active = false;
      for (Index i = 0; i < m; ++i) {
        const bool at_lower = point(i) - set.lower()(i) <= tol;
        const bool at_upper = set.upper()(i) - point(i) <= tol;
        lo(i) = at_lower ? 0.0 : -kInfinity;
        hi(i) = at_upper ? 0.0 : kInfinity;
        any_active = any_active || at_lower || at_upper;
      }
      if (!any_active) return PolyhedralSet::all_space(m);
      return PolyhedralSet::box(std::move(lo), std::move(hi));
    }
    case SetKind::half_spaces: {
      const Vector slack = set.offsets() - set.normals() * point;
      std::vector<Index> active;
      for (Index i = 0; i < slack.size(); ++i) {
        if (slack(i) <= tol) active.push_back(i);
      }
      if (active.empty()) return PolyhedralSet::all_space(m);
      Matrix g(static_cast<Index>(active.size()), m);
      for (std::size_t k = 0; k < active.size(); ++k) {
        g.row(static_cast<Index>(k)) = set.normals().row(active[k]);
      }
      return PolyhedralSet::half_spaces(std::move(g), Vector::Zero(static_cast<Index>(active.size())));
    }
  }
  return PolyhedralSet::all_space(m);
}

Index ConeGenerators::span_dim() const { return span_basis().cols(); }

Matrix ConeGenerators::span_basis() const {
  const Matrix gens = linalg::hstack(lineality, rays);
  if (gens.cols() == 0) return Matrix(ambient_dim(), 0);
  return linalg::range_basis(gens);
}

Matrix ConeGenerators::generating_set() const {
  Matrix out(ambient_dim(), 2 * lineality.cols() + rays.cols());
  out << lineality, -lineality, rays;
  return out;
}

ConeGenerators decompose_cone(const PolyhedralSet& cone, double tol) {
  if (!cone.is_cone()) {
    throw MembershipError("decompose_cone: set is not a cone (nonzero offsets)");
  }
  const Index m = cone.dim();
  ConeGenerators out;
  switch (cone.kind()) {
    case SetKind::all_space:
      out.lineality = Matrix::Identity(m, m);
      out.rays = Matrix(m, 0);
      return out;
    case SetKind::box: {
      std::vector<Vector> free_dirs, rays;
      for (Index i = 0; i < m; ++i) {
        const bool lo_free = std::isinf(cone.lower()(i));
        const bool hi_free = std::isinf(cone.upper()(i));
        Vector e = Vector::Unit(m, i);
        if (lo_free && hi_free) {
          free_dirs.push_back(e);
        } else if (hi_free) {
          rays.push_back(e);
        } else if (lo_free) {
          rays.push_back(-e);
        }
      }
      out.lineality = columns(free_dirs, m);
      out.rays = columns(rays, m);
      return out;
    }
    case SetKind::half_spaces:
      break;
  }

  const Matrix g = normalized_rows(cone.normals());
  out.lineality = linalg::null_space_basis(g);
  const Matrix w = linalg::complement_basis(out.lineality, m);
  const Index k = w.cols();
  std::vector<Vector> rays;
  if (k > 0) {
    const Matrix gw = g * w;
    const Index r = gw.rows();
    if (binomial(r, k - 1) > kMaxEnumeration) {
      throw Error("decompose_cone: too many constraint subsets to enumerate");
    }
    auto feasible = [&](const Vector& z) { return (gw * z).maxCoeff() <= tol; };
    for_each_subset(r, k - 1, [&](const std::vector<Index>& idx) {
      Matrix sub(static_cast<Index>(idx.size()), k);
      for (std::size_t q = 0; q < idx.size(); ++q) sub.row(static_cast<Index>(q)) = gw.row(idx[q]);
      const Matrix ns = linalg::null_space_basis(sub);
      if (ns.cols() != 1) return;
      const Vector z = ns.col(0).normalized();
      for (double sign : {1.0, -1.0}) {
        const Vector zs = sign * z;
        if (feasible(zs)) push_unique(rays, (w * zs).normalized(), 1e-8);
      }
    });
  }
  out.rays = columns(rays, m);
  return out;
}

std::vector<Vector> vertices(const PolyhedralSet& set, double tol) {
  if (!set.is_bounded()) throw Error("vertices: set is unbounded");
  const Index m = set.dim();
  std::vector<Vector> out;
  if (set.kind() == SetKind::box) {
    std::vector<Index> varying;
    for (Index i = 0; i < m; ++i) {
      if (set.upper()(i) > set.lower()(i)) varying.push_back(i);
    }
    if (varying.size() > 24) throw Error("vertices: too many box corners");
    const std::size_t count = std::size_t{1} << varying.size();
    for (std::size_t mask = 0; mask < count; ++mask) {
      Vector v = set.lower();
      for (std::size_t b = 0; b < varying.size(); ++b) {
        if (mask & (std::size_t{1} << b)) v(varying[b]) = set.upper()(varying[b]);
      }
      out.push_back(v);
    }
    return out;
  }

  const Matrix& g = set.normals();
  const Vector& b = set.offsets();
  if (binomial(g.rows(), m) > kMaxEnumeration) {
    throw Error("vertices: too many constraint subsets to enumerate");
  }
  for_each_subset(g.rows(), m, [&](const std::vector<Index>& idx) {
    Matrix sub(m, m);
    Vector rhs(m);
    for (Index q = 0; q < m; ++q) {
      sub.row(q) = g.row(idx[static_cast<std::size_t>(q)]);
      rhs(q) = b(idx[static_cast<std::size_t>(q)]);
    }
    Eigen::FullPivLU<Matrix> lu(sub);
    if (lu.rank() < m) return;
    const Vector v = lu.solve(rhs);
    if (set.violation(v) <= tol) push_unique(out, v, 1e-9 * (1.0 + v.norm()));
  });
  return out;
}

}  // namespace pontryagin
