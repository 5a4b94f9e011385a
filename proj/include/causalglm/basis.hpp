#pragma once

// Design matrices for covariate subsets: linear columns or additive
// penalized B-spline smooths.
//
// Splines are clamped cubics with interior knots at covariate quantiles and
// linear extrapolation beyond the boundary knots. Each covariate's raw basis
// (spline_df + 1 functions) is reparameterized onto the null space of the
// sum-over-training-rows constraint, so every smooth block is centered and
// the intercept alone carries the level; that leaves spline_df columns per
// covariate. The roughness penalty is a squared second-order divided
// difference on the Greville abscissae, annihilating functions linear in x
// regardless of knot spacing.

#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "causalglm/dataset.hpp"

namespace causalglm {

enum class BasisKind { Linear, AdditiveSpline };

struct BasisSpec {
  BasisKind kind = BasisKind::AdditiveSpline;
  int spline_df = 8;       // centered columns per covariate
  int penalty_order = 2;
  bool intercept = true;   // intercept column is always present in v1
};

namespace bspline {

inline constexpr int kDegree = 3;

// Clamped knot vector for nbasis cubic B-splines on [lo, hi] with interior
// knots at the quantiles of the sorted sample.
inline Eigen::VectorXd clamped_knots(const Eigen::VectorXd& sorted_values, int nbasis) {
  const Eigen::Index n = sorted_values.size();
  const double lo = sorted_values[0];
  const double hi = sorted_values[n - 1];
  const int interior = nbasis - kDegree - 1;
  Eigen::VectorXd knots(nbasis + kDegree + 1);
  for (int k = 0; k <= kDegree; ++k) {
    knots[k] = lo;
    knots[nbasis + k] = hi;
  }
  for (int k = 1; k <= interior; ++k) {
    const double p = static_cast<double>(k) / (interior + 1);
    const double h = p * static_cast<double>(n - 1);
    const Eigen::Index idx = static_cast<Eigen::Index>(std::floor(h));
    const double frac = h - static_cast<double>(idx);
    const double q = idx + 1 < n
                         ? sorted_values[idx] * (1.0 - frac) + sorted_values[idx + 1] * frac
                         : sorted_values[idx];
    knots[kDegree + k] = q;
  }
  // The active knots [lo, interior..., hi] must be strictly increasing.
  for (int k = kDegree; k < nbasis; ++k) {
    if (!(knots[k] < knots[k + 1]))
      throw std::invalid_argument(
          "spline basis: insufficient distinct values for knot placement");
  }
  return knots;
}

inline int find_span(const Eigen::VectorXd& knots, int nbasis, double x) {
  // Span i with knots[i] <= x < knots[i+1], clamped to the valid range.
  int lo = kDegree;
  int hi = nbasis;  // one past last span start
  if (x >= knots[nbasis]) return nbasis - 1;
  if (x <= knots[kDegree]) return kDegree;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (x < knots[mid])
      hi = mid;
    else
      lo = mid;
  }
  return lo;
}

// Nonzero basis functions N_{span-deg..span} of a given degree at x.
inline void basis_funs(const Eigen::VectorXd& knots, int span, double x, int degree,
                       double* out) {
  double left[kDegree + 1];
  double right[kDegree + 1];
  out[0] = 1.0;
  for (int j = 1; j <= degree; ++j) {
    left[j] = x - knots[span + 1 - j];
    right[j] = knots[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[j] = saved;
  }
}

// Row of the raw cubic basis at x inside [lo, hi].
inline Eigen::VectorXd row_core(const Eigen::VectorXd& knots, int nbasis, double x) {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(nbasis);
  const int span = find_span(knots, nbasis, x);
  double vals[kDegree + 1];
  basis_funs(knots, span, x, kDegree, vals);
  for (int r = 0; r <= kDegree; ++r) row[span - kDegree + r] = vals[r];
  return row;
}

// Derivative row at x inside [lo, hi], via the degree-2 basis.
inline Eigen::VectorXd deriv_row_core(const Eigen::VectorXd& knots, int nbasis, double x) {
  Eigen::VectorXd lower = Eigen::VectorXd::Zero(nbasis + 1);
  const int span = find_span(knots, nbasis, x);
  double vals[kDegree + 1];
  basis_funs(knots, span, x, kDegree - 1, vals);
  for (int r = 0; r <= kDegree - 1; ++r) lower[span - (kDegree - 1) + r] = vals[r];

  Eigen::VectorXd row = Eigen::VectorXd::Zero(nbasis);
  for (int j = 0; j < nbasis; ++j) {
    double acc = 0.0;
    const double d1 = knots[j + kDegree] - knots[j];
    if (d1 > 0.0) acc += lower[j] / d1;
    const double d2 = knots[j + kDegree + 1] - knots[j + 1];
    if (d2 > 0.0) acc -= lower[j + 1] / d2;
    row[j] = kDegree * acc;
  }
  return row;
}

// Raw basis row at any x; beyond the boundary knots the basis continues
// linearly (first-order expansion at the boundary).
inline Eigen::VectorXd row(const Eigen::VectorXd& knots, int nbasis, double x) {
  const double lo = knots[kDegree];
  const double hi = knots[nbasis];
  if (x < lo) return row_core(knots, nbasis, lo) + (x - lo) * deriv_row_core(knots, nbasis, lo);
  if (x > hi) return row_core(knots, nbasis, hi) + (x - hi) * deriv_row_core(knots, nbasis, hi);
  return row_core(knots, nbasis, x);
}

// Greville abscissae: knot averages where the basis reproduces linear
// functions with linear-in-site coefficients.
inline Eigen::VectorXd greville(const Eigen::VectorXd& knots, int nbasis) {
  Eigen::VectorXd g(nbasis);
  for (int j = 0; j < nbasis; ++j)
    g[j] = (knots[j + 1] + knots[j + 2] + knots[j + 3]) / kDegree;
  return g;
}

// Divided-difference penalty root D: order 1 or 2 over the Greville sites.
inline Eigen::MatrixXd difference_root(const Eigen::VectorXd& sites, int order) {
  const int q0 = static_cast<int>(sites.size());
  Eigen::MatrixXd d1 = Eigen::MatrixXd::Zero(q0 - 1, q0);
  for (int j = 0; j < q0 - 1; ++j) {
    const double w = 1.0 / (sites[j + 1] - sites[j]);
    d1(j, j) = -w;
    d1(j, j + 1) = w;
  }
  if (order == 1) return d1;
  if (order != 2) throw std::invalid_argument("basis: penalty_order must be 1 or 2");
  Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(q0 - 2, q0 - 1);
  for (int j = 0; j < q0 - 2; ++j) {
    d2(j, j) = -1.0;
    d2(j, j + 1) = 1.0;
  }
  return d2 * d1;
}

}  // namespace bspline

// Per-covariate basis data needed to evaluate the design on new rows.
struct CovariateBasis {
  std::string name;
  Eigen::VectorXd knots;       // empty for linear columns
  Eigen::MatrixXd constraint;  // raw-to-centered map Z, empty for linear
};

struct Design {
  Eigen::MatrixXd matrix;             // n x q, first column the intercept
  Eigen::MatrixXd penalty;            // q x q PSD, zero on intercept row/col
  std::vector<std::string> columns;   // per-column labels
  std::vector<int> subset;            // covariate indices, order preserved
  std::vector<CovariateBasis> bases;  // aligned with subset
  BasisSpec spec;

  Eigen::Index n() const { return matrix.rows(); }
  Eigen::Index q() const { return matrix.cols(); }
};

namespace detail {

struct CovariateBlock {
  Eigen::MatrixXd columns;   // n x (1 or spline_df)
  Eigen::MatrixXd penalty;   // zero for linear
  CovariateBasis basis;
};

inline CovariateBlock make_block(const std::string& name, const Eigen::VectorXd& x,
                                 const BasisSpec& spec) {
  CovariateBlock block;
  block.basis.name = name;
  if (spec.kind == BasisKind::Linear) {
    block.columns = x;
    block.penalty = Eigen::MatrixXd::Zero(1, 1);
    return block;
  }

  if (spec.spline_df < 3)
    throw std::invalid_argument("basis: spline_df must be at least 3");
  const int nbasis = spec.spline_df + 1;

  Eigen::VectorXd sorted = x;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  Eigen::Index distinct = sorted.size() == 0 ? 0 : 1;
  for (Eigen::Index i = 1; i < sorted.size(); ++i)
    if (sorted[i] != sorted[i - 1]) ++distinct;
  if (distinct < spec.spline_df)
    throw std::invalid_argument("basis: covariate '" + name +
                                "' has too few distinct values for " +
                                std::to_string(spec.spline_df) + " spline columns");

  const Eigen::VectorXd knots = bspline::clamped_knots(sorted, nbasis);

  Eigen::MatrixXd raw(x.size(), nbasis);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    raw.row(i) = bspline::row(knots, nbasis, x[i]).transpose();

  // Sum-to-zero constraint over the training rows: keep the orthonormal
  // complement of the column-mean direction.
  Eigen::VectorXd colmeans = raw.colwise().mean();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(colmeans);
  const Eigen::MatrixXd full_q = qr.householderQ();
  const Eigen::MatrixXd constraint = full_q.rightCols(nbasis - 1);

  const Eigen::VectorXd sites = bspline::greville(knots, nbasis);
  const Eigen::MatrixXd droot = bspline::difference_root(sites, spec.penalty_order);

  block.columns = raw * constraint;
  const Eigen::MatrixXd droot_z = droot * constraint;
  block.penalty = droot_z.transpose() * droot_z;
  block.basis.knots = knots;
  block.basis.constraint = constraint;
  return block;
}

inline void check_full_rank(const Eigen::MatrixXd& matrix) {
  const Eigen::MatrixXd gram = matrix.transpose() * matrix;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const Eigen::VectorXd d = ldlt.vectorD();
  const double dmax = d.maxCoeff();
  if (!(dmax > 0.0) || d.minCoeff() <= dmax * 1e-10)
    throw std::invalid_argument("design: matrix is rank-deficient after centering");
}

}  // namespace detail

// Caches per-covariate blocks so that many subset designs over one dataset
// share the spline construction.
class DesignBuilder {
 public:
  DesignBuilder(const Dataset& data, BasisSpec spec)
      : covariates_(data.covariate_names()), spec_(spec) {
    blocks_.resize(covariates_.size());
    data_ = &data;
  }

  const std::vector<std::string>& covariates() const { return covariates_; }

  // Builds blocks for the given covariate indices (all, if empty).
  void prepare(const std::vector<int>& indices) {
    if (indices.empty()) {
      for (int j = 0; j < static_cast<int>(covariates_.size()); ++j) prepare_one(j);
      return;
    }
    for (int j : indices) prepare_one(j);
  }

  Design build(const std::vector<int>& subset) const {
    for (int j : subset) {
      if (j < 0 || j >= static_cast<int>(covariates_.size()))
        throw std::invalid_argument("design: covariate index out of range");
      if (!blocks_[static_cast<std::size_t>(j)])
        throw std::logic_error("design: covariate block not prepared");
    }
    for (std::size_t a = 0; a < subset.size(); ++a)
      for (std::size_t b = a + 1; b < subset.size(); ++b)
        if (subset[a] == subset[b])
          throw std::invalid_argument("design: duplicate covariate in subset");

    const Eigen::Index n = data_->n();
    Eigen::Index q = 1;
    for (int j : subset) q += blocks_[static_cast<std::size_t>(j)]->columns.cols();

    Design design;
    design.spec = spec_;
    design.subset = subset;
    design.matrix.resize(n, q);
    design.matrix.col(0).setOnes();
    design.penalty = Eigen::MatrixXd::Zero(q, q);
    design.columns.push_back("(intercept)");

    Eigen::Index at = 1;
    for (int j : subset) {
      const auto& block = *blocks_[static_cast<std::size_t>(j)];
      const Eigen::Index w = block.columns.cols();
      design.matrix.middleCols(at, w) = block.columns;
      design.penalty.block(at, at, w, w) = block.penalty;
      if (spec_.kind == BasisKind::Linear) {
        design.columns.push_back(covariates_[static_cast<std::size_t>(j)]);
      } else {
        for (Eigen::Index c = 0; c < w; ++c)
          design.columns.push_back(covariates_[static_cast<std::size_t>(j)] + ":s" +
                                   std::to_string(c + 1));
      }
      design.bases.push_back(block.basis);
      at += w;
    }
    detail::check_full_rank(design.matrix);
    return design;
  }

 private:
  void prepare_one(int j) {
    auto& slot = blocks_[static_cast<std::size_t>(j)];
    if (slot) return;
    const std::string& name = covariates_[static_cast<std::size_t>(j)];
    slot = detail::make_block(name, data_->column(name), spec_);
  }

  const Dataset* data_;
  std::vector<std::string> covariates_;
  BasisSpec spec_;
  std::vector<std::optional<detail::CovariateBlock>> blocks_;
};

// Builds the design for one covariate subset. Indices refer to positions in
// data.covariate_names(); the empty subset yields the intercept-only design.
inline Design build_design(const Dataset& data, const std::vector<int>& subset,
                           const BasisSpec& spec) {
  DesignBuilder builder(data, spec);
  builder.prepare(subset);
  return builder.build(subset);
}

// Evaluates the design's basis on new covariate rows: same columns, same
// semantics; splines extrapolate linearly beyond their boundary knots.
inline Eigen::MatrixXd eval_basis(const Design& design, const Dataset& x_new) {
  const Eigen::Index n = x_new.n();
  Eigen::MatrixXd out(n, design.q());
  out.col(0).setOnes();
  Eigen::Index at = 1;
  for (const auto& basis : design.bases) {
    const int col = x_new.index_of(basis.name);
    if (col < 0)
      throw DataError("eval_basis: missing covariate column '" + basis.name + "'");
    const Eigen::VectorXd& x = x_new.columns[static_cast<std::size_t>(col)];
    if (design.spec.kind == BasisKind::Linear) {
      out.col(at) = x;
      at += 1;
    } else {
      const int nbasis = static_cast<int>(basis.constraint.rows());
      const Eigen::Index w = basis.constraint.cols();
      for (Eigen::Index i = 0; i < n; ++i)
        out.block(i, at, 1, w) =
            bspline::row(basis.knots, nbasis, x[i]).transpose() * basis.constraint;
      at += w;
    }
  }
  return out;
}

}  // namespace causalglm
