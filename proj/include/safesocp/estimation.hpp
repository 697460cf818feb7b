#pragma once

// Data-driven worst-case models: a noiseless measurement oracle, a dataset
// with exact nearest-neighbor queries, Lipschitz-certified error radii, and
// the online acquisition step triggered by infeasibility.

#include "safesocp/constraints.hpp"

#include <vector>

namespace safesocp {

struct EmptyDatasetError : DomainError {
  explicit EmptyDatasetError(const std::string& what) : DomainError(what) {}
};
struct WorkspaceError : DomainError {
  explicit WorkspaceError(const std::string& what) : DomainError(what) {}
};

/// Noiseless measurement source: query(y) returns (f(y), g(y)) of the true
/// dynamics. Queries are pure, so repeats are identical.
template <typename Scalar>
struct Oracle {
  AffineDynamics<Scalar> truth;

  std::pair<Vector<Scalar>, Matrix<Scalar>> query(const Vector<Scalar>& y) const {
    return {truth.f(y), truth.g(y)};
  }
};

/// Measurement set {x_i, f(x_i), g(x_i)} with exact nearest-neighbor lookup
/// (linear scan; the contract is exactness, sizes stay small). Insertion
/// deduplicates points within 1e-12 and distance ties resolve to the lowest
/// insertion index.
template <typename Scalar>
class Dataset {
 public:
  Dataset(int n, int m) : n_(n), m_(m) {
    if (n < 1 || m < 1) throw DimensionError("Dataset: bad dimensions");
  }

  int state_dim() const { return n_; }
  int input_dim() const { return m_; }
  std::size_t size() const { return points_.size(); }

  /// Returns false (and stores nothing) for a duplicate of an existing point.
  bool insert(const Vector<Scalar>& x, const Vector<Scalar>& f, const Matrix<Scalar>& g) {
    if (x.size() != n_ || f.size() != n_ || g.rows() != n_ || g.cols() != m_)
      throw DimensionError("Dataset::insert: dimension mismatch");
    for (const auto& p : points_)
      if ((p - x).norm() <= Scalar(1e-12)) return false;
    points_.push_back(x);
    f_values_.push_back(f);
    g_values_.push_back(g);
    return true;
  }

  bool insert_from(const Oracle<Scalar>& oracle, const Vector<Scalar>& x) {
    auto [f, g] = oracle.query(x);
    return insert(x, f, g);
  }

  struct Neighbor {
    std::size_t index;
    Scalar distance;
  };

  Neighbor nearest(const Vector<Scalar>& x) const {
    if (points_.empty()) throw EmptyDatasetError("Dataset::nearest: dataset is empty");
    std::size_t best = 0;
    Scalar best_d = (points_[0] - x).norm();
    for (std::size_t i = 1; i < points_.size(); ++i) {
      const Scalar d = (points_[i] - x).norm();
      if (d < best_d) {  // strict: ties keep the earliest insertion
        best_d = d;
        best = i;
      }
    }
    return {best, best_d};
  }

  const Vector<Scalar>& point(std::size_t i) const { return points_[i]; }
  const Vector<Scalar>& f_value(std::size_t i) const { return f_values_[i]; }
  const Matrix<Scalar>& g_value(std::size_t i) const { return g_values_[i]; }

 private:
  int n_, m_;
  std::vector<Vector<Scalar>> points_;
  std::vector<Vector<Scalar>> f_values_;
  std::vector<Matrix<Scalar>> g_values_;
};

template <typename Scalar>
struct LipschitzConstants {
  Scalar k_f = Scalar(3.0);
  Scalar k_g = Scalar(0.5);

  void validate() const {
    if (!(k_f > Scalar(0) && k_g > Scalar(0)))
      throw DomainError("LipschitzConstants: constants must be positive");
  }
};

template <typename Scalar>
struct NnEstimate {
  Vector<Scalar> fhat;
  Matrix<Scalar> ghat;
  Scalar e_f;
  Scalar e_g;
  std::size_t nn_index;
  Scalar nn_distance;
};

/// Nearest-neighbor estimate with Lipschitz error radii: the stored values
/// at the closest datapoint, e_f = K_f d, e_g = K_g d.
template <typename Scalar>
NnEstimate<Scalar> nn_estimate(const Dataset<Scalar>& ds, const LipschitzConstants<Scalar>& lip,
                               const Vector<Scalar>& x) {
  lip.validate();
  const auto nn = ds.nearest(x);
  return {ds.f_value(nn.index), ds.g_value(nn.index), lip.k_f * nn.distance,
          lip.k_g * nn.distance, nn.index, nn.distance};
}

/// Worst-case model backed by nearest-neighbor dynamics estimates and exact
/// barrier data (e_h == e_gradh == 0). The dataset is captured by reference:
/// inserted points take effect immediately, single writer assumed.
template <typename Scalar>
WorstCaseModel<Scalar> build_worstcase_model(const Dataset<Scalar>& ds,
                                             const LipschitzConstants<Scalar>& lip,
                                             std::function<Scalar(const Vector<Scalar>&)> h,
                                             std::function<Vector<Scalar>(const Vector<Scalar>&)> gradh) {
  lip.validate();
  WorstCaseModel<Scalar> model;
  model.dims = SystemDims(ds.state_dim(), ds.input_dim());
  const Dataset<Scalar>* dsp = &ds;
  model.fhat = [dsp, lip](const Vector<Scalar>& x) { return nn_estimate(*dsp, lip, x).fhat; };
  model.ghat = [dsp, lip](const Vector<Scalar>& x) { return nn_estimate(*dsp, lip, x).ghat; };
  model.e_f = [dsp, lip](const Vector<Scalar>& x) { return nn_estimate(*dsp, lip, x).e_f; };
  model.e_g = [dsp, lip](const Vector<Scalar>& x) { return nn_estimate(*dsp, lip, x).e_g; };
  model.hhat = h;
  model.gradh_hat = std::move(gradh);
  model.e_h = [](const Vector<Scalar>&) { return Scalar(0); };
  model.e_gradh = [](const Vector<Scalar>&) { return Scalar(0); };
  return model;
}

/// Exact-estimate model (all error radii zero); the zero-uncertainty limit.
template <typename Scalar>
WorstCaseModel<Scalar> exact_worstcase_model(const AffineDynamics<Scalar>& truth,
                                             std::function<Scalar(const Vector<Scalar>&)> h,
                                             std::function<Vector<Scalar>(const Vector<Scalar>&)> gradh) {
  WorstCaseModel<Scalar> model;
  model.dims = truth.dims;
  model.fhat = truth.f;
  model.ghat = truth.g;
  model.hhat = std::move(h);
  model.gradh_hat = std::move(gradh);
  auto zero = [](const Vector<Scalar>&) { return Scalar(0); };
  model.e_f = zero;
  model.e_g = zero;
  model.e_h = zero;
  model.e_gradh = zero;
  return model;
}

/// Acquisition neighborhood: the center plus axis-aligned points at the
/// given radius (2n of them in n dimensions).
template <typename Scalar>
struct AcquisitionPattern {
  Scalar radius = Scalar(0.1);
  bool include_axis_points = true;

  std::vector<Vector<Scalar>> points(const Vector<Scalar>& center) const {
    std::vector<Vector<Scalar>> out;
    out.push_back(center);
    if (include_axis_points) {
      for (Eigen::Index a = 0; a < center.size(); ++a) {
        for (int sgn : {+1, -1}) {
          Vector<Scalar> p = center;
          p[a] += Scalar(sgn) * radius;
          out.push_back(p);
        }
      }
    }
    return out;
  }
};

/// Query the oracle at xbar and its neighborhood pattern and insert the
/// measurements. xbar must lie in the workspace; pattern neighbors falling
/// outside the workspace, or outside the safe set when a barrier value is
/// supplied, are skipped. Returns the number of points actually inserted.
template <typename Scalar>
int acquire_on_infeasibility(const Oracle<Scalar>& oracle, Dataset<Scalar>& ds,
                             const Vector<Scalar>& xbar, const AcquisitionPattern<Scalar>& pattern,
                             const Box<Scalar>& workspace,
                             const std::function<Scalar(const Vector<Scalar>&)>& h = nullptr) {
  if (!workspace.contains(xbar))
    throw WorkspaceError("acquire_on_infeasibility: xbar outside the workspace");
  int inserted = 0;
  for (const auto& p : pattern.points(xbar)) {
    if (!workspace.contains(p)) continue;
    if (h && h(p) < Scalar(0)) continue;
    if (ds.insert_from(oracle, p)) ++inserted;
  }
  return inserted;
}

}  // namespace safesocp
