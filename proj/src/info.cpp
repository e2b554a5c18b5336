#include "qcfd/info.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "qcfd/errors.hpp"
#include "qcfd/rng.hpp"

namespace qcfd::info {

double mutual_information(const DiscreteJoint& joint) {
  const MatX& c = joint.counts;
  if (c.size() == 0) throw ParamError("mutual_information: empty joint");
  if ((c.array() < 0.0).any()) {
    throw ParamError("mutual_information: negative counts");
  }
  const double total = c.sum();
  if (total < 1.0) throw ParamError("mutual_information: total count must be >= 1");

  const VecX row_sum = c.rowwise().sum();
  const VecX col_sum = c.colwise().sum();
  double mi = 0.0;
  for (int i = 0; i < c.rows(); ++i) {
    for (int j = 0; j < c.cols(); ++j) {
      const double n_ij = c(i, j);
      if (n_ij <= 0.0) continue;
      const double p_ij = n_ij / total;
      mi += p_ij * std::log(p_ij * total * total / (row_sum[i] * col_sum[j]));
    }
  }
  if (mi < 0.0) {
    if (mi < -1e-12) throw NumericError("mutual_information: estimate below zero");
    mi = 0.0;
  }
  return mi;
}

double redundancy(const DiscreteJoint& joint_xy, const DiscreteJoint& joint_zy,
                  const DiscreteJoint& joint_xzy, int n_x, int n_z) {
  if (joint_xzy.counts.rows() != static_cast<long>(n_x) * n_z) {
    throw ParamError("redundancy: pair joint rows must equal n_x * n_z");
  }
  const VecX y_x = joint_xy.counts.colwise().sum();
  const VecX y_z = joint_zy.counts.colwise().sum();
  const VecX y_xz = joint_xzy.counts.colwise().sum();
  if (y_x.size() != y_z.size() || y_x.size() != y_xz.size() ||
      (y_x.array() != y_z.array()).any() || (y_x.array() != y_xz.array()).any()) {
    throw ParamError("redundancy: inconsistent Y marginals across joints");
  }
  return mutual_information(joint_xy) + mutual_information(joint_zy) -
         mutual_information(joint_xzy);
}

std::array<VecX, 3> modality_features(const dsp::TriModalSample& sample) {
  VecX s_flat(sample.s.grid.size());
  int idx = 0;
  for (int r = 0; r < sample.s.grid.rows(); ++r) {
    for (int c = 0; c < sample.s.grid.cols(); ++c) s_flat[idx++] = sample.s.grid(r, c);
  }
  return {sample.t.samples, sample.f.bins, s_flat};
}

VecX principal_direction(const MatX& features) {
  const int n = static_cast<int>(features.rows());
  const int p = static_cast<int>(features.cols());
  if (n < 2) throw ParamError("principal_direction: need >= 2 rows");

  const MatX centered = features.rowwise() - features.colwise().mean();
  Rng rng(derive_seed(0x9c0ffee5u, "principal-direction"));
  VecX v(p);
  for (int i = 0; i < p; ++i) v[i] = rng.gauss();
  v.normalize();
  for (int it = 0; it < 200; ++it) {
    VecX next = centered.transpose() * (centered * v);
    const double norm = next.norm();
    if (norm == 0.0) break;  // all-equal features; any direction works
    v = next / norm;
  }
  // Deterministic sign: largest-magnitude component positive.
  int imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  if (v[imax] < 0.0) v = -v;
  return v;
}

namespace {

std::vector<double> equal_frequency_edges(std::vector<double> values, int bins) {
  std::sort(values.begin(), values.end());
  const int n = static_cast<int>(values.size());
  std::vector<double> edges;
  for (int k = 1; k < bins; ++k) {
    const double pos = static_cast<double>(n - 1) * k / bins;
    const int lo = static_cast<int>(pos);
    const double frac = pos - lo;
    const double e = (lo + 1 < n) ? values[lo] + frac * (values[lo + 1] - values[lo])
                                  : values[lo];
    if (edges.empty() || e > edges.back()) edges.push_back(e);
  }
  return edges;
}

std::vector<int> label_index(const std::vector<dsp::TriModalSample>& samples) {
  std::set<int> labels;
  for (const auto& s : samples) labels.insert(s.label);
  if (labels.size() < 2) {
    throw ParamError("cfd_stats: need at least two classes");
  }
  std::vector<int> ordered(labels.begin(), labels.end());
  std::vector<int> idx;
  idx.reserve(samples.size());
  for (const auto& s : samples) {
    idx.push_back(static_cast<int>(
        std::lower_bound(ordered.begin(), ordered.end(), s.label) - ordered.begin()));
  }
  return idx;
}

}  // namespace

BinningSpec fit_binning(const std::vector<dsp::TriModalSample>& real_samples,
                        int bins) {
  if (bins < 2) throw ParamError("fit_binning: need >= 2 bins");
  if (static_cast<int>(real_samples.size()) < bins) {
    throw ParamError("fit_binning: need at least `bins` samples");
  }
  BinningSpec spec;
  spec.bins = bins;
  for (int m = 0; m < 3; ++m) {
    const int n = static_cast<int>(real_samples.size());
    const int dim = static_cast<int>(modality_features(real_samples[0])[m].size());
    MatX feat(n, dim);
    for (int i = 0; i < n; ++i) feat.row(i) = modality_features(real_samples[i])[m];
    spec.projection[m] = principal_direction(feat);
    std::vector<double> projected(n);
    for (int i = 0; i < n; ++i) projected[i] = feat.row(i).dot(spec.projection[m]);
    spec.edges[m] = equal_frequency_edges(std::move(projected), bins);
  }
  return spec;
}

int bin_of(const std::vector<double>& edges, double value) {
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), value) -
                          edges.begin());
}

CfdStats cfd_stats(const std::vector<dsp::TriModalSample>& samples,
                   const BinningSpec& spec) {
  const int n = static_cast<int>(samples.size());
  if (n < spec.bins) throw ParamError("cfd_stats: need at least `bins` samples");
  const std::vector<int> y = label_index(samples);
  const int n_y = *std::max_element(y.begin(), y.end()) + 1;

  // Per-sample modality bins.
  MatX proj(n, 3);
  Eigen::MatrixXi b(n, 3);
  std::array<int, 3> n_bins{};
  for (int m = 0; m < 3; ++m) n_bins[m] = static_cast<int>(spec.edges[m].size()) + 1;
  for (int i = 0; i < n; ++i) {
    const auto feats = modality_features(samples[i]);
    for (int m = 0; m < 3; ++m) {
      if (feats[m].size() != spec.projection[m].size()) {
        throw ParamError("cfd_stats: sample features do not match binning spec");
      }
      b(i, m) = bin_of(spec.edges[m], feats[m].dot(spec.projection[m]));
    }
  }

  auto single = [&](int m) {
    DiscreteJoint j;
    j.counts = MatX::Zero(n_bins[m], n_y);
    for (int i = 0; i < n; ++i) j.counts(b(i, m), y[i]) += 1.0;
    return j;
  };
  auto pair = [&](int m1, int m2) {
    DiscreteJoint j;
    j.counts = MatX::Zero(static_cast<long>(n_bins[m1]) * n_bins[m2], n_y);
    for (int i = 0; i < n; ++i) {
      j.counts(b(i, m1) * n_bins[m2] + b(i, m2), y[i]) += 1.0;
    }
    return j;
  };

  const DiscreteJoint jt = single(0), jf = single(1), js = single(2);
  CfdStats stats;
  stats.i_t = mutual_information(jt);
  stats.i_f = mutual_information(jf);
  stats.i_s = mutual_information(js);
  stats.r_tf = redundancy(jt, jf, pair(0, 1), n_bins[0], n_bins[1]);
  stats.r_fs = redundancy(jf, js, pair(1, 2), n_bins[1], n_bins[2]);
  stats.r_st = redundancy(js, jt, pair(2, 0), n_bins[2], n_bins[0]);
  stats.c_tfs = stats.i_t + stats.i_f + stats.i_s - stats.r_tf - stats.r_fs - stats.r_st;
  return stats;
}

double orthogonality_penalty(const std::array<MatX, 3>& features) {
  const long n = features[0].cols();
  for (const auto& f : features) {
    if (f.cols() != n) throw ParamError("orthogonality_penalty: batch size mismatch");
  }
  if (n == 0) throw ParamError("orthogonality_penalty: empty batch");

  std::array<MatX, 3> unit;
  for (int m = 0; m < 3; ++m) {
    MatX c = features[m].colwise() - features[m].rowwise().mean();
    for (long j = 0; j < n; ++j) {
      const double norm = c.col(j).norm();
      if (norm > 0.0) c.col(j) /= norm;
    }
    unit[m] = std::move(c);
  }
  double penalty = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      const double mean_dot = (unit[i].cwiseProduct(unit[j])).sum() / static_cast<double>(n);
      penalty += mean_dot * mean_dot;
    }
  }
  return penalty;
}

double cfd_loss(const CfdStats& real, const CfdStats& synth,
                const std::array<MatX, 3>& features, double lambda_orth) {
  return std::abs(real.c_tfs - synth.c_tfs) +
         lambda_orth * orthogonality_penalty(features);
}

}  // namespace qcfd::info
