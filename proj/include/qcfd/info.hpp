#pragma once

#include <array>
#include <vector>

#include "qcfd/dsp.hpp"
#include "qcfd/types.hpp"

namespace qcfd::info {

// Empirical joint histogram; rows index X cells (possibly a flattened pair),
// columns index Y cells. Entries are nonnegative integer counts.
struct DiscreteJoint {
  MatX counts;
};

// I(X;Y) in nats, plug-in over nonzero cells, clamped at zero.
double mutual_information(const DiscreteJoint& joint);

// R = I(X;Y) + I(Z;Y) - I(X,Z;Y). joint_xzy rows are x * n_z + z. All
// three joints must agree on the Y marginal counts.
double redundancy(const DiscreteJoint& joint_xy, const DiscreteJoint& joint_zy,
                  const DiscreteJoint& joint_xzy, int n_x, int n_z);

struct CfdStats {
  double i_t = 0.0, i_f = 0.0, i_s = 0.0;
  double r_tf = 0.0, r_fs = 0.0, r_st = 0.0;
  double c_tfs = 0.0;
};

// Scalar projections (top principal direction of real-data features) and
// equal-frequency bin edges, fit on real data only and reused unchanged for
// synthetic data.
struct BinningSpec {
  std::array<VecX, 3> projection;            // T, F, S directions
  std::array<std::vector<double>, 3> edges;  // strictly increasing
  int bins = 8;
};

// Flattened per-modality feature vectors of a sample: t samples, f bins,
// s grid (row-major).
std::array<VecX, 3> modality_features(const dsp::TriModalSample& sample);

// Deterministic top principal direction of the rows of `features`
// (power iteration on the centered Gram product).
VecX principal_direction(const MatX& features);

BinningSpec fit_binning(const std::vector<dsp::TriModalSample>& real_samples,
                        int bins = 8);

int bin_of(const std::vector<double>& edges, double value);

CfdStats cfd_stats(const std::vector<dsp::TriModalSample>& samples,
                   const BinningSpec& spec);

// Sum over ordered pairs i != j of the squared mean cosine between
// batch-centered, unit-normalized per-sample feature columns.
double orthogonality_penalty(const std::array<MatX, 3>& features);

// |C - C_hat| + lambda_orth * orthogonality penalty.
double cfd_loss(const CfdStats& real, const CfdStats& synth,
                const std::array<MatX, 3>& features, double lambda_orth);

}  // namespace qcfd::info
