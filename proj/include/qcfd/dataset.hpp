#pragma once

#include <cstdint>
#include <vector>

#include "qcfd/dsp.hpp"
#include "qcfd/types.hpp"

namespace qcfd::data {

struct SplitIndices {
  std::vector<int> train, val, test;
};

// Stratified 70/15/15 split with a seeded per-class shuffle. Throws
// ParamError when any part of any class would be empty.
SplitIndices split_dataset(const std::vector<dsp::TriModalSample>& samples,
                           std::uint64_t seed);

// Content-defined sample order (label, then lexicographic modality values);
// makes downstream reductions independent of input permutation.
std::vector<dsp::TriModalSample> canonical_order(
    const std::vector<dsp::TriModalSample>& samples);

// Class-conditional mean time-domain waveforms plus median fiducial windows
// over the chosen subset. Windows are only available when every class has at
// least one sample carrying fiducials.
struct ClassTemplates {
  std::vector<int> labels;
  std::vector<VecX> mean_t;
  std::vector<IndexWindow> qrs, st;
  bool has_windows = false;
};
ClassTemplates class_templates(const std::vector<dsp::TriModalSample>& samples,
                               const std::vector<int>& subset);

// Row-major reshape of a flat head output into a scalogram grid.
MatX unflatten_rows(const VecX& flat, int rows, int cols);

}  // namespace qcfd::data
