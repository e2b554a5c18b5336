#include "qcfd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "qcfd/errors.hpp"
#include "qcfd/rng.hpp"

namespace qcfd::data {

SplitIndices split_dataset(const std::vector<dsp::TriModalSample>& samples,
                           std::uint64_t seed) {
  std::map<int, std::vector<int>> by_class;
  for (int i = 0; i < static_cast<int>(samples.size()); ++i) {
    by_class[samples[i].label].push_back(i);
  }
  SplitIndices split;
  for (auto& [label, idx] : by_class) {
    Rng rng(derive_seed(seed, "split", static_cast<std::uint64_t>(label)));
    rng.shuffle(idx);
    const int n = static_cast<int>(idx.size());
    const int n_train = static_cast<int>(std::floor(0.70 * n));
    const int n_val = static_cast<int>(std::floor(0.15 * n));
    const int n_test = n - n_train - n_val;
    if (n_train < 1 || n_val < 1 || n_test < 1) {
      throw ParamError("split_dataset: a class split would be empty");
    }
    for (int i = 0; i < n_train; ++i) split.train.push_back(idx[i]);
    for (int i = n_train; i < n_train + n_val; ++i) split.val.push_back(idx[i]);
    for (int i = n_train + n_val; i < n; ++i) split.test.push_back(idx[i]);
  }
  return split;
}

namespace {

int compare_vec(const VecX& a, const VecX& b) {
  if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return -1;
    if (a[i] > b[i]) return 1;
  }
  return 0;
}

int compare_samples(const dsp::TriModalSample& a, const dsp::TriModalSample& b) {
  if (a.label != b.label) return a.label < b.label ? -1 : 1;
  if (int c = compare_vec(a.t.samples, b.t.samples)) return c;
  if (int c = compare_vec(a.f.bins, b.f.bins)) return c;
  const long an = a.s.grid.size(), bn = b.s.grid.size();
  if (an != bn) return an < bn ? -1 : 1;
  for (long i = 0; i < an; ++i) {
    const double av = a.s.grid(i / a.s.grid.cols(), i % a.s.grid.cols());
    const double bv = b.s.grid(i / b.s.grid.cols(), i % b.s.grid.cols());
    if (av < bv) return -1;
    if (av > bv) return 1;
  }
  return 0;
}

}  // namespace

std::vector<dsp::TriModalSample> canonical_order(
    const std::vector<dsp::TriModalSample>& samples) {
  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return compare_samples(samples[a], samples[b]) < 0;
  });
  std::vector<dsp::TriModalSample> out;
  out.reserve(samples.size());
  for (int i : order) out.push_back(samples[i]);
  return out;
}

namespace {

int median_int(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

ClassTemplates class_templates(const std::vector<dsp::TriModalSample>& samples,
                               const std::vector<int>& subset) {
  if (subset.empty()) throw ParamError("class_templates: empty subset");
  std::map<int, std::vector<int>> by_class;
  for (int i : subset) by_class[samples[i].label].push_back(i);

  ClassTemplates tmpl;
  tmpl.has_windows = true;
  for (const auto& [label, idx] : by_class) {
    VecX mean = VecX::Zero(samples[idx[0]].t.samples.size());
    std::vector<int> qlo, qhi, slo, shi;
    for (int i : idx) {
      mean += samples[i].t.samples;
      if (samples[i].has_fiducials) {
        qlo.push_back(samples[i].qrs_window.lo);
        qhi.push_back(samples[i].qrs_window.hi);
        slo.push_back(samples[i].st_window.lo);
        shi.push_back(samples[i].st_window.hi);
      }
    }
    mean /= static_cast<double>(idx.size());
    tmpl.labels.push_back(label);
    tmpl.mean_t.push_back(std::move(mean));
    if (qlo.empty()) {
      tmpl.has_windows = false;
      tmpl.qrs.push_back({});
      tmpl.st.push_back({});
    } else {
      tmpl.qrs.push_back({median_int(qlo), median_int(qhi)});
      tmpl.st.push_back({median_int(slo), median_int(shi)});
    }
  }
  return tmpl;
}

MatX unflatten_rows(const VecX& flat, int rows, int cols) {
  if (flat.size() != static_cast<long>(rows) * cols) {
    throw ParamError("unflatten_rows: size mismatch");
  }
  MatX grid(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) grid(r, c) = flat[r * cols + c];
  }
  return grid;
}

}  // namespace qcfd::data
