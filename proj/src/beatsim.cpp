#include "qcfd/beatsim.hpp"

#include <algorithm>
#include <cmath>

#include "qcfd/errors.hpp"

namespace qcfd::sim {

int BeatParams::num_samples() const {
  return static_cast<int>(std::lround(fs * duration));
}

void BeatParams::validate() const {
  if (fs <= 0.0 || duration <= 0.0) {
    throw ParamError("beat params: fs and duration must be positive");
  }
  const double n = fs * duration;
  if (std::abs(n - std::lround(n)) > 1e-9 || std::lround(n) < 1) {
    throw ParamError("beat params: fs * duration must be a positive integer");
  }
  double prev = -1.0;
  for (int w = 0; w < kNumWaves; ++w) {
    if (width[w] <= 0.0) {
      throw ParamError("beat params: wave widths must be positive");
    }
    if (center[w] < 0.0 || center[w] >= duration || center[w] <= prev) {
      throw ParamError("beat params: wave centers must be ordered in [0, d)");
    }
    prev = center[w];
  }
}

std::pair<IndexWindow, IndexWindow> fiducial_windows(const BeatParams& params) {
  params.validate();
  const int n = params.num_samples();
  auto clamp_idx = [n](long v) {
    return static_cast<int>(std::clamp<long>(v, 0, n));
  };
  // Wave indices: P=0, Q=1, R=2, S=3, T=4.
  IndexWindow qrs;
  qrs.lo = clamp_idx(std::lround((params.center[1] - 2.0 * params.width[1]) * params.fs));
  qrs.hi = clamp_idx(std::lround((params.center[3] + 2.0 * params.width[3]) * params.fs));
  IndexWindow st;
  st.lo = qrs.hi;
  st.hi = clamp_idx(std::lround((params.center[4] - 2.0 * params.width[4]) * params.fs));
  if (qrs.empty() || st.empty()) {
    throw ParamError("degenerate morphology: empty QRS or ST window");
  }
  return {qrs, st};
}

RawBeat synthesize_beat(const BeatParams& params, BeatLabel label,
                        double noise_sigma, std::uint64_t jitter_seed) {
  auto [qrs, st] = fiducial_windows(params);
  const int n = params.num_samples();

  RawBeat beat;
  beat.samples = VecX::Zero(n);
  beat.label = label;
  beat.qrs_window = qrs;
  beat.st_window = st;

  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / params.fs;
    double v = 0.0;
    for (int w = 0; w < kNumWaves; ++w) {
      const double u = (t - params.center[w]) / params.width[w];
      v += params.amplitude[w] * std::exp(-0.5 * u * u);
    }
    if (st.contains(i)) v += params.st_offset;
    beat.samples[i] = v;
  }
  if (noise_sigma > 0.0) {
    Rng rng(jitter_seed);
    for (int i = 0; i < n; ++i) beat.samples[i] += noise_sigma * rng.gauss();
  }
  return beat;
}

BeatParams jitter_params(const BeatClass& cls, Rng& rng) {
  BeatParams p = cls.prototype;
  auto clamped_gauss = [&rng]() {
    return std::clamp(rng.gauss(), -3.0, 3.0);
  };
  for (int w = 0; w < kNumWaves; ++w) {
    p.amplitude[w] *= 1.0 + cls.amplitude_jitter * clamped_gauss();
    p.center[w] += cls.center_jitter * clamped_gauss();
  }
  return p;
}

std::vector<RawBeat> make_dataset(int n_per_class, const SimProfile& profile,
                                  std::uint64_t seed) {
  if (n_per_class < 1) throw ParamError("make_dataset: n_per_class must be >= 1");
  std::vector<RawBeat> beats;
  beats.reserve(2 * static_cast<std::size_t>(n_per_class));
  const BeatClass* classes[2] = {&profile.normal, &profile.st_shift};
  for (int c = 0; c < 2; ++c) {
    Rng rng(derive_seed(seed, "beat-jitter", static_cast<std::uint64_t>(c)));
    for (int i = 0; i < n_per_class; ++i) {
      const BeatParams p = jitter_params(*classes[c], rng);
      const std::uint64_t noise_seed = derive_seed(
          seed, "beat-noise", (static_cast<std::uint64_t>(c) << 32) | static_cast<std::uint64_t>(i));
      beats.push_back(synthesize_beat(p, classes[c]->label, classes[c]->noise_sigma, noise_seed));
    }
  }
  return beats;
}

SimProfile SimProfile::desk() {
  BeatParams proto;
  // P, Q, R, S, T
  const double amp[kNumWaves] = {0.12, -0.15, 1.0, -0.25, 0.30};
  const double ctr[kNumWaves] = {0.20, 0.36, 0.40, 0.44, 0.70};
  const double wid[kNumWaves] = {0.025, 0.010, 0.012, 0.010, 0.040};
  std::copy(amp, amp + kNumWaves, proto.amplitude);
  std::copy(ctr, ctr + kNumWaves, proto.center);
  std::copy(wid, wid + kNumWaves, proto.width);
  proto.st_offset = 0.0;
  proto.fs = 250.0;
  proto.duration = 1.024;

  SimProfile profile;
  profile.normal.label = BeatLabel::Normal;
  profile.normal.prototype = proto;
  profile.st_shift.label = BeatLabel::StShift;
  profile.st_shift.prototype = proto;
  profile.st_shift.prototype.st_offset = 0.15;
  return profile;
}

}  // namespace qcfd::sim
