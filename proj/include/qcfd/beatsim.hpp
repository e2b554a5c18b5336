#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qcfd/rng.hpp"
#include "qcfd/types.hpp"

namespace qcfd::sim {

// Sum-of-Gaussians beat morphology. Wave order is P, Q, R, S, T.
inline constexpr int kNumWaves = 5;

struct BeatParams {
  double amplitude[kNumWaves];  // dimensionless after normalization
  double center[kNumWaves];     // seconds
  double width[kNumWaves];      // seconds, > 0
  double st_offset = 0.0;       // baseline shift over the ST window
  double fs = 250.0;            // Hz
  double duration = 1.024;      // seconds; fs * duration must be integral

  int num_samples() const;
  void validate() const;  // throws ParamError on any invariant violation
};

enum class BeatLabel { Normal = 0, StShift = 1 };

struct BeatClass {
  BeatLabel label = BeatLabel::Normal;
  BeatParams prototype;
  double amplitude_jitter = 0.05;  // relative, multiplies each wave amplitude
  double center_jitter = 0.003;    // seconds, additive on each wave center
  double noise_sigma = 0.02;       // sensor noise standard deviation
};

struct RawBeat {
  VecX samples;
  BeatLabel label = BeatLabel::Normal;
  IndexWindow qrs_window;
  IndexWindow st_window;
};

// Two-class generation profile; the classes differ only in st_offset.
struct SimProfile {
  BeatClass normal;
  BeatClass st_shift;
  static SimProfile desk();  // fs 250, 1.024 s, 256 samples, ST offset 0.15
};

// QRS window spans [mu_Q - 2 b_Q, mu_S + 2 b_S]; the ST window runs from the
// QRS end to mu_T - 2 b_T. Throws ParamError when the ST window collapses.
std::pair<IndexWindow, IndexWindow> fiducial_windows(const BeatParams& params);

// Evaluates the Gaussian sum plus ST offset and seeded sensor noise.
// Deterministic for a given (params, noise_sigma, jitter_seed).
RawBeat synthesize_beat(const BeatParams& params, BeatLabel label,
                        double noise_sigma, std::uint64_t jitter_seed);

// Applies seeded per-beat jitter to a class prototype. Jitter draws are
// clamped to +/-3 sigma so wave ordering survives.
BeatParams jitter_params(const BeatClass& cls, Rng& rng);

// 2 * n_per_class beats, class-balanced, Normal beats first.
std::vector<RawBeat> make_dataset(int n_per_class, const SimProfile& profile,
                                  std::uint64_t seed);

}  // namespace qcfd::sim
