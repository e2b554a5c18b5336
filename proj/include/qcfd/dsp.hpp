#pragma once

#include <complex>
#include <vector>

#include "qcfd/beatsim.hpp"
#include "qcfd/types.hpp"

namespace qcfd::dsp {

struct TimeDomainSignal {
  VecX samples;  // length N, max |sample| <= 1 after normalization
  double fs = 250.0;
};

struct LogSpectrum {
  VecX bins;  // length K, log(1 + magnitude) averaged over frames
};

struct Scalogram {
  MatX grid;    // H x W, min-max normalized to [0, 1]
  VecX scales;  // H scales in samples, ascending
};

struct TriModalSample {
  TimeDomainSignal t;
  LogSpectrum f;
  Scalogram s;
  int label = 0;
  bool has_fiducials = false;
  IndexWindow qrs_window;
  IndexWindow st_window;
};

struct DspProfile {
  int n = 256;        // fixed time-domain length
  int window = 64;    // STFT window (hop = window / 2)
  int k = 32;         // spectrum bins kept
  int h = 16;         // scalogram rows
  int w = 64;         // scalogram columns
  double bp_lo = 0.5;   // Hz
  double bp_hi = 40.0;  // Hz
  double baseline_window = 0.4;  // seconds, moving-median span

  static DspProfile desk() { return DspProfile{}; }
  static DspProfile full() {
    DspProfile p;
    p.n = 1000;
    p.window = 256;
    p.k = 64;
    p.h = 32;
    p.w = 128;
    return p;
  }
};

// X[k] = sum_n x[n] exp(-2 pi i k n / len). Radix-2 FFT for power-of-two
// lengths, direct summation otherwise.
CVecX dft(const CVecX& x);
CVecX idft(const CVecX& x);

// Periodic Hann window; sums to one exactly under 50% overlap.
VecX hann_window(int len);

// Order-4 Butterworth bandpass applied forward and backward (zero phase).
// Throws ParamError unless 0 < lo < hi < fs / 2.
VecX bandpass_filter(const VecX& x, double fs, double lo, double hi);

// bandpass -> moving-median baseline removal -> peak normalization ->
// pad/truncate to n.
TimeDomainSignal preprocess_time(const sim::RawBeat& beat, double fs, int n,
                                 double bp_lo, double bp_hi,
                                 double baseline_window);

// Time-averaged log-magnitude spectrum over Hann frames.
LogSpectrum stft_logmag(const TimeDomainSignal& t, int window, int k);

// Frame-averaged per-bin power |X[k]|^2 over rectangular frames (hop =
// window / 2), so constant and bin-aligned tones keep their power in a
// single bin. Feeds the spectral-entropy statistic.
VecX power_spectrum(const TimeDomainSignal& t, int window, int k);

// Complex Morlet (omega0 = 6) magnitude scalogram on h log-spaced scales
// covering 1-40 Hz pseudo-frequency, subsampled to w columns.
Scalogram morlet_scalogram(const TimeDomainSignal& t, int h, int w);

double morlet_pseudo_freq(double scale, double fs);
double morlet_scale_for_freq(double freq, double fs);

// Column w of the scalogram samples time index round(w * (n-1) / (w-1)).
int scalogram_column_index(int col, int w, int n);

TriModalSample to_trimodal(const sim::RawBeat& beat, double fs,
                           const DspProfile& profile);

}  // namespace qcfd::dsp
