#include "qcfd/dsp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "qcfd/errors.hpp"

namespace qcfd::dsp {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMorletOmega0 = 6.0;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 Cooley-Tukey, forward sign convention.
void fft_pow2(CVecX& a, bool inverse) {
  const int n = static_cast<int>(a.size());
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * kPi / len * (inverse ? 1.0 : -1.0);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (int j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

CVecX dft_direct(const CVecX& x, bool inverse) {
  const int n = static_cast<int>(x.size());
  CVecX out(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (int k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (int m = 0; m < n; ++m) {
      const double ang = sign * 2.0 * kPi * k * m / n;
      acc += x[m] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

// --- Butterworth bandpass design (zpk route, bilinear transform) ---

struct Zpk {
  std::vector<std::complex<double>> zeros;
  std::vector<std::complex<double>> poles;
  double gain = 1.0;
};

Zpk butter_bandpass_digital(int order, double lo, double hi, double fs) {
  using cd = std::complex<double>;
  // Analog Butterworth prototype.
  Zpk proto;
  for (int k = 1; k <= order; ++k) {
    const double theta = kPi * (2.0 * k + order - 1.0) / (2.0 * order);
    proto.poles.emplace_back(std::cos(theta), std::sin(theta));
  }
  proto.gain = 1.0;

  // Prewarped band edges.
  const double fs2 = 2.0 * fs;
  const double warped_lo = fs2 * std::tan(kPi * lo / fs);
  const double warped_hi = fs2 * std::tan(kPi * hi / fs);
  const double bw = warped_hi - warped_lo;
  const double w0 = std::sqrt(warped_lo * warped_hi);

  // Lowpass-to-bandpass: each pole doubles.
  Zpk analog;
  for (const cd& p : proto.poles) {
    const cd scaled = p * (bw / 2.0);
    const cd disc = std::sqrt(scaled * scaled - cd(w0 * w0, 0.0));
    analog.poles.push_back(scaled + disc);
    analog.poles.push_back(scaled - disc);
  }
  analog.zeros.assign(order, cd(0.0, 0.0));
  analog.gain = proto.gain * std::pow(bw, order);

  // Bilinear transform.
  Zpk digital;
  cd num(1.0, 0.0), den(1.0, 0.0);
  for (const cd& z : analog.zeros) {
    digital.zeros.push_back((cd(fs2, 0.0) + z) / (cd(fs2, 0.0) - z));
    num *= cd(fs2, 0.0) - z;
  }
  for (const cd& p : analog.poles) {
    digital.poles.push_back((cd(fs2, 0.0) + p) / (cd(fs2, 0.0) - p));
    den *= cd(fs2, 0.0) - p;
  }
  digital.gain = analog.gain * (num / den).real();
  // Degree balance: remaining zeros map to z = -1.
  while (digital.zeros.size() < digital.poles.size()) {
    digital.zeros.emplace_back(-1.0, 0.0);
  }
  return digital;
}

VecX poly_from_roots(const std::vector<std::complex<double>>& roots) {
  std::vector<std::complex<double>> coeff{1.0};
  for (const auto& r : roots) {
    std::vector<std::complex<double>> next(coeff.size() + 1, 0.0);
    for (std::size_t i = 0; i < coeff.size(); ++i) {
      next[i] += coeff[i];
      next[i + 1] -= coeff[i] * r;
    }
    coeff = std::move(next);
  }
  VecX out(coeff.size());
  for (std::size_t i = 0; i < coeff.size(); ++i) out[static_cast<int>(i)] = coeff[i].real();
  return out;
}

struct FilterBA {
  VecX b;
  VecX a;  // a[0] == 1
};

FilterBA design_bandpass_ba(double fs, double lo, double hi) {
  const Zpk zpk = butter_bandpass_digital(2, lo, hi, fs);
  FilterBA f;
  f.b = poly_from_roots(zpk.zeros) * zpk.gain;
  f.a = poly_from_roots(zpk.poles);
  return f;
}

// Steady-state initial filter state for a unit step input (direct form II
// transposed), so constant segments produce no startup transient.
VecX lfilter_zi(const FilterBA& f) {
  const int n = static_cast<int>(f.a.size()) - 1;
  MatX m = MatX::Zero(n, n);
  VecX rhs = VecX::Zero(n);
  // Fixed point of z_i = b_{i+1} - a_{i+1} y + z_{i+1}, with y = b_0 + z_1.
  for (int i = 0; i < n; ++i) {
    rhs[i] = f.b[i + 1] - f.a[i + 1] * f.b[0];
    m(i, i) += 1.0;
    m(i, 0) += f.a[i + 1];
    if (i + 1 < n) m(i, i + 1) -= 1.0;
  }
  return m.colPivHouseholderQr().solve(rhs);
}

VecX lfilter(const FilterBA& f, const VecX& x, const VecX& zi_scaled) {
  const int nb = static_cast<int>(f.b.size());
  const int order = static_cast<int>(f.a.size()) - 1;
  VecX z = zi_scaled;
  VecX y(x.size());
  for (int i = 0; i < x.size(); ++i) {
    const double xn = x[i];
    const double yn = f.b[0] * xn + (order > 0 ? z[0] : 0.0);
    for (int j = 0; j < order - 1; ++j) {
      z[j] = (j + 1 < nb ? f.b[j + 1] : 0.0) * xn + z[j + 1] - f.a[j + 1] * yn;
    }
    if (order > 0) {
      z[order - 1] = (order < nb ? f.b[order] : 0.0) * xn - f.a[order] * yn;
    }
    y[i] = yn;
  }
  return y;
}

}  // namespace

CVecX dft(const CVecX& x) {
  if (x.size() < 1) throw ParamError("dft: empty input");
  if (is_pow2(static_cast<int>(x.size()))) {
    CVecX a = x;
    fft_pow2(a, false);
    return a;
  }
  return dft_direct(x, false);
}

CVecX idft(const CVecX& x) {
  if (x.size() < 1) throw ParamError("idft: empty input");
  CVecX a;
  if (is_pow2(static_cast<int>(x.size()))) {
    a = x;
    fft_pow2(a, true);
  } else {
    a = dft_direct(x, true);
  }
  return a / static_cast<double>(x.size());
}

VecX hann_window(int len) {
  VecX w(len);
  for (int i = 0; i < len; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / len);
  }
  return w;
}

VecX bandpass_filter(const VecX& x, double fs, double lo, double hi) {
  if (!(lo > 0.0 && lo < hi && hi < fs / 2.0)) {
    throw ParamError("bandpass_filter: need 0 < lo < hi < fs/2");
  }
  if (x.size() == 0) return x;

  const FilterBA f = design_bandpass_ba(fs, lo, hi);
  const VecX zi = lfilter_zi(f);
  const int pad = 3 * static_cast<int>(std::max(f.a.size(), f.b.size()));
  const int n = static_cast<int>(x.size());

  // Odd reflection padding at both ends.
  VecX ext(n + 2 * pad);
  for (int i = 0; i < pad; ++i) {
    ext[i] = 2.0 * x[0] - x[std::min(pad - i, n - 1)];
  }
  ext.segment(pad, n) = x;
  for (int i = 0; i < pad; ++i) {
    ext[pad + n + i] = 2.0 * x[n - 1] - x[std::max(n - 2 - i, 0)];
  }

  VecX fwd = lfilter(f, ext, VecX(zi * ext[0]));
  VecX rev = fwd.reverse();
  VecX bwd = lfilter(f, rev, VecX(zi * rev[0]));
  VecX out = bwd.reverse();
  return out.segment(pad, n);
}

TimeDomainSignal preprocess_time(const sim::RawBeat& beat, double fs, int n,
                                 double bp_lo, double bp_hi,
                                 double baseline_window) {
  if (beat.samples.size() == 0) throw ParamError("preprocess_time: empty beat");
  VecX y = bandpass_filter(beat.samples, fs, bp_lo, bp_hi);

  // Moving-median baseline.
  const int half = std::max(1, static_cast<int>(std::lround(0.5 * baseline_window * fs)));
  const int len = static_cast<int>(y.size());
  VecX baseline(len);
  std::vector<double> buf;
  for (int i = 0; i < len; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(len, i + half + 1);
    buf.assign(y.data() + lo, y.data() + hi);
    std::sort(buf.begin(), buf.end());
    const std::size_t m = buf.size();
    baseline[i] = (m % 2 == 1) ? buf[m / 2] : 0.5 * (buf[m / 2 - 1] + buf[m / 2]);
  }
  y -= baseline;

  const double peak = y.cwiseAbs().maxCoeff();
  if (peak > 0.0) y /= peak;

  TimeDomainSignal t;
  t.fs = fs;
  t.samples = VecX::Zero(n);
  const int copy = std::min(n, len);
  t.samples.head(copy) = y.head(copy);
  return t;
}

namespace {

// Shared framing for the log-magnitude and power spectra.
template <typename PerBin>
void stft_accumulate(const TimeDomainSignal& t, int window, int k, PerBin&& f) {
  const int n = static_cast<int>(t.samples.size());
  if (window < 1 || window > n) throw ParamError("stft: window must be in [1, N]");
  if (k < 1 || k > window / 2 + 1) throw ParamError("stft: K out of range");
  const int hop = window / 2;
  const VecX win = hann_window(window);
  const int frames = (n - window) / hop + 1;
  for (int fr = 0; fr < frames; ++fr) {
    CVecX frame(window);
    for (int i = 0; i < window; ++i) {
      frame[i] = t.samples[fr * hop + i] * win[i];
    }
    const CVecX spec = dft(frame);
    f(spec, frames);
  }
}

}  // namespace

LogSpectrum stft_logmag(const TimeDomainSignal& t, int window, int k) {
  LogSpectrum out;
  out.bins = VecX::Zero(k);
  stft_accumulate(t, window, k, [&](const CVecX& spec, int frames) {
    for (int i = 0; i < k; ++i) {
      out.bins[i] += std::log1p(std::abs(spec[i])) / frames;
    }
  });
  return out;
}

VecX power_spectrum(const TimeDomainSignal& t, int window, int k) {
  const int n = static_cast<int>(t.samples.size());
  const int win = std::min(window, n);
  if (win < 1) throw ParamError("power_spectrum: empty signal");
  if (k < 1 || k > win / 2 + 1) throw ParamError("power_spectrum: K out of range");
  const int hop = std::max(1, win / 2);
  const int frames = (n - win) / hop + 1;
  VecX power = VecX::Zero(k);
  for (int fr = 0; fr < frames; ++fr) {
    CVecX frame(win);
    for (int i = 0; i < win; ++i) frame[i] = t.samples[fr * hop + i];
    const CVecX spec = dft(frame);
    for (int i = 0; i < k; ++i) power[i] += std::norm(spec[i]) / frames;
  }
  return power;
}

double morlet_pseudo_freq(double scale, double fs) {
  return kMorletOmega0 * fs / (2.0 * kPi * scale);
}

double morlet_scale_for_freq(double freq, double fs) {
  return kMorletOmega0 * fs / (2.0 * kPi * freq);
}

int scalogram_column_index(int col, int w, int n) {
  if (w == 1) return 0;
  return static_cast<int>(std::lround(static_cast<double>(col) * (n - 1) / (w - 1)));
}

Scalogram morlet_scalogram(const TimeDomainSignal& t, int h, int w) {
  const int n = static_cast<int>(t.samples.size());
  if (h < 2 || w < 2) throw ParamError("morlet_scalogram: need H, W >= 2");
  if (w > n) throw ParamError("morlet_scalogram: W must be <= N");

  // Log-spaced pseudo-frequencies from 40 Hz down to 1 Hz; scales ascend.
  const double f_hi = 40.0, f_lo = 1.0;
  VecX scales(h);
  for (int row = 0; row < h; ++row) {
    const double freq = f_hi * std::pow(f_lo / f_hi, static_cast<double>(row) / (h - 1));
    scales[row] = morlet_scale_for_freq(freq, t.fs);
  }

  const double norm = std::pow(kPi, -0.25);
  MatX grid(h, w);
  for (int row = 0; row < h; ++row) {
    const double s = scales[row];
    const int support = static_cast<int>(std::ceil(4.0 * s));
    for (int col = 0; col < w; ++col) {
      const int tau = scalogram_column_index(col, w, n);
      std::complex<double> acc(0.0, 0.0);
      const int m_lo = std::max(-support, -tau);
      const int m_hi = std::min(support, n - 1 - tau);
      for (int m = m_lo; m <= m_hi; ++m) {
        const double u = static_cast<double>(m) / s;
        const double env = norm * std::exp(-0.5 * u * u);
        // conj(psi(u)) = env * exp(-i omega0 u)
        const std::complex<double> psi_conj(env * std::cos(kMorletOmega0 * u),
                                            -env * std::sin(kMorletOmega0 * u));
        acc += t.samples[tau + m] * psi_conj;
      }
      grid(row, col) = std::abs(acc) / std::sqrt(s);
    }
  }

  const double lo = grid.minCoeff();
  const double hi = grid.maxCoeff();
  if (hi > lo) {
    grid = (grid.array() - lo) / (hi - lo);
  } else {
    grid.setZero();
  }

  Scalogram out;
  out.grid = std::move(grid);
  out.scales = std::move(scales);
  return out;
}

TriModalSample to_trimodal(const sim::RawBeat& beat, double fs,
                           const DspProfile& profile) {
  TriModalSample sample;
  sample.t = preprocess_time(beat, fs, profile.n, profile.bp_lo, profile.bp_hi,
                             profile.baseline_window);
  sample.f = stft_logmag(sample.t, profile.window, profile.k);
  sample.s = morlet_scalogram(sample.t, profile.h, profile.w);
  sample.label = static_cast<int>(beat.label);
  sample.has_fiducials = !beat.qrs_window.empty() && !beat.st_window.empty();
  sample.qrs_window = beat.qrs_window;
  sample.st_window = beat.st_window;
  return sample;
}

}  // namespace qcfd::dsp
