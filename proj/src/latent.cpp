#include "qcfd/latent.hpp"

#include <cmath>

#include "qcfd/errors.hpp"
#include "qcfd/rng.hpp"

namespace qcfd::latent {

void InterferenceOperator::validate(double tol) const {
  if (w.rows() != 3 || w.cols() != 3) {
    throw ParamError("interference operator: must be 3x3");
  }
  for (int i = 0; i < 3; ++i) {
    if (std::abs(w(i, i)) > tol) {
      throw ParamError("interference operator: diagonal must be zero");
    }
    for (int j = 0; j < 3; ++j) {
      if (std::abs(w(i, j) - std::conj(w(j, i))) > tol) {
        throw ParamError("interference operator: must be Hermitian");
      }
    }
  }
}

InterferenceOperator InterferenceOperator::from_upper(Complex w_tf, Complex w_ts,
                                                      Complex w_fs) {
  InterferenceOperator op;
  op.w(0, 1) = w_tf;
  op.w(0, 2) = w_ts;
  op.w(1, 2) = w_fs;
  op.w(1, 0) = std::conj(w_tf);
  op.w(2, 0) = std::conj(w_ts);
  op.w(2, 1) = std::conj(w_fs);
  return op;
}

InterferenceOperator InterferenceOperator::defaults() {
  return from_upper(Complex(0.3, 0.0), Complex(0.3, 0.0), Complex(0.3, 0.0));
}

std::array<Complex, 3> block_amplitudes(const CVecX& z) {
  const int m = static_cast<int>(z.size()) / 3;
  std::array<Complex, 3> alpha;
  for (int b = 0; b < 3; ++b) {
    const auto block = z.segment(b * m, m);
    const double r = block.norm();
    const Complex s = block.sum();
    const double phase = (std::abs(s) > 0.0) ? std::arg(s) : 0.0;
    alpha[b] = r * Complex(std::cos(phase), std::sin(phase));
  }
  return alpha;
}

LatentState sample_latent(int d, std::uint64_t seed) {
  if (d < 3 || d % 3 != 0) {
    throw ParamError("sample_latent: d must be a positive multiple of 3");
  }
  Rng rng(seed);
  CVecX z(d);
  for (int i = 0; i < d; ++i) {
    const double re = rng.gauss();
    const double im = rng.gauss();
    z[i] = Complex(re, im);
  }
  const double norm = z.norm();
  if (norm == 0.0) throw NumericError("sample_latent: degenerate zero draw");
  z /= norm;

  LatentState state;
  state.z = std::move(z);
  state.alpha = block_amplitudes(state.z);
  return state;
}

Complex interference_energy_complex(const std::array<Complex, 3>& alpha,
                                    const InterferenceOperator& op) {
  double norm2 = 0.0;
  for (const Complex& a : alpha) norm2 += std::norm(a);
  if (norm2 == 0.0) return Complex(0.0, 0.0);
  Complex acc(0.0, 0.0);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      acc += std::conj(alpha[i]) * op.w(i, j) * alpha[j];
    }
  }
  return acc / norm2;
}

double interference_energy(const LatentState& state, const InterferenceOperator& op) {
  op.validate();
  return interference_energy_complex(state.alpha, op).real();
}

double interference_loss(const std::vector<LatentState>& real_states,
                         const std::vector<LatentState>& gen_states,
                         const InterferenceOperator& op) {
  if (real_states.empty() || gen_states.empty()) {
    throw ParamError("interference_loss: empty batch");
  }
  op.validate();
  double real_mean = 0.0;
  for (const auto& s : real_states) real_mean += interference_energy_complex(s.alpha, op).real();
  real_mean /= static_cast<double>(real_states.size());
  double gen_mean = 0.0;
  for (const auto& s : gen_states) gen_mean += interference_energy_complex(s.alpha, op).real();
  gen_mean /= static_cast<double>(gen_states.size());
  return std::abs(real_mean - gen_mean);
}

std::array<VecX, 3> cross_branch_mix(const VecX& h_t, const VecX& h_f,
                                     const VecX& h_s,
                                     const InterferenceOperator& op) {
  if (h_t.size() != h_f.size() || h_t.size() != h_s.size()) {
    throw ParamError("cross_branch_mix: activation length mismatch");
  }
  const VecX* h[3] = {&h_t, &h_f, &h_s};
  std::array<VecX, 3> mixed;
  for (int i = 0; i < 3; ++i) {
    mixed[i] = *h[i];
    for (int j = 0; j < 3; ++j) {
      if (j == i) continue;
      mixed[i] += op.w(i, j).real() * (*h[j]);
    }
  }
  return mixed;
}

MatX realified_quadratic_form(const InterferenceOperator& op) {
  MatX m = MatX::Zero(6, 6);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double u = op.w(i, j).real();
      const double v = op.w(i, j).imag();
      m(i, j) = u;          // x^T U x
      m(i + 3, j + 3) = u;  // y^T U y
      m(i, j + 3) = -v;     // -x^T V y
      m(i + 3, j) = v;      // +y^T V x
    }
  }
  return m;
}

}  // namespace qcfd::latent
