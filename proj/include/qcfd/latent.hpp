#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

#include "qcfd/types.hpp"

namespace qcfd::latent {

using Complex = std::complex<double>;

// Unit-norm complex latent vector of dimension d = 3m with one block per
// modality and derived modality amplitudes.
struct LatentState {
  CVecX z;                         // sum |z_k|^2 == 1
  std::array<Complex, 3> alpha;    // sum |alpha_i|^2 == 1
};

// 3x3 Hermitian coupling matrix with zero diagonal.
struct InterferenceOperator {
  CMatX w = CMatX::Zero(3, 3);

  void validate(double tol = 1e-12) const;  // throws ParamError
  bool is_zero() const { return w.isZero(0.0); }

  // Conjugate-symmetric completion from the upper triangle (w_tf, w_fs, w_ts).
  static InterferenceOperator from_upper(Complex w_tf, Complex w_ts, Complex w_fs);
  // All real off-diagonal couplings at 0.3.
  static InterferenceOperator defaults();
};

// z_r, z_i ~ N(0, I) then l2 normalization; amplitude moduli are block
// Euclidean norms, phases come from block component sums. Deterministic
// given seed. d must be divisible by 3.
LatentState sample_latent(int d, std::uint64_t seed);

// Derives the modality amplitudes for an already-normalized latent vector.
std::array<Complex, 3> block_amplitudes(const CVecX& z);

// <Psi|H|Psi> on the normalized amplitude vector; Hermiticity makes the
// result real. Throws ParamError if the operator is not Hermitian.
double interference_energy(const LatentState& state, const InterferenceOperator& op);

// The raw complex quadratic form, before the imaginary residue is discarded.
Complex interference_energy_complex(const std::array<Complex, 3>& alpha,
                                    const InterferenceOperator& op);

// |mean energy(real batch) - mean energy(generated batch)|.
double interference_loss(const std::vector<LatentState>& real_states,
                         const std::vector<LatentState>& gen_states,
                         const InterferenceOperator& op);

// h~_i = h_i + sum_{j != i} Re(w_ij) h_j on real activations.
std::array<VecX, 3> cross_branch_mix(const VecX& h_t, const VecX& h_f,
                                     const VecX& h_s,
                                     const InterferenceOperator& op);

// Real symmetric 6x6 matrix M with [Re a; Im a]^T M [Re a; Im a] equal to
// the Hermitian quadratic form <a|H|a>; used by the differentiable
// interference-energy path.
MatX realified_quadratic_form(const InterferenceOperator& op);

}  // namespace qcfd::latent
