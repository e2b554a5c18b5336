#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qcfd/dataset.hpp"
#include "qcfd/evalsuite.hpp"
#include "qcfd/info.hpp"
#include "qcfd/latent.hpp"
#include "qcfd/nets.hpp"

namespace qcfd::train {

struct TrainConfig {
  nn::AdamConfig opt;  // alpha 2e-4, beta1 0.5, beta2 0.999
  int batch = 64;
  int max_epochs = 200;
  double lambda1 = 1.0;    // complementarity loss weight
  double lambda2 = 0.5;    // interference loss weight
  double lambda3 = 1.0;    // morphology loss weight
  double lambda_orth = 0.1;
  double gp_weight = 10.0;
  int critic_steps = 3;
  std::uint64_t seed = 1;
  int patience = 25;
  bool train_operator = false;
  bool use_latent_encoder = true;  // drives the interference loss from data
  int probe_size = 256;            // per-epoch complementarity probe
  int reference_epochs = 300;      // frozen feature-extractor pretraining

  void validate() const;
};

// Fixed random projection from modality vectors to complex amplitude blocks;
// the differentiable stand-in for a data-to-latent encoder.
struct LatentEncoder {
  MatX p_t, p_f, p_s;  // 2 x dim (row 0 -> real part, row 1 -> imag part)

  static LatentEncoder make(const nn::ModelShapes& shapes, std::uint64_t seed);
  std::array<latent::Complex, 3> encode(const VecX& t, const VecX& f,
                                        const VecX& s) const;
  double energy(const VecX& t, const VecX& f, const VecX& s,
                const latent::InterferenceOperator& op) const;
};

// Mean squared error over the QRS window plus mean squared error over the
// ST window against the class template waveform.
double phys_loss(const VecX& gen_t, const VecX& tmpl, IndexWindow qrs,
                 IndexWindow st);

// L_GAN + lambda1 L_CFD + lambda2 L_interf + lambda3 L_phys. Throws
// NumericError on non-finite parts.
double total_generator_loss(double gan, double cfd, double interf, double phys,
                            double lambda1, double lambda2, double lambda3);

// --- Tape-built batch losses (exposed for gradient verification) ---

struct LossWeights {
  double gan = 1.0;
  double orth = 0.0;    // lambda1 * lambda_orth
  double interf = 0.0;  // lambda2
  double phys = 0.0;    // lambda3
};

struct CriticStepResult {
  double loss = 0.0, wgan = 0.0, gp = 0.0;
  std::vector<MatX> grads;  // trainable_params(critic.net) order
};
CriticStepResult critic_step_loss(const nn::CriticModel& critic, const MatX& x_real,
                                  const MatX& x_fake, const VecX& mix_u,
                                  double gp_weight);

struct GenStepResult {
  double total = 0.0, gan = 0.0, orth = 0.0, interf = 0.0, phys = 0.0;
  std::vector<MatX> grads;     // trainable_params(generator) order
  std::vector<MatX> op_grads;  // six upper-triangle components when trained
};
GenStepResult generator_step_loss(
    const nn::GeneratorModel& gen, const nn::CriticModel& critic,
    const eval::ReferenceModels& ref, const LatentEncoder& encoder,
    const latent::InterferenceOperator& op, const MatX& z_batch,
    double real_mean_energy, const VecX& tmpl, IndexWindow qrs, IndexWindow st,
    const LossWeights& weights, bool train_operator);

// --- Gradient verification ---

struct GradCheckReport {
  double max_rel_error = 0.0;
  int checked = 0;
  bool skipped = false;
  std::string note;
};

// Compares reverse-mode gradients against central finite differences on a
// seeded random subset of coordinates. `loss` must evaluate at the current
// parameter values; `grads` must return matrices aligned with `params`.
GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::function<std::vector<MatX>()>& grads,
                           const std::vector<MatX*>& params, int per_param,
                           double step, std::uint64_t seed);

// --- Training loop ---

struct EpochRecord {
  int epoch = 0;
  double critic_loss = 0.0;
  double gan = 0.0;      // generator adversarial term
  double cfd_gap = 0.0;  // |C - C_hat| on the probe batch (tracked metric)
  double orth = 0.0;
  double interf = 0.0;
  double phys = 0.0;
  double total = 0.0;
  double val = 0.0;  // validation composite driving early stopping
  double c_ratio = 0.0;
};
using History = std::vector<EpochRecord>;

struct TrainedModel {
  nn::ModelShapes shapes;
  std::vector<int> class_labels;
  std::vector<nn::GeneratorModel> gens;  // one per class
  latent::InterferenceOperator op;
  std::uint64_t seed = 0;
};

// Unweighted validation components at the selected epoch (grid-search
// comparisons need a lambda-independent quantity).
struct ValParts {
  double gan = 0.0, cfd_gap = 0.0, orth = 0.0, interf = 0.0, phys = 0.0;
  double unit_sum() const { return gan + cfd_gap + orth + interf + phys; }
};

struct TrainResult {
  TrainedModel model;
  History history;
  double real_c_tfs = 0.0;
  double reference_accuracy = 0.0;
  ValParts best_val_parts;
};

enum class Ablation { None, NoCfd, ZeroOperator, NoMorphology };
Ablation parse_ablation(const std::string& name);  // none|a1|a2|a3
void apply_ablation(Ablation a, TrainConfig& cfg, latent::InterferenceOperator& op);

TrainResult train(const std::vector<dsp::TriModalSample>& data,
                  const TrainConfig& cfg, const nn::ModelShapes& shapes,
                  const latent::InterferenceOperator& op);

// Class-balanced synthetic tri-modal samples from the trained per-class
// generators; deterministic given seed.
std::vector<dsp::TriModalSample> generate_samples(const TrainedModel& model,
                                                  int count, std::uint64_t seed,
                                                  double fs = 250.0);

// Grid search over lambda1/2/3 in {0.1, 0.5, 1.0}^3, selected on the
// validation composite recomputed at unit weights.
struct GridSearchResult {
  TrainResult best;
  double best_lambda1 = 0.0, best_lambda2 = 0.0, best_lambda3 = 0.0;
  double best_val = 0.0;
};
GridSearchResult grid_search_train(const std::vector<dsp::TriModalSample>& data,
                                   const TrainConfig& base,
                                   const nn::ModelShapes& shapes,
                                   const latent::InterferenceOperator& op);

}  // namespace qcfd::train
