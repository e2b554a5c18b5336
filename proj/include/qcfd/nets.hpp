#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qcfd/autodiff.hpp"
#include "qcfd/latent.hpp"
#include "qcfd/rng.hpp"
#include "qcfd/types.hpp"

namespace qcfd::nn {

enum class Act { Tanh, Identity };

struct Layer {
  MatX w;  // out x in
  MatX b;  // out x 1
  Act act = Act::Tanh;
};

struct DenseNet {
  std::vector<Layer> layers;

  void validate() const;  // throws ParamError if shapes do not compose
  int in_dim() const { return static_cast<int>(layers.front().w.cols()); }
  int out_dim() const { return static_cast<int>(layers.back().w.rows()); }

  VecX forward(const VecX& x) const;
  MatX forward_batch(const MatX& x) const;  // columns are samples
};

// Layers sized dims[i] -> dims[i+1]; weights uniform in +/- 1/sqrt(fan_in).
DenseNet make_dense(const std::vector<int>& dims, const std::vector<Act>& acts,
                    Rng& rng);

// Desk-scale dimensions shared by generator, critic and reference models.
struct ModelShapes {
  int m = 8;        // latent entries per modality block
  int hdim = 32;    // shared-core branch width and head hidden width
  int t_dim = 256;
  int f_dim = 32;
  int s_rows = 16;
  int s_cols = 64;
  int critic_hidden = 32;
  int enc_hidden = 16;
  int enc_dim = 8;  // per-modality embedding width
  int n_classes = 2;

  int latent_dim() const { return 3 * m; }
  int s_dim() const { return s_rows * s_cols; }
  int x_dim() const { return t_dim + f_dim + s_dim(); }
  int embed_dim() const { return 3 * enc_dim; }
};

// Shared core splits into three branch activations which are mixed by the
// interference operator before the per-modality heads decode them.
struct GeneratorModel {
  ModelShapes shapes;
  DenseNet core;    // 2 * latent_dim -> 3 * hdim, tanh
  DenseNet head_t;  // hdim -> hdim -> t_dim
  DenseNet head_f;
  DenseNet head_s;
};

struct CriticModel {
  ModelShapes shapes;
  DenseNet net;  // x_dim -> hidden -> hidden -> 1, identity output
};

GeneratorModel make_generator(const ModelShapes& shapes, std::uint64_t seed);
CriticModel make_critic(const ModelShapes& shapes, std::uint64_t seed);

// Trainable parameters in a fixed order (weights then bias per layer).
std::vector<MatX*> trainable_params(DenseNet& net);
std::vector<MatX*> trainable_params(GeneratorModel& model);

struct GenOutput {
  VecX t, f, s;
};

// [Re z; Im z] as the real network input.
VecX realify(const CVecX& z);

GenOutput generator_forward(const GeneratorModel& model,
                            const latent::LatentState& state,
                            const latent::InterferenceOperator& op);

double critic_forward(const CriticModel& model, const VecX& x);

// d critic / d input, closed form for the tanh/identity layer chain.
VecX critic_input_gradient(const CriticModel& model, const VecX& x);

// (||grad_x critic(x_mix)||_2 - 1)^2 at x_mix = u*real + (1-u)*fake,
// u ~ Uniform(0,1) drawn from mix_seed.
double gradient_penalty(const CriticModel& model, const VecX& real,
                        const VecX& fake, std::uint64_t mix_seed);

// --- Adam ---

struct AdamConfig {
  double alpha = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  long t = 0;
  std::vector<MatX> m, v;
};

void adam_step(const std::vector<MatX*>& params, const std::vector<MatX>& grads,
               AdamState& state, const AdamConfig& cfg);

// --- Tape builders ---

// Forward pass on the tape; returns per-layer post-activation node ids
// (last one is the output). When `params` is non-null the layer weights are
// registered there in trainable_params order.
struct NetGraph {
  std::vector<int> w_nodes, b_nodes;
  std::vector<int> layer_out;
  int out = -1;
};
NetGraph dense_graph(ad::Tape& tape, const DenseNet& net, int input,
                     std::vector<int>* params);

// Re-evaluates the net on another input while sharing the parameter leaves
// of a previously built graph.
NetGraph dense_graph_shared(ad::Tape& tape, const DenseNet& net, int input,
                            const NetGraph& shared);

// Input gradient of a scalar-output dense net as tape ops (enables
// second-order training through the gradient-penalty term).
int input_gradient_graph(ad::Tape& tape, const DenseNet& net,
                         const NetGraph& graph, int input);

// Generator forward on the tape: realified latent batch -> (t, f, s) batch
// nodes. Branch mixing uses Re(w_ij); when `op_params` is non-null the six
// upper-triangle components (re tf, re ts, re fs, im tf, im ts, im fs) are
// registered as trainable leaves in that order.
struct GenGraph {
  int t = -1, f = -1, s = -1;
  std::vector<int> params;     // generator weights, trainable_params order
  std::vector<int> op_params;  // optional operator leaves
};
GenGraph generator_graph(ad::Tape& tape, const GeneratorModel& model,
                         const latent::InterferenceOperator& op, int z_input,
                         bool train_operator);

}  // namespace qcfd::nn
