#include "qcfd/nets.hpp"

#include <cmath>

#include "qcfd/errors.hpp"

namespace qcfd::nn {

void DenseNet::validate() const {
  if (layers.empty()) throw ParamError("dense net: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (l.b.rows() != l.w.rows() || l.b.cols() != 1) {
      throw ParamError("dense net: bias shape mismatch");
    }
    if (i > 0 && layers[i - 1].w.rows() != l.w.cols()) {
      throw ParamError("dense net: consecutive layer shapes do not compose");
    }
    if (!l.w.allFinite() || !l.b.allFinite()) {
      throw ParamError("dense net: parameters must be finite");
    }
  }
}

VecX DenseNet::forward(const VecX& x) const {
  VecX h = x;
  for (const Layer& l : layers) {
    h = l.w * h + l.b.col(0);
    if (l.act == Act::Tanh) h = h.array().tanh();
  }
  return h;
}

MatX DenseNet::forward_batch(const MatX& x) const {
  MatX h = x;
  for (const Layer& l : layers) {
    h = (l.w * h).colwise() + VecX(l.b.col(0));
    if (l.act == Act::Tanh) h = h.array().tanh();
  }
  return h;
}

DenseNet make_dense(const std::vector<int>& dims, const std::vector<Act>& acts,
                    Rng& rng) {
  if (dims.size() < 2 || acts.size() != dims.size() - 1) {
    throw ParamError("make_dense: dims/acts mismatch");
  }
  DenseNet net;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    Layer l;
    const int in = dims[i];
    const int out = dims[i + 1];
    const double a = 1.0 / std::sqrt(static_cast<double>(in));
    l.w.resize(out, in);
    l.b.resize(out, 1);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) l.w(r, c) = rng.uniform(-a, a);
    }
    for (int r = 0; r < out; ++r) l.b(r, 0) = rng.uniform(-a, a);
    l.act = acts[i];
    net.layers.push_back(std::move(l));
  }
  net.validate();
  return net;
}

GeneratorModel make_generator(const ModelShapes& shapes, std::uint64_t seed) {
  GeneratorModel g;
  g.shapes = shapes;
  Rng rng(seed);
  const int zin = 2 * shapes.latent_dim();
  g.core = make_dense({zin, 3 * shapes.hdim}, {Act::Tanh}, rng);
  g.head_t = make_dense({shapes.hdim, shapes.hdim, shapes.t_dim},
                        {Act::Tanh, Act::Identity}, rng);
  g.head_f = make_dense({shapes.hdim, shapes.hdim, shapes.f_dim},
                        {Act::Tanh, Act::Identity}, rng);
  g.head_s = make_dense({shapes.hdim, shapes.hdim, shapes.s_dim()},
                        {Act::Tanh, Act::Identity}, rng);
  return g;
}

CriticModel make_critic(const ModelShapes& shapes, std::uint64_t seed) {
  CriticModel c;
  c.shapes = shapes;
  Rng rng(seed);
  c.net = make_dense(
      {shapes.x_dim(), shapes.critic_hidden, shapes.critic_hidden, 1},
      {Act::Tanh, Act::Tanh, Act::Identity}, rng);
  return c;
}

std::vector<MatX*> trainable_params(DenseNet& net) {
  std::vector<MatX*> out;
  for (Layer& l : net.layers) {
    out.push_back(&l.w);
    out.push_back(&l.b);
  }
  return out;
}

std::vector<MatX*> trainable_params(GeneratorModel& model) {
  std::vector<MatX*> out;
  for (DenseNet* net : {&model.core, &model.head_t, &model.head_f, &model.head_s}) {
    for (MatX* p : trainable_params(*net)) out.push_back(p);
  }
  return out;
}

VecX realify(const CVecX& z) {
  VecX x(2 * z.size());
  x.head(z.size()) = z.real();
  x.tail(z.size()) = z.imag();
  return x;
}

GenOutput generator_forward(const GeneratorModel& model,
                            const latent::LatentState& state,
                            const latent::InterferenceOperator& op) {
  if (state.z.size() != model.shapes.latent_dim()) {
    throw ParamError("generator_forward: latent dimension mismatch");
  }
  const VecX h = model.core.forward(realify(state.z));
  const int hd = model.shapes.hdim;
  const auto mixed = latent::cross_branch_mix(h.segment(0, hd), h.segment(hd, hd),
                                              h.segment(2 * hd, hd), op);
  GenOutput out;
  out.t = model.head_t.forward(mixed[0]);
  out.f = model.head_f.forward(mixed[1]);
  out.s = model.head_s.forward(mixed[2]);
  return out;
}

double critic_forward(const CriticModel& model, const VecX& x) {
  if (x.size() != model.shapes.x_dim()) {
    throw ParamError("critic_forward: input dimension mismatch");
  }
  return model.net.forward(x)(0);
}

VecX critic_input_gradient(const CriticModel& model, const VecX& x) {
  const auto& layers = model.net.layers;
  std::vector<VecX> act(layers.size());
  VecX h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = layers[l].w * h + layers[l].b.col(0);
    if (layers[l].act == Act::Tanh) h = h.array().tanh();
    act[l] = h;
  }
  VecX delta = VecX::Ones(1);
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    if (layers[l].act == Act::Tanh) {
      delta = delta.cwiseProduct(VecX(1.0 - act[l].array().square()));
    }
    delta = layers[l].w.transpose() * delta;
  }
  return delta;
}

double gradient_penalty(const CriticModel& model, const VecX& real,
                        const VecX& fake, std::uint64_t mix_seed) {
  if (real.size() != fake.size()) throw ParamError("gradient_penalty: shape mismatch");
  Rng rng(mix_seed);
  const double u = rng.uniform();
  const VecX mix = u * real + (1.0 - u) * fake;
  const double norm = critic_input_gradient(model, mix).norm();
  return (norm - 1.0) * (norm - 1.0);
}

void adam_step(const std::vector<MatX*>& params, const std::vector<MatX>& grads,
               AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw ParamError("adam_step: param/grad count mismatch");
  if (state.m.empty()) {
    for (const MatX* p : params) {
      state.m.push_back(MatX::Zero(p->rows(), p->cols()));
      state.v.push_back(MatX::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size()) throw ParamError("adam_step: state size mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    MatX& p = *params[i];
    const MatX& g = grads[i];
    if (g.rows() != p.rows() || g.cols() != p.cols()) {
      throw ParamError("adam_step: gradient shape mismatch");
    }
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const MatX m_hat = state.m[i] / bc1;
    const MatX v_hat = state.v[i] / bc2;
    p.array() -= cfg.alpha * m_hat.array() / (v_hat.array().sqrt() + cfg.eps);
  }
}

NetGraph dense_graph(ad::Tape& tape, const DenseNet& net, int input,
                     std::vector<int>* params) {
  NetGraph g;
  const int n = static_cast<int>(tape.value(input).cols());
  const int ones_row = tape.ones(1, n);
  int h = input;
  for (const Layer& l : net.layers) {
    const int w = tape.leaf(l.w);
    const int b = tape.leaf(l.b);
    if (params) {
      params->push_back(w);
      params->push_back(b);
    }
    int z = tape.add(tape.matmul(w, h), tape.matmul(b, ones_row));
    h = (l.act == Act::Tanh) ? tape.tanh(z) : z;
    g.w_nodes.push_back(w);
    g.b_nodes.push_back(b);
    g.layer_out.push_back(h);
  }
  g.out = h;
  return g;
}

NetGraph dense_graph_shared(ad::Tape& tape, const DenseNet& net, int input,
                            const NetGraph& shared) {
  if (shared.w_nodes.size() != net.layers.size()) {
    throw ParamError("dense_graph_shared: graph does not match net");
  }
  NetGraph g;
  g.w_nodes = shared.w_nodes;
  g.b_nodes = shared.b_nodes;
  const int n = static_cast<int>(tape.value(input).cols());
  const int ones_row = tape.ones(1, n);
  int h = input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    int z = tape.add(tape.matmul(g.w_nodes[l], h),
                     tape.matmul(g.b_nodes[l], ones_row));
    h = (net.layers[l].act == Act::Tanh) ? tape.tanh(z) : z;
    g.layer_out.push_back(h);
  }
  g.out = h;
  return g;
}

int input_gradient_graph(ad::Tape& tape, const DenseNet& net,
                         const NetGraph& graph, int input) {
  if (net.out_dim() != 1) {
    throw ParamError("input_gradient_graph: requires scalar-output net");
  }
  const int n = static_cast<int>(tape.value(input).cols());
  int delta = tape.ones(1, n);
  for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
    if (net.layers[l].act == Act::Tanh) {
      const int a = graph.layer_out[l];
      const int one = tape.ones(static_cast<int>(tape.value(a).rows()), n);
      delta = tape.cwise_mul(delta, tape.sub(one, tape.cwise_mul(a, a)));
    }
    delta = tape.matmul(tape.transpose(graph.w_nodes[l]), delta);
  }
  return delta;
}

GenGraph generator_graph(ad::Tape& tape, const GeneratorModel& model,
                         const latent::InterferenceOperator& op, int z_input,
                         bool train_operator) {
  GenGraph g;
  const NetGraph core = dense_graph(tape, model.core, z_input, &g.params);
  const int hd = model.shapes.hdim;
  const int h_t = tape.segment_rows(core.out, 0, hd);
  const int h_f = tape.segment_rows(core.out, hd, hd);
  const int h_s = tape.segment_rows(core.out, 2 * hd, hd);

  int re_tf, re_ts, re_fs;
  if (train_operator) {
    re_tf = tape.leaf(MatX::Constant(1, 1, op.w(0, 1).real()));
    re_ts = tape.leaf(MatX::Constant(1, 1, op.w(0, 2).real()));
    re_fs = tape.leaf(MatX::Constant(1, 1, op.w(1, 2).real()));
    const int im_tf = tape.leaf(MatX::Constant(1, 1, op.w(0, 1).imag()));
    const int im_ts = tape.leaf(MatX::Constant(1, 1, op.w(0, 2).imag()));
    const int im_fs = tape.leaf(MatX::Constant(1, 1, op.w(1, 2).imag()));
    g.op_params = {re_tf, re_ts, re_fs, im_tf, im_ts, im_fs};
  }

  auto couple = [&](int target, int source, int re_node, double re_value) {
    if (train_operator) return tape.add(target, tape.smul(re_node, source));
    return tape.add(target, tape.mul_const(source, re_value));
  };
  // h~_i = h_i + sum_{j != i} Re(w_ij) h_j; Re(w_ij) == Re(w_ji).
  int m_t = h_t, m_f = h_f, m_s = h_s;
  m_t = couple(m_t, h_f, train_operator ? re_tf : -1, op.w(0, 1).real());
  m_t = couple(m_t, h_s, train_operator ? re_ts : -1, op.w(0, 2).real());
  m_f = couple(m_f, h_t, train_operator ? re_tf : -1, op.w(1, 0).real());
  m_f = couple(m_f, h_s, train_operator ? re_fs : -1, op.w(1, 2).real());
  m_s = couple(m_s, h_t, train_operator ? re_ts : -1, op.w(2, 0).real());
  m_s = couple(m_s, h_f, train_operator ? re_fs : -1, op.w(2, 1).real());

  g.t = dense_graph(tape, model.head_t, m_t, &g.params).out;
  g.f = dense_graph(tape, model.head_f, m_f, &g.params).out;
  g.s = dense_graph(tape, model.head_s, m_s, &g.params).out;
  return g;
}

}  // namespace qcfd::nn
