#include "qcfd/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "qcfd/autodiff.hpp"
#include "qcfd/errors.hpp"
#include "qcfd/rng.hpp"

namespace qcfd::train {

void TrainConfig::validate() const {
  if (opt.alpha <= 0.0 || opt.beta1 <= 0.0 || opt.beta1 >= 1.0 ||
      opt.beta2 <= 0.0 || opt.beta2 >= 1.0) {
    throw ParamError("train config: invalid optimizer settings");
  }
  if (batch < 1 || max_epochs < 0 || critic_steps < 1 || patience < 1) {
    throw ParamError("train config: invalid loop settings");
  }
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0 || lambda_orth < 0.0 ||
      gp_weight < 0.0) {
    throw ParamError("train config: loss weights must be nonnegative");
  }
  if (probe_size < 16 || reference_epochs < 1) {
    throw ParamError("train config: invalid probe/reference settings");
  }
}

LatentEncoder LatentEncoder::make(const nn::ModelShapes& shapes,
                                  std::uint64_t seed) {
  Rng rng(seed);
  auto projection = [&rng](int dim) {
    MatX p(2, dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < dim; ++c) p(r, c) = scale * rng.gauss();
    }
    return p;
  };
  LatentEncoder enc;
  enc.p_t = projection(shapes.t_dim);
  enc.p_f = projection(shapes.f_dim);
  enc.p_s = projection(shapes.s_dim());
  return enc;
}

std::array<latent::Complex, 3> LatentEncoder::encode(const VecX& t, const VecX& f,
                                                     const VecX& s) const {
  const Eigen::Vector2d at = p_t * t;
  const Eigen::Vector2d af = p_f * f;
  const Eigen::Vector2d as = p_s * s;
  std::array<latent::Complex, 3> alpha = {latent::Complex(at[0], at[1]),
                                          latent::Complex(af[0], af[1]),
                                          latent::Complex(as[0], as[1])};
  double norm2 = 0.0;
  for (const auto& a : alpha) norm2 += std::norm(a);
  const double norm = std::sqrt(norm2);
  if (norm > 0.0) {
    for (auto& a : alpha) a /= norm;
  }
  return alpha;
}

double LatentEncoder::energy(const VecX& t, const VecX& f, const VecX& s,
                             const latent::InterferenceOperator& op) const {
  return latent::interference_energy_complex(encode(t, f, s), op).real();
}

double phys_loss(const VecX& gen_t, const VecX& tmpl, IndexWindow qrs,
                 IndexWindow st) {
  if (gen_t.size() != tmpl.size()) throw ParamError("phys_loss: length mismatch");
  if (qrs.empty() || st.empty() || qrs.lo < 0 || st.hi > gen_t.size()) {
    throw ParamError("phys_loss: degenerate morphology windows");
  }
  const auto window_mse = [&](IndexWindow w) {
    return (gen_t.segment(w.lo, w.size()) - tmpl.segment(w.lo, w.size()))
        .array()
        .square()
        .mean();
  };
  return window_mse(qrs) + window_mse(st);
}

double total_generator_loss(double gan, double cfd, double interf, double phys,
                            double lambda1, double lambda2, double lambda3) {
  const double total = gan + lambda1 * cfd + lambda2 * interf + lambda3 * phys;
  if (!std::isfinite(total)) {
    throw NumericError("total_generator_loss: non-finite loss part");
  }
  return total;
}

namespace {

constexpr double kNormGuard = 1e-24;

// 1 x n per-column Euclidean norms of `a`, guarded away from zero.
int col_norms(ad::Tape& tape, int a) {
  const int rows = static_cast<int>(tape.value(a).rows());
  const int cols = static_cast<int>(tape.value(a).cols());
  const int sq_sum = tape.matmul(tape.ones(1, rows), tape.cwise_mul(a, a));
  return tape.sqrt(tape.add(sq_sum, tape.leaf(MatX::Constant(1, cols, kNormGuard))));
}

int normalize_cols_centered(ad::Tape& tape, int a) {
  const int rows = static_cast<int>(tape.value(a).rows());
  const int cols = static_cast<int>(tape.value(a).cols());
  const int mean_col =
      tape.mul_const(tape.matmul(a, tape.ones(cols, 1)), 1.0 / cols);
  const int centered = tape.sub(a, tape.matmul(mean_col, tape.ones(1, cols)));
  const int norms = col_norms(tape, centered);
  return tape.cwise_div(centered, tape.matmul(tape.ones(rows, 1), norms));
}

// Sum over ordered pairs of squared mean cosine; embeddings are 3 equal-size
// batches (dim x n).
int orthogonality_graph(ad::Tape& tape, const std::array<int, 3>& embeds) {
  std::array<int, 3> unit;
  for (int m = 0; m < 3; ++m) unit[m] = normalize_cols_centered(tape, embeds[m]);
  const int dim = static_cast<int>(tape.value(unit[0]).rows());
  auto mean_dot = [&](int a, int b) {
    return tape.mean_all(tape.matmul(tape.ones(1, dim), tape.cwise_mul(a, b)));
  };
  const int m01 = mean_dot(unit[0], unit[1]);
  const int m02 = mean_dot(unit[0], unit[2]);
  const int m12 = mean_dot(unit[1], unit[2]);
  const int sum = tape.add(tape.cwise_mul(m01, m01),
                           tape.add(tape.cwise_mul(m02, m02), tape.cwise_mul(m12, m12)));
  return tape.mul_const(sum, 2.0);  // ordered pairs count each one twice
}

// 6 x n realified amplitude blocks of the latent-encoder projection applied
// to generated modality batches.
int encoder_blocks_graph(ad::Tape& tape, const LatentEncoder& enc,
                         const nn::GenGraph& gg) {
  const int at = tape.matmul(tape.leaf(enc.p_t), gg.t);
  const int af = tape.matmul(tape.leaf(enc.p_f), gg.f);
  const int as = tape.matmul(tape.leaf(enc.p_s), gg.s);
  const int re = tape.vconcat({tape.segment_rows(at, 0, 1), tape.segment_rows(af, 0, 1),
                               tape.segment_rows(as, 0, 1)});
  const int im = tape.vconcat({tape.segment_rows(at, 1, 1), tape.segment_rows(af, 1, 1),
                               tape.segment_rows(as, 1, 1)});
  return tape.vconcat({re, im});
}

// Real symmetric quadratic-form matrix, optionally assembled from trainable
// operator components so gradients reach the coupling weights.
int quadratic_form_graph(ad::Tape& tape, const latent::InterferenceOperator& op,
                         const std::vector<int>& op_params) {
  if (op_params.empty()) {
    return tape.leaf(latent::realified_quadratic_form(op));
  }
  const std::array<std::pair<int, int>, 3> pairs = {{{0, 1}, {0, 2}, {1, 2}}};
  int m = tape.leaf(MatX::Zero(6, 6));
  for (int p = 0; p < 3; ++p) {
    const auto [i, j] = pairs[p];
    MatX mask_u = MatX::Zero(6, 6);
    mask_u(i, j) = mask_u(j, i) = 1.0;
    mask_u(i + 3, j + 3) = mask_u(j + 3, i + 3) = 1.0;
    MatX mask_v = MatX::Zero(6, 6);
    mask_v(i, j + 3) = -1.0;
    mask_v(j, i + 3) = 1.0;
    mask_v(i + 3, j) = 1.0;
    mask_v(j + 3, i) = -1.0;
    m = tape.add(m, tape.smul(op_params[p], tape.leaf(mask_u)));
    m = tape.add(m, tape.smul(op_params[p + 3], tape.leaf(mask_v)));
  }
  return m;
}

int interference_graph(ad::Tape& tape, const LatentEncoder& enc,
                       const nn::GenGraph& gg,
                       const latent::InterferenceOperator& op,
                       double real_mean_energy) {
  const int z6 = encoder_blocks_graph(tape, enc, gg);
  const int norms = col_norms(tape, z6);
  const int zn = tape.cwise_div(z6, tape.matmul(tape.ones(6, 1), norms));
  const int m = quadratic_form_graph(tape, op, gg.op_params);
  const int energies =
      tape.matmul(tape.ones(1, 6), tape.cwise_mul(tape.matmul(m, zn), zn));
  const int gen_mean = tape.mean_all(energies);
  return tape.abs(tape.sub(gen_mean, tape.constant(real_mean_energy)));
}

int phys_graph(ad::Tape& tape, const nn::GenGraph& gg, const VecX& tmpl,
               IndexWindow qrs, IndexWindow st) {
  if (qrs.empty() || st.empty()) return tape.constant(0.0);
  const int n = static_cast<int>(tape.value(gg.t).cols());
  auto window_term = [&](IndexWindow w) {
    const int seg = tape.segment_rows(gg.t, w.lo, w.size());
    const MatX target = tmpl.segment(w.lo, w.size()).replicate(1, n);
    const int diff = tape.sub(seg, tape.leaf(target));
    return tape.mean_all(tape.cwise_mul(diff, diff));
  };
  return tape.add(window_term(qrs), window_term(st));
}

MatX concat_columns(const std::vector<dsp::TriModalSample>& data,
                    const std::vector<int>& idx, const nn::ModelShapes& shapes) {
  MatX x(shapes.x_dim(), idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const auto feats = info::modality_features(data[idx[j]]);
    x.col(static_cast<long>(j)) << feats[0], feats[1], feats[2];
  }
  return x;
}

}  // namespace

CriticStepResult critic_step_loss(const nn::CriticModel& critic, const MatX& x_real,
                                  const MatX& x_fake, const VecX& mix_u,
                                  double gp_weight) {
  if (x_real.rows() != x_fake.rows() || x_real.cols() != x_fake.cols()) {
    throw ParamError("critic_step_loss: real/fake shape mismatch");
  }
  if (mix_u.size() != x_real.cols()) {
    throw ParamError("critic_step_loss: mixing coefficients do not match batch");
  }
  const long n = x_real.cols();
  MatX x_mix(x_real.rows(), n);
  for (long j = 0; j < n; ++j) {
    x_mix.col(j) = mix_u[j] * x_real.col(j) + (1.0 - mix_u[j]) * x_fake.col(j);
  }

  ad::Tape tape;
  std::vector<int> param_nodes;
  const int xr = tape.leaf(x_real);
  const int xf = tape.leaf(x_fake);
  const int xm = tape.leaf(x_mix);
  const nn::NetGraph g_real = nn::dense_graph(tape, critic.net, xr, &param_nodes);
  const nn::NetGraph g_fake = nn::dense_graph_shared(tape, critic.net, xf, g_real);
  const nn::NetGraph g_mix = nn::dense_graph_shared(tape, critic.net, xm, g_real);

  const int grad_x = nn::input_gradient_graph(tape, critic.net, g_mix, xm);
  const int norms = col_norms(tape, grad_x);
  const int excess = tape.sub(norms, tape.ones(1, static_cast<int>(n)));
  const int gp = tape.mean_all(tape.cwise_mul(excess, excess));
  const int wgan = tape.sub(tape.mean_all(g_fake.out), tape.mean_all(g_real.out));
  const int loss = tape.add(wgan, tape.mul_const(gp, gp_weight));

  CriticStepResult out;
  out.wgan = tape.scalar_value(wgan);
  out.gp = tape.scalar_value(gp);
  out.loss = tape.scalar_value(loss);
  if (!std::isfinite(out.loss)) {
    throw NumericError("critic_step_loss: non-finite loss");
  }
  tape.backward(loss);
  out.grads.reserve(param_nodes.size());
  for (int id : param_nodes) out.grads.push_back(tape.grad(id));
  return out;
}

GenStepResult generator_step_loss(
    const nn::GeneratorModel& gen, const nn::CriticModel& critic,
    const eval::ReferenceModels& ref, const LatentEncoder& encoder,
    const latent::InterferenceOperator& op, const MatX& z_batch,
    double real_mean_energy, const VecX& tmpl, IndexWindow qrs, IndexWindow st,
    const LossWeights& weights, bool train_operator) {
  ad::Tape tape;
  const int z = tape.leaf(z_batch);
  nn::GenGraph gg = nn::generator_graph(tape, gen, op, z, train_operator);

  const int x_hat = tape.vconcat({gg.t, gg.f, gg.s});
  const nn::NetGraph cg = nn::dense_graph(tape, critic.net, x_hat, nullptr);
  const int gan = tape.mul_const(tape.mean_all(cg.out), -1.0);

  const std::array<int, 3> embeds = {
      nn::dense_graph(tape, ref.enc_t, gg.t, nullptr).out,
      nn::dense_graph(tape, ref.enc_f, gg.f, nullptr).out,
      nn::dense_graph(tape, ref.enc_s, gg.s, nullptr).out};
  const int orth = orthogonality_graph(tape, embeds);

  const int interf = interference_graph(tape, encoder, gg, op, real_mean_energy);
  const int phys = phys_graph(tape, gg, tmpl, qrs, st);

  int total = tape.mul_const(gan, weights.gan);
  total = tape.add(total, tape.mul_const(orth, weights.orth));
  total = tape.add(total, tape.mul_const(interf, weights.interf));
  total = tape.add(total, tape.mul_const(phys, weights.phys));

  GenStepResult out;
  out.gan = tape.scalar_value(gan);
  out.orth = tape.scalar_value(orth);
  out.interf = tape.scalar_value(interf);
  out.phys = tape.scalar_value(phys);
  out.total = tape.scalar_value(total);
  if (!std::isfinite(out.total)) {
    throw NumericError("generator_step_loss: non-finite loss");
  }
  tape.backward(total);
  out.grads.reserve(gg.params.size());
  for (int id : gg.params) out.grads.push_back(tape.grad(id));
  for (int id : gg.op_params) out.op_grads.push_back(tape.grad(id));
  return out;
}

GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::function<std::vector<MatX>()>& grads,
                           const std::vector<MatX*>& params, int per_param,
                           double step, std::uint64_t seed) {
  const std::vector<MatX> g = grads();
  if (g.size() != params.size()) {
    throw ParamError("grad_check: gradient/parameter count mismatch");
  }
  Rng rng(seed);
  GradCheckReport rep;
  for (std::size_t i = 0; i < params.size(); ++i) {
    MatX& p = *params[i];
    const long size = p.size();
    for (int k = 0; k < per_param; ++k) {
      const long j = static_cast<long>(rng.next_u64() % static_cast<std::uint64_t>(size));
      double* cell = p.data() + j;
      const double orig = *cell;
      const double h = step * std::max(1.0, std::abs(orig));
      *cell = orig + h;
      const double fp = loss();
      *cell = orig - h;
      const double fm = loss();
      *cell = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double ad = g[i].data()[j];
      const double denom = std::max({std::abs(ad), std::abs(fd), 1e-6});
      rep.max_rel_error = std::max(rep.max_rel_error, std::abs(ad - fd) / denom);
      ++rep.checked;
    }
  }
  return rep;
}

Ablation parse_ablation(const std::string& name) {
  if (name == "none" || name.empty()) return Ablation::None;
  if (name == "a1") return Ablation::NoCfd;
  if (name == "a2") return Ablation::ZeroOperator;
  if (name == "a3") return Ablation::NoMorphology;
  throw ParamError("unknown ablation '" + name + "' (expected none|a1|a2|a3)");
}

void apply_ablation(Ablation a, TrainConfig& cfg, latent::InterferenceOperator& op) {
  switch (a) {
    case Ablation::None:
      break;
    case Ablation::NoCfd:
      cfg.lambda1 = 0.0;
      break;
    case Ablation::ZeroOperator:
      op = latent::InterferenceOperator{};
      break;
    case Ablation::NoMorphology:
      cfg.lambda3 = 0.0;
      break;
  }
}

namespace {

struct ClassIndex {
  std::vector<int> labels;
  std::vector<std::vector<int>> members;  // positions into a subset list
};

ClassIndex group_by_class(const std::vector<dsp::TriModalSample>& data,
                          const std::vector<int>& subset) {
  std::map<int, std::vector<int>> by_class;
  for (int i : subset) by_class[data[i].label].push_back(i);
  ClassIndex out;
  for (auto& [label, idx] : by_class) {
    out.labels.push_back(label);
    out.members.push_back(std::move(idx));
  }
  return out;
}

MatX latent_batch(const nn::ModelShapes& shapes, std::uint64_t seed,
                  std::uint64_t& counter, long n) {
  MatX z(2 * shapes.latent_dim(), n);
  for (long j = 0; j < n; ++j) {
    const auto state =
        latent::sample_latent(shapes.latent_dim(), derive_seed(seed, "z", counter++));
    z.col(j) = nn::realify(state.z);
  }
  return z;
}

std::vector<dsp::TriModalSample> forward_to_samples(
    const nn::GeneratorModel& gen, const latent::InterferenceOperator& op,
    const MatX& z, int label, double fs) {
  std::vector<dsp::TriModalSample> out;
  out.reserve(z.cols());
  for (long j = 0; j < z.cols(); ++j) {
    latent::LatentState state;
    const int d = gen.shapes.latent_dim();
    state.z = CVecX(d);
    for (int i = 0; i < d; ++i) {
      state.z[i] = latent::Complex(z(i, j), z(d + i, j));
    }
    state.alpha = latent::block_amplitudes(state.z);
    const nn::GenOutput o = nn::generator_forward(gen, state, op);
    dsp::TriModalSample s;
    s.t.samples = o.t;
    s.t.fs = fs;
    s.f.bins = o.f;
    s.s.grid = data::unflatten_rows(o.s, gen.shapes.s_rows, gen.shapes.s_cols);
    s.label = label;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TrainResult train(const std::vector<dsp::TriModalSample>& data,
                  const TrainConfig& cfg, const nn::ModelShapes& shapes,
                  const latent::InterferenceOperator& op_in) {
  cfg.validate();
  op_in.validate();
  if (data.empty()) throw ParamError("train: empty dataset");
  if (data[0].t.samples.size() != shapes.t_dim ||
      data[0].f.bins.size() != shapes.f_dim ||
      data[0].s.grid.size() != shapes.s_dim()) {
    throw ParamError("train: dataset shapes do not match model shapes");
  }

  const data::SplitIndices split = data::split_dataset(data, cfg.seed);
  std::vector<dsp::TriModalSample> train_set, val_set;
  for (int i : split.train) train_set.push_back(data[i]);
  for (int i : split.val) val_set.push_back(data[i]);

  const ClassIndex classes = group_by_class(data, split.train);
  const int n_cls = static_cast<int>(classes.labels.size());
  if (n_cls != shapes.n_classes) {
    throw ParamError("train: class count does not match model shapes");
  }

  // Frozen feature extractor for the orthogonality penalty and evaluation.
  const eval::ReferenceModels ref = eval::train_reference_models(
      train_set, shapes, derive_seed(cfg.seed, "reference"), cfg.opt,
      cfg.reference_epochs, cfg.batch);
  const double ref_acc = eval::classifier_accuracy(ref, val_set);

  const info::BinningSpec spec = info::fit_binning(train_set, 8);
  const double c_real = info::cfd_stats(train_set, spec).c_tfs;

  const data::ClassTemplates tmpl = data::class_templates(data, split.train);
  const bool phys_enabled = tmpl.has_windows && cfg.lambda3 > 0.0;
  const bool interf_enabled = cfg.use_latent_encoder && cfg.lambda2 > 0.0;

  const LatentEncoder encoder =
      LatentEncoder::make(shapes, derive_seed(cfg.seed, "latent-encoder"));

  TrainedModel model;
  model.shapes = shapes;
  model.class_labels = classes.labels;
  model.op = op_in;
  model.seed = cfg.seed;
  std::vector<nn::CriticModel> critics;
  std::vector<nn::AdamState> gen_adam(n_cls), critic_adam(n_cls);
  for (int c = 0; c < n_cls; ++c) {
    model.gens.push_back(nn::make_generator(
        shapes, derive_seed(cfg.seed, "generator", static_cast<std::uint64_t>(c))));
    critics.push_back(nn::make_critic(
        shapes, derive_seed(cfg.seed, "critic", static_cast<std::uint64_t>(c))));
  }

  // Trainable operator components live in six 1x1 shadow parameters.
  std::vector<MatX> op_storage(6, MatX::Zero(1, 1));
  auto load_op_storage = [&]() {
    op_storage[0](0, 0) = model.op.w(0, 1).real();
    op_storage[1](0, 0) = model.op.w(0, 2).real();
    op_storage[2](0, 0) = model.op.w(1, 2).real();
    op_storage[3](0, 0) = model.op.w(0, 1).imag();
    op_storage[4](0, 0) = model.op.w(0, 2).imag();
    op_storage[5](0, 0) = model.op.w(1, 2).imag();
  };
  auto store_op = [&]() {
    model.op = latent::InterferenceOperator::from_upper(
        latent::Complex(op_storage[0](0, 0), op_storage[3](0, 0)),
        latent::Complex(op_storage[1](0, 0), op_storage[4](0, 0)),
        latent::Complex(op_storage[2](0, 0), op_storage[5](0, 0)));
  };
  load_op_storage();
  std::vector<MatX*> op_params;
  for (auto& m : op_storage) op_params.push_back(&m);
  nn::AdamState op_adam;

  // Fixed probe latents for the per-epoch complementarity estimate and fixed
  // validation latents per class.
  const int probe_per_class = std::max(8, cfg.probe_size / std::max(1, n_cls));
  std::vector<MatX> probe_z, val_z;
  std::uint64_t probe_counter = 0, val_counter = 0;
  const ClassIndex val_classes = group_by_class(data, split.val);
  for (int c = 0; c < n_cls; ++c) {
    std::uint64_t pc = probe_counter;
    probe_z.push_back(latent_batch(shapes, derive_seed(cfg.seed, "probe"), pc,
                                   probe_per_class));
    probe_counter = pc;
    long n_val = cfg.batch;
    if (c < static_cast<int>(val_classes.members.size())) {
      n_val = std::min<long>(cfg.batch,
                             static_cast<long>(val_classes.members[c].size()));
    }
    std::uint64_t vc = val_counter;
    val_z.push_back(latent_batch(shapes, derive_seed(cfg.seed, "val-z"), vc,
                                 std::max<long>(2, n_val)));
    val_counter = vc;
  }

  Rng order_rng(derive_seed(cfg.seed, "batch-order"));
  Rng mix_rng(derive_seed(cfg.seed, "gp-mix"));
  std::uint64_t z_counter = 0;

  auto template_of = [&](int c) -> const VecX& { return tmpl.mean_t[c]; };

  auto validation_parts = [&]() {
    ValParts parts;
    std::vector<dsp::TriModalSample> fakes;
    double gan_val = 0.0, phys_val = 0.0;
    for (int c = 0; c < n_cls; ++c) {
      const auto fc = forward_to_samples(model.gens[c], model.op, val_z[c],
                                         classes.labels[c], data[0].t.fs);
      double score = 0.0;
      for (const auto& s : fc) {
        VecX x(shapes.x_dim());
        const auto feats = info::modality_features(s);
        x << feats[0], feats[1], feats[2];
        score += nn::critic_forward(critics[c], x);
        if (phys_enabled) {
          phys_val += phys_loss(s.t.samples, template_of(c), tmpl.qrs[c], tmpl.st[c]) /
                      static_cast<double>(fc.size());
        }
      }
      gan_val += -score / static_cast<double>(fc.size());
      for (auto& s : fc) fakes.push_back(s);
    }
    parts.gan = gan_val / n_cls;
    parts.phys = phys_enabled ? phys_val / n_cls : 0.0;

    std::array<MatX, 3> feats;
    for (int m = 0; m < 3; ++m) {
      feats[m].resize(shapes.enc_dim, static_cast<long>(fakes.size()));
    }
    for (std::size_t i = 0; i < fakes.size(); ++i) {
      const auto f = info::modality_features(fakes[i]);
      feats[0].col(static_cast<long>(i)) = ref.enc_t.forward(f[0]);
      feats[1].col(static_cast<long>(i)) = ref.enc_f.forward(f[1]);
      feats[2].col(static_cast<long>(i)) = ref.enc_s.forward(f[2]);
    }
    parts.orth = info::orthogonality_penalty(feats);

    if (interf_enabled) {
      double real_e = 0.0;
      for (const auto& s : val_set) {
        const auto f = info::modality_features(s);
        real_e += encoder.energy(f[0], f[1], f[2], model.op);
      }
      real_e /= static_cast<double>(val_set.size());
      double gen_e = 0.0;
      for (const auto& s : fakes) {
        const auto f = info::modality_features(s);
        gen_e += encoder.energy(f[0], f[1], f[2], model.op);
      }
      gen_e /= static_cast<double>(fakes.size());
      parts.interf = std::abs(real_e - gen_e);
    }
    return parts;
  };

  auto probe_cfd_gap = [&]() {
    std::vector<dsp::TriModalSample> probe;
    for (int c = 0; c < n_cls; ++c) {
      auto pc = forward_to_samples(model.gens[c], model.op, probe_z[c],
                                   classes.labels[c], data[0].t.fs);
      for (auto& s : pc) probe.push_back(std::move(s));
    }
    const double c_hat = info::cfd_stats(probe, spec).c_tfs;
    return std::pair<double, double>(std::abs(c_real - c_hat),
                                     c_real != 0.0 ? c_hat / c_real : 0.0);
  };

  History history;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  std::vector<nn::GeneratorModel> best_gens;
  latent::InterferenceOperator best_op;
  ValParts best_parts;

  const LossWeights weights{1.0, cfg.lambda1 * cfg.lambda_orth,
                            interf_enabled ? cfg.lambda2 : 0.0,
                            phys_enabled ? cfg.lambda3 : 0.0};

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    int critic_updates = 0, gen_updates = 0;

    for (int c = 0; c < n_cls; ++c) {
      std::vector<int> order = classes.members[c];
      order_rng.shuffle(order);
      std::vector<MatX*> gen_params = nn::trainable_params(model.gens[c]);
      std::vector<MatX*> critic_params = nn::trainable_params(critics[c].net);

      for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
        const std::size_t stop = std::min(order.size(), start + cfg.batch);
        const std::vector<int> idx(order.begin() + start, order.begin() + stop);
        const long nb = static_cast<long>(idx.size());
        const MatX x_real = concat_columns(data, idx, shapes);

        for (int k = 0; k < cfg.critic_steps; ++k) {
          const MatX zb = latent_batch(shapes, cfg.seed, z_counter, nb);
          MatX x_fake(shapes.x_dim(), nb);
          {
            const auto fakes = forward_to_samples(model.gens[c], model.op, zb,
                                                  classes.labels[c], data[0].t.fs);
            for (long j = 0; j < nb; ++j) {
              const auto feats = info::modality_features(fakes[j]);
              x_fake.col(j) << feats[0], feats[1], feats[2];
            }
          }
          VecX u(nb);
          for (long j = 0; j < nb; ++j) u[j] = mix_rng.uniform();
          const CriticStepResult cres =
              critic_step_loss(critics[c], x_real, x_fake, u, cfg.gp_weight);
          nn::adam_step(critic_params, cres.grads, critic_adam[c], cfg.opt);
          rec.critic_loss += cres.loss;
          ++critic_updates;
        }

        const MatX zb = latent_batch(shapes, cfg.seed, z_counter, nb);
        double real_energy = 0.0;
        if (interf_enabled) {
          for (int i : idx) {
            const auto f = info::modality_features(data[i]);
            real_energy += encoder.energy(f[0], f[1], f[2], model.op);
          }
          real_energy /= static_cast<double>(nb);
        }
        const GenStepResult g = generator_step_loss(
            model.gens[c], critics[c], ref, encoder, model.op, zb, real_energy,
            template_of(c), phys_enabled ? tmpl.qrs[c] : IndexWindow{},
            phys_enabled ? tmpl.st[c] : IndexWindow{}, weights, cfg.train_operator);
        nn::adam_step(gen_params, g.grads, gen_adam[c], cfg.opt);
        if (cfg.train_operator) {
          nn::adam_step(op_params, g.op_grads, op_adam, cfg.opt);
          store_op();
        }
        rec.gan += g.gan;
        rec.orth += g.orth;
        rec.interf += interf_enabled ? g.interf : 0.0;
        rec.phys += phys_enabled ? g.phys : 0.0;
        rec.total += g.total;
        ++gen_updates;
      }
    }

    if (critic_updates > 0) rec.critic_loss /= critic_updates;
    if (gen_updates > 0) {
      rec.gan /= gen_updates;
      rec.orth /= gen_updates;
      rec.interf /= gen_updates;
      rec.phys /= gen_updates;
      rec.total /= gen_updates;
    }

    const auto [gap, ratio] = probe_cfd_gap();
    rec.cfd_gap = gap;
    rec.c_ratio = ratio;
    // The binned complementarity gap enters the composite as a tracked
    // metric; its gradient path is the orthogonality term.
    rec.total += cfg.lambda1 * gap;

    const ValParts parts = validation_parts();
    rec.val = parts.gan + cfg.lambda1 * (rec.cfd_gap + cfg.lambda_orth * parts.orth) +
              cfg.lambda2 * parts.interf + cfg.lambda3 * parts.phys;
    if (!std::isfinite(rec.val) || !std::isfinite(rec.total)) {
      throw NumericError("train: non-finite epoch losses");
    }
    history.push_back(rec);

    if (rec.val < best_val) {
      best_val = rec.val;
      best_epoch = epoch;
      best_gens = model.gens;
      best_op = model.op;
      best_parts = parts;
      best_parts.cfd_gap = rec.cfd_gap;
    } else if (epoch - best_epoch >= cfg.patience) {
      break;
    }
  }

  if (best_epoch > 0) {
    model.gens = best_gens;
    model.op = best_op;
  }

  TrainResult result;
  result.model = std::move(model);
  result.history = std::move(history);
  result.real_c_tfs = c_real;
  result.reference_accuracy = ref_acc;
  result.best_val_parts = best_parts;
  return result;
}

std::vector<dsp::TriModalSample> generate_samples(const TrainedModel& model,
                                                  int count, std::uint64_t seed,
                                                  double fs) {
  if (count < 1) throw ParamError("generate_samples: count must be >= 1");
  if (model.gens.empty()) throw ParamError("generate_samples: untrained model");
  const int n_cls = static_cast<int>(model.gens.size());
  std::vector<dsp::TriModalSample> out;
  out.reserve(count);
  std::uint64_t counter = 0;
  for (int i = 0; i < count; ++i) {
    const int c = i % n_cls;
    MatX z = latent_batch(model.shapes, seed, counter, 1);
    auto s = forward_to_samples(model.gens[c], model.op, z,
                                model.class_labels[c], fs);
    out.push_back(std::move(s[0]));
  }
  return out;
}

GridSearchResult grid_search_train(const std::vector<dsp::TriModalSample>& data,
                                   const TrainConfig& base,
                                   const nn::ModelShapes& shapes,
                                   const latent::InterferenceOperator& op) {
  const double grid[3] = {0.1, 0.5, 1.0};
  GridSearchResult result;
  double best = std::numeric_limits<double>::infinity();
  for (double l1 : grid) {
    for (double l2 : grid) {
      for (double l3 : grid) {
        TrainConfig cfg = base;
        cfg.lambda1 = l1;
        cfg.lambda2 = l2;
        cfg.lambda3 = l3;
        TrainResult r = train(data, cfg, shapes, op);
        const double score = r.best_val_parts.unit_sum();
        if (score < best) {
          best = score;
          result.best = std::move(r);
          result.best_lambda1 = l1;
          result.best_lambda2 = l2;
          result.best_lambda3 = l3;
          result.best_val = score;
        }
      }
    }
  }
  return result;
}

}  // namespace qcfd::train
