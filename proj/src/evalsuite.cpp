#include "qcfd/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "qcfd/autodiff.hpp"
#include "qcfd/errors.hpp"
#include "qcfd/rng.hpp"

namespace qcfd::eval {

namespace {

MatX modality_batch(const std::vector<dsp::TriModalSample>& samples,
                    const std::vector<int>& idx, int modality) {
  const auto first = info::modality_features(samples[idx[0]]);
  MatX out(first[modality].size(), idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    out.col(static_cast<long>(j)) = info::modality_features(samples[idx[j]])[modality];
  }
  return out;
}

}  // namespace

ReferenceModels train_reference_models(
    const std::vector<dsp::TriModalSample>& real, const nn::ModelShapes& shapes,
    std::uint64_t seed, const nn::AdamConfig& opt, int epochs, int batch) {
  if (static_cast<int>(real.size()) < 2) {
    throw ParamError("train_reference_models: need data");
  }
  std::set<int> labels;
  for (const auto& s : real) labels.insert(s.label);
  if (static_cast<int>(labels.size()) != shapes.n_classes) {
    throw ParamError("train_reference_models: class count mismatch");
  }
  std::vector<int> ordered(labels.begin(), labels.end());

  ReferenceModels m;
  m.shapes = shapes;
  m.seed = seed;
  {
    Rng rng(derive_seed(seed, "reference-init"));
    m.enc_t = nn::make_dense({shapes.t_dim, shapes.enc_hidden, shapes.enc_dim},
                             {nn::Act::Tanh, nn::Act::Tanh}, rng);
    m.enc_f = nn::make_dense({shapes.f_dim, shapes.enc_hidden, shapes.enc_dim},
                             {nn::Act::Tanh, nn::Act::Tanh}, rng);
    m.enc_s = nn::make_dense({shapes.s_dim(), shapes.enc_hidden, shapes.enc_dim},
                             {nn::Act::Tanh, nn::Act::Tanh}, rng);
    m.classifier = nn::make_dense({shapes.embed_dim(), shapes.n_classes},
                                  {nn::Act::Identity}, rng);
  }

  std::vector<MatX*> params;
  for (nn::DenseNet* net : {&m.enc_t, &m.enc_f, &m.enc_s, &m.classifier}) {
    for (MatX* p : nn::trainable_params(*net)) params.push_back(p);
  }
  nn::AdamState adam;

  std::vector<int> order(real.size());
  for (std::size_t i = 0; i < real.size(); ++i) order[i] = static_cast<int>(i);
  Rng shuffle_rng(derive_seed(seed, "reference-shuffle"));

  for (int epoch = 0; epoch < epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      std::vector<int> idx(order.begin() + start, order.begin() + stop);
      const long n = static_cast<long>(idx.size());

      ad::Tape tape;
      std::vector<int> param_nodes;
      const int bt = tape.leaf(modality_batch(real, idx, 0));
      const int bf = tape.leaf(modality_batch(real, idx, 1));
      const int bs = tape.leaf(modality_batch(real, idx, 2));
      const int et = nn::dense_graph(tape, m.enc_t, bt, &param_nodes).out;
      const int ef = nn::dense_graph(tape, m.enc_f, bf, &param_nodes).out;
      const int es = nn::dense_graph(tape, m.enc_s, bs, &param_nodes).out;
      const int embed = tape.vconcat({et, ef, es});
      const int logits = nn::dense_graph(tape, m.classifier, embed, &param_nodes).out;

      MatX onehot = MatX::Zero(shapes.n_classes, n);
      for (long j = 0; j < n; ++j) {
        const int cls = static_cast<int>(
            std::lower_bound(ordered.begin(), ordered.end(), real[idx[j]].label) -
            ordered.begin());
        onehot(cls, j) = 1.0;
      }
      // Cross entropy: mean_j [log sum_c exp(l_cj) - l_{y_j, j}].
      const int ones_c = tape.ones(1, shapes.n_classes);
      const int lse = tape.log(tape.matmul(ones_c, tape.exp(logits)));
      const int picked = tape.matmul(ones_c, tape.cwise_mul(logits, tape.leaf(onehot)));
      const int loss = tape.mean_all(tape.sub(lse, picked));

      if (!std::isfinite(tape.scalar_value(loss))) {
        throw NumericError("train_reference_models: non-finite loss");
      }
      tape.backward(loss);
      std::vector<MatX> grads;
      grads.reserve(param_nodes.size());
      for (int pid : param_nodes) grads.push_back(tape.grad(pid));
      nn::adam_step(params, grads, adam, opt);
    }
  }
  return m;
}

VecX embed_sample(const ReferenceModels& models, const dsp::TriModalSample& s) {
  const auto feats = info::modality_features(s);
  VecX out(models.shapes.embed_dim());
  out.segment(0, models.shapes.enc_dim) = models.enc_t.forward(feats[0]);
  out.segment(models.shapes.enc_dim, models.shapes.enc_dim) = models.enc_f.forward(feats[1]);
  out.segment(2 * models.shapes.enc_dim, models.shapes.enc_dim) = models.enc_s.forward(feats[2]);
  return out;
}

MatX embed_all(const ReferenceModels& models,
               const std::vector<dsp::TriModalSample>& samples) {
  MatX out(samples.size(), models.shapes.embed_dim());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.row(static_cast<long>(i)) = embed_sample(models, samples[i]);
  }
  return out;
}

VecX predict_proba(const ReferenceModels& models, const dsp::TriModalSample& s) {
  const VecX logits = models.classifier.forward(embed_sample(models, s));
  const double m = logits.maxCoeff();
  VecX p = (logits.array() - m).exp();
  return p / p.sum();
}

double classifier_accuracy(const ReferenceModels& models,
                           const std::vector<dsp::TriModalSample>& samples) {
  if (samples.empty()) throw ParamError("classifier_accuracy: empty set");
  std::set<int> labels;
  for (const auto& s : samples) labels.insert(s.label);
  std::vector<int> ordered(labels.begin(), labels.end());
  int hits = 0;
  for (const auto& s : samples) {
    const VecX p = predict_proba(models, s);
    int arg = 0;
    p.maxCoeff(&arg);
    const int cls = static_cast<int>(
        std::lower_bound(ordered.begin(), ordered.end(), s.label) - ordered.begin());
    hits += (arg == cls) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

double embedding_variance(const MatX& embeddings) {
  const long n = embeddings.rows();
  if (n < 2) throw ParamError("embedding_variance: need >= 2 samples");
  const Eigen::RowVectorXd mean = embeddings.colwise().mean();
  const MatX centered = embeddings.rowwise() - mean;
  return centered.array().square().sum() /
         static_cast<double>(n * embeddings.cols());
}

namespace {

VecX mean_proba(const ReferenceModels& models,
                const std::vector<dsp::TriModalSample>& set) {
  VecX acc = VecX::Zero(models.shapes.n_classes);
  for (const auto& s : set) acc += predict_proba(models, s);
  return acc / static_cast<double>(set.size());
}

VecX floor_normalize(VecX p) {
  for (int i = 0; i < p.size(); ++i) p[i] = std::max(p[i], 1e-9);
  return p / p.sum();
}

}  // namespace

double plausibility_gap(const ReferenceModels& models,
                        const std::vector<dsp::TriModalSample>& real,
                        const std::vector<dsp::TriModalSample>& gen) {
  if (real.empty() || gen.empty()) throw ParamError("plausibility_gap: empty set");
  const VecX p = floor_normalize(mean_proba(models, real));
  const VecX q = floor_normalize(mean_proba(models, gen));
  double kl = 0.0;
  for (int i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
  return std::max(kl, 0.0);
}

MorphologyStats morphology_stats(const dsp::TimeDomainSignal& t, int window, int k) {
  if (t.samples.size() == 0) throw ParamError("morphology_stats: empty signal");
  MorphologyStats m;
  m.p2p = t.samples.maxCoeff() - t.samples.minCoeff();
  m.rms = std::sqrt(t.samples.array().square().mean());

  const VecX power = dsp::power_spectrum(t, window, k);
  const double total = power.sum();
  if (total > 0.0) {
    double h = 0.0;
    for (int i = 0; i < power.size(); ++i) {
      const double q = power[i] / total;
      if (q > 0.0) h -= q * std::log(q);
    }
    m.spectral_entropy = h / std::log(static_cast<double>(k));
  }
  return m;
}

double rms_energy_error(const std::vector<dsp::TriModalSample>& real,
                        const std::vector<dsp::TriModalSample>& gen) {
  if (real.empty() || gen.empty()) throw ParamError("rms_energy_error: empty set");
  auto mean_rms = [](const std::vector<dsp::TriModalSample>& set) {
    double acc = 0.0;
    for (const auto& s : set) acc += std::sqrt(s.t.samples.array().square().mean());
    return acc / static_cast<double>(set.size());
  };
  const double r = mean_rms(real);
  if (r == 0.0) throw ParamError("rms_energy_error: zero real reference energy");
  return 100.0 * std::abs(mean_rms(gen) - r) / r;
}

std::vector<NormalizedScores> normalized_scores(
    const std::vector<ModelRawMetrics>& rows, double sigma2_real) {
  if (rows.empty()) throw ParamError("normalized_scores: no model rows");
  const ModelRawMetrics& base = rows.front();

  auto ratio_zero_base = [](double num, double den, const char* what) {
    if (num == 0.0) return 0.0;
    if (den == 0.0) throw ParamError(std::string("normalized_scores: degenerate baseline for ") + what);
    return num / den;
  };
  auto ratio_one_base = [](double num, double den, const char* what) {
    if (num == den) return 1.0;
    if (den == 0.0) throw ParamError(std::string("normalized_scores: degenerate baseline for ") + what);
    return num / den;
  };

  std::vector<NormalizedScores> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    NormalizedScores s;
    s.r_sigma = ratio_zero_base(r.sigma2 - sigma2_real, base.sigma2 - sigma2_real, "r_sigma");
    s.rho_delta = ratio_zero_base(base.delta - r.delta, base.delta, "rho_delta");
    s.gamma = ratio_one_base(r.c_ratio, base.c_ratio, "gamma");
    s.kappa = ratio_one_base(r.e_rms, base.e_rms, "kappa");
    out.push_back(s);
  }
  return out;
}

EvalReport evaluate(
    const ReferenceModels& models, const std::vector<dsp::TriModalSample>& real,
    const std::vector<std::pair<std::string, std::vector<dsp::TriModalSample>>>& synth_sets,
    const info::BinningSpec& spec, const EvalOptions& opts) {
  if (real.empty()) throw ParamError("evaluate: empty real set");
  if (synth_sets.empty()) throw ParamError("evaluate: need at least one synthetic set (baseline)");
  for (const auto& [name, set] : synth_sets) {
    if (set.empty()) throw ParamError("evaluate: empty synthetic set '" + name + "'");
  }

  const std::vector<dsp::TriModalSample> ref = data::canonical_order(real);

  EvalReport report;
  if (opts.sigma2_on_test_split) {
    const data::SplitIndices split = data::split_dataset(ref, opts.split_seed);
    std::vector<dsp::TriModalSample> test;
    for (int i : split.test) test.push_back(ref[i]);
    report.sigma2_real = embedding_variance(embed_all(models, test));
  } else {
    report.sigma2_real = embedding_variance(embed_all(models, ref));
  }
  report.c_real = info::cfd_stats(ref, spec).c_tfs;
  if (report.c_real == 0.0) {
    throw ParamError("evaluate: real complementarity is zero; ratios undefined");
  }
  report.real_morph.reserve(ref.size());
  for (const auto& s : ref) {
    report.real_morph.push_back(morphology_stats(s.t, opts.morph_window, opts.morph_k));
  }

  std::vector<ModelRawMetrics> raw_rows;
  for (const auto& [name, synth_raw] : synth_sets) {
    const std::vector<dsp::TriModalSample> synth = data::canonical_order(synth_raw);
    SetReport set;
    set.name = name;
    set.raw.name = name;
    set.raw.sigma2 = embedding_variance(embed_all(models, synth));
    set.raw.delta = plausibility_gap(models, ref, synth);
    set.c_hat = info::cfd_stats(synth, spec).c_tfs;
    set.raw.c_ratio = set.c_hat / report.c_real;
    set.raw.e_rms = rms_energy_error(ref, synth);
    set.morph.reserve(synth.size());
    for (const auto& s : synth) {
      set.morph.push_back(morphology_stats(s.t, opts.morph_window, opts.morph_k));
    }
    raw_rows.push_back(set.raw);
    report.sets.push_back(std::move(set));
  }

  const auto scores = normalized_scores(raw_rows, report.sigma2_real);
  for (std::size_t i = 0; i < scores.size(); ++i) report.sets[i].scores = scores[i];
  return report;
}

}  // namespace qcfd::eval
