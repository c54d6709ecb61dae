#include <stdexcept>

#include "domino/trainer.hpp"

namespace domino::trainer {

ProbeConfig probe_config_for(const TrainConfig& cfg) {
  ProbeConfig p;
  p.epochs = cfg.eval_epochs;
  p.batch = cfg.batch;
  p.schedule = cfg.schedule;
  p.radam = cfg.radam;
  p.seed = mix_seed(cfg.seed, 4);
  return p;
}

namespace {

Array<double> rows(const sim::Matrix& z, std::span<const std::int64_t> idx) {
  const auto d = z.cols();
  std::vector<double> v(idx.size() * static_cast<std::size_t>(d));
  for (std::size_t k = 0; k < idx.size(); ++k)
    for (Eigen::Index c = 0; c < d; ++c) v[k * d + c] = z(idx[k], c);
  return Array<double>({static_cast<std::int64_t>(idx.size()), d}, std::move(v));
}

double accuracy(const model::Linear<double>& probe, const sim::Matrix& z, std::span<const int> y) {
  if (z.rows() == 0) return 0.0;
  Tape<double> tape;
  tape.set_recording(false);
  std::vector<std::int64_t> all(static_cast<std::size_t>(z.rows()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::int64_t>(i);
  const auto logits = probe(tape, rows(z, all));
  const auto k = logits.dim(1);
  auto v = logits.values();
  std::int64_t correct = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    std::int64_t best = 0;
    for (std::int64_t c = 1; c < k; ++c)
      if (v[i * k + c] > v[i * k + best]) best = c;
    if (best == y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(z.rows());
}

void check_modality(int modality) {
  if (modality != 0 && modality != 1) {
    throw std::invalid_argument("modality must be 0 or 1, got " + std::to_string(modality));
  }
}

}  // namespace

ProbeResult linear_probe(const sim::Matrix& train_z, std::span<const int> train_y, const sim::Matrix& test_z,
                         std::span<const int> test_y, int num_classes, const ProbeConfig& cfg) {
  if (train_z.rows() != static_cast<Eigen::Index>(train_y.size()) ||
      test_z.rows() != static_cast<Eigen::Index>(test_y.size())) {
    throw std::invalid_argument("linear_probe: feature rows and labels differ in count");
  }
  if (train_z.cols() != test_z.cols()) throw std::invalid_argument("linear_probe: train/test feature dims differ");
  if (num_classes < 2) throw std::invalid_argument("linear_probe: need at least 2 classes");
  if (cfg.epochs < 1 || cfg.batch < 1) throw std::invalid_argument("linear_probe: epochs and batch must be positive");

  Rng rng(mix_seed(cfg.seed, 7));
  model::Linear<double> probe(train_z.cols(), num_classes, rng);
  std::vector<Array<double>> params{probe.weight, probe.bias};
  auto opt = make_optimizer<double>(params, cfg.radam);

  const data::EpochSampler sampler(train_z.rows(), cfg.batch, mix_seed(cfg.seed, 8));
  const auto total_steps = cfg.epochs * sampler.batches_per_epoch();
  ProbeResult result;
  for (std::int64_t e = 0; e < cfg.epochs; ++e) {
    for (const auto& idx : sampler.epoch(e)) {
      std::vector<int> labels(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) labels[k] = train_y[idx[k]];
      Tape<double> tape;
      const auto loss = nd::softmax_xent(tape, probe(tape, rows(train_z, idx)), labels);
      tape.backward(loss);
      radam_step(opt, std::span<const Array<double>>(params), onecycle_lr(result.steps, total_steps, cfg.schedule));
      for (auto& p : params) p.zero_grad();
      ++result.steps;
    }
  }
  result.train_acc = accuracy(probe, train_z, train_y);
  result.test_acc = accuracy(probe, test_z, test_y);
  return result;
}

template <typename T>
ProbeResult linear_eval(const model::MultimodalModel<T>& model, int modality, const data::PairedSplits& splits,
                        const ProbeConfig& cfg) {
  check_modality(modality);
  const auto& encoder = model.encoder(modality);
  const auto& train = splits.train.modality(modality);
  const auto& test = splits.holdout.modality(modality);
  const auto ztrain = sim::collect_representations(encoder, train, modality, "train");
  const auto ztest = sim::collect_representations(encoder, test, modality, "holdout");
  return linear_probe(ztrain.z, train.labels, ztest.z, test.labels, train.num_classes, cfg);
}

template <typename T>
sim::SimilarityReport similarity_report(const model::MultimodalModel<T>& model, const data::PairedSplits& splits,
                                        const sim::SimilarityOptions& opts, std::string name, std::int64_t epoch) {
  sim::SimilarityReport report;
  report.model = std::move(name);
  report.epoch = epoch;
  report.variance_keep = opts.variance_keep;
  report.cca_eps = opts.cca.eps;
  auto values = [&](const data::PairedSet& set, const std::string& split) {
    const auto zi = sim::collect_representations(model.encoder(0), set.view1, 0, split);
    const auto zj = sim::collect_representations(model.encoder(1), set.view2, 1, split);
    return sim::similarity(zi.z, zj.z, opts);
  };
  report.train = values(splits.train, "train");
  report.holdout = values(splits.holdout, "holdout");
  return report;
}

namespace {

template <typename T>
model::MultimodalModel<T> restore_model(const nd::Checkpoint& ck) {
  model::MultimodalModel<T> model(load_model_config(ck));
  model.load_checkpoint(ck);
  return model;
}

}  // namespace

ProbeResult linear_eval(const nd::Checkpoint& ck, int modality, const data::PairedSplits& splits,
                        const ProbeConfig& cfg) {
  check_modality(modality);
  if (checkpoint_precision(ck) == Precision::f32) return linear_eval(restore_model<float>(ck), modality, splits, cfg);
  return linear_eval(restore_model<double>(ck), modality, splits, cfg);
}

sim::SimilarityReport similarity_report(const nd::Checkpoint& ck, const data::PairedSplits& splits,
                                        const sim::SimilarityOptions& opts, std::string name, std::int64_t epoch) {
  if (checkpoint_precision(ck) == Precision::f32) {
    return similarity_report(restore_model<float>(ck), splits, opts, std::move(name), epoch);
  }
  return similarity_report(restore_model<double>(ck), splits, opts, std::move(name), epoch);
}

template ProbeResult linear_eval(const model::MultimodalModel<float>&, int, const data::PairedSplits&,
                                 const ProbeConfig&);
template ProbeResult linear_eval(const model::MultimodalModel<double>&, int, const data::PairedSplits&,
                                 const ProbeConfig&);
template sim::SimilarityReport similarity_report(const model::MultimodalModel<float>&, const data::PairedSplits&,
                                                 const sim::SimilarityOptions&, std::string, std::int64_t);
template sim::SimilarityReport similarity_report(const model::MultimodalModel<double>&, const data::PairedSplits&,
                                                 const sim::SimilarityOptions&, std::string, std::int64_t);

}  // namespace domino::trainer
