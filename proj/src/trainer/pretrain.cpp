#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "domino/trainer.hpp"

namespace domino::trainer {

objectives::PairGraph TrainConfig::graph() const {
  // A single entry without ':' names a paper model, e.g. "CR-XX-CC".
  if (edges.size() == 1 && edges.front().find(':') == std::string::npos) {
    auto g = objectives::PairGraph::named(edges.front());
    std::vector<std::string> labels = g.labels();
    return objectives::PairGraph::parse(labels, weights);
  }
  return objectives::PairGraph::parse(edges, weights);
}

void TrainConfig::validate() const {
  if (batch < 2) throw std::invalid_argument("batch must be >= 2 (InfoNCE needs negatives), got " + std::to_string(batch));
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1, got " + std::to_string(epochs));
  if (eval_epochs < 1) throw std::invalid_argument("eval_epochs must be >= 1, got " + std::to_string(eval_epochs));
  if (!(schedule.lr > 0.0) || !(schedule.max_lr > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (base_channels < 1 || latent_dim < 1 || embed_dim < 1) throw std::invalid_argument("model widths must be positive");
  loss.critic.validate();
  const auto g = graph();
  if (g.edges().empty()) throw std::invalid_argument("config has no edges");
}

// ---- checkpoint metadata ----

namespace {

void put_values(nd::Checkpoint& ck, const std::string& name, std::vector<double> values) {
  const auto n = static_cast<std::int64_t>(values.size());
  ck.put("config/" + name, Array<double>({n}, std::move(values)));
}

std::vector<double> get_values(const nd::Checkpoint& ck, const std::string& name, std::size_t expected) {
  const auto key = "config/" + name;
  if (!ck.contains(key)) throw nd::FormatError("checkpoint lacks " + key);
  auto a = ck.get<double>(key);
  if (static_cast<std::size_t>(a.size()) != expected) throw nd::FormatError("checkpoint entry " + key + " has wrong size");
  auto v = a.values();
  return {v.begin(), v.end()};
}

}  // namespace

void store_model_config(nd::Checkpoint& ck, const model::ModelConfig& cfg, Precision precision) {
  auto d = [](auto x) { return static_cast<double>(x); };
  put_values(ck, "in_channels", {d(cfg.in_channels[0]), d(cfg.in_channels[1])});
  put_values(ck, "base_channels", {d(cfg.base_channels)});
  put_values(ck, "latent_dim", {d(cfg.latent_dim)});
  put_values(ck, "embed_dim", {d(cfg.embed_dim)});
  put_values(ck, "decoders", {d(cfg.decoders[0]), d(cfg.decoders[1])});
  put_values(ck, "classifier_classes", {d(cfg.classifier_classes[0]), d(cfg.classifier_classes[1])});
  // Split so that 64-bit seeds survive the trip through doubles.
  put_values(ck, "seed", {d(cfg.seed >> 32), d(cfg.seed & 0xffffffffULL)});
  put_values(ck, "precision", {precision == Precision::f32 ? 32.0 : 64.0});
}

model::ModelConfig load_model_config(const nd::Checkpoint& ck) {
  model::ModelConfig cfg;
  auto i64 = [](double x) { return static_cast<std::int64_t>(x); };
  const auto in = get_values(ck, "in_channels", 2);
  cfg.in_channels = {i64(in[0]), i64(in[1])};
  cfg.base_channels = i64(get_values(ck, "base_channels", 1)[0]);
  cfg.latent_dim = i64(get_values(ck, "latent_dim", 1)[0]);
  cfg.embed_dim = i64(get_values(ck, "embed_dim", 1)[0]);
  const auto dec = get_values(ck, "decoders", 2);
  cfg.decoders = {dec[0] != 0.0, dec[1] != 0.0};
  const auto cls = get_values(ck, "classifier_classes", 2);
  cfg.classifier_classes = {static_cast<int>(cls[0]), static_cast<int>(cls[1])};
  const auto seed = get_values(ck, "seed", 2);
  cfg.seed = (static_cast<std::uint64_t>(seed[0]) << 32) | static_cast<std::uint64_t>(seed[1]);
  return cfg;
}

Precision checkpoint_precision(const nd::Checkpoint& ck) {
  return get_values(ck, "precision", 1)[0] == 64.0 ? Precision::f64 : Precision::f32;
}

model::ModelConfig model_config_for(const TrainConfig& cfg, const data::PairedSet& train) {
  const auto graph = cfg.graph();
  model::ModelConfig m;
  m.in_channels = {train.view1.channels(), train.view2.channels()};
  m.base_channels = cfg.base_channels;
  m.latent_dim = cfg.latent_dim;
  m.embed_dim = cfg.embed_dim;
  for (int k = 0; k < 2; ++k) {
    m.decoders[k] = graph.needs_decoder(k);
    m.classifier_classes[k] = graph.needs_classifier(k) ? train.modality(k).num_classes : 0;
  }
  m.seed = mix_seed(cfg.seed, 1);
  return m;
}

// ---- training loop ----

namespace {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

template <typename T>
nd::Checkpoint snapshot(const model::MultimodalModel<T>& model, Precision precision) {
  auto ck = model.to_checkpoint();
  store_model_config(ck, model.config(), precision);
  return ck;
}

template <typename T>
PretrainResult pretrain_impl(const TrainConfig& cfg, const data::PairedSet& train, const std::filesystem::path& out_dir) {
  cfg.validate();
  train.validate();
  const auto graph = cfg.graph();
  const auto mcfg = model_config_for(cfg, train);
  graph.validate({2, mcfg.decoders, !train.view1.labels.empty()});
  if (train.size() < 2) throw std::invalid_argument("pretrain: need at least 2 training pairs");

  model::MultimodalModel<T> model(mcfg);
  std::vector<Array<T>> params;
  for (const auto& p : model.parameters()) params.push_back(p.value);
  auto opt = make_optimizer<T>(params, cfg.radam);
  auto loss_cfg = cfg.loss;
  loss_cfg.critic.d = cfg.embed_dim;

  const data::EpochSampler sampler(train.size(), cfg.batch, mix_seed(cfg.seed, 2));
  std::optional<data::TwoDomainPairer> pairer;
  if (train.kind == data::PairKind::two_domain) pairer.emplace(train.view1, train.view2, mix_seed(cfg.seed, 3));
  const auto total_steps = cfg.epochs * sampler.batches_per_epoch();

  std::filesystem::create_directories(out_dir);
  PretrainResult result;
  result.final_checkpoint = out_dir / "final.ndck";
  result.best_checkpoint = out_dir / "best.ndck";
  result.losses_csv = out_dir / "losses.csv";

  std::filesystem::remove(result.best_checkpoint);
  std::ofstream csv(result.losses_csv, std::ios::binary | std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + result.losses_csv.string());
  csv << "epoch,edge,value,lr\n";

  auto last_good = snapshot(model, cfg.precision);
  double best = std::numeric_limits<double>::infinity();
  std::int64_t step = 0;

  for (std::int64_t e = 0; e < cfg.epochs && !result.aborted; ++e) {
    std::vector<data::MultimodalBatch> batches;
    if (pairer) {
      batches = pairer->batches(e, cfg.batch);
    } else {
      for (const auto& idx : sampler.epoch(e)) batches.push_back(data::gather(train, idx));
    }

    EpochLog log;
    log.epoch = e;
    std::vector<double> sums(graph.edges().size(), 0.0);
    double total_sum = 0.0;
    for (const auto& batch : batches) {
      Tape<T> tape;
      const auto out = objectives::total_loss(tape, graph, batch, model, loss_cfg, /*training=*/true);
      const double total = static_cast<double>(out.total.item());
      if (!std::isfinite(total)) {
        result.aborted = true;
        result.abort_reason = "nonfinite total loss at epoch " + std::to_string(e) + ", step " + std::to_string(step);
        break;
      }
      tape.backward(out.total);
      log.lr = onecycle_lr(step, total_steps, cfg.schedule);
      if (!radam_step(opt, std::span<const Array<T>>(params), log.lr)) ++result.skipped_steps;
      for (auto& p : params) p.zero_grad();
      ++step;
      total_sum += total;
      for (std::size_t k = 0; k < sums.size(); ++k) sums[k] += out.terms[k].second;
    }
    if (result.aborted) break;

    const double count = static_cast<double>(batches.size());
    log.total = total_sum / count;
    for (std::size_t k = 0; k < sums.size(); ++k) log.terms.emplace_back(graph.edges()[k].label(), sums[k] / count);
    for (const auto& [label, value] : log.terms) {
      csv << e << ',' << label << ',' << format_double(value) << ',' << format_double(log.lr) << '\n';
    }
    csv << e << ",total," << format_double(log.total) << ',' << format_double(log.lr) << '\n';
    csv.flush();
    result.epochs.push_back(log);

    last_good = snapshot(model, cfg.precision);
    if (log.total < best) {
      best = log.total;
      last_good.save(result.best_checkpoint);
    }
  }

  result.steps = step;
  last_good.save(result.final_checkpoint);
  if (!std::filesystem::exists(result.best_checkpoint)) last_good.save(result.best_checkpoint);
  return result;
}

}  // namespace

PretrainResult pretrain(const TrainConfig& cfg, const data::PairedSet& train, const std::filesystem::path& out_dir) {
  return cfg.precision == Precision::f32 ? pretrain_impl<float>(cfg, train, out_dir)
                                         : pretrain_impl<double>(cfg, train, out_dir);
}

}  // namespace domino::trainer
