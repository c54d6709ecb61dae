#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "domino/datasets.hpp"
#include "domino/model.hpp"
#include "domino/ndgrad/checkpoint.hpp"
#include "domino/objectives.hpp"
#include "domino/simsuite.hpp"

namespace domino::trainer {

using nd::Array;
using nd::Tape;

enum class Precision { f32, f64 };

std::string_view precision_name(Precision p);
Precision parse_precision(std::string_view name);

// ---- optimizer ----

struct RAdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Adaptive step only once the rectification length exceeds this.
  double rho_threshold = 4.0;
};

template <typename T>
struct OptimizerState {
  RAdamConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::int64_t skipped = 0;  // steps dropped for nonfinite gradients
};

template <typename T>
OptimizerState<T> make_optimizer(std::span<const Array<T>> params, const RAdamConfig& config = {});

/// Rectification length rho_t of RAdam at step t >= 1.
double radam_rho(std::int64_t t, double beta2);

/// One RAdam update from the parameters' gradient buffers. Parameters
/// without a gradient are left alone. Returns false (and counts the skip)
/// when any gradient is nonfinite; nothing is modified then.
template <typename T>
bool radam_step(OptimizerState<T>& state, std::span<const Array<T>> params, double lr);

struct ScheduleConfig {
  double lr = 4e-4;
  double max_lr = 0.01;
  double warmup_fraction = 0.3;
  double final_div = 1e4;
};

/// One-cycle schedule: cosine ramp lr -> max_lr over the first
/// warmup_fraction of steps, then cosine anneal to lr / final_div.
double onecycle_lr(std::int64_t step, std::int64_t total_steps, const ScheduleConfig& cfg = {});

// ---- configuration ----

/// Where a run's paired data comes from. Relative paths resolve against
/// $DOMINO_DATA_DIR.
struct DatasetSpec {
  /// synth | synth_two_view | two_view | two_domain | dir
  std::string kind = "synth";
  std::filesystem::path path;
  std::int64_t n = 2000;
  std::int64_t holdout = 500;
  int classes = 10;
  std::uint64_t seed = 0;

  /// Stable identity used to share loaded data between runs.
  std::string key() const;
};

std::filesystem::path resolve_data_path(const std::filesystem::path& p);

/// Builds or loads train/holdout splits.
data::PairedSplits load_dataset(const DatasetSpec& spec);

struct TrainConfig {
  std::string name = "run";
  DatasetSpec dataset;
  std::vector<std::string> edges{"RR:0-1"};
  std::map<std::string, double> weights;
  ScheduleConfig schedule;
  RAdamConfig radam;
  std::int64_t batch = 64;
  std::int64_t epochs = 50;
  std::int64_t eval_epochs = 50;
  std::uint64_t seed = 0;
  Precision precision = Precision::f32;
  std::int64_t base_channels = 64;
  std::int64_t latent_dim = 64;
  std::int64_t embed_dim = 64;
  objectives::LossConfig loss;

  objectives::PairGraph graph() const;
  /// Throws std::invalid_argument for batch < 2, epochs < 1 or a bad graph.
  void validate() const;
};

// ---- checkpoints ----

/// Model config and precision travel inside the checkpoint under "config/".
void store_model_config(nd::Checkpoint& ck, const model::ModelConfig& cfg, Precision precision);
model::ModelConfig load_model_config(const nd::Checkpoint& ck);
Precision checkpoint_precision(const nd::Checkpoint& ck);

model::ModelConfig model_config_for(const TrainConfig& cfg, const data::PairedSet& train);

// ---- pretraining ----

struct EpochLog {
  std::int64_t epoch = 0;
  double total = 0.0;
  std::vector<std::pair<std::string, double>> terms;
  double lr = 0.0;
};

struct PretrainResult {
  std::filesystem::path final_checkpoint;
  std::filesystem::path best_checkpoint;
  std::filesystem::path losses_csv;
  std::vector<EpochLog> epochs;
  std::int64_t steps = 0;
  std::int64_t skipped_steps = 0;
  bool aborted = false;
  std::string abort_reason;
};

/// Trains every encoder touched by the graph. Writes final.ndck, best.ndck
/// and losses.csv (epoch, edge, value, lr) under `out_dir`. A nonfinite
/// total loss stops training and leaves the last good parameters in
/// final.ndck.
PretrainResult pretrain(const TrainConfig& cfg, const data::PairedSet& train, const std::filesystem::path& out_dir);

// ---- linear evaluation ----

struct ProbeConfig {
  std::int64_t epochs = 50;
  std::int64_t batch = 64;
  ScheduleConfig schedule;
  RAdamConfig radam;
  std::uint64_t seed = 0;
};

ProbeConfig probe_config_for(const TrainConfig& cfg);

struct ProbeResult {
  double train_acc = 0.0;
  double test_acc = 0.0;
  std::int64_t steps = 0;
};

/// Linear softmax classifier on fixed features (rows are samples).
ProbeResult linear_probe(const sim::Matrix& train_z, std::span<const int> train_y, const sim::Matrix& test_z,
                         std::span<const int> test_y, int num_classes, const ProbeConfig& cfg);

/// Frozen eval-mode latents of one modality, probed on train, scored on
/// holdout. The model is not modified.
template <typename T>
ProbeResult linear_eval(const model::MultimodalModel<T>& model, int modality, const data::PairedSplits& splits,
                        const ProbeConfig& cfg);

ProbeResult linear_eval(const nd::Checkpoint& ck, int modality, const data::PairedSplits& splits,
                        const ProbeConfig& cfg);

template <typename T>
sim::SimilarityReport similarity_report(const model::MultimodalModel<T>& model, const data::PairedSplits& splits,
                                        const sim::SimilarityOptions& opts, std::string name, std::int64_t epoch);

sim::SimilarityReport similarity_report(const nd::Checkpoint& ck, const data::PairedSplits& splits,
                                        const sim::SimilarityOptions& opts, std::string name, std::int64_t epoch);

// ---- experiments ----

struct ExperimentCell {
  std::string name;
  TrainConfig config;
  std::vector<std::uint64_t> seeds{0};
};

struct Manifest {
  std::vector<ExperimentCell> cells;
  std::filesystem::path out_dir = "runs";
  std::string preset;

  /// Throws std::invalid_argument on duplicate cell names or empty seeds.
  void validate() const;
};

struct RunOutcome {
  std::string cell;
  std::uint64_t seed = 0;
  std::filesystem::path dir;
  bool ok = false;
  std::string error;
  std::vector<double> accuracy;  // holdout accuracy per modality
  sim::SimilarityReport similarity;
};

struct ExperimentSummary {
  std::vector<RunOutcome> runs;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

/// Every (cell, seed): pretrain, linear eval per modality, similarity.
/// Writes <out>/<cell>/seed_<s>/{final,best}.ndck, losses.csv, accuracy.csv,
/// similarity.json, then aggregated accuracy.csv, accuracy_summary.csv and
/// similarity.csv under <out>. Failed runs are recorded and skipped.
ExperimentSummary run_experiment(const Manifest& manifest, int jobs = 1,
                                 const std::function<void(const std::string&)>& log = {});

/// Rewrites the aggregated CSVs from per-run files found under `dir`.
void aggregate_results(const std::filesystem::path& dir);

}  // namespace domino::trainer
