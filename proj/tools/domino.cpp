// domino: command-line entry point.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "domino/cli.hpp"
#include "domino/ndgrad/grad_check.hpp"
#include "domino/objectives.hpp"
#include "domino/trainer.hpp"

namespace fs = std::filesystem;
using namespace domino;

namespace {

trainer::DatasetSpec data_spec(const std::string& value, std::int64_t n, std::int64_t holdout, int classes,
                               std::uint64_t seed) {
  trainer::DatasetSpec spec;
  if (value == "synth" || value == "synth_two_view") {
    spec.kind = value;
  } else {
    spec.kind = "dir";
    spec.path = value;
  }
  spec.n = n;
  spec.holdout = holdout;
  spec.classes = classes;
  spec.seed = seed;
  return spec;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

int cmd_gen_data(const std::string& kind, const fs::path& out, std::uint64_t seed, std::int64_t n,
                 std::int64_t holdout, int classes, const std::string& source) {
  trainer::DatasetSpec spec;
  spec.kind = kind == "synth" ? "synth" : kind;
  spec.path = source;
  spec.n = kind == "two_view" || kind == "two_domain" ? n : std::max<std::int64_t>(n, classes);
  spec.holdout = holdout;
  spec.classes = classes;
  spec.seed = seed;
  const auto splits = trainer::load_dataset(spec);
  data::save_splits(splits, out);
  std::cout << "wrote " << splits.train.size() << " train and " << splits.holdout.size() << " holdout pairs ("
            << data::pair_kind_name(splits.train.kind) << ") to " << out.string() << "\n";
  return 0;
}

int cmd_pretrain(const fs::path& config, fs::path out) {
  const auto parsed = cli::parse_config(config);
  if (!std::holds_alternative<trainer::TrainConfig>(parsed)) {
    throw cli::ConfigError(config.string() + ": pretrain expects a run config, got a manifest (use 'run')");
  }
  const auto& cfg = std::get<trainer::TrainConfig>(parsed);
  if (out.empty()) out = fs::path("runs") / cfg.name / ("seed_" + std::to_string(cfg.seed));
  const auto splits = trainer::load_dataset(cfg.dataset);
  const auto result = trainer::pretrain(cfg, splits.train, out);
  for (const auto& e : result.epochs) std::cout << "epoch " << e.epoch << " loss " << fmt(e.total) << "\n";
  std::cout << "checkpoint " << result.final_checkpoint.string() << " (" << result.steps << " steps)\n";
  if (result.aborted) {
    std::cerr << "aborted: " << result.abort_reason << "\n";
    return 1;
  }
  return 0;
}

int cmd_eval(const fs::path& ckpt, int modality, const trainer::DatasetSpec& data, const trainer::ProbeConfig& probe,
             const fs::path& csv) {
  const auto ck = nd::Checkpoint::load(ckpt);
  const auto splits = trainer::load_dataset(data);
  const auto r = trainer::linear_eval(ck, modality, splits, probe);
  const auto model = ckpt.parent_path().filename().string();
  std::cout << "model,modality,split,acc\n";
  std::cout << model << ',' << modality << ",train," << fmt(r.train_acc) << "\n";
  std::cout << model << ',' << modality << ",holdout," << fmt(r.test_acc) << "\n";
  if (!csv.empty()) {
    const bool fresh = !fs::exists(csv);
    std::ofstream out(csv, std::ios::app);
    if (fresh) out << "model,modality,split,acc\n";
    out << model << ',' << modality << ",holdout," << fmt(r.test_acc) << "\n";
  }
  return 0;
}

int cmd_similarity(const fs::path& ckpt, const trainer::DatasetSpec& data, fs::path out, std::string name) {
  const auto ck = nd::Checkpoint::load(ckpt);
  const auto splits = trainer::load_dataset(data);
  if (name.empty()) name = ckpt.parent_path().filename().string();
  const auto report = trainer::similarity_report(ck, splits, {}, name, 0);
  if (out.empty()) out = ckpt.parent_path();
  fs::create_directories(out);
  sim::write_similarity_json(report, out / "similarity.json");
  std::ofstream csv(out / "similarity.csv", std::ios::binary | std::ios::trunc);
  csv << "model,split,cca,svcca,pwcca_ij,pwcca_ji,cka,degenerate\n";
  for (const auto& [split, v] : {std::pair{"train", report.train}, std::pair{"holdout", report.holdout}}) {
    csv << name << ',' << split << ',' << fmt(v.cca) << ',' << fmt(v.svcca) << ',' << fmt(v.pwcca_ij) << ','
        << fmt(v.pwcca_ji) << ',' << fmt(v.cka) << ',' << (v.degenerate ? 1 : 0) << "\n";
  }
  std::cout << sim::similarity_json(report);
  return 0;
}

int cmd_grad_check(const std::string& op, const std::string& edge, int seeds, double eps) {
  constexpr double kTolerance = 1e-4;
  bool ok = true;
  auto line = [&](const std::string& what, double worst) {
    const bool pass = worst < kTolerance;
    ok = ok && pass;
    std::cout << (pass ? "PASS " : "FAIL ") << what << " max_rel_error=" << fmt(worst) << "\n";
  };
  if (!op.empty()) {
    std::vector<nd::OpKind> kinds;
    if (op == "all") {
      kinds.assign(nd::all_op_kinds().begin(), nd::all_op_kinds().end());
    } else {
      kinds.push_back(nd::parse_op_kind(op));
    }
    for (auto k : kinds) {
      double worst = 0.0;
      for (int s = 0; s < seeds; ++s) worst = std::max(worst, nd::check_op_gradient(k, s, eps).max_rel_error);
      line("op " + std::string(nd::op_kind_name(k)), worst);
    }
  }
  if (!edge.empty()) {
    std::vector<objectives::EdgeKind> kinds;
    using objectives::EdgeKind;
    for (auto k : {EdgeKind::CR, EdgeKind::XX, EdgeKind::CC, EdgeKind::RR, EdgeKind::AE, EdgeKind::CCA, EdgeKind::SUP})
      if (edge == "all" || edge == objectives::edge_kind_name(k)) kinds.push_back(k);
    if (kinds.empty()) throw std::invalid_argument("unknown edge kind '" + edge + "'");
    for (auto k : kinds) {
      double worst = 0.0;
      for (int s = 0; s < seeds; ++s)
        worst = std::max(worst, objectives::check_edge_gradient(k, s, eps).max_rel_error);
      line("edge " + std::string(objectives::edge_kind_name(k)), worst);
    }
  }
  return ok ? 0 : 1;
}

int cmd_run(const fs::path& manifest_path, int jobs, const fs::path& out_override) {
  const auto parsed = cli::parse_config(manifest_path);
  trainer::Manifest manifest;
  if (std::holds_alternative<trainer::Manifest>(parsed)) {
    manifest = std::get<trainer::Manifest>(parsed);
  } else {
    // A single run config becomes a one-cell manifest.
    const auto& cfg = std::get<trainer::TrainConfig>(parsed);
    manifest.cells.push_back({cfg.name, cfg, {cfg.seed}});
  }
  if (!out_override.empty()) manifest.out_dir = out_override;
  const auto summary = trainer::run_experiment(manifest, jobs, [](const std::string& msg) { std::cerr << msg << "\n"; });
  const auto report = cli::emit_report(manifest.out_dir);
  std::cout << "report " << report.markdown.string() << "\n";
  for (const auto& f : summary.failures) std::cerr << "failed: " << f << "\n";
  return summary.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  domino::nd::keep_freed_memory();
  CLI::App app{"Multimodal contrastive objectives: data, training, linear evaluation and similarity analysis"};
  app.require_subcommand(1);

  // gen-data
  std::string kind = "synth", source = "mnist";
  fs::path gen_out;
  std::uint64_t gen_seed = 0;
  std::int64_t gen_n = 2000, gen_holdout = 500;
  int gen_classes = 10;
  auto* gen = app.add_subcommand("gen-data", "Generate or convert paired train/holdout splits");
  gen->add_option("--kind", kind, "Dataset kind")
      ->check(CLI::IsMember({"two_view", "two_domain", "synth", "synth_two_view"}));
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Seed");
  gen->add_option("--n", gen_n, "Training pairs (0 = all source images)");
  gen->add_option("--holdout", gen_holdout, "Holdout pairs");
  gen->add_option("--classes", gen_classes, "Classes for synthetic data");
  gen->add_option("--source", source, "IDX/NDCK source directory for two_view/two_domain ($DOMINO_DATA_DIR-relative)");

  // pretrain
  fs::path config, pre_out;
  auto* pre = app.add_subcommand("pretrain", "Pretrain encoders on a pair graph");
  pre->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  pre->add_option("--out", pre_out, "Output directory");

  // shared dataset options for eval / similarity
  std::string data = "synth";
  std::int64_t data_n = 2000, data_holdout = 500;
  int data_classes = 10;
  std::uint64_t data_seed = 0;
  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--data", data, "Splits directory, or synth / synth_two_view");
    sub->add_option("--n", data_n, "Training pairs for synthetic data");
    sub->add_option("--holdout", data_holdout, "Holdout pairs for synthetic data");
    sub->add_option("--classes", data_classes, "Classes for synthetic data");
    sub->add_option("--data-seed", data_seed, "Seed of synthetic data");
  };

  // eval
  fs::path ckpt, eval_csv;
  int modality = 0;
  trainer::ProbeConfig probe;
  auto* ev = app.add_subcommand("eval", "Linear evaluation of one modality's frozen encoder");
  ev->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--modality", modality, "Modality index (0 or 1)")->required();
  ev->add_option("--epochs", probe.epochs, "Probe epochs");
  ev->add_option("--batch", probe.batch, "Probe batch size");
  ev->add_option("--seed", probe.seed, "Probe seed");
  ev->add_option("--csv", eval_csv, "Append the holdout row to this CSV");
  add_data(ev);

  // similarity
  fs::path sim_out;
  std::string sim_name;
  auto* si = app.add_subcommand("similarity", "CCA/SVCCA/PWCCA/CKA between the two modalities' latents");
  si->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  si->add_option("--out", sim_out, "Output directory (default: checkpoint directory)");
  si->add_option("--name", sim_name, "Model name in the report");
  add_data(si);

  // report
  fs::path report_dir;
  auto* rep = app.add_subcommand("report", "Aggregate an experiment directory into report.md and CSVs");
  rep->add_option("--dir", report_dir, "Experiment directory")->required()->check(CLI::ExistingDirectory);

  // grad-check
  std::string gc_op, gc_edge;
  int gc_seeds = 20;
  double gc_eps = 1e-5;
  auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient checks (64-bit)");
  gc->add_option("--op", gc_op, "Op kind or 'all'");
  gc->add_option("--edge", gc_edge, "Edge kind or 'all'");
  gc->add_option("--seeds", gc_seeds, "Random seeds per case");
  gc->add_option("--eps", gc_eps, "Central-difference step");

  // run
  fs::path manifest, run_out;
  int jobs = 1;
  auto* run = app.add_subcommand("run", "Run a manifest: pretrain, evaluate, compare, report");
  run->add_option("--manifest,--config", manifest, "Manifest (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);
  run->add_option("--out", run_out, "Override the manifest's output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen_data(kind, gen_out, gen_seed, gen_n, gen_holdout, gen_classes, source);
    if (*pre) return cmd_pretrain(config, pre_out);
    if (*ev) {
      return cmd_eval(ckpt, modality, data_spec(data, data_n, data_holdout, data_classes, data_seed), probe, eval_csv);
    }
    if (*si) return cmd_similarity(ckpt, data_spec(data, data_n, data_holdout, data_classes, data_seed), sim_out, sim_name);
    if (*rep) {
      const auto r = cli::emit_report(report_dir);
      std::cout << "report " << r.markdown.string() << "\n";
      for (const auto& g : r.gaps) std::cerr << "gap: " << g << "\n";
      return 0;
    }
    if (*gc) {
      if (gc_op.empty() && gc_edge.empty()) gc_op = gc_edge = "all";
      return cmd_grad_check(gc_op, gc_edge, gc_seeds, gc_eps);
    }
    if (*run) return cmd_run(manifest, jobs, run_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
