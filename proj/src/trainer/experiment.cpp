#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "domino/trainer.hpp"

namespace domino::trainer {

namespace fs = std::filesystem;

// ---- datasets ----

std::string DatasetSpec::key() const {
  std::ostringstream os;
  os << kind << '|' << path.string() << '|' << n << '|' << holdout << '|' << classes << '|' << seed;
  return os.str();
}

fs::path resolve_data_path(const fs::path& p) {
  if (p.is_absolute() || p.empty()) return p;
  if (const char* root = std::getenv("DOMINO_DATA_DIR"); root && *root) return fs::path(root) / p;
  return p;
}

namespace {

constexpr std::uint64_t kHoldoutStream = 0x401d;

data::LabeledImageSet load_mnist_split(const fs::path& dir, const char* prefix, std::int64_t limit) {
  return data::load_idx(dir / (std::string(prefix) + "-images-idx3-ubyte"),
                        dir / (std::string(prefix) + "-labels-idx1-ubyte"), limit);
}

}  // namespace

data::PairedSplits load_dataset(const DatasetSpec& spec) {
  if (spec.kind == "synth" || spec.kind == "synth_two_view") {
    if (spec.n < spec.classes || spec.holdout < spec.classes) {
      throw std::invalid_argument("dataset: n and holdout must be >= classes for synthetic data");
    }
    auto make = spec.kind == "synth" ? data::synth_multimodal : data::synth_two_view;
    return {make(spec.n, spec.classes, spec.seed), make(spec.holdout, spec.classes, mix_seed(spec.seed, kHoldoutStream))};
  }
  const auto dir = resolve_data_path(spec.path);
  if (spec.kind == "dir") return data::load_splits(dir);
  if (spec.kind == "two_view") {
    const auto train = load_mnist_split(dir, "train", spec.n);
    const auto test = load_mnist_split(dir, "t10k", spec.holdout);
    return {data::make_two_view(train, spec.seed), data::make_two_view(test, mix_seed(spec.seed, kHoldoutStream))};
  }
  if (spec.kind == "two_domain") {
    const auto mnist_train = load_mnist_split(dir, "train", spec.n);
    const auto mnist_test = load_mnist_split(dir, "t10k", spec.holdout);
    const auto svhn_train = data::load_image_set(dir / "svhn_train.ndck", "svhn");
    const auto svhn_test = data::load_image_set(dir / "svhn_test.ndck", "svhn");
    return {data::pair_two_domain(mnist_train, svhn_train, spec.seed),
            data::pair_two_domain(mnist_test, svhn_test, mix_seed(spec.seed, kHoldoutStream))};
  }
  throw std::invalid_argument("unknown dataset kind '" + spec.kind +
                              "' (expected synth, synth_two_view, two_view, two_domain or dir)");
}

// ---- manifest ----

void Manifest::validate() const {
  if (cells.empty()) throw std::invalid_argument("manifest has no cells");
  std::set<std::string> names;
  for (const auto& c : cells) {
    if (c.name.empty()) throw std::invalid_argument("manifest cell without a name");
    if (c.name.find_first_of("/\\,") != std::string::npos) {
      throw std::invalid_argument("cell name '" + c.name + "' may not contain '/', '\\' or ','");
    }
    if (!names.insert(c.name).second) throw std::invalid_argument("duplicate cell name '" + c.name + "'");
    if (c.seeds.empty()) throw std::invalid_argument("cell '" + c.name + "' has no seeds");
    c.config.validate();
  }
}

// ---- aggregation ----

namespace {

std::string fmt(double x) {
  if (!std::isfinite(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct RunDir {
  std::string cell;
  std::uint64_t seed;
  fs::path dir;
};

// Run directories sorted by (cell, numeric seed) so aggregates do not depend
// on directory iteration order.
std::vector<RunDir> find_runs(const fs::path& root) {
  std::vector<RunDir> runs;
  if (!fs::is_directory(root)) return runs;
  for (const auto& cell : fs::directory_iterator(root)) {
    if (!cell.is_directory()) continue;
    for (const auto& run : fs::directory_iterator(cell.path())) {
      const auto name = run.path().filename().string();
      if (!run.is_directory() || name.rfind("seed_", 0) != 0) continue;
      try {
        runs.push_back({cell.path().filename().string(), std::stoull(name.substr(5)), run.path()});
      } catch (const std::exception&) {
      }
    }
  }
  std::sort(runs.begin(), runs.end(),
            [](const RunDir& a, const RunDir& b) { return std::tie(a.cell, a.seed) < std::tie(b.cell, b.seed); });
  return runs;
}

struct Stats {
  double mean = 0.0, sd = 0.0;
  std::size_t n = 0;
};

Stats stats(const std::vector<double>& xs) {
  Stats s;
  s.n = xs.size();
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

}  // namespace

void aggregate_results(const fs::path& dir) {
  const auto runs = find_runs(dir);

  auto acc_all = open_out(dir / "accuracy.csv");
  acc_all << "model,seed,modality,split,acc\n";
  std::vector<std::string> order;
  std::map<std::tuple<std::string, int, std::string>, std::vector<double>> groups;
  for (const auto& r : runs) {
    std::ifstream in(r.dir / "accuracy.csv");
    if (!in) continue;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto f = split_csv(line);
      if (f.size() != 4) continue;
      acc_all << r.cell << ',' << r.seed << ',' << f[1] << ',' << f[2] << ',' << f[3] << '\n';
      const auto key = std::make_tuple(r.cell, std::stoi(f[1]), f[2]);
      groups[key].push_back(std::stod(f[3]));
      if (std::find(order.begin(), order.end(), r.cell) == order.end()) order.push_back(r.cell);
    }
  }
  auto acc_sum = open_out(dir / "accuracy_summary.csv");
  acc_sum << "model,modality,split,mean,sd,n\n";
  for (const auto& [key, xs] : groups) {
    const auto s = stats(xs);
    acc_sum << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ',' << fmt(s.mean) << ','
            << fmt(s.sd) << ',' << s.n << '\n';
  }

  static const char* kMeasures[] = {"cca", "svcca", "pwcca_ij", "pwcca_ji", "cka"};
  auto measures = [](const sim::SimilarityValues& v) {
    return std::array<double, 5>{v.cca, v.svcca, v.pwcca_ij, v.pwcca_ji, v.cka};
  };
  auto sim_all = open_out(dir / "similarity.csv");
  sim_all << "model,seed";
  for (const char* split : {"train", "holdout"})
    for (const char* m : kMeasures) sim_all << ',' << split << '_' << m;
  sim_all << ",degenerate\n";
  std::map<std::pair<std::string, std::string>, std::array<std::vector<double>, 5>> sim_groups;
  for (const auto& r : runs) {
    const auto path = r.dir / "similarity.json";
    if (!fs::exists(path)) continue;
    const auto rep = sim::read_similarity_json(path);
    sim_all << r.cell << ',' << r.seed;
    for (const auto* v : {&rep.train, &rep.holdout}) {
      const auto xs = measures(*v);
      for (double x : xs) sim_all << ',' << fmt(x);
      auto& g = sim_groups[{r.cell, v == &rep.train ? "train" : "holdout"}];
      for (std::size_t k = 0; k < 5; ++k) g[k].push_back(xs[k]);
    }
    sim_all << ',' << ((rep.train.degenerate || rep.holdout.degenerate) ? 1 : 0) << '\n';
  }
  auto sim_sum = open_out(dir / "similarity_summary.csv");
  sim_sum << "model,split";
  for (const char* m : kMeasures) sim_sum << ',' << m << "_mean," << m << "_sd";
  sim_sum << ",n\n";
  for (const auto& [key, cols] : sim_groups) {
    sim_sum << key.first << ',' << key.second;
    for (const auto& xs : cols) {
      const auto s = stats(xs);
      sim_sum << ',' << fmt(s.mean) << ',' << fmt(s.sd);
    }
    sim_sum << ',' << cols[0].size() << '\n';
  }
}

// ---- running ----

namespace {

RunOutcome run_one(const ExperimentCell& cell, std::uint64_t seed, const data::PairedSplits& splits,
                   const fs::path& out_dir) {
  RunOutcome out;
  out.cell = cell.name;
  out.seed = seed;
  out.dir = out_dir / cell.name / ("seed_" + std::to_string(seed));
  try {
    auto cfg = cell.config;
    cfg.name = cell.name;
    cfg.seed = seed;
    const auto trained = pretrain(cfg, splits.train, out.dir);
    if (trained.aborted) throw std::runtime_error("training aborted: " + trained.abort_reason);

    const auto ck = nd::Checkpoint::load(trained.final_checkpoint);
    const auto probe = probe_config_for(cfg);
    auto acc = open_out(out.dir / "accuracy.csv");
    acc << "model,modality,split,acc\n";
    for (int m = 0; m < 2; ++m) {
      const auto r = linear_eval(ck, m, splits, probe);
      out.accuracy.push_back(r.test_acc);
      acc << cell.name << ',' << m << ",holdout," << fmt(r.test_acc) << '\n';
    }
    acc.close();

    out.similarity = similarity_report(ck, splits, {}, cell.name, cfg.epochs);
    sim::write_similarity_json(out.similarity, out.dir / "similarity.json");
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace

ExperimentSummary run_experiment(const Manifest& manifest, int jobs,
                                 const std::function<void(const std::string&)>& log) {
  manifest.validate();
  fs::create_directories(manifest.out_dir);
  std::mutex log_mutex;
  auto say = [&](const std::string& msg) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    log(msg);
  };

  // Load each distinct dataset once; runs only read it.
  std::map<std::string, std::shared_ptr<const data::PairedSplits>> datasets;
  std::map<std::string, std::string> dataset_errors;
  for (const auto& cell : manifest.cells) {
    const auto key = cell.config.dataset.key();
    if (datasets.count(key) || dataset_errors.count(key)) continue;
    try {
      datasets[key] = std::make_shared<const data::PairedSplits>(load_dataset(cell.config.dataset));
    } catch (const std::exception& e) {
      dataset_errors[key] = e.what();
    }
  }

  std::vector<std::pair<std::size_t, std::uint64_t>> tasks;
  for (std::size_t c = 0; c < manifest.cells.size(); ++c)
    for (auto s : manifest.cells[c].seeds) tasks.emplace_back(c, s);

  ExperimentSummary summary;
  summary.runs.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t; (t = next++) < tasks.size();) {
      const auto& cell = manifest.cells[tasks[t].first];
      const auto seed = tasks[t].second;
      const auto key = cell.config.dataset.key();
      say("run " + cell.name + " seed " + std::to_string(seed));
      if (auto err = dataset_errors.find(key); err != dataset_errors.end()) {
        auto& r = summary.runs[t];
        r.cell = cell.name;
        r.seed = seed;
        r.error = "dataset: " + err->second;
      } else {
        summary.runs[t] = run_one(cell, seed, *datasets.at(key), manifest.out_dir);
      }
      const auto& r = summary.runs[t];
      say(r.ok ? "done " + cell.name + " seed " + std::to_string(seed) + ": acc " + fmt(r.accuracy[0]) + " / " +
                     fmt(r.accuracy[1])
               : "FAILED " + cell.name + " seed " + std::to_string(seed) + ": " + r.error);
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::clamp<int>(jobs, 1, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < n_threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  auto failures = open_out(manifest.out_dir / "failures.csv");
  failures << "model,seed,error\n";
  for (const auto& r : summary.runs) {
    if (r.ok) continue;
    auto msg = r.error;
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::replace(msg.begin(), msg.end(), ',', ';');
    failures << r.cell << ',' << r.seed << ',' << msg << '\n';
    summary.failures.push_back(r.cell + " seed " + std::to_string(r.seed) + ": " + r.error);
  }
  failures.close();
  aggregate_results(manifest.out_dir);
  return summary;
}

}  // namespace domino::trainer
