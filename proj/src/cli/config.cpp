#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "domino/cli.hpp"

namespace domino::cli {

namespace {

using json = nlohmann::json;

// Encoder width used by the desk-scale presets; see README for timings.
constexpr std::int64_t kDeskBaseChannels = 16;

const std::set<std::string> kRunKeys = {"dataset", "edges", "weights", "lr",        "max_lr",
                                        "batch",   "epochs", "seed",   "precision", "preset"};
const std::set<std::string> kDatasetKeys = {"kind", "path", "n", "holdout", "classes", "seed"};
const std::set<std::string> kManifestKeys = {"cells", "out", "preset"};

[[noreturn]] void fail(std::string_view source, const std::string& msg) {
  throw ConfigError(std::string(source) + ": " + msg);
}

void check_keys(const json& obj, const std::set<std::string>& allowed, std::string_view source,
                const std::string& where) {
  if (!obj.is_object()) fail(source, where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) {
      std::string list;
      for (const auto& k : allowed) list += (list.empty() ? "" : ", ") + k;
      fail(source, "unknown key '" + key + "' in " + where + " (allowed: " + list + ")");
    }
  }
}

template <typename V>
V get(const json& obj, const char* key, std::string_view source) {
  try {
    return obj.at(key).get<V>();
  } catch (const json::exception&) {
    fail(source, "key '" + std::string(key) + "' has the wrong type");
  }
}

json parse_json(std::string_view text, std::string_view source) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) fail(source, "empty config");
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // what() carries line and column of the offending byte.
    fail(source, std::string("malformed JSON: ") + e.what());
  }
}

trainer::DatasetSpec parse_dataset(const json& j, trainer::DatasetSpec spec, std::string_view source) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "synth" || s == "synth_two_view") {
      spec.kind = s;
    } else {
      spec.kind = "dir";
      spec.path = s;
    }
    return spec;
  }
  check_keys(j, kDatasetKeys, source, "dataset");
  if (j.contains("kind")) spec.kind = get<std::string>(j, "kind", source);
  if (j.contains("path")) spec.path = get<std::string>(j, "path", source);
  if (j.contains("n")) spec.n = get<std::int64_t>(j, "n", source);
  if (j.contains("holdout")) spec.holdout = get<std::int64_t>(j, "holdout", source);
  if (j.contains("classes")) spec.classes = get<int>(j, "classes", source);
  if (j.contains("seed")) spec.seed = get<std::uint64_t>(j, "seed", source);
  static const std::set<std::string> kinds = {"synth", "synth_two_view", "two_view", "two_domain", "dir"};
  if (!kinds.count(spec.kind)) fail(source, "unknown dataset kind '" + spec.kind + "'");
  return spec;
}

// Applies run keys (all but "preset", which the caller resolved) onto cfg.
void apply_run_keys(const json& j, trainer::TrainConfig& cfg, std::string_view source) {
  if (j.contains("dataset")) cfg.dataset = parse_dataset(j["dataset"], cfg.dataset, source);
  if (j.contains("edges")) {
    const auto& e = j["edges"];
    if (e.is_string()) {
      cfg.edges = {e.get<std::string>()};
    } else if (e.is_array()) {
      cfg.edges.clear();
      for (const auto& item : e) {
        if (!item.is_string()) fail(source, "edges must be strings");
        cfg.edges.push_back(item.get<std::string>());
      }
    } else {
      fail(source, "edges must be a list of strings or an objective name");
    }
  }
  if (j.contains("weights")) {
    const auto& w = j["weights"];
    if (!w.is_object()) fail(source, "weights must be an object of numbers");
    cfg.weights.clear();
    for (const auto& [k, v] : w.items()) {
      if (!v.is_number()) fail(source, "weight '" + k + "' is not a number");
      cfg.weights[k] = v.get<double>();
    }
  }
  if (j.contains("lr")) cfg.schedule.lr = get<double>(j, "lr", source);
  if (j.contains("max_lr")) cfg.schedule.max_lr = get<double>(j, "max_lr", source);
  if (j.contains("batch")) cfg.batch = get<std::int64_t>(j, "batch", source);
  if (j.contains("epochs")) cfg.epochs = cfg.eval_epochs = get<std::int64_t>(j, "epochs", source);
  if (j.contains("seed")) cfg.seed = get<std::uint64_t>(j, "seed", source);
  if (j.contains("precision")) {
    try {
      cfg.precision = trainer::parse_precision(get<std::string>(j, "precision", source));
    } catch (const std::invalid_argument& e) {
      fail(source, e.what());
    }
  }
}

void validate_config(const trainer::TrainConfig& cfg, std::string_view source) {
  try {
    cfg.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    fail(source, e.what());
  }
}

trainer::TrainConfig base_for(const json& j, const std::string& inherited, std::string_view source) {
  std::string preset = inherited;
  if (j.contains("preset")) preset = get<std::string>(j, "preset", source);
  if (preset.empty()) return trainer::TrainConfig{};
  try {
    return preset_config(preset);
  } catch (const std::invalid_argument& e) {
    fail(source, e.what());
  }
}

}  // namespace

std::vector<std::string> preset_names() { return {"small", "desk", "paper"}; }

trainer::TrainConfig preset_config(std::string_view name) {
  trainer::TrainConfig cfg;
  if (name == "small") {
    cfg.dataset = {"synth", {}, 2000, 500, 10, 0};
    cfg.epochs = cfg.eval_epochs = 10;
    cfg.base_channels = kDeskBaseChannels;
  } else if (name == "desk") {
    cfg.dataset = {"synth_two_view", {}, 10000, 2000, 10, 0};
    cfg.epochs = cfg.eval_epochs = 10;
    cfg.base_channels = kDeskBaseChannels;
  } else if (name == "paper") {
    cfg.dataset = {"two_view", "mnist", 0, 0, 10, 0};
    cfg.epochs = cfg.eval_epochs = 50;
  } else {
    throw std::invalid_argument("unknown preset '" + std::string(name) + "' (expected small, desk or paper)");
  }
  cfg.batch = 64;
  return cfg;
}

trainer::TrainConfig parse_train_config(std::string_view text, std::string_view source) {
  const auto j = parse_json(text, source);
  check_keys(j, kRunKeys, source, "config");
  auto cfg = base_for(j, "", source);
  try {
    apply_run_keys(j, cfg, source);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    fail(source, e.what());
  }
  validate_config(cfg, source);
  return cfg;
}

trainer::Manifest parse_manifest(std::string_view text, std::string_view source) {
  const auto j = parse_json(text, source);
  check_keys(j, kManifestKeys, source, "manifest");
  trainer::Manifest m;
  if (j.contains("out")) m.out_dir = get<std::string>(j, "out", source);
  if (j.contains("preset")) m.preset = get<std::string>(j, "preset", source);
  if (!j.contains("cells") || !j["cells"].is_array()) fail(source, "manifest needs a 'cells' list");

  auto cell_keys = kRunKeys;
  cell_keys.erase("seed");
  cell_keys.insert({"name", "seeds"});
  for (std::size_t k = 0; k < j["cells"].size(); ++k) {
    const auto& c = j["cells"][k];
    const auto where = "cell " + std::to_string(k);
    check_keys(c, cell_keys, source, where);
    trainer::ExperimentCell cell;
    if (!c.contains("name")) fail(source, where + " has no name");
    cell.name = get<std::string>(c, "name", source);
    cell.config = base_for(c, m.preset, source);
    try {
      apply_run_keys(c, cell.config, source);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      fail(source, "cell '" + cell.name + "': " + e.what());
    }
    cell.config.name = cell.name;
    if (c.contains("seeds")) cell.seeds = get<std::vector<std::uint64_t>>(c, "seeds", source);
    m.cells.push_back(std::move(cell));
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    fail(source, e.what());
  }
  return m;
}

ParsedConfig parse_config_text(std::string_view text, std::string_view source) {
  const auto j = parse_json(text, source);
  if (j.is_object() && j.contains("cells")) return parse_manifest(text, source);
  return parse_train_config(text, source);
}

ParsedConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

}  // namespace domino::cli
