#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "domino/trainer.hpp"

namespace domino::cli {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Named defaults: "small" (CI), "desk" (acceptance scale), "paper".
trainer::TrainConfig preset_config(std::string_view name);
std::vector<std::string> preset_names();

/// Run config keys: dataset, edges, weights, lr, max_lr, batch, epochs,
/// seed, precision, preset. Unknown keys are rejected. "epochs" sets both
/// pretraining and linear-evaluation epochs.
trainer::TrainConfig parse_train_config(std::string_view text, std::string_view source = "<config>");

/// Manifest keys: cells, out, preset. Cell keys: name, seeds and every run
/// key except seed.
trainer::Manifest parse_manifest(std::string_view text, std::string_view source = "<manifest>");

using ParsedConfig = std::variant<trainer::TrainConfig, trainer::Manifest>;

/// A document with "cells" is a manifest, anything else a run config.
ParsedConfig parse_config_text(std::string_view text, std::string_view source = "<config>");
ParsedConfig parse_config(const std::filesystem::path& path);

struct ReportResult {
  std::filesystem::path markdown;
  std::vector<std::string> gaps;  // missing or failed runs
};

/// Re-aggregates the run directories under `dir` and writes report.md next
/// to the aggregated CSVs. Output depends only on the run files.
ReportResult emit_report(const std::filesystem::path& dir);

/// "0.9731" or "—" when undefined.
std::string format_cell(double value, int digits = 4);

}  // namespace domino::cli
