#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "domino/cli.hpp"

namespace domino::cli {

namespace fs = std::filesystem;

std::string format_cell(double value, int digits) {
  if (!std::isfinite(value)) return "—";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

namespace {

using Row = std::map<std::string, std::string>;

std::vector<Row> read_csv(const fs::path& path) {
  std::vector<Row> rows;
  std::ifstream in(path);
  if (!in) return rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    for (std::string h; std::getline(ss, h, ',');) header.push_back(h);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    Row row;
    std::size_t k = 0;
    for (std::string cell; std::getline(ss, cell, ',') && k < header.size(); ++k) row[header[k]] = cell;
    rows.push_back(std::move(row));
  }
  return rows;
}

double number(const Row& row, const std::string& key) {
  const auto it = row.find(key);
  if (it == row.end() || it->second.empty() || it->second == "nan") return std::nan("");
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    return std::nan("");
  }
}

std::string field(const Row& row, const std::string& key) {
  const auto it = row.find(key);
  return it == row.end() ? std::string() : it->second;
}

std::vector<std::string> find_gaps(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> gaps;
  for (const auto& cell : fs::directory_iterator(dir)) {
    if (!cell.is_directory()) continue;
    for (const auto& run : fs::directory_iterator(cell.path())) {
      const auto name = run.path().filename().string();
      if (!run.is_directory() || name.rfind("seed_", 0) != 0) continue;
      const auto label = cell.path().filename().string() + "/" + name;
      for (const char* f : {"final.ndck", "losses.csv", "accuracy.csv", "similarity.json"}) {
        if (!fs::exists(run.path() / f)) gaps.emplace_back(label, std::string("missing ") + f);
      }
    }
  }
  std::sort(gaps.begin(), gaps.end());
  std::vector<std::string> out;
  for (const auto& [run, what] : gaps) out.push_back(run + ": " + what);
  for (const auto& r : read_csv(dir / "failures.csv")) {
    out.push_back(field(r, "model") + "/seed_" + field(r, "seed") + ": failed: " + field(r, "error"));
  }
  return out;
}

}  // namespace

ReportResult emit_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("report: " + dir.string() + " is not a directory");
  trainer::aggregate_results(dir);

  ReportResult result;
  result.markdown = dir / "report.md";
  result.gaps = find_gaps(dir);

  std::ostringstream md;
  md << "# Experiment report\n\n";
  md << "## Linear evaluation\n\n";
  md << "Top-1 accuracy of a linear probe on frozen latents, scored on the holdout split. "
        "Mean and sample standard deviation over seeds.\n\n";
  md << "| model | modality | split | mean | sd | seeds |\n";
  md << "|---|---|---|---|---|---|\n";
  const auto acc = read_csv(dir / "accuracy_summary.csv");
  for (const auto& r : acc) {
    const auto n = static_cast<int>(number(r, "n"));
    md << "| " << field(r, "model") << " | " << field(r, "modality") << " | " << field(r, "split") << " | "
       << format_cell(number(r, "mean")) << " | " << (n > 1 ? format_cell(number(r, "sd")) : "—") << " | " << n
       << " |\n";
  }
  if (acc.empty()) md << "| — | — | — | — | — | 0 |\n";

  static const char* kMeasures[] = {"cca", "svcca", "pwcca_ij", "pwcca_ji", "cka"};
  md << "\n## Representation similarity\n\n";
  md << "Similarity between the latents of modality 0 and modality 1 on the training and holdout splits, "
        "mean over seeds.\n\n";
  std::map<std::string, std::map<std::string, Row>> by_model;
  std::vector<std::string> order;
  for (const auto& r : read_csv(dir / "similarity_summary.csv")) {
    const auto model = field(r, "model");
    if (!by_model.count(model)) order.push_back(model);
    by_model[model][field(r, "split")] = r;
  }
  md << "| model |";
  for (const char* split : {"train", "holdout"})
    for (const char* m : kMeasures) md << ' ' << split << ' ' << m << " |";
  md << " seeds |\n|---|";
  for (int k = 0; k < 10; ++k) md << "---|";
  md << "---|\n";
  for (const auto& model : order) {
    md << "| " << model << " |";
    int n = 0;
    for (const char* split : {"train", "holdout"}) {
      const auto it = by_model[model].find(split);
      for (const char* m : kMeasures) {
        md << ' ' << (it == by_model[model].end() ? "—" : format_cell(number(it->second, std::string(m) + "_mean")))
           << " |";
      }
      if (it != by_model[model].end()) n = static_cast<int>(number(it->second, "n"));
    }
    md << ' ' << n << " |\n";
  }

  if (!result.gaps.empty()) {
    md << "\n## Gaps\n\n";
    for (const auto& g : result.gaps) md << "- " << g << "\n";
  }

  std::ofstream out(result.markdown, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + result.markdown.string());
  out << md.str();
  return result;
}

}  // namespace domino::cli
