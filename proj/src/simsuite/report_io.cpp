#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "domino/simsuite.hpp"

namespace domino::sim {

namespace {

using json = nlohmann::ordered_json;

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double number_or_nan(const json& j, const char* key) {
  const auto& v = j.at(key);
  return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

json values_json(const SimilarityValues& v) {
  return json{{"cca", number(v.cca)},           {"svcca", number(v.svcca)}, {"pwcca_ij", number(v.pwcca_ij)},
              {"pwcca_ji", number(v.pwcca_ji)}, {"cka", number(v.cka)},     {"degenerate", v.degenerate}};
}

SimilarityValues values_from(const json& j) {
  SimilarityValues v;
  v.cca = number_or_nan(j, "cca");
  v.svcca = number_or_nan(j, "svcca");
  v.pwcca_ij = number_or_nan(j, "pwcca_ij");
  v.pwcca_ji = number_or_nan(j, "pwcca_ji");
  v.cka = number_or_nan(j, "cka");
  v.degenerate = j.value("degenerate", false);
  return v;
}

}  // namespace

std::string similarity_json(const SimilarityReport& r) {
  json j{{"model", r.model},
         {"epoch", r.epoch},
         {"centered", r.centered},
         {"variance_keep", r.variance_keep},
         {"cca_eps", r.cca_eps},
         {"train", values_json(r.train)},
         {"holdout", values_json(r.holdout)}};
  return j.dump(2) + "\n";
}

void write_similarity_json(const SimilarityReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << similarity_json(report);
}

SimilarityReport read_similarity_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    const auto j = json::parse(in);
    SimilarityReport r;
    r.model = j.at("model").get<std::string>();
    r.epoch = j.at("epoch").get<std::int64_t>();
    r.centered = j.value("centered", true);
    r.variance_keep = j.value("variance_keep", 0.99);
    r.cca_eps = j.value("cca_eps", 1e-3);
    r.train = values_from(j.at("train"));
    r.holdout = values_from(j.at("holdout"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace domino::sim
