#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <tuple>
#include <set>
#include <stdexcept>

#include "domino/objectives.hpp"

namespace domino::objectives {

namespace {

struct KindName {
  EdgeKind kind;
  std::string_view name;
};

constexpr KindName kKinds[] = {
    {EdgeKind::CR, "CR"}, {EdgeKind::XX, "XX"},   {EdgeKind::CC, "CC"},   {EdgeKind::RR, "RR"},
    {EdgeKind::AE, "AE"}, {EdgeKind::CCA, "CCA"}, {EdgeKind::SUP, "SUP"},
};

std::optional<EdgeKind> find_kind(std::string_view name) {
  for (const auto& k : kKinds)
    if (k.name == name) return k.kind;
  return std::nullopt;
}

bool pair_kind(EdgeKind kind) {
  return kind == EdgeKind::XX || kind == EdgeKind::CC || kind == EdgeKind::RR || kind == EdgeKind::CCA;
}

// Edges whose two endpoints play symmetric roles.
bool unordered(EdgeKind kind) { return kind == EdgeKind::CC || kind == EdgeKind::RR || kind == EdgeKind::CCA; }

int parse_index(std::string_view digits, std::string_view whole) {
  int value = -1;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (digits.empty() || ec != std::errc{} || ptr != digits.data() + digits.size() || value < 0) {
    throw std::invalid_argument("edge '" + std::string(whole) + "': bad modality index '" + std::string(digits) + "'");
  }
  return value;
}

}  // namespace

std::string_view edge_kind_name(EdgeKind kind) {
  for (const auto& k : kKinds)
    if (k.kind == kind) return k.name;
  return "?";
}

bool Edge::is_pair() const { return pair_kind(kind); }

std::string Edge::label() const {
  std::string out(edge_kind_name(kind));
  out += ':' + std::to_string(i);
  if (is_pair()) out += '-' + std::to_string(j);
  return out;
}

Edge parse_edge(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw std::invalid_argument("edge '" + std::string(text) + "': expected KIND:i or KIND:i-j");
  }
  const auto kind = find_kind(text.substr(0, colon));
  if (!kind) {
    throw std::invalid_argument("edge '" + std::string(text) + "': unknown kind '" +
                                std::string(text.substr(0, colon)) + "'");
  }
  Edge edge;
  edge.kind = *kind;
  const auto rest = text.substr(colon + 1);
  const auto dash = rest.find('-');
  if (pair_kind(*kind)) {
    if (dash == std::string_view::npos) {
      throw std::invalid_argument("edge '" + std::string(text) + "': " + std::string(edge_kind_name(*kind)) +
                                  " needs two modalities (i-j)");
    }
    edge.i = parse_index(rest.substr(0, dash), text);
    edge.j = parse_index(rest.substr(dash + 1), text);
    if (edge.i == edge.j) {
      throw std::invalid_argument("edge '" + std::string(text) + "': modalities must differ");
    }
  } else {
    if (dash != std::string_view::npos) {
      throw std::invalid_argument("edge '" + std::string(text) + "': " + std::string(edge_kind_name(*kind)) +
                                  " takes a single modality");
    }
    edge.i = parse_index(rest, text);
  }
  return edge;
}

PairGraph::PairGraph(std::vector<Edge> edges) : edges_(std::move(edges)) {}

PairGraph PairGraph::parse(std::span<const std::string> edges, const std::map<std::string, double>& weights) {
  std::vector<Edge> out;
  out.reserve(edges.size());
  for (const auto& text : edges) out.push_back(parse_edge(text));
  std::set<std::string> used;
  for (auto& e : out) {
    const auto label = e.label();
    const std::string kind(edge_kind_name(e.kind));
    if (auto it = weights.find(label); it != weights.end()) {
      e.weight = it->second;
      used.insert(label);
    } else if (auto kt = weights.find(kind); kt != weights.end()) {
      e.weight = kt->second;
      used.insert(kind);
    }
  }
  for (const auto& [key, w] : weights) {
    if (!used.count(key)) throw std::invalid_argument("weight '" + key + "' matches no edge");
    if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("weight '" + key + "' must be finite and >= 0");
  }
  return PairGraph(std::move(out));
}

PairGraph PairGraph::named(std::string_view name) {
  std::vector<std::string> edges;
  auto add = [&](std::initializer_list<const char*> list) {
    for (const char* e : list)
      if (std::find(edges.begin(), edges.end(), e) == edges.end()) edges.emplace_back(e);
  };
  std::size_t start = 0;
  while (start <= name.size()) {
    auto end = name.find('-', start);
    if (end == std::string_view::npos) end = name.size();
    const auto part = name.substr(start, end - start);
    if (part == "CR") add({"CR:0", "CR:1"});
    else if (part == "XX") add({"XX:0-1", "XX:1-0"});
    else if (part == "CC") add({"CC:0-1"});
    else if (part == "RR") add({"RR:0-1"});
    else if (part == "AE") add({"AE:0", "AE:1"});
    else if (part == "CCA") add({"CCA:0-1"});
    else if (part == "SUP" || part == "Supervised") add({"SUP:0", "SUP:1"});
    else if (part == "DCCAE") add({"CCA:0-1", "AE:0", "AE:1"});
    else throw std::invalid_argument("unknown objective '" + std::string(part) + "' in '" + std::string(name) + "'");
    start = end + 1;
  }
  return parse(edges);
}

std::vector<std::string> PairGraph::labels() const {
  std::vector<std::string> out;
  for (const auto& e : edges_) out.push_back(e.label());
  return out;
}

void PairGraph::validate(const GraphRequirements& req) const {
  if (edges_.empty()) throw std::invalid_argument("pair graph has no edges");
  std::set<std::tuple<EdgeKind, int, int>> seen;
  for (const auto& e : edges_) {
    const auto label = e.label();
    auto check = [&](int m) {
      if (m < 0 || m >= req.num_modalities) {
        throw std::invalid_argument("edge " + label + ": modality " + std::to_string(m) + " does not exist");
      }
    };
    check(e.i);
    if (e.is_pair()) {
      check(e.j);
      if (e.i == e.j) throw std::invalid_argument("edge " + label + ": modalities must differ");
    }
    int a = e.i, b = e.is_pair() ? e.j : -1;
    if (unordered(e.kind) && b < a) std::swap(a, b);
    if (!seen.insert({e.kind, a, b}).second) throw std::invalid_argument("duplicate edge " + label);
    if (e.kind == EdgeKind::AE && !req.decoders[e.i]) {
      throw std::invalid_argument("edge " + label + ": modality " + std::to_string(e.i) + " has no decoder");
    }
    if (e.kind == EdgeKind::SUP && !req.labels) throw std::invalid_argument("edge " + label + ": dataset has no labels");
  }
}

bool PairGraph::needs_decoder(int m) const {
  return std::any_of(edges_.begin(), edges_.end(), [m](const Edge& e) { return e.kind == EdgeKind::AE && e.i == m; });
}

bool PairGraph::needs_classifier(int m) const {
  return std::any_of(edges_.begin(), edges_.end(), [m](const Edge& e) { return e.kind == EdgeKind::SUP && e.i == m; });
}

bool PairGraph::uses_conv_embeddings(int m) const {
  return std::any_of(edges_.begin(), edges_.end(), [m](const Edge& e) {
    switch (e.kind) {
      case EdgeKind::CR:
      case EdgeKind::XX: return e.i == m;
      case EdgeKind::CC: return e.i == m || e.j == m;
      default: return false;
    }
  });
}

bool PairGraph::uses_modality(int m) const {
  return std::any_of(edges_.begin(), edges_.end(),
                     [m](const Edge& e) { return e.i == m || (e.is_pair() && e.j == m); });
}

}  // namespace domino::objectives
