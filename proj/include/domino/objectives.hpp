#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "domino/datasets.hpp"
#include "domino/model.hpp"
#include "domino/ndgrad/grad_check.hpp"
#include "domino/ndgrad/ops.hpp"

namespace domino::objectives {

using nd::Array;
using nd::Tape;

struct CriticConfig {
  std::int64_t d = 64;
  double clip = 20.0;
  double penalty = 4e-2;

  void validate() const;
};

// ---- critic and InfoNCE ----

template <typename T>
struct CriticScores {
  Array<T> raw;      // <u, v> / sqrt(d)
  Array<T> clipped;  // clip * tanh(raw / clip)
};

/// Separable critic over all pairs of rows: U (N,d), V (M,d) -> (N,M).
template <typename T>
CriticScores<T> critic_scores(Tape<T>& tape, const Array<T>& u, const Array<T>& v, const CriticConfig& cfg);

/// InfoNCE over stacked square score blocks raw (G,N,N) whose diagonals are
/// the positives. Per row: -(s_ll - log(sum_{k!=l} exp s_lk + exp(-clip)))
/// on clipped scores, averaged over G*N rows, plus penalty * mean(raw^2).
template <typename T>
Array<T> infonce_from_raw(Tape<T>& tape, const Array<T>& raw, const CriticConfig& cfg);

/// Average of infonce_from_raw over raw and its per-block transpose, i.e.
/// contrasting in both directions.
template <typename T>
Array<T> symmetric_infonce_from_raw(Tape<T>& tape, const Array<T>& raw, const CriticConfig& cfg);

/// One-directional InfoNCE: row l of U and V form the positive pair.
/// Requires N >= 2.
template <typename T>
Array<T> infonce(Tape<T>& tape, const Array<T>& u, const Array<T>& v, const CriticConfig& cfg);

/// Negative mean canonical correlation of two batches (n,d_i), (n,d_j) with
/// ridge eps on both covariances, with its exact gradient.
template <typename T>
Array<T> soft_cca_loss(Tape<T>& tape, const Array<T>& zi, const Array<T>& zj, double eps);

// ---- pair graph ----

enum class EdgeKind { CR, XX, CC, RR, AE, CCA, SUP };

std::string_view edge_kind_name(EdgeKind kind);

struct Edge {
  EdgeKind kind = EdgeKind::CR;
  int i = 0;
  int j = -1;  // second modality for XX/CC/RR/CCA
  double weight = 1.0;

  bool is_pair() const;
  /// Canonical config syntax: "CR:0", "XX:0-1", ...
  std::string label() const;
};

/// Parses "KIND:i" or "KIND:i-j"; the error message contains the offending
/// string.
Edge parse_edge(std::string_view text);

struct GraphRequirements {
  int num_modalities = 2;
  std::array<bool, 2> decoders{false, false};
  bool labels = false;
};

class PairGraph {
 public:
  PairGraph() = default;
  explicit PairGraph(std::vector<Edge> edges);

  /// Edge strings plus optional per-edge weights keyed by label or by kind
  /// name ("RR" applies to every RR edge).
  static PairGraph parse(std::span<const std::string> edges, const std::map<std::string, double>& weights = {});

  /// Taxonomy names joined by '-': CR, XX, CC, RR, AE, CCA, SUP, plus
  /// "Supervised" and "DCCAE". E.g. "CR-XX-CC", "RR-AE", "CR-CCA".
  static PairGraph named(std::string_view name);

  const std::vector<Edge>& edges() const { return edges_; }
  std::vector<std::string> labels() const;

  /// Throws std::invalid_argument on duplicates, unknown modalities, i == j
  /// for pair edges, an empty graph, AE without a decoder or SUP without
  /// labels.
  void validate(const GraphRequirements& req) const;

  bool needs_decoder(int m) const;
  bool needs_classifier(int m) const;
  bool uses_conv_embeddings(int m) const;
  bool uses_modality(int m) const;

 private:
  std::vector<Edge> edges_;
};

// ---- losses ----

struct LossConfig {
  CriticConfig critic;
  double cca_eps = 1e-3;
};

/// Per-modality state for one batch: inputs, encoder outputs and the shared
/// conv embeddings (computed once per modality, whatever edges touch it).
template <typename T>
struct ModalityState {
  Array<T> x;
  model::EncoderOutputs<T> outputs;
  Array<T> conv_embeddings;  // (L, B, d) per location, or undefined
};

template <typename T>
struct EdgeContext {
  const model::MultimodalModel<T>& model;
  std::array<std::optional<ModalityState<T>>, 2> modalities;
  std::vector<int> labels;
  bool training = true;
};

/// Encodes every modality the graph touches and projects conv features for
/// modalities with CR/XX/CC edges.
template <typename T>
EdgeContext<T> prepare(Tape<T>& tape, const PairGraph& graph, const data::MultimodalBatch& batch,
                       const model::MultimodalModel<T>& model, bool training);

/// Conv embeddings (B,d,H,W) -> (H*W, B, d), one block per location.
template <typename T>
Array<T> locations_first(Tape<T>& tape, const Array<T>& embeddings);

/// Unweighted loss of one edge.
template <typename T>
Array<T> edge_loss(Tape<T>& tape, const Edge& edge, EdgeContext<T>& ctx, const LossConfig& cfg);

template <typename T>
struct LossBreakdown {
  Array<T> total;
  std::vector<std::pair<std::string, double>> terms;  // unweighted, graph order
};

template <typename T>
LossBreakdown<T> total_loss(Tape<T>& tape, const PairGraph& graph, const data::MultimodalBatch& batch,
                            const model::MultimodalModel<T>& model, const LossConfig& cfg, bool training = true);

/// Finite-difference check of one edge kind on a small random 64-bit model,
/// w.r.t. the encoder outputs (c, z) the edge reads; conv features pass
/// through the projection heads, AE through the decoder.
nd::GradCheckResult check_edge_gradient(EdgeKind kind, std::uint64_t seed, double eps = 1e-5);

}  // namespace domino::objectives
