#include <cmath>
#include <stdexcept>

#include "domino/objectives.hpp"

namespace domino::objectives {

namespace {

template <typename T>
const ModalityState<T>& state(const EdgeContext<T>& ctx, int m, const Edge& edge) {
  if (m < 0 || m > 1 || !ctx.modalities[m]) {
    throw std::invalid_argument("edge " + edge.label() + ": modality " + std::to_string(m) + " was not prepared");
  }
  return *ctx.modalities[m];
}

template <typename T>
const Array<T>& conv_embeddings(const EdgeContext<T>& ctx, int m, const Edge& edge) {
  const auto& s = state(ctx, m, edge);
  if (!s.conv_embeddings.defined()) {
    throw std::invalid_argument("edge " + edge.label() + ": conv embeddings of modality " + std::to_string(m) +
                                " were not computed");
  }
  return s.conv_embeddings;
}

void check_dim(std::int64_t got, const CriticConfig& critic, const Edge& edge) {
  if (got != critic.d) {
    throw nd::ShapeError("edge " + edge.label() + ": embedding dim " + std::to_string(got) +
                         " does not match critic d=" + std::to_string(critic.d));
  }
}

// (L,B,d) locations against (B,d) representations -> raw scores (L,B,B).
template <typename T>
Array<T> location_scores(Tape<T>& tape, const Array<T>& locations, const Array<T>& z, const Edge& edge,
                         const CriticConfig& critic) {
  const auto l = locations.dim(0), b = locations.dim(1), d = locations.dim(2);
  check_dim(d, critic, edge);
  check_dim(z.dim(1), critic, edge);
  if (z.dim(0) != b) throw nd::ShapeError("edge " + edge.label() + ": batch sizes differ");
  const auto flat = nd::reshape(tape, locations, {l * b, d});
  const auto scores = nd::matmul(tape, flat, z, /*transpose_b=*/true);
  return nd::reshape(tape, nd::affine(tape, scores, 1.0 / std::sqrt(static_cast<double>(d))), {l, b, b});
}

}  // namespace

template <typename T>
Array<T> locations_first(Tape<T>& tape, const Array<T>& embeddings) {
  if (embeddings.rank() != 4) {
    throw nd::ShapeError("locations_first: expected (B,d,H,W), got " + nd::to_string(embeddings.shape()));
  }
  const auto b = embeddings.dim(0), d = embeddings.dim(1), hw = embeddings.dim(2) * embeddings.dim(3);
  return nd::permute(tape, nd::reshape(tape, embeddings, {b, d, hw}), {2, 0, 1});
}

template <typename T>
EdgeContext<T> prepare(Tape<T>& tape, const PairGraph& graph, const data::MultimodalBatch& batch,
                       const model::MultimodalModel<T>& model, bool training) {
  EdgeContext<T> ctx{model, {}, batch.labels, training};
  for (int m = 0; m < 2; ++m) {
    if (!graph.uses_modality(m)) continue;
    ModalityState<T> s;
    s.x = nd::cast<T>(batch.modality(m));
    s.outputs = model.encoder(m)(tape, s.x, training);
    if (graph.uses_conv_embeddings(m)) {
      s.conv_embeddings = locations_first(tape, model.heads(m).project_conv(tape, s.outputs.c, training));
    }
    ctx.modalities[m] = std::move(s);
  }
  return ctx;
}

template <typename T>
Array<T> edge_loss(Tape<T>& tape, const Edge& edge, EdgeContext<T>& ctx, const LossConfig& cfg) {
  const auto& critic = cfg.critic;
  switch (edge.kind) {
    case EdgeKind::CR: {
      const auto& s = state(ctx, edge.i, edge);
      const auto z = ctx.model.heads(edge.i).project_latent(tape, s.outputs.z);
      return symmetric_infonce_from_raw(tape, location_scores(tape, conv_embeddings(ctx, edge.i, edge), z, edge, critic),
                                        critic);
    }
    case EdgeKind::XX: {
      const auto& sj = state(ctx, edge.j, edge);
      const auto z = ctx.model.heads(edge.j).project_latent(tape, sj.outputs.z);
      return symmetric_infonce_from_raw(tape, location_scores(tape, conv_embeddings(ctx, edge.i, edge), z, edge, critic),
                                        critic);
    }
    case EdgeKind::CC: {
      const auto& ui = conv_embeddings(ctx, edge.i, edge);
      const auto& uj = conv_embeddings(ctx, edge.j, edge);
      check_dim(ui.dim(2), critic, edge);
      check_dim(uj.dim(2), critic, edge);
      const auto raw = nd::affine(tape, nd::bmm(tape, ui, uj, /*transpose_b=*/true),
                                  1.0 / std::sqrt(static_cast<double>(ui.dim(2))));
      return symmetric_infonce_from_raw(tape, raw, critic);
    }
    case EdgeKind::RR: {
      const auto zi = ctx.model.heads(edge.i).project_latent(tape, state(ctx, edge.i, edge).outputs.z);
      const auto zj = ctx.model.heads(edge.j).project_latent(tape, state(ctx, edge.j, edge).outputs.z);
      const auto scores = critic_scores(tape, zi, zj, critic);
      return symmetric_infonce_from_raw(tape, nd::reshape(tape, scores.raw, {1, zi.dim(0), zj.dim(0)}), critic);
    }
    case EdgeKind::AE: {
      const auto* decoder = ctx.model.decoder(edge.i);
      if (!decoder) throw std::invalid_argument("edge " + edge.label() + ": no decoder for this modality");
      const auto& s = state(ctx, edge.i, edge);
      return nd::mse(tape, (*decoder)(tape, s.outputs.z, ctx.training), s.x);
    }
    case EdgeKind::CCA:
      return soft_cca_loss(tape, state(ctx, edge.i, edge).outputs.z, state(ctx, edge.j, edge).outputs.z, cfg.cca_eps);
    case EdgeKind::SUP: {
      const auto* classifier = ctx.model.classifier(edge.i);
      if (!classifier) throw std::invalid_argument("edge " + edge.label() + ": no classifier for this modality");
      if (ctx.labels.empty()) throw std::invalid_argument("edge " + edge.label() + ": batch has no labels");
      return nd::softmax_xent(tape, (*classifier)(tape, state(ctx, edge.i, edge).outputs.z), ctx.labels);
    }
  }
  throw std::invalid_argument("edge_loss: unknown edge kind");
}

template <typename T>
LossBreakdown<T> total_loss(Tape<T>& tape, const PairGraph& graph, const data::MultimodalBatch& batch,
                            const model::MultimodalModel<T>& model, const LossConfig& cfg, bool training) {
  if (graph.edges().empty()) throw std::invalid_argument("total_loss: empty pair graph");
  auto ctx = prepare(tape, graph, batch, model, training);
  LossBreakdown<T> out;
  for (const auto& edge : graph.edges()) {
    const auto term = edge_loss(tape, edge, ctx, cfg);
    out.terms.emplace_back(edge.label(), static_cast<double>(term.item()));
    const auto weighted = edge.weight == 1.0 ? term : nd::affine(tape, term, edge.weight);
    out.total = out.total.defined() ? nd::add(tape, out.total, weighted) : weighted;
  }
  return out;
}

#define DOMINO_INSTANTIATE_EDGES(T)                                                                                \
  template Array<T> locations_first(Tape<T>&, const Array<T>&);                                                   \
  template EdgeContext<T> prepare(Tape<T>&, const PairGraph&, const data::MultimodalBatch&,                       \
                                  const model::MultimodalModel<T>&, bool);                                        \
  template Array<T> edge_loss(Tape<T>&, const Edge&, EdgeContext<T>&, const LossConfig&);                         \
  template LossBreakdown<T> total_loss(Tape<T>&, const PairGraph&, const data::MultimodalBatch&,                  \
                                       const model::MultimodalModel<T>&, const LossConfig&, bool);

DOMINO_INSTANTIATE_EDGES(float)
DOMINO_INSTANTIATE_EDGES(double)

#undef DOMINO_INSTANTIATE_EDGES

}  // namespace domino::objectives
