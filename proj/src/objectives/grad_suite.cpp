#include <algorithm>
#include <initializer_list>
#include <string>

#include "domino/objectives.hpp"
#include "domino/rng.hpp"

namespace domino::objectives {

namespace {

constexpr std::int64_t kBatch = 16;  // > latent dim so soft-CCA covariances have full rank
constexpr std::int64_t kLatent = 8;
constexpr std::size_t kCoords = 192;

Array<double> random_array(nd::Shape shape, Rng& rng, bool unit_interval) {
  auto a = Array<double>::zeros(std::move(shape));
  for (auto& v : a.mutable_values()) v = unit_interval ? rng.uniform() : rng.normal();
  return a;
}

Edge canonical_edge(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::CR: return parse_edge("CR:0");
    case EdgeKind::XX: return parse_edge("XX:0-1");
    case EdgeKind::CC: return parse_edge("CC:0-1");
    case EdgeKind::RR: return parse_edge("RR:0-1");
    case EdgeKind::AE: return parse_edge("AE:0");
    case EdgeKind::CCA: return parse_edge("CCA:0-1");
    case EdgeKind::SUP: return parse_edge("SUP:0");
  }
  throw std::invalid_argument("check_edge_gradient: unknown edge kind");
}

}  // namespace

nd::GradCheckResult check_edge_gradient(EdgeKind kind, std::uint64_t seed, double eps) {
  model::ModelConfig mc;
  mc.base_channels = 2;
  mc.latent_dim = kLatent;
  mc.embed_dim = kLatent;
  mc.decoders = {true, true};
  mc.classifier_classes = {3, 3};
  mc.seed = mix_seed(seed, 11);
  const model::MultimodalModel<double> model(mc);

  Rng rng(mix_seed(seed, 12 + static_cast<std::uint64_t>(kind)));
  const auto channels = 2 * mc.base_channels;
  std::array<Array<double>, 2> x, c, z;
  for (int m = 0; m < 2; ++m) {
    x[m] = random_array({kBatch, 1, 32, 32}, rng, true);
    c[m] = random_array({kBatch, channels, 8, 8}, rng, false);
    z[m] = random_array({kBatch, kLatent}, rng, false);
  }
  std::vector<int> labels(kBatch);
  for (auto& l : labels) l = static_cast<int>(rng.below(3));

  const auto edge = canonical_edge(kind);
  const bool conv = kind == EdgeKind::CR || kind == EdgeKind::XX || kind == EdgeKind::CC;
  LossConfig cfg;
  cfg.critic.d = kLatent;

  // Perturbed arrays sit downstream of every ReLU in the heads and decoder:
  // a central difference through a kink is not a derivative, and with
  // batch-statistics BN one input coordinate moves every unit in the batch.
  // The a2 bias is cancelled exactly by the head's BN, so it is left out.
  const auto downstream = [](const auto& params, std::initializer_list<const char*> tags) {
    std::vector<Array<double>> out;
    for (const auto& p : params) {
      for (const char* t : tags) {
        if (p.name.find(t) != std::string::npos) out.push_back(p.value);
      }
    }
    return out;
  };
  const auto head = [&](int m) { return downstream(model.heads(m).parameters(), {"/conv_a2.weight", "/conv_b", "/bn"}); };
  std::vector<Array<double>> wrt;
  const auto append = [&wrt](std::vector<Array<double>> more) { wrt.insert(wrt.end(), more.begin(), more.end()); };
  switch (kind) {
    case EdgeKind::CR: append(head(0)); wrt.push_back(z[0]); break;
    case EdgeKind::XX: append(head(0)); wrt.push_back(z[1]); break;
    case EdgeKind::CC: append(head(0)); append(head(1)); break;
    case EdgeKind::RR:
    case EdgeKind::CCA: wrt = {z[0], z[1]}; break;
    case EdgeKind::AE: append(downstream(model.decoder(0)->parameters(), {"/up3"})); wrt.push_back(x[0]); break;
    case EdgeKind::SUP: wrt = {model.classifier(0)->weight, model.classifier(0)->bias, z[0]}; break;
  }
  const nd::ScalarGraph f = [&](Tape<double>& tape) {
    EdgeContext<double> ctx{model, {}, labels, true};
    for (int m = 0; m < 2; ++m) {
      ModalityState<double> s;
      s.x = x[m];
      s.outputs = {c[m], z[m]};
      if (conv) s.conv_embeddings = locations_first(tape, model.heads(m).project_conv(tape, c[m], true));
      ctx.modalities[m] = std::move(s);
    }
    return edge_loss(tape, edge, ctx, cfg);
  };

  const auto total = nd::grad_check(f, wrt, eps, kCoords);
  return total;
}

}  // namespace domino::objectives
