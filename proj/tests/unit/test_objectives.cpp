#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "domino/objectives.hpp"
#include "domino/trainer.hpp"
#include "helpers.hpp"

using namespace domino;
using namespace domino::objectives;
using testutil::from;
using testutil::normal;

namespace {

CriticConfig plain(std::int64_t d, double penalty = 0.0) {
  CriticConfig cfg;
  cfg.d = d;
  cfg.penalty = penalty;
  return cfg;
}

// Direct loop evaluation of the one-directional bound.
double infonce_oracle(const Array<double>& u, const Array<double>& v, const CriticConfig& cfg) {
  const auto n = u.dim(0), d = u.dim(1);
  std::vector<double> raw(n * n);
  for (std::int64_t l = 0; l < n; ++l)
    for (std::int64_t k = 0; k < n; ++k) {
      double dot = 0.0;
      for (std::int64_t c = 0; c < d; ++c) dot += u.values()[l * d + c] * v.values()[k * d + c];
      raw[l * n + k] = dot / std::sqrt(static_cast<double>(d));
    }
  double loss = 0.0, sq = 0.0;
  for (std::int64_t l = 0; l < n; ++l) {
    double denom = std::exp(-cfg.clip);
    for (std::int64_t k = 0; k < n; ++k)
      if (k != l) denom += std::exp(cfg.clip * std::tanh(raw[l * n + k] / cfg.clip));
    loss -= cfg.clip * std::tanh(raw[l * n + l] / cfg.clip) - std::log(denom);
  }
  for (double r : raw) sq += r * r;
  return loss / static_cast<double>(n) + cfg.penalty * sq / static_cast<double>(raw.size());
}

Array<double> raw_block(std::int64_t n, double off, double diag) {
  auto a = Array<double>::full({1, n, n}, off);
  for (std::int64_t l = 0; l < n; ++l) a.mutable_values()[l * n + l] = diag;
  return a;
}

Array<double> unit_rows(std::int64_t n, std::int64_t d, Rng& rng) {
  auto a = normal<double>({n, d}, rng);
  auto v = a.mutable_values();
  for (std::int64_t r = 0; r < n; ++r) {
    double norm = 0.0;
    for (std::int64_t c = 0; c < d; ++c) norm += v[r * d + c] * v[r * d + c];
    for (std::int64_t c = 0; c < d; ++c) v[r * d + c] /= std::sqrt(norm);
  }
  return a;
}

Array<double> permute_rows(const Array<double>& a, const std::vector<std::int64_t>& perm) {
  const auto d = a.dim(1);
  std::vector<double> out(a.size());
  for (std::size_t r = 0; r < perm.size(); ++r)
    std::copy_n(a.values().begin() + perm[r] * d, d, out.begin() + static_cast<std::int64_t>(r) * d);
  return Array<double>(a.shape(), std::move(out));
}

model::ModelConfig tiny_model(std::uint64_t seed = 0) {
  model::ModelConfig cfg;
  cfg.base_channels = 4;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("critic scales dot products and clips with tanh") {
  Tape<double> tape;
  const auto e1 = from<double>({1, 4}, {1, 0, 0, 0});
  const auto s = critic_scores(tape, e1, e1, plain(4));
  CHECK(s.raw.item() == doctest::Approx(0.5).epsilon(1e-15));

  const auto u = from<double>({1, 1}, {30.0});
  const auto v = from<double>({1, 1}, {1.0});
  const auto big = critic_scores(tape, u, v, plain(1));
  CHECK(big.raw.item() == doctest::Approx(30.0));
  const double e3 = std::exp(3.0);
  CHECK(big.clipped.item() == doctest::Approx(20.0 * (e3 - 1.0) / (e3 + 1.0)).epsilon(1e-14));
  CHECK(big.clipped.item() == doctest::Approx(18.10297).epsilon(1e-6));

  Rng rng(3);
  const auto wild = critic_scores(tape, normal<double>({16, 4}, rng, 6.0), normal<double>({16, 4}, rng, 6.0),
                                  plain(4));
  for (double c : wild.clipped.values()) CHECK(std::abs(c) < 20.0);
}

TEST_CASE("critic rejects embedding width mismatches") {
  Tape<double> tape;
  const auto a = Array<double>::zeros({2, 4}), b = Array<double>::zeros({2, 5});
  CHECK_THROWS_AS(critic_scores(tape, a, b, plain(4)), nd::ShapeError);
  CHECK_THROWS_AS(critic_scores(tape, a, a, plain(64)), nd::ShapeError);
  CHECK_THROWS_AS(infonce(tape, a, a, plain(64)), nd::ShapeError);
}

TEST_CASE("critic config validation") {
  CHECK_NOTHROW(CriticConfig{}.validate());
  CriticConfig cfg;
  cfg.clip = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.penalty = -1e-3;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.d = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("infonce closed forms on constant scores") {
  Tape<double> tape;
  const double tail = std::exp(-20.0);
  CHECK(infonce_from_raw(tape, raw_block(2, 0.0, 0.0), plain(4)).item() ==
        doctest::Approx(std::log1p(tail)).epsilon(1e-6));
  CHECK(std::abs(infonce_from_raw(tape, raw_block(2, 0.0, 0.0), plain(4)).item() - 2.06e-9) < 1e-11);
  CHECK(infonce_from_raw(tape, raw_block(8, 0.0, 0.0), plain(4)).item() ==
        doctest::Approx(std::log(7.0 + tail)).epsilon(1e-12));
  CHECK(infonce_from_raw(tape, raw_block(2, 0.0, 1e9), plain(4)).item() ==
        doctest::Approx(-20.0 + std::log1p(tail)).epsilon(1e-12));
  const double base = infonce_from_raw(tape, raw_block(8, 0.0, 0.0), plain(4)).item();
  const double pen = infonce_from_raw(tape, raw_block(8, 1.0, 1.0), plain(4, 4e-2)).item();
  CHECK(pen - infonce_from_raw(tape, raw_block(8, 1.0, 1.0), plain(4)).item() == doctest::Approx(0.04));
  CHECK(std::abs(base - std::log(7.0 + tail)) < 1e-12);
}

TEST_CASE("infonce matches a loop oracle on random embeddings") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const auto u = normal<double>({6, 4}, rng, 3.0), v = normal<double>({6, 4}, rng, 3.0);
    Tape<double> tape;
    const auto cfg = plain(4, 4e-2);
    CHECK(infonce(tape, u, v, cfg).item() == doctest::Approx(infonce_oracle(u, v, cfg)).epsilon(1e-12));
  }
}

TEST_CASE("infonce without penalty is invariant to joint row permutations") {
  Rng rng(11);
  const auto u = normal<double>({10, 8}, rng), v = normal<double>({10, 8}, rng);
  std::vector<std::int64_t> perm(10);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<std::int64_t>(perm));
  Tape<double> tape;
  const double a = infonce(tape, u, v, plain(8)).item();
  const double b = infonce(tape, permute_rows(u, perm), permute_rows(v, perm), plain(8)).item();
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("raising a positive score lowers the loss") {
  Rng rng(12);
  auto raw = normal<double>({1, 6, 6}, rng);
  Tape<double> tape;
  double prev = infonce_from_raw(tape, raw, plain(4)).item();
  for (int step = 0; step < 5; ++step) {
    raw.mutable_values()[(step % 6) * 7] += 0.5;
    const double next = infonce_from_raw(tape, raw, plain(4)).item();
    CHECK(next < prev);
    prev = next;
  }
}

TEST_CASE("random unit embeddings sit at chance level") {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    Tape<double> tape;
    total += infonce(tape, unit_rows(64, 64, rng), unit_rows(64, 64, rng), CriticConfig{}).item();
  }
  CHECK(std::abs(total / 20.0 - std::log(63.0)) < 0.2);
}

TEST_CASE("infonce needs negatives") {
  Tape<double> tape;
  CHECK_THROWS_AS(infonce(tape, Array<double>::zeros({1, 4}), Array<double>::zeros({1, 4}), plain(4)),
                  std::invalid_argument);
  CHECK_THROWS_AS(infonce_from_raw(tape, Array<double>::zeros({1, 1, 1}), plain(4)), std::invalid_argument);
}

TEST_CASE("penalty term is never negative") {
  Rng rng(13);
  const auto raw = normal<double>({2, 5, 5}, rng, 4.0);
  Tape<double> tape;
  CHECK(infonce_from_raw(tape, raw, plain(4, 4e-2)).item() >= infonce_from_raw(tape, raw, plain(4)).item());
}

TEST_CASE("infonce gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed);
    const auto u = normal<double>({8, 16}, rng, 2.0, true), v = normal<double>({8, 16}, rng, 2.0, true);
    const nd::ScalarGraph f = [&](Tape<double>& tape) { return infonce(tape, u, v, plain(16, 4e-2)); };
    CHECK(nd::grad_check(f, {u, v}).max_rel_error < 1e-6);
    // The trace norm has kinks at zero singular values, so keep n > d.
    const auto a = normal<double>({40, 6}, rng, 1.0, true), b = normal<double>({40, 5}, rng, 1.0, true);
    const nd::ScalarGraph g = [&](Tape<double>& tape) { return soft_cca_loss(tape, a, b, 1e-3); };
    CHECK(nd::grad_check(g, {a, b}).max_rel_error < 1e-5);
  }
}

TEST_CASE("every edge kind passes its gradient check") {
  for (auto kind : {EdgeKind::CR, EdgeKind::XX, EdgeKind::CC, EdgeKind::RR, EdgeKind::AE, EdgeKind::CCA,
                    EdgeKind::SUP}) {
    CAPTURE(edge_kind_name(kind));
    CHECK(check_edge_gradient(kind, 1).max_rel_error < 1e-4);
  }
}

TEST_CASE("aligned orthogonal latents beat the zero-score baseline") {
  const model::MultimodalModel<double> m(tiny_model());
  EdgeContext<double> ctx{m, {}, {}, false};
  std::vector<double> z(8 * 64, 0.0);
  for (int l = 0; l < 8; ++l) z[l * 64 + l] = std::sqrt(8.0);
  for (int k = 0; k < 2; ++k) {
    ModalityState<double> s;
    s.outputs.z = Array<double>({8, 64}, z);
    ctx.modalities[k] = s;
  }
  LossConfig cfg;
  cfg.critic.penalty = 0.0;
  Tape<double> tape;
  const double aligned = edge_loss(tape, Edge{EdgeKind::RR, 0, 1}, ctx, cfg).item();
  CHECK(aligned < std::log(7.0 + std::exp(-20.0)));
  CHECK(aligned == doctest::Approx(-20.0 * std::tanh(0.05) + std::log(7.0 + std::exp(-20.0))));
}

TEST_CASE("location-first layout gives one positive per location and sample") {
  Rng rng(14);
  Tape<double> tape;
  const auto e = normal<double>({3, 64, 8, 8}, rng);
  const auto l = locations_first(tape, e);
  REQUIRE(l.shape() == nd::Shape{64, 3, 64});
  // Location 9 of sample 2, channel 5.
  CHECK(l.values()[(9 * 3 + 2) * 64 + 5] == e.values()[(2 * 64 + 5) * 64 + 9]);
  std::int64_t positives = 0;
  for (std::int64_t loc = 0; loc < l.dim(0); ++loc) positives += l.dim(1);
  CHECK(positives == 3 * 64);
}

TEST_CASE("duplicate images make CR harder") {
  // An untrained critic scores positives no higher than negatives, so train
  // briefly first.
  testutil::TempDir dir("dup");
  trainer::TrainConfig tc;
  tc.edges = {"CR:0"};
  tc.epochs = 2;
  tc.batch = 32;
  tc.base_channels = 4;
  tc.seed = 4;
  const auto set = data::synth_multimodal(256, 10, 4);
  const auto ck = nd::Checkpoint::load(trainer::pretrain(tc, set, dir.path()).final_checkpoint);
  model::MultimodalModel<float> m(trainer::load_model_config(ck));
  m.load_checkpoint(ck);
  const std::vector<std::int64_t> distinct{0, 1, 2, 3, 4, 5, 6, 7};
  const std::vector<std::int64_t> duplicated{0, 1, 2, 3, 4, 5, 6, 0};
  const auto graph = PairGraph::parse(std::vector<std::string>{"CR:0"});
  Tape<float> tape;
  const double a = total_loss(tape, graph, data::gather(set, distinct), m, LossConfig{}, false).total.item();
  const double b = total_loss(tape, graph, data::gather(set, duplicated), m, LossConfig{}, false).total.item();
  CHECK(b > a);
}

TEST_CASE("total loss composes weighted edges") {
  const model::MultimodalModel<float> m(tiny_model(5));
  const auto set = data::synth_multimodal(40, 10, 5);
  const std::vector<std::int64_t> idx{0, 1, 2, 3, 4, 5};
  const auto batch = data::gather(set, idx);
  Tape<float> tape;

  const auto one = total_loss(tape, PairGraph::parse(std::vector<std::string>{"RR:0-1"}), batch, m, LossConfig{});
  REQUIRE(one.terms.size() == 1);
  CHECK(one.total.item() == doctest::Approx(one.terms[0].second));

  const auto twice = total_loss(tape, PairGraph::parse(std::vector<std::string>{"RR:0-1"}, {{"RR", 2.0}}), batch, m,
                                LossConfig{});
  CHECK(twice.total.item() == doctest::Approx(2.0 * one.total.item()));

  const auto full = total_loss(tape, PairGraph::named("CR-XX-CC"), batch, m, LossConfig{});
  std::vector<std::string> names;
  for (const auto& [name, value] : full.terms) names.push_back(name);
  CHECK(names == std::vector<std::string>{"CR:0", "CR:1", "XX:0-1", "XX:1-0", "CC:0-1"});
  double sum = 0.0;
  for (const auto& [name, value] : full.terms) sum += value;
  CHECK(full.total.item() == doctest::Approx(sum).epsilon(1e-5));
}

TEST_CASE("total loss reaches every touched parameter") {
  const model::MultimodalModel<double> m(tiny_model(6));
  const auto set = data::synth_multimodal(20, 10, 6);
  const std::vector<std::int64_t> idx{0, 1, 2, 3};
  Tape<double> tape;
  const auto loss = total_loss(tape, PairGraph::named("CR-XX-CC"), data::gather(set, idx), m, LossConfig{});
  tape.backward(loss.total);
  for (int k = 0; k < 2; ++k) {
    for (const auto& p : m.encoder_parameters(k)) {
      CAPTURE(p.name);
      CHECK(p.value.has_grad());
    }
  }
}

TEST_CASE("named graphs expand to their edges") {
  CHECK(PairGraph::named("CR").labels() == std::vector<std::string>{"CR:0", "CR:1"});
  CHECK(PairGraph::named("RR-AE").labels() == std::vector<std::string>{"RR:0-1", "AE:0", "AE:1"});
  CHECK(PairGraph::named("CR-CCA").labels() == std::vector<std::string>{"CR:0", "CR:1", "CCA:0-1"});
  CHECK(PairGraph::named("XX-CC").labels() == std::vector<std::string>{"XX:0-1", "XX:1-0", "CC:0-1"});
  CHECK(PairGraph::named("Supervised").labels() == std::vector<std::string>{"SUP:0", "SUP:1"});
  CHECK_THROWS_AS(PairGraph::named("CR-QQ"), std::invalid_argument);
}

TEST_CASE("edge parsing reports the offending text") {
  const auto e = parse_edge("XX:1-0");
  CHECK(e.kind == EdgeKind::XX);
  CHECK(e.i == 1);
  CHECK(e.j == 0);
  CHECK(e.label() == "XX:1-0");
  CHECK(parse_edge("AE:1").label() == "AE:1");
  for (const char* bad : {"QQ:0", "CR", "RR:0", "CR:0-1", "RR:0-0", "RR:a-1", ""}) {
    CAPTURE(bad);
    try {
      parse_edge(bad);
      FAIL("accepted");
    } catch (const std::invalid_argument& err) {
      CHECK(std::string(err.what()).find(bad) != std::string::npos);
    }
  }
}

TEST_CASE("graph validation rejects malformed graphs") {
  GraphRequirements req;
  CHECK_NOTHROW(PairGraph::named("CR-XX-CC").validate(req));
  CHECK_THROWS_AS(PairGraph().validate(req), std::invalid_argument);
  CHECK_THROWS_AS(PairGraph::parse(std::vector<std::string>{"RR:0-1", "RR:1-0"}).validate(req),
                  std::invalid_argument);
  CHECK_NOTHROW(PairGraph::parse(std::vector<std::string>{"XX:0-1", "XX:1-0"}).validate(req));
  CHECK_THROWS_AS(PairGraph::parse(std::vector<std::string>{"CR:2"}).validate(req), std::invalid_argument);
  CHECK_THROWS_AS(PairGraph::named("RR-AE").validate(req), std::invalid_argument);
  req.decoders = {true, true};
  CHECK_NOTHROW(PairGraph::named("RR-AE").validate(req));
  CHECK_THROWS_AS(PairGraph::named("Supervised").validate(req), std::invalid_argument);
  req.labels = true;
  CHECK_NOTHROW(PairGraph::named("Supervised").validate(req));
  CHECK_THROWS_AS(PairGraph::parse(std::vector<std::string>{"RR:0-1"}, {{"CC", 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(PairGraph::parse(std::vector<std::string>{"RR:0-1"}, {{"RR", -1.0}}), std::invalid_argument);
}
