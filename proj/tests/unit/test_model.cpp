#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "domino/model.hpp"
#include "domino/trainer.hpp"
#include "helpers.hpp"

using namespace domino;
using namespace domino::model;
using testutil::normal;
using testutil::TempDir;

namespace {

EncoderConfig small_encoder(std::int64_t base, std::uint64_t seed = 0) {
  EncoderConfig cfg;
  cfg.base_channels = base;
  cfg.seed = seed;
  return cfg;
}

template <typename T>
Array<T> weighted_sum(Tape<T>& tape, const Array<T>& y, const Array<T>& w) {
  return nd::sum(tape, nd::mul(tape, y, w));
}

bool all_equal(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

}  // namespace

TEST_CASE("encoder emits 8x8 conv features and a 64-d latent") {
  Rng rng(1);
  const Encoder<float> enc(small_encoder(64), "enc0");
  Tape<float> tape;
  const auto out = enc(tape, normal<float>({8, 1, 32, 32}, rng), true);
  CHECK(out.c.shape() == nd::Shape{8, 128, 8, 8});
  CHECK(out.z.shape() == nd::Shape{8, 64});
  for (float v : out.z.values()) CHECK(std::isfinite(v));
}

TEST_CASE("encoder rejects inputs that are not 32x32") {
  const Encoder<float> enc(small_encoder(4), "enc0");
  Tape<float> tape;
  CHECK_THROWS_AS(enc(tape, Array<float>::zeros({2, 1, 28, 28}), true), nd::ShapeError);
  CHECK_THROWS_AS(enc(tape, Array<float>::zeros({2, 32, 32}), true), nd::ShapeError);
}

TEST_CASE("zero input with zero biases gives a zero latent") {
  const Encoder<double> enc(small_encoder(8, 3), "enc0");
  for (const auto& p : enc.parameters())
    if (p.name.ends_with("bias")) {
      for (double v : p.value.values()) REQUIRE(v == 0.0);
    }
  Tape<double> tape;
  for (bool training : {true, false}) {
    const auto out = enc(tape, Array<double>::zeros({4, 1, 32, 32}), training);
    for (double v : out.z.values()) CHECK(v == 0.0);
  }
}

TEST_CASE("encoder gradients match finite differences") {
  Rng rng(5);
  const Encoder<double> enc(small_encoder(2, 5), "enc0");
  const auto x = normal<double>({3, 1, 32, 32}, rng, 0.5, true);
  const auto w = normal<double>({3, 64}, rng);
  const nd::ScalarGraph f = [&](Tape<double>& tape) { return weighted_sum(tape, enc(tape, x, false).z, w); };
  std::vector<Array<double>> wrt{x};
  for (const auto& p : enc.parameters()) wrt.push_back(p.value);
  const auto result = nd::grad_check(f, wrt, 1e-6, 400);
  CHECK(result.max_rel_error < 1e-4);
}

TEST_CASE("conv head outputs the embedding width") {
  Rng rng(2);
  for (std::int64_t channels : {64, 128, 96}) {
    const ProjectionHeads<float> heads(channels, 64, 7, "head0");
    Tape<float> tape;
    const auto e = heads.project_conv(tape, normal<float>({2, channels, 8, 8}, rng), true);
    CHECK(e.shape() == nd::Shape{2, 64, 8, 8});
  }
  const ProjectionHeads<float> heads(128, 64, 7, "head0");
  Tape<float> tape;
  CHECK_THROWS(heads.project_conv(tape, normal<float>({2, 96, 8, 8}, rng), true));
}

TEST_CASE("path B starts as identity on the leading channels") {
  Rng rng(3);
  const ProjectionHeads<float> heads(128, 64, 11, "head0");
  const auto c = normal<float>({2, 128, 8, 8}, rng);
  Tape<float> tape;
  const auto b = heads.path_b(tape, c);
  REQUIRE(b.shape() == nd::Shape{2, 64, 8, 8});
  const auto cv = c.values();
  const auto bv = b.values();
  for (std::int64_t n = 0; n < 2; ++n)
    for (std::int64_t k = 0; k < 64 * 64; ++k) CHECK(bv[n * 64 * 64 + k] == doctest::Approx(cv[n * 128 * 64 + k]));
}

TEST_CASE("both head paths receive gradient") {
  Rng rng(4);
  const ProjectionHeads<double> heads(64, 64, 13, "head0");
  const auto c = normal<double>({2, 64, 8, 8}, rng);
  const auto w = normal<double>({2, 64, 8, 8}, rng);
  Tape<double> tape;
  const auto loss = weighted_sum(tape, heads.project_conv(tape, c, true), w);
  tape.backward(loss);
  std::set<std::string> touched;
  for (const auto& p : heads.parameters()) {
    if (!p.value.has_grad()) continue;
    const auto g = p.value.grad();
    if (std::any_of(g.begin(), g.end(), [](double v) { return v != 0.0; })) touched.insert(p.name);
  }
  CHECK(touched.count("head0/conv_a1.weight") == 1);
  CHECK(touched.count("head0/conv_a2.weight") == 1);
  CHECK(touched.count("head0/conv_b.weight") == 1);
}

TEST_CASE("decoder mirrors the encoder into [0,1]") {
  Rng rng(6);
  const Decoder<float> dec(small_encoder(8), "dec0");
  Tape<float> tape;
  const auto x = dec(tape, normal<float>({8, 64}, rng, 3.0), true);
  CHECK(x.shape() == nd::Shape{8, 1, 32, 32});
  const auto [lo, hi] = std::minmax_element(x.values().begin(), x.values().end());
  CHECK(*lo >= 0.0f);
  CHECK(*hi <= 1.0f);
}

TEST_CASE("autoencoder reconstruction error falls over five epochs") {
  TempDir dir("ae");
  trainer::TrainConfig cfg;
  cfg.edges = {"AE:0"};
  cfg.epochs = 5;
  cfg.batch = 32;
  cfg.base_channels = 8;
  const auto train = data::synth_multimodal(256, 10, 3);
  const auto result = trainer::pretrain(cfg, train, dir.path());
  REQUIRE(result.epochs.size() == 5);
  int violations = 0;
  for (std::size_t e = 1; e < result.epochs.size(); ++e)
    violations += result.epochs[e].total >= result.epochs[e - 1].total;
  CHECK(violations <= 1);
  CHECK(result.epochs.back().total < result.epochs.front().total);
}

TEST_CASE("xavier init respects the support and second moment") {
  Rng rng(8);
  auto w = Array<double>::zeros({256, 384});
  xavier_uniform(w, 384, 256, rng);
  const double bound = xavier_bound(384, 256);
  CHECK(bound == doctest::Approx(std::sqrt(6.0 / 640.0)));
  double sq = 0.0;
  for (double v : w.values()) {
    CHECK(std::abs(v) <= bound);
    sq += v * v;
  }
  const double var = sq / static_cast<double>(w.size());
  CHECK(std::abs(var / (2.0 / 640.0) - 1.0) < 0.1);
}

TEST_CASE("every model weight obeys its xavier bound") {
  ModelConfig cfg;
  cfg.base_channels = 8;
  cfg.decoders = {true, true};
  const MultimodalModel<float> m(cfg);
  for (const auto& p : m.parameters()) {
    if (!p.name.ends_with(".weight") || p.value.rank() < 2 || p.name.find("conv_b") != std::string::npos) continue;
    const auto& s = p.value.shape();
    const std::int64_t receptive = p.value.rank() == 4 ? s[2] * s[3] : 1;
    const bool transposed = p.name.find("/up") != std::string::npos;
    const std::int64_t fan_in = (transposed ? s[0] : s[1]) * receptive;
    const std::int64_t fan_out = (transposed ? s[1] : s[0]) * receptive;
    const auto v = p.value.values();
    const float peak = std::abs(*std::max_element(v.begin(), v.end(), [](float a, float b) {
      return std::abs(a) < std::abs(b);
    }));
    CAPTURE(p.name);
    CHECK(peak <= xavier_bound(fan_in, fan_out) + 1e-7);
  }
}

TEST_CASE("same seed builds identical models, different seeds differ") {
  ModelConfig cfg;
  cfg.base_channels = 8;
  cfg.seed = 21;
  const MultimodalModel<float> a(cfg), b(cfg);
  cfg.seed = 22;
  const MultimodalModel<float> c(cfg);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  REQUIRE(pa.size() == pb.size());
  bool any_diff = false;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    CHECK(pa[k].name == pb[k].name);
    CHECK(all_equal(pa[k].value.values(), pb[k].value.values()));
    any_diff = any_diff || !all_equal(pa[k].value.values(), pc[k].value.values());
  }
  CHECK(any_diff);
}

TEST_CASE("modalities share no parameters and keep one head each") {
  ModelConfig cfg;
  cfg.base_channels = 8;
  cfg.decoders = {true, false};
  const MultimodalModel<float> m(cfg);
  const auto params = m.parameters();
  for (std::size_t a = 0; a < params.size(); ++a)
    for (std::size_t b = a + 1; b < params.size(); ++b) CHECK_FALSE(params[a].value.same_storage(params[b].value));
  const auto e0 = m.encoder_parameters(0), e1 = m.encoder_parameters(1);
  CHECK(std::all_of(e0.begin(), e0.end(), [](const auto& p) { return p.name.starts_with("enc0/"); }));
  CHECK(std::all_of(e1.begin(), e1.end(), [](const auto& p) { return p.name.starts_with("enc1/"); }));
  CHECK(&m.heads(0) != &m.heads(1));
  CHECK(m.decoder(0) != nullptr);
  CHECK(m.decoder(1) == nullptr);
  CHECK(m.classifier(0) == nullptr);
}

TEST_CASE("model checkpoints use the documented name prefixes and round-trip") {
  ModelConfig cfg;
  cfg.base_channels = 4;
  cfg.decoders = {false, true};
  cfg.seed = 2;
  const MultimodalModel<float> a(cfg);
  const auto ck = a.to_checkpoint();
  std::set<std::string> prefixes;
  for (const auto& e : ck.entries()) prefixes.insert(e.name.substr(0, e.name.find('/')));
  CHECK(prefixes == std::set<std::string>{"enc0", "enc1", "head0", "head1", "dec1"});

  cfg.seed = 3;
  MultimodalModel<float> b(cfg);
  b.load_checkpoint(ck);
  CHECK(b.to_checkpoint().to_bytes() == ck.to_bytes());

  cfg.base_channels = 8;
  MultimodalModel<float> wider(cfg);
  CHECK_THROWS_AS(wider.load_checkpoint(ck), nd::FormatError);
}

TEST_CASE("eval-mode forward leaves parameters and statistics untouched") {
  Rng rng(9);
  ModelConfig cfg;
  cfg.base_channels = 4;
  const MultimodalModel<float> m(cfg);
  const auto before = m.to_checkpoint().to_bytes();
  Tape<float> tape;
  {
    nd::NoGradGuard<float> guard(tape);
    m.encoder(0)(tape, normal<float>({5, 1, 32, 32}, rng), false);
  }
  CHECK(m.to_checkpoint().to_bytes() == before);
}
