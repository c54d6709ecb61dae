#include <doctest.h>

#include <cmath>
#include <cstring>
#include <thread>

#include "domino/ndgrad/checkpoint.hpp"
#include "domino/ndgrad/grad_check.hpp"
#include "domino/ndgrad/ops.hpp"
#include "domino/ndgrad/tape.hpp"
#include "helpers.hpp"

using namespace domino;
using namespace domino::nd;
using testutil::from;
using testutil::normal;

namespace {

// Direct NCHW convolution loop.
std::vector<double> conv_oracle(const Array<double>& x, const Array<double>& w, int stride, int pad) {
  const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const auto O = w.dim(0), k = w.dim(2);
  const auto Ho = (H + 2 * pad - k) / stride + 1, Wo = (W + 2 * pad - k) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(N * O * Ho * Wo), 0.0);
  auto xv = x.values();
  auto wv = w.values();
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t o = 0; o < O; ++o)
      for (std::int64_t oy = 0; oy < Ho; ++oy)
        for (std::int64_t ox = 0; ox < Wo; ++ox) {
          double s = 0.0;
          for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t ky = 0; ky < k; ++ky)
              for (std::int64_t kx = 0; kx < k; ++kx) {
                const auto iy = oy * stride - pad + ky, ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                s += xv[((n * C + c) * H + iy) * W + ix] * wv[((o * C + c) * k + ky) * k + kx];
              }
          out[((n * O + o) * Ho + oy) * Wo + ox] = s;
        }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("array shape and value invariants") {
  const auto a = Array<double>::zeros({2, 3, 4});
  CHECK(a.size() == 24);
  CHECK(a.values().size() == 24);
  CHECK_FALSE(a.has_grad());
  CHECK_THROWS_AS(Array<double>({2, 3}, std::vector<double>(5)), ShapeError);
  CHECK_THROWS_AS(Array<double>::zeros({2, 0}), ShapeError);

  auto g = Array<double>::zeros({2, 3}, true);
  g.accumulate_grad(std::vector<double>(6, 1.5));
  REQUIRE(g.has_grad());
  CHECK(g.grad().size() == 6);
  g.zero_grad();
  CHECK(g.grad()[4] == 0.0);
}

TEST_CASE("matmul with identity returns the other operand") {
  Rng rng(3);
  const auto a = normal({3, 3}, rng);
  const auto eye = from<double>({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tape<double> tape;
  const auto y = matmul(tape, eye, a);
  for (int i = 0; i < 9; ++i) CHECK(y.values()[i] == a.values()[i]);
}

TEST_CASE("tanh of zeros is zeros") {
  Tape<double> tape;
  const auto y = nd::tanh(tape, Array<double>::zeros({4, 5}));
  for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("conv2d of ones with a 2x2 ones kernel sums to four") {
  Tape<double> tape;
  const auto x = Array<double>::full({1, 1, 4, 4}, 1.0);
  const auto w = Array<double>::full({1, 1, 2, 2}, 1.0);
  const auto y = conv2d<double>(tape, x, w, nullptr, {1, 0});
  CHECK(y.shape() == Shape{1, 1, 3, 3});
  for (double v : y.values()) CHECK(v == 4.0);
}

TEST_CASE("conv2d matches a direct loop for strided padded kernels") {
  Rng rng(11);
  const auto x = normal({2, 3, 7, 6}, rng);
  const auto w = normal({4, 3, 4, 4}, rng);
  Tape<double> tape;
  const auto y = conv2d<double>(tape, x, w, nullptr, {2, 1});
  const auto expected = conv_oracle(x, w, 2, 1);
  REQUIRE(y.values().size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(y.values()[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("transposed convolution is the adjoint of convolution") {
  Rng rng(5);
  const auto x = normal({2, 3, 8, 8}, rng);
  const auto w = normal({4, 3, 4, 4}, rng);  // conv: 3 -> 4 channels
  Tape<double> tape;
  const auto y = conv2d<double>(tape, x, w, nullptr, {2, 1});
  const auto r = normal(y.shape(), rng);
  // convT weight layout is (in, out, k, k) with in = conv's out channels.
  const auto back = conv_transpose2d<double>(tape, r, w, nullptr, {2, 1});
  REQUIRE(back.shape() == x.shape());
  CHECK(dot(y.values(), r.values()) == doctest::Approx(dot(x.values(), back.values())).epsilon(1e-12));
}

TEST_CASE("backward of sum gives ones") {
  auto x = from<double>({5}, {1, -2, 3, 0.5, 7}, true);
  Tape<double> tape;
  tape.backward(sum(tape, x));
  for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of mean of squares gives 2x/3") {
  auto x = from<double>({3}, {1, 2, 3}, true);
  Tape<double> tape;
  tape.backward(mean(tape, square(tape, x)));
  CHECK(x.grad()[0] == doctest::Approx(2.0 / 3.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0 / 3.0));
  CHECK(x.grad()[2] == doctest::Approx(2.0));
}

TEST_CASE("gradients accumulate across fan-out") {
  auto x = from<double>({2}, {3, -1}, true);
  Tape<double> tape;
  // L = sum(x * x + x) -> dL/dx = 2x + 1
  tape.backward(sum(tape, add(tape, mul(tape, x, x), x)));
  CHECK(x.grad()[0] == doctest::Approx(7.0));
  CHECK(x.grad()[1] == doctest::Approx(-1.0));
}

TEST_CASE("backward rejects a non-scalar root") {
  auto x = from<double>({2}, {1, 2}, true);
  Tape<double> tape;
  const auto y = affine(tape, x, 2.0);
  CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

TEST_CASE("tape entries are in topological order") {
  Rng rng(2);
  auto a = normal({4, 3}, rng, 1.0, true);
  auto b = normal({3, 2}, rng, 1.0, true);
  Tape<double> tape;
  const auto loss = mean(tape, nd::tanh(tape, matmul(tape, a, b)));
  REQUIRE(tape.size() == 3);
  for (std::size_t i = 0; i < tape.size(); ++i) {
    for (const auto& in : tape.entry(i).inputs) {
      bool leaf = in.same_storage(a) || in.same_storage(b);
      bool earlier = false;
      for (std::size_t j = 0; j < i; ++j) earlier = earlier || in.same_storage(tape.entry(j).output);
      CHECK((leaf || earlier));
    }
  }
  CHECK(tape.entry(2).output.same_storage(loss));
}

TEST_CASE("no-grad guard suppresses recording") {
  auto x = from<double>({2}, {1, 2}, true);
  Tape<double> tape;
  {
    NoGradGuard<double> guard(tape);
    (void)sum(tape, x);
  }
  CHECK(tape.size() == 0);
  (void)sum(tape, x);
  CHECK(tape.size() == 1);
}

TEST_CASE("shape errors name the op and the shapes") {
  Tape<double> tape;
  const auto a = Array<double>::zeros({2, 3});
  const auto b = Array<double>::zeros({4, 5});
  try {
    (void)matmul(tape, a, b);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("2") != std::string::npos);
    CHECK(msg.find("5") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_op_kind("conv3d"), std::invalid_argument);
  CHECK(parse_op_kind("batchnorm2d") == OpKind::batchnorm2d);
  CHECK(all_op_kinds().size() == 16);
}

TEST_CASE("grad_check of sum is exact") {
  // Integer inputs and a power-of-two step keep every difference exact.
  auto x = from<double>({6}, {1, -2, 3, 4, -5, 6});
  const auto err = grad_check([](Tape<double>& t, const Array<double>& v) { return sum(t, v); }, x, 1.0 / 1024.0);
  CHECK(err.max_rel_error == 0.0);
}

TEST_CASE("grad_check rejects a non-scalar graph") {
  const auto x = from<double>({2}, {1, 2});
  CHECK_THROWS_AS(grad_check([](Tape<double>& t, const Array<double>& v) { return affine(t, v, 3.0); }, x),
                  ShapeError);
}

TEST_CASE("grad_check of a conv, batchnorm, leaky relu stack") {
  Rng rng(21);
  auto x = normal({3, 2, 6, 6}, rng);
  auto w = normal({3, 2, 3, 3}, rng, 0.5);
  auto gamma = Array<double>::full({3}, 1.2);
  auto beta = Array<double>::full({3}, 0.1);
  BatchNormStats<double> stats(3);
  const auto weights = normal({3, 3, 4, 4}, rng);
  const ScalarGraph f = [&](Tape<double>& t) {
        auto h = conv2d<double>(t, x, w, nullptr, {1, 0});
        h = batchnorm2d(t, h, gamma, beta, &stats, {true});
        return sum(t, mul(t, leaky_relu(t, h, 0.2), weights));
  };
  const auto r = grad_check(f, {x, w, gamma, beta});
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("every op kind passes grad_check") {
  for (const auto kind : all_op_kinds()) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      CAPTURE(op_kind_name(kind));
      CAPTURE(seed);
      CHECK(check_op_gradient(kind, seed).max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("forward is deterministic") {
  const auto run = [] {
    const auto f = make_op_fixture(OpKind::conv2d, 9);
    Tape<double> t;
    const auto y = forward_op(t, f.kind, std::span<const Array<double>>(f.inputs), f.attrs);
    return std::vector<double>(y.values().begin(), y.values().end());
  };
  const auto a = run(), b = run();
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("batchnorm eval mode is the running-statistics affine map") {
  Rng rng(4);
  const auto x = normal({3, 2, 2, 2}, rng);
  const auto gamma = from<double>({2}, {1.5, -0.5});
  const auto beta = from<double>({2}, {0.25, 2.0});
  BatchNormStats<double> stats(2);
  stats.running_mean = {0.3, -1.0};
  stats.running_var = {2.0, 0.5};
  Tape<double> tape;
  const auto y = batchnorm2d(tape, x, gamma, beta, &stats, {false});
  for (std::int64_t n = 0; n < 3; ++n)
    for (std::int64_t c = 0; c < 2; ++c)
      for (std::int64_t p = 0; p < 4; ++p) {
        const auto i = (n * 2 + c) * 4 + p;
        const double expect = (x.values()[i] - stats.running_mean[c]) / std::sqrt(stats.running_var[c] + 1e-5) *
                                  gamma.values()[c] +
                              beta.values()[c];
        CHECK(y.values()[i] == doctest::Approx(expect).epsilon(1e-12));
      }
  CHECK(stats.running_mean[0] == 0.3);  // eval mode leaves statistics alone
}

TEST_CASE("batchnorm training mode updates running statistics") {
  const auto x = from<double>({4, 1}, {1, 2, 3, 4});
  const auto gamma = from<double>({1}, {1});
  const auto beta = from<double>({1}, {0});
  BatchNormStats<double> stats(1);
  Tape<double> tape;
  const auto y = batchnorm2d(tape, x, gamma, beta, &stats, {true, 0.1, 1e-5});
  double m = 0.0;
  for (double v : y.values()) m += v;
  CHECK(m == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(stats.running_mean[0] == doctest::Approx(0.9 * 0.0 + 0.1 * 2.5));
  CHECK(stats.running_var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * (5.0 / 3.0)));
}

TEST_CASE("independent tapes on separate threads") {
  const auto work = [](std::vector<double>& out) {
    const auto f = make_op_fixture(OpKind::matmul, 1);
    auto a = f.inputs[0].clone();
    auto b = f.inputs[1].clone();
    a.set_requires_grad(true);
    Tape<double> t;
    t.backward(sum(t, matmul(t, a, b)));
    out.assign(a.grad().begin(), a.grad().end());
  };
  std::vector<double> r1, r2, serial;
  std::thread t1(work, std::ref(r1)), t2(work, std::ref(r2));
  t1.join();
  t2.join();
  work(serial);
  CHECK(r1 == serial);
  CHECK(r2 == serial);
}

TEST_CASE("checkpoint container layout and round trip") {
  Checkpoint ck;
  ck.put("enc0/w", from<float>({2, 2}, {1, 2, 3, 4}));
  ck.put("stats", from<double>({3}, {0.5, -1, 2}));
  const auto bytes = ck.to_bytes();
  REQUIRE(bytes.size() > 12);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "NDCK");
  CHECK(bytes[4] == 1);  // version, little-endian
  CHECK(bytes[8] == 2);  // array count
  CHECK(bytes[12] == 6);  // first name length
  const auto again = Checkpoint::from_bytes(bytes);
  CHECK(again.to_bytes() == bytes);
  CHECK(again.get<double>("enc0/w").values()[3] == 4.0);
  CHECK(again.entry("stats").dtype() == DType::f64);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(Checkpoint::from_bytes(bad), FormatError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(Checkpoint::from_bytes(truncated), FormatError);
}
