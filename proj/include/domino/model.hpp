#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "domino/ndgrad/array.hpp"
#include "domino/ndgrad/checkpoint.hpp"
#include "domino/ndgrad/ops.hpp"
#include "domino/ndgrad/tape.hpp"
#include "domino/rng.hpp"

namespace domino::model {

using nd::Array;
using nd::Tape;

template <typename T>
struct NamedParam {
  std::string name;
  Array<T> value;
};

template <typename T>
struct NamedStats {
  std::string name;
  nd::BatchNormStats<T>* stats;
};

/// Uniform(+-sqrt(6 / (fan_in + fan_out))).
template <typename T>
void xavier_uniform(Array<T>& w, std::int64_t fan_in, std::int64_t fan_out, Rng& rng);

double xavier_bound(std::int64_t fan_in, std::int64_t fan_out);

// ---- layers ----

template <typename T>
struct Conv2d {
  Array<T> weight;  // (out, in, k, k)
  Array<T> bias;    // (out) or undefined
  nd::Conv2dAttrs attrs;

  Conv2d() = default;
  Conv2d(std::int64_t in, std::int64_t out, int kernel, int stride, int pad, bool with_bias, Rng& rng);
  Array<T> operator()(Tape<T>& tape, const Array<T>& x) const;
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
};

template <typename T>
struct ConvTranspose2d {
  Array<T> weight;  // (in, out, k, k)
  Array<T> bias;
  nd::Conv2dAttrs attrs;

  ConvTranspose2d() = default;
  ConvTranspose2d(std::int64_t in, std::int64_t out, int kernel, int stride, int pad, bool with_bias, Rng& rng);
  Array<T> operator()(Tape<T>& tape, const Array<T>& x) const;
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
};

template <typename T>
struct Linear {
  Array<T> weight;  // (out, in)
  Array<T> bias;    // (out)

  Linear() = default;
  Linear(std::int64_t in, std::int64_t out, Rng& rng);
  Array<T> operator()(Tape<T>& tape, const Array<T>& x) const;
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
};

template <typename T>
struct BatchNorm {
  Array<T> gamma;
  Array<T> beta;
  std::unique_ptr<nd::BatchNormStats<T>> stats;
  nd::BatchNormAttrs attrs;

  BatchNorm() = default;
  explicit BatchNorm(std::int64_t channels);
  Array<T> operator()(Tape<T>& tape, const Array<T>& x, bool training) const;
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
  void collect_stats(const std::string& prefix, std::vector<NamedStats<T>>& out) const;
};

// ---- encoder ----

struct EncoderConfig {
  std::int64_t in_channels = 1;
  std::int64_t base_channels = 64;
  std::int64_t latent_dim = 64;
  std::int64_t conv_feature_side = 8;
  double leaky_slope = 0.2;
  std::uint64_t seed = 0;

  /// Channels of the side-8 feature map c.
  std::int64_t feature_channels() const { return 2 * base_channels; }
};

template <typename T>
struct EncoderOutputs {
  Array<T> c;  // (B, 2*base, 8, 8)
  Array<T> z;  // (B, latent)
};

/// DCGAN discriminator trunk for 32x32 inputs:
/// conv(k4,s2,p1) C->b (16x16), conv b->2b (8x8, emits c), conv 2b->4b
/// (4x4), flatten, linear -> latent. Hidden convs are followed by
/// batchnorm (except the first) and leaky ReLU.
template <typename T>
class Encoder {
 public:
  Encoder(const EncoderConfig& config, std::string name);

  EncoderOutputs<T> operator()(Tape<T>& tape, const Array<T>& x, bool training) const;

  const EncoderConfig& config() const { return config_; }
  const std::string& name() const { return name_; }
  std::vector<NamedParam<T>> parameters() const;
  std::vector<NamedStats<T>> statistics() const;

 private:
  EncoderConfig config_;
  std::string name_;
  Conv2d<T> conv1_, conv2_, conv3_;
  BatchNorm<T> bn2_, bn3_;
  Linear<T> fc_;
};

// ---- projection heads ----

/// Convolutional projection head: path A = 1x1 conv -> ReLU -> 1x1 conv
/// (Xavier), path B = 1x1 conv initialized as identity on the leading
/// channels; the sum goes through batchnorm. The latent head is identity.
template <typename T>
class ProjectionHeads {
 public:
  ProjectionHeads(std::int64_t in_channels, std::int64_t embed_dim, std::uint64_t seed, std::string name);

  /// (B, C_l, 8, 8) -> (B, embed_dim, 8, 8).
  Array<T> project_conv(Tape<T>& tape, const Array<T>& c, bool training) const;
  Array<T> project_latent(Tape<T>&, const Array<T>& z) const { return z; }

  Array<T> path_a(Tape<T>& tape, const Array<T>& c) const;
  Array<T> path_b(Tape<T>& tape, const Array<T>& c) const;

  std::int64_t embed_dim() const { return embed_dim_; }
  const std::string& name() const { return name_; }
  std::vector<NamedParam<T>> parameters() const;
  std::vector<NamedStats<T>> statistics() const;

 private:
  std::int64_t in_channels_;
  std::int64_t embed_dim_;
  std::string name_;
  Conv2d<T> a1_, a2_, b_;
  BatchNorm<T> bn_;
};

// ---- decoder ----

/// DCGAN generator mirror: linear -> (4b,4,4) -> convT to 8, 16, 32 with
/// batchnorm + ReLU between, output squashed to [0,1] by 0.5 (tanh + 1).
template <typename T>
class Decoder {
 public:
  Decoder(const EncoderConfig& config, std::string name);

  Array<T> operator()(Tape<T>& tape, const Array<T>& z, bool training) const;

  const std::string& name() const { return name_; }
  std::vector<NamedParam<T>> parameters() const;
  std::vector<NamedStats<T>> statistics() const;

 private:
  EncoderConfig config_;
  std::string name_;
  Linear<T> fc_;
  BatchNorm<T> bn0_, bn1_, bn2_;
  ConvTranspose2d<T> up1_, up2_, up3_;
};

// ---- full model ----

struct ModelConfig {
  std::array<std::int64_t, 2> in_channels{1, 1};
  std::int64_t base_channels = 64;
  std::int64_t latent_dim = 64;
  std::int64_t embed_dim = 64;
  std::array<bool, 2> decoders{false, false};
  /// Supervised classifier heads (SUP edges); 0 disables.
  std::array<int, 2> classifier_classes{0, 0};
  std::uint64_t seed = 0;
};

/// One encoder, one projection-head set and optional decoder/classifier per
/// modality. Modalities share no parameters.
template <typename T>
class MultimodalModel {
 public:
  explicit MultimodalModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const Encoder<T>& encoder(int m) const;
  const ProjectionHeads<T>& heads(int m) const;
  const Decoder<T>* decoder(int m) const;
  const Linear<T>* classifier(int m) const;

  std::vector<NamedParam<T>> parameters() const;
  std::vector<NamedParam<T>> encoder_parameters(int m) const;
  std::vector<NamedStats<T>> statistics() const;

  /// Parameters and running statistics under enc{m}/, head{m}/, dec{m}/.
  nd::Checkpoint to_checkpoint() const;
  /// Throws nd::FormatError when a name is missing or a shape differs.
  void load_checkpoint(const nd::Checkpoint& ck);

 private:
  ModelConfig config_;
  std::vector<Encoder<T>> encoders_;
  std::vector<ProjectionHeads<T>> heads_;
  std::vector<std::optional<Decoder<T>>> decoders_;
  std::vector<std::optional<Linear<T>>> classifiers_;
};

/// Writes named parameters (and optional stats) into a checkpoint.
template <typename T>
void store(nd::Checkpoint& ck, const std::vector<NamedParam<T>>& params, const std::vector<NamedStats<T>>& stats);

/// Copies checkpoint arrays into existing parameters (and stats).
template <typename T>
void restore(const nd::Checkpoint& ck, const std::vector<NamedParam<T>>& params,
             const std::vector<NamedStats<T>>& stats);

}  // namespace domino::model
