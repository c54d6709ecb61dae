#include "domino/model.hpp"

namespace domino::model {

template <typename T>
MultimodalModel<T>::MultimodalModel(const ModelConfig& config) : config_(config) {
  for (int m = 0; m < 2; ++m) {
    EncoderConfig ec;
    ec.in_channels = config.in_channels[m];
    ec.base_channels = config.base_channels;
    ec.latent_dim = config.latent_dim;
    ec.seed = mix_seed(config.seed, static_cast<std::uint64_t>(m));
    const auto tag = std::to_string(m);
    encoders_.emplace_back(ec, "enc" + tag);
    heads_.emplace_back(ec.feature_channels(), config.embed_dim, mix_seed(ec.seed, 1), "head" + tag);
    decoders_.emplace_back();
    if (config.decoders[m]) decoders_.back().emplace(ec, "dec" + tag);
    classifiers_.emplace_back();
    if (config.classifier_classes[m] > 0) {
      Rng rng(mix_seed(ec.seed, 0xC1A55));
      classifiers_.back().emplace(config.latent_dim, config.classifier_classes[m], rng);
    }
  }
}

template <typename T>
const Encoder<T>& MultimodalModel<T>::encoder(int m) const {
  return encoders_.at(static_cast<std::size_t>(m));
}

template <typename T>
const ProjectionHeads<T>& MultimodalModel<T>::heads(int m) const {
  return heads_.at(static_cast<std::size_t>(m));
}

template <typename T>
const Decoder<T>* MultimodalModel<T>::decoder(int m) const {
  const auto& d = decoders_.at(static_cast<std::size_t>(m));
  return d ? &*d : nullptr;
}

template <typename T>
const Linear<T>* MultimodalModel<T>::classifier(int m) const {
  const auto& c = classifiers_.at(static_cast<std::size_t>(m));
  return c ? &*c : nullptr;
}

template <typename T>
std::vector<NamedParam<T>> MultimodalModel<T>::encoder_parameters(int m) const {
  return encoder(m).parameters();
}

template <typename T>
std::vector<NamedParam<T>> MultimodalModel<T>::parameters() const {
  std::vector<NamedParam<T>> out;
  for (int m = 0; m < 2; ++m) {
    for (auto& p : encoders_[m].parameters()) out.push_back(std::move(p));
    for (auto& p : heads_[m].parameters()) out.push_back(std::move(p));
    if (decoders_[m])
      for (auto& p : decoders_[m]->parameters()) out.push_back(std::move(p));
    if (classifiers_[m]) classifiers_[m]->collect("head" + std::to_string(m) + "/classifier", out);
  }
  return out;
}

template <typename T>
std::vector<NamedStats<T>> MultimodalModel<T>::statistics() const {
  std::vector<NamedStats<T>> out;
  for (int m = 0; m < 2; ++m) {
    for (auto& s : encoders_[m].statistics()) out.push_back(s);
    for (auto& s : heads_[m].statistics()) out.push_back(s);
    if (decoders_[m])
      for (auto& s : decoders_[m]->statistics()) out.push_back(s);
  }
  return out;
}

template <typename T>
nd::Checkpoint MultimodalModel<T>::to_checkpoint() const {
  nd::Checkpoint ck;
  store(ck, parameters(), statistics());
  return ck;
}

template <typename T>
void MultimodalModel<T>::load_checkpoint(const nd::Checkpoint& ck) {
  restore(ck, parameters(), statistics());
}

template class MultimodalModel<float>;
template class MultimodalModel<double>;

}  // namespace domino::model
