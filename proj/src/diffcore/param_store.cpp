#include "navgrpo/diffcore/param_store.hpp"

#include "navgrpo/common/binary_io.hpp"
#include "navgrpo/common/errors.hpp"

namespace navgrpo::diff {

const char* to_string(LayerRole role) {
  switch (role) {
    case LayerRole::Encoder: return "encoder";
    case LayerRole::Decoder: return "decoder";
    case LayerRole::Head: return "head";
  }
  return "?";
}

std::size_t ParamStore::add(std::string name, LayerRole role, int block, Tensor value) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name " + name);
  index_.emplace(name, params_.size());
  params_.push_back(Parameter{std::move(name), role, block, std::move(value), true});
  return params_.size() - 1;
}

std::optional<std::size_t> ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto i = find(name);
  if (!i) throw UsageError("unknown parameter " + name);
  return params_[*i];
}

Parameter& ParamStore::at(const std::string& name) {
  auto i = find(name);
  if (!i) throw UsageError("unknown parameter " + name);
  return params_[*i];
}

void ParamStore::set_all_trainable(bool trainable) {
  for (auto& p : params_) p.trainable = trainable;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::size_t ParamStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable) n += p.value.size();
  }
  return n;
}

std::vector<std::uint8_t> ParamStore::serialize(
    const std::function<bool(const Parameter&)>& select) const {
  ByteWriter w;
  for (const auto& p : params_) {
    if (!select(p)) continue;
    w.put_string(p.name);
    w.put<std::uint64_t>(p.value.shape().size());
    for (auto d : p.value.shape()) w.put<std::uint64_t>(d);
    w.put_doubles(p.value.values());
  }
  return w.take();
}

std::uint64_t ParamStore::checksum(const std::function<bool(const Parameter&)>& select) const {
  return fnv1a(serialize(select));
}

std::uint64_t ParamStore::checksum() const {
  return checksum([](const Parameter&) { return true; });
}

}  // namespace navgrpo::diff
