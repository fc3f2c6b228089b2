#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "navgrpo/diffcore/tensor.hpp"

namespace navgrpo::diff {

// Structural position of a parameter inside the policy network. Together with
// a freeze boundary this determines its fine-tuning group.
enum class LayerRole : std::uint8_t { Encoder = 0, Decoder = 1, Head = 2 };

const char* to_string(LayerRole role);

struct Parameter {
  std::string name;
  LayerRole role = LayerRole::Encoder;
  int block = -1;  // decoder block index; -1 for encoder and head
  Tensor value;
  bool trainable = true;
};

class ParamStore {
 public:
  std::size_t add(std::string name, LayerRole role, int block, Tensor value);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::optional<std::size_t> find(const std::string& name) const;
  const Parameter& at(const std::string& name) const;
  Parameter& at(const std::string& name);

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void set_all_trainable(bool trainable);
  std::size_t parameter_count() const;
  std::size_t trainable_count() const;

  // Serialized bytes of the selected parameters (names, shapes and values).
  std::vector<std::uint8_t> serialize(
      const std::function<bool(const Parameter&)>& select) const;
  std::uint64_t checksum(const std::function<bool(const Parameter&)>& select) const;
  std::uint64_t checksum() const;

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace navgrpo::diff
