#include "navgrpo/diffcore/checkpoint.hpp"

#include <cstring>

#include "navgrpo/common/binary_io.hpp"
#include "navgrpo/common/errors.hpp"

namespace navgrpo::diff {
namespace {
constexpr char kMagic[8] = {'N', 'G', 'C', 'K', 'P', 'T', '0', '1'};
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  for (char c : kMagic) w.put<char>(c);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(ckpt.config_hash);
  w.put<std::uint64_t>(ckpt.model_hash);
  w.put_string(ckpt.metadata);
  w.put<std::uint64_t>(ckpt.params.size());
  for (const auto& p : ckpt.params) {
    w.put_string(p.name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(p.role));
    w.put<std::int32_t>(p.block);
    w.put<std::uint8_t>(p.trainable ? 1 : 0);
    w.put<std::uint64_t>(p.value.shape().size());
    for (auto d : p.value.shape()) w.put<std::uint64_t>(d);
    w.put_doubles(p.value.values());
  }
  ckpt.optimizer.write(w);
  const std::uint64_t sum = fnv1a(w.bytes());
  w.put<std::uint64_t>(sum);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a checkpoint file");
  }
  const auto body = bytes.first(bytes.size() - sizeof(std::uint64_t));
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body.size(), sizeof(stored));
  if (fnv1a(body) != stored) throw IoError("checkpoint checksum mismatch");

  ByteReader r(body);
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.get<char>();
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config_hash = r.get<std::uint64_t>();
  ckpt.model_hash = r.get<std::uint64_t>();
  ckpt.metadata = r.get_string();
  const auto n = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string name = r.get_string();
    const auto role = static_cast<LayerRole>(r.get<std::uint8_t>());
    const auto block = r.get<std::int32_t>();
    const bool trainable = r.get<std::uint8_t>() != 0;
    std::vector<std::size_t> shape(r.get<std::uint64_t>());
    for (auto& d : shape) d = r.get<std::uint64_t>();
    const auto idx = ckpt.params.add(std::move(name), role, block, Tensor(shape, r.get_doubles()));
    ckpt.params[idx].trainable = trainable;
  }
  ckpt.optimizer = Adam::read(r);
  if (!r.at_end()) throw IoError("trailing bytes in checkpoint");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

}  // namespace navgrpo::diff
