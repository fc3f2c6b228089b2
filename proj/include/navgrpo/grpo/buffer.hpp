#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "navgrpo/ddpm/observation.hpp"
#include "navgrpo/ddpm/policy.hpp"
#include "navgrpo/reward/reward.hpp"

namespace navgrpo::grpo {

// One control step of one episode: the observation and the G candidate
// chains sampled from it, with their scores.
struct BufferEntry {
  ddpm::Observation obs;
  std::vector<ddpm::ChainRecord> records;
  std::vector<reward::RewardBreakdown> rewards;
  std::uint64_t scene_seed = 0;
  int task = 0;
  int step = 0;
  std::uint64_t episode = 0;  // globally increasing episode id
  std::uint32_t version = 0;  // iteration whose policy sampled the group

  std::vector<double> totals() const;

  std::vector<std::uint8_t> encode() const;
  static BufferEntry decode(std::span<const std::uint8_t> bytes);

  friend bool operator==(const BufferEntry&, const BufferEntry&) = default;
};

struct BufferIndexItem {
  std::uint64_t id = 0;
  std::uint64_t episode = 0;
  std::uint32_t version = 0;
  std::uint64_t checksum = 0;  // fnv1a of the entry file body
  std::string file;
};

// Disk-backed store of immutable entries, one file each, plus a JSON
// manifest. Capacity counts episodes; admitting an entry from a new episode
// beyond capacity evicts every entry of the oldest episode.
class ReplayBuffer {
 public:
  ReplayBuffer(std::string dir, std::size_t capacity_episodes, std::uint64_t config_hash = 0);

  // Opens an existing directory read-only through its manifest.
  static ReplayBuffer open(const std::string& dir);

  void add(const BufferEntry& entry);
  // Loads entry i (0 = oldest retained) from disk and verifies its checksum.
  BufferEntry load(std::size_t i) const;

  std::size_t size() const { return index_.size(); }
  bool empty() const { return index_.empty(); }
  std::size_t episodes() const;
  std::size_t capacity() const { return capacity_; }
  std::size_t evicted() const { return evicted_; }
  const std::vector<BufferIndexItem>& index() const { return index_; }
  const std::string& dir() const { return dir_; }
  std::uint64_t config_hash() const { return config_hash_; }

  // Removes every entry file and empties the index.
  void clear();
  void write_manifest() const;
  // Combined checksum of the retained entries in order.
  std::uint64_t checksum() const;

 private:
  std::string dir_;
  std::size_t capacity_;
  std::uint64_t config_hash_;
  std::uint64_t next_id_ = 0;
  std::size_t evicted_ = 0;
  std::vector<BufferIndexItem> index_;
};

}  // namespace navgrpo::grpo
