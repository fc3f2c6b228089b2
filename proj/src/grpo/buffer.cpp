#include "navgrpo/grpo/buffer.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "navgrpo/common/binary_io.hpp"
#include "navgrpo/common/errors.hpp"

namespace navgrpo::grpo {

namespace fs = std::filesystem;

namespace {

constexpr char kEntryMagic[8] = {'N', 'G', 'B', 'U', 'F', 'E', '0', '1'};
constexpr int kManifestVersion = 1;

void write_breakdown(ByteWriter& w, const reward::RewardBreakdown& b) {
  w.put_doubles(b.raw);
  w.put_doubles(b.weighted);
  w.put<double>(b.total);
}

reward::RewardBreakdown read_breakdown(ByteReader& r) {
  reward::RewardBreakdown b;
  const auto raw = r.get_doubles();
  const auto weighted = r.get_doubles();
  if (raw.size() != b.raw.size() || weighted.size() != b.weighted.size()) {
    throw IoError("reward breakdown has the wrong number of components");
  }
  std::copy(raw.begin(), raw.end(), b.raw.begin());
  std::copy(weighted.begin(), weighted.end(), b.weighted.begin());
  b.total = r.get<double>();
  return b;
}

std::string entry_name(std::uint64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "entry_%08llu.bin", static_cast<unsigned long long>(id));
  return buf;
}

}  // namespace

std::vector<double> BufferEntry::totals() const {
  std::vector<double> t;
  t.reserve(rewards.size());
  for (const auto& b : rewards) t.push_back(b.total);
  return t;
}

std::vector<std::uint8_t> BufferEntry::encode() const {
  if (records.size() != rewards.size()) throw UsageError("buffer entry: records and rewards differ");
  ByteWriter w;
  for (char c : kEntryMagic) w.put<char>(c);
  w.put<std::uint64_t>(scene_seed);
  w.put<std::int32_t>(task);
  w.put<std::int32_t>(step);
  w.put<std::uint64_t>(episode);
  w.put<std::uint32_t>(version);
  obs.write(w);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].write(w);
    write_breakdown(w, rewards[i]);
  }
  w.put<std::uint64_t>(fnv1a(w.bytes()));
  return w.take();
}

BufferEntry BufferEntry::decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw IoError("buffer entry too short");
  const auto body = bytes.first(bytes.size() - 8);
  ByteReader tail(bytes.last(8));
  if (tail.get<std::uint64_t>() != fnv1a(body)) throw IoError("buffer entry checksum mismatch");
  ByteReader r(body);
  for (char c : kEntryMagic) {
    if (r.get<char>() != c) throw IoError("not a buffer entry");
  }
  BufferEntry e;
  e.scene_seed = r.get<std::uint64_t>();
  e.task = r.get<std::int32_t>();
  e.step = r.get<std::int32_t>();
  e.episode = r.get<std::uint64_t>();
  e.version = r.get<std::uint32_t>();
  e.obs = ddpm::Observation::read(r);
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    e.records.push_back(ddpm::ChainRecord::read(r));
    e.rewards.push_back(read_breakdown(r));
  }
  if (!r.at_end()) throw IoError("trailing bytes in buffer entry");
  return e;
}

ReplayBuffer::ReplayBuffer(std::string dir, std::size_t capacity_episodes,
                           std::uint64_t config_hash)
    : dir_(std::move(dir)), capacity_(capacity_episodes), config_hash_(config_hash) {
  if (capacity_ == 0) throw ConfigError("buffer capacity must be positive");
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create buffer directory " + dir_ + ": " + ec.message());
}

std::size_t ReplayBuffer::episodes() const {
  std::set<std::uint64_t> eps;
  for (const auto& it : index_) eps.insert(it.episode);
  return eps.size();
}

void ReplayBuffer::add(const BufferEntry& entry) {
  const bool new_episode =
      std::none_of(index_.begin(), index_.end(),
                   [&](const BufferIndexItem& it) { return it.episode == entry.episode; });
  if (new_episode) {
    while (episodes() >= capacity_) {
      const std::uint64_t oldest = index_.front().episode;
      while (!index_.empty() && index_.front().episode == oldest) {
        std::error_code ec;
        fs::remove(fs::path(dir_) / index_.front().file, ec);
        index_.erase(index_.begin());
        ++evicted_;
      }
    }
  }
  const auto bytes = entry.encode();
  BufferIndexItem item;
  item.id = next_id_++;
  item.episode = entry.episode;
  item.version = entry.version;
  item.checksum = fnv1a(std::span<const std::uint8_t>(bytes).first(bytes.size() - 8));
  item.file = entry_name(item.id);
  write_file_atomic((fs::path(dir_) / item.file).string(), bytes);
  index_.push_back(std::move(item));
}

BufferEntry ReplayBuffer::load(std::size_t i) const {
  if (i >= index_.size()) throw UsageError("buffer index out of range");
  const auto& item = index_[i];
  const auto bytes = read_file((fs::path(dir_) / item.file).string());
  if (bytes.size() < 8 ||
      fnv1a(std::span<const std::uint8_t>(bytes).first(bytes.size() - 8)) != item.checksum) {
    throw IoError("buffer entry " + item.file + " does not match the manifest checksum");
  }
  return BufferEntry::decode(bytes);
}

void ReplayBuffer::clear() {
  for (const auto& it : index_) {
    std::error_code ec;
    fs::remove(fs::path(dir_) / it.file, ec);
  }
  index_.clear();
  write_manifest();
}

std::uint64_t ReplayBuffer::checksum() const {
  ByteWriter w;
  for (const auto& it : index_) {
    w.put<std::uint64_t>(it.episode);
    w.put<std::uint32_t>(it.version);
    w.put<std::uint64_t>(it.checksum);
  }
  return fnv1a(w.bytes());
}

void ReplayBuffer::write_manifest() const {
  nlohmann::json j;
  j["format"] = "navgrpo-buffer";
  j["version"] = kManifestVersion;
  j["capacity_episodes"] = capacity_;
  j["config_hash"] = config_hash_;
  j["next_id"] = next_id_;
  j["evicted"] = evicted_;
  j["entries"] = nlohmann::json::array();
  for (const auto& it : index_) {
    j["entries"].push_back({{"id", it.id},
                            {"episode", it.episode},
                            {"policy_version", it.version},
                            {"checksum", it.checksum},
                            {"file", it.file}});
  }
  const std::string text = j.dump(1);
  write_file_atomic((fs::path(dir_) / "manifest.json").string(),
                    std::span<const std::uint8_t>(
                        reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

ReplayBuffer ReplayBuffer::open(const std::string& dir) {
  const auto bytes = read_file((fs::path(dir) / "manifest.json").string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
    if (j.at("format") != "navgrpo-buffer" || j.at("version") != kManifestVersion) {
      throw IoError("unsupported buffer manifest in " + dir);
    }
    ReplayBuffer buf(dir, j.at("capacity_episodes").get<std::size_t>(),
                     j.at("config_hash").get<std::uint64_t>());
    buf.next_id_ = j.at("next_id").get<std::uint64_t>();
    buf.evicted_ = j.at("evicted").get<std::size_t>();
    for (const auto& e : j.at("entries")) {
      BufferIndexItem it;
      it.id = e.at("id").get<std::uint64_t>();
      it.episode = e.at("episode").get<std::uint64_t>();
      it.version = e.at("policy_version").get<std::uint32_t>();
      it.checksum = e.at("checksum").get<std::uint64_t>();
      it.file = e.at("file").get<std::string>();
      buf.index_.push_back(std::move(it));
    }
    return buf;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed buffer manifest in " + dir + ": " + e.what());
  }
}

}  // namespace navgrpo::grpo
