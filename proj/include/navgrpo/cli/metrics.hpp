#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

namespace navgrpo::cli {

// Append-only line-delimited JSON records, flushed after every line so a
// crashed run leaves a parseable prefix.
class MetricsWriter {
 public:
  MetricsWriter() = default;
  explicit MetricsWriter(const std::string& path);

  bool is_open() const { return out_.is_open(); }
  // Adds "kind" to the record and writes it on its own line.
  void write(const std::string& kind, nlohmann::json record);

 private:
  std::ofstream out_;
};

// Every complete line of a metrics file, parsed. A truncated last line is
// ignored.
std::vector<nlohmann::json> read_metrics(const std::string& path);

}  // namespace navgrpo::cli
