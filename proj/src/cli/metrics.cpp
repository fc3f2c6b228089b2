#include "navgrpo/cli/metrics.hpp"

#include "navgrpo/common/errors.hpp"

namespace navgrpo::cli {

MetricsWriter::MetricsWriter(const std::string& path) : out_(path, std::ios::app) {
  if (!out_) throw IoError("cannot open metrics file " + path);
}

void MetricsWriter::write(const std::string& kind, nlohmann::json record) {
  if (!out_.is_open()) return;
  record["kind"] = kind;
  out_ << record.dump() << '\n';
  out_.flush();
  if (!out_) throw IoError("metrics write failed");
}

std::vector<nlohmann::json> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics file " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (in.eof()) break;  // no trailing newline: partial record
    out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

}  // namespace navgrpo::cli
