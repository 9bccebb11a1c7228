#pragma once

// Time-tag stream files.
//
// Binary: one JSON header line terminated by '\n', then packed 9-byte
// records: channel (u8) followed by timestamp in picoseconds (u64, little
// endian). CSV: "# <header json>" line, a "channel,timestamp_ps" line, then
// one record per line.

#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "tbent/simulator.hpp"
#include "tbent/timetag.hpp"

namespace tbent {

inline constexpr int kStreamFormatVersion = 1;
inline constexpr std::size_t kBinaryRecordBytes = 9;

enum class StreamEncoding { Binary, Csv };

struct StreamHeader {
  int version = kStreamFormatVersion;
  StreamEncoding encoding = StreamEncoding::Binary;
  nlohmann::json config;  // ExperimentConfig echo
};

nlohmann::json header_json(const StreamHeader& h);

class TimeTagWriter {
public:
  TimeTagWriter(const std::string& path, StreamEncoding encoding, const nlohmann::json& config_echo);

  void write(std::span<const TimeTag> batch);
  void close();
  std::uint64_t records() const noexcept { return records_; }

private:
  std::ofstream out_;
  StreamEncoding encoding_;
  std::uint64_t records_ = 0;
  std::vector<char> buffer_;
};

/// Streams a file in batches. Every malformed input raises DataError with the
/// byte offset of the offending record.
class TimeTagReader {
public:
  explicit TimeTagReader(const std::string& path);

  const StreamHeader& header() const noexcept { return header_; }

  /// Fills `batch` with up to `max_records`; returns false at end of file.
  bool next(std::vector<TimeTag>& batch, std::size_t max_records = 1u << 16);

private:
  bool next_binary(std::vector<TimeTag>& batch, std::size_t max_records);
  bool next_csv(std::vector<TimeTag>& batch, std::size_t max_records);
  void check_order(const TimeTag& tag, std::int64_t offset);

  std::ifstream in_;
  StreamHeader header_;
  std::int64_t offset_ = 0;
  std::uint64_t last_time_ = 0;
  std::vector<unsigned char> raw_;
};

/// Reads a whole file into memory.
std::vector<TimeTag> read_all(const std::string& path, StreamHeader* header = nullptr);

}  // namespace tbent
