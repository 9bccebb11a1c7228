#include "tbent/timetag_io.hpp"

#include <charconv>
#include <cstring>

#include "tbent/errors.hpp"

namespace tbent {

namespace {

constexpr const char* kFormatName = "tbent-timetags";

void put_u64_le(char* dst, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) dst[b] = static_cast<char>((v >> (8 * b)) & 0xffu);
}

std::uint64_t get_u64_le(const unsigned char* src) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | src[b];
  return v;
}

bool valid_channel(unsigned v) { return v <= static_cast<unsigned>(Channel::Idler); }

}  // namespace

nlohmann::json header_json(const StreamHeader& h) {
  return {{"format", kFormatName},
          {"version", h.version},
          {"encoding", h.encoding == StreamEncoding::Binary ? "u8-channel,u64le-timestamp-ps" : "csv"},
          {"config", h.config}};
}

TimeTagWriter::TimeTagWriter(const std::string& path, StreamEncoding encoding, const nlohmann::json& config_echo)
    : out_(path, std::ios::binary | std::ios::trunc), encoding_(encoding) {
  if (!out_) throw DataError("cannot open '" + path + "' for writing");
  StreamHeader h;
  h.encoding = encoding;
  h.config = config_echo;
  const std::string line = header_json(h).dump();
  if (encoding_ == StreamEncoding::Binary) {
    out_ << line << '\n';
  } else {
    out_ << "# " << line << '\n' << "channel,timestamp_ps\n";
  }
}

void TimeTagWriter::write(std::span<const TimeTag> batch) {
  buffer_.clear();
  if (encoding_ == StreamEncoding::Binary) {
    buffer_.resize(batch.size() * kBinaryRecordBytes);
    char* p = buffer_.data();
    for (const TimeTag& t : batch) {
      p[0] = static_cast<char>(t.channel);
      put_u64_le(p + 1, t.timestamp_ps);
      p += kBinaryRecordBytes;
    }
  } else {
    char num[32];
    for (const TimeTag& t : batch) {
      buffer_.push_back(static_cast<char>('0' + static_cast<int>(t.channel)));
      buffer_.push_back(',');
      auto [end, ec] = std::to_chars(num, num + sizeof num, t.timestamp_ps);
      buffer_.insert(buffer_.end(), num, end);
      buffer_.push_back('\n');
    }
  }
  out_.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
  if (!out_) throw DataError("write failed");
  records_ += batch.size();
}

void TimeTagWriter::close() {
  out_.flush();
  out_.close();
}

TimeTagReader::TimeTagReader(const std::string& path) : in_(path, std::ios::binary) {
  if (!in_) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in_, line)) throw DataError("empty time-tag file", 0);
  std::string json_text = line;
  header_.encoding = StreamEncoding::Binary;
  if (!line.empty() && line[0] == '#') {
    header_.encoding = StreamEncoding::Csv;
    json_text = line.substr(1);
  }
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("unreadable header: ") + e.what(), 0);
  }
  if (!h.is_object() || h.value("format", "") != kFormatName) throw DataError("not a time-tag stream file", 0);
  header_.version = h.value("version", 0);
  if (header_.version != kStreamFormatVersion)
    throw DataError("unsupported stream format version " + std::to_string(header_.version), 0);
  header_.config = h.value("config", nlohmann::json::object());
  offset_ = static_cast<std::int64_t>(line.size()) + 1;
  if (header_.encoding == StreamEncoding::Csv) {
    if (!std::getline(in_, line) || line != "channel,timestamp_ps")
      throw DataError("missing CSV column header", offset_);
    offset_ += static_cast<std::int64_t>(line.size()) + 1;
  }
}

void TimeTagReader::check_order(const TimeTag& tag, std::int64_t offset) {
  if (tag.timestamp_ps < last_time_) throw DataError("timestamps decrease", offset);
  last_time_ = tag.timestamp_ps;
}

bool TimeTagReader::next(std::vector<TimeTag>& batch, std::size_t max_records) {
  batch.clear();
  return header_.encoding == StreamEncoding::Binary ? next_binary(batch, max_records) : next_csv(batch, max_records);
}

bool TimeTagReader::next_binary(std::vector<TimeTag>& batch, std::size_t max_records) {
  raw_.resize(max_records * kBinaryRecordBytes);
  in_.read(reinterpret_cast<char*>(raw_.data()), static_cast<std::streamsize>(raw_.size()));
  const auto got = static_cast<std::size_t>(in_.gcount());
  if (got == 0) return false;
  const std::size_t whole = got / kBinaryRecordBytes;
  batch.reserve(whole);
  for (std::size_t k = 0; k < whole; ++k) {
    const unsigned char* p = raw_.data() + k * kBinaryRecordBytes;
    const std::int64_t at = offset_ + static_cast<std::int64_t>(k * kBinaryRecordBytes);
    if (!valid_channel(p[0])) throw DataError("invalid channel code " + std::to_string(p[0]), at);
    TimeTag t{static_cast<Channel>(p[0]), get_u64_le(p + 1)};
    check_order(t, at);
    batch.push_back(t);
  }
  if (got % kBinaryRecordBytes != 0)
    throw DataError("truncated record", offset_ + static_cast<std::int64_t>(whole * kBinaryRecordBytes));
  offset_ += static_cast<std::int64_t>(got);
  return true;
}

bool TimeTagReader::next_csv(std::vector<TimeTag>& batch, std::size_t max_records) {
  std::string line;
  while (batch.size() < max_records && std::getline(in_, line)) {
    const std::int64_t at = offset_;
    offset_ += static_cast<std::int64_t>(line.size()) + 1;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError("malformed CSV record", at);
    unsigned ch = 0;
    std::uint64_t ts = 0;
    const char* b = line.data();
    auto r1 = std::from_chars(b, b + comma, ch);
    auto r2 = std::from_chars(b + comma + 1, b + line.size(), ts);
    if (r1.ec != std::errc() || r1.ptr != b + comma || r2.ec != std::errc() || r2.ptr != b + line.size())
      throw DataError("malformed CSV record", at);
    if (!valid_channel(ch)) throw DataError("invalid channel code " + std::to_string(ch), at);
    TimeTag t{static_cast<Channel>(ch), ts};
    check_order(t, at);
    batch.push_back(t);
  }
  return !batch.empty();
}

std::vector<TimeTag> read_all(const std::string& path, StreamHeader* header) {
  TimeTagReader reader(path);
  if (header) *header = reader.header();
  std::vector<TimeTag> all, batch;
  while (reader.next(batch)) all.insert(all.end(), batch.begin(), batch.end());
  return all;
}

}  // namespace tbent
