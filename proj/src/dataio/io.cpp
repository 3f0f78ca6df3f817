#include "dvfy/dataio/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dvfy/binary_io.hpp"
#include "dvfy/error.hpp"

namespace dvfy::data {

namespace {

constexpr const char* kTextTag = "DVTS1";
constexpr const char* kBinaryTag = "DVTS1B";

void append_real(std::string& out, Real v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& message) {
  fail(ErrorKind::kParse, "line " + std::to_string(line) + ": " + message);
}

template <typename T>
T parse_number(std::string_view text, std::size_t line, const std::string& field) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    parse_fail(line, "bad " + field + " '" + std::string(text) + "'");
  return value;
}

struct Header {
  bool binary = false;
  std::size_t channels = 0;
  std::size_t window = 0;
  int classes = 0;
};

Header parse_header(const std::string& line) {
  std::istringstream is(line);
  std::string tag;
  is >> tag;
  Header h;
  if (tag == kBinaryTag) {
    h.binary = true;
  } else if (tag != kTextTag) {
    parse_fail(1, "unknown format tag '" + tag + "'");
  }
  std::string kv;
  while (is >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) parse_fail(1, "header field '" + kv + "' is not key=value");
    const std::string key = kv.substr(0, eq);
    const std::string_view value(kv.data() + eq + 1, kv.size() - eq - 1);
    if (key == "channels") {
      h.channels = parse_number<std::size_t>(value, 1, key);
    } else if (key == "window") {
      h.window = parse_number<std::size_t>(value, 1, key);
    } else if (key == "classes") {
      h.classes = parse_number<int>(value, 1, key);
    } else {
      parse_fail(1, "unknown header field '" + key + "'");
    }
  }
  if (h.channels == 0 || h.window == 0 || h.classes <= 0) parse_fail(1, "header needs positive channels, window, classes");
  return h;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// Fills id/y/true_domain from the first three fields; validates labels.
Segment record_prefix(std::span<const std::string_view> fields, const Header& h, std::size_t line, std::size_t record) {
  Segment s;
  s.id = std::string(fields[0]);
  s.y = parse_number<int>(fields[1], line, "label");
  s.true_domain = parse_number<int>(fields[2], line, "true_domain");
  const std::string where = "record " + std::to_string(record) + " ('" + s.id + "')";
  if (s.y < 0 || s.y >= h.classes)
    parse_fail(line, where + ": label " + std::to_string(s.y) + " outside [0," + std::to_string(h.classes) + ")");
  if (s.true_domain < -1) parse_fail(line, where + ": true_domain must be -1 or non-negative");
  return s;
}

void add_checked(SegmentDataset& ds, Segment s, std::size_t line, std::size_t record) {
  for (Real v : s.values)
    if (!std::isfinite(v)) parse_fail(line, "record " + std::to_string(record) + ": non-finite value");
  ds.add(std::move(s));
}

}  // namespace

void write_dataset(std::ostream& os, const SegmentDataset& dataset, DatasetEncoding encoding) {
  const bool binary = encoding == DatasetEncoding::kBinary;
  os << (binary ? kBinaryTag : kTextTag) << " channels=" << dataset.channels() << " window=" << dataset.window()
     << " classes=" << dataset.classes() << '\n';
  std::string line;
  for (const auto& s : dataset.segments()) {
    require(s.id.find_first_of(",\n") == std::string::npos, ErrorKind::kInput,
            "segment id '" + s.id + "' contains a comma or newline");
    line = s.id + ',' + std::to_string(s.y) + ',' + std::to_string(s.true_domain);
    if (binary) {
      os << line << '\n';
      for (Real v : s.values) binary::put_f32(os, static_cast<float>(v));
    } else {
      for (Real v : s.values) {
        line += ',';
        append_real(line, v);
      }
      os << line << '\n';
    }
  }
  require(static_cast<bool>(os), ErrorKind::kIo, "failed writing dataset");
}

SegmentDataset read_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.empty()) fail(ErrorKind::kParse, "no header");
  const Header h = parse_header(line);
  SegmentDataset ds(h.channels, h.window, h.classes);
  const std::size_t per = h.channels * h.window;

  std::size_t line_no = 1;
  std::size_t record = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (h.binary) {
      if (fields.size() != 3) parse_fail(line_no, "binary record header needs id,y,true_domain");
      Segment s = record_prefix(fields, h, line_no, record);
      s.values.resize(per);
      for (auto& v : s.values) v = binary::get_f32(is, "record " + std::to_string(record) + " values");
      add_checked(ds, std::move(s), line_no, record);
    } else {
      if (fields.size() != 3 + per)
        parse_fail(line_no, "record " + std::to_string(record) + " has " + std::to_string(fields.size() - 3) +
                                " values, expected " + std::to_string(per));
      Segment s = record_prefix(fields, h, line_no, record);
      s.values.resize(per);
      for (std::size_t i = 0; i < per; ++i) s.values[i] = parse_number<Real>(fields[3 + i], line_no, "value");
      add_checked(ds, std::move(s), line_no, record);
    }
    ++record;
  }
  return ds;
}

void save_dataset(const std::filesystem::path& path, const SegmentDataset& dataset, DatasetEncoding encoding) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  write_dataset(os, dataset, encoding);
}

SegmentDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::kIo, "cannot open " + path.string());
  return read_dataset(is);
}

}  // namespace dvfy::data
