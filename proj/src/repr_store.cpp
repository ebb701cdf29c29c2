#include "nuc/repr_store.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>

#include "nuc/errors.hpp"

namespace nuc {
namespace {

constexpr std::array<char, 4> kMagic = {'N', 'U', 'C', 'R'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kHeaderSize = 4 + 2 + 4 + 8;

template <typename UInt>
void put_le(std::string& out, UInt v) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename UInt>
UInt get_le(const unsigned char* p) {
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i)
    v |= static_cast<UInt>(p[i]) << (8 * i);
  return v;
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_field(std::string_view field, const std::string& where) {
  field = trim(field);
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw FormatError(where + ": cannot parse '" + std::string(field) + "'");
  return value;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace

void ReprSet::validate() const {
  const std::size_t n = ids.size();
  if (n == 0) throw ConsistencyError("representation set is empty");
  if (dim == 0) throw ConsistencyError("representation dim must be >= 1");
  if (labels.size() != n || pred_labels.size() != n || confidences.size() != n)
    throw ConsistencyError("metadata columns have different lengths");
  if (vectors.size() != n * dim)
    throw ConsistencyError("vector matrix holds " + std::to_string(vectors.size()) +
                           " values, expected " + std::to_string(n * dim));
  for (std::size_t i = 0; i < n; ++i) {
    if (!(confidences[i] >= 0.0 && confidences[i] <= 1.0))
      throw DataError("confidence of id " + std::to_string(ids[i]) +
                      " outside [0,1]: " + format_double(confidences[i]));
    if (labels[i] < 0 || pred_labels[i] < 0)
      throw DataError("negative class id at id " + std::to_string(ids[i]));
  }
  for (float v : vectors)
    if (!std::isfinite(v)) throw DataError("vector file contains NaN or Inf");
  std::unordered_set<PointId> seen;
  seen.reserve(n);
  for (PointId id : ids)
    if (!seen.insert(id).second)
      throw DataError("duplicate point id " + std::to_string(id));
}

ReprSet ReprSet::subset(std::span<const std::size_t> rows) const {
  ReprSet out;
  out.dim = dim;
  out.vectors.reserve(rows.size() * dim);
  for (std::size_t r : rows) {
    auto v = row(r);
    out.vectors.insert(out.vectors.end(), v.begin(), v.end());
    out.ids.push_back(ids[r]);
    out.labels.push_back(labels[r]);
    out.pred_labels.push_back(pred_labels[r]);
    out.confidences.push_back(confidences[r]);
  }
  return out;
}

std::vector<std::uint8_t> correctness_labels(const ReprSet& set) {
  std::vector<std::uint8_t> flags(set.count());
  for (std::size_t i = 0; i < flags.size(); ++i)
    flags[i] = set.labels[i] == set.pred_labels[i] ? 1 : 0;
  return flags;
}

void write_file_atomic(const std::filesystem::path& path,
                       std::span<const char> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string());
}

void write_matrix(const std::filesystem::path& path, const FloatMatrix& m) {
  if (m.data.size() != m.rows * m.cols)
    throw ShapeError("matrix data size does not match rows*cols");
  std::string out;
  out.reserve(kHeaderSize + m.data.size() * 4);
  out.append(kMagic.data(), kMagic.size());
  put_le<std::uint16_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows));
  for (float v : m.data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  write_file_atomic(path, out);
}

FloatMatrix read_matrix(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kHeaderSize ||
      !std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw FormatError(path.string() + ": bad magic, not a NUCR vector file");
  if (auto version = get_le<std::uint16_t>(p + 4); version != kVersion)
    throw FormatError(path.string() + ": unsupported version " +
                      std::to_string(version));
  FloatMatrix m;
  m.cols = get_le<std::uint32_t>(p + 6);
  m.rows = get_le<std::uint64_t>(p + 10);
  if (m.cols == 0) throw FormatError(path.string() + ": dim is 0");
  if ((bytes.size() - kHeaderSize) / 4 / m.cols != m.rows ||
      bytes.size() != kHeaderSize + m.rows * m.cols * 4)
    throw FormatError(path.string() + ": payload size does not match header");
  m.data.resize(m.rows * m.cols);
  const unsigned char* body = p + kHeaderSize;
  for (std::size_t i = 0; i < m.data.size(); ++i)
    m.data[i] = std::bit_cast<float>(get_le<std::uint32_t>(body + 4 * i));
  return m;
}

void write_repr_set(const ReprSet& set, const std::filesystem::path& vectors_path,
                    const std::filesystem::path& meta_path) {
  set.validate();
  write_matrix(vectors_path, FloatMatrix{set.count(), set.dim, set.vectors});
  std::string csv = "id,label,pred_label,confidence\n";
  for (std::size_t i = 0; i < set.count(); ++i) {
    csv += std::to_string(set.ids[i]) + ',' + std::to_string(set.labels[i]) + ',' +
           std::to_string(set.pred_labels[i]) + ',' +
           format_double(set.confidences[i]) + '\n';
  }
  write_file_atomic(meta_path, csv);
}

ReprSet load_metadata(const std::filesystem::path& meta_path) {
  ReprSet set;
  std::istringstream in(read_all(meta_path));
  std::string line;
  if (!std::getline(in, line) || trim(line) != "id,label,pred_label,confidence")
    throw FormatError(meta_path.string() +
                      ": expected header id,label,pred_label,confidence");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::string_view rest = line;
    std::array<std::string_view, 4> fields;
    for (std::size_t f = 0; f < 4; ++f) {
      auto comma = rest.find(',');
      if ((f < 3) == (comma == std::string_view::npos))
        throw FormatError(meta_path.string() + ":" + std::to_string(line_no) +
                          ": expected 4 columns");
      fields[f] = rest.substr(0, comma);
      rest = f < 3 ? rest.substr(comma + 1) : std::string_view{};
    }
    const std::string where = meta_path.string() + ":" + std::to_string(line_no);
    set.ids.push_back(parse_field<PointId>(fields[0], where));
    set.labels.push_back(parse_field<ClassId>(fields[1], where));
    set.pred_labels.push_back(parse_field<ClassId>(fields[2], where));
    set.confidences.push_back(parse_field<double>(fields[3], where));
  }
  return set;
}

ReprSet load_repr_set(const std::filesystem::path& vectors_path,
                      const std::filesystem::path& meta_path) {
  FloatMatrix m = read_matrix(vectors_path);
  ReprSet set = load_metadata(meta_path);
  if (set.ids.size() != m.rows)
    throw ConsistencyError("vector file has " + std::to_string(m.rows) +
                           " rows but metadata has " +
                           std::to_string(set.ids.size()));
  set.dim = m.cols;
  set.vectors = std::move(m.data);
  set.validate();
  return set;
}

}  // namespace nuc
