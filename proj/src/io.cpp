#include "sendkit/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "sendkit/errors.hpp"

namespace sendkit::io {

namespace {

constexpr std::size_t kHeaderBytes = 16;

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

std::uint64_t get_le(const std::string& s, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int b = 0; b < bytes; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[pos + b])) << (8 * b);
  return v;
}

std::string printable_magic(const std::string& bytes) {
  std::string out;
  for (std::size_t i = 0; i < std::min<std::size_t>(4, bytes.size()); ++i) {
    const auto c = static_cast<unsigned char>(bytes[i]);
    if (c >= 0x20 && c < 0x7f) {
      out.push_back(static_cast<char>(c));
    } else {
      std::ostringstream hex;
      hex << "\\x" << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(c);
      out += hex.str();
    }
  }
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

std::string encode_snapshot(const DenseMatrix& m) {
  constexpr auto u32max = std::numeric_limits<std::uint32_t>::max();
  if (m.rows() > u32max || m.cols() > u32max) throw InvalidArgumentError("snapshot: dimensions exceed u32");
  std::string out;
  out.reserve(kHeaderBytes + m.size() * 8);
  out.append(kSnapshotMagic, 4);
  put_u32(out, kSnapshotVersion);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

DenseMatrix decode_snapshot(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 4) throw TruncatedError(origin + ": " + std::to_string(bytes.size()) + " bytes, no room for the magic");
  if (std::memcmp(bytes.data(), kSnapshotMagic, 4) != 0) {
    throw BadMagicError(origin + ": bad magic \"" + printable_magic(bytes) + "\", expected \"EMB1\"");
  }
  if (bytes.size() < kHeaderBytes) throw TruncatedError(origin + ": header truncated at " + std::to_string(bytes.size()) + " bytes");
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  if (version != kSnapshotVersion) {
    throw VersionMismatchError(origin + ": version " + std::to_string(version) + ", this build reads version " +
                               std::to_string(kSnapshotVersion));
  }
  const std::uint64_t rows = get_le(bytes, 8, 4);
  const std::uint64_t cols = get_le(bytes, 12, 4);
  const std::uint64_t expected = kHeaderBytes + rows * cols * 8;
  if (bytes.size() < expected) {
    throw TruncatedError(origin + ": payload holds " + std::to_string(bytes.size() - kHeaderBytes) + " bytes, " +
                         std::to_string(rows) + "x" + std::to_string(cols) + " needs " + std::to_string(rows * cols * 8));
  }
  if (bytes.size() > expected) {
    throw FormatError(origin + ": " + std::to_string(bytes.size() - expected) + " trailing bytes after payload");
  }
  std::vector<double> data(rows * cols);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<double>(get_le(bytes, kHeaderBytes + 8 * i, 8));
    if (!std::isfinite(data[i])) throw FormatError(origin + ": non-finite value at payload index " + std::to_string(i));
  }
  return DenseMatrix(rows, cols, std::move(data));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  if (in.bad()) throw IoError("read failed for " + path.string());
  return s.str();
}

void write_snapshot(const std::filesystem::path& path, const DenseMatrix& m) {
  const std::string bytes = encode_snapshot(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

DenseMatrix read_snapshot(const std::filesystem::path& path) {
  return decode_snapshot(read_text_file(path), path.string());
}

CheckpointManifest read_manifest(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ManifestError(path.string() + ": not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ManifestError("$: manifest must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "checkpoints" && key != "datapoints") throw ManifestError("$." + key + ": unknown field");
  }
  if (!doc.contains("checkpoints") || !doc["checkpoints"].is_array()) throw ManifestError("$.checkpoints: required array");
  if (!doc.contains("datapoints") || !doc["datapoints"].is_array()) throw ManifestError("$.datapoints: required array");

  CheckpointManifest m;
  m.base_dir = path.parent_path();
  const auto& cps = doc["checkpoints"];
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (!cps[i].is_number_unsigned()) throw ManifestError("$.checkpoints[" + std::to_string(i) + "]: expected non-negative integer");
    const auto c = cps[i].get<std::size_t>();
    if (!m.checkpoints.empty() && c <= m.checkpoints.back()) {
      throw ManifestError("$.checkpoints[" + std::to_string(i) + "]: indices must strictly increase");
    }
    m.checkpoints.push_back(c);
  }
  if (m.checkpoints.empty()) throw ManifestError("$.checkpoints: empty");

  const auto& dps = doc["datapoints"];
  if (dps.empty()) throw ManifestError("$.datapoints: empty");
  for (std::size_t d = 0; d < dps.size(); ++d) {
    const std::string at = "$.datapoints[" + std::to_string(d) + "]";
    const auto& dp = dps[d];
    if (!dp.is_object()) throw ManifestError(at + ": expected object");
    if (!dp.contains("id") || !dp["id"].is_string()) throw ManifestError(at + ".id: required string");
    if (!dp.contains("files") || !dp["files"].is_array()) throw ManifestError(at + ".files: required array");
    const auto& files = dp["files"];
    if (files.size() != m.checkpoints.size()) {
      throw ManifestError(at + ".files: " + std::to_string(files.size()) + " entries for " +
                          std::to_string(m.checkpoints.size()) + " checkpoints");
    }
    std::vector<std::filesystem::path> paths;
    for (std::size_t c = 0; c < files.size(); ++c) {
      if (!files[c].is_string()) throw ManifestError(at + ".files[" + std::to_string(c) + "]: expected string");
      const std::filesystem::path p = m.base_dir / files[c].get<std::string>();
      if (!std::filesystem::is_regular_file(p)) {
        throw ManifestError(at + ".files[" + std::to_string(c) + "]: missing file " + p.string());
      }
      paths.push_back(p);
    }
    m.ids.push_back(dp["id"].get<std::string>());
    m.files.push_back(std::move(paths));
  }
  return m;
}

std::vector<sensitivity::CheckpointSeries> load_series(const CheckpointManifest& manifest) {
  std::vector<sensitivity::CheckpointSeries> out;
  for (std::size_t d = 0; d < manifest.ids.size(); ++d) {
    sensitivity::CheckpointSeries s(manifest.ids[d]);
    for (std::size_t c = 0; c < manifest.checkpoints.size(); ++c) {
      const DenseMatrix m = read_snapshot(manifest.files[d][c]);
      if (m.rows() != 1 && m.cols() != 1) {
        throw ManifestError("datapoint '" + manifest.ids[d] + "': " + manifest.files[d][c].string() + " holds a " +
                            std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + " matrix, expected a vector");
      }
      const auto data = m.data();
      try {
        s.append(manifest.checkpoints[c], linalg::Vector(std::vector<double>(data.begin(), data.end())));
      } catch (const DimensionError& e) {
        throw ManifestError(e.what());
      }
    }
    if (!out.empty() && s.dims() != out.front().dims()) {
      throw ManifestError("datapoint '" + manifest.ids[d] + "': embedding length " + std::to_string(s.dims()) +
                          " differs from '" + out.front().id() + "' (" + std::to_string(out.front().dims()) + ")");
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_bench_header(std::ostream& out) { out << kBenchHeader << '\n'; }

void write_bench_row(std::ostream& out, const BenchRow& r) {
  out << r.rows << ',' << r.cols << ',' << r.rows * r.cols << ',' << r.moments << ',' << fmt_double(r.exact_seconds)
      << ',' << fmt_double(r.ees_seconds) << ',' << fmt_double(r.exact_value) << ',' << fmt_double(r.ees_value) << ','
      << r.orientation << '\n';
}

std::vector<BenchRow> read_bench_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kBenchHeader) throw FormatError("bench csv: unexpected header '" + line + "'");
  std::vector<BenchRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 9) throw FormatError("bench csv line " + std::to_string(lineno) + ": " + std::to_string(f.size()) + " fields");
    try {
      BenchRow r;
      r.rows = std::stoull(f[0]);
      r.cols = std::stoull(f[1]);
      if (std::stoull(f[2]) != r.rows * r.cols) throw FormatError("elements != rows*cols");
      r.moments = std::stoull(f[3]);
      r.exact_seconds = std::stod(f[4]);
      r.ees_seconds = std::stod(f[5]);
      r.exact_value = std::stod(f[6]);
      r.ees_value = std::stod(f[7]);
      r.orientation = f[8];
      rows.push_back(std::move(r));
    } catch (const std::logic_error& e) {
      throw FormatError("bench csv line " + std::to_string(lineno) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError("bench csv line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace sendkit::io
