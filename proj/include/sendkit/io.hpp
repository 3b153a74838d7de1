#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sendkit/linalg.hpp"
#include "sendkit/sensitivity.hpp"

namespace sendkit::io {

using linalg::DenseMatrix;

inline constexpr char kSnapshotMagic[4] = {'E', 'M', 'B', '1'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

/// EMB1 layout: magic, u32 version, u32 rows, u32 cols, then rows*cols f64,
/// column-major, all little-endian.
void write_snapshot(const std::filesystem::path& path, const DenseMatrix& m);
DenseMatrix read_snapshot(const std::filesystem::path& path);

/// In-memory variants used by the file functions.
std::string encode_snapshot(const DenseMatrix& m);
DenseMatrix decode_snapshot(const std::string& bytes, const std::string& origin = "<memory>");

/// {"checkpoints": [0, 1, ...],
///  "datapoints": [{"id": "a", "files": ["a_0.emb", "a_1.emb", ...]}, ...]}
/// Files are relative to the manifest and hold one embedding vector each
/// (a single row or a single column).
struct CheckpointManifest {
  std::filesystem::path base_dir;
  std::vector<std::size_t> checkpoints;
  std::vector<std::string> ids;
  /// files[d][c] for datapoint d at checkpoints[c]
  std::vector<std::vector<std::filesystem::path>> files;
};

CheckpointManifest read_manifest(const std::filesystem::path& path);
std::vector<sensitivity::CheckpointSeries> load_series(const CheckpointManifest& manifest);

struct BenchRow {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t moments = 0;
  std::string orientation;
  double exact_seconds = 0.0;
  double ees_seconds = 0.0;
  double exact_value = 0.0;
  double ees_value = 0.0;
};

inline constexpr const char* kBenchHeader =
    "rows,cols,elements,M,exact_seconds,ees_seconds,exact_value,ees_value,orientation";

void write_bench_header(std::ostream& out);
void write_bench_row(std::ostream& out, const BenchRow& row);
/// Parses a CSV produced by write_bench_*; throws FormatError on a bad header or row.
std::vector<BenchRow> read_bench_csv(std::istream& in);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace sendkit::io
