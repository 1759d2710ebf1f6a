#pragma once

#include <basisglasso/basis.hpp>
#include <basisglasso/linalg.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bgl::io {

namespace fs = std::filesystem;

/// Locations table: id, x, y, then optional named covariate columns.
struct LocationTable
{
    std::vector<std::string> ids;
    std::vector<Point> points;
    std::vector<std::string> covariate_names;
    Matrix covariates;  // n x (number of covariates)

    Vector covariate(const std::string& name) const;
};

LocationTable read_locations_csv(const fs::path& path);
void write_locations_csv(const fs::path& path, const LocationTable& table);

void write_nodes_csv(const fs::path& path, const NodeGrid& grid);
NodeGrid read_nodes_csv(const fs::path& path, bool geographic = false);

/// Flat binary matrix: four little-endian uint64 header words
/// (magic, version, rows, cols) followed by row-major float64 values.
inline constexpr std::uint64_t matrix_magic = 0x314d4c4753414221ull;  // "!BASGLM1"
inline constexpr std::uint64_t matrix_version = 1;

void write_matrix_bin(const fs::path& path, const Matrix& a);
Matrix read_matrix_bin(const fs::path& path);

/// Plain numeric CSV without header, one matrix row per line.
void write_matrix_csv(const fs::path& path, const Matrix& a);
Matrix read_matrix_csv(const fs::path& path);

/// Reads .bin or .csv depending on the extension.
Matrix read_matrix(const fs::path& path);

/// Symmetric triplets (i, j, value) with i <= j. The leading comment line
/// records the dimension and the off-diagonal magnitude threshold; diagonal
/// entries are always written.
void write_triplets(const fs::path& path, const Matrix& q, double threshold);
Matrix read_triplets(const fs::path& path);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

void write_text(const fs::path& path, const std::string& content);
std::string read_text(const fs::path& path);

} // namespace bgl::io
