#include <basisglasso/error.hpp>
#include <basisglasso/io.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <tuple>

namespace bgl::io {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary matrix format assumes a little-endian host");

std::string where(const fs::path& path, std::size_t line)
{
    return path.string() + ":" + std::to_string(line) + ": ";
}

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, pos - start)));
        if (pos == std::string::npos)
            break;
        start = pos + 1;
    }
    return out;
}

double parse_double(const std::string& s, const fs::path& path, std::size_t line)
{
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && *first == '+')
        ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || s.empty())
        throw DataError(where(path, line) + "cannot parse number '" + s + "'");
    return v;
}

long long parse_int(const std::string& s, const fs::path& path, std::size_t line)
{
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw DataError(where(path, line) + "cannot parse integer '" + s + "'");
    return v;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in)
{
    std::ifstream in(path, mode);
    if (!in)
        throw DataError("cannot open '" + path.string() + "' for reading");
    return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out)
{
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out)
        throw DataError("cannot open '" + path.string() + "' for writing");
    return out;
}

void finish(std::ofstream& out, const fs::path& path)
{
    out.flush();
    if (!out)
        throw DataError("I/O error while writing '" + path.string() + "'");
}

bool is_blank_or_comment(const std::string& line)
{
    const auto t = trim(line);
    return t.empty() || t[0] == '#';
}

} // namespace

std::string format_double(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc())
        return "nan";
    return std::string(buf, ptr);
}

Vector LocationTable::covariate(const std::string& name) const
{
    const auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
    if (it == covariate_names.end())
        throw ConfigError("locations table has no covariate column '" + name + "'");
    return covariates.col(it - covariate_names.begin());
}

LocationTable read_locations_csv(const fs::path& path)
{
    auto in = open_in(path);
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (!is_blank_or_comment(line)) {
            header = split(line);
            break;
        }
    }
    if (header.size() < 3 || header[0] != "id" || header[1] != "x" || header[2] != "y")
        throw DataError(where(path, lineno) + "expected header 'id,x,y[,covariates...]'");

    LocationTable t;
    t.covariate_names.assign(header.begin() + 3, header.end());
    std::vector<std::vector<double>> cov_rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank_or_comment(line))
            continue;
        const auto f = split(line);
        if (f.size() != header.size())
            throw DataError(where(path, lineno) + "expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(f.size()));
        t.ids.push_back(f[0]);
        t.points.push_back({parse_double(f[1], path, lineno), parse_double(f[2], path, lineno)});
        std::vector<double> row;
        for (std::size_t k = 3; k < f.size(); ++k)
            row.push_back(parse_double(f[k], path, lineno));
        cov_rows.push_back(std::move(row));
    }
    t.covariates.resize(static_cast<Index>(cov_rows.size()),
                        static_cast<Index>(t.covariate_names.size()));
    for (std::size_t i = 0; i < cov_rows.size(); ++i)
        for (std::size_t k = 0; k < cov_rows[i].size(); ++k)
            t.covariates(static_cast<Index>(i), static_cast<Index>(k)) = cov_rows[i][k];
    return t;
}

void write_locations_csv(const fs::path& path, const LocationTable& t)
{
    auto out = open_out(path);
    out << "id,x,y";
    for (const auto& n : t.covariate_names)
        out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < t.points.size(); ++i) {
        out << (i < t.ids.size() ? t.ids[i] : std::to_string(i)) << ','
            << format_double(t.points[i][0]) << ',' << format_double(t.points[i][1]);
        for (Index k = 0; k < t.covariates.cols(); ++k)
            out << ',' << format_double(t.covariates(static_cast<Index>(i), k));
        out << '\n';
    }
    finish(out, path);
}

void write_nodes_csv(const fs::path& path, const NodeGrid& grid)
{
    auto out = open_out(path);
    out << "node_id,x,y,radius,level\n";
    for (std::size_t j = 0; j < grid.size(); ++j)
        out << j << ',' << format_double(grid.nodes[j][0]) << ','
            << format_double(grid.nodes[j][1]) << ',' << format_double(grid.radius[j]) << ','
            << grid.level[j] << '\n';
    finish(out, path);
}

NodeGrid read_nodes_csv(const fs::path& path, bool geographic)
{
    auto in = open_in(path);
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    NodeGrid g;
    g.geographic = geographic;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank_or_comment(line))
            continue;
        const auto f = split(line);
        if (!header) {
            if (f.size() != 5 || f[0] != "node_id")
                throw DataError(where(path, lineno) + "expected header 'node_id,x,y,radius,level'");
            header = true;
            continue;
        }
        if (f.size() != 5)
            throw DataError(where(path, lineno) + "expected 5 fields");
        g.nodes.push_back({parse_double(f[1], path, lineno), parse_double(f[2], path, lineno)});
        const double r = parse_double(f[3], path, lineno);
        if (!(r > 0.0))
            throw DataError(where(path, lineno) + "node radius must be positive");
        g.radius.push_back(r);
        g.level.push_back(static_cast<int>(parse_int(f[4], path, lineno)));
    }
    return g;
}

void write_matrix_bin(const fs::path& path, const Matrix& a)
{
    auto out = open_out(path, std::ios::binary);
    const std::uint64_t header[4] = {matrix_magic, matrix_version,
                                     static_cast<std::uint64_t>(a.rows()),
                                     static_cast<std::uint64_t>(a.cols())};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = a;
    out.write(reinterpret_cast<const char*>(rm.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(rm.size())));
    finish(out, path);
}

Matrix read_matrix_bin(const fs::path& path)
{
    auto in = open_in(path, std::ios::binary);
    std::uint64_t header[4];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in)
        throw DataError(path.string() + ": truncated matrix header");
    if (header[0] != matrix_magic)
        throw DataError(path.string() + ": not a basisglasso binary matrix (bad magic)");
    if (header[1] != matrix_version)
        throw DataError(path.string() + ": unsupported matrix format version " +
                        std::to_string(header[1]));
    const auto rows = static_cast<Index>(header[2]);
    const auto cols = static_cast<Index>(header[3]);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    in.read(reinterpret_cast<char*>(rm.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(rm.size())));
    if (!in)
        throw DataError(path.string() + ": truncated matrix payload");
    return rm;
}

void write_matrix_csv(const fs::path& path, const Matrix& a)
{
    auto out = open_out(path);
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = 0; j < a.cols(); ++j)
            out << (j ? "," : "") << format_double(a(i, j));
        out << '\n';
    }
    finish(out, path);
}

Matrix read_matrix_csv(const fs::path& path)
{
    auto in = open_in(path);
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank_or_comment(line))
            continue;
        const auto f = split(line);
        std::vector<double> row;
        for (const auto& s : f)
            row.push_back(parse_double(s, path, lineno));
        if (!rows.empty() && row.size() != rows.front().size())
            throw DataError(where(path, lineno) + "ragged row: expected " +
                            std::to_string(rows.front().size()) + " fields");
        rows.push_back(std::move(row));
    }
    Matrix a(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            a(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    return a;
}

Matrix read_matrix(const fs::path& path)
{
    return path.extension() == ".csv" ? read_matrix_csv(path) : read_matrix_bin(path);
}

void write_triplets(const fs::path& path, const Matrix& q, double threshold)
{
    auto out = open_out(path);
    out << "# dim=" << q.rows() << " threshold=" << format_double(threshold) << '\n';
    out << "i,j,value\n";
    for (Index i = 0; i < q.rows(); ++i)
        for (Index j = i; j < q.cols(); ++j)
            if (i == j || std::abs(q(i, j)) > threshold)
                out << i << ',' << j << ',' << format_double(q(i, j)) << '\n';
    finish(out, path);
}

Matrix read_triplets(const fs::path& path)
{
    auto in = open_in(path);
    std::string line;
    std::size_t lineno = 0;
    Index dim = -1;
    bool header = false;
    std::vector<std::tuple<Index, Index, double>> entries;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty())
            continue;
        if (t[0] == '#') {
            const auto pos = t.find("dim=");
            if (pos != std::string::npos) {
                const auto end = t.find(' ', pos);
                dim = parse_int(t.substr(pos + 4, end == std::string::npos ? end : end - pos - 4),
                                path, lineno);
            }
            continue;
        }
        const auto f = split(t);
        if (!header) {
            if (f.size() != 3 || f[0] != "i")
                throw DataError(where(path, lineno) + "expected header 'i,j,value'");
            header = true;
            continue;
        }
        if (f.size() != 3)
            throw DataError(where(path, lineno) + "expected 3 fields");
        const auto i = static_cast<Index>(parse_int(f[0], path, lineno));
        const auto j = static_cast<Index>(parse_int(f[1], path, lineno));
        if (i < 0 || j < 0 || i > j)
            throw DataError(where(path, lineno) + "triplet indices must satisfy 0 <= i <= j");
        entries.emplace_back(i, j, parse_double(f[2], path, lineno));
    }
    if (dim < 0) {
        dim = 0;
        for (const auto& [i, j, v] : entries)
            dim = std::max(dim, j + 1);
    }
    Matrix q = Matrix::Zero(dim, dim);
    for (const auto& [i, j, v] : entries) {
        if (j >= dim)
            throw DataError(path.string() + ": triplet index exceeds declared dimension");
        q(i, j) = v;
        q(j, i) = v;
    }
    return q;
}

void write_text(const fs::path& path, const std::string& content)
{
    auto out = open_out(path);
    out << content;
    finish(out, path);
}

std::string read_text(const fs::path& path)
{
    auto in = open_in(path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

} // namespace bgl::io
