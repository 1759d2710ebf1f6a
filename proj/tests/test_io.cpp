#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <basisglasso/error.hpp>
#include <basisglasso/io.hpp>

#include "support.hpp"

#include <filesystem>
#include <fstream>

using namespace bgl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / "basisglasso_io_test";
    fs::create_directories(dir);
    return dir / name;
}

void write_raw(const fs::path& p, const std::string& s)
{
    std::ofstream(p) << s;
}

std::string error_of(auto&& f)
{
    try {
        f();
    } catch (const DataError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("binary matrix round trip")
{
    auto rng = make_rng(71);
    const Matrix a = test::random_matrix(7, 3, rng);
    const auto p = scratch("a.bin");
    io::write_matrix_bin(p, a);
    CHECK(fs::file_size(p) == 32 + 7 * 3 * 8);
    CHECK(io::read_matrix_bin(p) == a);
    CHECK(io::read_matrix(p) == a);

    write_raw(p, "garbage that is long enough to pass the header size check");
    CHECK_THROWS_AS(io::read_matrix_bin(p), DataError);
    write_raw(p, "short");
    CHECK_THROWS_AS(io::read_matrix_bin(p), DataError);
}

TEST_CASE("csv matrix round trip")
{
    auto rng = make_rng(72);
    const Matrix a = test::random_matrix(4, 5, rng);
    const auto p = scratch("a.csv");
    io::write_matrix_csv(p, a);
    CHECK(io::read_matrix(p) == a);

    write_raw(p, "1,2\n3,4\n5\n");
    const auto msg = error_of([&] { io::read_matrix_csv(p); });
    CHECK(msg.find(":3:") != std::string::npos);
    write_raw(p, "1,2\n# note\n3,x\n");
    CHECK(error_of([&] { io::read_matrix_csv(p); }).find(":3:") != std::string::npos);
}

TEST_CASE("shortest round-trip formatting")
{
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0, 0.0})
        CHECK(std::stod(io::format_double(v)) == v);
    CHECK(io::format_double(0.1) == "0.1");
}

TEST_CASE("triplets")
{
    Matrix q(3, 3);
    q << 2, 0.001, -0.5, 0.001, 3, 0, -0.5, 0, 1;
    const auto p = scratch("q.csv");
    io::write_triplets(p, q, 0.0);
    CHECK(io::read_triplets(p) == q);
    io::write_triplets(p, q, 0.01);
    Matrix thresholded = q;
    thresholded(0, 1) = thresholded(1, 0) = 0.0;
    CHECK(io::read_triplets(p) == thresholded);

    // dimension comes from the comment even when trailing rows are empty
    io::write_triplets(p, Matrix::Identity(4, 4) * 0.0, 1.0);
    CHECK(io::read_triplets(p).rows() == 4);

    write_raw(p, "i,j,value\n0,0,1\n1,0,2\n");
    CHECK(error_of([&] { io::read_triplets(p); }).find(":3:") != std::string::npos);
}

TEST_CASE("locations table")
{
    io::LocationTable t;
    t.ids = {"a", "b"};
    t.points = {{0.5, 1.5}, {2.0, -1.0}};
    t.covariate_names = {"elev"};
    t.covariates = Matrix(2, 1);
    t.covariates << 10, 20;
    const auto p = scratch("loc.csv");
    io::write_locations_csv(p, t);
    const auto r = io::read_locations_csv(p);
    CHECK(r.ids == t.ids);
    CHECK(r.points == t.points);
    CHECK(r.covariate("elev") == t.covariates.col(0));
    CHECK_THROWS_AS(r.covariate("slope"), ConfigError);

    write_raw(p, "id,x,y\n1,0,0\n2,0\n");
    CHECK(error_of([&] { io::read_locations_csv(p); }).find(":3:") != std::string::npos);
}

TEST_CASE("node table")
{
    const auto g = build_multires_grid({}, 2, 2, 2.5);
    const auto p = scratch("nodes.csv");
    io::write_nodes_csv(p, g);
    const auto r = io::read_nodes_csv(p);
    REQUIRE(r.size() == g.size());
    CHECK(r.nodes == g.nodes);
    CHECK(r.radius == g.radius);
    CHECK(r.level == g.level);

    write_raw(p, "node_id,x,y,radius,level\n0,0,0,-1,1\n");
    CHECK(error_of([&] { io::read_nodes_csv(p); }).find(":2:") != std::string::npos);
}

TEST_CASE("missing file")
{
    CHECK_THROWS_AS(io::read_text(scratch("does_not_exist.txt")), DataError);
}
