#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "atlas/hierarchy.hpp"
#include "atlas/mesh.hpp"
#include "test_util.hpp"

using namespace atlas;
using testutil::TempDir;

TEST_CASE("icosahedron is a valid unit-radius closed mesh") {
    const TriMesh m = icosahedron();
    CHECK(m.num_vertices() == 12);
    CHECK(m.num_faces() == 20);
    CHECK(m.num_edges() == 30);
    for (const auto& p : m.vertices) CHECK(p.norm() == doctest::Approx(1.0).epsilon(1e-12));
    const ValidationReport rep = validate_closed(m);
    CHECK(rep.ok());
    CHECK(2 * m.num_vertices() - m.num_faces() == 4);
    CHECK(signed_volume(m) > 0.0);
}

TEST_CASE("icosahedron adjacent faces are consistently oriented") {
    // Oracle: walk every face edge; each undirected edge must be traversed
    // once in each direction by its two adjacent faces.
    const TriMesh m = icosahedron();
    std::map<std::pair<int, int>, int> directed;
    for (const auto& f : m.faces)
        for (int k = 0; k < 3; ++k) ++directed[{f[k], f[(k + 1) % 3]}];
    for (const auto& [e, n] : directed) {
        CHECK(n == 1);
        CHECK(directed.count({e.second, e.first}) == 1);
    }
}

TEST_CASE("adjacency degrees") {
    SUBCASE("icosahedron: every vertex degree 5") {
        const Adjacency adj = build_adjacency(icosahedron());
        for (int i = 0; i < adj.num_vertices(); ++i) CHECK(adj.degree(i) == 5);
    }
    SUBCASE("tetrahedron: every degree 3, sum 12") {
        const Adjacency adj = build_adjacency(testutil::tetrahedron());
        int sum = 0;
        for (int i = 0; i < adj.num_vertices(); ++i) {
            CHECK(adj.degree(i) == 3);
            sum += adj.degree(i);
        }
        CHECK(sum == 12);
    }
    SUBCASE("icosphere level 1: 12 vertices of degree 5, 30 of degree 6") {
        const TriMesh m = icosphere(1);
        REQUIRE(m.num_vertices() == 42);
        const Adjacency adj = build_adjacency(m);
        const auto oracle = testutil::adjacency_oracle(m);
        int deg5 = 0, deg6 = 0;
        for (int i = 0; i < adj.num_vertices(); ++i) {
            const auto& nb = oracle.at(i);
            REQUIRE(adj.degree(i) == static_cast<int>(nb.size()));
            CHECK(std::set<int>(adj.neighbors[i].begin(), adj.neighbors[i].end()) == nb);
            if (adj.degree(i) == 5) ++deg5;
            if (adj.degree(i) == 6) ++deg6;
        }
        CHECK(deg5 == 12);
        CHECK(deg6 == 30);
    }
}

TEST_CASE("adjacency is symmetric with no self loops") {
    const TriMesh m = icosphere(2);
    const Adjacency adj = build_adjacency(m);
    long degree_sum = 0;
    for (int i = 0; i < adj.num_vertices(); ++i) {
        degree_sum += adj.degree(i);
        for (int j : adj.neighbors[i]) {
            CHECK(j != i);
            const auto& back = adj.neighbors[j];
            CHECK(std::binary_search(back.begin(), back.end(), i));
        }
    }
    CHECK(degree_sum == 3L * m.num_faces());  // 2e = 3f
}

TEST_CASE("validate_closed") {
    SUBCASE("icosphere level 3 passes with 642 vertices / 1280 faces") {
        const TriMesh m = icosphere(3);
        CHECK(m.num_vertices() == 642);
        CHECK(m.num_faces() == 1280);
        CHECK(2 * 642 - 1280 == 4);
        CHECK(validate_closed(m).ok());
    }
    SUBCASE("removing one face yields an open-edge failure") {
        TriMesh m = icosahedron();
        m.faces.pop_back();
        const ValidationReport rep = validate_closed(m);
        CHECK_FALSE(rep.ok());
        CHECK_FALSE(rep.manifold);
        CHECK(rep.offending_edges.size() == 3);
    }
    SUBCASE("degenerate face is rejected") {
        TriMesh m = icosahedron();
        m.faces[0] = {1, 1, 2};
        CHECK_FALSE(validate_closed(m).indices_ok);
    }
    SUBCASE("flipped face breaks orientation") {
        TriMesh m = icosahedron();
        std::swap(m.faces[0][0], m.faces[0][1]);
        const ValidationReport rep = validate_closed(m);
        CHECK_FALSE(rep.oriented);
        CHECK_FALSE(rep.ok());
    }
}

TEST_CASE("OFF round trip") {
    TempDir dir("off");
    SUBCASE("icosahedron reloads with identical faces") {
        const TriMesh m = icosahedron();
        const auto path = dir.path() / "ico.off";
        save_mesh(m, path, MeshFormat::Off);
        const TriMesh back = load_mesh(path, MeshFormat::Off);
        CHECK(back.faces == m.faces);
        CHECK(2 * back.num_vertices() - back.num_faces() == 4);
    }
    SUBCASE("icosphere level 2 round-trips bit-identically") {
        const TriMesh m = icosphere(2);
        REQUIRE(m.num_vertices() == 162);
        REQUIRE(m.num_faces() == 320);
        const auto a = dir.path() / "a.off";
        const auto b = dir.path() / "b.off";
        save_mesh(m, a, MeshFormat::Off);
        save_mesh(load_mesh(a, MeshFormat::Off), b, MeshFormat::Off);
        CHECK(testutil::read_file(a) == testutil::read_file(b));
    }
    SUBCASE("642-vertex icosphere: reload deviation below 1e-6 of bbox diagonal") {
        const TriMesh m = icosphere(3);
        const auto path = dir.path() / "sphere.off";
        save_mesh(m, path, MeshFormat::Off);
        const TriMesh back = load_mesh(path, MeshFormat::Off);
        REQUIRE(back.num_vertices() == m.num_vertices());
        const double diag = 2.0 * std::sqrt(3.0);  // unit sphere bbox
        double worst = 0.0;
        for (int i = 0; i < m.num_vertices(); ++i)
            worst = std::max(worst, (m.vertices[i] - back.vertices[i]).norm());
        CHECK(worst < 1e-6 * diag);
    }
}

TEST_CASE("OBJ round trip preserves faces and vertex order") {
    TempDir dir("obj");
    const TriMesh m = icosphere(1);
    const auto path = dir.path() / "m.obj";
    save_mesh(m, path, MeshFormat::Obj);
    const TriMesh back = load_mesh(path, MeshFormat::Obj);
    CHECK(back.faces == m.faces);
    for (int i = 0; i < m.num_vertices(); ++i)
        CHECK((m.vertices[i] - back.vertices[i]).norm() < 1e-8);
}

TEST_CASE("malformed input is rejected") {
    TempDir dir("bad");
    SUBCASE("edge used by three faces") {
        // Tetrahedron plus a duplicate of its first face.
        testutil::write_file(dir.path() / "bad.off",
                             "OFF\n4 5 6\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n"
                             "3 0 1 2\n3 0 3 1\n3 0 2 3\n3 1 3 2\n3 0 1 2\n");
        CHECK_THROWS_WITH_AS(load_mesh(dir.path() / "bad.off", MeshFormat::Off),
                             doctest::Contains("offending edges"), std::runtime_error);
    }
    SUBCASE("open mesh") {
        testutil::write_file(dir.path() / "open.off",
                             "OFF\n4 3 0\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n"
                             "3 0 1 2\n3 0 3 1\n3 0 2 3\n");
        CHECK_THROWS_AS(load_mesh(dir.path() / "open.off", MeshFormat::Off), std::runtime_error);
    }
    SUBCASE("parse failure") {
        testutil::write_file(dir.path() / "junk.off", "OFF\n4 4 0\n1 1 x\n");
        CHECK_THROWS_AS(load_mesh(dir.path() / "junk.off", MeshFormat::Off), std::runtime_error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_mesh(dir.path() / "nope.off", MeshFormat::Off), std::runtime_error);
    }
}

TEST_CASE("PLY with per-vertex color") {
    TempDir dir("ply");
    const TriMesh m = testutil::tetrahedron();
    std::vector<std::array<unsigned char, 3>> colors = {
        {255, 0, 0}, {0, 255, 0}, {0, 0, 255}, {10, 20, 30}};
    const auto path = dir.path() / "m.ply";
    save_mesh_ply(m, path, colors);
    const std::string body = testutil::read_file(path);
    CHECK(body.find("ply\nformat ascii 1.0\n") == 0);
    CHECK(body.find("element vertex 4") != std::string::npos);
    CHECK(body.find("property uchar red") != std::string::npos);
    CHECK(body.find("element face 4") != std::string::npos);
    CHECK(body.find("10 20 30") != std::string::npos);

    SUBCASE("color length mismatch throws") {
        colors.pop_back();
        CHECK_THROWS_AS(save_mesh_ply(m, dir.path() / "bad.ply", colors), std::invalid_argument);
    }
}

TEST_CASE("save to unwritable path throws") {
    const TriMesh m = testutil::tetrahedron();
    CHECK_THROWS_AS(save_mesh(m, "/nonexistent_dir_xyz/m.off", MeshFormat::Off), std::runtime_error);
}
