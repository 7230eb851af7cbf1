#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "atlas/hierarchy.hpp"
#include "atlas/rng.hpp"
#include "test_util.hpp"

using namespace atlas;
using testutil::TempDir;

namespace {

Mat random_mat(int rows, int cols, Rng& rng) {
    Mat m(rows, cols);
    for (auto& v : m.data) v = rng.uniform(-1.0, 1.0);
    return m;
}

double max_abs_diff(const Mat& a, const Mat& b) {
    REQUIRE(a.same_shape(b));
    double worst = 0.0;
    for (size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
    return worst;
}

Mat vertices_as_mat(const TriMesh& m) {
    Mat f(m.num_vertices(), 3);
    for (int i = 0; i < m.num_vertices(); ++i) {
        f(i, 0) = m.vertices[i].x;
        f(i, 1) = m.vertices[i].y;
        f(i, 2) = m.vertices[i].z;
    }
    return f;
}

}  // namespace

TEST_CASE("subdivide_loop topology") {
    const TriMesh ico = icosahedron();
    const auto [fine, corr] = subdivide_loop(ico, false);
    CHECK(fine.num_vertices() == 42);
    CHECK(fine.num_faces() == 80);
    CHECK(corr.v_low == 12);
    CHECK(corr.v_high == 42);
    CHECK(corr.num_inserted() == 30);
    CHECK(validate_closed(fine).ok());
    for (const auto& [a, b] : corr.inserted) CHECK(a < b);
    // every coarse edge appears exactly once
    std::set<std::pair<int, int>> seen;
    for (const auto& [a, b] : corr.inserted) CHECK(seen.insert({a, b}).second);
    CHECK(seen.size() == 30);
}

TEST_CASE("subdivide_loop without smoothing inserts exact midpoints") {
    const TriMesh ico = icosahedron();
    const auto [fine, corr] = subdivide_loop(ico, false);
    for (int i = 0; i < corr.v_low; ++i) {
        CHECK(fine.vertices[i].x == ico.vertices[i].x);
        CHECK(fine.vertices[i].y == ico.vertices[i].y);
        CHECK(fine.vertices[i].z == ico.vertices[i].z);
    }
    for (int e = 0; e < corr.num_inserted(); ++e) {
        const auto [a, b] = corr.inserted[e];
        const Vec3 mid = {0.5 * ico.vertices[a].x + 0.5 * ico.vertices[b].x,
                          0.5 * ico.vertices[a].y + 0.5 * ico.vertices[b].y,
                          0.5 * ico.vertices[a].z + 0.5 * ico.vertices[b].z};
        const Vec3& p = fine.vertices[corr.v_low + e];
        CHECK(p.x == mid.x);
        CHECK(p.y == mid.y);
        CHECK(p.z == mid.z);
    }
}

TEST_CASE("loop smoothing keeps the unit icosahedron strictly inside the sphere") {
    // Loop weights are strict convex combinations of non-collinear points on
    // the sphere, so every output vertex must be strictly interior.
    const auto [fine, corr] = subdivide_loop(icosahedron(), true);
    (void)corr;
    REQUIRE(fine.num_vertices() == 42);
    for (const auto& p : fine.vertices) CHECK(p.norm() < 1.0);
    CHECK(validate_closed(fine).ok());
}

TEST_CASE("subdivision of an open mesh is rejected") {
    TriMesh open = icosahedron();
    open.faces.pop_back();
    CHECK_THROWS_AS(subdivide_loop(open, false), std::runtime_error);
}

TEST_CASE("build_hierarchy bookkeeping") {
    SUBCASE("3 levels from the icosahedron: 12/42/162 vertices") {
        const TemplateHierarchy h = build_hierarchy(icosahedron(), 3, true);
        REQUIRE(h.num_levels() == 3);
        CHECK(h.levels[0].num_vertices() == 12);
        CHECK(h.levels[1].num_vertices() == 42);
        CHECK(h.levels[2].num_vertices() == 162);
    }
    SUBCASE("4 levels: face counts 20/80/320/1280") {
        const TemplateHierarchy h = build_hierarchy(icosahedron(), 4, true);
        REQUIRE(h.num_levels() == 4);
        const int expected[] = {20, 80, 320, 1280};
        for (int k = 0; k < 4; ++k) {
            CHECK(h.levels[k].num_faces() == expected[k]);
            CHECK(validate_closed(h.levels[k]).ok());
        }
        for (int k = 0; k + 1 < 4; ++k) {
            CHECK(h.levels[k + 1].num_faces() == 4 * h.levels[k].num_faces());
            CHECK(h.levels[k + 1].num_vertices() ==
                  h.levels[k].num_vertices() + h.levels[k].num_edges());
        }
    }
    SUBCASE("2 levels: one correspondence") {
        const TemplateHierarchy h = build_hierarchy(testutil::tetrahedron(), 2, false);
        CHECK(h.corr.size() == 1);
    }
    SUBCASE("fewer than 2 levels rejected") {
        CHECK_THROWS_AS(build_hierarchy(icosahedron(), 1, true), std::invalid_argument);
    }
}

TEST_CASE("after one subdivision every inherited vertex has an all-inserted 1-ring") {
    const auto [fine, corr] = subdivide_loop(icosphere(1), true);
    const Adjacency adj = build_adjacency(fine);
    for (int i = 0; i < corr.v_low; ++i)
        for (int j : adj.neighbors[i]) CHECK(j >= corr.v_low);
}

TEST_CASE("pool_features") {
    const TriMesh coarse = icosahedron();
    const auto [fine, corr] = subdivide_loop(coarse, false);
    const Adjacency adj_high = build_adjacency(fine);

    SUBCASE("constant feature stays constant") {
        Mat f(corr.v_high, 2);
        for (auto& v : f.data) v = 3.25;
        const Mat out = pool_features(f, adj_high, corr);
        REQUIRE(out.rows == corr.v_low);
        for (const auto v : out.data) CHECK(v == doctest::Approx(3.25).epsilon(1e-15));
    }
    SUBCASE("degree-5 vertex with self 6 and zero neighbors pools to 1") {
        Mat f(corr.v_high, 1);
        f(0, 0) = 6.0;
        REQUIRE(adj_high.degree(0) == 5);
        const Mat out = pool_features(f, adj_high, corr);
        CHECK(out(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("matches the brute-force 1-ring average oracle") {
        const Mat f = vertices_as_mat(fine);
        const Mat out = pool_features(f, adj_high, corr);
        const auto oracle_nb = testutil::adjacency_oracle(fine);
        for (int i = 0; i < corr.v_low; ++i) {
            for (int c = 0; c < 3; ++c) {
                double sum = f(i, c);
                for (int j : oracle_nb.at(i)) sum += f(j, c);
                const double expected = sum / (static_cast<double>(oracle_nb.at(i).size()) + 1.0);
                CHECK(out(i, c) == doctest::Approx(expected).epsilon(1e-12));
            }
        }
    }
    SUBCASE("shape mismatch throws") {
        Mat f(corr.v_high - 1, 3);
        CHECK_THROWS_AS(pool_features(f, adj_high, corr), std::invalid_argument);
    }
}

TEST_CASE("unpool_features") {
    const TriMesh coarse = icosahedron();
    const auto [fine, corr] = subdivide_loop(coarse, false);

    SUBCASE("inserted value is the midpoint of its endpoints") {
        Mat f(corr.v_low, 1);
        const auto [a, b] = corr.inserted[0];
        f(a, 0) = 1.0;
        f(b, 0) = 3.0;
        const Mat out = unpool_features(f, corr);
        CHECK(out(corr.v_low + 0, 0) == 2.0);
        CHECK(out(a, 0) == 1.0);
        CHECK(out(b, 0) == 3.0);
    }
    SUBCASE("constant stays constant") {
        Mat f(corr.v_low, 2);
        for (auto& v : f.data) v = -0.75;
        const Mat out = unpool_features(f, corr);
        for (const auto v : out.data) CHECK(v == -0.75);
    }
    SUBCASE("coarse coordinates unpool to the unsmoothed subdivision exactly") {
        const Mat f = vertices_as_mat(coarse);
        const Mat out = unpool_features(f, corr);
        const Mat expect = vertices_as_mat(fine);
        CHECK(max_abs_diff(out, expect) == 0.0);
    }
    SUBCASE("shape mismatch throws") {
        Mat f(corr.v_low + 1, 3);
        CHECK_THROWS_AS(unpool_features(f, corr), std::invalid_argument);
    }
}

TEST_CASE("pooling and unpooling matrices") {
    const auto [fine, corr] = subdivide_loop(icosphere(1), true);
    const Adjacency adj_high = build_adjacency(fine);
    const SparseMatrix pool = pooling_matrix(corr, adj_high);
    const SparseMatrix unpool = unpooling_matrix(corr);
    Rng rng(2024);

    SUBCASE("rows sum to 1 within 1e-15") {
        for (int r = 0; r < pool.rows(); ++r) CHECK(std::abs(pool.row_sum(r) - 1.0) <= 1e-15);
        for (int r = 0; r < unpool.rows(); ++r) CHECK(std::abs(unpool.row_sum(r) - 1.0) <= 1e-15);
    }
    SUBCASE("matrix application reproduces the feature maps bitwise") {
        const Mat f = random_mat(corr.v_high, 5, rng);
        CHECK(max_abs_diff(pool.apply(f), pool_features(f, adj_high, corr)) == 0.0);
        const Mat g = random_mat(corr.v_low, 5, rng);
        CHECK(max_abs_diff(unpool.apply(g), unpool_features(g, corr)) == 0.0);
    }
    SUBCASE("matrix application matches its own densification") {
        const Mat f = random_mat(corr.v_high, 3, rng);
        CHECK(max_abs_diff(pool.apply(f), matmul_dense(pool.to_dense(), f)) == 0.0);
    }
    SUBCASE("unpooling matrix has exactly v_low single-1 rows") {
        int singles = 0;
        const auto& rp = unpool.row_ptr();
        for (int r = 0; r < unpool.rows(); ++r) {
            if (rp[r + 1] - rp[r] == 1) {
                CHECK(unpool.values()[rp[r]] == 1.0);
                ++singles;
            }
        }
        CHECK(singles == corr.v_low);
    }
}

TEST_CASE("pooling/unpooling are linear and translation equivariant") {
    const auto [fine, corr] = subdivide_loop(icosphere(1), true);
    const Adjacency adj_high = build_adjacency(fine);
    Rng rng(7);

    const Mat f = random_mat(corr.v_high, 3, rng);
    const Mat g = random_mat(corr.v_high, 3, rng);
    const double a = 1.7, b = -0.4;

    SUBCASE("linearity of pooling") {
        Mat combo(f.rows, f.cols);
        for (size_t i = 0; i < f.size(); ++i) combo.data[i] = a * f.data[i] + b * g.data[i];
        const Mat lhs = pool_features(combo, adj_high, corr);
        const Mat pf = pool_features(f, adj_high, corr);
        const Mat pg = pool_features(g, adj_high, corr);
        Mat rhs(pf.rows, pf.cols);
        for (size_t i = 0; i < pf.size(); ++i) rhs.data[i] = a * pf.data[i] + b * pg.data[i];
        CHECK(max_abs_diff(lhs, rhs) <= 1e-12);
    }
    SUBCASE("translation equivariance (rows sum to 1)") {
        const double t[3] = {0.3, -0.7, 0.2};
        Mat shifted = f;
        for (int i = 0; i < f.rows; ++i)
            for (int c = 0; c < 3; ++c) shifted(i, c) += t[c];
        const Mat lhs = pool_features(shifted, adj_high, corr);
        Mat rhs = pool_features(f, adj_high, corr);
        for (int i = 0; i < rhs.rows; ++i)
            for (int c = 0; c < 3; ++c) rhs(i, c) += t[c];
        CHECK(max_abs_diff(lhs, rhs) <= 1e-12);

        const Mat coarse_f = random_mat(corr.v_low, 3, rng);
        Mat coarse_shift = coarse_f;
        for (int i = 0; i < coarse_f.rows; ++i)
            for (int c = 0; c < 3; ++c) coarse_shift(i, c) += t[c];
        const Mat ulhs = unpool_features(coarse_shift, corr);
        Mat urhs = unpool_features(coarse_f, corr);
        for (int i = 0; i < urhs.rows; ++i)
            for (int c = 0; c < 3; ++c) urhs(i, c) += t[c];
        CHECK(max_abs_diff(ulhs, urhs) <= 1e-12);
    }
    SUBCASE("pool(unpool(F)) restores a constant F") {
        Mat c(corr.v_low, 2);
        for (auto& v : c.data) v = 0.5;
        const Mat round = pool_features(unpool_features(c, corr), adj_high, corr);
        for (const auto v : round.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-14));
    }
}

TEST_CASE("normalized adjacency rows") {
    const TriMesh m = icosahedron();
    const SparseMatrix ahat = normalized_adjacency(build_adjacency(m));
    // regular degree-5 graph: every row sums to exactly (d+1) / (d+1) = 1
    for (int r = 0; r < ahat.rows(); ++r) CHECK(std::abs(ahat.row_sum(r) - 1.0) <= 1e-14);
}

TEST_CASE("decimate") {
    SUBCASE("icosphere 642 -> target 162 stays a valid closed mesh") {
        const TriMesh m = decimate(icosphere(3), 162);
        CHECK(validate_closed(m).ok());
        CHECK(m.num_vertices() >= 160);
        CHECK(m.num_vertices() <= 164);
    }
    SUBCASE("target 4 on a tetrahedron is the identity") {
        const TriMesh t = testutil::tetrahedron();
        const TriMesh m = decimate(t, 4);
        CHECK(m.num_vertices() == 4);
        CHECK(m.faces == t.faces);
    }
    SUBCASE("icosphere 42 -> target 12 keeps the Euler relation") {
        const TriMesh m = decimate(icosphere(1), 12);
        CHECK(2 * m.num_vertices() - m.num_faces() == 4);
        CHECK(validate_closed(m).ok());
    }
    SUBCASE("target below 4 rejected") {
        CHECK_THROWS_AS(decimate(icosphere(1), 3), std::invalid_argument);
    }
    SUBCASE("decimated-then-subdivided template hits 738 vertices / 1472 faces") {
        const TriMesh base = decimate(icosphere(3), 186);
        REQUIRE(base.num_vertices() == 186);
        const auto [fine, corr] = subdivide_loop(base, true);
        (void)corr;
        CHECK(fine.num_vertices() == 738);
        CHECK(fine.num_faces() == 1472);
        CHECK(2 * 738 - 1472 == 4);
        CHECK(validate_closed(fine).ok());
    }
}

TEST_CASE("hierarchy persistence round trip") {
    TempDir dir("hier");
    const TemplateHierarchy h = build_hierarchy(icosahedron(), 3, true);
    save_hierarchy(h, dir.path());
    const TemplateHierarchy back = load_hierarchy(dir.path());
    REQUIRE(back.num_levels() == 3);
    for (int k = 0; k < 3; ++k) {
        CHECK(back.levels[k].faces == h.levels[k].faces);
        for (int i = 0; i < h.levels[k].num_vertices(); ++i)
            CHECK((back.levels[k].vertices[i] - h.levels[k].vertices[i]).norm() < 1e-7);
    }
    for (size_t k = 0; k < h.corr.size(); ++k) {
        CHECK(back.corr[k].v_low == h.corr[k].v_low);
        CHECK(back.corr[k].v_high == h.corr[k].v_high);
        CHECK(back.corr[k].inserted == h.corr[k].inserted);
    }
}
