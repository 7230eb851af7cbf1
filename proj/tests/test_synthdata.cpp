#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "atlas/hierarchy.hpp"
#include "atlas/synthdata.hpp"
#include "test_util.hpp"

using namespace atlas;
using testutil::TempDir;

namespace {

TemplateHierarchy small_hierarchy() {
    TriMesh base = icosahedron();
    for (auto& p : base.vertices) p = p * 80.0;
    return build_hierarchy(base, 2, true);  // 12/42
}

DeformConfig default_deform() {
    DeformConfig dc;
    dc.scale_sigma = 0.15;
    dc.max_rotation_deg = 20.0;
    dc.num_waves = 8;
    dc.wave_amplitude = 0.1;
    dc.max_translation = 0.1;
    return dc;
}

}  // namespace

TEST_CASE("generate_cohort") {
    const TemplateHierarchy h = small_hierarchy();

    SUBCASE("same seed is bitwise reproducible, different seed differs") {
        const Cohort a = generate_cohort(h, 8, 42, default_deform());
        const Cohort b = generate_cohort(h, 8, 42, default_deform());
        REQUIRE(a.num_cases() == b.num_cases());
        for (int i = 0; i < a.num_cases(); ++i) CHECK(a.cases[i].data == b.cases[i].data);
        const Cohort c = generate_cohort(h, 8, 43, default_deform());
        CHECK(a.cases[0].data != c.cases[0].data);
    }
    SUBCASE("zero-amplitude deformation reproduces the template exactly") {
        DeformConfig zero;
        zero.scale_sigma = 0.0;
        zero.max_rotation_deg = 0.0;
        zero.num_waves = 0;
        zero.wave_amplitude = 0.0;
        zero.max_translation = 0.0;
        const Cohort cohort = generate_cohort(h, 3, 7, zero);
        const Mat tpl = normalize_vertices(h.fine(), h.fine().unit_scale);
        for (const auto& c : cohort.cases) CHECK(c.data == tpl.data);
    }
    SUBCASE("124 cases are distinct and all pass validation") {
        const Cohort cohort = generate_cohort(h, 124, 11, default_deform());
        REQUIRE(cohort.num_cases() == 124);
        std::set<std::vector<double>> unique;
        for (int i = 0; i < cohort.num_cases(); ++i) {
            unique.insert(cohort.cases[i].data);
            CHECK(validate_closed(cohort.mesh_mm(i)).ok());
            for (const double v : cohort.cases[i].data) {
                CHECK(v >= -1.0);
                CHECK(v <= 1.0);
            }
            CHECK(cohort.mesh_mm(i).faces == h.fine().faces);  // shared topology
        }
        CHECK(unique.size() == 124);
    }
    SUBCASE("fewer than 3 cases rejected") {
        CHECK_THROWS_AS(generate_cohort(h, 2, 1, default_deform()), std::invalid_argument);
    }
}

TEST_CASE("normalize / denormalize") {
    SUBCASE("divide by 256") {
        TriMesh m;
        m.vertices = {{128.0, -64.0, 0.0}, {0.0, 0.0, 0.0}};
        m.faces = {};
        const Mat n = normalize_vertices(m, 256.0);
        CHECK(n(0, 0) == 0.5);
        CHECK(n(0, 1) == -0.25);
        CHECK(n(0, 2) == 0.0);
        CHECK(n(1, 0) == 0.0);
    }
    SUBCASE("round trip is exact to 1e-12") {
        const TemplateHierarchy h = small_hierarchy();
        const Cohort cohort = generate_cohort(h, 4, 3, default_deform());
        const TriMesh mm = cohort.mesh_mm(1);
        const Mat back = normalize_vertices(mm, cohort.unit_scale);
        for (size_t i = 0; i < back.size(); ++i)
            CHECK(std::abs(back.data[i] - cohort.cases[1].data[i]) < 1e-12);
    }
    SUBCASE("out-of-range coordinate rejected") {
        TriMesh m;
        m.vertices = {{300.0, 0.0, 0.0}};
        CHECK_THROWS_AS(normalize_vertices(m, 256.0), std::invalid_argument);
    }
}

TEST_CASE("split_cohort") {
    const TemplateHierarchy h = small_hierarchy();
    Cohort cohort = generate_cohort(h, 124, 5, default_deform());

    SUBCASE("124 cases with 86:19:19 ratios split 86/19/19") {
        split_cohort(cohort, {86.0 / 124.0, 19.0 / 124.0, 19.0 / 124.0}, 9);
        CHECK(cohort.indices(Split::Train).size() == 86);
        CHECK(cohort.indices(Split::Validation).size() == 19);
        CHECK(cohort.indices(Split::Test).size() == 19);
        // disjoint and exhaustive by construction of indices()
        std::set<int> all;
        for (const Split s : {Split::Train, Split::Validation, Split::Test})
            for (const int i : cohort.indices(s)) CHECK(all.insert(i).second);
        CHECK(all.size() == 124);
    }
    SUBCASE("empty split rejected") {
        CHECK_THROWS_AS(split_cohort(cohort, {1.0, 0.0, 0.0}, 9), std::invalid_argument);
    }
    SUBCASE("ratios must sum to 1") {
        CHECK_THROWS_AS(split_cohort(cohort, {0.5, 0.2, 0.2}, 9), std::invalid_argument);
    }
    SUBCASE("same seed gives the same assignment") {
        Cohort other = cohort;
        split_cohort(cohort, {0.7, 0.15, 0.15}, 13);
        split_cohort(other, {0.7, 0.15, 0.15}, 13);
        CHECK(cohort.split == other.split);
    }
}

TEST_CASE("cohort persistence round trip") {
    const TemplateHierarchy h = small_hierarchy();
    Cohort cohort = generate_cohort(h, 6, 77, default_deform());
    split_cohort(cohort, {0.5, 0.25, 0.25}, 3);

    TempDir dir("cohort");
    save_cohort(cohort, dir.path());
    const Cohort back = load_cohort(dir.path());

    REQUIRE(back.num_cases() == cohort.num_cases());
    CHECK(back.ids == cohort.ids);
    CHECK(back.split == cohort.split);
    CHECK(back.faces == cohort.faces);
    CHECK(back.unit_scale == cohort.unit_scale);
    CHECK(back.seed == cohort.seed);
    CHECK(back.deform.num_waves == cohort.deform.num_waves);
    for (int i = 0; i < cohort.num_cases(); ++i)
        for (size_t j = 0; j < cohort.cases[i].size(); ++j)
            CHECK(back.cases[i].data[j] ==
                  doctest::Approx(cohort.cases[i].data[j]).epsilon(1e-7));
}
