// synthdata.hpp — synthetic organ-like cohorts: randomized smooth
// deformations of a template hierarchy's fine mesh, normalization into
// [-1, 1] model coordinates, and train/validation/test splitting.
#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "atlas/hierarchy.hpp"
#include "atlas/linalg.hpp"
#include "atlas/mesh.hpp"

namespace atlas {

enum class Split { Train, Validation, Test };

std::string to_string(Split s);
Split split_from_string(const std::string& name);

struct DeformConfig {
    double scale_sigma = 0.15;      // per-axis log-normal scale spread
    double max_rotation_deg = 20.0; // per-axis rotation bound
    int num_waves = 8;              // low-frequency sinusoidal displacements
    double wave_amplitude = 0.1;    // fraction of the template bbox diagonal
    double max_translation = 0.1;   // normalized units (times unit_scale mm)
};

// Vertex-corresponded mesh set in normalized coordinates. All cases share the
// template's fine-level topology.
struct Cohort {
    std::vector<std::string> ids;
    std::vector<Mat> cases;  // v_fine x 3, coordinates in [-1, 1]
    std::vector<Split> split;
    std::vector<std::array<int, 3>> faces;
    double unit_scale = 256.0;
    uint64_t seed = 0;
    DeformConfig deform;

    int num_cases() const { return static_cast<int>(cases.size()); }
    int vertex_count() const { return cases.empty() ? 0 : cases.front().rows; }
    std::vector<int> indices(Split s) const;
    int index_of(const std::string& id) const;

    // Case rebuilt as a millimetre-space mesh.
    TriMesh mesh_mm(int idx) const;
};

// Each case is the fine template warped by anisotropic scaling, a bounded
// rotation, a sum of low-frequency sinusoidal displacement fields and a small
// translation; degenerate outputs are retried with the next sub-seed (at most
// 10 attempts). Pure function of (hierarchy, n_cases, seed, cfg).
Cohort generate_cohort(const TemplateHierarchy& h, int n_cases, uint64_t seed,
                       const DeformConfig& cfg);

// mm -> normalized units; throws if any |coordinate| exceeds unit_scale.
Mat normalize_vertices(const TriMesh& mesh, double unit_scale);

// normalized units -> mm mesh with the given topology.
TriMesh denormalize_vertices(const Mat& vertices, const std::vector<std::array<int, 3>>& faces,
                             double unit_scale);

// Seeded shuffle then partition by rounded ratios (must sum to 1); throws if
// any split would be empty.
void split_cohort(Cohort& cohort, const std::array<double, 3>& ratios, uint64_t seed);

// Directory of per-case OFF files plus a JSON manifest (ids, splits, seed,
// deformation parameters, topology summary).
void save_cohort(const Cohort& cohort, const std::filesystem::path& dir);
Cohort load_cohort(const std::filesystem::path& dir);

}  // namespace atlas
