// hierarchy.hpp — multi-level template meshes built by 1:4 loop subdivision,
// the cross-level vertex correspondence, and the pooling/unpooling feature
// maps it induces.
#pragma once

#include <array>
#include <filesystem>
#include <utility>
#include <vector>

#include "atlas/linalg.hpp"
#include "atlas/mesh.hpp"

namespace atlas {

// Correspondence between a coarse mesh and the mesh obtained by one
// subdivision step. Inherited vertices keep their index (identity prefix
// [0, v_low)); inserted vertex v_low + k subdivides coarse edge
// inserted[k] = (a, b) with a < b.
struct LevelCorrespondence {
    int v_low = 0;
    int v_high = 0;
    std::vector<std::array<int, 2>> inserted;

    int num_inserted() const { return static_cast<int>(inserted.size()); }
};

// Template meshes from coarse to fine plus the per-step correspondences and
// per-level adjacency. Immutable after build.
struct TemplateHierarchy {
    std::vector<TriMesh> levels;                  // [0] coarsest
    std::vector<LevelCorrespondence> corr;        // corr[k]: levels[k] -> levels[k+1]
    std::vector<Adjacency> adjacency;             // per level

    int num_levels() const { return static_cast<int>(levels.size()); }
    const TriMesh& fine() const { return levels.back(); }
    const TriMesh& coarse() const { return levels.front(); }
};

// One 1:4 subdivision step. With geometric_smoothing the classic loop weights
// are applied (even vertex: (1-k*beta)p + beta*sum of neighbors with
// beta = (1/k)(5/8 - (3/8 + cos(2*pi/k)/4)^2); odd vertex:
// 3/8 (a+b) + 1/8 (c+d) with c, d the vertices opposite the split edge).
// Without it, inherited positions are copied and inserted vertices sit at
// exact edge midpoints.
std::pair<TriMesh, LevelCorrespondence> subdivide_loop(const TriMesh& mesh,
                                                       bool geometric_smoothing);

TemplateHierarchy build_hierarchy(const TriMesh& base, int num_levels,
                                  bool geometric_smoothing);

// Unit-radius sphere approximation: icosahedron plus `subdivisions` midpoint
// splits, re-projecting every vertex onto the unit sphere.
TriMesh icosphere(int subdivisions);

// Quadric-error edge-collapse simplification down to (at most) target_v + 2
// vertices, rejecting collapses that break manifoldness or flip normals.
TriMesh decimate(const TriMesh& mesh, int target_v);

// Feature map from the fine level to the coarse level: output row i is the
// mean of F over {i} union N_i taken in the fine mesh. F is v_high x C.
Mat pool_features(const Mat& f, const Adjacency& adjacency_high,
                  const LevelCorrespondence& corr);

// Feature map from the coarse level to the fine level: inherited rows are
// copied, inserted rows are the midpoint of their edge endpoints' rows.
Mat unpool_features(const Mat& f, const LevelCorrespondence& corr);

// Row-stochastic matrices reproducing pool_features / unpool_features
// bitwise: S * F walks entries in the same order with the same weights.
SparseMatrix pooling_matrix(const LevelCorrespondence& corr, const Adjacency& adjacency_high);
SparseMatrix unpooling_matrix(const LevelCorrespondence& corr);

// Symmetric-normalized adjacency with self loops for one level:
// D^{-1/2} (A + I) D^{-1/2} with D the self-loop-augmented degrees.
SparseMatrix normalized_adjacency(const Adjacency& adjacency);

// Directory layout: level_<k>.off per level plus corr_<k>_<k+1>.txt with
// "inherited <count>" then "inserted <hi-index> <a> <b>" lines.
void save_hierarchy(const TemplateHierarchy& h, const std::filesystem::path& dir);
TemplateHierarchy load_hierarchy(const std::filesystem::path& dir);

}  // namespace atlas
