// metrics.hpp — reconstruction evaluation in physical units: mean vertex
// error, symmetrized mean surface distance and Hausdorff distance.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "atlas/mesh.hpp"

namespace atlas {

// Exact distance from p to the closed triangle (a, b, c).
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Mean Euclidean vertex error between vertex-corresponded meshes (mm).
double mae(const TriMesh& predicted, const TriMesh& reference);

struct SurfaceDistance {
    double mean = 0.0;       // 0.5 * (mean_A d(p, B) + mean_B d(q, A))
    double hausdorff = 0.0;  // max(max_A d(p, B), max_B d(q, A))
};

// Vertex-to-surface distances by brute-force scan over all triangles.
SurfaceDistance surface_distance(const TriMesh& a, const TriMesh& b);

double mean_surface_distance(const TriMesh& a, const TriMesh& b);
double hausdorff(const TriMesh& a, const TriMesh& b);

struct CaseMetrics {
    std::string case_id;
    double mae_mm = 0.0;
    double md_mm = 0.0;
    double hd_mm = 0.0;
};

struct EvalReport {
    std::string model;
    std::string split;
    std::vector<CaseMetrics> cases;

    double mean_mae() const;
    double mean_md() const;
    double mean_hd() const;
};

EvalReport evaluate_reconstructions(const std::string& model, const std::string& split,
                                    const std::vector<std::string>& ids,
                                    const std::vector<TriMesh>& predicted,
                                    const std::vector<TriMesh>& reference);

// case_id,model,split,mae_mm,md_mm,hd_mm rows.
void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports);
// model,split,mae_mm,md_mm,hd_mm means, one row per report.
void write_aggregate_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports);

}  // namespace atlas
