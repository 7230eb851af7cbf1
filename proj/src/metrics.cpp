#include "atlas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace atlas {

namespace {

// Closest point on triangle (a, b, c) by barycentric region classification.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return a + ab * v;
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return a + ac * w;
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return a + ab * v + ac * w;
}

// (mean, max) of vertex-to-surface distances from `from` onto `onto`.
std::pair<double, double> directed_distance(const TriMesh& from, const TriMesh& onto) {
    if (from.vertices.empty() || onto.faces.empty())
        throw std::invalid_argument("surface_distance: empty mesh");
    double sum = 0.0;
    double worst = 0.0;
    for (const auto& p : from.vertices) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& f : onto.faces) {
            const Vec3 q = closest_point_on_triangle(p, onto.vertices[f[0]], onto.vertices[f[1]],
                                                     onto.vertices[f[2]]);
            best = std::min(best, (p - q).norm2());
        }
        const double d = std::sqrt(best);
        sum += d;
        worst = std::max(worst, d);
    }
    return {sum / static_cast<double>(from.vertices.size()), worst};
}

std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    return (p - closest_point_on_triangle(p, a, b, c)).norm();
}

double mae(const TriMesh& predicted, const TriMesh& reference) {
    if (predicted.num_vertices() != reference.num_vertices())
        throw std::invalid_argument("mae: vertex count mismatch (" +
                                    std::to_string(predicted.num_vertices()) + " vs " +
                                    std::to_string(reference.num_vertices()) + ")");
    if (predicted.vertices.empty()) throw std::invalid_argument("mae: empty mesh");
    double sum = 0.0;
    for (int i = 0; i < predicted.num_vertices(); ++i)
        sum += (predicted.vertices[i] - reference.vertices[i]).norm();
    return sum / static_cast<double>(predicted.num_vertices());
}

SurfaceDistance surface_distance(const TriMesh& a, const TriMesh& b) {
    const auto [mean_ab, max_ab] = directed_distance(a, b);
    const auto [mean_ba, max_ba] = directed_distance(b, a);
    return {0.5 * (mean_ab + mean_ba), std::max(max_ab, max_ba)};
}

double mean_surface_distance(const TriMesh& a, const TriMesh& b) { return surface_distance(a, b).mean; }

double hausdorff(const TriMesh& a, const TriMesh& b) { return surface_distance(a, b).hausdorff; }

double EvalReport::mean_mae() const {
    double s = 0.0;
    for (const auto& c : cases) s += c.mae_mm;
    return cases.empty() ? 0.0 : s / static_cast<double>(cases.size());
}

double EvalReport::mean_md() const {
    double s = 0.0;
    for (const auto& c : cases) s += c.md_mm;
    return cases.empty() ? 0.0 : s / static_cast<double>(cases.size());
}

double EvalReport::mean_hd() const {
    double s = 0.0;
    for (const auto& c : cases) s += c.hd_mm;
    return cases.empty() ? 0.0 : s / static_cast<double>(cases.size());
}

EvalReport evaluate_reconstructions(const std::string& model, const std::string& split,
                                    const std::vector<std::string>& ids,
                                    const std::vector<TriMesh>& predicted,
                                    const std::vector<TriMesh>& reference) {
    if (ids.size() != predicted.size() || ids.size() != reference.size())
        throw std::invalid_argument("evaluate_reconstructions: case count mismatch");
    EvalReport rep;
    rep.model = model;
    rep.split = split;
    for (size_t i = 0; i < ids.size(); ++i) {
        const SurfaceDistance sd = surface_distance(predicted[i], reference[i]);
        rep.cases.push_back({ids[i], mae(predicted[i], reference[i]), sd.mean, sd.hausdorff});
    }
    return rep;
}

void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "case_id,model,split,mae_mm,md_mm,hd_mm\n";
    for (const auto& rep : reports)
        for (const auto& c : rep.cases)
            out << c.case_id << ',' << rep.model << ',' << rep.split << ',' << csv_num(c.mae_mm)
                << ',' << csv_num(c.md_mm) << ',' << csv_num(c.hd_mm) << '\n';
}

void write_aggregate_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "model,split,mae_mm,md_mm,hd_mm\n";
    for (const auto& rep : reports)
        out << rep.model << ',' << rep.split << ',' << csv_num(rep.mean_mae()) << ','
            << csv_num(rep.mean_md()) << ',' << csv_num(rep.mean_hd()) << '\n';
}

}  // namespace atlas
