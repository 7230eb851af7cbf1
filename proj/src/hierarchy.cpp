#include "atlas/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

namespace atlas {

namespace {

using Edge = std::pair<int, int>;

Edge make_edge(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

// Undirected edges in lexicographic order; the order defines inserted-vertex
// indices, so it must be deterministic.
std::vector<Edge> collect_edges(const TriMesh& mesh) {
    std::vector<Edge> edges;
    edges.reserve(mesh.num_faces() * 3);
    for (const auto& f : mesh.faces)
        for (int k = 0; k < 3; ++k) edges.push_back(make_edge(f[k], f[(k + 1) % 3]));
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

double loop_beta(int k) {
    const double c = 3.0 / 8.0 + std::cos(2.0 * 3.14159265358979323846 / k) / 4.0;
    return (5.0 / 8.0 - c * c) / k;
}

}  // namespace

std::pair<TriMesh, LevelCorrespondence> subdivide_loop(const TriMesh& mesh,
                                                       bool geometric_smoothing) {
    require_closed(mesh, "subdivide_loop");
    const int v_low = mesh.num_vertices();
    const std::vector<Edge> edges = collect_edges(mesh);
    std::map<Edge, int> edge_index;
    for (size_t e = 0; e < edges.size(); ++e) edge_index[edges[e]] = static_cast<int>(e);

    // The two vertices opposite each edge (one per adjacent face).
    std::vector<std::array<int, 2>> opposite(edges.size(), {-1, -1});
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            const int e = edge_index.at(make_edge(f[k], f[(k + 1) % 3]));
            opposite[e][opposite[e][0] < 0 ? 0 : 1] = f[(k + 2) % 3];
        }
    }

    TriMesh out;
    out.unit_scale = mesh.unit_scale;
    out.vertices.resize(v_low + edges.size());

    if (geometric_smoothing) {
        const Adjacency adj = build_adjacency(mesh);
        for (int i = 0; i < v_low; ++i) {
            const auto& nb = adj.neighbors[i];
            const int k = static_cast<int>(nb.size());
            const double beta = loop_beta(k);
            Vec3 p = mesh.vertices[i] * (1.0 - k * beta);
            for (int j : nb) p += mesh.vertices[j] * beta;
            out.vertices[i] = p;
        }
        for (size_t e = 0; e < edges.size(); ++e) {
            const auto [a, b] = edges[e];
            const auto [c, d] = opposite[e];
            out.vertices[v_low + e] = (mesh.vertices[a] + mesh.vertices[b]) * (3.0 / 8.0) +
                                      (mesh.vertices[c] + mesh.vertices[d]) * (1.0 / 8.0);
        }
    } else {
        for (int i = 0; i < v_low; ++i) out.vertices[i] = mesh.vertices[i];
        for (size_t e = 0; e < edges.size(); ++e) {
            const auto [a, b] = edges[e];
            // 0.5*p + 0.5*q, matching the unpooling arithmetic bit for bit
            out.vertices[v_low + e].x = 0.5 * mesh.vertices[a].x + 0.5 * mesh.vertices[b].x;
            out.vertices[v_low + e].y = 0.5 * mesh.vertices[a].y + 0.5 * mesh.vertices[b].y;
            out.vertices[v_low + e].z = 0.5 * mesh.vertices[a].z + 0.5 * mesh.vertices[b].z;
        }
    }

    out.faces.reserve(mesh.num_faces() * 4);
    for (const auto& f : mesh.faces) {
        const int m01 = v_low + edge_index.at(make_edge(f[0], f[1]));
        const int m12 = v_low + edge_index.at(make_edge(f[1], f[2]));
        const int m20 = v_low + edge_index.at(make_edge(f[2], f[0]));
        out.faces.push_back({f[0], m01, m20});
        out.faces.push_back({f[1], m12, m01});
        out.faces.push_back({f[2], m20, m12});
        out.faces.push_back({m01, m12, m20});
    }

    LevelCorrespondence corr;
    corr.v_low = v_low;
    corr.v_high = out.num_vertices();
    corr.inserted.reserve(edges.size());
    for (const auto& [a, b] : edges) corr.inserted.push_back({a, b});
    return {std::move(out), std::move(corr)};
}

TemplateHierarchy build_hierarchy(const TriMesh& base, int num_levels, bool geometric_smoothing) {
    if (num_levels < 2) throw std::invalid_argument("build_hierarchy: num_levels must be >= 2");
    require_closed(base, "build_hierarchy");
    TemplateHierarchy h;
    h.levels.push_back(base);
    for (int k = 1; k < num_levels; ++k) {
        auto [fine, corr] = subdivide_loop(h.levels.back(), geometric_smoothing);
        h.levels.push_back(std::move(fine));
        h.corr.push_back(std::move(corr));
    }
    for (const auto& level : h.levels) h.adjacency.push_back(build_adjacency(level));
    return h;
}

TriMesh icosphere(int subdivisions) {
    TriMesh m = icosahedron();
    for (int k = 0; k < subdivisions; ++k) {
        m = subdivide_loop(m, false).first;
        for (auto& p : m.vertices) {
            const double n = p.norm();
            p = p * (1.0 / n);
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Quadric-error decimation

namespace {

// Symmetric 4x4 quadric, upper triangle stored row-major.
struct Quadric {
    double q[10] = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0};

    void add_plane(double a, double b, double c, double d) {
        q[0] += a * a; q[1] += a * b; q[2] += a * c; q[3] += a * d;
        q[4] += b * b; q[5] += b * c; q[6] += b * d;
        q[7] += c * c; q[8] += c * d;
        q[9] += d * d;
    }
    void add(const Quadric& o) {
        for (int i = 0; i < 10; ++i) q[i] += o.q[i];
    }
    double cost(const Vec3& p) const {
        return p.x * (q[0] * p.x + 2 * q[1] * p.y + 2 * q[2] * p.z + 2 * q[3]) +
               p.y * (q[4] * p.y + 2 * q[5] * p.z + 2 * q[6]) +
               p.z * (q[7] * p.z + 2 * q[8]) + q[9];
    }
    // Minimizer of the quadratic form if the 3x3 block is well conditioned.
    bool solve(Vec3& out) const {
        const double a00 = q[0], a01 = q[1], a02 = q[2];
        const double a11 = q[4], a12 = q[5], a22 = q[7];
        const double det = a00 * (a11 * a22 - a12 * a12) - a01 * (a01 * a22 - a12 * a02) +
                           a02 * (a01 * a12 - a11 * a02);
        const double scale = std::max({std::abs(a00), std::abs(a11), std::abs(a22), 1e-300});
        if (std::abs(det) < 1e-10 * scale * scale * scale) return false;
        const double bx = -q[3], by = -q[6], bz = -q[8];
        out.x = (bx * (a11 * a22 - a12 * a12) - a01 * (by * a22 - a12 * bz) +
                 a02 * (by * a12 - a11 * bz)) / det;
        out.y = (a00 * (by * a22 - a12 * bz) - bx * (a01 * a22 - a02 * a12) +
                 a02 * (a01 * bz - by * a02)) / det;
        out.z = (a00 * (a11 * bz - by * a12) - a01 * (a01 * bz - by * a02) +
                 bx * (a01 * a12 - a11 * a02)) / det;
        return std::isfinite(out.x) && std::isfinite(out.y) && std::isfinite(out.z);
    }
};

struct DecimState {
    std::vector<Vec3> pos;
    std::vector<std::array<int, 3>> faces;
    std::vector<bool> vdead, fdead;
    std::vector<std::set<int>> vfaces;  // alive incident faces
    std::vector<Quadric> quadric;
    std::vector<int> version;

    std::set<int> neighbors(int u) const {
        std::set<int> nb;
        for (int fi : vfaces[u])
            for (int c : faces[fi])
                if (c != u) nb.insert(c);
        return nb;
    }

    bool is_edge(int a, int b) const {
        for (int fi : vfaces[a]) {
            const auto& f = faces[fi];
            if (f[0] == b || f[1] == b || f[2] == b) return true;
        }
        return false;
    }

    Vec3 face_normal(int fi, int replace_from = -1, const Vec3* replacement = nullptr) const {
        std::array<Vec3, 3> p;
        for (int k = 0; k < 3; ++k) {
            const int idx = faces[fi][k];
            p[k] = (idx == replace_from && replacement) ? *replacement : pos[idx];
        }
        return (p[1] - p[0]).cross(p[2] - p[0]);
    }
};

struct Candidate {
    double cost;
    int a, b;
    int va_version, vb_version;
    bool operator>(const Candidate& o) const { return cost > o.cost; }
};

// Best of the solved optimum and the three classic fallbacks.
std::pair<Vec3, double> best_target(const Quadric& q, const Vec3& pa, const Vec3& pb) {
    Vec3 best = (pa + pb) * 0.5;
    double best_cost = q.cost(best);
    for (const Vec3& cand : {pa, pb}) {
        const double c = q.cost(cand);
        if (c < best_cost) {
            best_cost = c;
            best = cand;
        }
    }
    Vec3 solved;
    if (q.solve(solved)) {
        const double c = q.cost(solved);
        if (c < best_cost) {
            best_cost = c;
            best = solved;
        }
    }
    return {best, best_cost};
}

}  // namespace

TriMesh decimate(const TriMesh& mesh, int target_v) {
    if (target_v < 4) throw std::invalid_argument("decimate: target_v must be >= 4");
    require_closed(mesh, "decimate");
    if (mesh.num_vertices() <= target_v) return mesh;

    DecimState st;
    st.pos = mesh.vertices;
    st.faces = mesh.faces;
    st.vdead.assign(mesh.num_vertices(), false);
    st.fdead.assign(mesh.num_faces(), false);
    st.vfaces.resize(mesh.num_vertices());
    st.quadric.resize(mesh.num_vertices());
    st.version.assign(mesh.num_vertices(), 0);

    for (int fi = 0; fi < mesh.num_faces(); ++fi) {
        const auto& f = mesh.faces[fi];
        for (int c : f) st.vfaces[c].insert(fi);
        const Vec3 n = (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                           .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]);
        const double len = n.norm();
        if (len < 1e-300) continue;
        const Vec3 un = n * (1.0 / len);
        const double d = -un.dot(mesh.vertices[f[0]]);
        for (int c : f) st.quadric[c].add_plane(un.x, un.y, un.z, d);
    }

    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<Candidate>> pq;
    auto push_edge = [&](int a, int b) {
        if (a > b) std::swap(a, b);
        Quadric q = st.quadric[a];
        q.add(st.quadric[b]);
        const auto [p, cost] = best_target(q, st.pos[a], st.pos[b]);
        (void)p;
        pq.push({cost, a, b, st.version[a], st.version[b]});
    };
    for (const auto& e : collect_edges(mesh)) push_edge(e.first, e.second);

    int alive_v = mesh.num_vertices();
    while (alive_v > target_v && !pq.empty()) {
        const Candidate cand = pq.top();
        pq.pop();
        const int a = cand.a, b = cand.b;
        if (st.vdead[a] || st.vdead[b]) continue;
        if (cand.va_version != st.version[a] || cand.vb_version != st.version[b]) continue;
        if (!st.is_edge(a, b)) continue;
        if (alive_v <= 4) break;

        // Link condition: the common neighbors of a and b must be exactly the
        // two vertices opposite the edge, otherwise the collapse pinches the
        // surface.
        const std::set<int> na = st.neighbors(a);
        const std::set<int> nb = st.neighbors(b);
        std::vector<int> common;
        std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
        std::set<int> wing;
        std::vector<int> shared_faces;
        for (int fi : st.vfaces[a]) {
            if (st.vfaces[b].count(fi)) {
                shared_faces.push_back(fi);
                for (int c : st.faces[fi])
                    if (c != a && c != b) wing.insert(c);
            }
        }
        if (shared_faces.size() != 2) continue;
        if (common.size() != wing.size() ||
            !std::equal(common.begin(), common.end(), wing.begin()))
            continue;

        Quadric q = st.quadric[a];
        q.add(st.quadric[b]);
        const auto [target, cost] = best_target(q, st.pos[a], st.pos[b]);
        (void)cost;

        // Reject collapses that flip or degenerate any surviving face.
        bool ok = true;
        for (int u : {a, b}) {
            for (int fi : st.vfaces[u]) {
                if (st.fdead[fi]) continue;
                bool removed = false;
                for (int sf : shared_faces) removed = removed || sf == fi;
                if (removed) continue;
                const Vec3 before = st.face_normal(fi);
                const Vec3 after = st.face_normal(fi, u, &target);
                if (after.norm() < 1e-14 || before.dot(after) <= 0.0) {
                    ok = false;
                    break;
                }
            }
            if (!ok) break;
        }
        if (!ok) continue;

        // Collapse b into a.
        for (int fi : shared_faces) {
            st.fdead[fi] = true;
            for (int c : st.faces[fi]) st.vfaces[c].erase(fi);
        }
        const std::vector<int> bfaces(st.vfaces[b].begin(), st.vfaces[b].end());
        for (int fi : bfaces) {
            auto& f = st.faces[fi];
            for (int k = 0; k < 3; ++k)
                if (f[k] == b) f[k] = a;
            st.vfaces[b].erase(fi);
            st.vfaces[a].insert(fi);
        }
        st.pos[a] = target;
        st.quadric[a] = q;
        st.vdead[b] = true;
        ++st.version[a];
        ++st.version[b];
        --alive_v;

        for (int n : st.neighbors(a)) push_edge(a, n);
    }

    if (alive_v > target_v + 2)
        throw std::runtime_error("decimate: stalled at " + std::to_string(alive_v) +
                                 " vertices, target " + std::to_string(target_v));

    TriMesh out;
    out.unit_scale = mesh.unit_scale;
    std::vector<int> remap(mesh.num_vertices(), -1);
    for (int i = 0; i < mesh.num_vertices(); ++i) {
        if (!st.vdead[i]) {
            remap[i] = out.num_vertices();
            out.vertices.push_back(st.pos[i]);
        }
    }
    for (int fi = 0; fi < static_cast<int>(st.faces.size()); ++fi) {
        if (st.fdead[fi]) continue;
        const auto& f = st.faces[fi];
        out.faces.push_back({remap[f[0]], remap[f[1]], remap[f[2]]});
    }
    require_closed(out, "decimate output");
    return out;
}

// ---------------------------------------------------------------------------
// Pooling / unpooling

Mat pool_features(const Mat& f, const Adjacency& adjacency_high, const LevelCorrespondence& corr) {
    if (f.rows != corr.v_high)
        throw std::invalid_argument("pool_features: expected " + std::to_string(corr.v_high) +
                                    " rows, got " + std::to_string(f.rows));
    Mat out(corr.v_low, f.cols);
    for (int i = 0; i < corr.v_low; ++i) {
        const auto& nb = adjacency_high.neighbors[i];
        const double w = 1.0 / (static_cast<double>(nb.size()) + 1.0);
        // Entries in column order: the self column merged into the sorted
        // neighbor list. Must accumulate exactly like the sparse matrix does.
        double* o = out.row(i);
        size_t k = 0;
        bool self_done = false;
        while (k < nb.size() || !self_done) {
            int col;
            if (!self_done && (k >= nb.size() || i < nb[k])) {
                col = i;
                self_done = true;
            } else {
                col = nb[k++];
            }
            const double* frow = f.row(col);
            for (int c = 0; c < f.cols; ++c) o[c] += w * frow[c];
        }
    }
    return out;
}

Mat unpool_features(const Mat& f, const LevelCorrespondence& corr) {
    if (f.rows != corr.v_low)
        throw std::invalid_argument("unpool_features: expected " + std::to_string(corr.v_low) +
                                    " rows, got " + std::to_string(f.rows));
    Mat out(corr.v_high, f.cols);
    for (int i = 0; i < corr.v_low; ++i) {
        double* o = out.row(i);
        const double* frow = f.row(i);
        for (int c = 0; c < f.cols; ++c) o[c] += 1.0 * frow[c];
    }
    for (int e = 0; e < corr.num_inserted(); ++e) {
        const auto [a, b] = corr.inserted[e];
        double* o = out.row(corr.v_low + e);
        const double* fa = f.row(a);
        const double* fb = f.row(b);
        for (int c = 0; c < f.cols; ++c) o[c] += 0.5 * fa[c];
        for (int c = 0; c < f.cols; ++c) o[c] += 0.5 * fb[c];
    }
    return out;
}

SparseMatrix pooling_matrix(const LevelCorrespondence& corr, const Adjacency& adjacency_high) {
    SparseMatrix s(corr.v_low, corr.v_high);
    for (int i = 0; i < corr.v_low; ++i) {
        const auto& nb = adjacency_high.neighbors[i];
        const double w = 1.0 / (static_cast<double>(nb.size()) + 1.0);
        std::vector<std::pair<int, double>> entries;
        entries.reserve(nb.size() + 1);
        size_t k = 0;
        bool self_done = false;
        while (k < nb.size() || !self_done) {
            if (!self_done && (k >= nb.size() || i < nb[k])) {
                entries.push_back({i, w});
                self_done = true;
            } else {
                entries.push_back({nb[k++], w});
            }
        }
        s.append_row(entries);
    }
    return s;
}

SparseMatrix unpooling_matrix(const LevelCorrespondence& corr) {
    SparseMatrix s(corr.v_high, corr.v_low);
    for (int i = 0; i < corr.v_low; ++i) s.append_row({{i, 1.0}});
    for (int e = 0; e < corr.num_inserted(); ++e) {
        const auto [a, b] = corr.inserted[e];
        s.append_row({{a, 0.5}, {b, 0.5}});
    }
    return s;
}

SparseMatrix normalized_adjacency(const Adjacency& adjacency) {
    const int n = adjacency.num_vertices();
    SparseMatrix s(n, n);
    for (int i = 0; i < n; ++i) {
        const auto& nb = adjacency.neighbors[i];
        const double di = std::sqrt(static_cast<double>(nb.size()) + 1.0);
        std::vector<std::pair<int, double>> entries;
        entries.reserve(nb.size() + 1);
        size_t k = 0;
        bool self_done = false;
        while (k < nb.size() || !self_done) {
            int col;
            if (!self_done && (k >= nb.size() || i < nb[k])) {
                col = i;
                self_done = true;
            } else {
                col = nb[k++];
            }
            const double dj = std::sqrt(static_cast<double>(adjacency.neighbors[col].size()) + 1.0);
            entries.push_back({col, 1.0 / (di * dj)});
        }
        s.append_row(entries);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Persistence

void save_hierarchy(const TemplateHierarchy& h, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (int k = 0; k < h.num_levels(); ++k)
        save_mesh(h.levels[k], dir / ("level_" + std::to_string(k) + ".off"), MeshFormat::Off);
    for (size_t k = 0; k < h.corr.size(); ++k) {
        const auto& c = h.corr[k];
        std::ostringstream os;
        os << "inherited " << c.v_low << '\n';
        for (int e = 0; e < c.num_inserted(); ++e)
            os << "inserted " << c.v_low + e << ' ' << c.inserted[e][0] << ' ' << c.inserted[e][1]
               << '\n';
        std::ofstream out(dir / ("corr_" + std::to_string(k) + "_" + std::to_string(k + 1) + ".txt"),
                          std::ios::binary);
        if (!out) throw std::runtime_error("cannot write correspondence file in " + dir.string());
        out << os.str();
    }
}

TemplateHierarchy load_hierarchy(const std::filesystem::path& dir) {
    TemplateHierarchy h;
    for (int k = 0;; ++k) {
        const auto path = dir / ("level_" + std::to_string(k) + ".off");
        if (!std::filesystem::exists(path)) break;
        h.levels.push_back(load_mesh(path, MeshFormat::Off));
    }
    if (h.levels.size() < 2)
        throw std::runtime_error("load_hierarchy: " + dir.string() + " has fewer than 2 levels");
    for (size_t k = 0; k + 1 < h.levels.size(); ++k) {
        const auto path = dir / ("corr_" + std::to_string(k) + "_" + std::to_string(k + 1) + ".txt");
        std::ifstream in(path);
        if (!in) throw std::runtime_error("missing correspondence file " + path.string());
        LevelCorrespondence c;
        std::string word;
        if (!(in >> word) || word != "inherited" || !(in >> c.v_low))
            throw std::runtime_error(path.string() + ": malformed header");
        c.v_high = h.levels[k + 1].num_vertices();
        c.inserted.resize(c.v_high - c.v_low);
        int seen = 0;
        int hi, a, b;
        while (in >> word >> hi >> a >> b) {
            if (word != "inserted" || hi < c.v_low || hi >= c.v_high)
                throw std::runtime_error(path.string() + ": malformed inserted line");
            c.inserted[hi - c.v_low] = {a, b};
            ++seen;
        }
        if (seen != c.v_high - c.v_low)
            throw std::runtime_error(path.string() + ": expected " +
                                     std::to_string(c.v_high - c.v_low) + " inserted entries");
        if (c.v_low != h.levels[k].num_vertices())
            throw std::runtime_error(path.string() + ": inherited count does not match level mesh");
        h.corr.push_back(std::move(c));
    }
    for (const auto& level : h.levels) h.adjacency.push_back(build_adjacency(level));
    return h;
}

}  // namespace atlas
