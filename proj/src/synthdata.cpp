#include "atlas/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "atlas/rng.hpp"

namespace atlas {

std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    throw std::logic_error("unknown split");
}

Split split_from_string(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "validation" || name == "val") return Split::Validation;
    if (name == "test") return Split::Test;
    throw std::invalid_argument("unknown split '" + name + "'");
}

std::vector<int> Cohort::indices(Split s) const {
    std::vector<int> out;
    for (int i = 0; i < num_cases(); ++i)
        if (split[i] == s) out.push_back(i);
    return out;
}

int Cohort::index_of(const std::string& id) const {
    for (int i = 0; i < num_cases(); ++i)
        if (ids[i] == id) return i;
    throw std::invalid_argument("unknown case id '" + id + "'");
}

TriMesh Cohort::mesh_mm(int idx) const { return denormalize_vertices(cases[idx], faces, unit_scale); }

namespace {

struct Rotation {
    double m[3][3];
    Vec3 apply(const Vec3& p) const {
        return {m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z,
                m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
                m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z};
    }
};

Rotation rotation_xyz(double ax, double ay, double az) {
    const double cx = std::cos(ax), sx = std::sin(ax);
    const double cy = std::cos(ay), sy = std::sin(ay);
    const double cz = std::cos(az), sz = std::sin(az);
    // Rz * Ry * Rx
    Rotation r;
    r.m[0][0] = cz * cy;
    r.m[0][1] = cz * sy * sx - sz * cx;
    r.m[0][2] = cz * sy * cx + sz * sx;
    r.m[1][0] = sz * cy;
    r.m[1][1] = sz * sy * sx + cz * cx;
    r.m[1][2] = sz * sy * cx - cz * sx;
    r.m[2][0] = -sy;
    r.m[2][1] = cy * sx;
    r.m[2][2] = cy * cx;
    return r;
}

double bbox_diagonal(const TriMesh& mesh) {
    Vec3 lo = mesh.vertices.front(), hi = lo;
    for (const auto& p : mesh.vertices) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    return (hi - lo).norm();
}

// Positive triangle areas, outward-consistent normals (relative to the shape
// centroid) and coordinates inside the normalization range.
bool deformation_valid(const std::vector<Vec3>& verts, const std::vector<std::array<int, 3>>& faces,
                       double diag, double unit_scale) {
    Vec3 center{0, 0, 0};
    for (const auto& p : verts) center += p;
    center = center * (1.0 / static_cast<double>(verts.size()));
    for (const auto& p : verts)
        if (std::abs(p.x) > unit_scale || std::abs(p.y) > unit_scale || std::abs(p.z) > unit_scale)
            return false;
    const double min_area = 1e-10 * diag * diag;
    for (const auto& f : faces) {
        const Vec3& a = verts[f[0]];
        const Vec3& b = verts[f[1]];
        const Vec3& c = verts[f[2]];
        const Vec3 n = (b - a).cross(c - a);
        if (0.5 * n.norm() < min_area) return false;
        const Vec3 centroid = (a + b + c) * (1.0 / 3.0);
        if (n.dot(centroid - center) <= 0.0) return false;
    }
    return true;
}

std::vector<Vec3> deform_once(const TriMesh& tpl, const DeformConfig& cfg, double diag, Rng& rng) {
    const double deg = 3.14159265358979323846 / 180.0;
    const double sx = std::exp(cfg.scale_sigma * rng.normal());
    const double sy = std::exp(cfg.scale_sigma * rng.normal());
    const double sz = std::exp(cfg.scale_sigma * rng.normal());
    const double ax = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg) * deg;
    const double ay = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg) * deg;
    const double az = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg) * deg;
    const Rotation rot = rotation_xyz(ax, ay, az);

    struct Wave {
        Vec3 dir;       // displacement direction
        Vec3 k;         // wave vector
        double phase;
        double amp;
    };
    std::vector<Wave> waves(static_cast<size_t>(std::max(cfg.num_waves, 0)));
    for (auto& w : waves) {
        Vec3 d{rng.normal(), rng.normal(), rng.normal()};
        const double dn = d.norm();
        w.dir = dn > 1e-12 ? d * (1.0 / dn) : Vec3{1, 0, 0};
        Vec3 kd{rng.normal(), rng.normal(), rng.normal()};
        const double kn = kd.norm();
        kd = kn > 1e-12 ? kd * (1.0 / kn) : Vec3{0, 1, 0};
        // wavelength between half and one-and-a-half bbox diagonals
        const double wavelength = diag * rng.uniform(0.5, 1.5);
        w.k = kd * (2.0 * 3.14159265358979323846 / wavelength);
        w.phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        w.amp = rng.uniform(0.0, cfg.wave_amplitude * diag);
    }
    const Vec3 t{rng.uniform(-cfg.max_translation, cfg.max_translation) * tpl.unit_scale,
                 rng.uniform(-cfg.max_translation, cfg.max_translation) * tpl.unit_scale,
                 rng.uniform(-cfg.max_translation, cfg.max_translation) * tpl.unit_scale};

    std::vector<Vec3> out(tpl.vertices.size());
    for (size_t i = 0; i < tpl.vertices.size(); ++i) {
        const Vec3& p0 = tpl.vertices[i];
        Vec3 p = rot.apply({p0.x * sx, p0.y * sy, p0.z * sz});
        // the displacement field is sampled at the undeformed template, so it
        // stays smooth under the case's own rotation/scale
        for (const auto& w : waves) p += w.dir * (w.amp * std::sin(w.k.dot(p0) + w.phase));
        p += t;
        out[i] = p;
    }
    return out;
}

}  // namespace

Cohort generate_cohort(const TemplateHierarchy& h, int n_cases, uint64_t seed,
                       const DeformConfig& cfg) {
    if (n_cases < 3) throw std::invalid_argument("generate_cohort: need at least 3 cases");
    const TriMesh& tpl = h.fine();
    const double diag = bbox_diagonal(tpl);

    Cohort cohort;
    cohort.faces = tpl.faces;
    cohort.unit_scale = tpl.unit_scale;
    cohort.seed = seed;
    cohort.deform = cfg;

    for (int i = 0; i < n_cases; ++i) {
        bool done = false;
        for (int attempt = 0; attempt < 10 && !done; ++attempt) {
            Rng rng(derive_seed(seed, static_cast<uint64_t>(i), static_cast<uint64_t>(attempt)));
            const std::vector<Vec3> verts = deform_once(tpl, cfg, diag, rng);
            if (!deformation_valid(verts, tpl.faces, diag, tpl.unit_scale)) continue;
            Mat norm(static_cast<int>(verts.size()), 3);
            for (size_t vi = 0; vi < verts.size(); ++vi) {
                norm(static_cast<int>(vi), 0) = verts[vi].x / tpl.unit_scale;
                norm(static_cast<int>(vi), 1) = verts[vi].y / tpl.unit_scale;
                norm(static_cast<int>(vi), 2) = verts[vi].z / tpl.unit_scale;
            }
            char id[32];
            std::snprintf(id, sizeof(id), "case_%03d", i);
            cohort.ids.push_back(id);
            cohort.cases.push_back(std::move(norm));
            cohort.split.push_back(Split::Train);
            done = true;
        }
        if (!done)
            throw std::runtime_error("generate_cohort: case " + std::to_string(i) +
                                     " degenerate after 10 attempts");
    }
    return cohort;
}

Mat normalize_vertices(const TriMesh& mesh, double unit_scale) {
    Mat out(mesh.num_vertices(), 3);
    for (int i = 0; i < mesh.num_vertices(); ++i) {
        const Vec3& p = mesh.vertices[i];
        if (std::abs(p.x) > unit_scale || std::abs(p.y) > unit_scale || std::abs(p.z) > unit_scale)
            throw std::invalid_argument("normalize_vertices: coordinate out of +-" +
                                        std::to_string(unit_scale) + " mm at vertex " +
                                        std::to_string(i));
        out(i, 0) = p.x / unit_scale;
        out(i, 1) = p.y / unit_scale;
        out(i, 2) = p.z / unit_scale;
    }
    return out;
}

TriMesh denormalize_vertices(const Mat& vertices, const std::vector<std::array<int, 3>>& faces,
                             double unit_scale) {
    if (vertices.cols != 3) throw std::invalid_argument("denormalize_vertices: expected 3 columns");
    TriMesh mesh;
    mesh.unit_scale = unit_scale;
    mesh.faces = faces;
    mesh.vertices.resize(vertices.rows);
    for (int i = 0; i < vertices.rows; ++i)
        mesh.vertices[i] = {vertices(i, 0) * unit_scale, vertices(i, 1) * unit_scale,
                            vertices(i, 2) * unit_scale};
    return mesh;
}

void split_cohort(Cohort& cohort, const std::array<double, 3>& ratios, uint64_t seed) {
    const double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split_cohort: ratios must sum to 1");
    const int n = cohort.num_cases();
    const int n_train = static_cast<int>(std::lround(ratios[0] * n));
    const int n_val = static_cast<int>(std::lround(ratios[1] * n));
    const int n_test = n - n_train - n_val;
    if (n_train < 1 || n_val < 1 || n_test < 1)
        throw std::invalid_argument("split_cohort: a split would be empty (" +
                                    std::to_string(n_train) + "/" + std::to_string(n_val) + "/" +
                                    std::to_string(n_test) + ")");
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    for (int i = 0; i < n; ++i) {
        Split s = Split::Test;
        if (i < n_train) s = Split::Train;
        else if (i < n_train + n_val) s = Split::Validation;
        cohort.split[order[i]] = s;
    }
}

void save_cohort(const Cohort& cohort, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["format_version"] = 1;
    manifest["unit_scale"] = cohort.unit_scale;
    manifest["seed"] = cohort.seed;
    manifest["fine_vertices"] = cohort.vertex_count();
    manifest["fine_faces"] = static_cast<int>(cohort.faces.size());
    manifest["deform"] = {{"scale_sigma", cohort.deform.scale_sigma},
                          {"max_rotation_deg", cohort.deform.max_rotation_deg},
                          {"num_waves", cohort.deform.num_waves},
                          {"wave_amplitude", cohort.deform.wave_amplitude},
                          {"max_translation", cohort.deform.max_translation}};
    nlohmann::json cases = nlohmann::json::array();
    for (int i = 0; i < cohort.num_cases(); ++i) {
        const std::string file = cohort.ids[i] + ".off";
        save_mesh(cohort.mesh_mm(i), dir / file, MeshFormat::Off);
        cases.push_back({{"id", cohort.ids[i]}, {"split", to_string(cohort.split[i])}, {"file", file}});
    }
    manifest["cases"] = cases;
    std::ofstream out(dir / "cohort.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write cohort manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
}

Cohort load_cohort(const std::filesystem::path& dir) {
    std::ifstream in(dir / "cohort.json");
    if (!in) throw std::runtime_error("missing cohort manifest " + (dir / "cohort.json").string());
    nlohmann::json manifest;
    in >> manifest;

    Cohort cohort;
    cohort.unit_scale = manifest.at("unit_scale").get<double>();
    cohort.seed = manifest.at("seed").get<uint64_t>();
    const auto& d = manifest.at("deform");
    cohort.deform.scale_sigma = d.at("scale_sigma").get<double>();
    cohort.deform.max_rotation_deg = d.at("max_rotation_deg").get<double>();
    cohort.deform.num_waves = d.at("num_waves").get<int>();
    cohort.deform.wave_amplitude = d.at("wave_amplitude").get<double>();
    cohort.deform.max_translation = d.at("max_translation").get<double>();

    for (const auto& c : manifest.at("cases")) {
        const TriMesh mesh = load_mesh(dir / c.at("file").get<std::string>(), MeshFormat::Off);
        if (cohort.faces.empty()) {
            cohort.faces = mesh.faces;
        } else if (mesh.faces != cohort.faces) {
            throw std::runtime_error("load_cohort: case " + c.at("id").get<std::string>() +
                                     " does not share the cohort topology");
        }
        cohort.ids.push_back(c.at("id").get<std::string>());
        cohort.cases.push_back(normalize_vertices(mesh, cohort.unit_scale));
        cohort.split.push_back(split_from_string(c.at("split").get<std::string>()));
    }
    if (cohort.num_cases() == 0) throw std::runtime_error("load_cohort: empty cohort");
    return cohort;
}

}  // namespace atlas
