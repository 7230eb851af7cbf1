#include "atlas/mesh.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace atlas {

namespace {

// Whitespace tokens of a text file with '#' comments stripped.
std::vector<std::string> tokenize_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) tokens.push_back(tok);
    }
    return tokens;
}

class TokenCursor {
public:
    TokenCursor(std::vector<std::string> tokens, std::string file)
        : tokens_(std::move(tokens)), file_(std::move(file)) {}

    const std::string& next(const char* what) {
        if (pos_ >= tokens_.size())
            throw std::runtime_error(file_ + ": unexpected end of file, expected " + std::string(what));
        return tokens_[pos_++];
    }

    long next_int(const char* what) {
        const std::string& t = next(what);
        size_t used = 0;
        long v;
        try {
            v = std::stol(t, &used);
        } catch (const std::exception&) {
            throw std::runtime_error(file_ + ": expected integer " + std::string(what) + ", got '" + t + "'");
        }
        if (used != t.size())
            throw std::runtime_error(file_ + ": expected integer " + std::string(what) + ", got '" + t + "'");
        return v;
    }

    double next_double(const char* what) {
        const std::string& t = next(what);
        size_t used = 0;
        double v;
        try {
            v = std::stod(t, &used);
        } catch (const std::exception&) {
            throw std::runtime_error(file_ + ": expected number " + std::string(what) + ", got '" + t + "'");
        }
        if (used != t.size())
            throw std::runtime_error(file_ + ": expected number " + std::string(what) + ", got '" + t + "'");
        return v;
    }

    bool done() const { return pos_ >= tokens_.size(); }

private:
    std::vector<std::string> tokens_;
    std::string file_;
    size_t pos_ = 0;
};

TriMesh parse_off(const std::filesystem::path& path) {
    TokenCursor cur(tokenize_file(path), path.string());
    const std::string& magic = cur.next("OFF header");
    if (magic != "OFF") throw std::runtime_error(path.string() + ": missing OFF header");
    const long nv = cur.next_int("vertex count");
    const long nf = cur.next_int("face count");
    cur.next_int("edge count");  // informational only
    if (nv < 0 || nf < 0) throw std::runtime_error(path.string() + ": negative element count");
    TriMesh m;
    m.vertices.reserve(nv);
    for (long i = 0; i < nv; ++i) {
        const double x = cur.next_double("vertex x");
        const double y = cur.next_double("vertex y");
        const double z = cur.next_double("vertex z");
        m.vertices.push_back({x, y, z});
    }
    m.faces.reserve(nf);
    for (long i = 0; i < nf; ++i) {
        const long arity = cur.next_int("face arity");
        if (arity != 3)
            throw std::runtime_error(path.string() + ": face " + std::to_string(i) + " is not a triangle");
        int a = static_cast<int>(cur.next_int("face index"));
        int b = static_cast<int>(cur.next_int("face index"));
        int c = static_cast<int>(cur.next_int("face index"));
        m.faces.push_back({a, b, c});
    }
    return m;
}

// OBJ face corner may be "i", "i/t", "i/t/n" or "i//n"; only the vertex index matters.
int obj_corner_index(const std::string& tok, const std::string& file, long nverts) {
    const auto slash = tok.find('/');
    const std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
    long v;
    size_t used = 0;
    try {
        v = std::stol(head, &used);
    } catch (const std::exception&) {
        throw std::runtime_error(file + ": bad face corner '" + tok + "'");
    }
    if (used != head.size()) throw std::runtime_error(file + ": bad face corner '" + tok + "'");
    if (v < 0) v = nverts + 1 + v;  // negative indices count from the end
    return static_cast<int>(v - 1);
}

TriMesh parse_obj(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    TriMesh m;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kind;
        if (!(ls >> kind)) continue;
        if (kind == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z))
                throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad vertex line");
            m.vertices.push_back({x, y, z});
        } else if (kind == "f") {
            std::vector<std::string> corners;
            std::string tok;
            while (ls >> tok) corners.push_back(tok);
            if (corners.size() != 3)
                throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                         ": face is not a triangle");
            std::array<int, 3> f;
            for (int i = 0; i < 3; ++i)
                f[i] = obj_corner_index(corners[i], path.string(), static_cast<long>(m.vertices.size()));
            m.faces.push_back(f);
        }
        // vn/vt/o/g/s/usemtl/mtllib are ignored
    }
    return m;
}

void write_text_file(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << body;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string fmt_coord(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

std::string ValidationReport::summary() const {
    std::ostringstream os;
    os << (ok() ? "valid" : "invalid");
    if (!indices_ok) os << "; bad face indices";
    if (!manifold) os << "; non-manifold or open edges";
    if (!oriented) os << "; inconsistent orientation";
    if (!euler_ok) os << "; Euler relation 2v-f=4 violated";
    if (!degrees_ok) os << "; vertex of degree < 3";
    if (!offending_edges.empty()) {
        os << "; offending edges:";
        size_t shown = 0;
        for (const auto& [a, b] : offending_edges) {
            if (shown++ == 8) {
                os << " ... (" << offending_edges.size() << " total)";
                break;
            }
            os << " (" << a << "," << b << ")";
        }
    }
    return os.str();
}

ValidationReport validate_closed(const TriMesh& mesh) {
    ValidationReport rep;
    const int v = mesh.num_vertices();
    for (const auto& f : mesh.faces) {
        for (int i : f)
            if (i < 0 || i >= v) rep.indices_ok = false;
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) rep.indices_ok = false;
    }
    if (!rep.indices_ok) {
        rep.manifold = rep.oriented = rep.euler_ok = rep.degrees_ok = false;
        return rep;
    }

    // Count directed half-edges; a closed oriented 2-manifold has each
    // undirected edge covered by exactly one half-edge per direction.
    std::map<std::pair<int, int>, int> directed;
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            const int a = f[k], b = f[(k + 1) % 3];
            ++directed[{a, b}];
        }
    }
    std::set<std::pair<int, int>> bad;
    long undirected = 0;
    for (const auto& [e, count] : directed) {
        const auto [a, b] = e;
        if (a < b) ++undirected;
        const auto rit = directed.find({b, a});
        const int rcount = rit == directed.end() ? 0 : rit->second;
        if (count + rcount != 2) {
            rep.manifold = false;
            bad.insert({std::min(a, b), std::max(a, b)});
        } else if (count != 1) {
            rep.oriented = false;
            bad.insert({std::min(a, b), std::max(a, b)});
        }
    }
    rep.offending_edges.assign(bad.begin(), bad.end());

    const long f = mesh.num_faces();
    rep.euler_ok = (2L * v - f == 4) && (2L * undirected == 3L * f);

    std::vector<int> deg(v, 0);
    for (const auto& [e, count] : directed) {
        (void)count;
        if (e.first < e.second) {
            ++deg[e.first];
            ++deg[e.second];
        }
    }
    for (int i = 0; i < v; ++i)
        if (deg[i] < 3) rep.degrees_ok = false;

    return rep;
}

void require_closed(const TriMesh& mesh, const std::string& context) {
    const ValidationReport rep = validate_closed(mesh);
    if (!rep.ok()) throw std::runtime_error(context + ": " + rep.summary());
}

TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
    TriMesh m = format == MeshFormat::Off ? parse_off(path) : parse_obj(path);
    const ValidationReport rep = validate_closed(m);
    if (!rep.ok()) throw std::runtime_error(path.string() + ": " + rep.summary());
    return m;
}

TriMesh load_mesh(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".off" || ext == ".OFF") return load_mesh(path, MeshFormat::Off);
    if (ext == ".obj" || ext == ".OBJ") return load_mesh(path, MeshFormat::Obj);
    throw std::runtime_error(path.string() + ": unknown mesh extension '" + ext + "'");
}

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path, MeshFormat format) {
    std::ostringstream os;
    if (format == MeshFormat::Off) {
        os << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_faces() << ' ' << mesh.num_edges() << '\n';
        for (const auto& p : mesh.vertices)
            os << fmt_coord(p.x) << ' ' << fmt_coord(p.y) << ' ' << fmt_coord(p.z) << '\n';
        for (const auto& f : mesh.faces) os << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    } else {
        for (const auto& p : mesh.vertices)
            os << "v " << fmt_coord(p.x) << ' ' << fmt_coord(p.y) << ' ' << fmt_coord(p.z) << '\n';
        for (const auto& f : mesh.faces)
            os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    }
    write_text_file(path, os.str());
}

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".off" || ext == ".OFF") return save_mesh(mesh, path, MeshFormat::Off);
    if (ext == ".obj" || ext == ".OBJ") return save_mesh(mesh, path, MeshFormat::Obj);
    throw std::runtime_error(path.string() + ": unknown mesh extension '" + ext + "'");
}

void save_mesh_ply(const TriMesh& mesh, const std::filesystem::path& path,
                   const std::vector<std::array<unsigned char, 3>>& colors) {
    if (static_cast<int>(colors.size()) != mesh.num_vertices())
        throw std::invalid_argument("save_mesh_ply: color count " + std::to_string(colors.size()) +
                                    " != vertex count " + std::to_string(mesh.num_vertices()));
    std::ostringstream os;
    os << "ply\nformat ascii 1.0\n";
    os << "element vertex " << mesh.num_vertices() << '\n';
    os << "property double x\nproperty double y\nproperty double z\n";
    os << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    os << "element face " << mesh.num_faces() << '\n';
    os << "property list uchar int vertex_indices\nend_header\n";
    for (int i = 0; i < mesh.num_vertices(); ++i) {
        const auto& p = mesh.vertices[i];
        const auto& c = colors[i];
        os << fmt_coord(p.x) << ' ' << fmt_coord(p.y) << ' ' << fmt_coord(p.z) << ' ' << int(c[0])
           << ' ' << int(c[1]) << ' ' << int(c[2]) << '\n';
    }
    for (const auto& f : mesh.faces) os << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    write_text_file(path, os.str());
}

Adjacency build_adjacency(const TriMesh& mesh) {
    Adjacency adj;
    adj.neighbors.resize(mesh.num_vertices());
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            adj.neighbors[f[k]].push_back(f[(k + 1) % 3]);
            adj.neighbors[f[k]].push_back(f[(k + 2) % 3]);
        }
    }
    for (auto& nb : adj.neighbors) {
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
    return adj;
}

TriMesh icosahedron() {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    const double s = 1.0 / std::sqrt(1.0 + t * t);  // scale onto the unit sphere
    TriMesh m;
    const double a = s, b = t * s;
    m.vertices = {{-a, b, 0},  {a, b, 0},  {-a, -b, 0}, {a, -b, 0}, {0, -a, b},  {0, a, b},
                  {0, -a, -b}, {0, a, -b}, {b, 0, -a},  {b, 0, a},  {-b, 0, -a}, {-b, 0, a}};
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
               {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    return m;
}

double signed_volume(const TriMesh& mesh) {
    double vol = 0.0;
    for (const auto& f : mesh.faces) {
        const Vec3& p = mesh.vertices[f[0]];
        const Vec3& q = mesh.vertices[f[1]];
        const Vec3& r = mesh.vertices[f[2]];
        vol += p.dot(q.cross(r));
    }
    return vol / 6.0;
}

}  // namespace atlas
