// mesh.hpp — closed oriented triangle mesh container, topology validation and
// OFF/OBJ/PLY file I/O. Meshes are immutable value types once built; all
// operations here are pure.
#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace atlas {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    double norm2() const { return dot(*this); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Triangle mesh restricted to closed, oriented, genus-0 surfaces. Coordinates
// are millimetres; unit_scale is the mm extent of one normalized unit used
// when a mesh is mapped into [-1, 1] model coordinates.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    double unit_scale = 256.0;

    int num_vertices() const { return static_cast<int>(vertices.size()); }
    int num_faces() const { return static_cast<int>(faces.size()); }
    // e = 3f/2 on a closed triangle mesh.
    int num_edges() const { return 3 * num_faces() / 2; }
};

// Per-vertex neighbor lists, sorted ascending. Symmetric, no self loops.
struct Adjacency {
    std::vector<std::vector<int>> neighbors;

    int num_vertices() const { return static_cast<int>(neighbors.size()); }
    int degree(int i) const { return static_cast<int>(neighbors[i].size()); }
};

struct ValidationReport {
    bool indices_ok = true;    // in-range, no repeated index inside a face
    bool manifold = true;      // every undirected edge on exactly 2 faces
    bool oriented = true;      // the 2 faces traverse the edge oppositely
    bool euler_ok = true;      // 2v - f = 4 and 2e = 3f
    bool degrees_ok = true;    // every vertex degree >= 3
    std::vector<std::pair<int, int>> offending_edges;

    bool ok() const { return indices_ok && manifold && oriented && euler_ok && degrees_ok; }
    std::string summary() const;
};

enum class MeshFormat { Off, Obj };

// Parses and validates; throws std::runtime_error with a diagnostic listing
// offending edges on parse failure or non-manifold/open input.
TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format);

// Format inferred from the extension (.off / .obj).
TriMesh load_mesh(const std::filesystem::path& path);

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path, MeshFormat format);
void save_mesh(const TriMesh& mesh, const std::filesystem::path& path);

// ASCII PLY with per-vertex uchar RGB. colors.size() must equal vertex count.
void save_mesh_ply(const TriMesh& mesh, const std::filesystem::path& path,
                   const std::vector<std::array<unsigned char, 3>>& colors);

Adjacency build_adjacency(const TriMesh& mesh);

ValidationReport validate_closed(const TriMesh& mesh);

// Throws if validate_closed fails; used by operations whose precondition is a
// valid closed mesh.
void require_closed(const TriMesh& mesh, const std::string& context);

// Unit-radius regular icosahedron, 12 vertices / 20 faces, outward oriented.
TriMesh icosahedron();

// Signed volume via the divergence theorem; positive for outward orientation.
double signed_volume(const TriMesh& mesh);

}  // namespace atlas
