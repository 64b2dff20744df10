#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace lipfem {

struct Point2 {
    double x1 = 0.0;
    double x2 = 0.0;

    friend Point2 operator+(Point2 a, Point2 b) { return {a.x1 + b.x1, a.x2 + b.x2}; }
    friend Point2 operator-(Point2 a, Point2 b) { return {a.x1 - b.x1, a.x2 - b.x2}; }
    friend Point2 operator*(double s, Point2 a) { return {s * a.x1, s * a.x2}; }
    friend bool operator==(Point2 a, Point2 b) = default;
};

double distance(Point2 a, Point2 b);

enum class DomainTag { UnitSquare, DiskPolygon };

const char* to_string(DomainTag tag) noexcept;
DomainTag domain_tag_from_string(const std::string& name);

using Triangle = std::array<int, 3>;
using Edge = std::array<int, 2>;

/// Result of a point query: containing triangle and barycentric coordinates
/// with respect to its (counter-clockwise) vertices.
struct Location {
    int triangle = -1;
    std::array<double, 3> bary{};
};

struct MeshQuality {
    double h_max = 0.0;
    double h_min = 0.0;
    double min_angle_deg = 0.0;
    double max_angle_deg = 0.0;
    double area = 0.0;
    double boundary_polygon_area = 0.0;
};

class PointLocator;

/// Conforming triangulation of a 2-D domain. Immutable once built; all
/// generators produce counter-clockwise triangles.
class Mesh {
public:
    Mesh(std::vector<Point2> vertices, std::vector<Triangle> triangles, DomainTag tag,
         std::vector<int> parents = {}, double h_override = 0.0);
    ~Mesh();
    Mesh(Mesh&&) noexcept;
    Mesh& operator=(Mesh&&) noexcept;
    Mesh(const Mesh&) = delete;
    Mesh& operator=(const Mesh&) = delete;

    const std::vector<Point2>& vertices() const { return vertices_; }
    const std::vector<Triangle>& triangles() const { return triangles_; }
    const std::vector<Edge>& boundary_edges() const { return boundary_edges_; }
    /// All edges, each once with the smaller vertex index first, in order of
    /// first appearance during a triangle sweep.
    const std::vector<Edge>& edges() const { return edges_; }
    /// Edge ids of triangle t, local edge k joins local vertices k and (k+1)%3.
    const std::array<int, 3>& triangle_edges(int t) const { return triangle_edges_[t]; }
    /// Parent triangle in the mesh this one was refined from, empty for
    /// generated meshes.
    const std::vector<int>& parents() const { return parents_; }

    int num_vertices() const { return static_cast<int>(vertices_.size()); }
    int num_triangles() const { return static_cast<int>(triangles_.size()); }
    double h() const { return h_; }
    DomainTag domain() const { return tag_; }

    std::array<Point2, 3> corners(int t) const;
    double area(int t) const;
    double diameter(int t) const;
    Point2 centroid(int t) const;
    bool is_boundary_vertex(int v) const { return boundary_vertex_[v] != 0; }

    Location locate(Point2 p) const;
    /// Barycentric coordinates of p with respect to triangle t (no containment check).
    std::array<double, 3> barycentric(int t, Point2 p) const;

    MeshQuality quality() const;
    /// FNV-1a hash over the binary coordinates and connectivity.
    std::uint64_t checksum() const;

private:
    std::vector<Point2> vertices_;
    std::vector<Triangle> triangles_;
    std::vector<Edge> boundary_edges_;
    std::vector<Edge> edges_;
    std::vector<std::array<int, 3>> triangle_edges_;
    std::vector<int> parents_;
    std::vector<char> boundary_vertex_;
    DomainTag tag_;
    double h_ = 0.0;
    std::unique_ptr<PointLocator> locator_;
};

using MeshPtr = std::shared_ptr<const Mesh>;

MeshPtr build_structured_square(int n);
MeshPtr build_disk_polygon(int rings);
MeshPtr refine_uniform(const Mesh& mesh);
Location locate_point(const Mesh& mesh, Point2 p);

/// Reconstructs the physical point from a location (affine map of the triangle).
Point2 reconstruct(const Mesh& mesh, const Location& loc);

/// Maps every triangle of `fine` to the triangle of `coarse` containing it.
/// Throws ErrorKind::Refinement when some fine triangle straddles coarse ones.
std::vector<int> coarse_parent_map(const Mesh& fine, const Mesh& coarse);

/// Plain-text format: `vertices N triangles M`, then N lines `x1 x2`, then M
/// lines `i j k`. Coordinates are written in shortest round-trip form.
void write_mesh(std::ostream& out, const Mesh& mesh);
MeshPtr read_mesh(std::istream& in, DomainTag tag = DomainTag::UnitSquare);

}  // namespace lipfem
