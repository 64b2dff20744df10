#include "lipfem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "lipfem/error.hpp"
#include "lipfem/text.hpp"

namespace lipfem {

namespace {

constexpr double kLocateTol = 1e-12;

double cross(Point2 a, Point2 b) { return a.x1 * b.x2 - a.x2 * b.x1; }

double signed_area(Point2 a, Point2 b, Point2 c) { return 0.5 * cross(b - a, c - a); }

std::uint64_t edge_key(int a, int b) {
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (lo << 32) | hi;
}

double angle_at(Point2 apex, Point2 p, Point2 q) {
    const Point2 u = p - apex;
    const Point2 v = q - apex;
    const double c = (u.x1 * v.x1 + u.x2 * v.x2) / (std::hypot(u.x1, u.x2) * std::hypot(v.x1, v.x2));
    return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

}  // namespace

double distance(Point2 a, Point2 b) { return std::hypot(a.x1 - b.x1, a.x2 - b.x2); }

const char* to_string(DomainTag tag) noexcept {
    return tag == DomainTag::UnitSquare ? "unit_square" : "disk_polygon";
}

DomainTag domain_tag_from_string(const std::string& name) {
    if (name == "unit_square") return DomainTag::UnitSquare;
    if (name == "disk_polygon") return DomainTag::DiskPolygon;
    fail(ErrorKind::InvalidArgument, "unknown domain '" + name + "'");
}

// Uniform bucket grid over triangle bounding boxes; each bucket lists triangle
// ids in increasing order so the first hit honours the lowest-index tie rule.
class PointLocator {
public:
    explicit PointLocator(const Mesh& mesh) {
        const auto& verts = mesh.vertices();
        lo_ = hi_ = verts.empty() ? Point2{} : verts.front();
        for (const auto& v : verts) {
            lo_.x1 = std::min(lo_.x1, v.x1);
            lo_.x2 = std::min(lo_.x2, v.x2);
            hi_.x1 = std::max(hi_.x1, v.x1);
            hi_.x2 = std::max(hi_.x2, v.x2);
        }
        const double pad = 1e-9 * std::max(1.0, std::max(hi_.x1 - lo_.x1, hi_.x2 - lo_.x2));
        lo_ = lo_ - Point2{pad, pad};
        hi_ = hi_ + Point2{pad, pad};
        n_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.num_triangles()) / 2.0)));
        buckets_.resize(static_cast<std::size_t>(n_) * n_);
        for (int t = 0; t < mesh.num_triangles(); ++t) {
            const auto c = mesh.corners(t);
            Point2 blo = c[0], bhi = c[0];
            for (const auto& p : c) {
                blo.x1 = std::min(blo.x1, p.x1);
                blo.x2 = std::min(blo.x2, p.x2);
                bhi.x1 = std::max(bhi.x1, p.x1);
                bhi.x2 = std::max(bhi.x2, p.x2);
            }
            const auto [i0, j0] = cell(blo - Point2{pad, pad});
            const auto [i1, j1] = cell(bhi + Point2{pad, pad});
            for (int j = j0; j <= j1; ++j)
                for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j) * n_ + i].push_back(t);
        }
    }

    const std::vector<int>* candidates(Point2 p) const {
        if (p.x1 < lo_.x1 || p.x2 < lo_.x2 || p.x1 > hi_.x1 || p.x2 > hi_.x2) return nullptr;
        const auto [i, j] = cell(p);
        return &buckets_[static_cast<std::size_t>(j) * n_ + i];
    }

private:
    std::pair<int, int> cell(Point2 p) const {
        auto idx = [&](double v, double lo, double hi) {
            const int k = static_cast<int>(std::floor((v - lo) / (hi - lo) * n_));
            return std::clamp(k, 0, n_ - 1);
        };
        return {idx(p.x1, lo_.x1, hi_.x1), idx(p.x2, lo_.x2, hi_.x2)};
    }

    Point2 lo_, hi_;
    int n_ = 1;
    std::vector<std::vector<int>> buckets_;
};

Mesh::Mesh(std::vector<Point2> vertices, std::vector<Triangle> triangles, DomainTag tag,
           std::vector<int> parents, double h_override)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)), parents_(std::move(parents)), tag_(tag) {
    if (vertices_.empty() || triangles_.empty()) fail(ErrorKind::InvalidArgument, "empty mesh");
    const int nv = num_vertices();
    for (auto& tri : triangles_) {
        for (int v : tri)
            if (v < 0 || v >= nv) fail(ErrorKind::InvalidArgument, "triangle references missing vertex");
        const double a = signed_area(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
        if (a == 0.0) fail(ErrorKind::InvalidArgument, "degenerate triangle");
        if (a < 0.0) std::swap(tri[1], tri[2]);
    }
    if (!parents_.empty() && parents_.size() != triangles_.size())
        fail(ErrorKind::InvalidArgument, "parent map size mismatch");

    std::unordered_map<std::uint64_t, int> edge_ids;
    edge_ids.reserve(triangles_.size() * 2);
    std::vector<int> edge_count;
    std::vector<Edge> edge_orientation;
    triangle_edges_.resize(triangles_.size());
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        const auto& tri = triangles_[t];
        for (int k = 0; k < 3; ++k) {
            const int a = tri[k];
            const int b = tri[(k + 1) % 3];
            auto [it, inserted] = edge_ids.try_emplace(edge_key(a, b), static_cast<int>(edges_.size()));
            if (inserted) {
                edges_.push_back({std::min(a, b), std::max(a, b)});
                edge_count.push_back(0);
                edge_orientation.push_back({a, b});
            }
            ++edge_count[it->second];
            if (edge_count[it->second] > 2) fail(ErrorKind::InvalidArgument, "non-manifold edge");
            triangle_edges_[t][k] = it->second;
        }
    }
    boundary_vertex_.assign(vertices_.size(), 0);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        if (edge_count[e] == 1) {
            boundary_edges_.push_back(edge_orientation[e]);
            boundary_vertex_[edges_[e][0]] = 1;
            boundary_vertex_[edges_[e][1]] = 1;
        }
    }
    if (h_override > 0.0) {
        h_ = h_override;
    } else {
        for (int t = 0; t < num_triangles(); ++t) h_ = std::max(h_, diameter(t));
    }
    locator_ = std::make_unique<PointLocator>(*this);
}

Mesh::~Mesh() = default;
Mesh::Mesh(Mesh&&) noexcept = default;
Mesh& Mesh::operator=(Mesh&&) noexcept = default;

std::array<Point2, 3> Mesh::corners(int t) const {
    const auto& tri = triangles_[t];
    return {vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]};
}

double Mesh::area(int t) const {
    const auto c = corners(t);
    return signed_area(c[0], c[1], c[2]);
}

double Mesh::diameter(int t) const {
    const auto c = corners(t);
    return std::max({distance(c[0], c[1]), distance(c[1], c[2]), distance(c[2], c[0])});
}

Point2 Mesh::centroid(int t) const {
    const auto c = corners(t);
    return {(c[0].x1 + c[1].x1 + c[2].x1) / 3.0, (c[0].x2 + c[1].x2 + c[2].x2) / 3.0};
}

std::array<double, 3> Mesh::barycentric(int t, Point2 p) const {
    const auto c = corners(t);
    const Point2 e1 = c[1] - c[0];
    const Point2 e2 = c[2] - c[0];
    const Point2 d = p - c[0];
    const double det = cross(e1, e2);
    const double l1 = cross(d, e2) / det;
    const double l2 = cross(e1, d) / det;
    return {1.0 - l1 - l2, l1, l2};
}

Location Mesh::locate(Point2 p) const {
    if (!std::isfinite(p.x1) || !std::isfinite(p.x2)) fail(ErrorKind::OutsideDomain, "non-finite point");
    if (const auto* cand = locator_->candidates(p)) {
        for (int t : *cand) {
            const auto b = barycentric(t, p);
            if (b[0] >= -kLocateTol && b[1] >= -kLocateTol && b[2] >= -kLocateTol) return {t, b};
        }
    }
    std::ostringstream msg;
    msg << "point (" << format_double(p.x1) << ", " << format_double(p.x2) << ") is outside the mesh";
    fail(ErrorKind::OutsideDomain, msg.str());
}

MeshQuality Mesh::quality() const {
    MeshQuality q;
    q.h_min = INFINITY;
    q.min_angle_deg = 180.0;
    for (int t = 0; t < num_triangles(); ++t) {
        const auto c = corners(t);
        const double d = diameter(t);
        q.h_max = std::max(q.h_max, d);
        q.h_min = std::min(q.h_min, d);
        q.area += area(t);
        for (int k = 0; k < 3; ++k) {
            const double a = angle_at(c[k], c[(k + 1) % 3], c[(k + 2) % 3]);
            q.min_angle_deg = std::min(q.min_angle_deg, a);
            q.max_angle_deg = std::max(q.max_angle_deg, a);
        }
    }
    for (const auto& e : boundary_edges_) q.boundary_polygon_area += 0.5 * cross(vertices_[e[0]], vertices_[e[1]]);
    return q;
}

std::uint64_t Mesh::checksum() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* data, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    mix(vertices_.data(), vertices_.size() * sizeof(Point2));
    mix(triangles_.data(), triangles_.size() * sizeof(Triangle));
    return h;
}

MeshPtr build_structured_square(int n) {
    if (n < 1) fail(ErrorKind::InvalidArgument, "structured square needs n >= 1");
    std::vector<Point2> verts;
    verts.reserve(static_cast<std::size_t>(n + 1) * (n + 1));
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            verts.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    std::vector<Triangle> tris;
    tris.reserve(2 * static_cast<std::size_t>(n) * n);
    auto id = [n](int i, int j) { return j * (n + 1) + i; };
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            tris.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            tris.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    return std::make_shared<Mesh>(std::move(verts), std::move(tris), DomainTag::UnitSquare,
                                  std::vector<int>{}, std::sqrt(2.0) / n);
}

MeshPtr build_disk_polygon(int rings) {
    if (rings < 1) fail(ErrorKind::InvalidArgument, "disk polygon needs rings >= 1");
    std::vector<Point2> verts{{0.0, 0.0}};
    std::vector<int> ring_start{0};
    std::vector<int> ring_size{1};
    for (int k = 1; k <= rings; ++k) {
        ring_start.push_back(static_cast<int>(verts.size()));
        ring_size.push_back(6 * k);
        const double r = static_cast<double>(k) / rings;
        for (int i = 0; i < 6 * k; ++i) {
            const double phi = 2.0 * std::numbers::pi * i / (6 * k);
            if (k == rings)
                verts.push_back({std::cos(phi), std::sin(phi)});
            else
                verts.push_back({r * std::cos(phi), r * std::sin(phi)});
        }
    }
    std::vector<Triangle> tris;
    for (int k = 1; k <= rings; ++k) {
        const int m_in = ring_size[k - 1];
        const int m_out = ring_size[k];
        auto inner = [&](int i) { return ring_start[k - 1] + (i % m_in); };
        auto outer = [&](int j) { return ring_start[k] + (j % m_out); };
        if (k == 1) {
            for (int j = 0; j < m_out; ++j) tris.push_back({0, outer(j), outer(j + 1)});
            continue;
        }
        // Merge the two rings by angle; both start at angle zero.
        int i = 0, j = 0;
        while (i < m_in || j < m_out) {
            const double next_in = static_cast<double>(i + 1) / m_in;
            const double next_out = static_cast<double>(j + 1) / m_out;
            if (j < m_out && (i >= m_in || next_out <= next_in)) {
                tris.push_back({inner(i), outer(j), outer(j + 1)});
                ++j;
            } else {
                tris.push_back({inner(i), outer(j), inner(i + 1)});
                ++i;
            }
        }
    }
    return std::make_shared<Mesh>(std::move(verts), std::move(tris), DomainTag::DiskPolygon);
}

MeshPtr refine_uniform(const Mesh& mesh) {
    const int nv = mesh.num_vertices();
    std::vector<Point2> verts = mesh.vertices();
    verts.reserve(nv + mesh.edges().size());
    std::vector<int> multiplicity(mesh.edges().size(), 0);
    for (int t = 0; t < mesh.num_triangles(); ++t)
        for (int k = 0; k < 3; ++k) ++multiplicity[mesh.triangle_edges(t)[k]];
    for (std::size_t e = 0; e < mesh.edges().size(); ++e) {
        const auto& ed = mesh.edges()[e];
        Point2 mid = 0.5 * (mesh.vertices()[ed[0]] + mesh.vertices()[ed[1]]);
        if (mesh.domain() == DomainTag::DiskPolygon && multiplicity[e] == 1) {
            const double r = std::hypot(mid.x1, mid.x2);
            mid = (1.0 / r) * mid;
        }
        verts.push_back(mid);
    }
    std::vector<Triangle> tris;
    std::vector<int> parents;
    tris.reserve(4 * static_cast<std::size_t>(mesh.num_triangles()));
    parents.reserve(tris.capacity());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles()[t];
        const auto& te = mesh.triangle_edges(t);
        const int m0 = nv + te[0];
        const int m1 = nv + te[1];
        const int m2 = nv + te[2];
        tris.push_back({tri[0], m0, m2});
        tris.push_back({m0, tri[1], m1});
        tris.push_back({m2, m1, tri[2]});
        tris.push_back({m0, m1, m2});
        parents.insert(parents.end(), 4, t);
    }
    const double h = mesh.domain() == DomainTag::UnitSquare ? mesh.h() / 2.0 : 0.0;
    return std::make_shared<Mesh>(std::move(verts), std::move(tris), mesh.domain(), std::move(parents), h);
}

Location locate_point(const Mesh& mesh, Point2 p) { return mesh.locate(p); }

Point2 reconstruct(const Mesh& mesh, const Location& loc) {
    const auto c = mesh.corners(loc.triangle);
    return {loc.bary[0] * c[0].x1 + loc.bary[1] * c[1].x1 + loc.bary[2] * c[2].x1,
            loc.bary[0] * c[0].x2 + loc.bary[1] * c[1].x2 + loc.bary[2] * c[2].x2};
}

std::vector<int> coarse_parent_map(const Mesh& fine, const Mesh& coarse) {
    std::vector<int> map(fine.num_triangles());
    for (int t = 0; t < fine.num_triangles(); ++t) {
        const int c = coarse.locate(fine.centroid(t)).triangle;
        for (const auto& p : fine.corners(t)) {
            const auto b = coarse.barycentric(c, p);
            if (b[0] < -1e-10 || b[1] < -1e-10 || b[2] < -1e-10)
                fail(ErrorKind::Refinement, "fine triangle " + std::to_string(t) + " is not contained in coarse triangle " +
                                                std::to_string(c));
        }
        map[t] = c;
    }
    return map;
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
    out << "vertices " << mesh.num_vertices() << " triangles " << mesh.num_triangles() << '\n';
    for (const auto& v : mesh.vertices()) out << format_double(v.x1) << ' ' << format_double(v.x2) << '\n';
    for (const auto& t : mesh.triangles()) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

MeshPtr read_mesh(std::istream& in, DomainTag tag) {
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::Io, "mesh file is empty");
    std::istringstream header(line);
    std::string w1, w2;
    long long nv = -1, nt = -1;
    header >> w1 >> nv >> w2 >> nt;
    if (w1 != "vertices" || w2 != "triangles" || nv <= 0 || nt <= 0)
        fail(ErrorKind::Io, "bad mesh header: '" + line + "'");
    std::vector<Point2> verts(nv);
    for (long long i = 0; i < nv; ++i) {
        if (!std::getline(in, line)) fail(ErrorKind::Io, "truncated vertex block");
        const auto parts = split(trim(line), ' ');
        if (parts.size() != 2) fail(ErrorKind::Io, "bad vertex line " + std::to_string(i + 2));
        verts[i] = {parse_double(parts[0]), parse_double(parts[1])};
    }
    std::vector<Triangle> tris(nt);
    for (long long i = 0; i < nt; ++i) {
        if (!std::getline(in, line)) fail(ErrorKind::Io, "truncated triangle block");
        const auto parts = split(trim(line), ' ');
        if (parts.size() != 3) fail(ErrorKind::Io, "bad triangle line " + std::to_string(nv + i + 2));
        for (int k = 0; k < 3; ++k) tris[i][k] = static_cast<int>(parse_int(parts[k]));
    }
    return std::make_shared<Mesh>(std::move(verts), std::move(tris), tag);
}

}  // namespace lipfem
