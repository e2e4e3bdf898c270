#pragma once

// Periodic isoradial graphs: construction from a description document,
// built-in lattices, duals / rhombi / chains, the rhombus-tiling graph
// used by the propagation machinery, and the superposition G_T u G_T*.

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "isoradial/common.hpp"

namespace isoradial {

enum class Color : std::uint8_t { none, black, white };
enum class Role : std::uint8_t { none, primal, dual, edge };

enum class ValidationMode : std::uint8_t {
  strict,      // rejects half-angles outside [1e-7, pi/2 - 1e-7]
  permissive,  // allows degenerate rhombi (thermo deformation endpoints only)
};

// ---------------------------------------------------------------------------
// Keys for vertex / tiling-vertex instances of the periodic graph
// ---------------------------------------------------------------------------

/// Instance of vertex class `cls` translated by a*lambda1 + b*lambda2.
struct VKey {
  int cls = 0;
  int a = 0;
  int b = 0;
  friend bool operator==(const VKey&, const VKey&) = default;
  friend auto operator<=>(const VKey&, const VKey&) = default;
};

/// Instance of a rhombus-tiling vertex: t < nv refers to vertex class t,
/// t >= nv refers to face class t - nv (a dual vertex).
struct TKey {
  int t = 0;
  int a = 0;
  int b = 0;
  friend bool operator==(const TKey&, const TKey&) = default;
  friend auto operator<=>(const TKey&, const TKey&) = default;
};

struct KeyHash {
  std::size_t operator()(const VKey& k) const {
    std::uint64_t h = (std::uint64_t(std::uint32_t(k.cls)) << 40) ^
                      (std::uint64_t(std::uint32_t(k.a + (1 << 19))) << 20) ^
                      std::uint64_t(std::uint32_t(k.b + (1 << 19)));
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    return std::size_t(h);
  }
  std::size_t operator()(const TKey& k) const {
    return (*this)(VKey{k.t, k.a, k.b});
  }
};

// ---------------------------------------------------------------------------
// DirectionTable
// ---------------------------------------------------------------------------

/// Canonicalized set of unit directions generated by the rhombus sides.
/// Directions are merged when their angles differ by less than 1e-9 and are
/// referenced by integer index everywhere, so pole/zero cancellation in the
/// factor calculus is exact.
class DirectionTable {
 public:
  static constexpr double kMergeTol = 1e-9;

  int size() const { return int(angles_.size()); }
  double angle(int i) const { return angles_[i]; }
  Complex dir(int i) const { return units_[i]; }
  int antipode(int i) const { return antipode_[i]; }

  /// Index of the direction matching unit vector v (angle within kMergeTol).
  int find(Complex v) const {
    int i = lookup(std::atan2(v.imag(), v.real()));
    if (i < 0) throw GeometryError("direction not in table: " + fmt17(std::arg(v)));
    return i;
  }

  /// Build from a list of (non-canonical) direction vectors; closes the set
  /// under the antipodal map.
  static DirectionTable build(std::vector<Complex> vs) {
    std::vector<double> raw;
    raw.reserve(vs.size() * 2);
    for (Complex v : vs) {
      const double n = std::abs(v);
      if (n < 1e-14) throw GeometryError("zero-length direction");
      double a = std::atan2(v.imag(), v.real());
      raw.push_back(wrap_angle(a));
      raw.push_back(wrap_angle(a + kPi));
    }
    std::sort(raw.begin(), raw.end());
    DirectionTable t;
    for (double a : raw) {
      if (!t.angles_.empty() && a - t.angles_.back() < kMergeTol) continue;
      t.angles_.push_back(a);
    }
    // wrap-around merge between last and first (+2pi)
    if (t.angles_.size() > 1 &&
        t.angles_.front() + kTwoPi - t.angles_.back() < kMergeTol) {
      t.angles_.pop_back();
    }
    t.units_.reserve(t.angles_.size());
    for (double a : t.angles_) t.units_.push_back(unit(a));
    t.antipode_.resize(t.angles_.size());
    for (int i = 0; i < t.size(); ++i) {
      int j = t.lookup(wrap_angle(t.angles_[i] + kPi));
      if (j < 0) throw GeometryError("direction table not antipode-closed");
      t.antipode_[i] = j;
    }
    for (int i = 0; i < t.size(); ++i)
      if (t.antipode_[t.antipode_[i]] != i)
        throw GeometryError("antipode map is not an involution");
    return t;
  }

 private:
  int lookup(double a) const {
    a = wrap_angle(a);
    auto it = std::lower_bound(angles_.begin(), angles_.end(), a - kMergeTol);
    if (it != angles_.end() && std::abs(*it - a) < kMergeTol)
      return int(it - angles_.begin());
    // wrap-around: angle near pi may match the entry near -pi and vice versa
    if (!angles_.empty()) {
      if (std::abs(angles_.front() + kTwoPi - a) < kMergeTol) return 0;
      if (std::abs(angles_.back() - kTwoPi - a) < kMergeTol)
        return int(angles_.size()) - 1;
    }
    return -1;
  }

  std::vector<double> angles_;
  std::vector<Complex> units_;
  std::vector<int> antipode_;
};

// ---------------------------------------------------------------------------
// Graph description document (External Interface, JSON-backed)
// ---------------------------------------------------------------------------

struct DocVertex {
  int id = 0;
  Complex pos;
  Color color = Color::none;
};

struct DocEdge {
  int u = 0, v = 0;  // vertex ids; v lives in cell (du, dv)
  int du = 0, dv = 0;
};

struct GraphDoc {
  Complex lambda1, lambda2;
  std::vector<DocVertex> vertices;
  std::vector<DocEdge> edges;
};

// ---------------------------------------------------------------------------
// Core graph structures
// ---------------------------------------------------------------------------

struct EdgeClass {
  int u = 0, v = 0;  // vertex class indices; v-copy offset (du, dv)
  int du = 0, dv = 0;
};

/// One rhombus R(e) per edge class, anchored at cell offset (0,0) of e.
/// (w4, x4, b4, y4) are the four corners in counterclockwise order; w4 and b4
/// are the graph vertices (w4 the white one when the graph is bipartite),
/// x4 / y4 the dual vertices. theta is the half-angle at w4 and b4.
struct Rhombus {
  int edge = 0;
  Complex w4, x4, b4, y4;
  double theta = 0;
  int dir_wx = -1;  // direction index of x4 - w4
  int dir_wy = -1;  // direction index of y4 - w4
  bool swapped = false;  // true when w4 is edge endpoint v rather than u
  // tiling vertices of the four corners (offsets relative to the anchor)
  TKey tw, tx, tb, ty;
};

/// Maximal sequence of rhombi glued along opposite (parallel) sides.
/// Stored for one period: members are (rhombus class, offset); the chain
/// repeats under translation by `period` cells.
struct Chain {
  int direction = -1;                 // common-parallel direction index
  std::vector<std::pair<int, std::array<int, 2>>> members;  // (rhombus, offset)
  std::array<int, 2> period{0, 0};
};

/// One side of a rhombus in the tiling graph. `dir` indexes the direction of
/// (to - from). For sides with a white endpoint the canonical orientation is
/// white -> dual; with a black endpoint it is dual -> black; `canonical` says
/// whether (from -> to) agrees with it. `chain`/`chain_off` identify the chain
/// this side is interior to (the one glued across it).
struct TilingSide {
  TKey from, to;
  int dir = -1;
  bool canonical = true;
  int chain = -1;
  std::array<int, 2> chain_off{0, 0};
};

class IsoradialGraph {
 public:
  ValidationMode mode = ValidationMode::strict;
  Complex lambda1, lambda2;
  std::vector<DocVertex> vertices;          // per vertex class
  std::vector<EdgeClass> edges;
  bool bipartite = false;
  bool is_superposition = false;

  // derived structure
  struct Incidence {
    int edge;
    bool from_u;  // tail is this vertex class
  };
  std::vector<std::vector<Incidence>> star;  // per vertex class, ccw by angle

  struct FaceClass {
    std::vector<std::pair<int, bool>> boundary;  // directed edge classes (edge, fwd)
    Complex center;                              // circumcenter, anchor offsets
    std::vector<VKey> corners;                   // vertex instances on boundary
  };
  std::vector<FaceClass> faces;

  // left face of each directed edge class at anchor offset (0,0):
  // face class index and the offset of that face instance.
  std::vector<std::array<int, 3>> left_face;   // index by 2*edge + (fwd?0:1): {cls, a, b}

  std::vector<Rhombus> rhombi;  // one per edge class
  DirectionTable directions;
  std::vector<Chain> chains;
  std::vector<std::vector<TilingSide>> tiling_star;  // per tiling class

  // superposition bookkeeping
  std::shared_ptr<const IsoradialGraph> base;  // non-null for superpositions
  std::vector<Role> roles;                     // per vertex class
  std::vector<int> base_index;                 // vertex/face/edge class in base

  int num_vertex_classes() const { return int(vertices.size()); }
  int num_face_classes() const { return int(faces.size()); }
  int num_tiling_classes() const { return num_vertex_classes() + num_face_classes(); }

  Complex shift(int a, int b) const { return double(a) * lambda1 + double(b) * lambda2; }

  Complex pos(const VKey& k) const { return vertices[k.cls].pos + shift(k.a, k.b); }

  Complex tile_pos(const TKey& k) const {
    const int nv = num_vertex_classes();
    Complex p = k.t < nv ? vertices[k.t].pos : faces[k.t - nv].center;
    return p + shift(k.a, k.b);
  }

  bool tile_is_vertex(const TKey& k) const { return k.t < num_vertex_classes(); }

  Color tile_color(const TKey& k) const {
    return tile_is_vertex(k) ? vertices[k.t].color : Color::none;
  }

  TKey tile_of(const VKey& k) const { return TKey{k.cls, k.a, k.b}; }
  TKey tile_of_face(int face_cls, int a, int b) const {
    return TKey{num_vertex_classes() + face_cls, a, b};
  }

  double nu(int edge_cls) const { return 2.0 * std::sin(rhombi[edge_cls].theta); }
  double conductance(int edge_cls) const { return std::tan(rhombi[edge_cls].theta); }

  /// Neighbors of a vertex instance: (edge class, other endpoint, dbar/direction data).
  struct Neighbor {
    int edge;
    bool from_u;
    VKey other;
  };
  std::vector<Neighbor> neighbors(const VKey& k) const {
    std::vector<Neighbor> out;
    out.reserve(star[k.cls].size());
    for (const Incidence& inc : star[k.cls]) {
      const EdgeClass& e = edges[inc.edge];
      VKey o = inc.from_u ? VKey{e.v, k.a + e.du, k.b + e.dv}
                          : VKey{e.u, k.a - e.du, k.b - e.dv};
      out.push_back({inc.edge, inc.from_u, o});
    }
    return out;
  }

  std::vector<TilingSide> tiling_neighbors(const TKey& k) const {
    std::vector<TilingSide> out = tiling_star[k.t];
    for (TilingSide& s : out) {
      s.from.a += k.a; s.from.b += k.b;
      s.to.a += k.a; s.to.b += k.b;
      s.chain_off[0] += k.a; s.chain_off[1] += k.b;
    }
    return out;
  }

  /// Vertex instances within Euclidean distance `radius` of `center`.
  std::vector<VKey> window(Complex center, double radius,
                           std::optional<Color> color = std::nullopt) const {
    std::vector<VKey> out;
    const auto [amax, bmax] = cell_bound(radius + 2.0);
    const auto [ca, cb] = nearest_cell(center);
    for (int a = ca - amax; a <= ca + amax; ++a)
      for (int b = cb - bmax; b <= cb + bmax; ++b)
        for (int c = 0; c < num_vertex_classes(); ++c) {
          VKey k{c, a, b};
          if (color && vertices[c].color != *color) continue;
          if (std::abs(pos(k) - center) <= radius) out.push_back(k);
        }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Lattice cell whose origin is closest to p.
  std::pair<int, int> nearest_cell(Complex p) const {
    const double det = cross(lambda1, lambda2);
    const double a = cross(p, lambda2) / det;
    const double b = cross(lambda1, p) / det;
    return {int(std::lround(a)), int(std::lround(b))};
  }

  /// Conservative per-axis cell count covering a disk of the given radius.
  std::pair<int, int> cell_bound(double radius) const {
    // |a l1 + b l2| >= dist; use the dual basis to bound |a|, |b|.
    const double det = std::abs(cross(lambda1, lambda2));
    const int amax = int(std::ceil(radius * std::abs(lambda2) / det)) + 1;
    const int bmax = int(std::ceil(radius * std::abs(lambda1) / det)) + 1;
    return {amax, bmax};
  }

  const Rhombus& rhombus_of(int edge_cls) const { return rhombi[edge_cls]; }

  /// The white/black endpoints of an edge instance (bipartite graphs).
  std::pair<VKey, VKey> wb_of_edge(int edge_cls, int a, int b) const {
    const EdgeClass& e = edges[edge_cls];
    VKey ku{e.u, a, b}, kv{e.v, a + e.du, b + e.dv};
    if (vertices[e.u].color == Color::white) return {ku, kv};
    return {kv, ku};
  }
};

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

namespace detail {

struct DirectedEdge {
  int edge;
  bool fwd;
  int a, b;  // cell offset of the anchor (edge class instance)
};

inline Complex edge_vector(const IsoradialGraph& g, int edge, bool fwd) {
  const EdgeClass& e = g.edges[edge];
  Complex d = g.vertices[e.v].pos + g.shift(e.du, e.dv) - g.vertices[e.u].pos;
  return fwd ? d : -d;
}

inline VKey tail_of(const IsoradialGraph& g, const DirectedEdge& d) {
  const EdgeClass& e = g.edges[d.edge];
  return d.fwd ? VKey{e.u, d.a, d.b} : VKey{e.v, d.a + e.du, d.b + e.dv};
}

inline VKey head_of(const IsoradialGraph& g, const DirectedEdge& d) {
  const EdgeClass& e = g.edges[d.edge];
  return d.fwd ? VKey{e.v, d.a + e.du, d.b + e.dv} : VKey{e.u, d.a, d.b};
}

/// Next directed edge when tracing the face to the LEFT of `d`:
/// reverse d, then take the ccw-previous incidence around the head.
inline DirectedEdge face_next(const IsoradialGraph& g, const DirectedEdge& d) {
  VKey h = head_of(g, d);
  const auto& st = g.star[h.cls];
  // locate reverse(d) among the incidences of h.cls
  int idx = -1;
  for (int i = 0; i < int(st.size()); ++i)
    if (st[i].edge == d.edge && st[i].from_u == !d.fwd) { idx = i; break; }
  if (idx < 0) throw GraphError("inconsistent rotation system");
  int prev = (idx + int(st.size()) - 1) % int(st.size());
  const auto& inc = g.star[h.cls][prev];
  const EdgeClass& e2 = g.edges[inc.edge];
  DirectedEdge n;
  n.edge = inc.edge;
  n.fwd = inc.from_u;
  if (inc.from_u) {
    n.a = h.a;
    n.b = h.b;
  } else {
    n.a = h.a - e2.du;
    n.b = h.b - e2.dv;
  }
  return n;
}

inline Complex circumcenter(Complex p1, Complex p2, Complex p3) {
  const Complex d2 = p2 - p1, d3 = p3 - p1;
  const double det = 2.0 * cross(d2, d3);
  if (std::abs(det) < 1e-12) throw GeometryError("collinear face corners");
  const double n2 = std::norm(d2), n3 = std::norm(d3);
  const double ux = (d3.imag() * n2 - d2.imag() * n3) / det;
  const double uy = (d2.real() * n3 - d3.real() * n2) / det;
  return p1 + Complex(ux, uy);
}

inline bool point_in_polygon(Complex p, const std::vector<Complex>& poly, double tol) {
  // boundary counts as inside (within tol)
  int n = int(poly.size());
  for (int i = 0; i < n; ++i) {
    Complex a = poly[i], b = poly[(i + 1) % n];
    Complex ab = b - a;
    double len = std::abs(ab);
    if (len < tol) {
      if (std::abs(p - a) <= tol) return true;
      continue;
    }
    double t = std::clamp(((p - a) / ab).real(), 0.0, 1.0);
    if (std::abs(p - (a + t * ab)) <= tol) return true;
  }
  bool inside = false;
  for (int i = 0, j = n - 1; i < n; j = i++) {
    const Complex& a = poly[i];
    const Complex& b = poly[j];
    if ((a.imag() > p.imag()) != (b.imag() > p.imag())) {
      double xi = a.real() + (p.imag() - a.imag()) / (b.imag() - a.imag()) * (b.real() - a.real());
      if (p.real() < xi) inside = !inside;
    }
  }
  return inside;
}

}  // namespace detail

/// Validate the parsed document and build the full derived structure.
/// Throws ParseError for malformed documents and GeometryError naming the
/// first violated invariant.
inline IsoradialGraph build_graph(const GraphDoc& doc,
                                  ValidationMode mode = ValidationMode::strict) {
  IsoradialGraph g;
  g.mode = mode;
  g.lambda1 = doc.lambda1;
  g.lambda2 = doc.lambda2;

  if (std::abs(cross(g.lambda1, g.lambda2)) < 1e-9)
    throw GeometryError("lattice vectors dependent over the reals");
  if (doc.vertices.empty() || doc.edges.empty())
    throw ParseError("empty vertex or edge list");

  std::unordered_map<int, int> id2cls;
  for (const DocVertex& v : doc.vertices) {
    if (!id2cls.emplace(v.id, int(g.vertices.size())).second)
      throw ParseError("duplicate vertex id " + std::to_string(v.id));
    g.vertices.push_back(v);
  }
  int colored = 0;
  for (const DocVertex& v : g.vertices) colored += v.color != Color::none;
  if (colored != 0 && colored != int(g.vertices.size()))
    throw ParseError("colors must be given for all vertices or none");
  g.bipartite = colored == int(g.vertices.size());

  for (const DocEdge& de : doc.edges) {
    auto iu = id2cls.find(de.u), iv = id2cls.find(de.v);
    if (iu == id2cls.end() || iv == id2cls.end())
      throw ParseError("edge references unknown vertex id");
    g.edges.push_back({iu->second, iv->second, de.du, de.dv});
  }

  if (g.bipartite) {
    for (const EdgeClass& e : g.edges) {
      Color cu = g.vertices[e.u].color, cv = g.vertices[e.v].color;
      if (cu == cv) throw GeometryError("non-bipartite coloring on an edge");
    }
  }

  // rotation system
  g.star.assign(g.vertices.size(), {});
  for (int ei = 0; ei < int(g.edges.size()); ++ei) {
    g.star[g.edges[ei].u].push_back({ei, true});
    g.star[g.edges[ei].v].push_back({ei, false});
  }
  for (int c = 0; c < int(g.vertices.size()); ++c) {
    auto& st = g.star[c];
    std::stable_sort(st.begin(), st.end(), [&](const auto& x, const auto& y) {
      Complex dx = detail::edge_vector(g, x.edge, x.from_u);
      Complex dy = detail::edge_vector(g, y.edge, y.from_u);
      return std::atan2(dx.imag(), dx.real()) < std::atan2(dy.imag(), dy.real());
    });
  }

  // face tracing (left faces of all directed edge classes)
  g.left_face.assign(2 * g.edges.size(), {-1, 0, 0});
  auto de_index = [](int edge, bool fwd) { return 2 * edge + (fwd ? 0 : 1); };
  for (int ei = 0; ei < int(g.edges.size()); ++ei) {
    for (bool fwd : {true, false}) {
      if (g.left_face[de_index(ei, fwd)][0] >= 0) continue;
      IsoradialGraph::FaceClass f;
      detail::DirectedEdge d{ei, fwd, 0, 0};
      std::vector<detail::DirectedEdge> orbit;
      for (int guard = 0; guard < 1 << 16; ++guard) {
        orbit.push_back(d);
        detail::DirectedEdge n = detail::face_next(g, d);
        if (n.edge == ei && n.fwd == fwd) {
          if (n.a != 0 || n.b != 0)
            throw GeometryError("face orbit does not close in the plane");
          break;
        }
        d = n;
        if (guard == (1 << 16) - 1) throw GeometryError("unterminated face orbit");
      }
      const int fc = int(g.faces.size());
      for (const auto& o : orbit) {
        f.boundary.push_back({o.edge, o.fwd});
        f.corners.push_back(detail::tail_of(g, o));
        g.left_face[de_index(o.edge, o.fwd)] = {fc, -o.a, -o.b};
        // the face instance containing directed instance (o.edge, o.fwd, 0,0)
        // is the anchor face translated by (-o.a, -o.b)
      }
      // circumcenter from the most spread corner triple
      std::vector<Complex> ps;
      for (const VKey& k : f.corners) ps.push_back(g.pos(k));
      if (ps.size() < 3) throw GeometryError("face with fewer than 3 corners");
      int bi = 0, bj = 1, bk = 2;
      double best = -1;
      for (int i = 0; i < int(ps.size()); ++i)
        for (int j = i + 1; j < int(ps.size()); ++j)
          for (int k = j + 1; k < int(ps.size()); ++k) {
            double area = std::abs(cross(ps[j] - ps[i], ps[k] - ps[i]));
            if (area > best) { best = area; bi = i; bj = j; bk = k; }
          }
      if (best < 1e-10) throw GeometryError("degenerate (collinear) face");
      f.center = detail::circumcenter(ps[bi], ps[bj], ps[bk]);
      const double tol = mode == ValidationMode::strict ? 1e-9 : 1e-7;
      for (Complex p : ps)
        if (std::abs(std::abs(p - f.center) - 1.0) > tol)
          throw GeometryError("face is not inscribed in a unit circle (distance " +
                              fmt17(std::abs(p - f.center)) + ")");
      if (mode == ValidationMode::strict) {
        if (!detail::point_in_polygon(f.center, ps, 1e-9))
          throw GeometryError("circumcenter outside its face (embedding not regular)");
      }
      g.faces.push_back(std::move(f));
    }
  }

  // Euler check on the torus quotient: V - E + F = 0
  if (int(g.vertices.size()) - int(g.edges.size()) + int(g.faces.size()) != 0)
    throw GeometryError("face count violates Euler formula; embedding data inconsistent");

  // rhombi
  std::vector<Complex> side_dirs;
  g.rhombi.resize(g.edges.size());
  for (int ei = 0; ei < int(g.edges.size()); ++ei) {
    const EdgeClass& e = g.edges[ei];
    Rhombus r;
    r.edge = ei;
    Complex pu = g.vertices[e.u].pos;
    Complex pv = g.vertices[e.v].pos + g.shift(e.du, e.dv);
    auto lf = g.left_face[de_index(ei, true)];
    auto rf = g.left_face[de_index(ei, false)];
    Complex yc = g.faces[lf[0]].center + g.shift(lf[1], lf[2]);   // left of u->v
    Complex xc = g.faces[rf[0]].center + g.shift(rf[1], rf[2]);   // right of u->v
    bool u_is_w = true;
    if (g.bipartite && g.vertices[e.u].color == Color::black) u_is_w = false;
    if (u_is_w) {
      r.w4 = pu; r.b4 = pv; r.x4 = xc; r.y4 = yc;
      r.swapped = false;
      r.tw = TKey{e.u, 0, 0};
      r.tb = TKey{e.v, e.du, e.dv};
      r.tx = g.tile_of_face(rf[0], rf[1], rf[2]);
      r.ty = g.tile_of_face(lf[0], lf[1], lf[2]);
    } else {
      // reversing the edge swaps the left and right faces
      r.w4 = pv; r.b4 = pu; r.x4 = yc; r.y4 = xc;
      r.swapped = true;
      r.tw = TKey{e.v, e.du, e.dv};
      r.tb = TKey{e.u, 0, 0};
      r.tx = g.tile_of_face(lf[0], lf[1], lf[2]);
      r.ty = g.tile_of_face(rf[0], rf[1], rf[2]);
    }

    const double tol = 1e-10;
    for (Complex s : {r.x4 - r.w4, r.b4 - r.x4, r.y4 - r.b4, r.w4 - r.y4})
      if (std::abs(std::abs(s) - 1.0) > tol)
        throw GeometryError("non-unit rhombus side on edge " + std::to_string(ei) +
                            " (length " + fmt17(std::abs(s)) + ")");
    if (cross(r.x4 - r.w4, r.y4 - r.w4) < -1e-12)
      throw GeometryError("rhombus corners not counterclockwise on edge " +
                          std::to_string(ei));
    // half-angle at w (and b): the corner angle is 2*theta
    double aw = std::abs(wrap_angle(std::arg((r.y4 - r.w4) * std::conj(r.x4 - r.w4))));
    double ab = std::abs(wrap_angle(std::arg((r.x4 - r.b4) * std::conj(r.y4 - r.b4))));
    if (std::abs(aw - ab) > 1e-10)
      throw GeometryError("rhombus corner angles differ at the two graph vertices");
    r.theta = 0.5 * aw;
    if (mode == ValidationMode::strict &&
        (r.theta < 1e-7 || r.theta > kPi / 2 - 1e-7))
      throw GeometryError("degenerate rhombus half-angle " + fmt17(r.theta) +
                          " on edge " + std::to_string(ei));
    if (std::abs(std::abs(r.x4 - r.y4) - 2.0 * std::sin(r.theta)) > 1e-10)
      throw GeometryError("dual edge length != 2 sin(theta) on edge " + std::to_string(ei));
    if (std::abs(r.b4 - r.w4) > 1e-9 && std::abs(r.x4 - r.y4) > 1e-9) {
      Complex a = (r.b4 - r.w4) / std::abs(r.b4 - r.w4);
      Complex b = (r.x4 - r.y4) / std::abs(r.x4 - r.y4);
      if (std::abs((a * std::conj(b)).real()) > 1e-10)
        throw GeometryError("dual edge not perpendicular to primal edge");
    }
    side_dirs.push_back(r.x4 - r.w4);
    side_dirs.push_back(r.y4 - r.w4);
    g.rhombi[ei] = r;
  }

  g.directions = DirectionTable::build(side_dirs);
  for (Rhombus& r : g.rhombi) {
    r.dir_wx = g.directions.find(r.x4 - r.w4);
    r.dir_wy = g.directions.find(r.y4 - r.w4);
  }

  // angle sums around primal vertices: sum of rhombus corner angles = 2pi
  for (int c = 0; c < int(g.vertices.size()); ++c) {
    double sum = 0;
    for (const auto& inc : g.star[c]) {
      const Rhombus& r = g.rhombi[inc.edge];
      sum += 2.0 * r.theta;
    }
    if (std::abs(sum - kTwoPi) > 1e-9)
      throw GeometryError("rhombus angles at vertex " + std::to_string(c) +
                          " sum to " + fmt17(sum) + ", expected 2pi");
  }
  // and around dual vertices: corner angle of R(e) at a face center is pi-2theta
  for (int fc = 0; fc < int(g.faces.size()); ++fc) {
    double sum = 0;
    for (auto [ei, fwd] : g.faces[fc].boundary) sum += kPi - 2.0 * g.rhombi[ei].theta;
    if (std::abs(sum - kTwoPi) > 1e-9)
      throw GeometryError("rhombus angles at face " + std::to_string(fc) +
                          " sum to " + fmt17(sum) + ", expected 2pi");
  }

  // tiling adjacency + chains
  if (mode == ValidationMode::strict) {
    // chains: glue rhombi across parallel sides.
    // Side identity: (tiling endpoints) pair. Each side belongs to exactly
    // two rhombus instances; crossing it steps along the chain whose common
    // parallel is the side direction.
    struct SideRef { int rhombus; int which; };  // which in {0:wx, 1:xb, 2:yb, 3:wy}
    auto side_keys = [&](const Rhombus& r) {
      // each side as (tiling endpoints) with canonical ordering
      std::array<std::pair<TKey, TKey>, 4> s;
      s[0] = {r.tw, r.tx};
      s[1] = {r.tx, r.tb};
      s[2] = {r.ty, r.tb};
      s[3] = {r.tw, r.ty};
      return s;
    };
    std::map<std::pair<TKey, TKey>, std::vector<std::pair<SideRef, std::array<int, 2>>>> side_map;
    auto norm_side = [](TKey a, TKey b, std::array<int, 2>& off) {
      // normalize a side instance so the lexicographically smaller endpoint
      // is at offset 0 in one axis: translate so min(a,b) has offset (0,0)
      TKey m = std::min(a, b);
      off = {m.a, m.b};
      a.a -= off[0]; a.b -= off[1];
      b.a -= off[0]; b.b -= off[1];
      if (b < a) std::swap(a, b);
      return std::make_pair(a, b);
    };
    for (int ri = 0; ri < int(g.rhombi.size()); ++ri) {
      auto ss = side_keys(g.rhombi[ri]);
      for (int w = 0; w < 4; ++w) {
        std::array<int, 2> off;
        auto key = norm_side(ss[w].first, ss[w].second, off);
        side_map[key].push_back({{ri, w}, off});
      }
    }
    for (const auto& [key, refs] : side_map)
      if (refs.size() != 2)
        throw GeometryError("rhombus side shared by " + std::to_string(refs.size()) +
                            " rhombi; embedding inconsistent");

    // chain tracing: state = (rhombus instance, parallel family 0|1);
    // family 0has sides {wx (0), yb (2)} (direction dir_wx), family 1 sides
    // {wy (3), xb (1)} (direction dir_wy).
    std::vector<std::array<int, 2>> chain_id(g.rhombi.size(), {-1, -1});
    auto family_of_side = [](int which) { return (which == 0 || which == 2) ? 0 : 1; };
    auto family_sides = [](int family) {
      return family == 0 ? std::array<int, 2>{0, 2} : std::array<int, 2>{3, 1};
    };
    for (int ri = 0; ri < int(g.rhombi.size()); ++ri) {
      for (int fam = 0; fam < 2; ++fam) {
        if (chain_id[ri][fam] >= 0) continue;
        Chain ch;
        ch.direction = fam == 0 ? g.rhombi[ri].dir_wx : g.rhombi[ri].dir_wy;
        // walk in one direction until the orbit returns to (ri, fam)
        int cr = ri, cfam = fam;
        std::array<int, 2> coff{0, 0};
        int enter_side = family_sides(cfam)[0];
        // we step across the side opposite to enter_side each time; start by
        // stepping across family side [0], then continue.
        for (int guard = 0;; ++guard) {
          if (guard > 1 << 16) throw GeometryError("unterminated chain orbit");
          ch.members.push_back({cr, coff});
          chain_id[cr][cfam] = int(g.chains.size());
          // step across the family side not equal to enter_side
          auto fs = family_sides(cfam);
          int out_side = fs[0] == enter_side ? fs[1] : fs[0];
          auto ss = side_keys(g.rhombi[cr]);
          auto sk = ss[out_side];
          // translate to current offset
          TKey a = sk.first, b = sk.second;
          a.a += coff[0]; a.b += coff[1];
          b.a += coff[0]; b.b += coff[1];
          std::array<int, 2> noff;
          auto key = norm_side(a, b, noff);
          const auto& refs = side_map.at(key);
          // the other rhombus sharing this side
          SideRef nref{-1, -1};
          std::array<int, 2> roff{0, 0};
          for (const auto& [ref, base_off] : refs) {
            // ref's side instance sits at offset noff - base_off
            std::array<int, 2> cand{noff[0] - base_off[0], noff[1] - base_off[1]};
            if (ref.rhombus == cr && cand == coff && family_of_side(ref.which) == cfam)
              continue;
            nref = ref;
            roff = cand;
          }
          if (nref.rhombus < 0) throw GeometryError("chain step failed");
          cr = nref.rhombus;
          cfam = family_of_side(nref.which);
          coff = roff;
          enter_side = nref.which;
          // closed when back at the starting class in the same phase
          if (cr == ri && cfam == fam && enter_side == family_sides(fam)[0]) {
            ch.period = coff;
            break;
          }
        }
        g.chains.push_back(std::move(ch));
      }
    }

    // tiling star with chain labels: the chain a side is interior to is the
    // one that glues its two rhombi.
    g.tiling_star.assign(g.num_tiling_classes(), {});
    std::set<std::tuple<int, TKey, TKey>> seen;
    auto add_side = [&](TKey from, TKey to, int chain, std::array<int, 2> chain_off) {
      // register for class from.t with offsets relative to from
      TilingSide s;
      s.from = TKey{from.t, 0, 0};
      s.to = TKey{to.t, to.a - from.a, to.b - from.b};
      Complex v = g.tile_pos(s.to) - g.tile_pos(s.from);
      s.dir = g.directions.find(v);
      // canonical orientation: white -> dual and dual -> black
      bool from_vertex = g.tile_is_vertex(s.from);
      if (g.bipartite) {
        if (from_vertex)
          s.canonical = (g.vertices[s.from.t].color == Color::white);
        else
          s.canonical = (g.vertices[to.t].color == Color::black);
      } else {
        s.canonical = true;
      }
      s.chain = chain;
      s.chain_off = {chain_off[0] - from.a, chain_off[1] - from.b};
      auto key = std::make_tuple(s.from.t, s.from, s.to);
      if (seen.insert(key).second) g.tiling_star[from.t].push_back(s);
    };
    for (int ri = 0; ri < int(g.rhombi.size()); ++ri) {
      const Rhombus& r = g.rhombi[ri];
      // sides with their interior chain: side wx & yb -> family 0, wy & xb -> family 1
      struct S { TKey a, bq; int fam; };
      const S sides[4] = {{r.tw, r.tx, 0}, {r.ty, r.tb, 0}, {r.tw, r.ty, 1}, {r.tx, r.tb, 1}};
      for (const S& s : sides) {
        int chain = chain_id[ri][s.fam];
        // chain offset: translate of the chain containing this rhombus at offset 0.
        // find the member entry for rhombus ri in that chain
        std::array<int, 2> mo{0, 0};
        for (const auto& [mr, off] : g.chains[chain].members)
          if (mr == ri) { mo = off; break; }
        // the rhombus instance (ri, 0,0) lies on chain instance translated by -mo
        std::array<int, 2> chain_off{-mo[0], -mo[1]};
        add_side(s.a, s.bq, chain, chain_off);
        add_side(s.bq, s.a, chain, chain_off);
      }
    }
  }

  return g;
}

// ---------------------------------------------------------------------------
// Built-in lattices
// ---------------------------------------------------------------------------

enum class BuiltinLattice { square, honeycomb, triangular, deformed_square };

inline GraphDoc builtin_doc(BuiltinLattice kind, double theta = kPi / 4) {
  GraphDoc d;
  switch (kind) {
    case BuiltinLattice::square:
      theta = kPi / 4;
      [[fallthrough]];
    case BuiltinLattice::deformed_square: {
      if (!(theta > 0.0 && theta < kPi / 2))
        throw DomainError("deformed_square half-angle must lie in (0, pi/2)");
      const double c = 2.0 * std::cos(theta), s = 2.0 * std::sin(theta);
      d.lambda1 = Complex(c, s);
      d.lambda2 = Complex(c, -s);
      d.vertices = {{0, Complex(0, 0), Color::white}, {1, Complex(c, 0), Color::black}};
      d.edges = {{0, 1, 0, 0}, {0, 1, -1, 0}, {0, 1, 0, -1}, {0, 1, -1, -1}};
      break;
    }
    case BuiltinLattice::honeycomb: {
      d.lambda1 = Complex(1.5, std::sqrt(3.0) / 2);
      d.lambda2 = Complex(1.5, -std::sqrt(3.0) / 2);
      d.vertices = {{0, Complex(0, 0), Color::black}, {1, Complex(1, 0), Color::white}};
      d.edges = {{0, 1, 0, 0}, {0, 1, -1, 0}, {0, 1, 0, -1}};
      break;
    }
    case BuiltinLattice::triangular: {
      const double s = std::sqrt(3.0);
      d.lambda1 = Complex(s, 0);
      d.lambda2 = s * unit(kPi / 3);
      d.vertices = {{0, Complex(0, 0), Color::none}};
      d.edges = {{0, 0, 1, 0}, {0, 0, 0, 1}, {0, 0, -1, 1}};
      break;
    }
  }
  return d;
}

inline IsoradialGraph generate(BuiltinLattice kind, double theta = kPi / 4,
                               ValidationMode mode = ValidationMode::strict) {
  return build_graph(builtin_doc(kind, theta), mode);
}

// ---------------------------------------------------------------------------
// Superposition G_D = G_T u G_T*
// ---------------------------------------------------------------------------

/// Build the bipartite superposition of g and its dual: black vertices are
/// the vertices and faces of g, white vertices its edges (at the rhombus
/// centers), scaled by 2 so the result has circumradius 1.
inline IsoradialGraph superpose(const IsoradialGraph& g) {
  GraphDoc d;
  d.lambda1 = 2.0 * g.lambda1;
  d.lambda2 = 2.0 * g.lambda2;
  const int nv = g.num_vertex_classes();
  const int nf = g.num_face_classes();
  std::vector<Role> roles;
  std::vector<int> base_index;
  for (int i = 0; i < nv; ++i) {
    d.vertices.push_back({i, 2.0 * g.vertices[i].pos, Color::black});
    roles.push_back(Role::primal);
    base_index.push_back(i);
  }
  for (int f = 0; f < nf; ++f) {
    d.vertices.push_back({nv + f, 2.0 * g.faces[f].center, Color::black});
    roles.push_back(Role::dual);
    base_index.push_back(f);
  }
  for (int ei = 0; ei < int(g.edges.size()); ++ei) {
    const Rhombus& r = g.rhombi[ei];
    Complex center = 0.5 * (r.w4 + r.b4);
    d.vertices.push_back({nv + nf + ei, 2.0 * center, Color::white});
    roles.push_back(Role::edge);
    base_index.push_back(ei);
    const EdgeClass& e = g.edges[ei];
    const int w = nv + nf + ei;
    // half-edges to the two primal endpoints
    d.edges.push_back({w, e.u, 0, 0});
    d.edges.push_back({w, e.v, e.du, e.dv});
    // half-dual-edges to the two adjacent faces
    auto lf = g.left_face[2 * ei + 0];
    auto rf = g.left_face[2 * ei + 1];
    d.edges.push_back({w, nv + lf[0], lf[1], lf[2]});
    d.edges.push_back({w, nv + rf[0], rf[1], rf[2]});
  }
  IsoradialGraph s;
  try {
    s = build_graph(d, g.mode);
  } catch (const GeometryError& e) {
    throw GeometryError(std::string("superposition degenerated: ") + e.what());
  }
  s.is_superposition = true;
  s.base = std::make_shared<IsoradialGraph>(g);
  s.roles = roles;
  s.base_index = base_index;
  return s;
}

// ---------------------------------------------------------------------------
// Chains: extraction and the zig-zag validator
// ---------------------------------------------------------------------------

inline const std::vector<Chain>& extract_chains(const IsoradialGraph& g) {
  return g.chains;
}

struct ZigzagReport {
  struct SelfCrossing { int chain; std::array<int, 2> offset; int rhombus; };
  struct DoubleCrossing {
    int chain_a, chain_b;
    std::array<int, 2> offset_a, offset_b;
    std::vector<std::pair<int, std::array<int, 2>>> shared;  // rhombus instances
  };
  std::vector<SelfCrossing> self_crossings;
  std::vector<DoubleCrossing> double_crossings;
  bool pass() const { return self_crossings.empty() && double_crossings.empty(); }
};

/// Check the two necessary embeddability conditions on all chain translates
/// meeting the disk of the given radius: no chain meets a rhombus twice, and
/// no two chains share more than one rhombus.
inline ZigzagReport validate_zigzag(const IsoradialGraph& g, double radius) {
  ZigzagReport rep;
  using RInst = std::pair<int, std::array<int, 2>>;
  // enumerate rhombus instances in the disk
  std::vector<RInst> inside;
  auto [amax, bmax] = g.cell_bound(radius + 3.0);
  for (int a = -amax; a <= amax; ++a)
    for (int b = -bmax; b <= bmax; ++b)
      for (int ri = 0; ri < int(g.rhombi.size()); ++ri) {
        Complex c = 0.25 * (g.rhombi[ri].w4 + g.rhombi[ri].x4 + g.rhombi[ri].b4 +
                            g.rhombi[ri].y4) + g.shift(a, b);
        if (std::abs(c) <= radius) inside.push_back({ri, {a, b}});
      }
  std::set<RInst> in_set(inside.begin(), inside.end());

  // chain instance key -> rhombus instances it covers inside the disk
  using CInst = std::pair<int, std::array<int, 2>>;
  std::map<CInst, std::vector<RInst>> cover;
  // rhombus class -> (chain, member offset) for both families
  std::map<int, std::vector<std::pair<int, std::array<int, 2>>>> memberships;
  for (int ci = 0; ci < int(g.chains.size()); ++ci)
    for (const auto& [ri, off] : g.chains[ci].members)
      memberships[ri].push_back({ci, off});

  for (const RInst& inst : inside) {
    for (const auto& [ci, moff] : memberships[inst.first]) {
      // chain instance through rhombus instance (r, o): translate t = o - moff,
      // canonicalized modulo the chain period.
      std::array<int, 2> t{inst.second[0] - moff[0], inst.second[1] - moff[1]};
      const auto& P = g.chains[ci].period;
      if (P[0] != 0 || P[1] != 0) {
        // reduce t by integer multiples of P (project on P)
        double denom = double(P[0]) * P[0] + double(P[1]) * P[1];
        int k = int(std::floor((t[0] * double(P[0]) + t[1] * double(P[1])) / denom + 0.5));
        t = {t[0] - k * P[0], t[1] - k * P[1]};
        // canonical representative: smallest lexicographic among t, t+P, t-P
        std::array<int, 2> cands[3] = {t,
                                       {t[0] + P[0], t[1] + P[1]},
                                       {t[0] - P[0], t[1] - P[1]}};
        t = *std::min_element(std::begin(cands), std::end(cands));
      }
      cover[{ci, t}].push_back(inst);
    }
  }
  for (auto& [cinst, rs] : cover) {
    std::sort(rs.begin(), rs.end());
    for (std::size_t i = 1; i < rs.size(); ++i)
      if (rs[i] == rs[i - 1])
        rep.self_crossings.push_back({cinst.first, cinst.second, rs[i].first});
    rs.erase(std::unique(rs.begin(), rs.end()), rs.end());
  }
  // pairwise double crossings via rhombus instance -> chain instances
  std::map<RInst, std::vector<CInst>> at;
  for (const auto& [cinst, rs] : cover)
    for (const RInst& r : rs) at[r].push_back(cinst);
  std::map<std::pair<CInst, CInst>, std::vector<RInst>> pair_shared;
  for (const auto& [r, cs] : at)
    for (std::size_t i = 0; i < cs.size(); ++i)
      for (std::size_t j = i + 1; j < cs.size(); ++j)
        pair_shared[{std::min(cs[i], cs[j]), std::max(cs[i], cs[j])}].push_back(r);
  for (const auto& [pc, rs] : pair_shared) {
    if (rs.size() > 1) {
      rep.double_crossings.push_back(
          {pc.first.first, pc.second.first, pc.first.second, pc.second.second, rs});
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Rhombus paths
// ---------------------------------------------------------------------------

struct PathStep {
  TKey from, to;
  int dir;         // direction index of (to - from)
  bool canonical;  // traversal agrees with the side's canonical orientation
  int chain;
  std::array<int, 2> chain_off;
};

/// BFS path of unit rhombus-tiling edges from v0 to v1. With `minimal` set,
/// verifies the path crosses each chain at most once.
inline std::vector<PathStep> rhombus_path(const IsoradialGraph& g, TKey v0, TKey v1,
                                          bool minimal = false) {
  if (v0 == v1) throw DomainError("rhombus_path endpoints coincide");
  const double R = std::abs(g.tile_pos(v1) - g.tile_pos(v0)) + 4.0;
  const Complex c0 = g.tile_pos(v0);
  std::unordered_map<TKey, std::pair<TKey, TilingSide>, KeyHash> parent;
  std::vector<TKey> frontier{v0};
  std::unordered_set<TKey, KeyHash> seen{v0};
  bool found = false;
  while (!frontier.empty() && !found) {
    std::vector<TKey> next;
    for (const TKey& u : frontier) {
      for (const TilingSide& s : g.tiling_neighbors(u)) {
        TKey w = s.to;
        if (seen.count(w)) continue;
        if (std::abs(g.tile_pos(w) - c0) > R) continue;
        seen.insert(w);
        parent[w] = {u, s};
        if (w == v1) { found = true; break; }
        next.push_back(w);
      }
      if (found) break;
    }
    frontier = std::move(next);
  }
  if (!found) throw NotFound("no rhombus path between the given vertices");
  std::vector<PathStep> path;
  for (TKey cur = v1; cur != v0;) {
    const auto& [pu, side] = parent.at(cur);
    path.push_back({pu, cur, side.dir, side.canonical, side.chain, side.chain_off});
    cur = pu;
  }
  std::reverse(path.begin(), path.end());
  if (minimal) {
    std::map<std::pair<int, std::array<int, 2>>, int> crossings;
    for (const PathStep& s : path) crossings[{s.chain, s.chain_off}]++;
    for (const auto& [k, n] : crossings)
      if (n > 1)
        throw NotFound("BFS path crosses a chain " + std::to_string(n) +
                       " times; minimal path not found");
  }
  return path;
}

}  // namespace isoradial
