#pragma once

// Finite-window operators: the dbar matrix on bipartite critical graphs, the
// Laplacian on G_T, the gauged variant S dbar S* of the superposition, the
// gauge transform making S* dbar S real, and the factorization check
// Dbar* Dbar = Delta.

#include <Eigen/Dense>

#include "isoradial/factors.hpp"
#include "isoradial/lattice.hpp"

namespace isoradial {

enum class OperatorKind { dbar, dbar_tilde, laplacian };

/// dbar(w, b) = i (x - y) for rhombus corners (w, x, b, y) in ccw order: the
/// complex number of modulus nu(e) = 2 sin(theta) pointing from w to b. For a
/// degenerate theta = pi/2 rhombus the modulus is 2 and the direction is
/// perpendicular to the dual edge, sign fixed by the ccw convention.
inline Complex dbar_entry_edge(const IsoradialGraph& g, int edge_cls) {
  const Rhombus& r = g.rhombi[edge_cls];
  return Complex(0, 1) * (r.x4 - r.y4);
}

/// dbar entry for an adjacent white/black pair. Throws NotAdjacent otherwise.
inline Complex dbar_entry(const IsoradialGraph& g, const VKey& w, const VKey& b) {
  if (!g.bipartite) throw GraphError("dbar requires a bipartite graph");
  if (g.vertices[w.cls].color != Color::white || g.vertices[b.cls].color != Color::black)
    throw NotAdjacent("dbar_entry expects (white, black)");
  for (const auto& n : g.neighbors(w))
    if (n.other == b) return dbar_entry_edge(g, n.edge);
  throw NotAdjacent("vertices are not adjacent");
}

/// Gauge factor 1/(2 sqrt(sin cos)) attached to a white (edge-role) vertex of
/// a superposition.
inline double tilde_scale(const IsoradialGraph& g, int white_cls) {
  if (!g.is_superposition)
    throw NotASuperposition("dbar_tilde is defined on superposition graphs");
  if (g.roles[white_cls] != Role::edge)
    throw GraphError("tilde scale applies to edge-role (white) vertices");
  const double th = g.base->rhombi[g.base_index[white_cls]].theta;
  return 1.0 / (2.0 * std::sqrt(std::sin(th) * std::cos(th)));
}

struct FiniteOperator {
  OperatorKind kind;
  std::vector<VKey> rows, cols;
  Eigen::MatrixXcd m;

  int row_index(const VKey& k) const {
    auto it = std::lower_bound(rows.begin(), rows.end(), k);
    if (it == rows.end() || *it != k) throw WindowError("row vertex not in window");
    return int(it - rows.begin());
  }
  int col_index(const VKey& k) const {
    auto it = std::lower_bound(cols.begin(), cols.end(), k);
    if (it == cols.end() || *it != k) throw WindowError("column vertex not in window");
    return int(it - cols.begin());
  }
};

/// Assemble the operator on a finite window of vertex instances.
/// dbar / dbar_tilde: rows are the white, columns the black instances of the
/// window. laplacian: rows = columns = window; diagonals carry the full
/// vertex degree (Dirichlet are the rows whose neighbours leave the window).
inline FiniteOperator assemble(const IsoradialGraph& g, OperatorKind kind,
                               std::vector<VKey> window) {
  for (const VKey& k : window)
    if (k.cls < 0 || k.cls >= g.num_vertex_classes())
      throw WindowError("window vertex class out of range");
  std::sort(window.begin(), window.end());
  window.erase(std::unique(window.begin(), window.end()), window.end());

  FiniteOperator op;
  op.kind = kind;
  if (kind == OperatorKind::laplacian) {
    op.rows = op.cols = window;
    const int n = int(window.size());
    op.m = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      double diag = 0;
      for (const auto& nb : g.neighbors(window[i])) {
        const double c = g.conductance(nb.edge);
        diag += c;
        auto it = std::lower_bound(window.begin(), window.end(), nb.other);
        if (it != window.end() && *it == nb.other)
          op.m(i, int(it - window.begin())) -= c;
      }
      op.m(i, i) = diag;
    }
    return op;
  }

  if (!g.bipartite) throw GraphError("dbar requires a bipartite graph");
  for (const VKey& k : window)
    (g.vertices[k.cls].color == Color::white ? op.rows : op.cols).push_back(k);
  op.m = Eigen::MatrixXcd::Zero(op.rows.size(), op.cols.size());
  for (int i = 0; i < int(op.rows.size()); ++i) {
    const double s =
        kind == OperatorKind::dbar_tilde ? tilde_scale(g, op.rows[i].cls) : 1.0;
    for (const auto& nb : g.neighbors(op.rows[i])) {
      auto it = std::lower_bound(op.cols.begin(), op.cols.end(), nb.other);
      if (it != op.cols.end() && *it == nb.other)
        op.m(i, int(it - op.cols.begin())) = s * dbar_entry_edge(g, nb.edge);
    }
  }
  return op;
}

/// Operator export as CSV triples (row_id, col_id, re, im); ids encode the
/// instance as cls:a:b.
inline std::string to_csv(const FiniteOperator& op) {
  auto id = [](const VKey& k) {
    return std::to_string(k.cls) + ":" + std::to_string(k.a) + ":" + std::to_string(k.b);
  };
  std::string out = "row_id,col_id,re,im\n";
  for (int i = 0; i < op.m.rows(); ++i)
    for (int j = 0; j < op.m.cols(); ++j) {
      if (op.m(i, j) == Complex(0)) continue;
      out += id(op.rows[i]) + "," + id(op.cols[j]) + "," + fmt17(op.m(i, j).real()) +
             "," + fmt17(op.m(i, j).imag()) + "\n";
    }
  return out;
}

// ---------------------------------------------------------------------------
// Gauge transform
// ---------------------------------------------------------------------------

/// Per-vertex unit multipliers with s_w^* s_b dbar(w, b) real on every edge
/// (each s_v is +- e^{-i/2 sum alpha_j} of the paper, defined up to sign;
/// one BFS representative is chosen). Crossing an edge toward the black end
/// multiplies by e^{-i arg dbar(w,b)}; toward the white end by its conjugate.
/// Consistency up to sign around cycles is the Kasteleyn flatness of dbar.
struct GaugeTransform {
  TKey base;
  std::unordered_map<TKey, Complex, KeyHash> s;

  Complex at(const TKey& k) const {
    auto it = s.find(k);
    if (it == s.end()) throw WindowError("vertex outside the gauged window");
    return it->second;
  }
  Complex at(const VKey& k) const { return at(TKey{k.cls, k.a, k.b}); }
};

/// Phase step across one edge of G_D in the given direction.
inline Complex gauge_step(const IsoradialGraph& g, int edge_cls, bool into_black) {
  const double a = std::arg(dbar_entry_edge(g, edge_cls));
  return std::exp(Complex(0, into_black ? -a : a));
}

inline GaugeTransform gauge(const IsoradialGraph& g, VKey base, double radius) {
  if (!g.bipartite) throw GraphError("gauge requires a bipartite graph");
  GaugeTransform G;
  G.base = g.tile_of(base);
  const Complex c0 = g.pos(base);
  G.s[G.base] = 1.0;
  std::vector<VKey> frontier{base};
  while (!frontier.empty()) {
    std::vector<VKey> next;
    for (const VKey& u : frontier) {
      Complex su = G.s[g.tile_of(u)];
      const bool u_white = g.vertices[u.cls].color == Color::white;
      for (const auto& nb : g.neighbors(u)) {
        TKey key = g.tile_of(nb.other);
        if (G.s.count(key)) continue;
        if (std::abs(g.pos(nb.other) - c0) > radius + 2.0) continue;
        G.s[key] = su * gauge_step(g, nb.edge, u_white);
        next.push_back(nb.other);
      }
    }
    std::sort(next.begin(), next.end());
    frontier = std::move(next);
  }
  return G;
}

// ---------------------------------------------------------------------------
// Factorization Dbar* Dbar = Delta on superpositions
// ---------------------------------------------------------------------------

struct FactorizationReport {
  double primal_residual = 0;  // vs Delta_{G_T} on vertex-role pairs
  double dual_residual = 0;    // vs Delta_{G_T*} on face-role pairs
  double mixed_max = 0;        // vertex/face pairs, must vanish
  double max_residual() const {
    return std::max({primal_residual, dual_residual, mixed_max});
  }
};

/// Max |(Dbar* Dbar - Delta)(b, b')| over black pairs in the window.
/// Delta is the Laplacian of G_T on vertex-role pairs and of G_T* on
/// face-role pairs (conductances tan theta and 1/tan theta respectively).
inline FactorizationReport verify_factorization(const IsoradialGraph& g,
                                                double radius) {
  if (!g.is_superposition) throw NotASuperposition("verify_factorization");
  std::vector<VKey> blacks = g.window(Complex(0, 0), radius, Color::black);
  // all whites adjacent to a window black, so Dbar* Dbar rows are complete
  std::set<VKey> wset;
  for (const VKey& b : blacks)
    for (const auto& nb : g.neighbors(b)) wset.insert(nb.other);
  std::vector<VKey> window(blacks.begin(), blacks.end());
  window.insert(window.end(), wset.begin(), wset.end());
  FiniteOperator D = assemble(g, OperatorKind::dbar_tilde, window);

  Eigen::MatrixXcd K = D.m.adjoint() * D.m;  // black x black

  // base-graph Laplacian entries between two black instances
  auto delta_entry = [&](const VKey& p, const VKey& q) -> double {
    const Role rp = g.roles[p.cls], rq = g.roles[q.cls];
    if (rp != rq) return 0.0;
    const IsoradialGraph& base = *g.base;
    if (rp == Role::primal) {
      VKey bp{g.base_index[p.cls], p.a, p.b}, bq{g.base_index[q.cls], q.a, q.b};
      double v = 0;
      for (const auto& nb : base.neighbors(bp)) {
        if (bp == bq) v += base.conductance(nb.edge);
        else if (nb.other == bq) v -= base.conductance(nb.edge);
      }
      return v;
    }
    // dual Laplacian: faces adjacent across base edges, conductance 1/tan
    VKey fp{g.base_index[p.cls], p.a, p.b}, fq{g.base_index[q.cls], q.a, q.b};
    double v = 0;
    for (int ei = 0; ei < int(base.edges.size()); ++ei) {
      auto lf = base.left_face[2 * ei + 0];
      auto rf = base.left_face[2 * ei + 1];
      // instances of this edge with left face = fp: left face of instance
      // (ei, a, b) is (lf[0], a + lf[1], b + lf[2])
      for (int side = 0; side < 2; ++side) {
        const auto& f1 = side == 0 ? lf : rf;
        const auto& f2 = side == 0 ? rf : lf;
        if (f1[0] != fp.cls) continue;
        const int a = fp.a - f1[1], b = fp.b - f1[2];
        VKey other{f2[0], a + f2[1], b + f2[2]};
        const double c = 1.0 / base.conductance(ei);
        if (fp == fq) v += c;
        else if (other == fq) v -= c;
      }
    }
    return v;
  };

  FactorizationReport rep;
  const int nb = int(D.cols.size());
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < nb; ++j) {
      const VKey &p = D.cols[i], &q = D.cols[j];
      const Role rp = g.roles[p.cls], rq = g.roles[q.cls];
      const double r = std::abs(K(i, j) - Complex(delta_entry(p, q)));
      if (rp != rq) rep.mixed_max = std::max(rep.mixed_max, std::abs(K(i, j)));
      else if (rp == Role::primal) rep.primal_residual = std::max(rep.primal_residual, r);
      else rep.dual_residual = std::max(rep.dual_residual, r);
    }
  return rep;
}

}  // namespace isoradial
