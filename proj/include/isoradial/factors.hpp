#pragma once

// Exact calculus of the rational functions f_v(z) and g_v(z):
// integer-exponent factor maps over the direction table, breadth-first
// propagation with memoization, residues (any multiplicity, via truncated
// power-series jets) and lifting of pole angles to the branched cover.

#include <mutex>
#include <shared_mutex>

#include "isoradial/lattice.hpp"

namespace isoradial {

// ---------------------------------------------------------------------------
// FactorFunction
// ---------------------------------------------------------------------------

/// z^{-pole_at_zero} * prod_d (z - e^{i alpha_d})^{n_d}, with the alpha_d from
/// a DirectionTable and integer exponents n_d. Exponents cancel exactly.
struct FactorFunction {
  int pole_at_zero = 0;
  std::vector<std::pair<int, int>> factors;  // (direction index, exponent), sorted

  int degree() const {
    int d = -pole_at_zero;
    for (auto [dir, e] : factors) d += e;
    return d;
  }

  int exponent(int dir) const {
    for (auto [d, e] : factors)
      if (d == dir) return e;
    return 0;
  }

  void mul(int dir, int e) {
    if (e == 0) return;
    auto it = std::lower_bound(factors.begin(), factors.end(), dir,
                               [](const auto& p, int d) { return p.first < d; });
    if (it != factors.end() && it->first == dir) {
      it->second += e;
      if (it->second == 0) factors.erase(it);
    } else {
      factors.insert(it, {dir, e});
    }
  }

  std::vector<std::pair<int, int>> poles() const {
    std::vector<std::pair<int, int>> out;  // (dir, multiplicity)
    for (auto [d, e] : factors)
      if (e < 0) out.push_back({d, -e});
    return out;
  }

  bool is_one() const { return pole_at_zero == 0 && factors.empty(); }

  friend bool operator==(const FactorFunction&, const FactorFunction&) = default;
};

/// Evaluate F at z. Uses log-domain accumulation once the factor count
/// (with multiplicity) exceeds 64. Throws PoleEvaluation within 1e-13 of a pole.
inline Complex evaluate(const FactorFunction& F, Complex z, const DirectionTable& dt) {
  long total = std::abs(F.pole_at_zero);
  for (auto [d, e] : F.factors) total += std::abs(e);
  if (F.pole_at_zero > 0 && std::abs(z) < 1e-13)
    throw PoleEvaluation("z at the pole 0");
  for (auto [d, e] : F.factors)
    if (e < 0 && std::abs(z - dt.dir(d)) < 1e-13)
      throw PoleEvaluation("z at pole direction " + fmt17(dt.angle(d)));
  if (total <= 64) {
    Complex v = 1.0;
    for (int k = 0; k < F.pole_at_zero; ++k) v /= z;
    for (int k = 0; k < -F.pole_at_zero; ++k) v *= z;
    for (auto [d, e] : F.factors) {
      Complex f = z - dt.dir(d);
      for (int k = 0; k < std::abs(e); ++k) v = e > 0 ? v * f : v / f;
    }
    return v;
  }
  Complex acc = -double(F.pole_at_zero) * std::log(z);
  for (auto [d, e] : F.factors) acc += double(e) * std::log(z - dt.dir(d));
  return std::exp(acc);
}

/// Debug dump: sorted (angle, exponent) pairs plus the z^-k prefix,
/// 17 significant digits.
inline std::string dump(const FactorFunction& F, const DirectionTable& dt) {
  std::string out;
  if (F.pole_at_zero != 0) out += "z^-" + std::to_string(F.pole_at_zero) + " ";
  std::vector<std::pair<double, int>> rows;
  for (auto [d, e] : F.factors) rows.push_back({dt.angle(d), e});
  std::sort(rows.begin(), rows.end());
  for (auto [a, e] : rows)
    out += "(" + fmt17(a) + ", " + std::to_string(e) + ") ";
  if (out.empty()) out = "1";
  else out.pop_back();
  return out;
}

// ---------------------------------------------------------------------------
// Residues via jets
// ---------------------------------------------------------------------------

namespace detail {

/// Truncated power series sum c_j u^j around a point, u = z - p.
struct Jet {
  std::vector<Complex> c;
  explicit Jet(int order) : c(order, Complex(0)) {}
};

inline Jet jet_mul(const Jet& a, const Jet& b) {
  const int m = int(a.c.size());
  Jet r(m);
  for (int i = 0; i < m; ++i) {
    if (a.c[i] == Complex(0)) continue;
    for (int j = 0; j + i < m; ++j) r.c[i + j] += a.c[i] * b.c[j];
  }
  return r;
}

/// Jet of (z - q)^n around p (q != p), any integer n: ((p-q) + u)^n expanded
/// by the binomial series, valid as a truncated jet for negative n as well.
inline Jet jet_linear_pow(Complex p, Complex q, long n, int order) {
  Jet r(order);
  const Complex base = p - q;
  Complex t = std::pow(base, double(n));
  // t_j = C(n, j) base^{n-j}
  for (int j = 0; j < order; ++j) {
    r.c[j] = t;
    t *= double(n - j) / double(j + 1);
    t /= base;
  }
  return r;
}

}  // namespace detail

/// Residue of F at the given pole: pole_dir >= 0 selects a direction index,
/// pole_dir == -1 selects the pole at z = 0. Multiplicity m >= 1 handled by
/// jet arithmetic of order m. Throws NotAPole when the exponent is >= 0.
inline Complex residue_at(const FactorFunction& F, int pole_dir, const DirectionTable& dt) {
  const bool at_zero = pole_dir < 0;
  const int m = at_zero ? F.pole_at_zero : -F.exponent(pole_dir);
  if (m < 1) throw NotAPole("exponent is nonnegative at the requested point");
  const Complex p = at_zero ? Complex(0) : dt.dir(pole_dir);
  if (m == 1) {
    // product of the remaining factors at the pole
    Complex v = 1.0;
    if (!at_zero) {
      for (int k = 0; k < F.pole_at_zero; ++k) v /= p;
    }
    for (auto [d, e] : F.factors) {
      if (!at_zero && d == pole_dir) continue;
      Complex f = p - dt.dir(d);
      for (int k = 0; k < std::abs(e); ++k) v = e > 0 ? v * f : v / f;
    }
    return v;
  }
  detail::Jet acc(m);
  acc.c[0] = 1.0;
  if (!at_zero && F.pole_at_zero != 0)
    acc = detail::jet_mul(acc, detail::jet_linear_pow(p, Complex(0), -F.pole_at_zero, m));
  for (auto [d, e] : F.factors) {
    if (!at_zero && d == pole_dir) continue;
    acc = detail::jet_mul(acc, detail::jet_linear_pow(p, dt.dir(d), e, m));
  }
  return acc.c[m - 1];
}

// ---------------------------------------------------------------------------
// Angle lifting to the branched cover
// ---------------------------------------------------------------------------

struct AngleLift {
  double theta0 = 0;                           // argument of (target - base)
  std::vector<std::pair<int, double>> lifted;  // (direction index, lifted angle)
  double margin = 0;                           // min distance to window boundary

  double angle_of(int dir) const {
    for (auto [d, a] : lifted)
      if (d == dir) return a;
    throw NotAPole("direction has no lifted angle");
  }
};

/// Lift the pole angles of F into (theta0 - pi, theta0 + pi), theta0 the
/// argument of the branched-cover position of `target` relative to `base`.
/// Pass theta0_override to select another deck (theta0 + 2 pi k).
inline AngleLift lift_angles(const FactorFunction& F, Complex base, Complex target,
                             const DirectionTable& dt,
                             std::optional<double> theta0_override = std::nullopt) {
  AngleLift L;
  L.theta0 = theta0_override ? *theta0_override : std::arg(target - base);
  L.margin = kPi;
  for (auto [d, mult] : F.poles()) {
    double a = lift_into_window(dt.angle(d), L.theta0);
    double gap = kPi - std::abs(a - L.theta0);
    if (gap < 1e-9)
      throw BoundaryError("pole at angle " + fmt17(a) +
                          " sits on the cover-window boundary (theta0 " +
                          fmt17(L.theta0) + ")");
    L.margin = std::min(L.margin, gap);
    L.lifted.push_back({d, a});
  }
  return L;
}

// ---------------------------------------------------------------------------
// Propagation tables
// ---------------------------------------------------------------------------

enum class PropagationRule {
  dbar_f,   // f: divide along canonical side orientation, multiply against it
  green_g,  // g: times (z + e^{i a})/(z - e^{i a}), a the traversal direction
};

/// Memoized breadth-first propagation of the factor maps from a base tiling
/// vertex. Values are immutable once computed; reads are concurrent, table
/// extension takes the writer lock.
class FactorTable {
 public:
  FactorTable(const IsoradialGraph& g, TKey base, PropagationRule rule)
      : g_(&g), base_(base), rule_(rule) {
    if (rule == PropagationRule::dbar_f && !g.bipartite)
      throw GraphError("f-propagation requires a bipartite graph");
    FactorFunction f0;
    if (rule == PropagationRule::green_g) f0.pole_at_zero = 1;
    memo_.emplace(base_, f0);
  }

  const IsoradialGraph& graph() const { return *g_; }
  TKey base() const { return base_; }
  PropagationRule rule() const { return rule_; }

  /// Factor map at v; extends the table as needed.
  FactorFunction at(TKey v) const {
    {
      std::shared_lock lock(mu_);
      auto it = memo_.find(v);
      if (it != memo_.end()) return it->second;
    }
    const double need = std::abs(g_->tile_pos(v) - g_->tile_pos(base_));
    ensure_radius(need + 2.0);
    std::shared_lock lock(mu_);
    auto it = memo_.find(v);
    if (it == memo_.end()) throw NotFound("tiling vertex unreachable from base");
    return it->second;
  }

  /// Extend the memo over all tiling vertices within `radius` of the base.
  void ensure_radius(double radius) const {
    std::unique_lock lock(mu_);
    if (radius <= covered_) return;
    const Complex c0 = g_->tile_pos(base_);
    std::vector<TKey> frontier;
    for (const auto& [k, f] : memo_) frontier.push_back(k);
    std::sort(frontier.begin(), frontier.end());
    // BFS over the whole disk; closure of the propagation rules makes the
    // result path-independent, so any spanning order gives the same maps.
    while (!frontier.empty()) {
      std::vector<TKey> next;
      for (const TKey& u : frontier) {
        const FactorFunction fu = memo_.at(u);
        for (const TilingSide& s : g_->tiling_neighbors(u)) {
          if (memo_.count(s.to)) continue;
          if (std::abs(g_->tile_pos(s.to) - c0) > radius) continue;
          FactorFunction fv = fu;
          apply_step(fv, s);
          memo_.emplace(s.to, std::move(fv));
          next.push_back(s.to);
        }
      }
      std::sort(next.begin(), next.end());
      frontier = std::move(next);
    }
    covered_ = radius;
  }

  /// One propagation step along a tiling side (exposed for path-based checks).
  void apply_step(FactorFunction& f, int dir, bool canonical) const {
    if (rule_ == PropagationRule::dbar_f) {
      // canonical direction: white->dual and dual->black carry the division
      if (canonical) {
        f.mul(dir, -1);
      } else {
        f.mul(g_->directions.antipode(dir), +1);
      }
    } else {
      // g-rule: multiply by (z + e^{i a})/(z - e^{i a}) with a the traversal
      // direction; z + e^{ia} = z - e^{i(a+pi)}
      f.mul(g_->directions.antipode(dir), +1);
      f.mul(dir, -1);
    }
  }
  void apply_step(FactorFunction& f, const TilingSide& s) const {
    apply_step(f, s.dir, s.canonical);
  }
  void apply_step(FactorFunction& f, const PathStep& s) const {
    apply_step(f, s.dir, s.canonical);
  }

 private:
  const IsoradialGraph* g_;
  TKey base_;
  PropagationRule rule_;
  mutable std::shared_mutex mu_;
  mutable std::unordered_map<TKey, FactorFunction, KeyHash> memo_;
  mutable double covered_ = 0.0;
};

/// Factor map of f_v for base white vertex w0 (one-shot convenience).
inline FactorFunction propagate_f(const IsoradialGraph& g, VKey w0, TKey v) {
  if (!g.bipartite) throw GraphError("propagate_f requires a bipartite graph");
  if (g.vertices[w0.cls].color != Color::white)
    throw GraphError("propagate_f base must be a white vertex");
  FactorTable t(g, g.tile_of(w0), PropagationRule::dbar_f);
  return t.at(v);
}

/// Factor map of g_v for base vertex v0 of G_T u G_T*.
inline FactorFunction propagate_g(const IsoradialGraph& g, TKey v0, TKey v) {
  FactorTable t(g, v0, PropagationRule::green_g);
  return t.at(v);
}

}  // namespace isoradial
