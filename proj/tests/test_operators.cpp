#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include "isoradial/operators.hpp"

using namespace isoradial;

TEST_CASE("dbar entry: square adjacent pair gives sqrt(2) along the edge") {
  IsoradialGraph g = generate(BuiltinLattice::square);
  VKey w{0, 0, 0}, b{1, 0, 0};
  Complex d = dbar_entry(g, w, b);
  CHECK(std::abs(d - Complex(std::sqrt(2.0), 0)) < 1e-12);
  CHECK_THROWS_AS(dbar_entry(g, w, VKey{1, 5, 5}), NotAdjacent);
}

TEST_CASE("dbar entry: modulus nu and direction arg(b - w) on all built-ins") {
  for (auto kind : {BuiltinLattice::square, BuiltinLattice::honeycomb}) {
    IsoradialGraph g = generate(kind);
    for (int e = 0; e < int(g.edges.size()); ++e) {
      const Rhombus& r = g.rhombi[e];
      Complex d = dbar_entry_edge(g, e);
      CHECK(std::abs(d) == Catch::Approx(g.nu(e)).margin(1e-12));
      Complex dir = (r.b4 - r.w4) / std::abs(r.b4 - r.w4);
      CHECK(std::abs(d / std::abs(d) - dir) < 1e-12);
    }
  }
  IsoradialGraph h = generate(BuiltinLattice::honeycomb);
  CHECK(std::abs(dbar_entry_edge(h, 0)) == Catch::Approx(std::sqrt(3.0)).margin(1e-12));
}

TEST_CASE("dbar annihilates constants: row sums vanish") {
  for (auto kind : {BuiltinLattice::square, BuiltinLattice::honeycomb}) {
    IsoradialGraph g = generate(kind);
    for (const VKey& w : g.window(Complex(0, 0), 6.0, Color::white)) {
      Complex sum = 0;
      for (const auto& nb : g.neighbors(w)) sum += dbar_entry_edge(g, nb.edge);
      CHECK(std::abs(sum) < 1e-12);
    }
  }
}

TEST_CASE("assemble square 2x2 cycle: 2x2 block with modulus sqrt(2) entries") {
  IsoradialGraph g = generate(BuiltinLattice::square);
  // one cell's two whites and two blacks forming a 4-cycle
  std::vector<VKey> window = {VKey{0, 0, 0}, VKey{1, 0, 0}, VKey{0, 1, 0}, VKey{1, 0, -1}};
  FiniteOperator op = assemble(g, OperatorKind::dbar, window);
  REQUIRE(op.m.rows() == 2);
  REQUIRE(op.m.cols() == 2);
  int nonzero = 0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      if (op.m(i, j) != Complex(0)) {
        ++nonzero;
        CHECK(std::abs(op.m(i, j)) == Catch::Approx(std::sqrt(2.0)).margin(1e-12));
      }
  CHECK(nonzero == 4);
}

TEST_CASE("laplacian on the triangular lattice: diagonal 6 tan(pi/6) = 2 sqrt(3)") {
  IsoradialGraph g = generate(BuiltinLattice::triangular);
  auto window = g.window(Complex(0, 0), 5.0);
  FiniteOperator op = assemble(g, OperatorKind::laplacian, window);
  for (int i = 0; i < op.m.rows(); ++i)
    CHECK(op.m(i, i).real() == Catch::Approx(2.0 * std::sqrt(3.0)).margin(1e-12));
  // interior row sums vanish
  int interior = 0;
  for (int i = 0; i < op.m.rows(); ++i) {
    if (std::abs(g.pos(op.rows[i])) > 3.0) continue;
    ++interior;
    CHECK(std::abs(op.m.row(i).sum()) < 1e-12);
  }
  CHECK(interior > 0);
}

TEST_CASE("laplacian with Dirichlet boundary is positive semidefinite") {
  for (auto kind : {BuiltinLattice::triangular, BuiltinLattice::square}) {
    IsoradialGraph g = generate(kind);
    auto window = g.window(Complex(0, 0), 6.0);
    FiniteOperator op = assemble(g, OperatorKind::laplacian, window);
    Eigen::MatrixXd re = op.m.real();
    CHECK((op.m.imag().cwiseAbs().maxCoeff()) < 1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(re);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("dbar_tilde on a superposition has moduli sqrt(tan) and 1/sqrt(tan)") {
  IsoradialGraph gt = generate(BuiltinLattice::triangular);
  IsoradialGraph gd = superpose(gt);
  auto window = gd.window(Complex(0, 0), 6.0);
  FiniteOperator op = assemble(gd, OperatorKind::dbar_tilde, window);
  int primal_seen = 0, dual_seen = 0;
  for (int i = 0; i < op.m.rows(); ++i)
    for (int j = 0; j < op.m.cols(); ++j) {
      if (op.m(i, j) == Complex(0)) continue;
      const VKey& b = op.cols[j];
      const double th = gt.rhombi[gd.base_index[op.rows[i].cls]].theta;
      if (gd.roles[b.cls] == Role::primal) {
        CHECK(std::abs(op.m(i, j)) == Catch::Approx(std::sqrt(std::tan(th))).margin(1e-12));
        ++primal_seen;
      } else {
        CHECK(std::abs(op.m(i, j)) ==
              Catch::Approx(1.0 / std::sqrt(std::tan(th))).margin(1e-12));
        ++dual_seen;
      }
    }
  CHECK(primal_seen > 0);
  CHECK(dual_seen > 0);
}

TEST_CASE("gauge: s at the base is 1, |s| = 1, and S* dbar S is real") {
  IsoradialGraph g = generate(BuiltinLattice::square);
  VKey base{0, 0, 0};
  GaugeTransform G = gauge(g, base, 9.0);
  CHECK(std::abs(G.at(g.tile_of(base)) - Complex(1.0)) < 1e-15);
  double max_im = 0;
  for (const VKey& w : g.window(Complex(0, 0), 8.0, Color::white)) {
    Complex sw = G.at(g.tile_of(w));
    CHECK(std::abs(std::abs(sw) - 1.0) < 1e-12);
    for (const auto& nb : g.neighbors(w)) {
      if (std::abs(g.pos(nb.other)) > 8.0) continue;
      Complex sb = G.at(g.tile_of(nb.other));
      Complex entry = std::conj(sw) * dbar_entry_edge(g, nb.edge) * sb;
      max_im = std::max(max_im, std::abs(entry.imag()));
    }
  }
  CHECK(max_im < 1e-12);
}

TEST_CASE("gauge path multipliers agree up to sign on alternative paths") {
  IsoradialGraph g = generate(BuiltinLattice::square);
  GaugeTransform G = gauge(g, VKey{0, 0, 0}, 9.0);
  // recompute s for a far vertex along two explicit staircase edge paths
  auto walk = [&](const std::vector<VKey>& vs) {
    Complex s = 1.0;
    for (std::size_t i = 0; i + 1 < vs.size(); ++i) {
      bool stepped = false;
      for (const auto& nb : g.neighbors(vs[i]))
        if (nb.other == vs[i + 1]) {
          s *= gauge_step(g, nb.edge, g.vertices[vs[i].cls].color == Color::white);
          stepped = true;
          break;
        }
      REQUIRE(stepped);
    }
    return s;
  };
  // w(0,0,0) -> b(1,0,0) -> w(0,1,0) -> b(1,1,0) and the transposed route
  std::vector<VKey> p1 = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  std::vector<VKey> p2 = {{0, 0, 0}, {1, 0, -1}, {0, 1, -1}, {1, 1, -1}, {0, 1, 0}, {1, 1, 0}};
  Complex s1 = walk(p1), s2 = walk(p2);
  Complex ratio = s1 / s2;
  CHECK(std::min(std::abs(ratio - 1.0), std::abs(ratio + 1.0)) < 1e-12);
  ratio = s1 / G.at(VKey{1, 1, 0});
  CHECK(std::min(std::abs(ratio - 1.0), std::abs(ratio + 1.0)) < 1e-12);
}

TEST_CASE("Dbar* Dbar = Delta on square and triangular superpositions") {
  for (auto kind : {BuiltinLattice::square, BuiltinLattice::triangular}) {
    IsoradialGraph gt = generate(kind);
    IsoradialGraph gd = superpose(gt);
    FactorizationReport rep = verify_factorization(gd, 6.0);
    CHECK(rep.primal_residual < 1e-12);
    CHECK(rep.dual_residual < 1e-12);
    CHECK(rep.mixed_max < 1e-12);
  }
  CHECK_THROWS_AS(verify_factorization(generate(BuiltinLattice::square), 4.0),
                  NotASuperposition);
}

TEST_CASE("CSV export lists nonzero entries with 17-digit fields") {
  IsoradialGraph g = generate(BuiltinLattice::square);
  std::vector<VKey> window = {VKey{0, 0, 0}, VKey{1, 0, 0}};
  FiniteOperator op = assemble(g, OperatorKind::dbar, window);
  std::string csv = to_csv(op);
  CHECK(csv.rfind("row_id,col_id,re,im\n", 0) == 0);
  CHECK(csv.find("1.414213562373") != std::string::npos);
}
