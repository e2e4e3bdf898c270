#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace isoradial {

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define ISORADIAL_ERROR(Name)                                      \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

ISORADIAL_ERROR(ParseError);
ISORADIAL_ERROR(GeometryError);
ISORADIAL_ERROR(DomainError);
ISORADIAL_ERROR(GraphError);
ISORADIAL_ERROR(NotAdjacent);
ISORADIAL_ERROR(WindowError);
ISORADIAL_ERROR(NotASuperposition);
ISORADIAL_ERROR(NotAPole);
ISORADIAL_ERROR(PoleEvaluation);
ISORADIAL_ERROR(BoundaryError);
ISORADIAL_ERROR(NotFound);
ISORADIAL_ERROR(PolygonError);
ISORADIAL_ERROR(TooLarge);
ISORADIAL_ERROR(SingularMatrix);
ISORADIAL_ERROR(SingularGrid);
ISORADIAL_ERROR(AtomOnPole);
ISORADIAL_ERROR(NotAnalytic);
ISORADIAL_ERROR(StitchError);
ISORADIAL_ERROR(Infeasible);
ISORADIAL_ERROR(MaxIterations);
ISORADIAL_ERROR(IOError);

#undef ISORADIAL_ERROR

// ---------------------------------------------------------------------------
// Angles
// ---------------------------------------------------------------------------

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a <= -kPi) a += kTwoPi;
  if (a > kPi) a -= kTwoPi;
  return a;
}

/// Lift `angle` (known mod 2pi) into the window (center - pi, center + pi].
inline double lift_into_window(double angle, double center) {
  return angle + kTwoPi * std::round((center - angle) / kTwoPi);
}

inline Complex unit(double angle) { return Complex(std::cos(angle), std::sin(angle)); }

inline double cross(Complex a, Complex b) { return a.real() * b.imag() - a.imag() * b.real(); }

// ---------------------------------------------------------------------------
// Constants computed at startup (cached)
// ---------------------------------------------------------------------------

/// Euler-Mascheroni constant via sum(1/k) - log n with Euler-Maclaurin tail.
inline double euler_gamma() {
  static const double value = [] {
    const int n = 10000;
    double s = 0.0;
    for (int k = 1; k <= n; ++k) s += 1.0 / k;
    const double nn = n;
    return s - std::log(nn) - 0.5 / nn + 1.0 / (12.0 * nn * nn) -
           1.0 / (120.0 * nn * nn * nn * nn) + 1.0 / (252.0 * std::pow(nn, 6));
  }();
  return value;
}

/// Catalan constant: sum (-1)^k/(2k+1)^2, accelerated (Cohen-Villegas-Zagier).
inline double catalan() {
  static const double value = [] {
    const int n = 40;
    double d = std::pow(3.0 + std::sqrt(8.0), n);
    d = (d + 1.0 / d) / 2.0;
    double b = -1.0, c = -d, s = 0.0;
    for (int k = 0; k < n; ++k) {
      c = b - c;
      s += c / double((2 * k + 1) * (2 * k + 1));
      b *= (k + n) * (k - n) / ((k + 0.5) * (k + 1.0));
    }
    return s / d;
  }();
  return value;
}

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

/// Shortest 17-significant-digit representation; round-trips IEEE doubles.
inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// Deterministic parallelism
// ---------------------------------------------------------------------------

inline unsigned& worker_threads() {
  static unsigned n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

/// Run fn(i) for i in [0, n). Work is split into static chunks; any reduction
/// the caller performs over per-index outputs is independent of the thread
/// count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned nt = std::min<std::size_t>(worker_threads(), n ? n : 1);
  if (nt <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nt);
  std::atomic<std::size_t> next{0};
  const std::size_t chunk = std::max<std::size_t>(1, n / (4 * nt));
  for (unsigned t = 0; t < nt; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t begin = next.fetch_add(chunk);
        if (begin >= n) return;
        std::size_t end = std::min(n, begin + chunk);
        for (std::size_t i = begin; i < end; ++i) fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace isoradial
