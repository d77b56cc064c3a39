#pragma once

// Parametric hyperbolic-paraboloid cable net: boundary ellipse, free hoop
// ring, member/cluster topology and the initial nodal configuration.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ctsnet/errors.hpp"
#include "ctsnet/topology.hpp"

namespace ctsnet {

enum class AngleSpacing { kParametric, kArcLength };

inline std::string to_string(AngleSpacing s) {
  return s == AngleSpacing::kParametric ? "parametric" : "arclength";
}

inline AngleSpacing angle_spacing_from_string(const std::string& s) {
  if (s == "parametric") return AngleSpacing::kParametric;
  if (s == "arclength") return AngleSpacing::kArcLength;
  throw ValidationError("angle_spacing: expected 'parametric' or 'arclength', got '" + s + "'");
}

struct CableNetParams {
  int p = 20;        // boundary node count
  int q = 2;         // number of diagonal clusters
  double rx = 1.0;   // ellipse semi-axis along x
  double ry = 1.0;   // ellipse semi-axis along y
  double a = 1.0;    // xz curvature constant
  double b = 1.0;    // yz curvature constant
  double c = 0.5;    // free ring scale relative to the boundary
  AngleSpacing spacing = AngleSpacing::kParametric;

  void validate() const {
    auto fail = [](const std::string& m) { throw ValidationError("params." + m); };
    if (p < 3) fail("p: must be >= 3");
    if (q < 1) fail("q: must be >= 1");
    if (q > p) fail("q: must not exceed p");
    if (!(rx > 0)) fail("rx: must be > 0");
    if (!(ry > 0)) fail("ry: must be > 0");
    if (!(a > 0)) fail("a: must be > 0");
    if (!(b > 0)) fail("b: must be > 0");
    if (!(c > 0 && c < 1)) fail("c: must lie in (0, 1)");
  }
};

// Saddle surface height.
inline double saddle_height(const CableNetParams& prm, double x, double y) {
  return y * y / (prm.b * prm.b) - x * x / (prm.a * prm.a);
}

namespace detail {

// Arc length of the ellipse (rx cos t, ry sin t) from 0 to theta.
inline double ellipse_arc(double rx, double ry, double theta) {
  static constexpr std::array<double, 5> kNodes = {
      -0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
      0.9061798459386640};
  static constexpr std::array<double, 5> kWeights = {
      0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
      0.4786286704993665, 0.2369268850561891};
  constexpr int kPanels = 256;
  const double h = theta / kPanels;
  double sum = 0.0;
  for (int i = 0; i < kPanels; ++i) {
    const double mid = (i + 0.5) * h;
    for (std::size_t g = 0; g < kNodes.size(); ++g) {
      const double t = mid + 0.5 * h * kNodes[g];
      sum += kWeights[g] * std::hypot(rx * std::sin(t), ry * std::cos(t));
    }
  }
  return 0.5 * h * sum;
}

inline std::vector<double> boundary_angles(const CableNetParams& prm) {
  std::vector<double> theta(prm.p);
  const double two_pi = 2.0 * std::numbers::pi;
  if (prm.spacing == AngleSpacing::kParametric) {
    for (int k = 0; k < prm.p; ++k) theta[k] = two_pi * k / prm.p;
    return theta;
  }
  const double perimeter = ellipse_arc(prm.rx, prm.ry, two_pi);
  for (int k = 0; k < prm.p; ++k) {
    const double target = perimeter * k / prm.p;
    double t = two_pi * k / prm.p;
    for (int it = 0; it < 50; ++it) {
      const double f = ellipse_arc(prm.rx, prm.ry, t) - target;
      const double df = std::hypot(prm.rx * std::sin(t), prm.ry * std::cos(t));
      const double step = f / df;
      t -= step;
      if (std::abs(step) < 1e-15) break;
    }
    theta[k] = t;
  }
  return theta;
}

}  // namespace detail

// p points on the boundary ellipse, lifted onto the saddle surface.
inline std::vector<Eigen::Vector3d> boundary_nodes(const CableNetParams& prm) {
  prm.validate();
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(prm.p);
  for (double t : detail::boundary_angles(prm)) {
    const double x = prm.rx * std::cos(t);
    const double y = prm.ry * std::sin(t);
    pts.emplace_back(x, y, saddle_height(prm, x, y));
  }
  return pts;
}

// Boundary points with x, y scaled by `scale`; z re-evaluated on the surface.
inline std::vector<Eigen::Vector3d> scaled_ring(const CableNetParams& prm, double scale) {
  if (!(scale > 0)) throw ValidationError("ring scale must be > 0");
  auto pts = boundary_nodes(prm);
  for (auto& v : pts) {
    v.x() *= scale;
    v.y() *= scale;
    v.z() = saddle_height(prm, v.x(), v.y());
  }
  return pts;
}

// Number of free rings in the generated net.
inline constexpr int free_ring_count(const CableNetParams&) { return 1; }

inline std::vector<Eigen::Vector3d> ring_nodes(const CableNetParams& prm, int ring_index) {
  prm.validate();
  if (ring_index < 1 || ring_index > free_ring_count(prm))
    throw ValidationError("ring_index " + std::to_string(ring_index) +
                          " out of range [1, " + std::to_string(free_ring_count(prm)) + "]");
  return scaled_ring(prm, prm.c);
}

inline std::vector<std::string> cluster_names(int q) {
  std::vector<std::string> names;
  if (q == 1) {
    names = {"DC"};
  } else if (q == 2) {
    names = {"ODC", "IDC"};
  } else {
    for (int j = 1; j <= q; ++j) names.push_back("DC" + std::to_string(j));
  }
  names.push_back("HC");
  return names;
}

struct CableNet {
  Topology topology;
  Configuration config;
};

// Nodes 0..p-1 are the pinned boundary (counterclockwise from theta = 0),
// p..2p-1 the free ring. Diagonal cluster j joins boundary node k to free
// node (k + q - 1 - j) mod p; the last cluster is the hoop through the ring.
inline CableNet build_topology(const CableNetParams& prm) {
  prm.validate();
  const int p = prm.p;
  const auto outer = boundary_nodes(prm);
  const auto inner = ring_nodes(prm, 1);

  Topology topo;
  topo.node_count = 2 * p;
  const auto names = cluster_names(prm.q);
  for (int j = 0; j < prm.q; ++j) {
    Cluster cl{names[j], {}};
    const int offset = prm.q - 1 - j;
    for (int k = 0; k < p; ++k) {
      cl.members.push_back(static_cast<int>(topo.members.size()));
      topo.members.push_back({k, p + (k + offset) % p});
    }
    topo.clusters.push_back(std::move(cl));
  }
  Cluster hoop{names.back(), {}};
  for (int k = 0; k < p; ++k) {
    hoop.members.push_back(static_cast<int>(topo.members.size()));
    topo.members.push_back({p + k, p + (k + 1) % p});
  }
  topo.clusters.push_back(std::move(hoop));
  for (int k = 0; k < p; ++k) topo.fixed_nodes.push_back(k);
  topo.finalize();

  Configuration cfg;
  cfg.coords.resize(3 * topo.node_count);
  for (int k = 0; k < p; ++k) {
    cfg.coords.segment<3>(3 * k) = outer[k];
    cfg.coords.segment<3>(3 * (p + k)) = inner[k];
  }
  return {std::move(topo), std::move(cfg)};
}

}  // namespace ctsnet
