#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

namespace atomlaser {

struct QuadratureNode {
  double position;
  double weight;
};

// Composite 8-point Gauss-Legendre rule over [a, b] with panels no wider than
// max_panel. Nodes are ordered by position.
inline std::vector<QuadratureNode> gauss_legendre_panels(double a, double b, double max_panel) {
  std::vector<QuadratureNode> nodes;
  if (!(b > a)) return nodes;
  using rule = boost::math::quadrature::gauss<double, 8>;
  const auto& abscissa = rule::abscissa();
  const auto& weights = rule::weights();
  const auto panels = static_cast<std::size_t>(std::max(1.0, std::ceil((b - a) / max_panel)));
  const double width = (b - a) / static_cast<double>(panels);
  nodes.reserve(panels * 8);
  for (std::size_t p = 0; p < panels; ++p) {
    const double lo = a + static_cast<double>(p) * width;
    const double mid = lo + 0.5 * width;
    const double half = 0.5 * width;
    // boost stores the non-negative half of a symmetric rule
    for (std::size_t k = abscissa.size(); k-- > 0;) {
      if (abscissa[k] != 0.0) nodes.push_back({mid - half * abscissa[k], half * weights[k]});
    }
    for (std::size_t k = 0; k < abscissa.size(); ++k) nodes.push_back({mid + half * abscissa[k], half * weights[k]});
  }
  return nodes;
}

// Endpoint-halved trapezoid weight for index i of n.
inline double trapezoid_weight(std::size_t i, std::size_t n) { return (i == 0 || i + 1 == n) ? 0.5 : 1.0; }

}  // namespace atomlaser
