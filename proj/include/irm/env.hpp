#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace irm {

using XPoint = std::vector<int>;

std::string point_label(const XPoint& x);  // "(1,-1)"

// Finite outcome grid X x Y. x_points are small integer vectors, e.g.
// {-1,+1}^2 or {-1,0,+1}^2; y_points are real labels, here {-1,+1}.
struct OutcomeSpace {
  std::vector<XPoint> x_points;
  std::vector<double> y_points;

  std::size_t num_x() const { return x_points.size(); }
  std::size_t num_y() const { return y_points.size(); }
  int index_of(const XPoint& x) const;  // -1 when absent

  // True when every x has its negation -x in the space.
  bool sign_symmetric() const;
  // Per point: index of -x, or -1 when absent.
  std::vector<int> negation_indices() const;

  void validate() const;  // distinctness, finiteness, |X| <= 12

  bool operator==(const OutcomeSpace&) const = default;
};

OutcomeSpace two_bit_space();      // [(1,1),(1,-1),(-1,1),(-1,-1)], y = [-1,1]
OutcomeSpace three_level_space();  // {-1,0,1}^2 lexicographic, y = [-1,1]

// Exact joint probability mass over an OutcomeSpace. pmf is row-major,
// indexed [x][y] in space order.
struct Environment {
  OutcomeSpace space;
  std::vector<double> pmf;
  std::string label;
  std::map<std::string, double> params;  // originating family parameters

  double prob(std::size_t xi, std::size_t yi) const {
    return pmf[xi * space.num_y() + yi];
  }
  // Marginal mass P(X = x_i) and signed mass E[Y 1{X = x_i}].
  double x_mass(std::size_t xi) const;
  double y_mass(std::size_t xi) const;
  // E[per_x(X) * Y^y_power] for per_x given per point.
  double expectation(const std::vector<double>& per_x, int y_power) const;

  // Total-mass and non-negativity checks; when two-bit parameters are
  // attached, also the moment identities E[X1 Y] = 1-2a, E[X2 Y] = 1-2b,
  // E[X1 X2] = (1-2a)(1-2b).
  void validate(double sum_tol = 1e-12, double moment_tol = 1e-12) const;
};

// Y ~ fair sign; X1 = Y flipped with probability alpha; X2 = Y flipped with
// probability beta. alpha, beta in (0,1).
Environment two_bit_env(double alpha, double beta);

// Three-level environment with X1 uniform on {-1,0,1}, X2 with
// P(+-1) = 1/3-theta, P(0) = 1/3+2*theta, and
// E[Y|X1,X2] = 0.3(X1+X2) + g_theta(X1,X2). theta in (-1/6, 1/3).
Environment section4_env(double theta);
double section4_g(double theta, int x1, int x2);

// Continuous piecewise-linear parameterization over theta in (0,1):
// (0.1, 6*theta/5] on theta <= 1/4, [(6*theta-1)/5, 0.3) above.
Environment piecewise_pi_env(double theta);

Environment environment_from_pmf(OutcomeSpace space, std::vector<double> pmf,
                                 std::string label);

// JSON environment files:
//   {"x_points": [[i,...],...], "y_points": [y,...],
//    "environments": [{"label": s, "pmf": [[p,...],...]}, ...]}
// pmf rows follow x_points order, columns follow y_points order. All
// environments share the one outcome grid; total mass tolerance 1e-9.
std::vector<Environment> load_environments(const std::filesystem::path& path);
void save_environments(const std::filesystem::path& path,
                       const std::vector<Environment>& envs);

struct EnvironmentFamily {
  enum class Kind { two_bit, section4, piecewise_pi, custom };

  Kind kind = Kind::two_bit;
  double alpha = 0.25;                // two_bit: fixed alpha, beta free
  std::vector<Environment> members;   // custom only

  static EnvironmentFamily two_bit(double alpha);
  static EnvironmentFamily section4();
  static EnvironmentFamily piecewise_pi();
  static EnvironmentFamily custom(std::vector<Environment> envs);

  // Open parameter interval; custom families use the index range [0, n-1].
  std::pair<double, double> param_domain() const;
  Environment at(double param) const;
  std::string name() const;
};

}  // namespace irm
