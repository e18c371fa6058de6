#include "irm/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "irm/csv.hpp"

namespace irm {

namespace {

constexpr std::size_t kMaxPoints = 12;  // partition enumeration bound

std::string range_error_text(const char* fn, const char* name, double value,
                             double lo, double hi) {
  std::ostringstream os;
  os << fn << ": " << name << " = " << value << " must lie in (" << lo << ","
     << hi << ")";
  return os.str();
}

}  // namespace

std::string point_label(const XPoint& x) {
  std::string out = "(";
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(x[i]);
  }
  out += ")";
  return out;
}

int OutcomeSpace::index_of(const XPoint& x) const {
  for (std::size_t i = 0; i < x_points.size(); ++i) {
    if (x_points[i] == x) return static_cast<int>(i);
  }
  return -1;
}

std::vector<int> OutcomeSpace::negation_indices() const {
  std::vector<int> out(x_points.size(), -1);
  for (std::size_t i = 0; i < x_points.size(); ++i) {
    XPoint neg = x_points[i];
    for (int& c : neg) c = -c;
    out[i] = index_of(neg);
  }
  return out;
}

bool OutcomeSpace::sign_symmetric() const {
  auto neg = negation_indices();
  return std::all_of(neg.begin(), neg.end(), [](int i) { return i >= 0; });
}

void OutcomeSpace::validate() const {
  if (x_points.empty()) throw std::invalid_argument("OutcomeSpace: no x points");
  if (x_points.size() > kMaxPoints) {
    throw std::invalid_argument("OutcomeSpace: more than 12 x points");
  }
  if (y_points.empty()) throw std::invalid_argument("OutcomeSpace: no y points");
  const std::size_t dim = x_points.front().size();
  std::set<XPoint> seen_x;
  for (const XPoint& x : x_points) {
    if (x.size() != dim) {
      throw std::invalid_argument("OutcomeSpace: mixed x dimensions");
    }
    if (!seen_x.insert(x).second) {
      throw std::invalid_argument("OutcomeSpace: duplicate x point " +
                                  point_label(x));
    }
  }
  std::set<double> seen_y;
  for (double y : y_points) {
    if (!std::isfinite(y)) {
      throw std::invalid_argument("OutcomeSpace: non-finite y value");
    }
    if (!seen_y.insert(y).second) {
      throw std::invalid_argument("OutcomeSpace: duplicate y value");
    }
  }
}

OutcomeSpace two_bit_space() {
  return OutcomeSpace{{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}, {-1.0, 1.0}};
}

OutcomeSpace three_level_space() {
  OutcomeSpace s;
  for (int x1 = -1; x1 <= 1; ++x1) {
    for (int x2 = -1; x2 <= 1; ++x2) {
      s.x_points.push_back({x1, x2});
    }
  }
  s.y_points = {-1.0, 1.0};
  return s;
}

double Environment::x_mass(std::size_t xi) const {
  double sum = 0.0;
  for (std::size_t yi = 0; yi < space.num_y(); ++yi) sum += prob(xi, yi);
  return sum;
}

double Environment::y_mass(std::size_t xi) const {
  double sum = 0.0;
  for (std::size_t yi = 0; yi < space.num_y(); ++yi) {
    sum += space.y_points[yi] * prob(xi, yi);
  }
  return sum;
}

double Environment::expectation(const std::vector<double>& per_x,
                                int y_power) const {
  double sum = 0.0;
  for (std::size_t xi = 0; xi < space.num_x(); ++xi) {
    for (std::size_t yi = 0; yi < space.num_y(); ++yi) {
      sum += per_x[xi] * std::pow(space.y_points[yi], y_power) * prob(xi, yi);
    }
  }
  return sum;
}

void Environment::validate(double sum_tol, double moment_tol) const {
  space.validate();
  if (pmf.size() != space.num_x() * space.num_y()) {
    throw std::runtime_error("environment '" + label + "': pmf shape mismatch");
  }
  double total = 0.0;
  for (std::size_t xi = 0; xi < space.num_x(); ++xi) {
    for (std::size_t yi = 0; yi < space.num_y(); ++yi) {
      const double p = prob(xi, yi);
      if (!(p >= 0.0)) {
        throw std::runtime_error("environment '" + label + "': negative mass " +
                                 format_double(p) + " at pmf[" +
                                 std::to_string(xi) + "][" + std::to_string(yi) +
                                 "] (x = " + point_label(space.x_points[xi]) +
                                 ")");
      }
      total += p;
    }
  }
  if (std::abs(total - 1.0) > sum_tol) {
    throw std::runtime_error("environment '" + label + "': pmf sums to " +
                             format_double(total));
  }

  auto it_a = params.find("alpha");
  auto it_b = params.find("beta");
  if (it_a != params.end() && it_b != params.end() && space == two_bit_space()) {
    const double a = 1.0 - 2.0 * it_a->second;
    const double b = 1.0 - 2.0 * it_b->second;
    std::vector<double> x1(space.num_x()), x2(space.num_x()), x12(space.num_x());
    for (std::size_t i = 0; i < space.num_x(); ++i) {
      x1[i] = space.x_points[i][0];
      x2[i] = space.x_points[i][1];
      x12[i] = x1[i] * x2[i];
    }
    const double e1y = expectation(x1, 1);
    const double e2y = expectation(x2, 1);
    const double e12 = expectation(x12, 0);
    if (std::abs(e1y - a) > moment_tol || std::abs(e2y - b) > moment_tol ||
        std::abs(e12 - a * b) > moment_tol) {
      throw std::runtime_error("environment '" + label +
                               "': two-bit moment identities violated");
    }
  }
}

Environment two_bit_env(double alpha, double beta) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error(range_error_text("two_bit_env", "alpha", alpha, 0, 1));
  }
  if (!(beta > 0.0 && beta < 1.0)) {
    throw std::domain_error(range_error_text("two_bit_env", "beta", beta, 0, 1));
  }
  Environment e;
  e.space = two_bit_space();
  e.pmf.assign(e.space.num_x() * e.space.num_y(), 0.0);
  for (std::size_t xi = 0; xi < e.space.num_x(); ++xi) {
    const int x1 = e.space.x_points[xi][0];
    const int x2 = e.space.x_points[xi][1];
    for (std::size_t yi = 0; yi < e.space.num_y(); ++yi) {
      const int y = static_cast<int>(e.space.y_points[yi]);
      const double q1 = (x1 == y) ? 1.0 - alpha : alpha;
      const double q2 = (x2 == y) ? 1.0 - beta : beta;
      e.pmf[xi * e.space.num_y() + yi] = 0.5 * q1 * q2;
    }
  }
  e.label = "(" + format_double(alpha) + "," + format_double(beta) + ")";
  e.params = {{"alpha", alpha}, {"beta", beta}};
  e.validate();
  return e;
}

double section4_g(double theta, int x1, int x2) {
  const double t = theta;
  if (x1 == 0 && x2 == 0) return 0.0;
  if (x1 == -1 && x2 == -1) return t * (t + 2.0 / 3.0);
  if (x1 == 1 && x2 == 1) return -t * (t + 2.0 / 3.0);
  if (x1 == -1 && x2 == 1) return 3.0 * t * t;
  if (x1 == 1 && x2 == -1) return -3.0 * t * t;
  // The remaining cells carry +-theta*(2/3 - 2 theta), positive exactly when
  // the nonzero coordinate is positive.
  const double v = t * (2.0 / 3.0 - 2.0 * t);
  return (x1 + x2 > 0) ? v : -v;
}

Environment section4_env(double theta) {
  if (!(theta > -1.0 / 6.0 && theta < 1.0 / 3.0)) {
    throw std::domain_error(
        range_error_text("section4_env", "theta", theta, -1.0 / 6.0, 1.0 / 3.0));
  }
  Environment e;
  e.space = three_level_space();
  e.pmf.assign(e.space.num_x() * e.space.num_y(), 0.0);
  const auto px2 = [&](int x2) {
    return x2 == 0 ? 1.0 / 3.0 + 2.0 * theta : 1.0 / 3.0 - theta;
  };
  for (std::size_t xi = 0; xi < e.space.num_x(); ++xi) {
    const int x1 = e.space.x_points[xi][0];
    const int x2 = e.space.x_points[xi][1];
    const double px = (1.0 / 3.0) * px2(x2);
    const double m = 0.3 * (x1 + x2) + section4_g(theta, x1, x2);
    if (std::abs(m) > 1.0) {
      throw std::runtime_error("section4_env: |E[Y|x]| > 1 at " +
                               point_label(e.space.x_points[xi]));
    }
    for (std::size_t yi = 0; yi < e.space.num_y(); ++yi) {
      const double y = e.space.y_points[yi];
      e.pmf[xi * e.space.num_y() + yi] = px * 0.5 * (1.0 + y * m);
    }
  }
  e.label = "theta=" + format_double(theta);
  e.params = {{"theta", theta}};
  e.validate();
  return e;
}

Environment piecewise_pi_env(double theta) {
  if (!(theta > 0.0 && theta < 1.0)) {
    throw std::domain_error(
        range_error_text("piecewise_pi_env", "theta", theta, 0, 1));
  }
  Environment e = theta <= 0.25
                      ? two_bit_env(0.1, 6.0 * theta / 5.0)
                      : two_bit_env((6.0 * theta - 1.0) / 5.0, 0.3);
  e.label = "pi(" + format_double(theta) + ")=" + e.label;
  e.params["theta"] = theta;
  return e;
}

Environment environment_from_pmf(OutcomeSpace space, std::vector<double> pmf,
                                 std::string label) {
  Environment e;
  e.space = std::move(space);
  e.pmf = std::move(pmf);
  e.label = std::move(label);
  e.validate(1e-9);
  return e;
}

std::vector<Environment> load_environments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open environment file: " + path.string());
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    throw std::runtime_error("malformed environment file " + path.string() +
                             ": " + ex.what());
  }
  if (!doc.contains("x_points") || !doc.contains("y_points") ||
      !doc.contains("environments")) {
    throw std::runtime_error(
        "environment file must contain x_points, y_points and environments");
  }

  OutcomeSpace space;
  for (const auto& xp : doc.at("x_points")) {
    space.x_points.push_back(xp.get<XPoint>());
  }
  space.y_points = doc.at("y_points").get<std::vector<double>>();
  space.validate();

  std::vector<Environment> envs;
  for (const auto& je : doc.at("environments")) {
    Environment e;
    e.space = space;
    e.label = je.value("label", "env" + std::to_string(envs.size()));
    const auto& rows = je.at("pmf");
    if (rows.size() != space.num_x()) {
      throw std::runtime_error("environment '" + e.label + "': expected " +
                               std::to_string(space.num_x()) + " pmf rows, got " +
                               std::to_string(rows.size()));
    }
    for (const auto& row : rows) {
      if (row.size() != space.num_y()) {
        throw std::runtime_error("environment '" + e.label +
                                 "': pmf row width mismatch");
      }
      for (const auto& cell : row) e.pmf.push_back(cell.get<double>());
    }
    e.validate(1e-9);
    envs.push_back(std::move(e));
  }
  if (envs.empty()) {
    throw std::runtime_error("environment file contains no environments");
  }
  return envs;
}

void save_environments(const std::filesystem::path& path,
                       const std::vector<Environment>& envs) {
  if (envs.empty()) throw std::invalid_argument("save_environments: empty list");
  const OutcomeSpace& space = envs.front().space;
  for (const Environment& e : envs) {
    if (!(e.space == space)) {
      throw std::invalid_argument(
          "save_environments: environments use different outcome grids");
    }
  }
  nlohmann::ordered_json doc;
  doc["x_points"] = space.x_points;
  doc["y_points"] = space.y_points;
  doc["environments"] = nlohmann::ordered_json::array();
  for (const Environment& e : envs) {
    nlohmann::ordered_json je;
    je["label"] = e.label;
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t xi = 0; xi < space.num_x(); ++xi) {
      auto row = nlohmann::ordered_json::array();
      for (std::size_t yi = 0; yi < space.num_y(); ++yi) {
        row.push_back(e.prob(xi, yi));
      }
      rows.push_back(std::move(row));
    }
    je["pmf"] = std::move(rows);
    doc["environments"].push_back(std::move(je));
  }
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write environment file: " + path.string());
  }
  out << doc.dump(2) << "\n";
}

EnvironmentFamily EnvironmentFamily::two_bit(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error(
        range_error_text("EnvironmentFamily::two_bit", "alpha", alpha, 0, 1));
  }
  EnvironmentFamily f;
  f.kind = Kind::two_bit;
  f.alpha = alpha;
  return f;
}

EnvironmentFamily EnvironmentFamily::section4() {
  EnvironmentFamily f;
  f.kind = Kind::section4;
  return f;
}

EnvironmentFamily EnvironmentFamily::piecewise_pi() {
  EnvironmentFamily f;
  f.kind = Kind::piecewise_pi;
  return f;
}

EnvironmentFamily EnvironmentFamily::custom(std::vector<Environment> envs) {
  if (envs.empty()) {
    throw std::invalid_argument("EnvironmentFamily::custom: empty list");
  }
  EnvironmentFamily f;
  f.kind = Kind::custom;
  f.members = std::move(envs);
  return f;
}

std::pair<double, double> EnvironmentFamily::param_domain() const {
  switch (kind) {
    case Kind::two_bit:
    case Kind::piecewise_pi:
      return {0.0, 1.0};
    case Kind::section4:
      return {-1.0 / 6.0, 1.0 / 3.0};
    case Kind::custom:
      return {0.0, static_cast<double>(members.size() - 1)};
  }
  throw std::logic_error("unreachable");
}

Environment EnvironmentFamily::at(double param) const {
  switch (kind) {
    case Kind::two_bit:
      return two_bit_env(alpha, param);
    case Kind::section4:
      return section4_env(param);
    case Kind::piecewise_pi:
      return piecewise_pi_env(param);
    case Kind::custom: {
      const auto idx = static_cast<std::size_t>(param);
      if (param < 0 || idx >= members.size() ||
          param != static_cast<double>(idx)) {
        throw std::domain_error("custom family: index out of range");
      }
      return members[idx];
    }
  }
  throw std::logic_error("unreachable");
}

std::string EnvironmentFamily::name() const {
  switch (kind) {
    case Kind::two_bit:
      return "two-bit(alpha=" + format_double(alpha) + ")";
    case Kind::section4:
      return "three-level";
    case Kind::piecewise_pi:
      return "piecewise-pi";
    case Kind::custom:
      return "custom[" + std::to_string(members.size()) + "]";
  }
  throw std::logic_error("unreachable");
}

}  // namespace irm
