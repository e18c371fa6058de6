#include "irm/newton.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>

namespace irm {

namespace {

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double norm2_squared(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

// Gaussian elimination with partial pivoting on the (ridged) normal
// equations; n <= a handful, so a dense in-place solve is plenty.
bool solve_spd_system(std::vector<double> a, std::vector<double> b, int n,
                      std::span<double> out) {
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    }
    if (std::abs(a[pivot * n + col]) < 1e-300) return false;
    if (pivot != col) {
      for (int c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
      std::swap(b[col], b[pivot]);
    }
    const double inv = 1.0 / a[col * n + col];
    for (int r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] * inv;
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a[r * n + c] * out[c];
    out[r] = s / a[r * n + r];
  }
  return all_finite(out);
}

struct StartOutcome {
  std::optional<std::vector<double>> root;
  bool hit_boundary = false;
  int iterations = 0;
};

class FdJacobian {
 public:
  explicit FdJacobian(const ResidualFn& residual, int dim, int m)
      : residual_(residual), dim_(dim), m_(m), plus_(m), minus_(m), probe_(dim) {}

  void operator()(std::span<const double> vars, std::span<double> out) {
    for (int j = 0; j < dim_; ++j) {
      const double h = 1e-6 * (1.0 + std::abs(vars[j]));
      std::copy(vars.begin(), vars.end(), probe_.begin());
      probe_[j] = vars[j] + h;
      residual_(probe_, plus_);
      probe_[j] = vars[j] - h;
      residual_(probe_, minus_);
      for (int i = 0; i < m_; ++i) {
        out[i * dim_ + j] = (plus_[i] - minus_[i]) / (2.0 * h);
      }
    }
  }

 private:
  const ResidualFn& residual_;
  int dim_, m_;
  std::vector<double> plus_, minus_, probe_;
};

StartOutcome run_start(std::span<const double> start, int dim, int m,
                       const ResidualFn& residual, const JacobianFn& jacobian,
                       const NewtonOptions& opt) {
  std::vector<double> x(start.begin(), start.end());
  std::vector<double> r(m), r_trial(m), jac(m * dim), step(dim), trial(dim);
  std::vector<double> normal(dim * dim), rhs(dim);
  FdJacobian fd(residual, dim, m);

  StartOutcome out;
  residual(x, r);
  if (!all_finite(r)) return out;
  double r2 = norm2_squared(r);

  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    out.iterations = iter;
    if (max_abs(r) <= opt.residual_tol) {
      out.root = std::move(x);
      return out;
    }

    if (jacobian) {
      jacobian(x, jac);
    } else {
      fd(x, jac);
    }
    if (!all_finite(jac)) return out;

    // Normal equations J'J d = -J'r with a tiny ridge; near rank deficiency
    // the ridge is raised until the solve succeeds.
    double trace = 0.0;
    for (int a = 0; a < dim; ++a) {
      for (int b = a; b < dim; ++b) {
        double s = 0.0;
        for (int i = 0; i < m; ++i) s += jac[i * dim + a] * jac[i * dim + b];
        normal[a * dim + b] = s;
        normal[b * dim + a] = s;
      }
      trace += normal[a * dim + a];
      double s = 0.0;
      for (int i = 0; i < m; ++i) s += jac[i * dim + a] * r[i];
      rhs[a] = -s;
    }
    double ridge = 1e-12 * std::max(1.0, trace / dim);
    bool solved = false;
    for (int attempt = 0; attempt < 4 && !solved; ++attempt) {
      std::vector<double> a = normal;
      for (int d = 0; d < dim; ++d) a[d * dim + d] += ridge;
      solved = solve_spd_system(std::move(a), rhs, dim, step);
      ridge *= 1e3;
    }
    if (!solved) return out;

    // Halve until the residual norm decreases.
    double scale = 1.0;
    bool improved = false;
    for (int h = 0; h <= opt.max_step_halvings; ++h) {
      for (int d = 0; d < dim; ++d) trial[d] = x[d] + scale * step[d];
      residual(trial, r_trial);
      if (all_finite(r_trial) && norm2_squared(r_trial) < r2) {
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) return out;
    x = trial;
    r = r_trial;
    r2 = norm2_squared(r);

    if (opt.start_box > 0.0) {
      for (double v : x) {
        if (std::abs(v) > opt.start_box) {
          out.hit_boundary = true;
          return out;
        }
      }
    }
  }
  out.iterations = opt.max_iterations;
  if (max_abs(r) <= opt.residual_tol) out.root = std::move(x);
  return out;
}

}  // namespace

std::vector<std::vector<double>> solver_starts(int dim, std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("solver_starts: dim < 1");

  double step = 0.25;
  int random_count = 200;
  auto lattice_size = [&](double s) {
    const auto per_dim = static_cast<std::uint64_t>(std::lround(4.0 / s)) + 1;
    std::uint64_t n = 1;
    for (int d = 0; d < dim; ++d) n *= per_dim;
    return n;
  };
  constexpr std::uint64_t kLatticeCap = 500000;
  if (lattice_size(step) > kLatticeCap) step = 1.0;
  bool use_lattice = lattice_size(step) <= kLatticeCap;
  if (!use_lattice) random_count = 2000;

  std::vector<std::vector<double>> starts;
  if (use_lattice) {
    const int per_dim = static_cast<int>(std::lround(4.0 / step)) + 1;
    std::vector<int> idx(static_cast<std::size_t>(dim), 0);
    while (true) {
      std::vector<double> p(static_cast<std::size_t>(dim));
      for (int d = 0; d < dim; ++d) p[static_cast<std::size_t>(d)] = -2.0 + step * idx[static_cast<std::size_t>(d)];
      starts.push_back(std::move(p));
      int d = dim - 1;
      while (d >= 0 && ++idx[static_cast<std::size_t>(d)] == per_dim) {
        idx[static_cast<std::size_t>(d)] = 0;
        --d;
      }
      if (d < 0) break;
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-3.0, 3.0);
  for (int k = 0; k < random_count; ++k) {
    std::vector<double> p(static_cast<std::size_t>(dim));
    for (double& v : p) v = uni(rng);
    starts.push_back(std::move(p));
  }
  return starts;
}

MultiStartResult multistart_newton(int dim, int num_residuals,
                                   const ResidualFn& residual,
                                   const JacobianFn& jacobian,
                                   std::span<const std::vector<double>> starts,
                                   const NewtonOptions& options, Exec exec) {
  if (dim < 1 || num_residuals < 1) {
    throw std::invalid_argument("multistart_newton: bad dimensions");
  }
  std::vector<StartOutcome> outcomes(starts.size());
  parallel_for(starts.size(), exec, [&](std::size_t i) {
    outcomes[i] = run_start(starts[i], dim, num_residuals, residual, jacobian,
                            options);
  });

  MultiStartResult result;
  result.diagnostics.starts = starts.size();

  std::vector<std::vector<double>> converged;
  for (const StartOutcome& o : outcomes) {
    result.diagnostics.total_iterations += static_cast<std::size_t>(o.iterations);
    if (o.hit_boundary) ++result.diagnostics.discarded_boundary;
    if (o.root) converged.push_back(*o.root);
  }
  result.diagnostics.converged = converged.size();

  std::sort(converged.begin(), converged.end());
  // Groups are anchored at their first (lexicographically smallest) member;
  // the reported representative is the member with the smallest residual, so
  // exact roots like the origin come out clean. Roots arrive in lexicographic
  // order, so anchor first-coordinates are nondecreasing and only the tail
  // anchors within dedup_tol of root[0] can match.
  std::vector<std::vector<double>> anchors;
  std::vector<double> best_residual;
  std::vector<double> r(static_cast<std::size_t>(num_residuals));
  for (const auto& root : converged) {
    residual(root, r);
    const double rmax = max_abs(r);
    bool merged = false;
    for (std::size_t k = anchors.size(); k-- > 0;) {
      if (root[0] - anchors[k][0] > options.dedup_tol) break;
      double dist = 0.0;
      for (int d = 0; d < dim; ++d) {
        dist = std::max(dist, std::abs(root[static_cast<std::size_t>(d)] -
                                       anchors[k][static_cast<std::size_t>(d)]));
      }
      if (dist <= options.dedup_tol) {
        ++result.basin_counts[k];
        ++result.diagnostics.merged;
        if (rmax < best_residual[k]) {
          best_residual[k] = rmax;
          result.roots[k] = root;
        }
        merged = true;
        break;
      }
    }
    if (!merged) {
      anchors.push_back(root);
      result.roots.push_back(root);
      best_residual.push_back(rmax);
      result.basin_counts.push_back(1);
    }
  }
  return result;
}

double bisect_root(const std::function<double(double)>& f, double lo, double hi,
                   double width_tol, int max_iter) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo < 0) == (fhi < 0)) {
    throw std::invalid_argument("bisect_root: no sign change on the interval");
  }
  for (int i = 0; i < max_iter && hi - lo > width_tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::pair<double, double> bisect_predicate(const std::function<bool(double)>& pred,
                                           double lo, double hi, double width_tol,
                                           int max_iter) {
  bool plo = pred(lo);
  bool phi = pred(hi);
  if (plo == phi) {
    throw std::invalid_argument("bisect_predicate: no transition on the interval");
  }
  for (int i = 0; i < max_iter && hi - lo > width_tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (pred(mid) == plo) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return {lo, hi};
}

}  // namespace irm
