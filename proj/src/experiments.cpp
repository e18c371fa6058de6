#include "irm/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "irm/env.hpp"
#include "irm/invariance.hpp"
#include "irm/irmv1.hpp"
#include "irm/newton.hpp"
#include "irm/risk.hpp"
#include "irm/scalar.hpp"

namespace irm {

namespace {

struct Ctx {
  ExperimentReport* rep;
  ExperimentOptions opts;

  void block(std::string name, CsvTable table) {
    rep->blocks.emplace_back(std::move(name), std::move(table));
  }
  void param(const std::string& key, const std::string& value) {
    rep->params[key] = value;
  }
  void check(std::string name, double expected, double actual, double tol,
             std::string source) {
    RefCheck c;
    c.name = std::move(name);
    c.expected = expected;
    c.actual = actual;
    c.tol = tol;
    c.pass = std::isfinite(actual) && std::abs(actual - expected) <= tol;
    c.source = std::move(source);
    rep->checks.push_back(std::move(c));
  }
  void check_flag(std::string name, bool ok, std::string source) {
    check(std::move(name), 1.0, ok ? 1.0 : 0.0, 0.5, std::move(source));
  }
  void check_interval(std::string name, double lo, double hi, double actual,
                      std::string source) {
    check(std::move(name), 0.5 * (lo + hi), actual, 0.5 * (hi - lo),
          std::move(source));
  }
  std::mt19937_64 rng(std::uint64_t salt) const {
    return std::mt19937_64(opts.seed * 0x9e3779b97f4a7c15ull + salt);
  }
};

double max_norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

std::vector<double> uniform_draws(std::mt19937_64& rng, double lo, double hi,
                                  int n) {
  std::uniform_real_distribution<double> uni(lo, hi);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (double& v : out) v = uni(rng);
  return out;
}

CsvTable predictors_block(const OutcomeSpace& space,
                          const std::vector<std::pair<std::string, Predictor>>& fs) {
  CsvTable t;
  t.columns.push_back("point");
  for (const auto& [label, f] : fs) t.columns.push_back(label);
  for (std::size_t xi = 0; xi < space.num_x(); ++xi) {
    std::vector<std::string> row{point_label(space.x_points[xi])};
    for (const auto& [label, f] : fs) row.push_back(format_double(f.values[xi]));
    t.add_row(std::move(row));
  }
  return t;
}

CsvTable losses_block(std::span<const Environment> envs,
                      const std::vector<std::pair<std::string, Predictor>>& fs,
                      Loss loss) {
  CsvTable t;
  t.columns.push_back("environment");
  for (const auto& [label, f] : fs) t.columns.push_back(label);
  for (const Environment& e : envs) {
    std::vector<std::string> row{e.label};
    for (const auto& [label, f] : fs) {
      row.push_back(format_double(population_loss(f, e, loss)));
    }
    t.add_row(std::move(row));
  }
  return t;
}

CsvTable solution_set_block(const SolutionSet& set,
                            std::span<const Environment> envs, Loss loss) {
  const auto selected = irm_s_select(set, envs, loss);
  CsvTable t;
  const OutcomeSpace& space = envs.front().space;
  for (const XPoint& x : space.x_points) {
    t.columns.push_back("phi" + point_label(x));
  }
  for (const Environment& e : envs) t.columns.push_back("residual " + e.label);
  for (const Environment& e : envs) t.columns.push_back("loss " + e.label);
  t.columns.push_back("total_train_loss");
  t.columns.push_back("selected");
  for (std::size_t k = 0; k < set.solutions.size(); ++k) {
    std::vector<std::string> row;
    for (double v : set.solutions[k].values) row.push_back(format_double(v));
    for (double r : set.residuals[k]) row.push_back(format_double(r));
    double total = 0.0;
    for (const Environment& e : envs) {
      const double l = population_loss(set.solutions[k], e, loss);
      row.push_back(format_double(l));
      total += l;
    }
    row.push_back(format_double(total));
    const bool is_sel =
        selected && max_norm_diff(selected->values, set.solutions[k].values) == 0.0;
    row.push_back(is_sel ? "1" : "0");
    t.add_row(std::move(row));
  }
  return t;
}

CsvTable path_block(const std::vector<LambdaPathPoint>& path,
                    std::span<const Environment> envs) {
  CsvTable t;
  const OutcomeSpace& space = envs.front().space;
  t.columns = {"log2_lambda", "lambda"};
  for (const XPoint& x : space.x_points) {
    t.columns.push_back("phi" + point_label(x));
  }
  t.columns.push_back("objective");
  for (const Environment& e : envs) t.columns.push_back("residual " + e.label);
  for (const Environment& e : envs) t.columns.push_back("loss " + e.label);
  for (const LambdaPathPoint& p : path) {
    std::vector<std::string> row{format_double(p.log2_lambda),
                                 format_double(p.lambda)};
    for (double v : p.minimizer.values) row.push_back(format_double(v));
    row.push_back(format_double(p.objective));
    for (double r : p.residuals) row.push_back(format_double(r));
    for (double l : p.env_losses) row.push_back(format_double(l));
    t.add_row(std::move(row));
  }
  return t;
}

CsvTable scan_block(const OutcomeSpace& space,
                    const std::vector<SubsetScanRow>& rows) {
  CsvTable t;
  t.columns = {"subset_mask", "members", "invariant", "common_mean"};
  for (const SubsetScanRow& r : rows) {
    std::string members;
    for (std::size_t xi = 0; xi < space.num_x(); ++xi) {
      if (r.mask & (1u << xi)) {
        if (!members.empty()) members += "|";
        members += point_label(space.x_points[xi]);
      }
    }
    t.add_row({std::to_string(r.mask), members, r.invariant ? "1" : "0",
               format_cell(r.common_mean)});
  }
  return t;
}

Predictor odd_two_bit(double u, double v) {
  return Predictor{two_bit_space(), {u, v, -v, -u}};
}

std::string odd_solution_label(const Predictor& f) {
  const double u = f.values[0];
  const double v = f.values[1];
  if (std::max(std::abs(u), std::abs(v)) < 1e-9) return "f0";
  if (std::abs(u - v) < 1e-6) return "f_irm";
  return u > v ? "f1" : "f2";
}

// Samples the zero set of the odd gradient constraint of one environment:
// for each u, find the v roots by sign-change scan + bisection.
CsvTable odd_loci_block(std::span<const Environment> envs, Loss loss,
                        double u_range, double v_range) {
  CsvTable t;
  t.columns = {"environment", "u", "v"};
  const int nu = 321;
  const int nv = 641;
  for (const Environment& e : envs) {
    for (int i = 0; i < nu; ++i) {
      const double u = -u_range + 2.0 * u_range * i / (nu - 1);
      auto h = [&](double v) { return scalar_gradient(odd_two_bit(u, v), e, loss); };
      double prev_v = -v_range;
      double prev_h = h(prev_v);
      for (int j = 1; j < nv; ++j) {
        const double v = -v_range + 2.0 * v_range * j / (nv - 1);
        const double hv = h(v);
        if (prev_h == 0.0) {
          t.add_row({e.label, format_double(u), format_double(prev_v)});
        } else if ((prev_h < 0) != (hv < 0)) {
          const double root = bisect_root(h, prev_v, v, 1e-12);
          t.add_row({e.label, format_double(u), format_double(root)});
        }
        prev_v = v;
        prev_h = hv;
      }
      if (prev_h == 0.0) {
        t.add_row({e.label, format_double(u), format_double(prev_v)});
      }
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

void exp_motivating_025(Ctx& ctx) {
  const std::vector<Environment> envs = {two_bit_env(0.25, 0.1),
                                         two_bit_env(0.25, 0.2)};
  const Environment e_test = two_bit_env(0.25, 0.9);

  const Predictor f_erm = erm_solve(envs, Loss::square);
  const auto f_irm = irm_select(envs, Loss::square, 1e-9, ctx.opts.exec);
  const Predictor f0 = zero_predictor(envs.front().space);
  if (!f_irm) throw std::runtime_error("motivating-025: empty invariant set");

  std::vector<std::pair<std::string, Predictor>> fs = {
      {"f_erm", f_erm}, {"f_irm", *f_irm}, {"f0", f0}};
  ctx.block("predictors", predictors_block(envs.front().space, fs));
  std::vector<Environment> all = envs;
  all.push_back(e_test);
  ctx.block("losses", losses_block(all, fs, Loss::square));

  const std::vector<double> erm_ref = {0.8889, -0.3077, 0.3077, -0.8889};
  const std::vector<double> irm_ref = {0.5, 0.5, -0.5, -0.5};
  for (std::size_t i = 0; i < 4; ++i) {
    ctx.check("f_erm[" + std::to_string(i) + "]", erm_ref[i], f_erm.values[i],
              1e-4, "sec3-motivating-tables");
    ctx.check("f_irm[" + std::to_string(i) + "]", irm_ref[i], f_irm->values[i],
              1e-9, "sec3-motivating-tables");
  }
  ctx.check("test_loss_f_erm", 0.985, population_loss(f_erm, e_test, Loss::square),
            1e-3, "sec3-motivating-losses");
  ctx.check("test_loss_f_irm", 0.375, population_loss(*f_irm, e_test, Loss::square),
            1e-3, "sec3-motivating-losses");
  ctx.check("test_loss_f0", 0.5, population_loss(f0, e_test, Loss::square), 1e-3,
            "sec3-motivating-losses");
}

void exp_failure_01(Ctx& ctx) {
  const std::vector<Environment> envs = {two_bit_env(0.1, 0.2),
                                         two_bit_env(0.1, 0.25)};
  const Environment e_test = two_bit_env(0.1, 0.9);

  const Predictor f_erm = erm_solve(envs, Loss::square);
  const auto f_irm = irm_select(envs, Loss::square, 1e-9, ctx.opts.exec);
  const auto f_irms = irm_s_select(envs, Loss::square, Restriction::odd,
                                   ctx.opts.seed, ctx.opts.exec);
  const Predictor f0 = zero_predictor(envs.front().space);
  if (!f_irm || !f_irms) throw std::runtime_error("failure-01: empty solution set");

  std::vector<std::pair<std::string, Predictor>> fs = {
      {"f_erm", f_erm}, {"f_irm", *f_irm}, {"f_irm_s", *f_irms}, {"f0", f0}};
  ctx.block("predictors", predictors_block(envs.front().space, fs));
  std::vector<Environment> all = envs;
  all.push_back(e_test);
  ctx.block("losses", losses_block(all, fs, Loss::square));

  const std::vector<double> erm_ref = {0.9375, 0.4464, -0.4464, -0.9375};
  const std::vector<double> irm_ref = {0.8, 0.8, -0.8, -0.8};
  const std::vector<double> irms_ref = {0.9557, 0.2943, -0.2943, -0.9557};
  for (std::size_t i = 0; i < 4; ++i) {
    ctx.check("f_erm[" + std::to_string(i) + "]", erm_ref[i], f_erm.values[i],
              1e-4, "sec3-failure-tables");
    ctx.check("f_irm[" + std::to_string(i) + "]", irm_ref[i], f_irm->values[i],
              1e-4, "sec3-failure-tables");
    ctx.check("f_irm_s[" + std::to_string(i) + "]", irms_ref[i],
              f_irms->values[i], 1e-4, "sec3-failure-tables");
  }
  // The reference table's (f_erm, e_test) entry reads 0.28, but the loss is
  // affine in beta, so the table's own 0.15 / 0.16 entries at beta 0.2 / 0.25
  // force 0.3037 at beta 0.9. The embedded reference carries the derived
  // exact value; 0.28 matches beta = 0.8 instead.
  const double loss_ref[3][4] = {{0.15, 0.18, 0.15, 0.5},
                                 {0.16, 0.18, 0.17, 0.5},
                                 {0.3037, 0.18, 0.38, 0.5}};
  for (std::size_t ei = 0; ei < all.size(); ++ei) {
    for (std::size_t k = 0; k < fs.size(); ++k) {
      const std::string source = ei == 2 && k == 0
                                     ? "sec3-failure-loss-table (corrected)"
                                     : "sec3-failure-loss-table";
      ctx.check("loss[" + all[ei].label + "][" + fs[k].first + "]",
                loss_ref[ei][k], population_loss(fs[k].second, all[ei], Loss::square),
                0.005, source);
    }
  }
  ctx.param("corrected_reference",
            "loss[(0.1,0.9)][f_erm]: stated 0.28, affine extrapolation of the "
            "0.15/0.16 training entries gives 0.3037 (0.28 matches beta=0.8)");
  ctx.check_flag("scalar_relaxation_extrapolates_worse",
                 population_loss(*f_irms, e_test, Loss::square) >
                     population_loss(f_erm, e_test, Loss::square),
                 "sec3-failure-claim");
}

void check_odd_intersections(Ctx& ctx, const SolutionSet& set,
                             const std::vector<std::pair<double, double>>& expected,
                             double tol, const std::string& source) {
  ctx.check("solution_count", static_cast<double>(expected.size()),
            static_cast<double>(set.solutions.size()), 0.0, source);
  for (std::size_t k = 0; k < expected.size() && k < set.solutions.size(); ++k) {
    ctx.check("solution" + std::to_string(k) + ".u", expected[k].first,
              set.solutions[k].values[0], tol, source);
    ctx.check("solution" + std::to_string(k) + ".v", expected[k].second,
              set.solutions[k].values[1], tol, source);
  }
}

void exp_fig1_loci(Ctx& ctx) {
  std::vector<Environment> envs;
  for (double beta : {0.2, 0.25, 0.4, 0.9}) envs.push_back(two_bit_env(0.1, beta));
  ctx.block("loci", odd_loci_block(envs, Loss::square, 1.6, 1.6));
  const SolutionSet set = solve_scalar_invariant(envs, Loss::square,
                                                 Restriction::odd, ctx.opts.seed,
                                                 ctx.opts.exec);
  ctx.block("intersections", solution_set_block(set, envs, Loss::square));
  // Lexicographic by table: f0, f2, f_irm, f1.
  check_odd_intersections(ctx, set,
                          {{0.0, 0.0}, {0.2943, 0.9557}, {0.8, 0.8}, {0.9557, 0.2943}},
                          1e-3, "fig1-intersections");
}

void exp_fig6_loci(Ctx& ctx) {
  std::vector<Environment> envs;
  for (double beta : {0.1, 0.2, 0.4, 0.9}) envs.push_back(two_bit_env(0.05, beta));
  ctx.block("loci", odd_loci_block(envs, Loss::logistic, 6.5, 8.0));
  const SolutionSet set = solve_scalar_invariant(envs, Loss::logistic,
                                                 Restriction::odd, ctx.opts.seed,
                                                 ctx.opts.exec);
  ctx.block("intersections", solution_set_block(set, envs, Loss::logistic));
  check_odd_intersections(
      ctx, set,
      {{0.0, 0.0}, {0.9041, 4.9847}, {2.9444, 2.9444}, {4.9847, 0.9041}}, 1e-3,
      "fig6-intersections");
}

// Loss-vs-beta curves of the four odd solutions plus the selection
// crossovers located by bisection.
void loss_curves_and_crossovers(Ctx& ctx, double alpha,
                                const std::vector<double>& train_betas, Loss loss,
                                double lo_bracket, double hi_bracket,
                                bool exact_brackets, const std::string& source) {
  std::vector<Environment> envs;
  for (double b : train_betas) envs.push_back(two_bit_env(alpha, b));
  const SolutionSet set =
      solve_scalar_invariant(envs, loss, Restriction::odd, ctx.opts.seed,
                             ctx.opts.exec);
  if (set.solutions.size() != 4) {
    throw std::runtime_error("expected 4 odd solutions, found " +
                             std::to_string(set.solutions.size()));
  }
  std::vector<std::pair<std::string, Predictor>> fs;
  for (const Predictor& f : set.solutions) {
    fs.emplace_back(odd_solution_label(f), f);
  }

  CsvTable curves;
  curves.columns.push_back("beta");
  for (const auto& [label, f] : fs) curves.columns.push_back(label);
  const int n = 199;
  for (int i = 0; i < n; ++i) {
    const double beta = 0.005 + (0.995 - 0.005) * i / (n - 1);
    const Environment e = two_bit_env(alpha, beta);
    std::vector<std::string> row{format_double(beta)};
    for (const auto& [label, f] : fs) {
      row.push_back(format_double(population_loss(f, e, loss)));
    }
    curves.add_row(std::move(row));
  }
  ctx.block("loss_curves", curves);

  const Predictor* f1 = nullptr;
  const Predictor* f2 = nullptr;
  const Predictor* firm = nullptr;
  for (const auto& [label, f] : fs) {
    if (label == "f1") f1 = &f;
    if (label == "f2") f2 = &f;
    if (label == "f_irm") firm = &f;
  }
  if (!f1 || !f2 || !firm) {
    throw std::runtime_error("odd solution labeling failed");
  }
  auto diff = [alpha, loss](const Predictor* a, const Predictor* b) {
    return [a, b, alpha, loss](double beta) {
      const Environment e = two_bit_env(alpha, beta);
      return population_loss(*a, e, loss) - population_loss(*b, e, loss);
    };
  };
  const double c1 = bisect_root(diff(f1, firm), 0.05, 0.5, 1e-10);
  const double c2 = bisect_root(diff(f2, firm), 0.5, 0.95, 1e-10);
  CsvTable cross;
  cross.columns = {"pair", "beta"};
  cross.add_row({"f1-vs-f_irm", format_double(c1)});
  cross.add_row({"f2-vs-f_irm", format_double(c2)});
  ctx.block("crossovers", cross);
  if (exact_brackets) {
    ctx.check_interval("crossover_f1", lo_bracket, hi_bracket, c1, source);
    ctx.check_interval("crossover_f2", 1.0 - hi_bracket, 1.0 - lo_bracket, c2,
                       source);
  } else {
    // The reference states a sufficient bound (f1 wins below lo_bracket, f2
    // above its mirror image), not the exact crossover location.
    ctx.check_flag("f1_optimal_below_" + format_double(lo_bracket),
                   c1 >= lo_bracket && c1 <= hi_bracket, source);
    ctx.check_flag("f2_optimal_above_" + format_double(1.0 - lo_bracket),
                   c2 <= 1.0 - lo_bracket && c2 >= 1.0 - hi_bracket, source);
  }
}

void exp_fig2_losses(Ctx& ctx) {
  loss_curves_and_crossovers(ctx, 0.1, {0.2, 0.25}, Loss::square, 0.28, 0.29,
                             true, "sec3-selection-regimes");
}

void exp_fig7_losses(Ctx& ctx) {
  loss_curves_and_crossovers(ctx, 0.05, {0.1, 0.2}, Loss::logistic, 0.25, 0.3,
                             false, "app-a3-selection-bound");
}

void exp_fig3_path(Ctx& ctx) {
  const std::vector<Environment> envs = {two_bit_env(0.1, 0.2),
                                         two_bit_env(0.1, 0.25)};
  const auto lambdas = default_lambda_grid();
  const auto path = lambda_path(envs, lambdas, Loss::square, ctx.opts.seed,
                                ctx.opts.exec);
  ctx.block("path", path_block(path, envs));

  const std::vector<double> erm_ref = {0.9375, 0.4464, -0.4464, -0.9375};
  const std::vector<double> irms_ref = {0.9557, 0.2943, -0.2943, -0.9557};
  for (std::size_t i = 0; i < 4; ++i) {
    ctx.check("lambda0[" + std::to_string(i) + "]", erm_ref[i],
              path.front().minimizer.values[i], 1e-3, "fig3-endpoints");
    ctx.check("lambda2^20[" + std::to_string(i) + "]", irms_ref[i],
              path.back().minimizer.values[i], 1e-2, "fig3-endpoints");
  }
  // Monotone at figure resolution; the exact path dips by ~2e-5 in phi(1,1)
  // at small lambda before climbing.
  bool up = true, down = true;
  for (std::size_t k = 1; k < path.size(); ++k) {
    up = up && path[k].minimizer.values[0] >= path[k - 1].minimizer.values[0] - 1e-4;
    down = down && path[k].minimizer.values[1] <= path[k - 1].minimizer.values[1] + 1e-4;
  }
  ctx.check_flag("phi(1,1)_monotone_up", up, "fig3-interpolation");
  ctx.check_flag("phi(1,-1)_monotone_down", down, "fig3-interpolation");
}

void exp_fig5_noisy(Ctx& ctx) {
  const std::vector<Environment> exact = {two_bit_env(0.25, 0.1),
                                          two_bit_env(0.25, 0.2),
                                          two_bit_env(0.25, 0.3)};
  const std::vector<Environment> noisy = {two_bit_env(0.245, 0.105),
                                          two_bit_env(0.255, 0.195),
                                          two_bit_env(0.251, 0.302)};
  const auto lambdas = default_lambda_grid();
  const auto path_exact =
      lambda_path(exact, lambdas, Loss::square, ctx.opts.seed, ctx.opts.exec);
  const auto path_noisy =
      lambda_path(noisy, lambdas, Loss::square, ctx.opts.seed, ctx.opts.exec);
  ctx.block("path_exact", path_block(path_exact, exact));
  ctx.block("path_noisy", path_block(path_noisy, noisy));

  const std::vector<double> irm_ref = {0.5, 0.5, -0.5, -0.5};
  for (std::size_t i = 0; i < 4; ++i) {
    ctx.check("exact_lambda2^20[" + std::to_string(i) + "]", irm_ref[i],
              path_exact.back().minimizer.values[i], 1e-2, "fig5-exact-limit");
  }
  auto table_max_norm = [](const Predictor& f) {
    double m = 0.0;
    for (double v : f.values) m = std::max(m, std::abs(v));
    return m;
  };
  ctx.check_flag("noisy_collapse_to_zero",
                 table_max_norm(path_noisy.back().minimizer) < 0.05,
                 "fig5-noisy-collapse");
  // Reported, not asserted: smallest grid lambda with a collapsed minimizer.
  double collapse_lambda = -1.0;
  for (const LambdaPathPoint& p : path_noisy) {
    if (table_max_norm(p.minimizer) < 0.05) {
      collapse_lambda = p.lambda;
      break;
    }
  }
  ctx.param("collapse_lambda", format_double(collapse_lambda));
}

void exp_app_a3_logistic(Ctx& ctx) {
  const std::vector<Environment> envs = {two_bit_env(0.05, 0.1),
                                         two_bit_env(0.05, 0.2)};
  const SolutionSet set = solve_scalar_invariant(envs, Loss::logistic,
                                                 Restriction::odd, ctx.opts.seed,
                                                 ctx.opts.exec);
  ctx.block("solutions", solution_set_block(set, envs, Loss::logistic));
  check_odd_intersections(
      ctx, set,
      {{0.0, 0.0}, {0.9041, 4.9847}, {2.9444, 2.9444}, {4.9847, 0.9041}}, 1e-3,
      "app-a3-table");
  if (set.solutions.size() == 4) {
    ctx.check("f_irm_equals_log19", std::log(19.0), set.solutions[2].values[0],
              1e-6, "app-a3-pointwise-optimum");
  }

  // Regime boundary on alpha, located by bisection on the solution count.
  // The stated cutoff 0.077 does not withstand verification: the cross pair
  // merges into the diagonal root where the constraint Jacobian drops rank,
  // i.e. at the root of (1-2a) log((1-a)/a) = 2, which is 0.08322. The
  // numeric count transition is checked against that analytic value.
  auto has_four = [&](double alpha) {
    const std::vector<Environment> probe = {two_bit_env(alpha, 0.1),
                                            two_bit_env(alpha, 0.2)};
    return solve_scalar_invariant(probe, Loss::logistic, Restriction::odd,
                                  ctx.opts.seed, ctx.opts.exec)
               .solutions.size() >= 4;
  };
  const auto [lo, hi] = bisect_predicate(has_four, 0.05, 0.12, 1e-4);
  const double analytic = bisect_root(
      [](double a) { return (1.0 - 2.0 * a) * std::log((1.0 - a) / a) - 2.0; },
      0.05, 0.2, 1e-12);
  CsvTable boundary;
  boundary.columns = {"bracket_lo", "bracket_hi", "analytic_rank_drop",
                      "stated_cutoff"};
  boundary.add_row({format_double(lo), format_double(hi),
                    format_double(analytic), "0.077"});
  ctx.block("alpha_boundary", boundary);
  ctx.param("corrected_reference",
            "regime boundary: stated 0.077, rank-drop equation gives 0.08322");
  ctx.check_interval("alpha_boundary", analytic - 1e-3, analytic + 1e-3,
                     0.5 * (lo + hi), "app-a3-regime (corrected)");
}

void exp_sec4_prop2(Ctx& ctx) {
  auto rng = ctx.rng(41);
  const auto thetas = uniform_draws(rng, -1.0 / 6.0 + 0.01, 1.0 / 3.0 - 0.01, 2);
  std::vector<Environment> envs;
  for (double t : thetas) envs.push_back(section4_env(t));
  ctx.param("train_thetas",
            format_double(thetas[0]) + "," + format_double(thetas[1]));

  const auto iset =
      invariant_predictors_full(envs, Loss::square, 1e-9, ctx.opts.exec);
  std::vector<std::pair<std::string, Predictor>> named;
  for (std::size_t k = 0; k < iset.predictors.size(); ++k) {
    named.emplace_back("p" + std::to_string(k), iset.predictors[k]);
  }
  ctx.block("invariant_predictors", predictors_block(envs.front().space, named));

  // Every invariant predictor uses at most one coordinate.
  const OutcomeSpace& space = envs.front().space;
  auto depends_only_on = [&](const Predictor& f, std::size_t coord) {
    for (std::size_t a = 0; a < space.num_x(); ++a) {
      for (std::size_t b = 0; b < space.num_x(); ++b) {
        if (space.x_points[a][coord] == space.x_points[b][coord] &&
            std::abs(f.values[a] - f.values[b]) > 1e-9) {
          return false;
        }
      }
    }
    return true;
  };
  bool at_most_one = true;
  for (const Predictor& f : iset.predictors) {
    at_most_one = at_most_one && (depends_only_on(f, 0) || depends_only_on(f, 1));
  }
  ctx.check_flag("predictors_use_at_most_one_coordinate", at_most_one,
                 "sec4-structure");

  // Loss laws over the parameter grid.
  const Predictor f1 = linear_predictor(space, {0.3, 0.0});
  const Predictor f2 = linear_predictor(space, {0.0, 0.3});
  const Predictor f0 = zero_predictor(space);
  auto law_rng = ctx.rng(42);
  const auto law_thetas = uniform_draws(law_rng, -1.0 / 6.0 + 1e-6,
                                        1.0 / 3.0 - 1e-6, 100);
  double dev1 = 0.0, dev2 = 0.0;
  for (double t : law_thetas) {
    const Environment e = section4_env(t);
    dev1 = std::max(dev1, std::abs(population_loss(f1, e, Loss::square) - 0.47));
    dev2 = std::max(dev2, std::abs(population_loss(f2, e, Loss::square) -
                                   (0.47 + 0.09 * t)));
  }
  ctx.check("loss_law_f1_max_dev", 0.0, dev1, 1e-9, "sec4-loss-law");
  ctx.check("loss_law_f2_max_dev", 0.0, dev2, 1e-9, "sec4-loss-law");

  const EnvironmentFamily family = EnvironmentFamily::section4();
  CsvTable curves;
  curves.columns = {"theta", "f1", "f2", "f0"};
  for (const SweepPoint& p : loss_sweep(f1, family, Loss::square, GridSpec{201, 1e-4},
                                        ctx.opts.exec)) {
    const Environment e = section4_env(p.param);
    curves.add_row({format_double(p.param), format_double(p.value),
                    format_double(population_loss(f2, e, Loss::square)),
                    format_double(population_loss(f0, e, Loss::square))});
  }
  ctx.block("loss_curves", curves);

  // Training on negative-theta environments mis-selects f2, although f1 has
  // the strictly better sup-risk.
  const std::vector<Environment> neg_envs = {section4_env(-0.15),
                                             section4_env(-0.05)};
  const auto chosen = irm_select(neg_envs, Loss::square, 1e-9, ctx.opts.exec);
  ctx.check("irm_select_neg_theta_is_f2", 0.0,
            chosen ? max_norm_diff(chosen->values, f2.values) : 1.0, 1e-9,
            "sec4-misselection");
  const SupRisk sup1 = ood_sup_risk(f1, family, Loss::square, {}, ctx.opts.exec);
  const SupRisk sup2 = ood_sup_risk(f2, family, Loss::square, {}, ctx.opts.exec);
  ctx.check("sup_risk_f1", 0.47, sup1.value, 1e-6, "sec4-sup-risk");
  ctx.check("sup_risk_f2", 0.5, sup2.value, 1e-3, "sec4-sup-risk");
  ctx.check_flag("sup_risk_prefers_f1", sup1.value < sup2.value - 0.02,
                 "sec4-sup-risk");
  CsvTable sel;
  sel.columns = {"quantity", "value"};
  sel.add_row({"sup_risk_f1", format_double(sup1.value)});
  sel.add_row({"sup_risk_f2", format_double(sup2.value)});
  sel.add_row({"selected_on_negative_thetas", chosen ? "f2-table" : "none"});
  ctx.block("selection", sel);
}

void app_d_expected_masks(const OutcomeSpace& space,
                          std::vector<std::pair<std::uint32_t, double>>& out) {
  auto mask_where = [&](const std::function<bool(const XPoint&)>& pred) {
    std::uint32_t mask = 0;
    for (std::size_t xi = 0; xi < space.num_x(); ++xi) {
      if (pred(space.x_points[xi])) mask |= 1u << xi;
    }
    return mask;
  };
  out = {
      {mask_where([](const XPoint& x) { return x[0] == 1; }), 0.3},
      {mask_where([](const XPoint& x) { return x[0] == -1; }), -0.3},
      {mask_where([](const XPoint& x) { return x[1] == 1; }), 0.3},
      {mask_where([](const XPoint& x) { return x[1] == -1; }), -0.3},
      {mask_where([](const XPoint& x) { return x[0] != 1; }), -0.15},
      {mask_where([](const XPoint& x) { return x[0] != -1; }), 0.15},
  };
}

void exp_app_d_scan(Ctx& ctx) {
  auto rng = ctx.rng(43);
  const auto thetas = uniform_draws(rng, -1.0 / 6.0 + 0.01, 1.0 / 3.0 - 0.01, 5);
  const EnvironmentFamily family = EnvironmentFamily::section4();
  const auto rows = subset_invariance_scan(family, thetas, 1e-9);
  const OutcomeSpace space = three_level_space();
  ctx.block("scan", scan_block(space, rows));

  std::size_t invariant = 0, nonzero = 0;
  for (const SubsetScanRow& r : rows) {
    if (!r.invariant) continue;
    ++invariant;
    if (r.common_mean && std::abs(*r.common_mean) > 1e-9) ++nonzero;
  }
  ctx.check("invariant_subsets", 37.0, static_cast<double>(invariant), 0.0,
            "app-d-counts");
  ctx.check("nonzero_invariant_subsets", 6.0, static_cast<double>(nonzero), 0.0,
            "app-d-counts");

  std::vector<std::pair<std::uint32_t, double>> expected;
  app_d_expected_masks(space, expected);
  for (const auto& [mask, mean] : expected) {
    double actual = std::numeric_limits<double>::quiet_NaN();
    for (const SubsetScanRow& r : rows) {
      if (r.mask == mask && r.invariant && r.common_mean) {
        actual = *r.common_mean;
      }
    }
    ctx.check("mean[mask=" + std::to_string(mask) + "]", mean, actual, 1e-9,
              "app-d-nonzero-table");
  }
}

void exp_app_e_counterexample(Ctx& ctx) {
  // Branch agreement at the knot.
  const Environment left = two_bit_env(0.1, 6.0 * 0.25 / 5.0);
  const Environment right = two_bit_env((6.0 * 0.25 - 1.0) / 5.0, 0.3);
  ctx.check("knot_continuity_max_pmf_diff", 0.0,
            max_norm_diff(left.pmf, right.pmf), 1e-15, "app-e-map");

  std::vector<Environment> train;
  for (double t : {0.05, 0.1, 0.15, 0.2, 0.25}) {
    train.push_back(piecewise_pi_env(t));
  }
  const OutcomeSpace space = two_bit_space();
  Partition by_x1;
  by_x1.cell_of = {0, 0, 1, 1};  // x1 = +1 cell, x1 = -1 cell

  const auto on_train = is_invariant_partition(by_x1, train, 1e-9);
  ctx.check_flag("x1_invariant_on_train", on_train.invariant, "app-e-train");
  ctx.check("x1_cell_mean", 0.8,
            on_train.cells[0].env_means[0] ? *on_train.cells[0].env_means[0] : 0.0,
            1e-12, "app-e-train");

  std::vector<Environment> extended = train;
  extended.push_back(piecewise_pi_env(0.5));
  const auto on_extended = is_invariant_partition(by_x1, extended, 1e-9);
  ctx.check_flag("x1_breaks_with_theta_0.5", !on_extended.invariant,
                 "app-e-break");

  CsvTable curve;
  curve.columns = {"theta", "alpha", "beta", "mean_y_given_x1_pos"};
  for (int i = 1; i < 100; ++i) {
    const double t = i / 100.0;
    const Environment e = piecewise_pi_env(t);
    const auto mean =
        conditional_mean(e, std::vector<XPoint>{{1, 1}, {1, -1}});
    curve.add_row({format_double(t), format_double(e.params.at("alpha")),
                   format_double(e.params.at("beta")), format_cell(mean)});
  }
  ctx.block("mean_curve", curve);
}

void exp_app_b_table1(Ctx& ctx) {
  auto rng = ctx.rng(44);
  const auto betas = uniform_draws(rng, 0.05, 0.95, 5);
  const EnvironmentFamily family = EnvironmentFamily::two_bit(0.25);
  const auto rows = subset_invariance_scan(family, betas, 1e-9);
  const OutcomeSpace space = two_bit_space();
  ctx.block("scan", scan_block(space, rows));

  // Point order (1,1),(1,-1),(-1,1),(-1,-1) -> masks of the beta-independent
  // subsets and their means at alpha = 0.25.
  const std::map<std::uint32_t, double> invariant_means = {
      {3, 0.5}, {9, 0.0}, {6, 0.0}, {12, -0.5}, {15, 0.0}};
  for (const SubsetScanRow& r : rows) {
    const bool expect_invariant = invariant_means.count(r.mask) > 0;
    ctx.check_flag("invariant[mask=" + std::to_string(r.mask) + "]",
                   r.invariant == expect_invariant, "app-b-table1");
    if (expect_invariant) {
      ctx.check("mean[mask=" + std::to_string(r.mask) + "]",
                invariant_means.at(r.mask),
                r.common_mean ? *r.common_mean : std::numeric_limits<double>::quiet_NaN(),
                1e-9, "app-b-table1");
    }
  }
}

struct ExperimentEntry {
  const char* id;
  const char* anchor;
  void (*fn)(Ctx&);
};

const std::vector<ExperimentEntry>& registry() {
  static const std::vector<ExperimentEntry> entries = {
      {"motivating-025", "sec3-motivating", exp_motivating_025},
      {"failure-01", "sec3-failure", exp_failure_01},
      {"fig1-loci", "fig1", exp_fig1_loci},
      {"fig2-losses", "fig2", exp_fig2_losses},
      {"fig3-path", "fig3", exp_fig3_path},
      {"fig5-noisy", "fig5+sec6", exp_fig5_noisy},
      {"app-a3-logistic", "app-a3", exp_app_a3_logistic},
      {"fig6-loci", "fig6", exp_fig6_loci},
      {"fig7-losses", "fig7", exp_fig7_losses},
      {"sec4-prop2", "sec4", exp_sec4_prop2},
      {"app-d-scan", "app-d", exp_app_d_scan},
      {"app-e-counterexample", "app-e", exp_app_e_counterexample},
      {"app-b-table1", "app-b", exp_app_b_table1},
  };
  return entries;
}

}  // namespace

bool ExperimentReport::pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const RefCheck& c) { return c.pass; });
}

std::string ExperimentReport::summary() const {
  std::string out;
  for (const RefCheck& c : checks) {
    out += std::string(c.pass ? "  [ok]   " : "  [FAIL] ") + c.name +
           ": expected " + format_double(c.expected) + " +- " +
           format_double(c.tol) + ", got " + format_double(c.actual) + "  (" +
           c.source + ")\n";
  }
  out += "experiment " + id + ": " + (pass() ? "PASS" : "FAIL") + " (" +
         std::to_string(checks.size()) + " reference checks)\n";
  return out;
}

std::vector<std::string> experiment_ids() {
  std::vector<std::string> ids;
  for (const auto& e : registry()) ids.emplace_back(e.id);
  return ids;
}

std::string experiment_anchor(const std::string& id) {
  for (const auto& e : registry()) {
    if (id == e.id) return e.anchor;
  }
  throw std::invalid_argument("unknown experiment id: " + id);
}

ExperimentReport run_experiment(const std::string& id,
                                const std::filesystem::path& out_dir,
                                const ExperimentOptions& options) {
  const ExperimentEntry* entry = nullptr;
  for (const auto& e : registry()) {
    if (id == e.id) entry = &e;
  }
  if (!entry) throw std::invalid_argument("unknown experiment id: " + id);

  ExperimentReport rep;
  rep.id = entry->id;
  rep.anchor = entry->anchor;
  Ctx ctx{&rep, options};
  const auto t0 = std::chrono::steady_clock::now();
  entry->fn(ctx);
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::filesystem::path dir = out_dir / rep.id;
  std::filesystem::create_directories(dir);
  for (const auto& [name, table] : rep.blocks) {
    write_text_file(dir / (name + ".csv"), table.to_csv());
    write_text_file(dir / (name + ".csv.json"), table.to_json());
  }
  nlohmann::ordered_json jr;
  jr["id"] = rep.id;
  jr["anchor"] = rep.anchor;
  jr["params"] = rep.params;
  jr["pass"] = rep.pass();
  jr["wall_seconds"] = rep.wall_seconds;
  jr["checks"] = nlohmann::ordered_json::array();
  for (const RefCheck& c : rep.checks) {
    jr["checks"].push_back({{"name", c.name},
                            {"expected", c.expected},
                            {"actual", c.actual},
                            {"tol", c.tol},
                            {"pass", c.pass},
                            {"source", c.source}});
  }
  write_text_file(dir / "report.json", jr.dump(2) + "\n");
  return rep;
}

std::vector<ExperimentReport> run_all_experiments(
    const std::filesystem::path& out_dir, const ExperimentOptions& options) {
  std::vector<ExperimentReport> reports;
  for (const std::string& id : experiment_ids()) {
    reports.push_back(run_experiment(id, out_dir, options));
  }
  nlohmann::ordered_json manifest;
  manifest["experiments"] = nlohmann::ordered_json::array();
  for (const ExperimentReport& r : reports) {
    manifest["experiments"].push_back(
        {{"id", r.id}, {"anchor", r.anchor}, {"checks", r.checks.size()}});
  }
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return reports;
}

}  // namespace irm
