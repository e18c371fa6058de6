// irmlab: exact population-level analysis of invariant risk minimization
// over finite discrete environment families.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "irm/csv.hpp"
#include "irm/env.hpp"
#include "irm/experiments.hpp"
#include "irm/expr.hpp"
#include "irm/invariance.hpp"
#include "irm/irmv1.hpp"
#include "irm/risk.hpp"
#include "irm/scalar.hpp"

namespace {

using namespace irm;

struct EnvSourceFlags {
  std::string env_file;
  std::string family;
  double alpha = 0.1;
  std::vector<double> betas;
  std::vector<double> thetas;
  bool from_file = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--env-file", env_file, "JSON environment file");
    cmd->add_option("--family", family,
                    "environment family: two-bit | section4 | piecewise-pi");
    cmd->add_option("--alpha", alpha, "two-bit invariant-feature noise");
    cmd->add_option("--betas", betas, "two-bit spurious-feature noise values")
        ->delimiter(',');
    cmd->add_option("--thetas", thetas, "family parameters")->delimiter(',');
  }

  std::vector<Environment> resolve() {
    if (!env_file.empty()) {
      from_file = true;
      return load_environments(env_file);
    }
    std::vector<Environment> envs;
    if (family == "two-bit") {
      if (betas.empty()) {
        throw CLI::ValidationError("--betas is required for --family two-bit");
      }
      for (double b : betas) envs.push_back(two_bit_env(alpha, b));
    } else if (family == "section4") {
      if (thetas.empty()) {
        throw CLI::ValidationError("--thetas is required for --family section4");
      }
      for (double t : thetas) envs.push_back(section4_env(t));
    } else if (family == "piecewise-pi") {
      if (thetas.empty()) {
        throw CLI::ValidationError(
            "--thetas is required for --family piecewise-pi");
      }
      for (double t : thetas) envs.push_back(piecewise_pi_env(t));
    } else if (family.empty()) {
      throw CLI::ValidationError("need --env-file or --family");
    } else {
      throw CLI::ValidationError("unknown family: " + family);
    }
    return envs;
  }

  // 1e-9 for exactly constructed environments, 1e-6 for file input (decimal
  // noise).
  double default_tol() const { return from_file ? 1e-6 : 1e-9; }
};

struct OutputFlags {
  std::string format = "csv";
  std::string out;

  void attach(CLI::App* cmd) {
    cmd->add_option("--format", format, "csv | json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--out", out, "output file (default: stdout)");
  }

  void emit(const CsvTable& table) const {
    const std::string text = format == "json" ? table.to_json() : table.to_csv();
    if (out.empty()) {
      std::cout << text;
    } else {
      write_text_file(out, text);
    }
  }
};

CsvTable predictor_table(const Predictor& f) {
  CsvTable t;
  t.columns = {"point", "value"};
  for (std::size_t xi = 0; xi < f.space.num_x(); ++xi) {
    t.add_row({point_label(f.space.x_points[xi]), format_double(f.values[xi])});
  }
  return t;
}

std::vector<double> parse_grid(const std::string& text) {
  // "lo:hi:step"
  std::istringstream is(text);
  std::string a, b, c;
  if (!std::getline(is, a, ':') || !std::getline(is, b, ':') ||
      !std::getline(is, c)) {
    throw CLI::ValidationError("grid must be lo:hi:step");
  }
  const double lo = std::stod(a), hi = std::stod(b), step = std::stod(c);
  if (step <= 0 || hi < lo) throw CLI::ValidationError("bad grid " + text);
  std::vector<double> grid;
  for (double v = lo; v <= hi + 1e-12; v += step) grid.push_back(v);
  return grid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Population-level analysis of invariant risk minimization over finite "
      "discrete environments"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "random seed for solver starts")
      ->capture_default_str();

  // envs -------------------------------------------------------------------
  auto* cmd_envs = app.add_subcommand("envs", "construct, inspect and export");
  EnvSourceFlags envs_src;
  OutputFlags envs_out;
  envs_src.attach(cmd_envs);
  std::string envs_export;
  cmd_envs->add_option("--export", envs_export, "write environments to JSON");
  envs_out.attach(cmd_envs);

  // erm --------------------------------------------------------------------
  auto* cmd_erm = app.add_subcommand("erm", "pointwise training-loss minimizer");
  EnvSourceFlags erm_src;
  OutputFlags erm_out;
  std::string erm_loss = "square";
  erm_src.attach(cmd_erm);
  cmd_erm->add_option("--loss", erm_loss)->check(CLI::IsMember({"square", "logistic"}));
  erm_out.attach(cmd_erm);

  // solve-scalar -----------------------------------------------------------
  auto* cmd_scalar = app.add_subcommand(
      "solve-scalar", "roots of the simultaneous gradient constraints");
  EnvSourceFlags scalar_src;
  OutputFlags scalar_out;
  std::string scalar_loss = "square";
  std::string scalar_restriction = "odd";
  scalar_src.attach(cmd_scalar);
  cmd_scalar->add_option("--loss", scalar_loss)
      ->check(CLI::IsMember({"square", "logistic"}));
  cmd_scalar->add_option("--restriction", scalar_restriction)
      ->check(CLI::IsMember({"unrestricted", "odd", "linear"}));
  scalar_out.attach(cmd_scalar);

  // enumerate-invariant ------------------------------------------------------
  auto* cmd_enum = app.add_subcommand(
      "enumerate-invariant", "invariant predictor set by partition enumeration");
  EnvSourceFlags enum_src;
  OutputFlags enum_out;
  std::string enum_loss = "square";
  double enum_tol = -1.0;
  enum_src.attach(cmd_enum);
  cmd_enum->add_option("--loss", enum_loss)
      ->check(CLI::IsMember({"square", "logistic"}));
  cmd_enum->add_option("--tol", enum_tol, "invariance tolerance");
  enum_out.attach(cmd_enum);

  // irmv1-path ---------------------------------------------------------------
  auto* cmd_path = app.add_subcommand("irmv1-path", "penalized objective path");
  EnvSourceFlags path_src;
  OutputFlags path_out;
  std::string path_loss = "square";
  std::vector<double> path_lambdas;
  path_src.attach(cmd_path);
  cmd_path->add_option("--loss", path_loss)
      ->check(CLI::IsMember({"square", "logistic"}));
  cmd_path->add_option("--lambdas", path_lambdas, "ascending penalty weights")
      ->delimiter(',');
  path_out.attach(cmd_path);

  // sweep --------------------------------------------------------------------
  auto* cmd_sweep =
      app.add_subcommand("sweep", "loss of a predictor across a family");
  OutputFlags sweep_out;
  std::string sweep_family = "two-bit";
  double sweep_alpha = 0.1;
  std::string sweep_beta_grid, sweep_theta_grid, sweep_predictor;
  std::string sweep_loss = "square";
  cmd_sweep->add_option("--family", sweep_family)
      ->check(CLI::IsMember({"two-bit", "section4", "piecewise-pi"}));
  cmd_sweep->add_option("--alpha", sweep_alpha);
  cmd_sweep->add_option("--beta-grid", sweep_beta_grid, "lo:hi:step");
  cmd_sweep->add_option("--theta-grid", sweep_theta_grid, "lo:hi:step");
  cmd_sweep->add_option("--predictor", sweep_predictor, "e.g. \"0.3*x2\"")
      ->required();
  cmd_sweep->add_option("--loss", sweep_loss)
      ->check(CLI::IsMember({"square", "logistic"}));
  sweep_out.attach(cmd_sweep);

  // experiment ---------------------------------------------------------------
  auto* cmd_exp = app.add_subcommand(
      "experiment", "run a built-in scenario against its reference table");
  std::string exp_id;
  std::string exp_out_dir = "experiments-out";
  bool exp_list = false;
  cmd_exp->add_option("id", exp_id, "experiment id, or 'all'");
  cmd_exp->add_option("--out", exp_out_dir, "output directory")
      ->capture_default_str();
  cmd_exp->add_flag("--list", exp_list, "list experiment ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (*cmd_envs) {
      auto envs = envs_src.resolve();
      if (!envs_export.empty()) save_environments(envs_export, envs);
      CsvTable t;
      t.columns = {"label", "points", "total_mass", "E[x1*y]", "E[x2*y]"};
      for (const Environment& e : envs) {
        double total = 0.0;
        for (double p : e.pmf) total += p;
        std::vector<double> x1(e.space.num_x()), x2(e.space.num_x());
        for (std::size_t i = 0; i < e.space.num_x(); ++i) {
          x1[i] = e.space.x_points[i][0];
          x2[i] = e.space.x_points[i].size() > 1 ? e.space.x_points[i][1] : 0.0;
        }
        t.add_row({e.label, std::to_string(e.space.num_x()),
                   format_double(total), format_double(e.expectation(x1, 1)),
                   format_double(e.expectation(x2, 1))});
      }
      envs_out.emit(t);
      return 0;
    }

    if (*cmd_erm) {
      auto envs = erm_src.resolve();
      erm_out.emit(predictor_table(erm_solve(envs, loss_from_string(erm_loss))));
      return 0;
    }

    if (*cmd_scalar) {
      auto envs = scalar_src.resolve();
      const Loss loss = loss_from_string(scalar_loss);
      const SolutionSet set = solve_scalar_invariant(
          envs, loss, restriction_from_string(scalar_restriction), seed);
      CsvTable t;
      const OutcomeSpace& space = envs.front().space;
      for (const XPoint& x : space.x_points) t.columns.push_back("phi" + point_label(x));
      for (const Environment& e : envs) t.columns.push_back("residual " + e.label);
      for (const Environment& e : envs) t.columns.push_back("loss " + e.label);
      t.columns.push_back("total_train_loss");
      t.columns.push_back("selected");
      const auto sel = irm_s_select(set, envs, loss);
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
        row.push_back(sel && sel->values == set.solutions[k].values ? "1" : "0");
        t.add_row(std::move(row));
      }
      scalar_out.emit(t);
      return 0;
    }

    if (*cmd_enum) {
      auto envs = enum_src.resolve();
      const double tol = enum_tol > 0 ? enum_tol : enum_src.default_tol();
      const auto set =
          invariant_predictors_full(envs, loss_from_string(enum_loss), tol);
      CsvTable t;
      const OutcomeSpace& space = envs.front().space;
      t.columns = {"predictor"};
      for (const XPoint& x : space.x_points) t.columns.push_back("f" + point_label(x));
      t.columns.push_back("witness_partitions");
      for (std::size_t k = 0; k < set.predictors.size(); ++k) {
        std::vector<std::string> row{"p" + std::to_string(k)};
        for (double v : set.predictors[k].values) row.push_back(format_double(v));
        row.push_back(std::to_string(set.witnesses[k].size()));
        t.add_row(std::move(row));
      }
      for (const std::string& w : set.skipped) std::cerr << "note: " << w << "\n";
      enum_out.emit(t);
      return 0;
    }

    if (*cmd_path) {
      auto envs = path_src.resolve();
      std::vector<double> lambdas =
          path_lambdas.empty() ? default_lambda_grid() : path_lambdas;
      const auto path =
          lambda_path(envs, lambdas, loss_from_string(path_loss), seed);
      CsvTable t;
      const OutcomeSpace& space = envs.front().space;
      t.columns = {"log2_lambda", "lambda"};
      for (const XPoint& x : space.x_points) t.columns.push_back("phi" + point_label(x));
      t.columns.push_back("objective");
      for (const Environment& e : envs) t.columns.push_back("residual " + e.label);
      for (const Environment& e : envs) t.columns.push_back("loss " + e.label);
      for (const auto& p : path) {
        std::vector<std::string> row{format_double(p.log2_lambda),
                                     format_double(p.lambda)};
        for (double v : p.minimizer.values) row.push_back(format_double(v));
        row.push_back(format_double(p.objective));
        for (double r : p.residuals) row.push_back(format_double(r));
        for (double l : p.env_losses) row.push_back(format_double(l));
        t.add_row(std::move(row));
      }
      path_out.emit(t);
      return 0;
    }

    if (*cmd_sweep) {
      EnvironmentFamily family = EnvironmentFamily::two_bit(0.1);
      std::vector<double> grid;
      if (sweep_family == "two-bit") {
        family = EnvironmentFamily::two_bit(sweep_alpha);
        if (sweep_beta_grid.empty()) {
          throw CLI::ValidationError("--beta-grid is required for two-bit");
        }
        grid = parse_grid(sweep_beta_grid);
      } else {
        family = sweep_family == "section4" ? EnvironmentFamily::section4()
                                            : EnvironmentFamily::piecewise_pi();
        if (sweep_theta_grid.empty()) {
          throw CLI::ValidationError("--theta-grid is required for " +
                                     sweep_family);
        }
        grid = parse_grid(sweep_theta_grid);
      }
      const Loss loss = loss_from_string(sweep_loss);
      const Predictor f =
          parse_predictor_expression(sweep_predictor, family.at(grid.front()).space);
      CsvTable t;
      t.columns = {"param", "loss"};
      for (double p : grid) {
        t.add_row({format_double(p),
                   format_double(population_loss(f, family.at(p), loss))});
      }
      sweep_out.emit(t);
      return 0;
    }

    if (*cmd_exp) {
      if (exp_list) {
        for (const std::string& id : experiment_ids()) {
          std::cout << id << "  (" << experiment_anchor(id) << ")\n";
        }
        return 0;
      }
      if (exp_id.empty()) {
        std::cerr << "experiment: missing id (use --list)\n";
        return 2;
      }
      ExperimentOptions options;
      options.seed = seed;
      bool all_pass = true;
      if (exp_id == "all") {
        for (const auto& rep : run_all_experiments(exp_out_dir, options)) {
          std::cout << rep.summary();
          all_pass = all_pass && rep.pass();
        }
      } else {
        const auto rep = run_experiment(exp_id, exp_out_dir, options);
        std::cout << rep.summary();
        all_pass = rep.pass();
      }
      return all_pass ? 0 : 1;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
