// Command-line front end: barycenter solvers, inequality diagnostics,
// replicated experiments and distances.

#include <iostream>

#include <CLI11.hpp>

#include "bures/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein barycenters of Gaussian measures on the Bures-Wasserstein manifold"};
  app.require_subcommand(1);

  bures::cli::BarycenterArgs bary;
  auto* bary_cmd = app.add_subcommand("barycenter", "Run gd | sgd | sgd-replace | avg-sgd");
  bary_cmd->add_option("method", bary.method, "Solver")
      ->required()
      ->check(CLI::IsMember({"gd", "sgd", "sgd-replace", "avg-sgd"}));
  bary_cmd->add_option("--input", bary.input, "Dataset JSON")->required();
  bary_cmd->add_option("--init", bary.init, "atom:<i> or a one-atom dataset file");
  bary_cmd->add_option("--tol", bary.tol, "GD stop: squared gradient norm")->capture_default_str();
  bary_cmd->add_option("--max-iters", bary.max_iters, "GD iterations / SGD-with-replacement draws")
      ->capture_default_str();
  bary_cmd->add_option("--schedule", bary.schedule,
                       "paper_pl:c=<c>[,k=<k>] | exp:c=<c> | const:<eta> | file:<path>");
  bary_cmd->add_option("--seed", bary.seed, "Sampling seed")->capture_default_str();
  bary_cmd->add_option("--ref", bary.ref, "Reference measure file or 'fixed-point'");
  bary_cmd->add_option("--trace", bary.trace, "Trace CSV output");
  bary_cmd->add_option("--output", bary.output, "Final measure output (default: stdout)");

  bures::cli::DiagnoseArgs diag;
  double zeta = 0.0;
  auto* diag_cmd = app.add_subcommand("diagnose", "Certify PL / variance / smoothness / convexity");
  diag_cmd->add_option("--input", diag.input, "Dataset JSON (default: random instances)");
  diag_cmd->add_option("--point", diag.point, "One-atom dataset file to test at");
  auto* zeta_opt = diag_cmd->add_option("--zeta", zeta, "Regularity level (default: min atom det)");
  diag_cmd->add_option("--suite", diag.suite, "pl | var | smooth | intpl | convexity | all")
      ->capture_default_str();
  diag_cmd->add_option("--trials", diag.trials, "Monte Carlo trials")->capture_default_str();
  diag_cmd->add_option("--seed", diag.seed, "Root seed")->capture_default_str();
  diag_cmd->add_option("--dim", diag.dim, "Dimension of random instances")->capture_default_str();
  diag_cmd->add_option("--atoms", diag.atoms, "Atoms per random instance")->capture_default_str();
  diag_cmd->add_option("--floor", diag.eig_floor, "Eigenvalue floor of random instances")
      ->capture_default_str();
  diag_cmd->add_option("--quad-nodes", diag.quad_nodes, "Integrated-PL quadrature nodes")
      ->capture_default_str();
  diag_cmd->add_option("--grid", diag.grid, "Convexity probe grid size")->capture_default_str();
  diag_cmd->add_flag("--demo-nonconvexity", diag.demo_nonconvexity,
                     "Print the non-convex squared-distance example");

  bures::cli::ExperimentArgs exp;
  auto* exp_cmd = app.add_subcommand("experiment", "Replicated convergence experiment");
  exp_cmd->add_option("--config", exp.config, "Experiment config JSON (default: population preset)");
  exp_cmd->add_option("--variant", exp.variant, "gd | sgd | sgd-replace | avg-sgd | all")
      ->capture_default_str();
  exp_cmd->add_option("--out", exp.out_dir, "Output directory")->capture_default_str();
  exp_cmd->add_option("--fit-last", exp.fit_last, "Fit the last N points (0: last half)")
      ->capture_default_str();

  bures::cli::DistanceArgs dist;
  auto* dist_cmd = app.add_subcommand("distance", "W2 between two one-atom dataset files");
  dist_cmd->add_option("--a", dist.a, "First measure")->required();
  dist_cmd->add_option("--b", dist.b, "Second measure")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : bures::cli::kInvalid;
  }

  if (*bary_cmd) return bures::cli::cmd_barycenter(bary, std::cout, std::cerr);
  if (*diag_cmd) {
    if (*zeta_opt) diag.zeta = zeta;
    return bures::cli::cmd_diagnose(diag, std::cout, std::cerr);
  }
  if (*exp_cmd) return bures::cli::cmd_experiment(exp, std::cout, std::cerr);
  return bures::cli::cmd_distance(dist, std::cout, std::cerr);
}
