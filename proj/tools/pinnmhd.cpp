// Command-line front end: solve, eval, poincare, gradcheck.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pinnmhd/pinnmhd.hpp"

namespace fs = std::filesystem;
using namespace pinnmhd;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kDiverged = 2;

fs::path default_out() {
  if (const char* env = std::getenv("PINNMHD_OUT_DIR"); env && *env) return env;
  return "pinnmhd_out";
}

struct SolveArgs {
  std::string case_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> width, surfaces, threads, adamw_iters, bfgs_iters;
  std::optional<double> target_fvol;
};

int run_solve(const SolveArgs& a) {
  io::CaseFile c = io::parse_case(a.case_path);
  if (a.seed) c.config.seed = *a.seed;
  if (a.width) c.config.width = *a.width;
  if (a.surfaces) c.config.n_rho = *a.surfaces;
  if (a.threads) c.config.threads = *a.threads;
  if (a.adamw_iters) c.config.adamw.max_iterations = *a.adamw_iters;
  if (a.bfgs_iters) c.config.bfgs.max_iterations = *a.bfgs_iters;
  if (a.target_fvol) c.config.target_fvol = *a.target_fvol;
  c.config.validate();

  const fs::path out = a.out.empty() ? default_out() : fs::path(a.out);
  fs::create_directories(out);
  const fs::path ck = out / "checkpoint.bin";
  const Solution sol = solve(c.input, c.config, [&](const NetParams& p, int it) {
    io::save_checkpoint(ck, c, p, static_cast<std::uint64_t>(it));
  });
  io::export_metrics(sol, out);
  std::printf("termination: %s\n", to_string(sol.reason));
  if (!sol.diagnostic.empty()) std::printf("diagnostic: %s\n", sol.diagnostic.c_str());
  std::printf("iterations: adamw %d bfgs %d\n", sol.adamw_iterations,
              sol.bfgs_iterations);
  std::printf("parameters: %zu\n", sol.params.data.size());
  std::printf("f_vol_norm: %.6e\n", sol.f_vol_norm);
  std::printf("output: %s\n", out.string().c_str());
  return sol.reason == Termination::kDiverged ? kDiverged : kOk;
}

int run_eval(const std::string& path, int surfaces, const std::string& out) {
  const io::Checkpoint ck = io::load_checkpoint(path);
  SolverConfig cfg = ck.case_file.config;
  if (surfaces > 0) cfg.n_rho = surfaces;
  const CollocationGrid grid = cfg.grid(ck.case_file.input);
  const Metrics m = compute_metrics(ck.params, ck.case_file.input, grid);
  std::printf("iteration: %llu\n", static_cast<unsigned long long>(ck.iteration));
  std::printf("parameters: %zu\n", ck.params.data.size());
  std::printf("f_vol_norm: %.6e\n", m.f_vol_norm);
  std::printf("volume: %.6e\n", m.volume);
  std::printf("beta: %.6e\n", m.beta);
  if (!out.empty()) {
    fs::create_directories(out);
    io::write_file(fs::path(out) / "fnorm_profile.csv",
                   io::profile_table(m.rho, m.f_norm_profile).str());
  } else {
    std::fputs(io::profile_table(m.rho, m.f_norm_profile).str().c_str(), stdout);
  }
  return std::isfinite(m.f_vol_norm) ? kOk : kDiverged;
}

int run_poincare(const std::string& path, double zeta, int count, int samples,
                 const std::string& out) {
  const io::Checkpoint ck = io::load_checkpoint(path);
  const auto& in = ck.case_file.input;
  const auto rhos = io::default_surfaces(count);
  const auto rows = io::poincare_section(ck.params, in, zeta, rhos, samples);
  const auto arcs = io::theta_star_contours(ck.params, in,
                                            io::default_theta_star_targets(), zeta);
  const fs::path dir = out.empty() ? default_out() : fs::path(out);
  fs::create_directories(dir);
  io::write_file(dir / "poincare.csv", io::poincare_table(rows).str());
  io::write_file(dir / "theta_star.csv", io::theta_star_table(arcs).str());
  std::printf("wrote %zu section rows and %zu contour rows to %s\n", rows.size(),
              arcs.size(), dir.string().c_str());
  return kOk;
}

int run_gradcheck(const std::string& case_path, std::optional<int> width,
                  std::optional<int> modes, std::optional<int> surfaces,
                  int samples, double step, std::uint64_t seed) {
  io::CaseFile c = io::parse_case(case_path);
  EquilibriumInput in = c.input;
  if (!modes) modes = std::min(in.M, 5);
  if (*modes != in.M) in = io::with_poloidal_resolution(in, *modes);
  SolverConfig cfg = c.config;
  cfg.width = width.value_or(2);
  cfg.n_rho = surfaces.value_or(8);
  cfg.n_theta = 0;
  cfg.n_zeta = 0;
  cfg.validate();
  const LossEvaluator ev(in, cfg.grid(in));
  const NetParams p = init_params(in, cfg.width, cfg.seed);
  const LossResult r = ev.evaluate(p, true);
  if (!r.ok()) {
    std::fprintf(stderr, "loss is not finite or the Jacobian changes sign\n");
    return kDiverged;
  }
  const CollocationGrid grid = ev.grid();
  const auto rep = ad::grad_check_extended(
      [&](std::span<const long double> x) {
        return loss_value<long double>(x, p.layout, in, grid);
      },
      p.data, r.gradient, step, static_cast<std::size_t>(samples), seed);
  std::printf("parameters: %zu\n", p.data.size());
  std::printf("samples: %zu\n", rep.samples);
  std::printf("max relative error: %.3e (index %zu)\n", rep.max_relative_error,
              rep.worst_index);
  return rep.max_relative_error <= 1e-6 ? kOk : kDiverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed network solver for ideal-MHD equilibria"};
  app.require_subcommand(1);

  SolveArgs sa;
  auto* solve_cmd = app.add_subcommand("solve", "Solve an equilibrium from a case file");
  solve_cmd->add_option("case", sa.case_path, "Case file or built-in name (dshape)")->required();
  solve_cmd->add_option("--out", sa.out, "Output directory (default $PINNMHD_OUT_DIR or pinnmhd_out)");
  solve_cmd->add_option("--seed", sa.seed, "Initialization seed");
  solve_cmd->add_option("--width", sa.width, "Hidden-layer width");
  solve_cmd->add_option("--surfaces", sa.surfaces, "Number of radial collocation surfaces");
  solve_cmd->add_option("--target-fvol", sa.target_fvol, "Stop once F_vol_norm reaches this value");
  solve_cmd->add_option("--threads", sa.threads, "Worker threads for the loss");
  solve_cmd->add_option("--adamw-iterations", sa.adamw_iters, "AdamW iteration budget");
  solve_cmd->add_option("--bfgs-iterations", sa.bfgs_iters, "BFGS iteration budget");

  std::string ck_path, eval_out;
  int eval_surfaces = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate the residual of a checkpoint");
  eval_cmd->add_option("checkpoint", ck_path, "Checkpoint file")->required();
  eval_cmd->add_option("--grid", eval_surfaces, "Radial surfaces of the evaluation grid");
  eval_cmd->add_option("--out", eval_out, "Write the profile here instead of stdout");

  std::string pc_path, pc_out;
  double zeta = 0.0;
  int pc_count = 10, pc_samples = 256;
  auto* pc_cmd = app.add_subcommand("poincare", "Export a Poincare section");
  pc_cmd->add_option("checkpoint", pc_path, "Checkpoint file")->required();
  pc_cmd->add_option("--zeta", zeta, "Toroidal angle of the section")->required();
  pc_cmd->add_option("--surfaces", pc_count, "Number of flux surfaces");
  pc_cmd->add_option("--theta-samples", pc_samples, "Poloidal samples per surface");
  pc_cmd->add_option("--out", pc_out, "Output directory");

  std::string gc_case;
  std::optional<int> gc_width, gc_modes, gc_surfaces;
  int gc_samples = 50;
  double gc_step = 1e-5;
  std::uint64_t gc_seed = 0;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare the loss gradient with finite differences");
  gc_cmd->add_option("case", gc_case, "Case file or built-in name (dshape)")->required();
  gc_cmd->add_option("--width", gc_width, "Hidden-layer width (default 2)");
  gc_cmd->add_option("--modes", gc_modes, "Poloidal resolution M (default min(M, 5))");
  gc_cmd->add_option("--surfaces", gc_surfaces, "Number of radial surfaces (default 8)");
  gc_cmd->add_option("--samples", gc_samples, "Number of sampled entries");
  gc_cmd->add_option("--step", gc_step, "Central difference step");
  gc_cmd->add_option("--seed", gc_seed, "Sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    std::cerr << (sub ? sub->help() : app.help());
    return kInvalid;
  }

  try {
    if (*solve_cmd) return run_solve(sa);
    if (*eval_cmd) return run_eval(ck_path, eval_surfaces, eval_out);
    if (*pc_cmd) return run_poincare(pc_path, zeta, pc_count, pc_samples, pc_out);
    if (*gc_cmd)
      return run_gradcheck(gc_case, gc_width, gc_modes, gc_surfaces, gc_samples,
                           gc_step, gc_seed);
  } catch (const JacobianError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const ad::NonFiniteLoss& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const io::AngleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
  return kInvalid;
}
