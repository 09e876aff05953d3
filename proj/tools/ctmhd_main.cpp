#include "ctmhd/driver.hpp"
#include "ctmhd/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace ctmhd;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct ExperimentConfig {
  std::string kind;
  int levels = 3;
  std::vector<double> Re{1.0};
  std::vector<double> Rm{1.0};
  std::vector<double> kappa{1.0};
  std::vector<double> alpha{1.0};
  double gamma = 10.0;
  double delta = 1e-4;
  double eps = 1e-5;
  double eps0 = 1e-3;
  std::string inner = "direct";
  json inner_policy;  // optional per-block {"u": {"method": "...", "tol": x}, ...}
  std::string problem = "cavity";
  std::string out = "out";
  bool vtk = false;
};

void apply_json(ExperimentConfig& cfg, const json& j) {
  auto list = [&](const char* key, std::vector<double>& v) {
    if (!j.contains(key)) return;
    if (j[key].is_array())
      v = j[key].get<std::vector<double>>();
    else
      v = {j[key].get<double>()};
  };
  list("Re", cfg.Re);
  list("Rm", cfg.Rm);
  list("kappa", cfg.kappa);
  list("alpha", cfg.alpha);
  if (j.contains("levels")) cfg.levels = j["levels"];
  if (j.contains("gamma")) cfg.gamma = j["gamma"];
  if (j.contains("delta")) cfg.delta = j["delta"];
  if (j.contains("eps")) cfg.eps = j["eps"];
  if (j.contains("eps0")) cfg.eps0 = j["eps0"];
  if (j.contains("inner")) cfg.inner = j["inner"];
  if (j.contains("inner_policy")) cfg.inner_policy = j["inner_policy"];
  if (j.contains("problem")) cfg.problem = j["problem"];
  if (j.contains("out")) cfg.out = j["out"];
  if (j.contains("vtk")) cfg.vtk = j["vtk"];
}

json config_json(const ExperimentConfig& c) {
  json j{{"kind", c.kind},     {"levels", c.levels}, {"Re", c.Re},
         {"Rm", c.Rm},         {"kappa", c.kappa},   {"alpha", c.alpha},
         {"gamma", c.gamma},   {"delta", c.delta},   {"eps", c.eps},
         {"eps0", c.eps0},     {"inner", c.inner},   {"problem", c.problem},
         {"out", c.out},       {"vtk", c.vtk}};
  if (c.inner_policy.is_object()) j["inner_policy"] = c.inner_policy;
  return j;
}

PicardConfig picard_config(const ExperimentConfig& c) {
  PicardConfig p;
  p.delta = c.delta;
  p.linear.tol = c.eps;
  p.linear.max_iter = 200;
  if (c.inner == "iterative") p.inner.set_all(InnerMethod::Iterative, c.eps0);
  // per-block overrides from the config file, keyed by variable name
  if (c.inner_policy.is_object()) {
    auto pick = [&](const char* key, InnerPolicy& pol) {
      if (!c.inner_policy.contains(key)) return;
      const json& b = c.inner_policy[key];
      if (b.contains("method"))
        pol.method = b["method"] == "iterative" ? InnerMethod::Iterative : InnerMethod::Direct;
      if (b.contains("tol")) pol.tol = b["tol"];
      if (b.contains("max_iter")) pol.max_iter = b["max_iter"];
    };
    pick("p", p.inner.step_p);
    pick("u", p.inner.step_u);
    pick("r", p.inner.step_r);
    pick("H", p.inner.step_H);
    pick("phi", p.inner.step_phi);
    pick("A", p.inner.step_A);
  }
  return p;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void write(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& r : rows) {
      for (size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
      out << "\n";
    }
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string count_display(const PicardReport& rep, int max_picard) {
  char buf[48];
  if (rep.converged)
    std::snprintf(buf, sizeof buf, "%.0f (%d)", rep.mean_gmres(), rep.iterations);
  else
    std::snprintf(buf, sizeof buf, "%.0f (>%d)", rep.mean_gmres(), max_picard);
  return buf;
}

struct RunContext {
  ExperimentConfig cfg;
  json manifest;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  bool any_unconverged = false;

  explicit RunContext(const ExperimentConfig& c) : cfg(c) {
    fs::create_directories(cfg.out);
    manifest["config"] = config_json(cfg);
    manifest["git"] = CTMHD_GIT_HASH;
    manifest["cells"] = json::array();
  }

  void record_cell(const json& cell) { manifest["cells"].push_back(cell); }

  int finish(const CsvTable& table, const std::string& csv_name,
             const std::string& table_note) {
    table.write(fs::path(cfg.out) / csv_name);
    manifest["columns"] = table.header;
    manifest["table_note"] = table_note;
    manifest["seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream out(fs::path(cfg.out) / "manifest.json");
    out << manifest.dump(2) << "\n";
    std::cout << "wrote " << (fs::path(cfg.out) / csv_name).string() << "\n";
    return any_unconverged ? 2 : 0;
  }
};

ProblemData make_problem(const std::string& kind, const TetMesh& mesh) {
  if (kind == "example1") return problem_data(manufactured_case_example1());
  if (kind == "cavity") return cavity_benchmark(mesh);
  throw std::runtime_error("unknown problem: " + kind);
}

int run_converge(ExperimentConfig cfg) {
  cfg.kind = "converge";
  if (cfg.Re.size() != 1 || cfg.Rm.size() != 1 || cfg.kappa.size() != 1)
    throw std::runtime_error("converge expects scalar Re/Rm/kappa");
  RunContext ctx(cfg);
  ManufacturedCase mc = manufactured_case_example1();
  ProblemData data = problem_data(mc);

  CsvTable t;
  t.header = {"level",       "h",        "dofs_A_phi", "dofs_H_r", "dofs_u_p",
              "err_u_dg",    "order_u",  "err_p_l2",   "order_p",  "err_A_hcurl",
              "order_A",     "err_H_hcurl", "order_H", "div_u_l2", "picard",
              "mean_gmres",  "converged"};

  TetMesh mesh = build_box_mesh(Box{}, 1);
  ErrorNorms prev{};
  for (int lev = 1; lev <= cfg.levels; ++lev) {
    Params p{cfg.Re[0], cfg.Rm[0], cfg.kappa[0], cfg.gamma, cfg.alpha[0]};
    MhdProblem prob(mesh, p);
    auto cell_t0 = std::chrono::steady_clock::now();
    auto [state, rep] = prob.picard_solve(data, picard_config(cfg));
    ErrorNorms e = error_norms(prob, state, mc);
    ctx.any_unconverged |= !rep.converged;

    auto order = [&](double cur, double before) {
      return lev > 1 ? num(std::log2(before / cur)) : std::string("");
    };
    t.rows.push_back(
        {std::to_string(lev), num(mesh.h),
         std::to_string(dof_count(SpaceKind::Dh, mesh) + dof_count(SpaceKind::Yh, mesh)),
         std::to_string(dof_count(SpaceKind::Wh, mesh) + dof_count(SpaceKind::Sh, mesh)),
         std::to_string(dof_count(SpaceKind::Vh, mesh) + dof_count(SpaceKind::Qh, mesh)),
         num(e.u_dg), order(e.u_dg, prev.u_dg), num(e.p_l2), order(e.p_l2, prev.p_l2),
         num(e.A_hcurl), order(e.A_hcurl, prev.A_hcurl), num(e.H_hcurl),
         order(e.H_hcurl, prev.H_hcurl), num(e.div_u_l2), std::to_string(rep.iterations),
         num(rep.mean_gmres()), rep.converged ? "1" : "0"});
    ctx.record_cell({{"level", lev},
                     {"picard", rep.iterations},
                     {"mean_gmres", rep.mean_gmres()},
                     {"converged", rep.converged},
                     {"seconds", std::chrono::duration<double>(
                                     std::chrono::steady_clock::now() - cell_t0)
                                     .count()}});
    if (cfg.vtk)
      write_vtk((fs::path(cfg.out) / ("fields_T" + std::to_string(lev) + ".vtk")).string(),
                prob, state);
    prev = e;
    if (lev < cfg.levels) mesh = refine_uniform(mesh);
  }
  return ctx.finish(t, "converge.csv", "errors and observed orders per refinement level");
}

int sweep_counts(ExperimentConfig cfg, const std::string& kind, const std::string& csv) {
  cfg.kind = kind;
  RunContext ctx(cfg);
  CsvTable t;
  t.header = {"level", "h",      "Re",    "Rm",        "kappa",  "alpha",
              "gamma", "picard", "gmres", "converged", "display"};

  std::vector<TetMesh> meshes;
  meshes.push_back(build_box_mesh(Box{}, 1));
  for (int lev = 2; lev <= cfg.levels; ++lev) meshes.push_back(refine_uniform(meshes.back()));

  // the cavity table walks the mesh hierarchy; the parameter sweeps run on
  // the finest requested level only
  const int start_level = (kind == "cavity") ? 1 : cfg.levels;
  for (int lev = start_level; lev <= cfg.levels; ++lev) {
    const TetMesh& mesh = meshes[lev - 1];
    for (double Re : cfg.Re)
      for (double Rm : cfg.Rm)
        for (double kappa : cfg.kappa)
          for (double alpha : cfg.alpha) {
            Params p{Re, Rm, kappa, cfg.gamma, alpha};
            MhdProblem prob(mesh, p);
            ProblemData data = make_problem(cfg.problem, mesh);
            auto cell_t0 = std::chrono::steady_clock::now();
            PicardConfig pc = picard_config(cfg);
            auto [state, rep] = prob.picard_solve(data, pc);
            ctx.any_unconverged |= !rep.converged;
            t.rows.push_back({std::to_string(lev), num(mesh.h), num(Re), num(Rm), num(kappa),
                              num(alpha), num(cfg.gamma),
                              rep.converged ? std::to_string(rep.iterations)
                                            : (">" + std::to_string(pc.max_picard)),
                              num(rep.mean_gmres()), rep.converged ? "1" : "0",
                              count_display(rep, pc.max_picard)});
            ctx.record_cell(
                {{"level", lev},
                 {"Re", Re},
                 {"Rm", Rm},
                 {"kappa", kappa},
                 {"alpha", alpha},
                 {"picard", rep.iterations},
                 {"mean_gmres", rep.mean_gmres()},
                 {"converged", rep.converged},
                 {"seconds",
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - cell_t0)
                      .count()}});
            std::cout << "level " << lev << " Re=" << Re << " Rm=" << Rm
                      << " kappa=" << kappa << " alpha=" << alpha << ": "
                      << count_display(rep, pc.max_picard) << std::endl;
          }
  }
  return ctx.finish(t, csv, "average GMRES count per Picard step, with the Picard count");
}

int run_solve(ExperimentConfig cfg) {
  cfg.kind = "solve";
  RunContext ctx(cfg);
  TetMesh mesh = build_box_mesh(Box{}, 1);
  for (int lev = 2; lev <= cfg.levels; ++lev) mesh = refine_uniform(mesh);
  Params p{cfg.Re[0], cfg.Rm[0], cfg.kappa[0], cfg.gamma, cfg.alpha[0]};
  MhdProblem prob(mesh, p);
  ProblemData data = make_problem(cfg.problem, mesh);
  PicardConfig pc = picard_config(cfg);
  auto [state, rep] = prob.picard_solve(data, pc);
  ctx.any_unconverged = !rep.converged;

  DivergenceDiagnostics d = divergence_diagnostics(prob, state, &data);
  CsvTable t;
  t.header = {"level",       "h",           "picard",     "mean_gmres", "converged",
              "div_u_l2",    "flux_jump_J", "flux_jump_B", "cell_div_J", "cell_div_B",
              "weak_div_H",  "weak_div_A"};
  t.rows.push_back({std::to_string(cfg.levels), num(mesh.h),
                    rep.converged ? std::to_string(rep.iterations)
                                  : (">" + std::to_string(pc.max_picard)),
                    num(rep.mean_gmres()), rep.converged ? "1" : "0", num(d.div_u_l2),
                    num(d.max_flux_jump_J), num(d.max_flux_jump_B), num(d.max_cell_div_J),
                    num(d.max_cell_div_B), num(d.max_weak_div_H), num(d.max_weak_div_A)});
  ctx.record_cell({{"level", cfg.levels},
                   {"picard", rep.iterations},
                   {"mean_gmres", rep.mean_gmres()},
                   {"converged", rep.converged}});

  write_state_json((fs::path(cfg.out) / "state.json").string(), prob, state,
                   "box-n" + std::to_string(1 << (cfg.levels - 1)));
  if (cfg.vtk) write_vtk((fs::path(cfg.out) / "fields.vtk").string(), prob, state);
  return ctx.finish(t, "solve.csv", "single solve with divergence diagnostics");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained-transport divergence-free MHD solver"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  std::string config_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file; flags override");
    sub->add_option("--levels", cfg.levels, "mesh levels T1..TN");
    sub->add_option("--Re", cfg.Re, "Reynolds number(s)")->delimiter(',');
    sub->add_option("--Rm", cfg.Rm, "magnetic Reynolds number(s)")->delimiter(',');
    sub->add_option("--kappa", cfg.kappa, "coupling number(s)")->delimiter(',');
    sub->add_option("--alpha", cfg.alpha, "grad-div parameter(s)")->delimiter(',');
    sub->add_option("--gamma", cfg.gamma, "interior penalty");
    sub->add_option("--delta", cfg.delta, "Picard tolerance");
    sub->add_option("--eps", cfg.eps, "GMRES tolerance");
    sub->add_option("--eps0", cfg.eps0, "inner-solve tolerance");
    sub->add_option("--inner", cfg.inner, "direct|iterative")
        ->check(CLI::IsMember({"direct", "iterative"}));
    sub->add_option("--problem", cfg.problem, "cavity|example1")
        ->check(CLI::IsMember({"cavity", "example1"}));
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_flag("--vtk", cfg.vtk, "write VTK field snapshots");
  };

  CLI::App* conv = app.add_subcommand("converge", "manufactured-solution convergence study");
  CLI::App* cav = app.add_subcommand("cavity", "driven-cavity iteration counts over meshes");
  CLI::App* rob = app.add_subcommand("robustness", "parameter sweep on the finest level");
  CLI::App* alp = app.add_subcommand("alpha", "grad-div sensitivity sweep");
  CLI::App* sol = app.add_subcommand("solve", "single solve with diagnostics and snapshots");
  for (CLI::App* sub : {conv, cav, rob, alp, sol}) add_common(sub);

  // defaults mirroring the experiment settings
  conv->preparse_callback([&](size_t) {
    cfg.delta = 1e-5;
    cfg.eps = 1e-6;
    cfg.problem = "example1";
    cfg.Re = cfg.Rm = cfg.kappa = {1.0};
  });
  cav->preparse_callback([&](size_t) {
    cfg.Re = {1.0, 10.0, 100.0};
    cfg.Rm = {10.0};
    cfg.kappa = {1.0};
  });
  alp->preparse_callback([&](size_t) {
    cfg.Re = {1.0, 10.0, 100.0};
    cfg.Rm = {1.0};
    cfg.kappa = {100.0};
    cfg.alpha = {0.0, 0.5, 1.0, 10.0, 100.0};
  });

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::runtime_error("cannot read config " + config_path);
      json j;
      in >> j;
      ExperimentConfig file_cfg = cfg;
      apply_json(file_cfg, j);
      // explicit CLI flags win over file values
      CLI::App* sub = app.get_subcommands().front();
      auto keep = [&](const char* flag) { return sub->count(flag) > 0; };
      if (!keep("--levels")) cfg.levels = file_cfg.levels;
      if (!keep("--Re")) cfg.Re = file_cfg.Re;
      if (!keep("--Rm")) cfg.Rm = file_cfg.Rm;
      if (!keep("--kappa")) cfg.kappa = file_cfg.kappa;
      if (!keep("--alpha")) cfg.alpha = file_cfg.alpha;
      if (!keep("--gamma")) cfg.gamma = file_cfg.gamma;
      if (!keep("--delta")) cfg.delta = file_cfg.delta;
      if (!keep("--eps")) cfg.eps = file_cfg.eps;
      if (!keep("--eps0")) cfg.eps0 = file_cfg.eps0;
      if (!keep("--inner")) cfg.inner = file_cfg.inner;
      cfg.inner_policy = file_cfg.inner_policy;  // file-only setting
      if (!keep("--problem")) cfg.problem = file_cfg.problem;
      if (!keep("--out")) cfg.out = file_cfg.out;
      if (!keep("--vtk")) cfg.vtk = file_cfg.vtk;
    }

    if (app.got_subcommand(conv)) return run_converge(cfg);
    if (app.got_subcommand(cav)) return sweep_counts(cfg, "cavity", "cavity.csv");
    if (app.got_subcommand(rob)) return sweep_counts(cfg, "robustness", "robustness.csv");
    if (app.got_subcommand(alp)) return sweep_counts(cfg, "alpha", "alpha.csv");
    if (app.got_subcommand(sol)) return run_solve(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
