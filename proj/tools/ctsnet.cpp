// ctsnet: generate, equilibrate, analyse and deploy clustered cable nets.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ctsnet/deployment.hpp"
#include "ctsnet/fixtures.hpp"
#include "ctsnet/io.hpp"
#include "ctsnet/statics.hpp"

namespace fs = std::filesystem;
using namespace ctsnet;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("ctsnet");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("CTSNET_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);)
    if (!item.empty()) out.push_back(item);
  return out;
}

double parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(what + ": '" + s + "' is not a number");
  }
}

// "ODC=1e4,IDC=2e4" -> cluster indices and targets
std::pair<std::vector<int>, Eigen::VectorXd> parse_design(const Topology& topo, const std::string& spec) {
  std::vector<int> idx;
  std::vector<double> val;
  for (const auto& item : split(spec, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("--design: expected NAME=TENSION, got '" + item + "'");
    idx.push_back(topo.cluster_index(item.substr(0, eq)));
    val.push_back(parse_number(item.substr(eq + 1), "--design"));
  }
  return {idx, Eigen::Map<Eigen::VectorXd>(val.data(), static_cast<Eigen::Index>(val.size()))};
}

void write_or_print(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-")
    std::cout << content;
  else
    write_text(path, content);
}

void print_cluster_table(const Topology& topo, const Eigen::VectorXd& t, const Eigen::VectorXd& l0) {
  std::cout << std::left << std::setw(10) << "cluster" << std::right << std::setw(16) << "tension [N]"
            << std::setw(16) << "rest len [m]" << "\n";
  for (int c = 0; c < topo.cluster_count(); ++c)
    std::cout << std::left << std::setw(10) << topo.clusters[c].name << std::right << std::setw(16)
              << std::setprecision(8) << t[c] << std::setw(16) << l0[c] << "\n";
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string params_file;
  CableNetParams prm;
  std::string spacing = "parametric";
  double density = 7850.0, modulus = 2.0e11, area = 2.0e-4, prestrain = 0.05, damping = 0.02;
  std::vector<double> gravity = {0.0, 0.0, 0.0};
  std::string name = "saddle";
  std::string out;
};

int cmd_generate(const GenerateArgs& a) {
  ModelFile mf;
  if (!a.params_file.empty()) {
    mf = load_model(a.params_file);
  } else {
    CableNetParams prm = a.prm;
    prm.spacing = angle_spacing_from_string(a.spacing);
    prm.validate();
    if (!(a.prestrain > -1)) throw ValidationError("--prestrain: must be > -1");
    CableNet net = build_topology(prm);
    mf.name = a.name;
    mf.params = prm;
    mf.config = net.config;
    mf.model.topology = net.topology;
    mf.model.spec = uniform_spec(net.topology, a.density, a.modulus, a.area,
                                 member_lengths(net.topology, net.config.coords).lc / (1.0 + a.prestrain));
    mf.model.spec.damping_coeff = a.damping;
    mf.model.spec.gravity = Eigen::Vector3d(a.gravity[0], a.gravity[1], a.gravity[2]);
    mf.model.point_mass = Eigen::VectorXd::Zero(net.topology.node_count);
    mf.model.validate();
  }
  spdlog::info("generated {} nodes, {} members, {} clusters", mf.model.topology.node_count,
               mf.model.topology.member_count(), mf.model.topology.cluster_count());
  write_or_print(a.out, dump(model_to_json(mf)));
  return 0;
}

int cmd_fixture(const std::string& name, const std::string& out) {
  write_or_print(out, dump(model_to_json(to_model_file(fixture_by_name(name)))));
  return 0;
}

int cmd_formfind(const std::string& model_path, const std::string& out, const std::string& save_path) {
  ModelFile mf = load_model(model_path);
  const FormFindResult ff = form_find(mf.model, mf.config, {}, mf.solver, [](const IterationRecord& r) {
    spdlog::debug("iter {:3d}  residual {:.6e} N  step {:.3e} m  scale {}", r.iteration, r.residual, r.step_norm,
                  r.step_scale);
  });
  Json j = {{"format", "ctsnet-formfind"},
            {"version", kFormatVersion},
            {"converged", ff.converged},
            {"iterations", ff.iterations},
            {"residual_N", ff.residual},
            {"tolerance_N", ff.tolerance},
            {"tensions_N", detail::vec_json(ff.tensions)},
            {"coords_m", detail::vec_json(ff.config.coords)}};
  if (!out.empty()) write_text(out, dump(j));
  if (!save_path.empty()) {
    mf.config = ff.config;
    save_model(save_path, mf);
  }
  std::cout << "form-finding converged in " << ff.iterations << " iterations, residual " << ff.residual
            << " N (tolerance " << ff.tolerance << " N)\n";
  print_cluster_table(mf.model.topology, ff.tensions, mf.model.spec.rest_length);
  return 0;
}

int cmd_prestress(const std::string& model_path, const std::string& design, const std::string& out,
                  const std::string& save_path) {
  ModelFile mf = load_model(model_path);
  const Topology& topo = mf.model.topology;
  const auto [designed, targets] = parse_design(topo, design);
  const PrestressSolution sol = prestress_design(mf.model, mf.config.coords, {}, designed, targets);
  for (const auto& w : sol.warnings) spdlog::warn("{}", w);
  const Eigen::VectorXd l0 =
      rest_length_for(sol.tensions, member_lengths(topo, mf.config.coords).lc, mf.model.spec);
  Json j = {{"format", "ctsnet-prestress"},
            {"version", kFormatVersion},
            {"rank", sol.rank},
            {"self_stress_count", sol.self_stress_modes.cols()},
            {"singular_values", detail::vec_json(sol.singular_values)},
            {"coefficients", detail::vec_json(sol.coefficients)},
            {"tensions_N", detail::vec_json(sol.tensions)},
            {"rest_lengths_m", detail::vec_json(l0)}};
  if (!out.empty()) write_text(out, dump(j));
  if (!save_path.empty()) {
    mf.model.spec.rest_length = l0;
    save_model(save_path, mf);
  }
  std::cout << "rank " << sol.rank << ", self-stress modes " << sol.self_stress_modes.cols()
            << ", mechanism modes " << sol.mechanism_modes.cols() << "\n";
  print_cluster_table(topo, sol.tensions, l0);
  return 0;
}

int cmd_modal(const std::string& model_path, int modes, const std::string& out) {
  const ModelFile mf = load_model(model_path);
  const ModalResult mr = modal_analysis(mf.model, mf.config.coords, modes);
  Json shapes = Json::array();
  for (Eigen::Index k = 0; k < mr.mode_shapes.cols(); ++k) shapes.push_back(detail::vec_json(mr.mode_shapes.col(k)));
  Json j = {{"format", "ctsnet-modal"},
            {"version", kFormatVersion},
            {"frequencies_Hz", detail::vec_json(mr.frequencies)},
            {"stiffness_eigenvalues_N_per_m", detail::vec_json(mr.stiffness_eigenvalues)},
            {"mode_shapes", shapes}};
  if (!out.empty()) write_text(out, dump(j));
  std::cout << std::setw(6) << "mode" << std::setw(18) << "frequency [Hz]" << "\n";
  for (Eigen::Index k = 0; k < mr.frequencies.size(); ++k)
    std::cout << std::setw(6) << k + 1 << std::setw(18) << std::setprecision(8) << mr.frequencies[k] << "\n";
  std::cout << "lowest K_Taa eigenvalue " << mr.stiffness_eigenvalues.minCoeff() << " N/m\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct DeployArgs {
  int substeps = 10;
  double delta = 0.0;
  std::string clusters;
  std::string design;
  std::string mode = "plan";  // plan | open | closed
  std::string feedback;
  double dynamics = 0.0;      // seconds; 0 means pseudo-static
  double dt = 0.0;
  int record_every = 1;
  std::string error;
  std::string out_dir = "run";

  Json to_json() const {
    return {{"substeps", substeps}, {"delta", delta},     {"clusters", clusters},
            {"design", design},     {"mode", mode},       {"feedback", feedback},
            {"dynamics", dynamics}, {"dt", dt},           {"record_every", record_every},
            {"error", error}};
  }
  static DeployArgs from_json(const Json& j) {
    DeployArgs a;
    try {
      a.substeps = j.at("substeps").get<int>();
      a.delta = j.at("delta").get<double>();
      a.clusters = j.at("clusters").get<std::string>();
      a.design = j.at("design").get<std::string>();
      a.mode = j.at("mode").get<std::string>();
      a.feedback = j.at("feedback").get<std::string>();
      a.dynamics = j.at("dynamics").get<double>();
      a.dt = j.at("dt").get<double>();
      a.record_every = j.at("record_every").get<int>();
      a.error = j.at("error").get<std::string>();
    } catch (const Json::exception& e) {
      throw ValidationError(std::string("manifest.options: ") + e.what());
    }
    return a;
  }
};

// "bias=0.01,noise=1e-4,seed=7,offset=0"
ErrorModel parse_error_model(const std::string& spec, int clusters) {
  ErrorModel em;
  for (const auto& item : split(spec, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("--error: expected KEY=VALUE, got '" + item + "'");
    const std::string key = item.substr(0, eq), val = item.substr(eq + 1);
    if (key == "bias")
      em.rest_length_bias = Eigen::VectorXd::Constant(clusters, parse_number(val, "--error bias"));
    else if (key == "noise")
      em.rest_length_noise = parse_number(val, "--error noise");
    else if (key == "offset")
      em.initial_offset = parse_number(val, "--error offset");
    else if (key == "seed")
      em.seed = static_cast<std::uint64_t>(parse_number(val, "--error seed"));
    else
      throw ValidationError("--error: unknown key '" + key + "' (bias, noise, offset, seed)");
  }
  em.validate(clusters);
  return em;
}

int run_deploy(const ModelFile& mf, const DeployArgs& a, const std::string& model_source) {
  const Topology& topo = mf.model.topology;
  if (a.mode != "plan" && a.mode != "open" && a.mode != "closed")
    throw ValidationError("--mode: expected plan, open or closed");
  if (a.dynamics < 0) throw ValidationError("--dynamics: must be >= 0");
  if (a.dynamics > 0 && a.mode == "closed")
    throw ValidationError("--dynamics: closed-loop deployment is pseudo-static only");
  if (a.record_every < 1) throw ValidationError("--record-every: must be >= 1");
  std::vector<int> actuated;
  for (const auto& name : split(a.clusters, ',')) actuated.push_back(topo.cluster_index(name));
  if (actuated.empty()) throw ValidationError("--clusters: at least one cluster required");
  const ErrorModel em = parse_error_model(a.error, topo.cluster_count());

  spdlog::info("designing trajectory: {} substeps, delta {} m", a.substeps, a.delta);
  DeploymentPlan plan = design_trajectory(mf.model, mf.config.coords, actuated, a.delta, a.substeps, mf.solver);
  if (!a.design.empty()) {
    const auto [designed, targets] = parse_design(topo, a.design);
    plan = redesign_plan_prestress(mf.model, plan, designed, targets);
  }

  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  write_text(dir / "plan.json", dump(plan_to_json(topo, plan)));
  std::vector<DeployRecord> recs;
  if (a.mode == "plan") {
    recs = plan_records(plan);
  } else if (a.mode == "open") {
    const DeployMode dm = a.dynamics > 0
                              ? DeployMode::dynamic(a.dynamics, a.dt, static_cast<std::size_t>(a.record_every))
                              : DeployMode::pseudo_static();
    recs = open_loop_deploy(mf.model, plan, dm, em, mf.solver);
  } else {
    const int fb = topo.cluster_index(a.feedback.empty() ? topo.clusters.back().name : a.feedback);
    recs = closed_loop_deploy(mf.model, plan, fb, em, {}, mf.solver);
  }
  std::vector<std::string> outputs = {"plan.json"};
  for (const auto& f : write_histories(dir, topo, recs, a.dynamics > 0 && a.mode == "open")) outputs.push_back(f);

  Json manifest = {{"format", kManifestFormat},
                   {"version", kFormatVersion},
                   {"command", "deploy"},
                   {"model_source", model_source},
                   {"model", model_to_json(mf)},
                   {"options", a.to_json()},
                   {"seed", em.seed},
                   {"outputs", outputs}};
  write_text(dir / "manifest.json", dump(manifest));

  const DeployRecord& last = recs.back();
  std::cout << "deploy (" << a.mode << (a.dynamics > 0 ? ", dynamic" : "") << "): " << recs.size()
            << " records written to " << dir.string() << "\n";
  print_cluster_table(topo, last.tensions, last.rest_lengths);
  return 0;
}

int cmd_rerun(const std::string& manifest_path, const std::string& out_dir) {
  const Json m = read_json(manifest_path);
  if (!m.is_object() || m.value("format", "") != kManifestFormat)
    throw ValidationError(manifest_path + ": not a run manifest");
  if (m.value("command", "") != "deploy") throw ValidationError(manifest_path + ": unsupported command");
  const ModelFile mf = model_from_json(detail::field(m, "model", "manifest"));
  DeployArgs a = DeployArgs::from_json(detail::field(m, "options", "manifest"));
  a.out_dir = out_dir;
  return run_deploy(mf, a, m.value("model_source", ""));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Clustered cable net form-finding, analysis and deployment"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate a saddle cable net model");
  g->add_option("--params", gen.params_file, "Model/params JSON to expand instead of flags");
  g->add_option("--p", gen.prm.p, "Boundary node count");
  g->add_option("--q", gen.prm.q, "Diagonal cluster count");
  g->add_option("--rx", gen.prm.rx, "Boundary semi-axis along x [m]");
  g->add_option("--ry", gen.prm.ry, "Boundary semi-axis along y [m]");
  g->add_option("--a", gen.prm.a, "xz curvature constant [m]");
  g->add_option("--b", gen.prm.b, "yz curvature constant [m]");
  g->add_option("--c", gen.prm.c, "Free ring scale (0, 1)");
  g->add_option("--spacing", gen.spacing, "parametric | arclength");
  g->add_option("--density", gen.density, "Cable density [kg/m^3]");
  g->add_option("--modulus", gen.modulus, "Young's modulus [Pa]");
  g->add_option("--area", gen.area, "Cross-section area [m^2]");
  g->add_option("--prestrain", gen.prestrain, "Initial strain used to set rest lengths");
  g->add_option("--damping", gen.damping, "Damping ratio");
  g->add_option("--gravity", gen.gravity, "Gravity vector [m/s^2]")->expected(3);
  g->add_option("--name", gen.name, "Model name");
  g->add_option("-o,--out", gen.out, "Output model file (default stdout)");

  std::string fixture_name, fixture_out;
  auto* fx = app.add_subcommand("fixture", "Write a shipped fixture model");
  fx->add_option("name", fixture_name, "saddle-paper | saddle-lab")->required();
  fx->add_option("-o,--out", fixture_out, "Output model file (default stdout)");

  std::string model_path, out, save;
  auto* ff = app.add_subcommand("formfind", "Solve for the equilibrium configuration");
  ff->add_option("model", model_path)->required()->check(CLI::ExistingFile);
  ff->add_option("-o,--out", out, "Result JSON");
  ff->add_option("--save-model", save, "Write the model with the equilibrated configuration");

  std::string design;
  auto* ps = app.add_subcommand("prestress", "Design the prestress of an equilibrated model");
  ps->add_option("model", model_path)->required()->check(CLI::ExistingFile);
  ps->add_option("--design", design, "Designed clusters, e.g. ODC=1e4")->required();
  ps->add_option("-o,--out", out, "Result JSON");
  ps->add_option("--save-model", save, "Write the model with the rest lengths realizing the prestress");

  int modes = 6;
  auto* md = app.add_subcommand("modal", "Natural frequencies and stiffness eigenvalues");
  md->add_option("model", model_path)->required()->check(CLI::ExistingFile);
  md->add_option("--modes", modes, "Number of modes")->check(CLI::PositiveNumber);
  md->add_option("-o,--out", out, "Result JSON");

  DeployArgs dep;
  auto* dp = app.add_subcommand("deploy", "Design and run a deployment");
  dp->add_option("model", model_path)->required()->check(CLI::ExistingFile);
  dp->add_option("--substeps", dep.substeps, "Number of substeps");
  dp->add_option("--delta", dep.delta, "Total rest-length reduction of the actuated clusters [m]")->required();
  dp->add_option("--clusters", dep.clusters, "Actuated clusters, comma separated")->required();
  dp->add_option("--design", dep.design, "Redesign prestress at each substep, e.g. ODC=1e4");
  dp->add_option("--mode", dep.mode, "plan | open | closed");
  dp->add_option("--feedback", dep.feedback, "Feedback cluster for closed loop (default: last cluster)");
  dp->add_option("--dynamics", dep.dynamics, "Deployment duration [s] for a dynamic open-loop run");
  dp->add_option("--dt", dep.dt, "Time step [s] (default from the highest natural frequency)");
  dp->add_option("--record-every", dep.record_every, "Record every n-th time step");
  dp->add_option("--error", dep.error, "Actuation error model, e.g. bias=0.01,noise=1e-4,seed=7");
  dp->add_option("--out-dir", dep.out_dir, "Output directory");

  std::string manifest, rerun_dir = "rerun";
  auto* rr = app.add_subcommand("rerun", "Re-execute a run from its manifest");
  rr->add_option("manifest", manifest)->required()->check(CLI::ExistingFile);
  rr->add_option("--out-dir", rerun_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kValidation);
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*fx) return cmd_fixture(fixture_name, fixture_out);
    if (*ff) return cmd_formfind(model_path, out, save);
    if (*ps) return cmd_prestress(model_path, design, out, save);
    if (*md) return cmd_modal(model_path, modes, out);
    if (*dp) return run_deploy(load_model(model_path), dep, model_path);
    if (*rr) return cmd_rerun(manifest, rerun_dir);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(ExitCode::kFailure);
  }
  return 0;
}
