#pragma once

// Model files (JSON), history CSVs and run manifests.

#include <Eigen/Dense>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctsnet/deployment.hpp"
#include "ctsnet/fixtures.hpp"
#include "ctsnet/geometry.hpp"
#include "ctsnet/model.hpp"
#include "ctsnet/statics.hpp"

namespace ctsnet {

using Json = nlohmann::json;

inline constexpr const char* kModelFormat = "ctsnet-model";
inline constexpr const char* kPlanFormat = "ctsnet-plan";
inline constexpr const char* kManifestFormat = "ctsnet-manifest";
inline constexpr int kFormatVersion = 1;
inline constexpr int kCsvSchemaVersion = 1;

struct ModelFile {
  std::string name;
  std::optional<CableNetParams> params;
  Model model;
  Configuration config;
  FormFindOptions solver;
};

// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, end);
}

namespace detail {

inline Json vec_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline const Json& field(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ValidationError(path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(path + "." + key + ": missing");
  return *it;
}

inline double num(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path + ": expected a number");
  return j.get<double>();
}

inline int integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ValidationError(path + ": expected an integer");
  return j.get<int>();
}

inline std::string text(const Json& j, const std::string& path) {
  if (!j.is_string()) throw ValidationError(path + ": expected a string");
  return j.get<std::string>();
}

inline Eigen::VectorXd vec(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError(path + ": expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = num(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

// Scalar broadcasts to n entries; arrays must have exactly n.
inline Eigen::VectorXd vec_or_scalar(const Json& j, int n, const std::string& path) {
  if (j.is_number()) return Eigen::VectorXd::Constant(n, j.get<double>());
  Eigen::VectorXd v = vec(j, path);
  require_size(v, n, path);
  return v;
}

inline std::vector<int> ints(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError(path + ": expected an array");
  std::vector<int> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(integer(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace detail

inline Json params_to_json(const CableNetParams& p) {
  return {{"p", p.p}, {"q", p.q}, {"rx", p.rx}, {"ry", p.ry}, {"a", p.a},
          {"b", p.b}, {"c", p.c}, {"angle_spacing", to_string(p.spacing)}};
}

inline CableNetParams params_from_json(const Json& j, const std::string& path = "params") {
  using namespace detail;
  CableNetParams p;
  p.p = integer(field(j, "p", path), path + ".p");
  p.q = integer(field(j, "q", path), path + ".q");
  p.rx = num(field(j, "rx", path), path + ".rx");
  p.ry = num(field(j, "ry", path), path + ".ry");
  p.a = num(field(j, "a", path), path + ".a");
  p.b = num(field(j, "b", path), path + ".b");
  p.c = num(field(j, "c", path), path + ".c");
  if (j.contains("angle_spacing")) p.spacing = angle_spacing_from_string(text(j["angle_spacing"], path + ".angle_spacing"));
  p.validate();
  return p;
}

inline Json model_to_json(const ModelFile& mf) {
  const Topology& t = mf.model.topology;
  const MemberSpec& s = mf.model.spec;
  Json j;
  j["format"] = kModelFormat;
  j["version"] = kFormatVersion;
  j["name"] = mf.name;
  if (mf.params) j["params"] = params_to_json(*mf.params);
  Json nodes = Json::array();
  for (int n = 0; n < t.node_count; ++n) {
    const Eigen::Vector3d x = mf.config.node(n);
    nodes.push_back({x[0], x[1], x[2]});
  }
  j["nodes"] = nodes;
  Json members = Json::array();
  for (const Member& m : t.members) members.push_back({m.tail, m.head});
  j["members"] = members;
  Json clusters = Json::array();
  for (const Cluster& c : t.clusters) clusters.push_back({{"name", c.name}, {"members", c.members}});
  j["clusters"] = clusters;
  j["fixed_nodes"] = t.fixed_nodes;
  j["materials"] = {{"density", detail::vec_json(s.density)},
                    {"area", detail::vec_json(s.area)},
                    {"modulus", detail::vec_json(s.modulus)},
                    {"cluster_area", detail::vec_json(s.cluster_area)},
                    {"rest_length", detail::vec_json(s.rest_length)},
                    {"damping", s.damping_coeff}};
  j["point_masses"] = detail::vec_json(mf.model.point_mass);
  j["gravity"] = {s.gravity[0], s.gravity[1], s.gravity[2]};
  j["options"] = {{"tension_model", mf.model.options.tension_model == TensionModel::kTaut ? "taut" : "slack"},
                  {"damping_exponent", mf.model.options.damping_exponent},
                  {"tol_force", mf.solver.tol_force},
                  {"max_iter", mf.solver.max_iter},
                  {"max_halvings", mf.solver.max_halvings}};
  return j;
}

// Accepts either an explicit structure (nodes/members/clusters/fixed_nodes)
// or params alone, in which case the net is generated. Material entries may
// be scalars; missing rest lengths default to the initial cluster lengths.
inline ModelFile model_from_json(const Json& j) {
  using namespace detail;
  if (!j.is_object()) throw ValidationError("model: expected a JSON object");
  if (j.contains("format") && j["format"] != kModelFormat)
    throw ValidationError("format: expected '" + std::string(kModelFormat) + "'");
  if (j.contains("version") && integer(j["version"], "version") != kFormatVersion)
    throw ValidationError("version: unsupported (expected " + std::to_string(kFormatVersion) + ")");

  ModelFile mf;
  if (j.contains("name")) mf.name = text(j["name"], "name");
  if (j.contains("params")) mf.params = params_from_json(j["params"]);

  Topology& topo = mf.model.topology;
  if (j.contains("nodes")) {
    const Json& nodes = j["nodes"];
    if (!nodes.is_array() || nodes.empty()) throw ValidationError("nodes: expected a non-empty array");
    topo.node_count = static_cast<int>(nodes.size());
    mf.config.coords.resize(3 * topo.node_count);
    for (int n = 0; n < topo.node_count; ++n) {
      const std::string at = "nodes[" + std::to_string(n) + "]";
      Eigen::VectorXd x = vec(nodes[n], at);
      if (x.size() != 3) throw ValidationError(at + ": expected [x, y, z]");
      mf.config.coords.segment<3>(3 * n) = x;
    }
    const Json& members = field(j, "members", "model");
    if (!members.is_array()) throw ValidationError("members: expected an array");
    for (std::size_t k = 0; k < members.size(); ++k) {
      const std::string at = "members[" + std::to_string(k) + "]";
      std::vector<int> ends = ints(members[k], at);
      if (ends.size() != 2) throw ValidationError(at + ": expected [tail, head]");
      topo.members.push_back({ends[0], ends[1]});
    }
    const Json& clusters = field(j, "clusters", "model");
    if (!clusters.is_array()) throw ValidationError("clusters: expected an array");
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      const std::string at = "clusters[" + std::to_string(c) + "]";
      topo.clusters.push_back({text(field(clusters[c], "name", at), at + ".name"),
                               ints(field(clusters[c], "members", at), at + ".members")});
    }
    topo.fixed_nodes = ints(field(j, "fixed_nodes", "model"), "fixed_nodes");
    topo.finalize();
  } else if (mf.params) {
    CableNet net = build_topology(*mf.params);
    topo = net.topology;
    mf.config = net.config;
  } else {
    throw ValidationError("model: needs either 'nodes'/'members'/'clusters'/'fixed_nodes' or 'params'");
  }

  const int nm = topo.member_count(), nc = topo.cluster_count();
  const Json& mat = field(j, "materials", "model");
  MemberSpec& s = mf.model.spec;
  s.density = vec_or_scalar(field(mat, "density", "materials"), nm, "materials.density");
  s.area = vec_or_scalar(field(mat, "area", "materials"), nm, "materials.area");
  s.modulus = vec_or_scalar(field(mat, "modulus", "materials"), nc, "materials.modulus");
  if (mat.contains("cluster_area"))
    s.cluster_area = vec_or_scalar(mat["cluster_area"], nc, "materials.cluster_area");
  else if (mat["area"].is_number())
    s.cluster_area = Eigen::VectorXd::Constant(nc, mat["area"].get<double>());
  else
    throw ValidationError("materials.cluster_area: missing");
  if (mat.contains("rest_length")) {
    s.rest_length = vec_or_scalar(mat["rest_length"], nc, "materials.rest_length");
  } else {
    s.rest_length = member_lengths(topo, mf.config.coords).lc;
    if (mat.contains("prestrain"))
      s.rest_length /= 1.0 + num(mat["prestrain"], "materials.prestrain");
  }
  if (mat.contains("damping")) s.damping_coeff = num(mat["damping"], "materials.damping");
  if (j.contains("gravity")) {
    Eigen::VectorXd g = vec(j["gravity"], "gravity");
    if (g.size() != 3) throw ValidationError("gravity: expected [gx, gy, gz]");
    s.gravity = g;
  }
  mf.model.point_mass = j.contains("point_masses")
                            ? vec_or_scalar(j["point_masses"], topo.node_count, "point_masses")
                            : Eigen::VectorXd::Zero(topo.node_count);

  if (j.contains("options")) {
    const Json& o = j["options"];
    if (!o.is_object()) throw ValidationError("options: expected an object");
    if (o.contains("tension_model")) {
      const std::string tm = text(o["tension_model"], "options.tension_model");
      if (tm == "taut") mf.model.options.tension_model = TensionModel::kTaut;
      else if (tm == "slack") mf.model.options.tension_model = TensionModel::kSlack;
      else throw ValidationError("options.tension_model: expected 'taut' or 'slack'");
    }
    if (o.contains("damping_exponent"))
      mf.model.options.damping_exponent = num(o["damping_exponent"], "options.damping_exponent");
    if (o.contains("tol_force")) mf.solver.tol_force = num(o["tol_force"], "options.tol_force");
    if (o.contains("max_iter")) mf.solver.max_iter = integer(o["max_iter"], "options.max_iter");
    if (o.contains("max_halvings")) mf.solver.max_halvings = integer(o["max_halvings"], "options.max_halvings");
    if (mf.solver.tol_force < 0) throw ValidationError("options.tol_force: must be >= 0");
    if (mf.solver.max_iter < 1) throw ValidationError("options.max_iter: must be >= 1");
    if (mf.solver.max_halvings < 0) throw ValidationError("options.max_halvings: must be >= 0");
  }
  mf.model.validate();
  check_config(topo, mf.config.coords);
  return mf;
}

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path.string() + ": cannot open");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string(), ExitCode::kFailure);
  out << content;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline ModelFile load_model(const std::filesystem::path& path) {
  const Json j = read_json(path);
  try {
    return model_from_json(j);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

inline void save_model(const std::filesystem::path& path, const ModelFile& mf) {
  write_text(path, dump(model_to_json(mf)));
}

inline Fixture to_fixture(const ModelFile& mf) { return {mf.name, mf.params, mf.model, mf.config}; }

inline ModelFile to_model_file(const Fixture& fx) { return {fx.name, fx.params, fx.model, fx.config, {}}; }

// ---------------------------------------------------------------------------
// Plans

inline Json plan_state_json(const PlanState& s) {
  return {{"rest_lengths", detail::vec_json(s.rest_lengths)},
          {"tensions", detail::vec_json(s.tensions)},
          {"cluster_lengths", detail::vec_json(s.cluster_lengths)},
          {"coords", detail::vec_json(s.coords)},
          {"residual", s.residual}};
}

inline Json plan_to_json(const Topology& topo, const DeploymentPlan& plan) {
  Json j;
  j["format"] = kPlanFormat;
  j["version"] = kFormatVersion;
  Json names = Json::array();
  for (const auto& c : topo.clusters) names.push_back(c.name);
  j["clusters"] = names;
  j["actuated"] = plan.actuated;
  j["designed"] = plan.designed;
  j["targets"] = detail::vec_json(plan.targets);
  j["initial"] = plan_state_json(plan.initial);
  Json sub = Json::array();
  for (const auto& s : plan.substeps) sub.push_back(plan_state_json(s));
  j["substeps"] = sub;
  return j;
}

// ---------------------------------------------------------------------------
// History CSVs. First line names the schema, second is the column header
// with units.

enum class HistoryKind { kTrajectory, kTensions, kRestLengths };

inline std::string history_csv(const Topology& topo, const std::vector<DeployRecord>& recs, HistoryKind kind,
                               bool dynamic) {
  static const char* kNames[] = {"trajectory", "tensions", "restlengths"};
  std::ostringstream os;
  os << "# ctsnet." << kNames[static_cast<int>(kind)] << " v" << kCsvSchemaVersion << "\n";
  os << "step," << (dynamic ? "time_s" : "substep") << ",progress";
  switch (kind) {
    case HistoryKind::kTrajectory:
      for (int n = 0; n < topo.node_count; ++n)
        for (char ax : {'x', 'y', 'z'}) os << ",n" << n << "_" << ax << "_m";
      break;
    case HistoryKind::kTensions:
      for (const auto& c : topo.clusters) os << ",t_" << c.name << "_N";
      os << ",residual_N";
      break;
    case HistoryKind::kRestLengths:
      for (const auto& c : topo.clusters) os << ",l0_" << c.name << "_m";
      for (const auto& c : topo.clusters) os << ",cmd_" << c.name << "_m";
      for (const auto& c : topo.clusters) os << ",l_" << c.name << "_m";
      break;
  }
  os << "\n";
  auto put = [&](const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) os << ',' << format_double(v[i]);
  };
  for (const auto& r : recs) {
    os << r.step << ',' << format_double(r.time) << ',' << format_double(r.progress);
    switch (kind) {
      case HistoryKind::kTrajectory: put(r.coords); break;
      case HistoryKind::kTensions:
        put(r.tensions);
        os << ',' << format_double(r.residual);
        break;
      case HistoryKind::kRestLengths:
        put(r.rest_lengths);
        put(r.commanded);
        put(r.cluster_lengths);
        break;
    }
    os << "\n";
  }
  return os.str();
}

// Plan substeps as history rows (step 1..n).
inline std::vector<DeployRecord> plan_records(const DeploymentPlan& plan) {
  std::vector<DeployRecord> out;
  const std::size_t n = plan.substeps.size();
  for (std::size_t k = 1; k <= n; ++k) {
    const PlanState& s = plan.substeps[k - 1];
    DeployRecord r;
    r.step = k;
    r.time = static_cast<double>(k);
    r.progress = static_cast<double>(k) / static_cast<double>(n);
    r.coords = s.coords;
    r.cluster_lengths = s.cluster_lengths;
    r.rest_lengths = s.rest_lengths;
    r.commanded = s.rest_lengths;
    r.tensions = s.tensions;
    r.residual = s.residual;
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<std::string> write_histories(const std::filesystem::path& dir, const Topology& topo,
                                                const std::vector<DeployRecord>& recs, bool dynamic) {
  std::filesystem::create_directories(dir);
  const std::vector<std::pair<std::string, HistoryKind>> files = {{"trajectory.csv", HistoryKind::kTrajectory},
                                                                  {"tensions.csv", HistoryKind::kTensions},
                                                                  {"restlengths.csv", HistoryKind::kRestLengths}};
  std::vector<std::string> names;
  for (const auto& [name, kind] : files) {
    write_text(dir / name, history_csv(topo, recs, kind, dynamic));
    names.push_back(name);
  }
  return names;
}

}  // namespace ctsnet
