#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ctsnet/fixtures.hpp"
#include "ctsnet/io.hpp"

using namespace ctsnet;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

class Scratch : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ctsnet_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

#ifdef CTSNET_CLI
struct CliRun {
  int code;
  std::string out;
};

CliRun cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "stdout.txt";
  const std::string cmd = std::string(CTSNET_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  return {WEXITSTATUS(raw), slurp(log)};
}
#endif

}  // namespace

TEST_F(Scratch, ModelRoundTripIsByteIdentical) {
  for (const Fixture& fx : {saddle_lab(), saddle_paper()}) {
    const fs::path a = dir_ / "a.json", b = dir_ / "b.json";
    save_model(a, to_model_file(fx));
    const ModelFile back = load_model(a);
    save_model(b, back);
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_EQ(back.config.coords, fx.config.coords);
    EXPECT_EQ(back.model.spec.rest_length, fx.model.spec.rest_length);
    EXPECT_EQ(back.model.point_mass, fx.model.point_mass);
    EXPECT_EQ(back.model.topology.members, fx.model.topology.members);
  }
}

TEST(ModelFileTest, ParamsOnlyExpandsNet) {
  const Json j = Json::parse(R"({
    "params": {"p": 12, "q": 1, "rx": 0.5, "ry": 0.5, "a": 1.0, "b": 1.0, "c": 0.3},
    "materials": {"density": 1150, "area": 2.8e-7, "modulus": 1.06e10, "prestrain": 0.05}
  })");
  const ModelFile mf = model_from_json(j);
  EXPECT_EQ(mf.model.topology.node_count, 24);
  EXPECT_EQ(mf.model.topology.cluster_count(), 2);
  const Eigen::VectorXd lc = member_lengths(mf.model.topology, mf.config.coords).lc;
  EXPECT_TRUE(mf.model.spec.rest_length.isApprox(lc / 1.05));
}

TEST(ModelFileTest, FieldPathErrors) {
  const Json base = model_to_json(to_model_file(saddle_lab()));
  auto expect_msg = [](const Json& j, const std::string& needle) {
    try {
      model_from_json(j);
      ADD_FAILURE() << "accepted invalid model, expected " << needle;
    } catch (const ValidationError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  Json j = base;
  j["materials"]["modulus"][1] = -1.0;
  expect_msg(j, "materials.modulus[1]");
  j = base;
  j["members"][3] = {0, 99};
  expect_msg(j, "members[3]");
  j = base;
  j["materials"].erase("density");
  expect_msg(j, "materials.density");
  j = base;
  j["nodes"][2] = {0.0, 1.0};
  expect_msg(j, "nodes[2]");
  j = base;
  j["version"] = 7;
  expect_msg(j, "version");
  j = base;
  j["options"]["tension_model"] = "loose";
  expect_msg(j, "options.tension_model");
  j = base;
  j["point_masses"][0] = -0.1;
  expect_msg(j, "point_masses[0]");
  j = base;
  j["clusters"][0]["members"] = Json::array();
  EXPECT_THROW(model_from_json(j), ValidationError);
}

TEST_F(Scratch, ParseErrorReportsLine) {
  const fs::path p = dir_ / "broken.json";
  write_text(p, "{\n  \"nodes\": [\n    [0, 0, 0],\n  }\n");
  try {
    load_model(p);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
}

TEST(Csv, HeaderNamesUnitsAndSchema) {
  const Fixture fx = saddle_lab();
  DeployRecord r;
  r.coords = fx.config.coords;
  r.tensions = Eigen::Vector2d(20.0, 36.5);
  r.rest_lengths = r.commanded = fx.model.spec.rest_length;
  r.cluster_lengths = member_lengths(fx.model.topology, fx.config.coords).lc;
  const std::string t = history_csv(fx.model.topology, {r}, HistoryKind::kTensions, false);
  EXPECT_EQ(t.substr(0, t.find('\n')), "# ctsnet.tensions v1");
  EXPECT_NE(t.find("step,substep,progress,t_DC_N,t_HC_N,residual_N"), std::string::npos);
  const std::string x = history_csv(fx.model.topology, {r}, HistoryKind::kTrajectory, true);
  EXPECT_NE(x.find("step,time_s,progress,n0_x_m,n0_y_m,n0_z_m"), std::string::npos);
  const std::string l = history_csv(fx.model.topology, {r}, HistoryKind::kRestLengths, false);
  EXPECT_NE(l.find("l0_DC_m,l0_HC_m,cmd_DC_m,cmd_HC_m,l_DC_m,l_HC_m"), std::string::npos);
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Fixtures, ShippedFilesMatchBuilders) {
  for (const std::string name : {"saddle-paper", "saddle-lab"}) {
    const fs::path p = fs::path(CTSNET_FIXTURE_DIR) / (name + ".json");
    ASSERT_TRUE(fs::exists(p)) << p;
    const ModelFile mf = load_model(p);
    const Fixture fx = fixture_by_name(name);
    EXPECT_LT((mf.config.coords - fx.config.coords).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((mf.model.spec.rest_length - fx.model.spec.rest_length).cwiseAbs().maxCoeff(), 1e-9);
  }
}

#ifdef CTSNET_CLI

TEST_F(Scratch, GenerateTopologies) {
  CliRun r = cli("generate --p 20 --q 2 --rx 60 --ry 45 --a 30 --b 60 --c 0.25 -o " + (dir_ / "m.json").string(), dir_);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(load_model(dir_ / "m.json").model.topology.cluster_count(), 3);
  r = cli("generate --p 12 --q 1 --rx 0.525 --ry 0.525 --a 1.05 --b 1.05 --c 0.2857 -o " + (dir_ / "lab.json").string(),
          dir_);
  ASSERT_EQ(r.code, 0) << r.out;
  const ModelFile lab = load_model(dir_ / "lab.json");
  EXPECT_EQ(lab.model.topology.node_count, 24);
  EXPECT_EQ(lab.model.topology.clusters[0].name, "DC");
  // generate -> load -> re-save is byte-identical, also through --params
  r = cli("generate --params " + (dir_ / "lab.json").string() + " -o " + (dir_ / "lab2.json").string(), dir_);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(dir_ / "lab.json"), slurp(dir_ / "lab2.json"));
}

TEST_F(Scratch, ValidationExitCode) {
  CliRun r = cli("generate --p 2 --q 1", dir_);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("params.p"), std::string::npos) << r.out;
  r = cli("frobnicate", dir_);
  EXPECT_EQ(r.code, 2);
  write_text(dir_ / "bad.json", "{\"materials\": {}}");
  r = cli("formfind " + (dir_ / "bad.json").string(), dir_);
  EXPECT_EQ(r.code, 2);
}

TEST_F(Scratch, SolverFailureExitCode) {
  ModelFile mf = to_model_file(saddle_lab());
  mf.model.spec.rest_length *= 0.5;
  mf.solver.max_iter = 1;
  save_model(dir_ / "m.json", mf);
  const CliRun r = cli("formfind " + (dir_ / "m.json").string(), dir_);
  EXPECT_EQ(r.code, 3) << r.out;
}

TEST_F(Scratch, FormfindPrestressModal) {
  ASSERT_EQ(cli("fixture saddle-paper -o " + (dir_ / "p.json").string(), dir_).code, 0);
  CliRun r = cli("formfind " + (dir_ / "p.json").string() + " -o " + (dir_ / "ff.json").string(), dir_);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(r.out.find("in 0 iterations") != std::string::npos || r.out.find("in 1 iterations") != std::string::npos)
      << r.out;
  r = cli("prestress " + (dir_ / "p.json").string() + " --design ODC=1e4 --save-model " + (dir_ / "q.json").string(),
          dir_);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("self-stress modes 1"), std::string::npos) << r.out;
  std::istringstream lines(r.out);
  bool found = false;
  for (std::string line; std::getline(lines, line);)
    if (line.rfind("ODC", 0) == 0) {
      std::istringstream ls(line);
      std::string name;
      double t = 0;
      ls >> name >> t;
      EXPECT_NEAR(t, 1e4, 1e-3);
      found = true;
    }
  EXPECT_TRUE(found) << r.out;
  r = cli("modal " + (dir_ / "q.json").string() + " --modes 5 -o " + (dir_ / "modal.json").string(), dir_);
  ASSERT_EQ(r.code, 0) << r.out;
  const Json modal = read_json(dir_ / "modal.json");
  ASSERT_EQ(modal["frequencies_Hz"].size(), 5u);
  for (std::size_t k = 1; k < 5; ++k)
    EXPECT_GE(modal["frequencies_Hz"][k].get<double>(), modal["frequencies_Hz"][k - 1].get<double>());
}

TEST_F(Scratch, DeployPlanFilesAndRerun) {
  ASSERT_EQ(cli("fixture saddle-paper -o " + (dir_ / "p.json").string(), dir_).code, 0);
  const fs::path out = dir_ / "plan";
  CliRun r = cli("deploy " + (dir_ / "p.json").string() + " --substeps 10 --delta 700 --clusters ODC,IDC --out-dir " +
                  out.string(),
              dir_);
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"trajectory.csv", "tensions.csv", "restlengths.csv"})
    EXPECT_EQ(count_lines(slurp(out / f)), 12u) << f;  // schema, header, 10 substeps
  const fs::path again = dir_ / "again";
  r = cli("rerun " + (out / "manifest.json").string() + " --out-dir " + again.string(), dir_);
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"trajectory.csv", "tensions.csv", "restlengths.csv", "plan.json"})
    EXPECT_EQ(slurp(out / f), slurp(again / f)) << f;
}

TEST_F(Scratch, DeployOpenClosedPairAndDynamics) {
  ASSERT_EQ(cli("fixture saddle-lab -o " + (dir_ / "lab.json").string(), dir_).code, 0);
  const std::string base = "deploy " + (dir_ / "lab.json").string() +
                           " --substeps 10 --delta 1.5 --clusters DC --design DC=20 --error bias=0.05,seed=3";
  CliRun r = cli(base + " --mode open --out-dir " + (dir_ / "open").string(), dir_);
  ASSERT_EQ(r.code, 0) << r.out;
  r = cli(base + " --mode closed --feedback DC --out-dir " + (dir_ / "closed").string(), dir_);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(count_lines(slurp(dir_ / "open" / "tensions.csv")), 13u);
  EXPECT_EQ(count_lines(slurp(dir_ / "closed" / "tensions.csv")), 13u);
  EXPECT_NE(slurp(dir_ / "open" / "tensions.csv"), slurp(dir_ / "closed" / "tensions.csv"));
  const Json manifest = read_json(dir_ / "closed" / "manifest.json");
  EXPECT_EQ(manifest["seed"], 3);
  EXPECT_EQ(manifest["options"]["mode"], "closed");

  // identical inputs and seed give byte-identical CSVs
  r = cli(base + " --mode open --out-dir " + (dir_ / "open2").string(), dir_);
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(slurp(dir_ / "open" / "tensions.csv"), slurp(dir_ / "open2" / "tensions.csv"));

  r = cli(base + " --mode open --dynamics 5 --record-every 50 --out-dir " + (dir_ / "dyn").string(), dir_);
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string t = slurp(dir_ / "dyn" / "tensions.csv");
  EXPECT_NE(t.find("step,time_s,progress"), std::string::npos);
  EXPECT_GT(count_lines(t), 100u);
  r = cli(base + " --mode closed --dynamics 5 --out-dir " + (dir_ / "bad").string(), dir_);
  EXPECT_EQ(r.code, 2);
}

#endif
