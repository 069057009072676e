#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "tmilstein/config.hpp"
#include "tmilstein/runner.hpp"

using namespace tmil;
namespace fs = std::filesystem;

namespace {

const char* const kRateConfig = R"(# small rate run
kind = rate
model.name = cubic_quintic
paths = 64
seed = 3

[truncation]
omega.coeff = 4
omega.power = 5
h.coeff = 4
h.power = 0.1
h_bar = 4

[rate]
t_final = 1.28
delta_ref = 0.00125
steps = 0.02, 0.04, 0.08, 0.16
)";

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("tmilstein-test-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(TMILSTEIN_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config text parsing") {
  const RawConfig raw = parse_config_text("a = 1\n# comment\n[sec]\nb = x y ; trailing\n\n[sec.sub]\nc=2\n");
  CHECK(raw.at("a") == "1");
  CHECK(raw.at("sec.b") == "x y");
  CHECK(raw.at("sec.sub.c") == "2");
  CHECK_THROWS_AS(parse_config_text("a = 1\na = 2\n"), ConfigParseError);
  CHECK_THROWS_AS(parse_config_text("just words\n"), ConfigParseError);
  CHECK_THROWS_AS(parse_config_text("[open\n"), ConfigParseError);
  CHECK_THROWS_AS(parse_config_text(" = 3\n"), ConfigParseError);
  try {
    parse_config_text("a = 1\n\nbroken\n");
  } catch (const ConfigParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("validation names the offending field") {
  RawConfig raw = parse_config_text(kRateConfig);
  CHECK_NOTHROW(validate_config(raw));

  auto field_of = [](RawConfig r) -> std::string {
    try {
      validate_config(r);
    } catch (const ConfigValidationError& e) {
      return e.field();
    }
    return "";
  };
  RawConfig r = raw;
  r.erase("model.name");
  CHECK(field_of(r) == "model.name");
  r = raw;
  r["model.name"] = "quartic";
  CHECK(field_of(r) == "model.name");
  r = raw;
  r["rate.colour"] = "red";
  CHECK(field_of(r) == "rate.colour");
  r = raw;
  r.erase("rate.steps");
  CHECK(field_of(r) == "rate.steps");
  r = raw;
  r["rate.steps"] = "0.02, 0.03";
  CHECK(field_of(r) == "rate.steps");
  r = raw;
  r["truncation.h.power"] = "0.5";
  CHECK(field_of(r) == "truncation");
  r = raw;
  r["paths"] = "many";
  CHECK(field_of(r) == "paths");
  r = raw;
  r["kind"] = "plot";
  CHECK(field_of(r) == "kind");
  r = raw;
  r["scheme"] = "implicit";
  CHECK(field_of(r) == "scheme");
}

TEST_CASE("overrides and the config hash") {
  const RawConfig raw = parse_config_text(kRateConfig);
  const RunConfig base = validate_config(raw);
  CHECK(base.seed == 3);
  CHECK(base.n_paths == 64);
  CHECK(base.steps.size() == 4);
  CHECK(base.config_hash.size() == 16);

  ConfigOverrides o;
  o.workers = 4;
  o.out = "/tmp/elsewhere";
  const RunConfig same = validate_config(raw, o);
  CHECK(same.config_hash == base.config_hash);
  CHECK(same.workers == 4);
  CHECK(same.out_dir == "/tmp/elsewhere");

  o.seed = 9;
  const RunConfig reseeded = validate_config(raw, o);
  CHECK(reseeded.seed == 9);
  CHECK(reseeded.config_hash != base.config_hash);
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("model overrides") {
  RawConfig raw = parse_config_text(kRateConfig);
  raw["model.x0"] = "0.5";
  raw["model.drift"] = "0, -1";
  const SdeModel m = build_model(validate_config(raw));
  CHECK(m.initial_value == Vec{0.5});
  CHECK(eval_drift(m, Vec{2.0})[0] == -2.0);
  CHECK(eval_diffusion(m, Vec{2.0}, 0)[0] == 4.0);
}

TEST_CASE("format_double round-trips") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(5.204174972007773e-47) == "5.204174972007773e-47");
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("CLI exit codes") {
  TempDir tmp;
  const fs::path good = write(tmp.path / "rate.cfg", kRateConfig);
  CHECK(run_cli("--config " + good.string() + " --out " + (tmp.path / "ok").string()) == 0);
  CHECK(fs::exists(tmp.path / "ok" / "rates.csv"));
  CHECK(fs::exists(tmp.path / "ok" / "summary.json"));

  const fs::path garbled = write(tmp.path / "garbled.cfg", "kind = rate\nthis line has no equals sign\n");
  CHECK(run_cli("--config " + garbled.string()) == 2);
  CHECK(run_cli("--config " + (tmp.path / "missing.cfg").string()) == 2);
  CHECK(run_cli("--bogus-flag") == 2);

  std::string no_model = kRateConfig;
  no_model.replace(no_model.find("model.name = cubic_quintic"), 26, "");
  CHECK(run_cli("--config " + write(tmp.path / "nomodel.cfg", no_model).string()) == 3);

  const fs::path unknown = write(tmp.path / "unknown.cfg", std::string(kRateConfig) + "delta_ref_unused = 0\n");
  CHECK(run_cli("--config " + unknown.string()) == 3);

  std::string runtime = "kind = rate\nmodel.name = cubic_quintic\nmodel.x0 = 5\nreference_scheme = classical_em\n"
                        "paths = 4\n[truncation]\nomega.coeff = 4\nomega.power = 5\nh.coeff = 4\nh.power = 0.1\n"
                        "h_bar = 4\n[rate]\ndelta_ref = 0.01\nsteps = 0.02, 0.04, 0.08\n";
  CHECK(run_cli("--config " + write(tmp.path / "runtime.cfg", runtime).string() + " --out " +
                (tmp.path / "rt").string()) == 4);
}

TEST_CASE("reruns are byte-identical across worker counts") {
  TempDir tmp;
  const fs::path cfg = write(tmp.path / "rate.cfg", kRateConfig);
  REQUIRE(run_cli("--config " + cfg.string() + " --workers 1 --out " + (tmp.path / "a").string()) == 0);
  REQUIRE(run_cli("--config " + cfg.string() + " --workers 4 --out " + (tmp.path / "b").string()) == 0);
  REQUIRE(run_cli("--config " + cfg.string() + " --workers 1 --out " + (tmp.path / "c").string()) == 0);
  const std::string a = slurp(tmp.path / "a" / "rates.csv");
  CHECK(!a.empty());
  CHECK(a == slurp(tmp.path / "b" / "rates.csv"));
  CHECK(a == slurp(tmp.path / "c" / "rates.csv"));
  CHECK(slurp(tmp.path / "a" / "summary.json") == slurp(tmp.path / "b" / "summary.json"));
  CHECK(a.rfind("# tmilstein ", 0) == 0);
  CHECK(a.find("# seed: 3\n") != std::string::npos);
  CHECK(a.find("# config_hash: ") != std::string::npos);

  REQUIRE(run_cli("--config " + cfg.string() + " --seed 4 --out " + (tmp.path / "d").string()) == 0);
  CHECK(slurp(tmp.path / "d" / "rates.csv") != a);
  CHECK(slurp(tmp.path / "d" / "rates.csv").find("# seed: 4\n") != std::string::npos);
}

TEST_CASE("output directory precedence: flag, environment, config") {
  TempDir tmp;
  std::string text = kRateConfig;
  text.insert(0, "out = " + (tmp.path / "from_config").string() + "\n");
  const fs::path cfg = write(tmp.path / "rate.cfg", text);
  REQUIRE(run_cli("--config " + cfg.string()) == 0);
  CHECK(fs::exists(tmp.path / "from_config" / "rates.csv"));
  const std::string env = "TMILSTEIN_OUT=" + (tmp.path / "from_env").string();
  REQUIRE(run_cli("--config " + cfg.string(), env) == 0);
  CHECK(fs::exists(tmp.path / "from_env" / "rates.csv"));
  REQUIRE(run_cli("--config " + cfg.string() + " --out " + (tmp.path / "from_flag").string(), env) == 0);
  CHECK(fs::exists(tmp.path / "from_flag" / "rates.csv"));
  CHECK_FALSE(fs::exists(tmp.path / "from_env" / "rates.csv.tmp"));
}

TEST_CASE("other experiment kinds write their artifacts") {
  TempDir tmp;
  const std::string trunc = "[truncation]\nomega.coeff = 4\nomega.power = 5\nh.coeff = 4\nh.power = 0.25\nh_bar = 4\n";
  const std::string stability = "kind = stability\nmodel.name = stable_quintic\npaths = 20\nseed = 1\n" + trunc +
                                "[stability]\ndelta = 0.04\nhorizon = 40\nk.coeff = 2\nk.power = 2\nrecord_paths = 3\n";
  REQUIRE(run_cli("--config " + write(tmp.path / "s.cfg", stability).string() + " --out " + (tmp.path / "s").string()) ==
          0);
  const std::string csv = slurp(tmp.path / "s" / "stability.csv");
  CHECK(csv.find("path,k,norm\n0,0,1\n") != std::string::npos);
  CHECK(csv.find("\n2,1000,") != std::string::npos);
  CHECK(slurp(tmp.path / "s" / "summary.json").find("\"published_H\": 25") != std::string::npos);

  const std::string conditions = "kind = conditions\nmodel.name = strongly_damped_cubic\nq = 1\np = 42\n"
                                 "[truncation]\nomega.coeff = 83\nomega.power = 3\nh.coeff = 1\nh.power = 0.1\n";
  REQUIRE(run_cli("--config " + write(tmp.path / "c.cfg", conditions).string() + " --out " +
                  (tmp.path / "c").string()) == 0);
  const std::string summary = slurp(tmp.path / "c" / "summary.json");
  CHECK(summary.find("\"dominant\": \"8/5\"") != std::string::npos);
  CHECK(summary.find("\"new_threshold\": 1.0") != std::string::npos);

  const std::string bad_p = "kind = conditions\nmodel.name = strongly_damped_cubic\np = 3\n"
                            "[truncation]\nomega.coeff = 83\nomega.power = 3\nh.coeff = 1\nh.power = 0.1\n";
  CHECK(run_cli("--config " + write(tmp.path / "p.cfg", bad_p).string()) == 3);

  const std::string check = "kind = check\nmodel.name = stable_quintic\n[check]\nassumptions = A4_1_dissipative\n"
                            "radius = 1\nk_coeff = 2\nk_power = 2\n";
  REQUIRE(run_cli("--config " + write(tmp.path / "k.cfg", check).string() + " --out " + (tmp.path / "k").string()) ==
          0);
  CHECK(slurp(tmp.path / "k" / "checks.csv").find("A4_1_dissipative,1000,") != std::string::npos);

  const std::string missing = "kind = check\nmodel.name = stable_quintic\n[check]\nassumptions = A2_2_khasminskii\n";
  CHECK(run_cli("--config " + write(tmp.path / "m.cfg", missing).string() + " --out " + (tmp.path / "m").string()) ==
        3);
}
