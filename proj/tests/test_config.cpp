#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "mstaog/config.hpp"
#include "mstaog/error.hpp"
#include "support.hpp"

using namespace mstaog;

TEST_CASE("set parses typed values") {
  RunConfig c;
  c.set("features.cell", "6");
  c.set("mining.support", " 0.25 ");
  c.set("model.coupling", "independent");
  c.set("model.use_lowres", "no");
  c.set("protocol.name", "cross-subject");
  CHECK(c.features.cell == 6);
  CHECK(c.mining.support == 0.25);
  CHECK(c.coupling == ViewCoupling::Independent);
  CHECK(!c.use_lowres);
  CHECK(c.protocol == "cross-subject");
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("set rejects unknown keys and bad values") {
  RunConfig c;
  CHECK_THROWS_AS(c.set("features.colour", "1"), ConfigError);
  CHECK_THROWS_AS(c.set("features.cell", "four"), ConfigError);
  CHECK_THROWS_AS(c.set("features.cell", "4.5"), ConfigError);
  CHECK_THROWS_AS(c.set("model.coupling", "mixed"), ConfigError);
  CHECK_THROWS_AS(c.set("model.use_lowres", "maybe"), ConfigError);
}

TEST_CASE("validate enforces module invariants") {
  auto invalid = [](const char* key, const char* value) {
    RunConfig c;
    c.set(key, value);
    return c;
  };
  CHECK_THROWS_AS(invalid("features.cell", "1").validate(), ConfigError);
  CHECK_THROWS_AS(invalid("mining.support", "0").validate(), ConfigError);
  CHECK_THROWS_AS(invalid("mining.support", "1.5").validate(), ConfigError);
  CHECK_THROWS_AS(invalid("training.C", "-1").validate(), ConfigError);
  CHECK_THROWS_AS(invalid("training.sigma_min", "1").validate(), ConfigError);
  CHECK_THROWS_AS(invalid("training.min_window", "9").validate(), ConfigError);
  CHECK_THROWS_AS(invalid("protocol.name", "sideways").validate(), ConfigError);
  CHECK_NOTHROW(RunConfig{}.validate());
}

TEST_CASE("load reports the offending line") {
  testing::TempDir dir("config");
  const auto file = dir / "run.conf";
  {
    std::ofstream out(file);
    out << "# comment\n\nfeatures.cell = 4  # trailing\nmining.bogus = 1\n";
  }
  try {
    RunConfig::load(file);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(":4:") != std::string::npos);
  }
  {
    std::ofstream out(file);
    out << "features.cell 4\n";
  }
  CHECK_THROWS_AS(RunConfig::load(file), ConfigError);
  CHECK_THROWS_AS(RunConfig::load(dir / "missing.conf"), ConfigError);
}

TEST_CASE("save and load round-trip every entry") {
  testing::TempDir dir("config");
  RunConfig c;
  c.set("features.scale_step", "1.2345678901234567");
  c.set("training.seed", "99");
  c.set("model.coupling", "independent");
  c.set("run.jobs", "3");
  save_config(c, dir / "out.conf");
  const RunConfig back = RunConfig::load(dir / "out.conf");
  CHECK(back.entries() == c.entries());
  CHECK(back.features.scale_step == c.features.scale_step);
}
