#include "support.hpp"
#include "voxens/pipeline.hpp"

#include <doctest.h>

#include <fstream>
#include <numbers>

using namespace voxens;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const fs::path& tiny_dataset() {
  static const fs::path dir = [] {
    const auto d = testing::scratch_dir("pipeline_scene");
    SynthOptions o;
    o.preset = "sphere-occluder";
    o.views = 6;
    o.intrinsics.width = o.intrinsics.height = 16;
    o.render.gt_res = 32;
    cmd_synth(o, d);
    return d;
  }();
  return dir;
}

RunConfig tiny_run(const std::string& out) {
  RunConfig c;
  c.dataset = tiny_dataset().string();
  c.out_dir = out;
  c.members = 2;
  c.grid_res = 12;
  c.train.steps = 40;
  c.train.rays_per_step = 64;
  c.train.field_res = 8;
  c.train.lr = 0.2;
  c.save_fields = true;
  return c;
}

RunHooks fixed_clock() {
  RunHooks h;
  h.timestamp = "2000-01-01T00:00:00Z";
  h.quiet = true;
  return h;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("config json round trip and overlay") {
    RunConfig c;
    c.dataset = "scene";
    c.members = 5;
    c.sigma_t_percent = 1.0;
    c.noise.sigma_r_deg = 2.0;
    c.threads = 3;
    const json doc = config_to_json(c);
    CHECK(doc["parallel_members"] == 3);
    CHECK(doc["rig_radius"].is_null());
    CHECK(config_to_json(config_from_json(doc)) == doc);

    const RunConfig o = config_from_json(json{{"lr", 0.1}, {"sigma_t_percent", nullptr}}, c);
    CHECK(o.train.lr == 0.1);
    CHECK_FALSE(o.sigma_t_percent);
    CHECK(o.members == 5);

    try {
      config_from_json(json{{"learning_rate", 1}});
      FAIL("expected a config error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Config);
      CHECK(std::string(e.what()).find("learning_rate") != std::string::npos);
    }
    CHECK_THROWS_AS(config_from_json(json{{"members", "five"}}), Error);
    CHECK_THROWS_AS(config_from_json(json::array()), Error);

    const auto dir = testing::scratch_dir("config");
    std::ofstream(dir / "c.json") << doc.dump();
    CHECK(config_to_json(load_config(dir / "c.json")) == doc);
    std::ofstream(dir / "bad.json") << "{";
    CHECK_THROWS_AS(load_config(dir / "bad.json"), Error);
  }

  TEST_CASE("config validation") {
    RunConfig c;
    c.dataset = "x";
    CHECK_NOTHROW(c.validate());
    auto bad = [](auto edit) {
      RunConfig r;
      r.dataset = "x";
      edit(r);
      try {
        r.validate();
        FAIL("expected a config error");
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
      }
    };
    bad([](RunConfig& r) { r.members = 1; });
    bad([](RunConfig& r) { r.dataset.clear(); });
    bad([](RunConfig& r) { r.percentile = 0.0; });
    bad([](RunConfig& r) { r.percentile_scope = "all"; });
    bad([](RunConfig& r) { r.noise.sigma_im = -1.0; });
    bad([](RunConfig& r) { r.train.lr = -0.1; });
    bad([](RunConfig& r) { r.ply_mode = "xml"; });
    bad([](RunConfig& r) { r.sigma_t_percent = -2.0; });
  }

  TEST_CASE("sweep values") {
    RunConfig base;
    base.dataset = "x";
    CHECK(apply_sweep_value(base, SweepAxis::SigmaIm, "20").noise.sigma_im == 20.0);
    CHECK(apply_sweep_value(base, SweepAxis::SigmaR, "0.5").noise.sigma_r_deg == 0.5);
    const RunConfig t = apply_sweep_value(base, SweepAxis::SigmaT, "0.01");
    CHECK(t.noise.sigma_t == 0.01);
    CHECK_FALSE(t.sigma_t_percent);
    CHECK(*apply_sweep_value(base, SweepAxis::SigmaT, "1%").sigma_t_percent == 1.0);
    const RunConfig tr = apply_sweep_value(base, SweepAxis::SigmaTR, "0.5%:2");
    CHECK(*tr.sigma_t_percent == 0.5);
    CHECK(tr.noise.sigma_r_deg == 2.0);
    CHECK_THROWS_AS(apply_sweep_value(base, SweepAxis::SigmaTR, "0.5"), Error);
    CHECK_THROWS_AS(apply_sweep_value(base, SweepAxis::SigmaIm, "abc"), Error);
    CHECK_THROWS_AS(apply_sweep_value(base, SweepAxis::SigmaIm, "3x"), Error);
    CHECK(parse_sweep_axis("sigma_tr") == SweepAxis::SigmaTR);
    CHECK_THROWS_AS(parse_sweep_axis("sigma_x"), Error);
  }

  TEST_CASE("synth writes a loadable dataset with ground truth") {
    const Dataset ds = load_dataset(tiny_dataset());
    CHECK(ds.frames.size() == 6);
    CHECK(fs::exists(tiny_dataset() / "gt.json"));
    CHECK(load_ground_truth(tiny_dataset() / "gt.json").primitives.size() == 2);
    CHECK(mean_rig_radius(ds) == doctest::Approx(1.5).epsilon(1e-9));
  }

  TEST_CASE("run writes every output and is reproducible") {
    const auto dir = testing::scratch_dir("run");
    const MetricsReport a = cmd_run(tiny_run((dir / "a").string()), fixed_clock());
    const MetricsReport b = cmd_run(tiny_run((dir / "b").string()), fixed_clock());
    for (const auto& [name, file] : a.outputs) CHECK_MESSAGE(fs::exists(dir / "a" / file), name);
    CHECK(a.outputs.count("member_01_field"));
    CHECK(read_report(dir / "a" / "report.json") == a);
    CHECK(a.baseline);
    CHECK(a.per_view_psnr.size() == 6);
    CHECK(a.point_counts.total_grid == 12 * 12 * 12);
    CHECK(a.point_counts.kept + a.point_counts.removed == a.point_counts.above_threshold);
    REQUIRE(a.artifacts);
    REQUIRE(a.robustness);
    CHECK(a.robustness->member_artifacts.size() == 2);
    CHECK(a.provenance.member_seeds == std::vector<std::uint64_t>{0, 1});

    // Identical apart from the output directory recorded in the config.
    auto strip = [](std::string s, const std::string& out) {
      for (auto pos = s.find(out); pos != std::string::npos; pos = s.find(out)) s.erase(pos, out.size());
      return s;
    };
    CHECK(strip(slurp(dir / "a" / "report.json"), (dir / "a").string()) ==
          strip(slurp(dir / "b" / "report.json"), (dir / "b").string()));
    CHECK(slurp(dir / "a" / "ensemble.vxe") == slurp(dir / "b" / "ensemble.vxe"));
    CHECK(slurp(dir / "a" / "points_all.ply") == slurp(dir / "b" / "points_all.ply"));
  }

  TEST_CASE("noise settings reach the report") {
    const auto dir = testing::scratch_dir("run_noise");
    RunConfig c = tiny_run((dir / "n").string());
    c.sigma_t_percent = 1.0;
    c.noise.sigma_im = 5.0;
    const MetricsReport r = cmd_run(c, fixed_clock());
    CHECK_FALSE(r.baseline);
    const double expected = 0.01 * 2.0 * std::numbers::pi * 1.5;
    CHECK(r.config["sigma_t"].get<double>() == doctest::Approx(expected).epsilon(1e-9));
    CHECK(r.config["rig_radius"].get<double>() == doctest::Approx(1.5).epsilon(1e-9));
  }

  TEST_CASE("failures leave an error record") {
    const auto dir = testing::scratch_dir("run_fail");
    RunConfig c = tiny_run((dir / "f").string());
    c.dataset = (dir / "nowhere").string();
    try {
      cmd_run(c, fixed_clock());
      FAIL("expected an io error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Io);
    }
    const json rec = json::parse(slurp(dir / "f" / "error.json"));
    CHECK(rec["stage"] == "load");
    CHECK(rec["kind"] == "io");
  }

  TEST_CASE("sweep keeps going past a bad value") {
    const auto dir = testing::scratch_dir("sweep");
    RunConfig base = tiny_run((dir / "s").string());
    base.train.steps = 10;
    const auto rows = cmd_sweep(base, SweepAxis::SigmaIm, {"0", "-3", "10"}, fixed_clock());
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].report);
    CHECK_FALSE(rows[1].report);
    CHECK_FALSE(rows[1].error.empty());
    CHECK(rows[2].report);
    CHECK(fs::exists(dir / "s" / "sigma_im_2" / "report.json"));
    std::ifstream in(dir / "s" / "sweep.csv");
    std::string line;
    int n = 0;
    std::getline(in, line);
    CHECK(line.rfind("value,run_dir,mean_psnr", 0) == 0);
    while (std::getline(in, line)) ++n;
    CHECK(n == 3);
  }
}
