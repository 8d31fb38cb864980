#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "ovseg/cli/commands.hpp"
#include "ovseg/features/image_io.hpp"
#include "ovseg/features/synthetic.hpp"
#include "ovseg/upsampler/checkpoint.hpp"

using namespace ovseg;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("cli") {
  const auto dir = fs::temp_directory_path() / "ovseg_unit_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto p = [&](const char* name) { return (dir / name).string(); };

  SUBCASE("usage errors exit 1") {
    CHECK(cli_run({}).code == cli::kUsage);
    CHECK(cli_run({"no-such-command"}).code == cli::kUsage);
    const auto r = cli_run({"eval", "--manifest", "m.json", "--pred-dir", ".", "--bogus"});
    CHECK(r.code == cli::kUsage);
    CHECK(r.err.find("Usage") != std::string::npos);
    CHECK(r.err.find("bogus") != std::string::npos);
    CHECK(cli_run({"segment", "--image", "x.ppm", "--checkpoint", "c", "--bank", "b", "--out", "o.pgm", "--lambda",
                   "-1"})
              .code == cli::kUsage);
  }
  SUBCASE("missing checkpoint exits 2 and names the path") {
    write_ppm(dir / "img.ppm", synthetic_scene(32, 32, 1).image);
    REQUIRE(cli_run({"make-toy-bank", "--out", p("bank.json")}).code == cli::kOk);
    const auto r = cli_run({"segment", "--image", p("img.ppm"), "--checkpoint", p("nope"), "--bank", p("bank.json"),
                            "--out", p("mask.pgm")});
    CHECK(r.code == cli::kDataError);
    CHECK(r.err.find(p("nope")) != std::string::npos);
  }
  SUBCASE("corpus, training, segmentation and evaluation") {
    REQUIRE(cli_run({"make-toy-corpus", "--out", p("corpus"), "--count", "2", "--size", "48", "--masks"}).code ==
            cli::kOk);
    const auto train = cli_run({"train-upsampler", "--corpus", p("corpus"), "--out", p("ckpt"), "--steps", "2",
                                "--crop", "32", "--log", p("log.jsonl")});
    REQUIRE(train.code == cli::kOk);
    std::ifstream log(dir / "log.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(log, line)) {
      const auto j = nlohmann::json::parse(line);
      CHECK(j.contains("loss_total"));
      CHECK(j.contains("loss_rec"));
      CHECK(j.contains("loss_img"));
      ++lines;
    }
    CHECK(lines == 2);

    REQUIRE(cli_run({"make-toy-bank", "--out", p("bank.json")}).code == cli::kOk);
    fs::create_directories(dir / "pred");
    for (const char* name : {"img_000", "img_001"}) {
      const auto r = cli_run({"segment", "--image", (dir / "corpus" / (std::string(name) + ".ppm")).string(),
                              "--checkpoint", p("ckpt"), "--bank", p("bank.json"), "--window", "32", "--stride", "16",
                              "--long-side", "48", "--out",
                              (dir / "pred" / ("mask_" + std::string(name).substr(4) + ".pgm")).string()});
      CHECK(r.code == cli::kOk);
    }
    CHECK(fs::is_regular_file(dir / "pred/mask_000.classes.json"));
    const auto same = cli_run({"eval", "--manifest", p("corpus/manifest.json"), "--pred-dir", p("corpus")});
    REQUIRE(same.code == cli::kOk);
    CHECK(nlohmann::json::parse(same.out).at("miou") == 1.0);
    const auto pred = cli_run({"eval", "--manifest", p("corpus/manifest.json"), "--pred-dir", p("pred"), "--out",
                               p("report.json")});
    CHECK(pred.code == cli::kOk);
    CHECK(fs::is_regular_file(dir / "report.json"));
  }
  SUBCASE("feature dump") {
    write_ppm(dir / "img.ppm", synthetic_scene(32, 16, 2).image);
    const auto r = cli_run({"dump-features", "--image", p("img.ppm"), "--out", p("f.sfup")});
    CHECK(r.code == cli::kOk);
    CHECK(nlohmann::json::parse(r.out).at("h") == 4);
    CHECK(cli_run({"dump-features", "--image", p("absent.ppm"), "--out", p("f.sfup")}).code == cli::kDataError);
  }
  fs::remove_all(dir);
}
