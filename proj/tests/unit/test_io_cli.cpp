#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "overlap_tomo/cli.hpp"
#include "overlap_tomo/io.hpp"

using namespace overlap_tomo;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "overlap_tomo_unit" / name;
  fs::remove_all(p);
  return p;
}

io::json read_json(const fs::path& p) { return io::json::parse(io::read_file(p)); }

}  // namespace

TEST_CASE("FNV-1a test vectors", "[io]") {
  CHECK(io::hex64(io::fnv1a64("")) == "cbf29ce484222325");
  CHECK(io::hex64(io::fnv1a64("a")) == "af63dc4c8601ec8c");
  CHECK(io::hex64(io::fnv1a64("foobar")) == "85944171f73967e8");
}

TEST_CASE("CSV quoting and line ends", "[io]") {
  std::ostringstream s;
  io::CsvWriter csv(s, {"a", "b"});
  csv.row({"1,5", "say \"hi\""});
  csv.row({"plain", ""});
  CHECK(s.str() == "a,b\r\n\"1,5\",\"say \"\"hi\"\"\"\r\nplain,\r\n");
}

TEST_CASE("numbers round-trip through text", "[io]") {
  for (double x : {0.1, 1.0 / 3.0, 0.26793252595155709, 1e-300}) CHECK(std::stod(io::format_double(x)) == x);
  CHECK(io::format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(io::number_or_null(std::nan("")).is_null());
}

TEST_CASE("JSON documents carry the documented keys", "[io]") {
  const auto d = io::density_to_json(overlap_pdf(Spectrum(0.05, 0.3, 0.65)));
  CHECK(d.contains("breakpoints"));
  CHECK(d.contains("pieces"));
  CHECK(d["breakpoints"].front().get<double>() == Approx(0.155));
  CHECK(d["breakpoints"].back().get<double>() == Approx(0.515));

  const auto e = invert_limits({0.155, 0.515, 1e-3, 1e-3});
  const auto j = io::estimate_to_json(e, "limits", {0.155, 0.515, 1e-3, 1e-3});
  CHECK(j["lambda"].size() == 3);
  CHECK(j["sigma"][1].get<double>() == Approx(0.0070710678118654752));
  CHECK(j["flags"].is_array());

  const auto m = io::maximin_to_json(maximin_overlap(Spectrum(0.05, 0.3, 0.65)));
  CHECK(m["attaining_perm"] == "P12");
  CHECK(m["q_wc"].get<double>() == Approx(0.26793252595155709));
}

TEST_CASE("samples CSV reader", "[io]") {
  const auto dir = scratch("reader");
  io::write_file(dir / "s.csv", "q,weight\r\n0.25,1\r\n0.5,2\r\n\r\n0.75\n");
  CHECK(io::read_samples_csv(dir / "s.csv") == std::vector<double>{0.25, 0.5, 0.75});
  io::write_file(dir / "bad.csv", "0.1\nfoo\n");
  CHECK_THROWS(io::read_samples_csv(dir / "bad.csv"));
}

TEST_CASE("cli: usage errors and domain errors", "[cli]") {
  CHECK(invoke({}).code == cli::kUsage);
  CHECK(invoke({"frobnicate"}).code == cli::kUsage);
  CHECK(invoke({"pdf"}).code == cli::kUsage);
  CHECK(invoke({"--version"}).code == cli::kOk);

  const auto dir = scratch("errors");
  const auto neg = invoke({"pdf", "--lambda", "-0.1,0.3,0.8", "--out", dir.string()});
  CHECK(neg.code != cli::kOk);
  CHECK_FALSE(neg.err.empty());
  CHECK(invoke({"estimate", "--qmin", "0.2", "--qmax", "0.4", "--out", dir.string()}).code == cli::kDomain);
  CHECK(invoke({"sample", "--n", "abc", "--out", dir.string()}).code == cli::kUsage);
  CHECK(invoke({"jpd", "--lambda", "0.2,0.2,0.6", "--out", dir.string()}).code == cli::kDomain);
}

TEST_CASE("cli: pdf writes the density", "[cli]") {
  const auto dir = scratch("pdf");
  const auto r = invoke({"pdf", "--lambda", "0.65,0.05,0.3", "--resolution", "101", "--out", dir.string()});
  REQUIRE(r.code == cli::kOk);
  CHECK(r.err.find("reordered") != std::string::npos);
  CHECK(fs::exists(dir / "density.csv"));
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "timing.json"));
  const auto d = read_json(dir / "density.json");
  CHECK(d["breakpoints"].front().get<double>() == Approx(0.155));
  const auto csv = io::read_file(dir / "density.csv");
  CHECK(csv.rfind("q,density\r\n", 0) == 0);

  const auto qubit = scratch("pdf_qubit");
  REQUIRE(invoke({"pdf", "--lambda", "0.2", "--out", qubit.string()}).code == cli::kOk);
  CHECK(read_json(qubit / "density.json")["breakpoints"].back().get<double>() == Approx(0.68));
}

TEST_CASE("cli: jpd grid integrates to one", "[cli]") {
  const auto dir = scratch("jpd");
  const auto r = invoke({"jpd", "--lambda", "0.05,0.3,0.65", "--grid", "200", "--out", dir.string()});
  REQUIRE(r.code == cli::kOk);
  const auto pos = r.out.find("Riemann sum ");
  REQUIRE(pos != std::string::npos);
  CHECK(std::stod(r.out.substr(pos + 12)) == Approx(1.0).margin(0.01));
}

TEST_CASE("cli: estimate from limits", "[cli]") {
  const auto dir = scratch("estimate");
  const auto r = invoke({"estimate", "--qmin", "0.155", "--qmax", "0.515", "--dq", "0.001", "--out", dir.string()});
  REQUIRE(r.code == cli::kOk);
  const auto j = read_json(dir / "estimate.json");
  CHECK(j["lambda"][0].get<double>() == Approx(0.05).margin(1e-12));
  CHECK(j["lambda"][1].get<double>() == Approx(0.3).margin(1e-12));
  CHECK(j["lambda"][2].get<double>() == Approx(0.65).margin(1e-12));
  CHECK(j["sigma"][0].get<double>() == Approx(0.0035843021946010945).margin(1e-12));
}

TEST_CASE("cli: maximin for the reference spectrum and on a grid", "[cli]") {
  const auto dir = scratch("maximin");
  REQUIRE(invoke({"maximin", "--lambda", "0.05,0.3,0.65", "--out", dir.string()}).code == cli::kOk);
  const auto j = read_json(dir / "maximin.json");
  CHECK(j["q_wc"].get<double>() == Approx(0.26793252595155709).margin(1e-12));
  CHECK(j["attaining_perm"] == "P12");

  const auto grid = scratch("maximin_grid");
  REQUIRE(invoke({"maximin", "--grid", "16", "--out", grid.string()}).code == cli::kOk);
  const auto text = io::read_file(grid / "grid.csv");
  CHECK(text.rfind("lambda1,lambda3,delta_qmin,attaining_perm\r\n", 0) == 0);
  CHECK(invoke({"maximin", "--grid", "15", "--out", grid.string()}).code == cli::kUsage);
}

TEST_CASE("cli: manifests are identical across thread counts and replay cleanly", "[cli][manifest]") {
  const auto a = scratch("manifest_a");
  const auto b = scratch("manifest_b");
  REQUIRE(invoke({"sample", "--n", "40000", "--seed", "9", "--jpd", "--threads", "1", "--out", a.string()}).code == cli::kOk);
  REQUIRE(invoke({"sample", "--n", "40000", "--seed", "9", "--jpd", "--threads", "3", "--out", b.string()}).code == cli::kOk);
  CHECK(io::read_file(a / "manifest.json") == io::read_file(b / "manifest.json"));
  CHECK(io::read_file(a / "histogram.csv") == io::read_file(b / "histogram.csv"));
  const auto m = read_json(a / "manifest.json");
  CHECK(m["seed"] == 9);
  CHECK(m["outputs"].size() == 3);

  const auto r = invoke({"replay", (a / "manifest.json").string()});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("MISMATCH") == std::string::npos);

  // Tampering with an output is detected.
  auto tampered = read_json(a / "manifest.json");
  tampered["outputs"][0]["fnv1a64"] = "0000000000000000";
  io::write_file(a / "tampered.json", tampered.dump(2));
  CHECK(invoke({"replay", (a / "tampered.json").string(), "--out", (a / "t").string()}).code == cli::kFailure);
}

TEST_CASE("cli: seed falls back to the environment", "[cli][manifest]") {
  const auto a = scratch("env_a");
  const auto b = scratch("env_b");
  ::setenv("OVERLAP_TOMO_SEED", "21", 1);
  const int code = invoke({"sample", "--n", "20000", "--out", a.string()}).code;
  ::unsetenv("OVERLAP_TOMO_SEED");
  REQUIRE(code == cli::kOk);
  REQUIRE(invoke({"sample", "--n", "20000", "--seed", "21", "--out", b.string()}).code == cli::kOk);
  CHECK(read_json(a / "manifest.json")["seed"] == 21);
  CHECK(io::read_file(a / "histogram.csv") == io::read_file(b / "histogram.csv"));
  // The replay needs no environment.
  CHECK(invoke({"replay", (a / "manifest.json").string()}).code == cli::kOk);
}

TEST_CASE("cli: samples to spectrum pipeline", "[cli]") {
  const auto dir = scratch("pipeline");
  REQUIRE(invoke({"sample", "--n", "1e6", "--seed", "3", "--save-samples", "--out", dir.string()}).code == cli::kOk);
  const auto est = scratch("pipeline_estimate");
  REQUIRE(invoke({"estimate", "--samples", (dir / "samples.csv").string(), "--out", est.string()}).code == cli::kOk);
  const auto j = read_json(est / "estimate.json");
  CHECK(j["method"] == "tailfit");
  CHECK(j["lambda"][0].get<double>() == Approx(0.05).margin(0.01));
  CHECK(j["lambda"][1].get<double>() == Approx(0.3).margin(0.01));
  CHECK(j["lambda"][2].get<double>() == Approx(0.65).margin(0.01));
}

TEST_CASE("cli: repro list and a small figure", "[cli][repro]") {
  const auto list = invoke({"repro", "list"});
  CHECK(list.code == cli::kOk);
  CHECK(list.out.find("fig7b") != std::string::npos);
  CHECK(invoke({"repro", "fig99"}).code == cli::kUsage);

  const auto dir = scratch("repro");
  REQUIRE(invoke({"repro", "fig1a", "--out", dir.string()}).code == cli::kOk);
  CHECK(fs::exists(dir / "fig1a" / "lambda1_0.2" / "density.csv"));
  const auto m = read_json(dir / "manifest.json");
  CHECK(m["outputs"].size() == 4 * 3);  // density.csv, density.json and manifest.json per run
}
