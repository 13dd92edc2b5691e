#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "sbmlab/errors.hpp"
#include "sbmlab/io_store.hpp"

using namespace sbmlab;
using namespace sbmlab::io;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("sbmlab-io-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << s;
}

RunManifest sample_manifest() {
    RunManifest m;
    m.config = {{"subcommand", "solve-f"}, {"parameters", {{"x_max", 10.0}, {"n_points", 1001}}}};
    m.seed = 42;
    return m;
}

Artifacts sample_artifacts(const std::string& run_id) {
    const GridFunction f = GridFunction::sample(0.0, 1.0, 11, [](double x) { return std::exp(-x); }, "F");
    return {{"F.csv", grid_csv(f, run_id)}, {"summary.json", json_text({{"c_star", 1.3796872}})}};
}

}  // namespace

TEST_CASE("SHA-256 test vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("format_double round-trips") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int i = 0; i < 2000; ++i) {
        const double v = std::ldexp(u(rng), static_cast<int>(u(rng)));
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(2.0) == "2");
}

TEST_CASE("run id is canonical in the config and sensitive to seed and version") {
    const json a = json::parse(R"({"b": 1, "a": {"y": 2, "x": 3}})");
    const json b = json::parse(R"({"a": {"x": 3, "y": 2}, "b": 1})");
    CHECK(compute_run_id(a, 1) == compute_run_id(b, 1));
    CHECK(compute_run_id(a, 1).size() == 16);
    CHECK(compute_run_id(a, 1) != compute_run_id(a, 2));
    CHECK(compute_run_id(a, 1, "sbmlab 0.9") != compute_run_id(a, 1));
}

TEST_CASE("write then read a run") {
    TempDir tmp;
    RunManifest m = sample_manifest();
    const std::string id = compute_run_id(m.config, m.seed);
    const Artifacts arts = sample_artifacts(id);
    const fs::path dir = write_run(tmp.path, m, arts);
    CHECK(dir == tmp.path / "runs" / id);
    CHECK(m.run_id == id);
    CHECK(fs::exists(dir / "manifest.json"));
    const auto [back, back_arts] = read_run(dir);
    CHECK(back == m);
    CHECK(back_arts == arts);
    CHECK(back.artifact_paths() == std::vector<std::string>{"F.csv", "summary.json"});
}

TEST_CASE("writing the same run twice is a no-op, different content collides") {
    TempDir tmp;
    RunManifest m = sample_manifest();
    const std::string id = compute_run_id(m.config, m.seed);
    const fs::path dir = write_run(tmp.path, m, sample_artifacts(id));
    const std::string before = slurp(dir / "manifest.json");
    RunManifest again = sample_manifest();
    CHECK(write_run(tmp.path, again, sample_artifacts(id)) == dir);
    CHECK(slurp(dir / "manifest.json") == before);

    Artifacts other = sample_artifacts(id);
    other["summary.json"] = json_text({{"c_star", 1.0}});
    RunManifest third = sample_manifest();
    CHECK_THROWS_AS(write_run(tmp.path, third, other), CollisionError);
}

TEST_CASE("concurrent writers of one run agree") {
    TempDir tmp;
    const std::string id = compute_run_id(sample_manifest().config, 42);
    std::vector<std::thread> threads;
    std::vector<fs::path> dirs(4);
    for (int i = 0; i < 4; ++i) {
        threads.emplace_back([&, i] {
            RunManifest m = sample_manifest();
            dirs[i] = write_run(tmp.path, m, sample_artifacts(id));
        });
    }
    for (auto& t : threads) t.join();
    for (const fs::path& d : dirs) CHECK(d == dirs[0]);
    CHECK_NOTHROW(read_run(dirs[0]));
}

TEST_CASE("corrupt and truncated files are reported with a byte offset") {
    TempDir tmp;
    RunManifest m = sample_manifest();
    const std::string id = compute_run_id(m.config, m.seed);
    const fs::path dir = write_run(tmp.path, m, sample_artifacts(id));

    SUBCASE("truncated artifact") {
        const std::string csv = slurp(dir / "F.csv");
        spit(dir / "F.csv", csv.substr(0, 40));
        try {
            read_run(dir);
            FAIL("no exception");
        } catch (const CorruptManifest& e) {
            CHECK(e.offset() == 40);
        }
    }
    SUBCASE("same-size edit fails the hash") {
        std::string csv = slurp(dir / "F.csv");
        csv[csv.size() - 2] = csv[csv.size() - 2] == '1' ? '2' : '1';
        spit(dir / "F.csv", csv);
        CHECK_THROWS_AS(read_run(dir), CorruptManifest);
    }
    SUBCASE("broken manifest JSON") {
        const std::string text = slurp(dir / "manifest.json");
        spit(dir / "manifest.json", text.substr(0, 30));
        try {
            read_run(dir);
            FAIL("no exception");
        } catch (const CorruptManifest& e) {
            CHECK(e.offset() <= 30);
            CHECK(e.offset() > 0);
        }
    }
    SUBCASE("manifest whose run id does not match its content") {
        json j = json::parse(slurp(dir / "manifest.json"));
        j["seed"] = 43;
        spit(dir / "manifest.json", j.dump(2) + "\n");
        CHECK_THROWS_AS(read_run(dir), CorruptManifest);
    }
    SUBCASE("missing artifact") {
        fs::remove(dir / "summary.json");
        CHECK_THROWS_AS(read_run(dir), CorruptManifest);
    }
}

TEST_CASE("unknown manifest fields survive a round trip") {
    RunManifest m = sample_manifest();
    m.run_id = compute_run_id(m.config, m.seed);
    json j = json::parse(manifest_text(m));
    j["annotation"] = "kept";
    const RunManifest back = parse_manifest(j.dump());
    CHECK(back.extra.at("annotation") == "kept");
    CHECK(manifest_text(back).find("\"annotation\": \"kept\"") != std::string::npos);
}

TEST_CASE("grid CSV round trip is exact") {
    const GridFunction f = GridFunction::sample(-3.0, 2.0, 257, [](double x) { return std::sin(x) / 3.0; }, "psi 0");
    const std::string text = grid_csv(f, "abc123");
    CHECK(text.starts_with("# sbmlab-grid v1 label=psi_0 x_min=-3 x_max=2 n_points=257 run_id=abc123\nx,value\n"));
    std::string id;
    const GridFunction g = parse_grid_csv(text, &id);
    CHECK(id == "abc123");
    CHECK(g.label() == "psi_0");
    REQUIRE(g.size() == f.size());
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(g[i] == f[i]);
}

TEST_CASE("grid CSV errors carry the offset of the bad line") {
    const GridFunction f = GridFunction::sample(0.0, 1.0, 3, [](double x) { return x; });
    std::string text = grid_csv(f, "r");
    const std::size_t third = text.find("0.5,");
    text.replace(third, 3, "0.x");
    try {
        parse_grid_csv(text);
        FAIL("no exception");
    } catch (const CorruptManifest& e) {
        CHECK(e.offset() == third);
    }
    CHECK_THROWS_AS(parse_grid_csv("x,value\n0,1\n"), CorruptManifest);
    CHECK_THROWS_AS(parse_grid_csv(grid_csv(f, "r") + "9,9\n"), CorruptManifest);
}

TEST_CASE("table CSV round trip") {
    const std::vector<std::vector<double>> rows{{0.5, 1e-300, -2.25}, {1.0, 3.0, 0.0}};
    const std::string text = table_csv("laplace", {"lambda", "mean", "z"}, rows, "id");
    const Table t = parse_table_csv(text);
    CHECK(t.label == "laplace");
    CHECK(t.columns == std::vector<std::string>{"lambda", "mean", "z"});
    CHECK(t.rows == rows);
    CHECK_THROWS_AS(table_csv("x", {"a"}, {{1.0, 2.0}}, "id"), InvalidArgument);
}

TEST_CASE("unwritable store root raises IoError") {
    RunManifest m = sample_manifest();
    CHECK_THROWS_AS(write_run("/proc/sbmlab-no-such-root", m, {}), IoError);
}
