// Acceptance suite: one PASS/FAIL line per criterion, run through the command
// line entry point so every number comes from a stored run.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "cli.hpp"
#include "sbmlab/io_store.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Invocation {
    int code = -1;
    std::string out;
    std::string err;
    fs::path dir;
    json summary;
    double seconds = 0.0;
};

fs::path g_root;
int g_counter = 0;

Invocation invoke(std::vector<std::string> args, fs::path root = {}) {
    if (root.empty()) root = g_root / std::to_string(g_counter++);
    args.insert(args.begin(), "sbmlab");
    args.push_back("--out");
    args.push_back(root.string());
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Invocation r;
    const auto t0 = std::chrono::steady_clock::now();
    r.code = sbmlab::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.out = out.str();
    r.err = err.str();
    if (r.code != 0) return r;
    for (const auto& e : fs::directory_iterator(root / "runs")) {
        if (e.is_directory()) r.dir = e.path();
    }
    const auto [manifest, artifacts] = sbmlab::io::read_run(r.dir);
    r.summary = json::parse(artifacts.at("summary.json"));
    return r;
}

std::string num(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

struct Verdict {
    bool pass = false;
    std::string detail;
};

Verdict failed_run(const Invocation& r) {
    std::string e = r.err;
    if (!e.empty() && e.back() == '\n') e.pop_back();
    return {false, "command exited " + std::to_string(r.code) + ": " + e};
}

Verdict eigen_half() {
    const Invocation r = invoke({"eig", "--phi", "F_half"});
    if (r.code) return failed_run(r);
    bool ok = true;
    std::string d;
    for (const json& m : r.summary["results"]) {
        const double l = m["lambdas"][0];
        ok = ok && std::abs(l - 0.5) <= 1e-3;
        d += m["method"].get<std::string>() + " " + num(l, 6) + "  ";
    }
    return {ok, d + "(target 0.5 +- 1e-3)"};
}

Verdict eigen_G() {
    const Invocation r = invoke({"eig", "--phi", "G"});
    if (r.code) return failed_run(r);
    bool ok = true;
    std::string d;
    for (const json& m : r.summary["results"]) {
        const double l = m["lambdas"][0];
        const double e = m["ground_state_vs_G_prime"];
        ok = ok && std::abs(l - 1.0) <= 1e-3 && e <= 1e-2;
        d += m["method"].get<std::string>() + " lambda0 " + num(l, 6) + " psi0 error " + num(e, 8) + "  ";
    }
    return {ok, d + "(targets 1 +- 1e-3, error <= 1e-2 on [-4,4])"};
}

Verdict headline() {
    const Invocation r = invoke({"pipeline"});
    if (r.code) return failed_run(r);
    const double l = r.summary["lambda0_F"];
    const double d = std::stod(r.out);
    const bool ok = std::abs(l - 0.8882) <= 5e-3 && std::abs(d - 0.224) <= 1e-2 && r.seconds < 60.0;
    return {ok, "lambda0 " + num(l, 6) + " (0.8882 +- 5e-3), printed dimension " + num(d, 6) +
                    " (0.224 +- 1e-2), " + num(r.seconds, 2) + " s (< 60 s)"};
}

Verdict pde_ode() {
    const Invocation r = invoke({"solve-g"});
    if (r.code) return failed_run(r);
    const double gap = r.summary["sup_gap"];
    const double left = r.summary["G_at_x_min"];
    const double scale = r.summary["scaling_identity"]["error"];
    double self = 0.0;
    for (const json& s : r.summary["self_similarity"]) self = std::max(self, s["error"].get<double>());
    const bool ok = gap <= 5e-3 && std::abs(left - 2.0) <= 1e-3 && scale <= 1e-3 && self <= 5e-3;
    return {ok, "sup gap " + num(gap, 6) + " (<= 5e-3), |G(-10) - 2| " + num(std::abs(left - 2.0), 8) +
                    " (<= 1e-3), scaling identity " + num(scale, 7) + " (<= 1e-3), self-similarity " + num(self, 6) +
                    " (<= 5e-3)"};
}

Verdict simulator() {
    bool ok = true;
    std::string d;
    for (const char* backend : {"particles", "spde_grid"}) {
        std::vector<std::string> args{"simulate", "--backend", backend, "--replicates", "2000", "--store_snapshots", "0"};
        if (std::string(backend) == "spde_grid") {
            args.push_back("--spacing");
            args.push_back("0.1");
        }
        const Invocation r = invoke(args);
        if (r.code) return failed_run(r);
        const double z = r.summary["max_abs_z"];
        ok = ok && z <= 3.0;
        d += std::string(backend) + " max |z| " + num(z, 3) + "  ";
    }
    return {ok, d + "over Laplace, extinction and duality checks (<= 3)"};
}

Verdict local_time() {
    const Invocation r = invoke({"localtime", "--clusters", "2000"});
    if (r.code) return failed_run(r);
    const double mean_exp = r.summary["mean_fit"]["exponent"];
    const double second_exp = r.summary["second_fit"]["exponent"];
    const double bound = 1.0 - 2.0 * 0.888;
    // the second moment may grow no faster than t^{1 - 2 lambda0} as t decreases
    const bool ok = std::abs(mean_exp + 0.888) <= 0.15 && second_exp >= bound - 0.15;
    return {ok, "mean exponent " + num(mean_exp) + " (-0.888 +- 0.15), second-moment exponent " + num(second_exp) +
                    " (>= " + num(bound - 0.15, 3) + "), stabilization eventually decreasing: " +
                    (r.summary["stabilization"]["eventually_decreasing"].get<bool>() ? "yes" : "no")};
}

Verdict growth() {
    const Invocation r = invoke({"growth"});
    if (r.code) return failed_run(r);
    const double e = r.summary["fit"]["exponent"];
    const double se = r.summary["fit"]["stderr"];
    const double raw = r.summary["raw_fit"]["exponent"];
    return {e >= 1.6 && e <= 2.4, "u exponent " + num(e) + " +- " + num(se) + " over u in [sqrt(eps), 10 sqrt(eps)] (in [1.6, 2.4]); "
                                  "including the eps to the right: " + num(raw)};
}

Verdict left_tail() {
    const Invocation r = invoke({"tail"});
    if (r.code) return failed_run(r);
    bool ok = true;
    std::string d;
    for (const json& t : r.summary["tails"]) {
        const double s = t["fit"]["exponent"];
        const bool mono = t["monotone"];
        ok = ok && s < 0.0 && mono;
        d += "x=" + num(t["x"].get<double>(), 1) + " slope " + num(s) + (mono ? " monotone  " : " not monotone  ");
    }
    return {ok, d + "(slope < 0 and monotone)"};
}

Verdict box_dimension() {
    const Invocation r = invoke({"boxdim", "--clusters", "200"});
    if (r.code) return failed_run(r);
    const double cantor = r.summary["cantor"]["dimension"];
    const double target = std::log(2.0) / std::log(3.0);
    const bool ok = std::abs(cantor - target) <= 0.05 && r.summary["fitted"].get<std::size_t>() >= 200;
    std::string median = "none";
    bool in = false;
    if (!r.summary["median_dimension"].is_null()) {
        const double m = r.summary["median_dimension"];
        median = num(m);
        in = m > 0.05 && m < 0.45;
    }
    return {ok, "Cantor " + num(cantor) + " (" + num(target) + " +- 0.05); report only: median over " +
                    std::to_string(r.summary["fitted"].get<std::size_t>()) + " clusters " + median +
                    (in ? " inside" : " outside") + " (0.05, 0.45)"};
}

Verdict ou_survival() {
    bool ok = true;
    std::string d;
    for (const char* phi : {"G", "F"}) {
        const Invocation r = invoke({"eig", "--phi", phi, "--method", "hermite", "--survival_t", "3", "--mc_samples", "20000"});
        if (r.code) return failed_run(r);
        const json& s = r.summary["survival"];
        const double z = s["z_score"];
        ok = ok && std::abs(z) <= 3.0;
        d += std::string(phi) + ": mc " + num(s["mc_estimate"].get<double>(), 5) + " +- " +
             num(s["mc_stderr"].get<double>(), 5) + " vs leading order " + num(s["prediction"].get<double>(), 5) +
             " (z " + num(z, 2) + "; all stored modes " + num(s["prediction_all_modes"].get<double>(), 5) + ")  ";
    }
    return {ok, d + "(|z| <= 3)"};
}

Verdict determinism() {
    const std::vector<std::vector<std::string>> cases{
        {"solve-f"},
        {"eig", "--phi", "F", "--survival_t", "1", "--mc_samples", "2000", "--seed", "3"},
        {"simulate", "--replicates", "200", "--store_snapshots", "5", "--seed", "4"},
        {"boxdim", "--clusters", "20", "--n_ppum", "2e4", "--spacing", "0.02", "--seed", "5"}};
    std::size_t same = 0;
    std::string d;
    for (const auto& c : cases) {
        std::vector<std::string> a = c, b = c;
        a.insert(a.end(), {"--jobs", "1"});
        b.insert(b.end(), {"--jobs", "2"});
        const Invocation x = invoke(a), y = invoke(b);
        if (x.code || y.code) return failed_run(x.code ? x : y);
        const std::string hx = sbmlab::io::sha256_hex(sbmlab::io::manifest_text(sbmlab::io::read_run(x.dir).first));
        const std::string hy = sbmlab::io::sha256_hex(sbmlab::io::manifest_text(sbmlab::io::read_run(y.dir).first));
        if (hx == hy) ++same;
        d += c[0] + " " + hx.substr(0, 12) + (hx == hy ? " == " : " != ") + hy.substr(0, 12) + "  ";
    }
    return {same == cases.size(), d};
}

}  // namespace

int main() {
    g_root = fs::temp_directory_path() / ("sbmlab-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(g_root);
    fs::create_directories(g_root);

    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"eigenvalue of F/2", eigen_half},
        {"eigenpair of G", eigen_G},
        {"headline lambda0 and dimension", headline},
        {"PDE and ODE routes to G", pde_ode},
        {"simulator closed forms", simulator},
        {"local-time power laws", local_time},
        {"boundary growth", growth},
        {"left tail", left_tail},
        {"box dimension", box_dimension},
        {"OU survival", ou_survival},
        {"determinism", determinism},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Verdict v;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!v.pass) ++failures;
        std::printf("%s %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str(), s);
        std::fflush(stdout);
    }
    std::error_code ec;
    fs::remove_all(g_root, ec);
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures ? 1 : 0;
}
