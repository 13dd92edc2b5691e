#include "sbmlab/io_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include <openssl/evp.h>

#include "sbmlab/errors.hpp"

namespace sbmlab::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw IoError("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> RunManifest::artifact_paths() const {
    std::vector<std::string> p;
    for (const ArtifactEntry& a : artifacts) p.push_back(a.path);
    return p;
}

std::string compute_run_id(const json& config, std::uint64_t seed, const std::string& tool_version) {
    const json key = {{"config", config}, {"seed", seed}, {"tool_version", tool_version}};
    return sha256_hex(key.dump()).substr(0, 16);
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

std::string manifest_text(const RunManifest& m) {
    json j = m.extra.is_object() ? m.extra : json::object();
    json arts = json::array();
    for (const ArtifactEntry& a : m.artifacts) arts.push_back({{"path", a.path}, {"sha256", a.sha256}, {"size", a.size}});
    j["artifacts"] = arts;
    j["config"] = m.config;
    j["run_id"] = m.run_id;
    j["seed"] = m.seed;
    j["tool_version"] = m.tool_version;
    return json_text(j);
}

namespace {

std::size_t key_offset(const std::string& text, const std::string& key) {
    const auto p = text.find("\"" + key + "\"");
    return p == std::string::npos ? text.size() : p;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + p.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) throw IoError("short write to " + p.string());
}

bool safe_name(const std::string& name) {
    return !name.empty() && name != "manifest.json" && name.find('/') == std::string::npos &&
           name.find('\\') == std::string::npos && name[0] != '.';
}

class DirLock {
public:
    explicit DirLock(const fs::path& p) {
        fd_ = ::open(p.c_str(), O_RDWR | O_CREAT, 0644);
        if (fd_ < 0 || ::flock(fd_, LOCK_EX) != 0) {
            if (fd_ >= 0) ::close(fd_);
            throw IoError("cannot lock " + p.string());
        }
    }
    ~DirLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    int fd_ = -1;
};

}  // namespace

RunManifest parse_manifest(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw CorruptManifest(std::string("manifest is not valid JSON: ") + e.what(), e.byte > 0 ? e.byte - 1 : 0);
    }
    if (!j.is_object()) throw CorruptManifest("manifest is not a JSON object", 0);
    RunManifest m;
    auto need = [&](const char* key, auto check) -> const json& {
        if (!j.contains(key) || !check(j[key])) throw CorruptManifest(std::string("manifest field '") + key + "' missing or malformed", key_offset(text, key));
        return j[key];
    };
    m.run_id = need("run_id", [](const json& v) { return v.is_string(); }).get<std::string>();
    m.config = need("config", [](const json& v) { return v.is_object(); });
    m.seed = need("seed", [](const json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0); }).get<std::uint64_t>();
    m.tool_version = need("tool_version", [](const json& v) { return v.is_string(); }).get<std::string>();
    for (const json& a : need("artifacts", [](const json& v) { return v.is_array(); })) {
        if (!a.is_object() || !a.contains("path") || !a["path"].is_string() || !a.contains("sha256") ||
            !a["sha256"].is_string() || !a.contains("size") || !a["size"].is_number_unsigned()) {
            throw CorruptManifest("malformed artifact entry", key_offset(text, "artifacts"));
        }
        m.artifacts.push_back({a["path"].get<std::string>(), a["sha256"].get<std::string>(), a["size"].get<std::size_t>()});
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() != "run_id" && it.key() != "config" && it.key() != "seed" && it.key() != "tool_version" &&
            it.key() != "artifacts") {
            m.extra[it.key()] = it.value();
        }
    }
    if (m.run_id != compute_run_id(m.config, m.seed, m.tool_version)) {
        throw CorruptManifest("run_id does not match the config hash", key_offset(text, "run_id"));
    }
    return m;
}

fs::path write_run(const fs::path& root, RunManifest& m, const Artifacts& artifacts) {
    m.run_id = compute_run_id(m.config, m.seed, m.tool_version);
    m.artifacts.clear();
    for (const auto& [name, bytes] : artifacts) {
        if (!safe_name(name)) throw InvalidArgument("artifact name '" + name + "' is not a plain file name");
        m.artifacts.push_back({name, sha256_hex(bytes), bytes.size()});
    }
    const std::string text = manifest_text(m);
    const fs::path runs = root / "runs";
    std::error_code ec;
    fs::create_directories(runs, ec);
    if (ec) throw IoError("cannot create " + runs.string() + ": " + ec.message());
    const fs::path final_dir = runs / m.run_id;

    DirLock lock(runs / (m.run_id + ".lock"));
    if (fs::exists(final_dir)) {
        bool same = false;
        try {
            const auto [old, old_artifacts] = read_run(final_dir);
            same = manifest_text(old) == text && old_artifacts == artifacts;
        } catch (const CorruptManifest&) {
            same = false;
        }
        if (!same) throw CollisionError("run " + m.run_id + " already exists with different content");
        return final_dir;
    }
    const fs::path tmp = runs / (".tmp-" + m.run_id + "-" + std::to_string(::getpid()));
    fs::remove_all(tmp, ec);
    fs::create_directory(tmp, ec);
    if (ec) throw IoError("cannot create " + tmp.string() + ": " + ec.message());
    try {
        for (const auto& [name, bytes] : artifacts) write_file(tmp / name, bytes);
        write_file(tmp / "manifest.json", text);
        fs::rename(tmp, final_dir);
    } catch (const fs::filesystem_error& e) {
        fs::remove_all(tmp, ec);
        throw IoError(std::string("cannot publish run: ") + e.what());
    } catch (...) {
        fs::remove_all(tmp, ec);
        throw;
    }
    return final_dir;
}

std::pair<RunManifest, Artifacts> read_run(const fs::path& run_dir) {
    const fs::path mp = run_dir / "manifest.json";
    if (!fs::exists(mp)) throw IoError("no manifest.json in " + run_dir.string());
    RunManifest m = parse_manifest(read_file(mp));
    Artifacts arts;
    for (const ArtifactEntry& a : m.artifacts) {
        const fs::path p = run_dir / a.path;
        if (!safe_name(a.path) || !fs::exists(p)) throw CorruptManifest("artifact '" + a.path + "' is missing", 0);
        std::string bytes = read_file(p);
        if (bytes.size() != a.size) {
            throw CorruptManifest("artifact '" + a.path + "' has " + std::to_string(bytes.size()) + " bytes, expected " +
                                      std::to_string(a.size),
                                  std::min(bytes.size(), a.size));
        }
        if (sha256_hex(bytes) != a.sha256) throw CorruptManifest("artifact '" + a.path + "' fails its hash check", 0);
        if (a.path.size() > 4 && a.path.ends_with(".csv")) {
            if (bytes.starts_with("# sbmlab-grid")) parse_grid_csv(bytes);
            else if (bytes.starts_with("# sbmlab-table")) parse_table_csv(bytes);
        }
        arts.emplace(a.path, std::move(bytes));
    }
    return {std::move(m), std::move(arts)};
}

namespace {

std::string header_token(std::string s) {
    for (char& c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '=') c = '_';
    }
    return s.empty() ? "_" : s;
}

// Line-oriented reader that remembers byte offsets for error reports.
struct LineReader {
    const std::string& text;
    std::size_t pos = 0;

    bool next(std::string_view& line, std::size_t& offset) {
        if (pos >= text.size()) return false;
        const auto nl = text.find('\n', pos);
        if (nl == std::string::npos) throw CorruptManifest("unterminated line", pos);
        offset = pos;
        line = std::string_view(text).substr(pos, nl - pos);
        pos = nl + 1;
        return true;
    }
};

std::map<std::string, std::string> header_fields(std::string_view line, std::string_view magic, std::size_t offset) {
    if (!line.starts_with(magic)) throw CorruptManifest("missing '" + std::string(magic) + "' header", offset);
    std::map<std::string, std::string> kv;
    std::istringstream ss{std::string(line.substr(magic.size()))};
    std::string tok;
    while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw CorruptManifest("malformed header token '" + tok + "'", offset);
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

double parse_number(std::string_view s, std::size_t offset) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw CorruptManifest("malformed number '" + std::string(s) + "'", offset);
    }
    return v;
}

std::vector<double> parse_row(std::string_view line, std::size_t offset, std::size_t columns) {
    std::vector<double> row;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        const auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        row.push_back(parse_number(field, offset + start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (row.size() != columns) throw CorruptManifest("expected " + std::to_string(columns) + " columns", offset);
    return row;
}

}  // namespace

std::string grid_csv(const GridFunction& f, const std::string& run_id) {
    std::string s = "# sbmlab-grid v1 label=" + header_token(f.label()) + " x_min=" + format_double(f.x_min()) +
                    " x_max=" + format_double(f.x_max()) + " n_points=" + std::to_string(f.size()) +
                    " run_id=" + header_token(run_id) + "\nx,value\n";
    for (std::size_t i = 0; i < f.size(); ++i) {
        s += format_double(f.x(i));
        s += ',';
        s += format_double(f[i]);
        s += '\n';
    }
    return s;
}

GridFunction parse_grid_csv(const std::string& text, std::string* run_id) {
    LineReader r{text};
    std::string_view line;
    std::size_t off = 0;
    if (!r.next(line, off)) throw CorruptManifest("empty grid CSV", 0);
    const auto kv = header_fields(line, "# sbmlab-grid v1", off);
    for (const char* key : {"label", "x_min", "x_max", "n_points", "run_id"}) {
        if (!kv.count(key)) throw CorruptManifest(std::string("grid header lacks ") + key, off);
    }
    const double x_min = parse_number(kv.at("x_min"), off), x_max = parse_number(kv.at("x_max"), off);
    const double n_d = parse_number(kv.at("n_points"), off);
    if (!(n_d >= 2) || n_d != std::floor(n_d)) throw CorruptManifest("bad n_points", off);
    const auto n = static_cast<std::size_t>(n_d);
    if (!r.next(line, off) || line != "x,value") throw CorruptManifest("missing 'x,value' column line", off);
    std::vector<double> values;
    values.reserve(n);
    while (values.size() < n) {
        if (!r.next(line, off)) throw CorruptManifest("grid CSV truncated after " + std::to_string(values.size()) + " rows", text.size());
        values.push_back(parse_row(line, off, 2)[1]);
    }
    if (r.pos != text.size()) throw CorruptManifest("trailing data after the last grid row", r.pos);
    if (run_id) *run_id = kv.at("run_id");
    if (!(x_max > x_min)) throw CorruptManifest("bad grid range", 0);
    return GridFunction(x_min, x_max, std::move(values), kv.at("label"));
}

std::string table_csv(const std::string& label, const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows, const std::string& run_id) {
    std::string s = "# sbmlab-table v1 label=" + header_token(label) + " n_rows=" + std::to_string(rows.size()) +
                    " run_id=" + header_token(run_id) + "\n";
    for (std::size_t c = 0; c < columns.size(); ++c) s += (c ? "," : "") + header_token(columns[c]);
    s += '\n';
    for (const auto& row : rows) {
        if (row.size() != columns.size()) throw InvalidArgument("table row width does not match the columns");
        for (std::size_t c = 0; c < row.size(); ++c) s += (c ? "," : "") + format_double(row[c]);
        s += '\n';
    }
    return s;
}

Table parse_table_csv(const std::string& text) {
    LineReader r{text};
    std::string_view line;
    std::size_t off = 0;
    if (!r.next(line, off)) throw CorruptManifest("empty table CSV", 0);
    const auto kv = header_fields(line, "# sbmlab-table v1", off);
    if (!kv.count("n_rows") || !kv.count("label")) throw CorruptManifest("table header lacks n_rows or label", off);
    const double rows_d = parse_number(kv.at("n_rows"), off);
    Table t;
    t.label = kv.at("label");
    if (!r.next(line, off)) throw CorruptManifest("missing column line", text.size());
    std::string cols(line);
    std::istringstream cs(cols);
    for (std::string c; std::getline(cs, c, ',');) t.columns.push_back(c);
    while (static_cast<double>(t.rows.size()) < rows_d) {
        if (!r.next(line, off)) throw CorruptManifest("table CSV truncated after " + std::to_string(t.rows.size()) + " rows", text.size());
        t.rows.push_back(parse_row(line, off, t.columns.size()));
    }
    if (r.pos != text.size()) throw CorruptManifest("trailing data after the last table row", r.pos);
    return t;
}

}  // namespace sbmlab::io
