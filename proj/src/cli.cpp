#include "darnwalk/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "darnwalk/diffusion.hpp"
#include "darnwalk/errors.hpp"
#include "darnwalk/format.hpp"
#include "darnwalk/geometry.hpp"
#include "darnwalk/harmonic.hpp"
#include "darnwalk/io.hpp"
#include "darnwalk/measures.hpp"

namespace darnwalk::cli {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i)
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return hex.str();
}

namespace {

constexpr const char* tool_version = "0.1.0";

// RFC 4180 table: header row, CRLF line ends, quoted fields where needed.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : width_(header.size()) { rows_.push_back(std::move(header)); }

    void add(std::vector<std::string> row)
    {
        row.resize(width_);
        rows_.push_back(std::move(row));
    }

    std::string str() const
    {
        std::string s;
        for (const auto& row : rows_) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i)
                    s += ',';
                s += quote(row[i]);
            }
            s += "\r\n";
        }
        return s;
    }

private:
    static std::string quote(const std::string& field)
    {
        if (field.find_first_of(",\"\r\n") == std::string::npos)
            return field;
        std::string q = "\"";
        for (char c : field) {
            if (c == '"')
                q += '"';
            q += c;
        }
        return q + '"';
    }

    std::size_t width_;
    std::vector<std::vector<std::string>> rows_;
};

std::string num(double x) { return format_number(x); }
std::string num(std::size_t x) { return std::to_string(x); }

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

double parse_double(const std::string& s, const std::string& what)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("bad number for " + what + ": '" + s + "'");
    }
}

Vec parse_vector(const std::string& s, const std::string& what)
{
    Vec v;
    for (const auto& part : split(s, ','))
        v.push_back(parse_double(part, what));
    return v;
}

/// "x0" or "<component>:<x1>,<x2>,...".
DarnedState parse_point(const std::string& s)
{
    if (s == "x0")
        return DarnedState::darned();
    const auto colon = s.find(':');
    if (colon == std::string::npos)
        throw ParseError("point must be 'x0' or 'component:x1,x2,...', got '" + s + "'");
    int component = 0;
    try {
        component = std::stoi(s.substr(0, colon));
    } catch (const std::exception&) {
        throw ParseError("bad component in point '" + s + "'");
    }
    return DarnedState::at(component, parse_vector(s.substr(colon + 1), "point"));
}

std::string point_text(const DarnedState& x)
{
    if (x.is_darned())
        return "x0";
    std::string s = std::to_string(x.component()) + ":";
    for (std::size_t i = 0; i < x.position().size(); ++i)
        s += (i ? "," : "") + num(x.position()[i]);
    return s;
}

Json point_json(const DarnedState& x)
{
    if (x.is_darned())
        return Json{{"component", -1}, {"point", Json::array()}};
    return Json{{"component", x.component()}, {"point", x.position()}};
}

// Options shared by every simulation command.
struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::size_t samples = 10000;
    std::string out_dir;
    unsigned threads = Exec::default_threads();
    std::optional<double> r0;
};

struct DomainArgs {
    std::string kind = "Ut";
    double t = 0.5;
    std::vector<double> levels;
    std::size_t shell = 0;
    int component = 0;
    std::vector<double> center;
    double radius = 1.0;
};

void add_common(CLI::App* sub, Common& c, bool samples = true)
{
    sub->add_option("--config", c.config_path, "configuration JSON")->required();
    sub->add_option("--seed", c.seed, "64-bit seed (default: $DARNWALK_SEED, else 0)");
    if (samples)
        sub->add_option("--samples", c.samples, "Monte Carlo samples")->capture_default_str();
    sub->add_option("--out", c.out_dir, "directory for result files and the run manifest");
    sub->add_option("--threads", c.threads, "worker threads (results do not depend on it)");
    sub->add_option("--r0", c.r0, "resurrection level (default from the configuration)");
}

void add_domain(CLI::App* sub, DomainArgs& d, const std::string& prefix = "")
{
    sub->add_option("--" + prefix + "domain", d.kind, "Ut | darned | annulus | ball")->capture_default_str();
    sub->add_option("--" + prefix + "t", d.t, "level t for Ut and annulus")->capture_default_str();
    sub->add_option("--" + prefix + "levels", d.levels, "per-shell levels for darned")->delimiter(',');
    sub->add_option("--" + prefix + "shell", d.shell, "shell index for annulus");
    sub->add_option("--" + prefix + "component", d.component, "component of a ball");
    sub->add_option("--" + prefix + "center", d.center, "ball center")->delimiter(',');
    sub->add_option("--" + prefix + "radius", d.radius, "ball radius");
}

Domain make_domain(const Configuration& config, const DomainArgs& d)
{
    if (d.kind == "Ut")
        return Domain::darned_neighborhood(config, d.t);
    if (d.kind == "darned")
        return Domain::darned(config, d.levels);
    if (d.kind == "annulus")
        return Domain::annulus(config, d.shell, d.t);
    if (d.kind == "ball")
        return Domain::ball(config, d.component, d.center, d.radius);
    throw ParseError("unknown domain kind '" + d.kind + "'");
}

Json domain_json(const DomainArgs& d)
{
    Json j{{"kind", d.kind}};
    if (d.kind == "Ut" || d.kind == "annulus")
        j["t"] = d.t;
    if (d.kind == "darned")
        j["levels"] = d.levels;
    if (d.kind == "annulus")
        j["shell"] = d.shell;
    if (d.kind == "ball") {
        j["component"] = d.component;
        j["center"] = d.center;
        j["radius"] = d.radius;
    }
    return j;
}

std::vector<BoundarySet> boundary_sets(const Configuration& config, const Domain& domain)
{
    std::vector<BoundarySet> sets;
    if (domain.kind() == Domain::Kind::ball) {
        const Vec c = domain.center();
        const double r = domain.radius();
        const int comp = domain.component();
        sets.push_back({"sphere", std::nullopt, [c, r, comp](const DarnedState& x) {
                            return !x.is_darned() && x.component() == comp &&
                                   std::abs(distance(x.position(), c) - r) <= 1e-9 * r;
                        }});
        return sets;
    }
    for (std::size_t j = 0; j < config.shell_count(); ++j)
        sets.push_back(level_sphere_set(config, j));
    sets.push_back(darned_point_set());
    return sets;
}

Json kernel_json(const KernelEstimate& k)
{
    Json entries = Json::array();
    for (const auto& e : k.entries)
        entries.push_back({{"label", e.label}, {"mass", e.mass}, {"std_error", e.std_error}});
    return Json{{"entries", entries}, {"n_samples", k.n_samples}, {"total", k.total()}};
}

// One command invocation: its parameters, its results, and where they go.
class Run {
public:
    Run(std::string command, const Common& common, std::ostream& out)
        : command_(std::move(command)), common_(common), out_(out), start_(std::chrono::steady_clock::now())
    {
        if (common.seed) {
            seed_ = *common.seed;
        } else if (const char* env = std::getenv("DARNWALK_SEED")) {
            try {
                std::size_t used = 0;
                seed_ = std::stoull(env, &used);
                if (used != std::string(env).size())
                    throw std::invalid_argument(env);
            } catch (const std::exception&) {
                throw ParseError(std::string("DARNWALK_SEED is not an unsigned integer: '") + env + "'");
            }
        }
        config_text_ = read_text(common.config_path);
        Json doc;
        try {
            doc = Json::parse(config_text_);
        } catch (const Json::parse_error& e) {
            throw ParseError(common.config_path + ": " + e.what());
        }
        document_.emplace(parse_config(doc));
        params_["seed"] = seed_;
    }

    const Configuration& config() const { return document_->config; }
    const ConfigDocument& document() const { return *document_; }
    std::uint64_t seed() const { return seed_; }
    StreamKey key() const { return StreamKey(seed_).derive(command_); }
    Exec exec() const { return Exec{std::max(1u, common_.threads)}; }
    Json& params() { return params_; }

    double r0() const { return common_.r0.value_or(config().defaults().r0); }
    SphereMeasure sigma_r0() const { return SphereMeasure::parametric(config(), r0(), config().weights()); }

    void count_samples(const std::string& op, std::size_t n) { samples_[op] = samples_.value(op, std::size_t{0}) + n; }

    /// Adds the common envelope to `result` and writes or prints it.
    void finish(Json result, const std::optional<CsvTable>& table, const std::vector<std::string>& summary)
    {
        Json inputs{{"command", command_}, {"config", config_to_json(config())}, {"parameters", params_}};
        Json envelope{{"command", command_}, {"inputs_digest", sha256_hex(inputs.dump())}, {"seed", seed_}};
        envelope.update(result);
        const std::string json_text = envelope.dump(2) + "\n";
        if (common_.out_dir.empty()) {
            out_ << json_text;
            return;
        }
        fs::create_directories(common_.out_dir);
        write_file(command_ + ".json", json_text);
        if (table)
            write_file(command_ + ".csv", table->str());
        write_manifest();
        for (const auto& line : summary)
            out_ << line << "\n";
        out_ << "results: " << (fs::path(common_.out_dir) / (command_ + ".json")).string() << "\n";
    }

    /// Writes an extra result file (path relative to --out unless absolute).
    void write_file(const std::string& name, const std::string& text)
    {
        const fs::path path = fs::path(name).is_absolute() || common_.out_dir.empty()
                                  ? fs::path(name)
                                  : fs::path(common_.out_dir) / name;
        if (path.has_parent_path())
            fs::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::binary);
        if (!f)
            throw IoError("cannot write " + path.string());
        f << text;
        if (!f)
            throw IoError("write failed for " + path.string());
        files_.push_back({name, sha256_hex(text)});
    }

private:
    static std::string read_text(const std::string& path)
    {
        std::ifstream f(path, std::ios::binary);
        if (!f)
            throw IoError("cannot read " + path);
        std::ostringstream s;
        s << f.rdbuf();
        return s.str();
    }

    void write_manifest()
    {
        Json results = Json::array();
        std::string all;
        for (const auto& [path, digest] : files_) {
            results.push_back({{"file", path}, {"sha256", digest}});
            all += digest;
        }
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        Json manifest{{"tool", "darnwalk"},
                      {"version", tool_version},
                      {"command", command_},
                      {"config_path", common_.config_path},
                      {"config_digest", sha256_hex(config_text_)},
                      {"seed", seed_},
                      {"parameters", params_},
                      {"samples", samples_},
                      {"threads", common_.threads},
                      {"results", results},
                      {"results_digest", sha256_hex(all)},
                      {"wall_clock_seconds", wall}};
        const fs::path path = fs::path(common_.out_dir) / "manifest.json";
        std::ofstream f(path, std::ios::binary);
        if (!f)
            throw IoError("cannot write " + path.string());
        f << manifest.dump(2) << "\n";
    }

    std::string command_;
    const Common& common_;
    std::ostream& out_;
    std::chrono::steady_clock::time_point start_;
    std::uint64_t seed_ = 0;
    std::string config_text_;
    std::optional<ConfigDocument> document_;
    Json params_ = Json::object();
    Json samples_ = Json::object();
    std::vector<std::pair<std::string, std::string>> files_;
};

std::string orientation_text(Orientation o) { return o == Orientation::outward ? "outward" : "inward"; }

int cmd_validate(const Common& common, std::ostream& out)
{
    Run run("validate", common, out);
    const Configuration& config = run.config();
    const CompactDescription compact = run.document().compact.value_or(implied_compact(config));
    const StabilityReport stability = classify_stability(compact);

    out << "shells:\n";
    out << "  index component dim orientation inner_radius outer_radius weight\n";
    double sum = 0.0;
    for (std::size_t j = 0; j < config.shell_count(); ++j) {
        const Shell& s = config.shell(j);
        sum += config.weights()[j];
        out << "  " << j << " " << s.component << " " << s.dim << " " << orientation_text(s.orientation) << " "
            << num(s.k_radius) << " " << num(s.w_radius) << " " << num(config.weights()[j]) << "\n";
    }
    out << "weight_sum: " << num(sum) << "\n";
    out << "hole_count: " << stability.hole_count << "\n";
    out << "strongly_stable: " << (stability.strongly_stable ? "true" : "false") << "\n";
    return ok;
}

int cmd_gfun(const Common& common, std::size_t points, std::ostream& out)
{
    Run run("gfun", common, out);
    run.params()["points"] = points;
    if (points < 2)
        throw PreconditionError("gfun needs at least two points per shell");
    const Configuration& config = run.config();
    CsvTable table({"shell", "rho", "g"});
    Json shells = Json::array();
    for (std::size_t j = 0; j < config.shell_count(); ++j) {
        const Shell& s = config.shell(j);
        Json radii = Json::array(), values = Json::array();
        for (std::size_t i = 0; i < points; ++i) {
            const double rho = s.k_radius + (s.w_radius - s.k_radius) * static_cast<double>(i) /
                                                static_cast<double>(points - 1);
            const double g = radial_g(s, rho);
            radii.push_back(rho);
            values.push_back(g);
            table.add({num(j), num(rho), num(g)});
        }
        shells.push_back({{"index", j}, {"rho", radii}, {"g", values}});
    }
    run.finish({{"shells", shells}}, table, {"shells: " + std::to_string(config.shell_count())});
    return ok;
}

int cmd_stability(const Common& common, std::ostream& out)
{
    Run run("stability", common, out);
    const bool explicit_compact = run.document().compact.has_value();
    const CompactDescription compact = run.document().compact.value_or(implied_compact(run.config()));
    const StabilityReport report = classify_stability(compact);
    Json per = Json::array();
    CsvTable table({"component", "holes"});
    for (const auto& [comp, holes] : report.holes_per_component) {
        per.push_back({{"component", comp}, {"holes", holes}});
        table.add({std::to_string(comp), num(holes)});
    }
    run.finish({{"compact", compact_to_json(compact)},
                {"compact_source", explicit_compact ? "config" : "implied"},
                {"hole_count", report.hole_count},
                {"holes_per_component", per},
                {"strongly_stable", report.strongly_stable}},
               table,
               {"hole_count: " + std::to_string(report.hole_count),
                std::string("strongly_stable: ") + (report.strongly_stable ? "true" : "false")});
    return ok;
}

int cmd_kernel(const Common& common, const DomainArgs& dargs, const std::string& from, std::ostream& out)
{
    Run run("kernel", common, out);
    run.params()["domain"] = domain_json(dargs);
    run.params()["from"] = from;
    run.params()["samples"] = common.samples;
    run.params()["r0"] = run.r0();
    const Configuration& config = run.config();
    const Domain domain = make_domain(config, dargs);
    const DarnedState x = parse_point(from);
    const KernelEstimate k = estimate_exit_kernel(config, run.sigma_r0(), domain, x, boundary_sets(config, domain),
                                                  common.samples, run.key(), run.exec());
    run.count_samples("estimate_exit_kernel", common.samples);

    CsvTable table({"label", "mass", "std_error"});
    std::vector<std::string> summary;
    for (const auto& e : k.entries) {
        table.add({e.label, num(e.mass), num(e.std_error)});
        summary.push_back(e.label + ": " + num(e.mass) + " +- " + num(e.std_error));
    }
    run.finish({{"domain", domain.describe()}, {"from", point_json(x)}, {"kernel", kernel_json(k)}}, table, summary);
    return ok;
}

std::vector<std::pair<double, double>> parse_pairs(const std::vector<std::string>& specs)
{
    std::vector<std::pair<double, double>> pairs;
    for (const auto& spec : specs) {
        const auto parts = split(spec, ':');
        if (parts.size() != 2)
            throw ParseError("pair must be r:t, got '" + spec + "'");
        pairs.emplace_back(parse_double(parts[0], "pair"), parse_double(parts[1], "pair"));
    }
    return pairs;
}

MeasureFamily load_family(const Run& run, const std::string& path)
{
    if (path.empty())
        return make_parametric_family(run.config(), run.config().weights());
    return family_from_json(run.config(), read_json_file(path));
}

Json compat_json(const CompatibilityReport& report, CsvTable& table)
{
    Json pairs = Json::array();
    for (const auto& p : report.pairs) {
        Json shells = Json::array();
        for (const auto& s : p.shells) {
            shells.push_back({{"shell", s.shell},
                              {"expected", s.expected},
                              {"observed", s.observed},
                              {"std_error", s.std_error},
                              {"z", s.z}});
            table.add({num(p.r), num(p.t), num(s.shell), num(s.expected), num(s.observed), num(s.std_error),
                       num(s.z), num(p.energy_statistic), num(p.energy_p_value), p.pass ? "true" : "false"});
        }
        pairs.push_back({{"r", p.r},
                         {"t", p.t},
                         {"outer_mass", p.outer_mass},
                         {"outer_mass_expected", p.r / p.t},
                         {"outer_std_error", p.outer_std_error},
                         {"shells", shells},
                         {"statistic", p.max_abs_z},
                         {"energy_statistic", p.energy_statistic},
                         {"p_value", p.energy_p_value},
                         {"mass_pass", p.mass_pass},
                         {"angular_pass", p.angular_pass},
                         {"pass", p.pass}});
    }
    return pairs;
}

int cmd_compat(const Common& common, const std::vector<std::string>& pair_specs, const std::string& family_path,
               std::ostream& out)
{
    Run run("compat", common, out);
    const auto pairs = parse_pairs(pair_specs);
    run.params()["pairs"] = pair_specs;
    run.params()["family"] = family_path;
    run.params()["samples"] = common.samples;
    const MeasureFamily family = load_family(run, family_path);
    const CompatibilityReport report =
        check_compatibility(run.config(), family, pairs, common.samples, run.key(), run.exec());
    run.count_samples("check_compatibility", common.samples * pairs.size());

    CsvTable table({"r", "t", "shell", "expected", "observed", "std_error", "z", "energy_statistic", "p_value",
                    "pass"});
    Json pairs_json = compat_json(report, table);
    std::vector<std::string> summary;
    for (const auto& p : report.pairs)
        summary.push_back(num(p.r) + ":" + num(p.t) + " outer_mass " + num(p.outer_mass) + " +- " +
                          num(p.outer_std_error) + " max|z| " + num(p.max_abs_z) + " p " + num(p.energy_p_value) +
                          (p.pass ? " pass" : " fail"));
    summary.push_back(std::string("pass: ") + (report.pass ? "true" : "false"));
    run.finish({{"test", "compatibility"}, {"pairs", pairs_json}, {"pass", report.pass}}, table, summary);
    return ok;
}

struct WeakArgs {
    std::vector<double> etas;
    std::string exponents = "3..8";
    std::string nu = "dirac";
    std::size_t nu_shell = 0;
    std::vector<double> direction;
    std::vector<double> targets{0.5};
    std::vector<std::string> check_pairs;
};

std::vector<double> weak_levels(const WeakArgs& w)
{
    if (!w.etas.empty())
        return w.etas;
    const auto parts = split(w.exponents, '.');
    // "a..b" splits into {a, "", b}
    if (parts.size() != 3 || !parts[1].empty())
        throw ParseError("exponent range must be a..b, got '" + w.exponents + "'");
    const int a = static_cast<int>(parse_double(parts[0], "exponent")),
              b = static_cast<int>(parse_double(parts[2], "exponent"));
    if (a > b || a < 1)
        throw ParseError("bad exponent range '" + w.exponents + "'");
    std::vector<double> etas;
    for (int n = a; n <= b; ++n)
        etas.push_back(std::ldexp(1.0, -n));
    return etas;
}

int cmd_weaklimit(const Common& common, const WeakArgs& w, std::ostream& out)
{
    Run run("weaklimit", common, out);
    const Configuration& config = run.config();
    const std::vector<double> etas = weak_levels(w);
    run.params()["etas"] = etas;
    run.params()["nu"] = w.nu;
    run.params()["targets"] = w.targets;
    run.params()["samples"] = common.samples;
    run.params()["check_pairs"] = w.check_pairs;

    std::vector<SphereMeasure> nus;
    for (double eta : etas) {
        if (w.nu == "uniform") {
            nus.push_back(SphereMeasure::parametric(config, eta, config.weights()));
        } else if (w.nu == "dirac") {
            if (w.nu_shell >= config.shell_count())
                throw PreconditionError("no shell " + std::to_string(w.nu_shell));
            const Shell& s = config.shell(w.nu_shell);
            Vec dir = w.direction.empty() ? Vec(s.center.size(), 0.0) : Vec(w.direction);
            if (w.direction.empty())
                dir[0] = 1.0;
            if (dir.size() != s.center.size())
                throw PreconditionError("direction has the wrong dimension");
            const double n = norm(dir);
            if (!(n > 0.0))
                throw PreconditionError("direction must be nonzero");
            const double rho = level_radius(s, eta);
            Vec p(dir.size());
            for (std::size_t k = 0; k < p.size(); ++k)
                p[k] = s.center[k] + rho * dir[k] / n;
            nus.push_back(SphereMeasure::empirical(config, eta, {{w.nu_shell, p, 1.0}}));
        } else {
            throw ParseError("nu must be dirac or uniform");
        }
    }
    if (w.nu == "dirac") {
        run.params()["nu_shell"] = w.nu_shell;
        run.params()["direction"] = w.direction;
    }

    const WeakLimitResult result = weak_limit_family(config, etas, nus, w.targets, common.samples,
                                                     run.key().derive("family"), run.exec());
    run.count_samples("weak_limit_family", common.samples * etas.size() * w.targets.size());

    CsvTable table({"r", "k", "eta", "walks", "outer", "mass", "mass_std_error", "distance_to_next",
                    "distance_std_error", "pairs"});
    Json levels = Json::array();
    std::vector<std::string> summary;
    for (const auto& level : result.levels) {
        Json iterates = Json::array();
        for (std::size_t k = 0; k < level.iterates.size(); ++k) {
            const auto& it = level.iterates[k];
            iterates.push_back({{"eta", it.eta},
                                {"walks", it.walks},
                                {"outer", it.outer},
                                {"mass", it.mass},
                                {"mass_std_error", it.mass_std_error}});
            const bool has_next = k < level.successive_distances.size();
            table.add({num(level.r), num(k), num(it.eta), num(it.walks), num(it.outer), num(it.mass),
                       num(it.mass_std_error), has_next ? num(level.successive_distances[k]) : "",
                       has_next ? num(level.distance_std_errors[k]) : "",
                       has_next ? num(level.paired_counts[k]) : ""});
        }
        levels.push_back({{"r", level.r},
                          {"iterates", iterates},
                          {"successive_distances", level.successive_distances},
                          {"distance_std_errors", level.distance_std_errors},
                          {"paired_counts", level.paired_counts}});
        std::string d = "r " + num(level.r) + " distances";
        for (double x : level.successive_distances)
            d += " " + num(x);
        summary.push_back(d);
    }
    Json payload{{"levels", levels}, {"family", family_to_json(result.family)}};
    if (!w.check_pairs.empty()) {
        const auto pairs = parse_pairs(w.check_pairs);
        const CompatibilityReport report = check_compatibility(config, result.family, pairs, common.samples,
                                                               run.key().derive("compat"), run.exec());
        run.count_samples("check_compatibility", common.samples * pairs.size());
        CsvTable unused({"r"});
        payload["compatibility"] = {{"pairs", compat_json(report, unused)}, {"pass", report.pass}};
        summary.push_back(std::string("compatibility pass: ") + (report.pass ? "true" : "false"));
    }
    run.finish(payload, table, summary);
    return ok;
}

std::string indexed_path(const std::string& path, std::size_t i, std::size_t runs)
{
    if (runs <= 1)
        return path;
    const fs::path p(path);
    return (p.parent_path() / (p.stem().string() + "_" + std::to_string(i) + p.extension().string())).string();
}

int cmd_simulate(const Common& common, const DomainArgs& dargs, const std::string& from, const std::string& mode,
                 std::size_t runs, const std::string& traj, std::ostream& out)
{
    Run run("simulate", common, out);
    run.params()["domain"] = domain_json(dargs);
    run.params()["from"] = from;
    run.params()["mode"] = mode;
    run.params()["runs"] = runs;
    run.params()["traj"] = traj;
    run.params()["r0"] = run.r0();
    if (mode != "exit" && mode != "time")
        throw ParseError("mode must be exit or time");
    const Configuration& config = run.config();
    const Domain domain = make_domain(config, dargs);
    const DarnedState x = parse_point(from);
    const SphereMeasure sigma = run.sigma_r0();

    struct One {
        ExitResult result;
        DarnedPath path;
    };
    const StreamKey key = run.key();
    const bool timed = mode == "time";
    auto results = parallel_map<One>(runs, run.exec(), [&](std::size_t i) {
        One one;
        one.path.r0 = run.r0();
        one.path.mode = timed ? "time-resolved" : "exit-law";
        one.path.seed = run.seed();
        SimulationOptions options;
        options.accumulate_time = timed;
        if (!traj.empty())
            options.path = &one.path;
        Stream rng = key.stream(i);
        one.result = simulate_exit(config, sigma, x, domain, rng, options);
        return one;
    });
    run.count_samples("simulate_exit", runs);

    CsvTable table({"run", "exit", "elapsed", "steps", "resurrections"});
    Json list = Json::array();
    for (std::size_t i = 0; i < runs; ++i) {
        const ExitResult& r = results[i].result;
        Json e{{"run", i},
               {"exit", point_json(r.exit)},
               {"steps", r.steps},
               {"resurrections", r.resurrections}};
        if (timed)
            e["elapsed"] = r.elapsed;
        list.push_back(e);
        table.add({num(i), point_text(r.exit), timed ? num(r.elapsed) : "", num(r.steps), num(r.resurrections)});
        if (!traj.empty()) {
            std::ostringstream csv;
            write_trajectory_csv(csv, results[i].path, config.max_dim());
            run.write_file(indexed_path(traj, i, runs), csv.str());
        }
    }
    run.finish({{"domain", domain.describe()}, {"from", point_json(x)}, {"mode", mode}, {"runs", list}}, table,
               {"runs: " + std::to_string(runs)});
    return ok;
}

int cmd_ptime(const Common& common, const DomainArgs& dargs, const std::vector<std::string>& point_specs,
              std::ostream& out)
{
    Run run("ptime", common, out);
    run.params()["domain"] = domain_json(dargs);
    run.params()["points"] = point_specs;
    run.params()["samples"] = common.samples;
    run.params()["r0"] = run.r0();
    const Configuration& config = run.config();
    const Domain domain = make_domain(config, dargs);
    std::vector<DarnedState> starts;
    for (const auto& s : point_specs)
        starts.push_back(parse_point(s));
    if (starts.empty())
        throw PreconditionError("ptime needs at least one --point");
    SimulationOptions options;
    options.accumulate_time = true;
    const auto estimates =
        estimate_p_V(config, run.sigma_r0(), domain, starts, common.samples, run.key(), run.exec(), options);
    run.count_samples("estimate_p_V", common.samples * starts.size());

    CsvTable table({"point", "mean", "std_error", "n_samples"});
    Json list = Json::array();
    std::vector<std::string> summary;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        const auto& e = estimates[i];
        list.push_back({{"point", point_json(starts[i])},
                        {"mean", e.mean},
                        {"std_error", e.std_error},
                        {"n_samples", e.n_samples}});
        table.add({point_text(starts[i]), num(e.mean), num(e.std_error), num(e.n_samples)});
        summary.push_back(point_text(starts[i]) + ": " + num(e.mean) + " +- " + num(e.std_error));
    }
    run.finish({{"domain", domain.describe()}, {"estimates", list}}, table, summary);
    return ok;
}

int cmd_restrict(const Common& common, double r, const DomainArgs& ball, std::ostream& out)
{
    Run run("restrict", common, out);
    run.params()["r"] = r;
    run.params()["ball"] = domain_json(ball);
    run.params()["samples"] = common.samples;
    run.params()["r0"] = run.r0();
    const RestrictionReport report = restriction_equivalence_test(
        run.config(), run.sigma_r0(), r, ball.component, ball.center, ball.radius, common.samples, run.key(),
        run.exec());
    run.count_samples("restriction_equivalence_test", 2 * common.samples);
    CsvTable table({"statistic", "p_value", "n_samples", "pass"});
    table.add({num(report.statistic), num(report.p_value), num(report.n_samples), report.pass ? "true" : "false"});
    run.finish({{"test", "restriction_equivalence"},
                {"statistic", report.statistic},
                {"p_value", report.p_value},
                {"n_samples", report.n_samples},
                {"pass", report.pass}},
               table,
               {"p_value: " + num(report.p_value), std::string("pass: ") + (report.pass ? "true" : "false")});
    return ok;
}

struct FieldArgs {
    std::string field = "dirichlet";
    double t = 0.5;
    std::optional<std::size_t> indicator_shell;
    std::vector<double> offsets;
    std::vector<double> slopes;
    double at_x0 = 0.0;
    double constant = 1.0;
};

BoundaryData indicator_of_outer_sphere(const Configuration& config, std::size_t shell)
{
    if (shell >= config.shell_count())
        throw PreconditionError("no shell " + std::to_string(shell));
    const BoundarySet set = level_sphere_set(config, shell);
    return [contains = set.contains](const DarnedState& x) { return contains(x) ? 1.0 : 0.0; };
}

ScalarField make_field(const Run& run, const FieldArgs& f, std::size_t samples, const StreamKey& key)
{
    const Configuration& config = run.config();
    if (f.field == "dirichlet") {
        const std::size_t shell = f.indicator_shell.value_or(config.shell_count() - 1);
        return dirichlet_field(config, run.sigma_r0(), Domain::darned_neighborhood(config, f.t),
                               indicator_of_outer_sphere(config, shell), samples, key);
    }
    if (f.field == "level")
        return ScalarField::level_function(config);
    if (f.field == "affine")
        return ScalarField::affine_in_g(config, f.offsets, f.slopes, f.at_x0);
    if (f.field == "constant")
        return ScalarField::constant(f.constant);
    throw ParseError("field must be dirichlet, level, affine or constant");
}

Json field_json(const FieldArgs& f)
{
    Json j{{"field", f.field}};
    if (f.field == "dirichlet") {
        j["t"] = f.t;
        if (f.indicator_shell)
            j["indicator_shell"] = *f.indicator_shell;
    } else if (f.field == "affine") {
        j["offsets"] = f.offsets;
        j["slopes"] = f.slopes;
        j["at_x0"] = f.at_x0;
    } else if (f.field == "constant") {
        j["value"] = f.constant;
    }
    return j;
}

int cmd_harmonic(const Common& common, const FieldArgs& f, const std::vector<double>& radii,
                 const std::string& family_path, std::size_t quadrature, std::ostream& out)
{
    Run run("harmonic", common, out);
    run.params()["field"] = field_json(f);
    run.params()["radii"] = radii;
    run.params()["family"] = family_path;
    run.params()["quadrature"] = quadrature;
    run.params()["samples"] = common.samples;
    run.params()["r0"] = run.r0();
    const MeasureFamily family = load_family(run, family_path);
    const ScalarField h = make_field(run, f, common.samples, run.key().derive("field"));
    HarmonicityOptions options;
    options.quadrature_points = quadrature;
    const HarmonicityReport report = harmonicity_test_at_x0(run.config(), family, h, radii, run.exec(), options);

    CsvTable table({"r", "integral", "integral_std_error", "at_x0", "at_x0_std_error", "z", "p_value", "pass"});
    Json list = Json::array();
    std::vector<std::string> summary;
    for (const auto& r : report.radii) {
        list.push_back({{"r", r.r},
                        {"integral", r.integral},
                        {"integral_std_error", r.integral_std_error},
                        {"at_x0", r.at_x0},
                        {"at_x0_std_error", r.at_x0_std_error},
                        {"statistic", r.z},
                        {"p_value", r.p_value},
                        {"pass", r.pass}});
        table.add({num(r.r), num(r.integral), num(r.integral_std_error), num(r.at_x0), num(r.at_x0_std_error),
                   num(r.z), num(r.p_value), r.pass ? "true" : "false"});
        summary.push_back("r " + num(r.r) + ": p " + num(r.p_value) + (r.pass ? " pass" : " fail"));
    }
    summary.push_back(std::string("pass: ") + (report.all_pass ? "true" : "false"));
    run.finish({{"test", "harmonicity_at_x0"},
                {"field", h.name},
                {"radii", list},
                {"mixed", report.mixed},
                {"pass", report.all_pass}},
               table, summary);
    return ok;
}

int cmd_dirichlet(const Common& common, const FieldArgs& f, const std::vector<std::string>& point_specs,
                  std::ostream& out)
{
    Run run("dirichlet", common, out);
    const Configuration& config = run.config();
    const std::size_t shell = f.indicator_shell.value_or(config.shell_count() - 1);
    run.params()["t"] = f.t;
    run.params()["indicator_shell"] = shell;
    run.params()["points"] = point_specs;
    run.params()["samples"] = common.samples;
    run.params()["r0"] = run.r0();
    std::vector<DarnedState> points;
    for (const auto& s : point_specs)
        points.push_back(parse_point(s));
    if (points.empty())
        points.push_back(DarnedState::darned());
    const auto values = solve_dirichlet(config, run.sigma_r0(), Domain::darned_neighborhood(config, f.t),
                                        indicator_of_outer_sphere(config, shell), points, common.samples, run.key(),
                                        run.exec());
    run.count_samples("solve_dirichlet", common.samples * points.size());
    CsvTable table({"point", "value", "std_error"});
    Json list = Json::array();
    std::vector<std::string> summary;
    for (std::size_t i = 0; i < points.size(); ++i) {
        list.push_back({{"point", point_json(points[i])}, {"value", values[i].value}, {"std_error", values[i].std_error}});
        table.add({point_text(points[i]), num(values[i].value), num(values[i].std_error)});
        summary.push_back(point_text(points[i]) + ": " + num(values[i].value) + " +- " + num(values[i].std_error));
    }
    run.finish({{"domain", "Ut"}, {"t", f.t}, {"values", list}}, table, summary);
    return ok;
}

int exit_code_for(const Error& e)
{
    const std::string kind = e.kind();
    if (kind == "parse")
        return parse_error;
    if (kind == "invariant" || kind == "constraint")
        return invariant_error;
    if (kind == "domain")
        return domain_error;
    if (kind == "precondition")
        return precondition_error;
    if (kind == "non_convergence")
        return non_convergence;
    if (kind == "unsupported_geometry")
        return unsupported_geometry;
    if (kind == "io")
        return io_error;
    return other_error;
}

void report_error(std::ostream& err, const std::string& kind, const std::string& message, int code,
                  const Json& extra = Json::object())
{
    Json j{{"error", kind}, {"message", message}, {"exit_code", code}};
    j.update(extra);
    err << j.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"darnwalk: diffusions on darned Euclidean components"};
    app.require_subcommand(1);
    app.set_version_flag("--version", tool_version);

    Common common;
    DomainArgs domain, ball;
    std::string from = "x0";
    std::size_t gfun_points = 101;
    std::vector<std::string> pairs;
    std::string family_path;
    WeakArgs weak;
    std::string mode = "exit";
    std::size_t runs = 1;
    std::string traj;
    std::vector<std::string> points;
    double restrict_r = 0.5;
    FieldArgs field;
    std::vector<double> radii{0.1, 0.2, 0.4};
    std::size_t quadrature = 64;

    auto* validate = app.add_subcommand("validate", "check a configuration and report strong stability");
    validate->add_option("--config", common.config_path, "configuration JSON")->required();

    auto* gfun = app.add_subcommand("gfun", "tabulate the level function g on every shell");
    add_common(gfun, common, false);
    gfun->add_option("--points", gfun_points, "radii per shell")->capture_default_str();

    auto* stability = app.add_subcommand("stability", "count holes of the compact");
    add_common(stability, common, false);

    auto* kernel = app.add_subcommand("kernel", "estimate the exit kernel H_U(x, .)");
    add_common(kernel, common);
    add_domain(kernel, domain);
    kernel->add_option("--from", from, "start point: x0 or component:x1,x2,...")->capture_default_str();

    auto* compat = app.add_subcommand("compat", "check compatibility of a measure family");
    add_common(compat, common);
    compat->add_option("--pairs", pairs, "level pairs r:t")->delimiter(',')->required();
    compat->add_option("--family", family_path, "family JSON (default: parametric from the config weights)");

    auto* weaklimit = app.add_subcommand("weaklimit", "build a family as a weak limit of pushed measures");
    add_common(weaklimit, common);
    weaklimit->add_option("--etas", weak.etas, "decreasing levels eta_k")->delimiter(',');
    weaklimit->add_option("--eta-exponents", weak.exponents, "levels 2^-n for n in a..b")->capture_default_str();
    weaklimit->add_option("--nu", weak.nu, "dirac | uniform")->capture_default_str();
    weaklimit->add_option("--nu-shell", weak.nu_shell, "shell of the Dirac measures");
    weaklimit->add_option("--direction", weak.direction, "direction of the Dirac measures")->delimiter(',');
    weaklimit->add_option("--targets", weak.targets, "target levels r")->delimiter(',');
    weaklimit->add_option("--check-pairs", weak.check_pairs, "compatibility pairs r:t for the result")
        ->delimiter(',');

    auto* simulate = app.add_subcommand("simulate", "simulate paths until they leave a domain");
    add_common(simulate, common, false);
    add_domain(simulate, domain);
    simulate->add_option("--from", from, "start point")->capture_default_str();
    simulate->add_option("--mode", mode, "exit | time")->capture_default_str();
    simulate->add_option("--runs", runs, "number of paths")->capture_default_str();
    simulate->add_option("--traj", traj, "trajectory CSV path (indexed when runs > 1)");

    auto* ptime = app.add_subcommand("ptime", "estimate expected exit times p_V");
    add_common(ptime, common);
    add_domain(ptime, domain);
    ptime->add_option("--point", points, "start point (repeatable)");

    auto* restrict_cmd = app.add_subcommand("restrict", "compare exit laws of a ball with Brownian motion");
    add_common(restrict_cmd, common);
    restrict_cmd->add_option("--r", restrict_r, "level r whose closed A_r the ball avoids")->capture_default_str();
    restrict_cmd->add_option("--component", ball.component, "ball component")->required();
    restrict_cmd->add_option("--center", ball.center, "ball center")->delimiter(',')->required();
    restrict_cmd->add_option("--radius", ball.radius, "ball radius")->required();

    auto add_field = [&](CLI::App* sub) {
        sub->add_option("--t", field.t, "level of U_t for the Dirichlet problem")->capture_default_str();
        sub->add_option("--indicator-shell", field.indicator_shell,
                        "boundary data: indicator of this shell's outer sphere (default: last shell)");
    };
    auto* harmonic = app.add_subcommand("harmonic", "test the mean-value property at x0");
    add_common(harmonic, common);
    harmonic->add_option("--field", field.field, "dirichlet | level | affine | constant")->capture_default_str();
    add_field(harmonic);
    harmonic->add_option("--offsets", field.offsets, "affine field offsets c_j")->delimiter(',');
    harmonic->add_option("--slopes", field.slopes, "affine field slopes k_j")->delimiter(',');
    harmonic->add_option("--at-x0", field.at_x0, "affine field value at x0");
    harmonic->add_option("--value", field.constant, "constant field value");
    harmonic->add_option("--radii", radii, "test radii")->delimiter(',');
    harmonic->add_option("--family", family_path, "family JSON (default: parametric)");
    harmonic->add_option("--quadrature", quadrature, "quadrature nodes per shell sphere")->capture_default_str();

    auto* dirichlet = app.add_subcommand("dirichlet", "solve the Dirichlet problem on U_t");
    add_common(dirichlet, common);
    add_field(dirichlet);
    dirichlet->add_option("--point", points, "evaluation point (repeatable; default x0)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        report_error(err, "parse", e.what(), parse_error);
        return parse_error;
    }

    try {
        if (validate->parsed())
            return cmd_validate(common, out);
        if (gfun->parsed())
            return cmd_gfun(common, gfun_points, out);
        if (stability->parsed())
            return cmd_stability(common, out);
        if (kernel->parsed())
            return cmd_kernel(common, domain, from, out);
        if (compat->parsed())
            return cmd_compat(common, pairs, family_path, out);
        if (weaklimit->parsed())
            return cmd_weaklimit(common, weak, out);
        if (simulate->parsed())
            return cmd_simulate(common, domain, from, mode, runs, traj, out);
        if (ptime->parsed())
            return cmd_ptime(common, domain, points, out);
        if (restrict_cmd->parsed())
            return cmd_restrict(common, restrict_r, ball, out);
        if (harmonic->parsed())
            return cmd_harmonic(common, field, radii, family_path, quadrature, out);
        if (dirichlet->parsed())
            return cmd_dirichlet(common, field, points, out);
    } catch (const InvariantViolation& e) {
        report_error(err, e.kind(), e.what(), invariant_error, {{"constraint", e.constraint()}});
        return invariant_error;
    } catch (const ConstraintViolation& e) {
        report_error(err, e.kind(), e.what(), invariant_error, {{"node", e.node()}});
        return invariant_error;
    } catch (const NonConvergence& e) {
        report_error(err, e.kind(), e.what(), non_convergence, {{"steps", e.steps()}});
        return non_convergence;
    } catch (const Error& e) {
        const int code = exit_code_for(e);
        report_error(err, e.kind(), e.what(), code);
        return code;
    } catch (const fs::filesystem_error& e) {
        report_error(err, "io", e.what(), io_error);
        return io_error;
    } catch (const std::exception& e) {
        report_error(err, "error", e.what(), other_error);
        return other_error;
    }
    return other_error;
}

}  // namespace darnwalk::cli
