#include "darnwalk/io.hpp"

#include <fstream>
#include <sstream>

#include "darnwalk/errors.hpp"

namespace darnwalk {

namespace {

template <class T>
T field(const Json& obj, const char* key, const std::string& where)
{
    if (!obj.is_object() || !obj.contains(key))
        throw ParseError(where + ": missing \"" + key + "\"");
    try {
        return obj.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ParseError(where + ": \"" + key + "\" has the wrong type");
    }
}

template <class T>
T field_or(const Json& obj, const char* key, T fallback, const std::string& where)
{
    return obj.contains(key) ? field<T>(obj, key, where) : fallback;
}

}  // namespace

ConfigDocument parse_config(const Json& doc)
{
    if (!doc.is_object())
        throw ParseError("configuration must be a JSON object");
    const Json& shells = doc.contains("shells") ? doc.at("shells") : Json();
    if (!shells.is_array())
        throw ParseError("configuration needs a \"shells\" array");

    std::vector<Shell> out;
    std::vector<double> weights;
    for (std::size_t i = 0; i < shells.size(); ++i) {
        const Json& s = shells[i];
        const std::string where = "shells[" + std::to_string(i) + "]";
        Shell shell;
        shell.component = field<int>(s, "component", where);
        shell.dim = field<int>(s, "dim", where);
        shell.center = field<std::vector<double>>(s, "center", where);
        shell.k_radius = field<double>(s, "inner_radius", where);
        shell.w_radius = field<double>(s, "outer_radius", where);
        const std::string orientation = field_or<std::string>(s, "orientation", "outward", where);
        if (orientation == "outward")
            shell.orientation = Orientation::outward;
        else if (orientation == "inward")
            shell.orientation = Orientation::inward;
        else
            throw ParseError(where + ": orientation must be \"outward\" or \"inward\"");
        weights.push_back(field<double>(s, "weight", where));
        out.push_back(std::move(shell));
    }

    SimulationDefaults defaults;
    if (doc.contains("defaults")) {
        const Json& d = doc.at("defaults");
        if (!d.is_object())
            throw ParseError("\"defaults\" must be an object");
        defaults.epsilon_rel = field_or<double>(d, "epsilon", defaults.epsilon_rel, "defaults");
        defaults.r0 = field_or<double>(d, "r0", defaults.r0, "defaults");
        defaults.max_steps = field_or<std::size_t>(d, "max_steps", defaults.max_steps, "defaults");
    }

    std::map<int, int> extra;
    if (doc.contains("components")) {
        const Json& c = doc.at("components");
        if (!c.is_array())
            throw ParseError("\"components\" must be an array");
        for (std::size_t i = 0; i < c.size(); ++i) {
            const std::string where = "components[" + std::to_string(i) + "]";
            const int id = field<int>(c[i], "id", where);
            if (extra.count(id))
                throw ParseError(where + ": duplicate component id");
            extra[id] = field<int>(c[i], "dim", where);
        }
    }

    ConfigDocument result{Configuration(std::move(out), std::move(weights), defaults, std::move(extra)), {}};
    if (doc.contains("compact"))
        result.compact = parse_compact(doc.at("compact"));
    return result;
}

Json read_json_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path);
    std::ostringstream text;
    text << in.rdbuf();
    try {
        return Json::parse(text.str());
    } catch (const Json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

ConfigDocument load_config(const std::string& path)
{
    return parse_config(read_json_file(path));
}

Json config_to_json(const Configuration& config)
{
    Json shells = Json::array();
    for (std::size_t i = 0; i < config.shell_count(); ++i) {
        const Shell& s = config.shell(i);
        shells.push_back({{"component", s.component},
                          {"dim", s.dim},
                          {"center", s.center},
                          {"inner_radius", s.k_radius},
                          {"outer_radius", s.w_radius},
                          {"orientation", s.orientation == Orientation::outward ? "outward" : "inward"},
                          {"weight", config.weights()[i]}});
    }
    const SimulationDefaults& d = config.defaults();
    Json out{{"shells", shells}, {"defaults", {{"epsilon", d.epsilon_rel}, {"r0", d.r0}, {"max_steps", d.max_steps}}}};
    Json components = Json::array();
    for (const auto& [id, dim] : config.components())
        components.push_back({{"id", id}, {"dim", dim}});
    out["components"] = components;
    return out;
}

CompactDescription parse_compact(const Json& pieces)
{
    if (!pieces.is_array())
        throw ParseError("\"compact\" must be an array");
    CompactDescription out;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        const Json& p = pieces[i];
        const std::string where = "compact[" + std::to_string(i) + "]";
        CompactPiece piece;
        piece.component = field<int>(p, "component", where);
        piece.center = field<std::vector<double>>(p, "center", where);
        piece.dim = field_or<int>(p, "dim", static_cast<int>(piece.center.size()), where);
        if (piece.dim != static_cast<int>(piece.center.size()) || piece.dim < 1)
            throw ParseError(where + ": center length differs from dim");
        const std::string kind = field<std::string>(p, "kind", where);
        if (kind == "ball") {
            piece.kind = CompactPiece::Kind::ball;
            piece.outer_radius = field<double>(p, "radius", where);
        } else if (kind == "shell") {
            piece.kind = CompactPiece::Kind::shell;
            piece.inner_radius = field<double>(p, "inner_radius", where);
            piece.outer_radius = field<double>(p, "outer_radius", where);
        } else {
            throw ParseError(where + ": kind must be \"ball\" or \"shell\"");
        }
        if (!(piece.outer_radius > 0.0) || (piece.kind == CompactPiece::Kind::shell &&
                                            !(piece.inner_radius > 0.0 && piece.inner_radius < piece.outer_radius)))
            throw InvariantViolation("compact-radii", where + " needs positive, increasing radii");
        out.pieces.push_back(std::move(piece));
    }
    return out;
}

Json compact_to_json(const CompactDescription& compact)
{
    Json out = Json::array();
    for (const CompactPiece& p : compact.pieces) {
        Json j{{"component", p.component}, {"dim", p.dim}, {"center", p.center}};
        if (p.kind == CompactPiece::Kind::ball) {
            j["kind"] = "ball";
            j["radius"] = p.outer_radius;
        } else {
            j["kind"] = "shell";
            j["inner_radius"] = p.inner_radius;
            j["outer_radius"] = p.outer_radius;
        }
        out.push_back(std::move(j));
    }
    return out;
}

Json measure_to_json(const SphereMeasure& measure)
{
    if (measure.kind() == SphereMeasure::Kind::parametric)
        return {{"kind", "parametric"}, {"level", measure.level()}, {"weights", measure.shell_weights()}};
    Json atoms = Json::array();
    for (const Atom& a : measure.atoms())
        atoms.push_back({{"shell", a.shell}, {"point", a.point}, {"weight", a.weight}});
    return {{"kind", "empirical"},
            {"level", measure.level()},
            {"mc_samples", measure.mc_samples()},
            {"atoms", std::move(atoms)}};
}

SphereMeasure measure_from_json(const Configuration& config, const Json& doc)
{
    const std::string kind = field<std::string>(doc, "kind", "measure");
    const double level = field<double>(doc, "level", "measure");
    if (kind == "parametric")
        return SphereMeasure::parametric(config, level, field<std::vector<double>>(doc, "weights", "measure"));
    if (kind != "empirical")
        throw ParseError("measure: kind must be \"parametric\" or \"empirical\"");
    const Json& atoms = doc.contains("atoms") ? doc.at("atoms") : Json();
    if (!atoms.is_array())
        throw ParseError("measure: missing \"atoms\" array");
    std::vector<Atom> out;
    out.reserve(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const std::string where = "atoms[" + std::to_string(i) + "]";
        out.push_back({field<std::size_t>(atoms[i], "shell", where), field<std::vector<double>>(atoms[i], "point", where),
                       field<double>(atoms[i], "weight", where)});
    }
    return SphereMeasure::empirical(config, level, std::move(out),
                                    field_or<std::size_t>(doc, "mc_samples", 0, "measure"));
}

Json family_to_json(const MeasureFamily& family)
{
    if (family.is_parametric())
        throw PreconditionError("parametric families serialize through their members; list levels first");
    Json out = Json::array();
    for (const SphereMeasure& m : family.members())
        out.push_back(measure_to_json(m));
    return out;
}

MeasureFamily family_from_json(const Configuration& config, const Json& doc)
{
    if (!doc.is_array())
        throw ParseError("a measure family must be a JSON array");
    std::vector<SphereMeasure> members;
    for (const Json& m : doc)
        members.push_back(measure_from_json(config, m));
    return MeasureFamily::listed(std::move(members));
}

}  // namespace darnwalk
