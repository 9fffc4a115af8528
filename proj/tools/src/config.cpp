#include "hsav_cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace hsav::cli {

namespace pt = boost::property_tree;

std::string_view to_string(Experiment e) {
    switch (e) {
        case Experiment::single: return "single";
        case Experiment::refinement: return "refinement";
        case Experiment::energy_sweep: return "energy_sweep";
        case Experiment::disk: return "disk";
        case Experiment::power_law: return "power_law";
    }
    return "unknown";
}

namespace {

const std::set<std::string> kTopLevelKeys = {"experiment", "method", "dt", "t_end"};

const std::map<std::string, std::set<std::string>> kSectionKeys = {
    {"model", {"name", "mobility", "eps", "lambda", "eps2", "gamma0", "c0"}},
    {"grid", {"nx", "ny", "lx", "ly", "x0", "y0"}},
    {"solver", {"tolerance", "max_iterations", "mode", "anderson_depth", "newton_fallback"}},
    {"initial", {"kind", "amp", "mean", "seed", "radius", "kx", "ky"}},
    {"output", {"directory", "snapshot_stride", "energy_stride"}},
    {"refinement", {"dt_list", "reference", "norm"}},
    {"sweep", {"methods", "dt_list"}},
    {"disk", {"sample_interval", "fit_t_lo"}},
    {"power_law", {"window_lo", "window_hi"}},
};

const std::map<std::string, std::set<std::string>> kModelKeys = {
    {"allen_cahn", {"name", "mobility", "eps", "gamma0", "c0"}},
    {"cahn_hilliard", {"name", "lambda", "eps", "gamma0", "c0"}},
    {"mbe", {"name", "mobility", "eps2", "gamma0", "c0"}},
};

const std::map<std::string, std::set<std::string>> kInitialKeys = {
    {"random", {"kind", "amp", "mean", "seed"}},
    {"disk", {"kind", "radius"}},
    {"product_sine", {"kind", "kx", "ky", "amp"}},
    {"mbe_two_mode", {"kind"}},
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string join(const std::set<std::string>& keys) {
    std::string out;
    for (const auto& k : keys) out += (out.empty() ? "" : ", ") + k;
    return out;
}

[[noreturn]] void fail(const std::string& key, const std::string& what) { throw ConfigError(key + ": " + what); }

// Reals accept an optional pi factor: "4pi", "4*pi", "pi".
double parse_real(const std::string& key, std::string text) {
    text = trim(text);
    double factor = 1.0;
    if (text.ends_with("pi")) {
        factor = std::numbers::pi;
        text = trim(text.substr(0, text.size() - 2));
        if (text.ends_with('*')) text = trim(text.substr(0, text.size() - 1));
        if (text.empty()) text = "1";
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
        fail(key, "expected a real number, got '" + text + "'");
    }
    return v * factor;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& raw) {
    const std::string text = trim(raw);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        fail(key, "expected a non-negative integer, got '" + text + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& raw) {
    const std::string text = trim(raw);
    if (text == "true" || text == "yes" || text == "1") return true;
    if (text == "false" || text == "no" || text == "0") return false;
    fail(key, "expected true or false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& raw) {
    std::vector<std::string> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

Method parse_method_key(const std::string& key, const std::string& text) {
    try {
        return Method::parse(trim(text));
    } catch (const std::invalid_argument& e) {
        fail(key, e.what());
    }
}

class Reader {
public:
    explicit Reader(const pt::ptree& root) : root_(root) {}

    std::optional<std::string> get(const std::string& key) const {
        auto v = root_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
        if (!v) return std::nullopt;
        return trim(*v);
    }
    std::string require(const std::string& key) const {
        auto v = get(key);
        if (!v || v->empty()) fail(key, "missing required key '" + key + "'");
        return *v;
    }
    double real(const std::string& key) const { return parse_real(key, require(key)); }
    double real(const std::string& key, double fallback) const {
        auto v = get(key);
        return v ? parse_real(key, *v) : fallback;
    }
    std::optional<double> optional_real(const std::string& key) const {
        auto v = get(key);
        return v ? std::optional(parse_real(key, *v)) : std::nullopt;
    }
    double positive(const std::string& key, std::optional<double> fallback = std::nullopt) const {
        const double v = fallback ? real(key, *fallback) : real(key);
        if (!(v > 0.0)) {
            std::ostringstream msg;
            msg << "must be > 0 (got " << v << ")";
            fail(key, msg.str());
        }
        return v;
    }
    std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
        auto v = get(key);
        return v ? parse_unsigned(key, *v) : fallback;
    }
    std::vector<double> dt_list(const std::string& key) const {
        std::vector<double> out;
        for (const auto& item : split_list(require(key))) {
            const double v = parse_real(key, item);
            if (!(v > 0.0)) fail(key, "every time step must be > 0 (got " + item + ")");
            out.push_back(v);
        }
        if (out.empty()) fail(key, "empty list");
        return out;
    }

private:
    const pt::ptree& root_;
};

void reject_unknown_keys(const pt::ptree& root) {
    for (const auto& [name, node] : root) {
        if (node.empty()) {
            if (!kTopLevelKeys.contains(name) && !kSectionKeys.contains(name)) {
                fail(name, "unknown key (top-level keys: " + join(kTopLevelKeys) + ")");
            }
            continue;
        }
        const auto section = kSectionKeys.find(name);
        if (section == kSectionKeys.end()) fail(name, "unknown section");
        for (const auto& [key, value] : node) {
            if (!value.empty()) fail(name + "." + key, "nested keys are not supported");
            if (!section->second.contains(key)) {
                fail(name + "." + key, "unknown key (allowed in [" + name + "]: " + join(section->second) + ")");
            }
        }
    }
}

void reject_inapplicable(const pt::ptree& root, const std::string& section, const std::set<std::string>& allowed,
                         const std::string& context) {
    const auto node = root.get_child_optional(section);
    if (!node) return;
    for (const auto& [key, value] : *node) {
        if (!allowed.contains(key)) fail(section + "." + key, "does not apply to " + context);
    }
}

ModelParams read_model(const Reader& r, const pt::ptree& root) {
    const std::string name = r.require("model.name");
    const auto keys = kModelKeys.find(name);
    if (keys == kModelKeys.end()) fail("model.name", "unknown model '" + name + "' (allen_cahn, cahn_hilliard, mbe)");
    reject_inapplicable(root, "model", keys->second, "model " + name);
    const auto c0 = r.optional_real("model.c0");
    if (name == "allen_cahn") {
        const AllenCahnParams d;
        return AllenCahnParams{r.real("model.mobility", d.mobility), r.real("model.eps", d.eps),
                               r.real("model.gamma0", d.gamma0), c0};
    }
    if (name == "cahn_hilliard") {
        const CahnHilliardParams d;
        return CahnHilliardParams{r.real("model.lambda", d.lambda), r.real("model.eps", d.eps),
                                  r.real("model.gamma0", d.gamma0), c0};
    }
    const MbeParams d;
    return MbeParams{r.real("model.mobility", d.mobility), r.real("model.eps2", d.eps2),
                     r.real("model.gamma0", d.gamma0), c0};
}

InitialCondition read_initial(const Reader& r, const pt::ptree& root) {
    const std::string kind = r.require("initial.kind");
    const auto keys = kInitialKeys.find(kind);
    if (keys == kInitialKeys.end()) {
        fail("initial.kind", "unknown initial condition '" + kind + "' (random, disk, product_sine, mbe_two_mode)");
    }
    reject_inapplicable(root, "initial", keys->second, "initial condition " + kind);
    if (kind == "random") {
        const RandomInit d;
        return RandomInit{r.real("initial.amp", d.amp), r.real("initial.mean", d.mean), r.count("initial.seed", d.seed)};
    }
    if (kind == "disk") return DiskInit{r.positive("initial.radius", DiskInit{}.radius)};
    if (kind == "product_sine") {
        const ProductSineInit d;
        return ProductSineInit{r.real("initial.kx", d.kx), r.real("initial.ky", d.ky), r.real("initial.amp", d.amp)};
    }
    return MbeTwoModeInit{};
}

Experiment parse_experiment(const std::string& text) {
    for (auto e : {Experiment::single, Experiment::refinement, Experiment::energy_sweep, Experiment::disk,
                   Experiment::power_law}) {
        if (text == to_string(e)) return e;
    }
    fail("experiment", "unknown experiment '" + text + "' (single, refinement, energy_sweep, disk, power_law)");
}

std::string format_real(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string format_list(const std::vector<double>& values) {
    std::string out;
    for (double v : values) out += (out.empty() ? "" : ",") + format_real(v);
    return out;
}

RunConfig build(const pt::ptree& root) {
    reject_unknown_keys(root);
    const Reader r(root);
    RunConfig c;
    c.experiment = parse_experiment(r.require("experiment"));
    c.model = read_model(r, root);

    const auto nx = r.count("grid.nx", 0);
    const auto ny = r.count("grid.ny", 0);
    if (!r.get("grid.nx")) fail("grid.nx", "missing required key 'grid.nx'");
    if (!r.get("grid.ny")) fail("grid.ny", "missing required key 'grid.ny'");
    try {
        c.grid = Grid2D(nx, ny, r.real("grid.lx"), r.real("grid.ly"), r.real("grid.x0", 0.0), r.real("grid.y0", 0.0));
    } catch (const std::invalid_argument& e) {
        fail("grid", e.what());
    }

    if (r.get("method")) c.method = parse_method_key("method", r.require("method"));
    if (r.get("dt")) c.dt = r.positive("dt");
    c.t_end = r.positive("t_end");

    const SolverConfig ds;
    c.solver.tolerance = r.real("solver.tolerance", ds.tolerance);
    c.solver.max_iterations = static_cast<int>(r.count("solver.max_iterations", static_cast<std::uint64_t>(ds.max_iterations)));
    c.solver.anderson_depth = static_cast<int>(r.count("solver.anderson_depth", static_cast<std::uint64_t>(ds.anderson_depth)));
    if (auto m = r.get("solver.mode")) {
        try {
            c.solver.mode = parse_solver_mode(*m);
        } catch (const std::invalid_argument& e) {
            fail("solver.mode", e.what());
        }
    }
    if (auto b = r.get("solver.newton_fallback")) c.solver.newton_fallback = parse_bool("solver.newton_fallback", *b);
    try {
        c.solver.validate();
    } catch (const std::invalid_argument& e) {
        fail("solver", e.what());
    }

    c.initial = read_initial(r, root);
    c.output.directory = r.require("output.directory");
    c.output.snapshot_stride = r.count("output.snapshot_stride", 0);
    c.output.energy_stride = r.count("output.energy_stride", 1);
    if (c.output.energy_stride == 0) fail("output.energy_stride", "must be >= 1");

    try {
        (void)c.build_model();
    } catch (const std::invalid_argument& e) {
        fail("model", e.what());
    }

    auto require_method_and_dt = [&] {
        if (!c.method) fail("method", "missing required key 'method'");
        if (!c.dt) fail("dt", "missing required key 'dt'");
    };
    auto read_sweep = [&] {
        for (const auto& m : split_list(r.require("sweep.methods"))) c.sweep_methods.push_back(parse_method_key("sweep.methods", m));
        c.sweep_dts = r.dt_list("sweep.dt_list");
    };

    switch (c.experiment) {
        case Experiment::single: require_method_and_dt(); break;
        case Experiment::refinement: {
            if (!c.method) fail("method", "missing required key 'method'");
            c.refinement_dts = r.dt_list("refinement.dt_list");
            try {
                validate_dt_list(c.refinement_dts, c.t_end);
            } catch (const std::invalid_argument& e) {
                fail("refinement.dt_list", e.what());
            }
            if (auto ref = r.get("refinement.reference")) {
                try {
                    c.reference = parse_reference(*ref);
                } catch (const std::invalid_argument& e) {
                    fail("refinement.reference", e.what());
                }
                if (c.reference == ReferenceKind::analytic) {
                    fail("refinement.reference", "no analytic solution is available from a config file (cauchy, finest_dt)");
                }
            }
            if (auto n = r.get("refinement.norm")) {
                if (*n == "l2_h") c.norm = ErrorNorm::l2_h;
                else if (*n == "max") c.norm = ErrorNorm::max;
                else fail("refinement.norm", "unknown norm '" + *n + "' (l2_h, max)");
            }
            break;
        }
        case Experiment::energy_sweep: read_sweep(); break;
        case Experiment::disk:
            if (!std::holds_alternative<AllenCahnParams>(c.model)) fail("model.name", "the disk experiment needs allen_cahn");
            if (!std::holds_alternative<DiskInit>(c.initial)) fail("initial.kind", "the disk experiment needs kind = disk");
            read_sweep();
            c.disk_sample_interval = r.positive("disk.sample_interval", 1.0);
            c.disk_fit_t_lo = r.real("disk.fit_t_lo", 0.0);
            break;
        case Experiment::power_law:
            if (!std::holds_alternative<CahnHilliardParams>(c.model)) {
                fail("model.name", "the power_law experiment needs cahn_hilliard");
            }
            if (!std::holds_alternative<RandomInit>(c.initial)) fail("initial.kind", "the power_law experiment needs kind = random");
            require_method_and_dt();
            c.window_lo = r.positive("power_law.window_lo", 10.0);
            c.window_hi = r.optional_real("power_law.window_hi");
            if (c.window_hi && !(*c.window_hi > c.window_lo && *c.window_hi <= c.t_end)) {
                fail("power_law.window_hi", "must satisfy window_lo < window_hi <= t_end");
            }
            if (!(c.window_lo < c.t_end)) fail("power_law.window_lo", "must be < t_end");
            break;
    }
    return c;
}

pt::ptree read_tree(std::istream& in) {
    pt::ptree root;
    try {
        pt::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config syntax: ") + e.what());
    }
    return root;
}

void apply_overrides(pt::ptree& root, std::span<const std::string> overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--set '" + o + "': expected key=value");
        const std::string key = trim(o.substr(0, eq));
        root.put(pt::ptree::path_type(key, '.'), trim(o.substr(eq + 1)));
    }
}

}  // namespace

ModelSpec RunConfig::build_model() const {
    return std::visit(
        [this](const auto& p) -> ModelSpec {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, AllenCahnParams>) return allen_cahn(p, grid);
            else if constexpr (std::is_same_v<T, CahnHilliardParams>) return cahn_hilliard(p, grid);
            else return mbe(p, grid);
        },
        model);
}

std::optional<std::uint64_t> RunConfig::seed() const {
    if (const auto* r = std::get_if<RandomInit>(&initial)) return r->seed;
    return std::nullopt;
}

RunConfig parse_config(std::istream& in, std::span<const std::string> overrides) {
    pt::ptree root = read_tree(in);
    apply_overrides(root, overrides);
    return build(root);
}

RunConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    return parse_config(in, overrides);
}

std::string resolved_config(const RunConfig& c) {
    pt::ptree root;
    root.put("experiment", std::string(to_string(c.experiment)));
    if (c.method) root.put("method", c.method->name());
    if (c.dt) root.put("dt", format_real(*c.dt));
    root.put("t_end", format_real(c.t_end));

    pt::ptree model;
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, AllenCahnParams>) {
                model.put("name", "allen_cahn");
                model.put("mobility", format_real(p.mobility));
                model.put("eps", format_real(p.eps));
            } else if constexpr (std::is_same_v<T, CahnHilliardParams>) {
                model.put("name", "cahn_hilliard");
                model.put("lambda", format_real(p.lambda));
                model.put("eps", format_real(p.eps));
            } else {
                model.put("name", "mbe");
                model.put("mobility", format_real(p.mobility));
                model.put("eps2", format_real(p.eps2));
            }
            model.put("gamma0", format_real(p.gamma0));
        },
        c.model);
    model.put("c0", format_real(c.build_model().c0));
    root.add_child("model", model);

    pt::ptree grid;
    grid.put("nx", c.grid.nx());
    grid.put("ny", c.grid.ny());
    grid.put("lx", format_real(c.grid.lx()));
    grid.put("ly", format_real(c.grid.ly()));
    grid.put("x0", format_real(c.grid.x0()));
    grid.put("y0", format_real(c.grid.y0()));
    root.add_child("grid", grid);

    pt::ptree solver;
    solver.put("tolerance", format_real(c.solver.tolerance));
    solver.put("max_iterations", c.solver.max_iterations);
    solver.put("mode", std::string(to_string(c.solver.mode)));
    solver.put("anderson_depth", c.solver.anderson_depth);
    solver.put("newton_fallback", c.solver.newton_fallback ? "true" : "false");
    root.add_child("solver", solver);

    pt::ptree initial;
    std::visit(
        [&](const auto& ic) {
            using T = std::decay_t<decltype(ic)>;
            if constexpr (std::is_same_v<T, RandomInit>) {
                initial.put("kind", "random");
                initial.put("amp", format_real(ic.amp));
                initial.put("mean", format_real(ic.mean));
                initial.put("seed", ic.seed);
            } else if constexpr (std::is_same_v<T, DiskInit>) {
                initial.put("kind", "disk");
                initial.put("radius", format_real(ic.radius));
            } else if constexpr (std::is_same_v<T, ProductSineInit>) {
                initial.put("kind", "product_sine");
                initial.put("kx", format_real(ic.kx));
                initial.put("ky", format_real(ic.ky));
                initial.put("amp", format_real(ic.amp));
            } else {
                initial.put("kind", "mbe_two_mode");
            }
        },
        c.initial);
    root.add_child("initial", initial);

    pt::ptree output;
    output.put("directory", c.output.directory.string());
    output.put("snapshot_stride", c.output.snapshot_stride);
    output.put("energy_stride", c.output.energy_stride);
    root.add_child("output", output);

    auto method_list = [](const std::vector<Method>& ms) {
        std::string out;
        for (const auto& m : ms) out += (out.empty() ? "" : ",") + m.name();
        return out;
    };
    switch (c.experiment) {
        case Experiment::single: break;
        case Experiment::refinement: {
            pt::ptree s;
            s.put("dt_list", format_list(c.refinement_dts));
            s.put("reference", std::string(to_string(c.reference)));
            s.put("norm", std::string(to_string(c.norm)));
            root.add_child("refinement", s);
            break;
        }
        case Experiment::energy_sweep:
        case Experiment::disk: {
            pt::ptree s;
            s.put("methods", method_list(c.sweep_methods));
            s.put("dt_list", format_list(c.sweep_dts));
            root.add_child("sweep", s);
            if (c.experiment == Experiment::disk) {
                pt::ptree d;
                d.put("sample_interval", format_real(c.disk_sample_interval));
                d.put("fit_t_lo", format_real(c.disk_fit_t_lo));
                root.add_child("disk", d);
            }
            break;
        }
        case Experiment::power_law: {
            pt::ptree s;
            s.put("window_lo", format_real(c.window_lo));
            s.put("window_hi", format_real(c.window_hi.value_or(c.t_end)));
            root.add_child("power_law", s);
            break;
        }
    }

    std::ostringstream out;
    pt::write_ini(out, root);
    return out.str();
}

}  // namespace hsav::cli
