#include "hsav_cli/run.hpp"

#include "hsav/error.hpp"
#include "hsav/field_io.hpp"

#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <sstream>

#ifndef HSAV_VERSION
#define HSAV_VERSION "unknown"
#endif

namespace hsav::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

std::string hex(std::uint64_t v) {
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << v;
    return out.str();
}

std::string format_dt(double dt) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, dt);
    return std::string(buf, ptr);
}

// Non-finite numbers become null so the manifest stays valid JSON.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

class OutputDir {
public:
    OutputDir(fs::path dir, bool force) : dir_(std::move(dir)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
        for (const char* name : {kManifestName, kFailedManifestName}) {
            const fs::path p = dir_ / name;
            if (!fs::exists(p)) continue;
            if (!force) {
                throw IoError("output directory " + dir_.string() + " already holds " + name +
                              "; pass --force to overwrite");
            }
            fs::remove(p, ec);
            if (ec) throw IoError("cannot remove " + p.string() + ": " + ec.message());
        }
    }

    const fs::path& path() const noexcept { return dir_; }
    const std::vector<ProducedFile>& files() const noexcept { return files_; }

    void write_text(const std::string& name, const std::function<void(std::ostream&)>& body) {
        const fs::path p = dir_ / name;
        {
            std::ofstream out(p, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot open " + p.string() + " for writing");
            body(out);
            out.flush();
            if (!out) throw IoError("write failed for " + p.string());
        }
        record(name);
    }

    void write_field(const std::string& stem, const Field& field, bool csv) {
        try {
            write_snapshot(dir_ / (stem + ".bin"), field);
            record(stem + ".bin");
            if (csv) {
                write_field_csv(dir_ / (stem + ".csv"), field);
                record(stem + ".csv");
            }
        } catch (const std::runtime_error& e) {
            throw IoError(e.what());
        }
    }

    /// Temporary file then rename, so readers never see a partial manifest.
    void write_manifest(const std::string& name, const json& manifest) {
        const fs::path tmp = dir_ / (name + ".tmp");
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
            out << manifest.dump(2) << '\n';
            out.flush();
            if (!out) throw IoError("write failed for " + tmp.string());
        }
        std::error_code ec;
        fs::rename(tmp, dir_ / name, ec);
        if (ec) throw IoError("cannot move manifest into place: " + ec.message());
    }

private:
    void record(const std::string& name) {
        std::error_code ec;
        const auto bytes = fs::file_size(dir_ / name, ec);
        if (ec) throw IoError("cannot stat " + (dir_ / name).string() + ": " + ec.message());
        for (auto& f : files_) {
            if (f.name == name) {
                f.bytes = bytes;
                return;
            }
        }
        files_.push_back({name, bytes});
    }

    fs::path dir_;
    std::vector<ProducedFile> files_;
};

struct Context {
    const RunConfig& config;
    const RunOptions& options;
    OutputDir& out;
    std::string config_hash;
    json results = json::object();

    std::string csv_manifest(const std::string& method, std::optional<double> dt) const {
        std::ostringstream m;
        m << "config_hash=" << config_hash << " experiment=" << to_string(config.experiment);
        if (!method.empty()) m << " method=" << method;
        if (dt) m << " dt=" << format_dt(*dt);
        const auto seed = config.seed();
        m << " seed=" << (seed ? std::to_string(*seed) : "none");
        return m.str();
    }
};

json trace_summary(const EnergyTrace& trace) {
    json j;
    j["method"] = trace.method.name();
    j["dt"] = trace.dt;
    j["samples"] = trace.samples.size();
    if (!trace.samples.empty()) {
        j["energy_initial"] = number(trace.samples.front().modified);
        j["energy_final"] = number(trace.samples.back().modified);
        j["worst_increase"] = number(trace.worst_increase());
        j["monotone"] = trace.worst_increase() <= 0.0;
    }
    j["failure"] = trace.failure ? json(*trace.failure) : json(nullptr);
    return j;
}

void run_single(Context& ctx) {
    const RunConfig& c = ctx.config;
    const ModelSpec model = c.build_model();
    const Field phi0 = initial_condition(c.initial, c.grid);
    EnergyTrace trace{*c.method, *c.dt, {}, std::nullopt};

    std::vector<Observer> observers;
    observers.push_back({c.output.energy_stride, [&](const StepEvent& ev) {
                             const EnergyPair e = energy(ev.state, model);
                             trace.samples.push_back({ev.t, e.modified, e.raw, ev.state.q});
                         }});
    if (c.output.snapshot_stride > 0) {
        observers.push_back({c.output.snapshot_stride, [&](const StepEvent& ev) {
                                 std::ostringstream stem;
                                 stem << "phi_" << std::setw(8) << std::setfill('0') << ev.step;
                                 ctx.out.write_field(stem.str(), ev.state.phi, ctx.options.csv_fields);
                             }});
    }

    auto write_energy = [&] {
        ctx.out.write_text("energy.csv", [&](std::ostream& os) {
            write_energy_csv(os, trace, ctx.csv_manifest(c.method->name(), c.dt));
        });
    };
    std::optional<SavState> final_state;
    try {
        final_state = integrate(init_consistent(phi0, model), model, *c.method, *c.dt, c.t_end, observers, c.solver);
    } catch (const NumericalError& e) {
        trace.failure = e.what();
        write_energy();
        throw;
    }
    write_energy();
    ctx.out.write_field("final", final_state->phi, ctx.options.csv_fields);

    json r = trace_summary(trace);
    r["t_final"] = final_state->t;
    r["mean_initial"] = phi0.mean();
    r["mean_final"] = final_state->phi.mean();
    r["q_gap_final"] = number(q_consistency_gap(*final_state, model));
    ctx.results = r;
}

void run_refinement(Context& ctx) {
    const RunConfig& c = ctx.config;
    RefinementSpec spec;
    spec.method = *c.method;
    spec.dt_list = c.refinement_dts;
    spec.t_end = c.t_end;
    spec.reference = c.reference;
    spec.norm = c.norm;
    spec.solver = c.solver;
    spec.threads = ctx.options.threads;
    const ConvergenceTable table =
        refinement_study(c.build_model(), initial_condition(c.initial, c.grid), spec);
    ctx.out.write_text("convergence.csv", [&](std::ostream& os) {
        write_convergence_csv(os, table, ctx.csv_manifest(table.method, std::nullopt));
    });
    json rows = json::array();
    for (const auto& row : table.rows) {
        rows.push_back({{"dt", row.dt}, {"error", number(row.error)},
                        {"order", row.order ? number(*row.order) : json(nullptr)}});
    }
    ctx.results = {{"method", table.method}, {"reference", to_string(table.reference)},
                   {"norm", to_string(table.norm)}, {"rows", rows}};
}

void run_energy_sweep(Context& ctx) {
    const RunConfig& c = ctx.config;
    const auto traces = energy_sweep(c.build_model(), initial_condition(c.initial, c.grid), c.sweep_methods,
                                     c.sweep_dts, c.t_end, c.output.energy_stride, c.solver, ctx.options.threads);
    json list = json::array();
    for (const auto& tr : traces) {
        const std::string name = "energy_" + tr.method.name() + "_dt" + format_dt(tr.dt) + ".csv";
        ctx.out.write_text(name, [&](std::ostream& os) {
            write_energy_csv(os, tr, ctx.csv_manifest(tr.method.name(), tr.dt));
        });
        json s = trace_summary(tr);
        s["file"] = name;
        list.push_back(s);
    }
    ctx.results = {{"traces", list}};
}

void run_disk(Context& ctx) {
    const RunConfig& c = ctx.config;
    DiskBenchmarkConfig d;
    d.grid = c.grid;
    d.params = std::get<AllenCahnParams>(c.model);
    d.radius = std::get<DiskInit>(c.initial).radius;
    d.t_end = c.t_end;
    d.sample_interval = c.disk_sample_interval;
    d.fit_t_lo = c.disk_fit_t_lo;
    d.solver = c.solver;
    const auto traces = disk_benchmark(d, c.sweep_dts, c.sweep_methods, ctx.options.threads);
    constexpr double two_pi = 2.0 * std::numbers::pi;
    json list = json::array();
    for (const auto& tr : traces) {
        const std::string name = "disk_" + tr.method.name() + "_dt" + format_dt(tr.dt) + ".csv";
        ctx.out.write_text(name, [&](std::ostream& os) {
            write_disk_csv(os, tr, ctx.csv_manifest(tr.method.name(), tr.dt));
        });
        list.push_back({{"method", tr.method.name()},
                        {"dt", tr.dt},
                        {"file", name},
                        {"slope", number(tr.fit.slope)},
                        {"slope_relative_error", number(std::abs(tr.fit.slope + two_pi) / two_pi)},
                        {"max_relative_deviation", number(tr.max_relative_deviation(d.radius, d.fit_t_lo, d.t_end))},
                        {"failure", tr.failure ? json(*tr.failure) : json(nullptr)}});
    }
    ctx.results = {{"expected_slope", -two_pi}, {"traces", list}};
}

void run_power_law(Context& ctx) {
    const RunConfig& c = ctx.config;
    PowerLawConfig p;
    p.grid = c.grid;
    p.params = std::get<CahnHilliardParams>(c.model);
    p.initial = std::get<RandomInit>(c.initial);
    p.method = *c.method;
    p.dt = *c.dt;
    p.t_end = c.t_end;
    p.window_lo = c.window_lo;
    p.window_hi = c.window_hi;
    p.stride = c.output.energy_stride;
    p.solver = c.solver;
    const PowerLawResult r = power_law_study(p);
    ctx.out.write_text("energy.csv", [&](std::ostream& os) {
        write_energy_csv(os, r.trace, ctx.csv_manifest(p.method.name(), p.dt));
    });
    auto fit = [](const PowerLawFit& f) {
        return json{{"slope", number(f.slope)}, {"intercept", number(f.intercept)}, {"t_lo", f.t_lo},
                    {"t_hi", f.t_hi},           {"residual", number(f.residual)},   {"samples", f.samples}};
    };
    ctx.results = {{"modified", fit(r.modified)}, {"raw", fit(r.raw)}, {"trace", trace_summary(r.trace)}};
}

}  // namespace

fs::path resolve_output_directory(const RunConfig& config) {
    const fs::path& dir = config.output.directory;
    if (dir.is_absolute()) return dir;
    if (const char* root = std::getenv(kOutputRootEnv); root != nullptr && *root != '\0') return fs::path(root) / dir;
    return dir;
}

RunSummary run_experiment(const RunConfig& config, const RunOptions& options) {
    OutputDir out(resolve_output_directory(config), options.force);
    const std::string resolved = resolved_config(config);
    Context ctx{config, options, out, hex(fnv1a(resolved))};

    json manifest;
    manifest["artifact"] = "hsav";
    manifest["version"] = HSAV_VERSION;
    manifest["experiment"] = to_string(config.experiment);
    manifest["config"] = resolved;
    manifest["config_hash"] = ctx.config_hash;
    const auto seed = config.seed();
    manifest["seed"] = seed ? json(*seed) : json(nullptr);
    manifest["random_algorithm"] = kRandomAlgorithm;
    manifest["threads"] = options.threads;
    manifest["started"] = utc_now();

    auto files_json = [&] {
        json files = json::array();
        for (const auto& f : out.files()) files.push_back({{"name", f.name}, {"bytes", f.bytes}});
        return files;
    };

    try {
        switch (config.experiment) {
            case Experiment::single: run_single(ctx); break;
            case Experiment::refinement: run_refinement(ctx); break;
            case Experiment::energy_sweep: run_energy_sweep(ctx); break;
            case Experiment::disk: run_disk(ctx); break;
            case Experiment::power_law: run_power_law(ctx); break;
        }
    } catch (const std::exception& e) {
        manifest["finished"] = utc_now();
        manifest["status"] = "failed";
        manifest["error"] = e.what();
        manifest["files"] = files_json();
        try {
            out.write_manifest(kFailedManifestName, manifest);
        } catch (const IoError&) {
            // keep the original error
        }
        throw;
    }

    manifest["finished"] = utc_now();
    manifest["status"] = "ok";
    manifest["files"] = files_json();
    manifest["results"] = ctx.results;
    out.write_manifest(kManifestName, manifest);
    return RunSummary{out.path(), out.files(), ctx.results.dump()};
}

}  // namespace hsav::cli
