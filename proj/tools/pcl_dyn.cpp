// pcl-dyn: configuration-driven front end for the PCL/CL hierarchy solver.
//
// Exit codes: 0 success, 1 config parse error, 2 validation failure,
// 3 numerical failure (divergence, quadrature, fit, steady-state timeout).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pcl/bath.hpp"
#include "pcl/config.hpp"
#include "pcl/integrator.hpp"
#include "pcl/observables.hpp"

namespace fs = std::filesystem;
using namespace pcl;

namespace {

struct Options {
    std::string config_path;
    std::string out_dir;
    std::string levels;
    std::string model;
    std::string preset_name;
};

class Manifest {
public:
    void add(const std::string& key, const std::string& value) { m_lines.push_back(key + " = " + value); }
    void add(const std::string& key, double value) { add(key, format_meta(value)); }
    void add(const std::string& key, std::size_t value) { add(key, std::to_string(value)); }
    void note(const std::string& text) { m_lines.push_back("# " + text); }
    void block(const std::string& text) {
        std::istringstream in(text);
        for (std::string line; std::getline(in, line);) m_lines.push_back(line);
    }

    std::string str() const {
        std::string out;
        for (const auto& l : m_lines) out += l + "\n";
        return out;
    }

private:
    std::vector<std::string> m_lines;
};

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw validation_error("cannot write '" + path.string() + "'");
    f << text;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Context {
    config::RunConfig cfg;
    fs::path out;
    Manifest manifest;
    std::string command;
};

Context load(const Options& opt, const std::string& command) {
    if (opt.config_path.empty()) throw config::parse_error(command + ": --config PATH is required");
    Context ctx;
    ctx.command = command;
    ctx.cfg = config::load_file(opt.config_path);
    if (!opt.model.empty()) {
        if (opt.model == "pcl") ctx.cfg.model = config::ModelSelect::pcl;
        else if (opt.model == "cl") ctx.cfg.model = config::ModelSelect::cl;
        else if (opt.model == "both") ctx.cfg.model = config::ModelSelect::both;
        else throw config::parse_error("--model must be pcl, cl or both");
    }
    if (!opt.levels.empty()) {
        ctx.cfg.levels.clear();
        for (double v : config::detail::to_list("--levels", {opt.levels, 0}))
            ctx.cfg.levels.push_back(config::detail::to_count("--levels", {format_meta(v), 0}));
        config::validate(ctx.cfg);
    }
    ctx.out = opt.out_dir.empty() ? fs::path(ctx.cfg.out_dir) : fs::path(opt.out_dir);
    fs::create_directories(ctx.out);

    auto& m = ctx.manifest;
    m.note("pcl-dyn run manifest");
    m.add("command", command);
    m.add("config_file", opt.config_path);
    m.add("workers", worker_count());
    m.note("resolved configuration");
    m.block(config::to_text(ctx.cfg));
    if (ctx.cfg.convention == hierarchy::SignConvention::odd_paper_literal) {
        const std::string warn =
            "WARNING: coupling.sign_convention = odd-paper-literal. This table keeps only odd tier-parity "
            "couplings; it has no lambda -> 0 limit and does not match exact discrete-mode dynamics. "
            "Use it only to study the literal sign choice.";
        m.note(std::string(72, '!'));
        m.note(warn);
        m.note(std::string(72, '!'));
        std::cerr << warn << "\n";
    }
    return ctx;
}

config::ResolvedBath resolve_and_record(Context& ctx) {
    const auto t0 = std::chrono::steady_clock::now();
    auto rb = config::resolve_bath(ctx.cfg);
    ctx.manifest.note("dissipaton spectrum");
    ctx.manifest.block(bath::to_text(rb.spectrum));
    ctx.manifest.add("spectrum.eta_sum.re", rb.report.eta_sum.real());
    ctx.manifest.add("spectrum.eta_sum.im", rb.report.eta_sum.imag());
    ctx.manifest.add("spectrum.imag_relative", rb.report.imag_relative);
    if (!std::isnan(rb.fit_residual)) ctx.manifest.add("spectrum.prony_residual", rb.fit_residual);
    for (const auto& w : rb.report.warnings) {
        ctx.manifest.note("spectrum warning: " + w);
        std::cerr << "warning: " << w << "\n";
    }
    ctx.manifest.add("timing.decompose_s", seconds_since(t0));
    return rb;
}

std::string stem(const Context& ctx, const config::Member& m) { return ctx.cfg.name + m.tag; }

void finish(Context& ctx) { write_file(ctx.out / (ctx.cfg.name + "_manifest.txt"), ctx.manifest.str()); }

// ---------------------------------------------------------------------------

int cmd_decompose(const Options& opt) {
    Context ctx = load(opt, "decompose");
    const auto rb = resolve_and_record(ctx);
    std::string report = bath::to_text(rb.spectrum);
    const auto& cfg = ctx.cfg;
    for (double lambda : cfg.lambda) report += "g(lambda=" + format_meta(lambda) + ") = " + format_meta(rb.report.g(lambda)) + "\n";
    if (cfg.bath_kind == bath::DensityKind::drude) {
        const auto sd = config::spectral_density(cfg);
        const auto grid = bath::log_grid(0.1 / cfg.gamma_c, 10.0 / cfg.gamma_c, 60);
        const auto rec = bath::reconstruction_error(rb.spectrum, sd, grid, config::quadrature(cfg));
        const auto cut = bath::cutoff_dependence(sd, cfg.beta, 0.0, config::quadrature(cfg));
        std::ostringstream os;
        os << "reconstruction.window = [" << format_meta(grid.front()) << ", " << format_meta(grid.back()) << "]\n"
           << "reconstruction.max_abs_error = " << format_meta(rec.max_abs_error) << "\n"
           << "reconstruction.max_relative_error = " << format_meta(rec.max_relative_error) << "\n"
           << "reconstruction.backward_max_abs_error = " << format_meta(rec.backward_max_abs_error) << "\n";
        for (std::size_t i = 0; i < cut.cutoffs.size(); ++i)
            os << "quadrature.C0(cutoff=" << format_meta(cut.cutoffs[i]) << ") = " << format_meta(cut.values[i].real())
               << "\n";
        for (std::size_t i = 0; i < cut.differences.size(); ++i)
            os << "quadrature.C0_step" << i + 1 << " = " << format_meta(cut.differences[i].real()) << "\n";
        os << "# Drude C(0) grows like (xi/pi) ln(cutoff); reference step (xi/pi) ln 2 = "
           << format_meta(cfg.xi / pi * std::log(2.0)) << "\n";
        report += os.str();
    } else {
        report += "# discrete mode: correlation is exactly a sum of two exponentials\n";
    }
    std::cout << report;
    write_file(ctx.out / (cfg.name + "_spectrum.txt"), bath::to_text(rb.spectrum));
    ctx.manifest.note("decomposition report");
    ctx.manifest.block(report);
    finish(ctx);
    return 0;
}

struct Task {
    config::Member member;
    ModelKind which;
};

struct TaskResult {
    std::optional<EvolveResult> result;
    double seconds{0.0};
};

std::vector<Task> tasks_for(const config::RunConfig& cfg) {
    std::vector<Task> tasks;
    for (const auto& m : config::members(cfg))
        for (auto which : config::selected_models(cfg.model)) tasks.push_back({m, which});
    return tasks;
}

std::vector<TaskResult> run_tasks(const Context& ctx, const bath::DissipatonSpectrum& spectrum,
                                  const std::vector<Task>& tasks) {
    return parallel_map(tasks.size(), worker_count(), [&](std::size_t i) {
        const auto t0 = std::chrono::steady_clock::now();
        TaskResult r;
        const auto model = config::system_model(ctx.cfg, tasks[i].member);
        r.result = evolve(model, spectrum, config::evolve_settings(ctx.cfg, tasks[i].which));
        r.seconds = seconds_since(t0);
        return r;
    });
}

void record_run(Manifest& m, const std::string& key, const EvolveResult& r, double seconds) {
    m.add(key + ".g", r.g);
    m.add(key + ".hierarchy_size", r.hierarchy_size);
    m.add(key + ".table_nnz", r.table_nnz);
    m.add(key + ".max_trace_defect", r.max_trace_defect);
    m.add(key + ".max_hermiticity_defect", r.max_hermiticity_defect);
    m.add(key + ".min_eigenvalue", r.min_eigenvalue);
    m.add(key + ".rows", r.trajectory.rows.size());
    m.add(key + ".timing_s", seconds);
}

struct SteadyRow {
    config::Member member;
    ModelKind which;
    std::optional<Matrix> rho;
    std::string status{"ok"};
    double residual{0.0}, t_reached{0.0}, agreement{0.0};
};

int run_steady(Context& ctx, const bath::DissipatonSpectrum& spectrum) {
    const auto tasks = tasks_for(ctx.cfg);
    const auto opts = config::steady_options(ctx.cfg);
    auto rows = parallel_map(tasks.size(), worker_count(), [&](std::size_t i) {
        SteadyRow row{tasks[i].member, tasks[i].which, std::nullopt, "ok", 0.0, 0.0, 0.0};
        try {
            const auto model = config::system_model(ctx.cfg, tasks[i].member);
            const auto res = steady_state(model, spectrum, ctx.cfg.L, tasks[i].which, opts);
            row.rho = res.rho;
            row.residual = res.residual;
            row.t_reached = res.t_reached;
            row.agreement = res.agreement;
        } catch (const numerical_error& e) {
            row.status = e.what();
        }
        return row;
    });

    std::string csv = "alpha,lambda,model,sx,sy,sz,bloch_norm,entropy,p_plus,p_minus,commutator_norm,status\n";
    int code = 0;
    for (const auto& r : rows) {
        csv += format_meta(r.member.alpha) + "," + format_meta(r.member.lambda) + "," + to_string(r.which) + ",";
        std::string status = r.status;
        if (r.rho) {
            const auto b = obs::pauli_expectations(*r.rho);
            const auto ep = obs::eigen_populations(*r.rho);
            const auto model = config::system_model(ctx.cfg, r.member);
            const double comm = (*r.rho * model.H - model.H * *r.rho).norm();
            std::string entropy = "nan";
            try {
                entropy = format_meta(obs::vn_entropy(*r.rho));
            } catch (const error& e) {
                status = e.what();
            }
            for (double v : {b.x, b.y, b.z, b.norm}) csv += format_meta(v) + ",";
            csv += entropy + "," + format_meta(ep.P(0)) + "," + format_meta(ep.P(1)) + "," + format_meta(comm) + ",";
        } else {
            csv += "nan,nan,nan,nan,nan,nan,nan,nan,";
        }
        if (status != "ok") code = 3;
        for (char& ch : status)
            if (ch == ',' || ch == '\n') ch = ';';
        csv += status + "\n";
        const std::string key = "steady" + r.member.tag + "." + to_string(r.which);
        ctx.manifest.add(key + ".status", status);
        ctx.manifest.add(key + ".residual", r.residual);
        ctx.manifest.add(key + ".t_reached", r.t_reached);
        ctx.manifest.add(key + ".dense_agreement", r.agreement);
    }
    write_file(ctx.out / (ctx.cfg.name + "_steady.csv"), csv);
    std::cout << csv;
    return code;
}

int cmd_evolve(const Options& opt) {
    Context ctx = load(opt, "evolve");
    const auto rb = resolve_and_record(ctx);
    const auto tasks = tasks_for(ctx.cfg);
    const auto results = run_tasks(ctx, rb.spectrum, tasks);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const std::string base = stem(ctx, tasks[i].member) + "_" + to_string(tasks[i].which);
        const auto& r = *results[i].result;
        write_file(ctx.out / (base + ".csv"), obs::to_csv(r.trajectory));
        record_run(ctx.manifest, "run." + base, r, results[i].seconds);
        std::cout << "wrote " << (ctx.out / (base + ".csv")).string() << "\n";
    }
    int code = 0;
    if (ctx.cfg.steady != config::SteadySelect::none) code = run_steady(ctx, rb.spectrum);
    finish(ctx);
    return code;
}

int cmd_compare(const Options& opt) {
    Context ctx = load(opt, "compare");
    ctx.cfg.model = config::ModelSelect::both;
    const auto rb = resolve_and_record(ctx);
    const auto tasks = tasks_for(ctx.cfg);
    const auto results = run_tasks(ctx, rb.spectrum, tasks);
    static const char* cols[] = {"sx", "sy", "sz", "bloch_norm", "entropy", "p_plus", "p_minus"};
    for (std::size_t i = 0; i + 1 < tasks.size(); i += 2) {
        const auto& pcl_run = *results[i].result;
        const auto& cl_run = *results[i + 1].result;
        const auto& a = pcl_run.trajectory.rows;
        const auto& b = cl_run.trajectory.rows;
        if (a.size() != b.size()) throw validation_error("compare: PCL and CL time grids differ in length");
        std::string out;
        for (const auto& [k, v] : pcl_run.trajectory.metadata)
            if (k != "model" && k != "g") out += "# " + k + "=" + v + "\n";
        out += "# g_pcl=" + format_meta(pcl_run.g) + "\n";
        out += "t";
        for (const char* model : {"pcl", "cl"})
            for (const char* c : cols) out += std::string(",") + model + "_" + c;
        out += "\n";
        for (std::size_t r = 0; r < a.size(); ++r) {
            if (a[r].t != b[r].t) throw validation_error("compare: PCL and CL time grids differ");
            // Reuse the trajectory row formatter and drop its leading t column.
            const std::string pa = obs::format_row(a[r]);
            const std::string pb = obs::format_row(b[r]);
            out += pa + pb.substr(pb.find(',')) + "\n";
        }
        const std::string base = stem(ctx, tasks[i].member);
        write_file(ctx.out / (base + "_compare.csv"), out);
        record_run(ctx.manifest, "run." + base + "_pcl", pcl_run, results[i].seconds);
        record_run(ctx.manifest, "run." + base + "_cl", cl_run, results[i + 1].seconds);
        std::cout << "wrote " << (ctx.out / (base + "_compare.csv")).string() << "\n";
    }
    finish(ctx);
    return 0;
}

int cmd_scan(const Options& opt) {
    Context ctx = load(opt, "scan-L");
    const auto rb = resolve_and_record(ctx);
    const auto& levels = ctx.cfg.levels;
    for (const auto& member : config::members(ctx.cfg))
        for (auto which : config::selected_models(ctx.cfg.model)) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto model = config::system_model(ctx.cfg, member);
            const auto scan =
                tier_convergence_scan(model, rb.spectrum, config::evolve_settings(ctx.cfg, which), levels, worker_count());
            const std::string base = stem(ctx, member) + "_" + to_string(which);
            std::string csv = "L_from,L_to,max_bloch_deviation\n";
            for (std::size_t i = 0; i < scan.deviations.size(); ++i)
                csv += std::to_string(levels[i]) + "," + std::to_string(levels[i + 1]) + "," +
                       format_meta(scan.deviations[i]) + "\n";
            write_file(ctx.out / (base + "_scan.csv"), csv);
            std::cout << "# " << base << " monotone=" << (scan.monotone ? "yes" : "no") << "\n" << csv;
            ctx.manifest.add("scan." + base + ".monotone", std::string(scan.monotone ? "true" : "false"));
            ctx.manifest.add("scan." + base + ".timing_s", seconds_since(t0));
        }
    finish(ctx);
    return 0;
}

int cmd_preset(const Options& opt) {
    const std::string text = config::preset_text(opt.preset_name);
    config::load_text(text);
    if (opt.out_dir.empty()) {
        std::cout << text;
    } else {
        fs::create_directories(opt.out_dir);
        const fs::path path = fs::path(opt.out_dir) / (opt.preset_name + ".toml");
        write_file(path, text);
        std::cout << "wrote " << path.string() << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pcl-dyn: hierarchical equations of motion for phase-coupled and linearly coupled baths"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&opt](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "Run configuration file")->required();
        sub->add_option("--out", opt.out_dir, "Output directory (overrides output.dir)");
        sub->add_option("--model", opt.model, "pcl, cl or both (overrides coupling.model)");
    };
    auto* decompose = app.add_subcommand("decompose", "Decompose the bath correlation function and report errors");
    add_common(decompose);
    auto* evolve_cmd = app.add_subcommand("evolve", "Propagate the hierarchy and write trajectory CSVs");
    add_common(evolve_cmd);
    auto* compare = app.add_subcommand("compare", "Write PCL and CL trajectories side by side");
    add_common(compare);
    auto* scan = app.add_subcommand("scan-L", "Tier-convergence scan over truncation levels");
    add_common(scan);
    scan->add_option("--levels", opt.levels, "Comma-separated truncation levels, e.g. 2,4,6,8");
    auto* preset = app.add_subcommand("preset", "Print or write a figure preset configuration");
    preset->add_option("name", opt.preset_name, "fig2, fig3 or fig4")->required();
    preset->add_option("--out", opt.out_dir, "Directory to write NAME.toml into");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*decompose) return cmd_decompose(opt);
        if (*evolve_cmd) return cmd_evolve(opt);
        if (*compare) return cmd_compare(opt);
        if (*scan) return cmd_scan(opt);
        if (*preset) return cmd_preset(opt);
    } catch (const config::parse_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const accuracy_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const fit_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const error& e) {
        std::cerr << "validation failure: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "validation failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
