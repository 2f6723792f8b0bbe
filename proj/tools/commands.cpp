#include "commands.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "hcspmm/hcspmm.hpp"

namespace hcspmm::cli {

using nlohmann::ordered_json;

nlohmann::ordered_json to_json(const RunReport& r) {
    ordered_json j;
    j["command"] = r.command;
    j["inputs"] = r.inputs;
    j["outputs"] = r.outputs;
    j["metrics"] = r.metrics;
    j["version"] = r.version;
    return j;
}

namespace {

struct Globals {
    unsigned threads = default_threads();
    std::uint64_t seed = 42;
    std::string precision = "f64";
    bool quiet = false;
    std::string report_file;
};

struct Context {
    const Globals& g;
    std::ostream& err;

    void note(const std::string& msg) const {
        if (!g.quiet) err << "hcspmm: " << msg << '\n';
    }
};

RunReport new_report(const std::string& command, const Globals& g) {
    RunReport r;
    r.command = command;
    r.inputs["threads"] = g.threads;
    r.inputs["seed"] = g.seed;
    r.inputs["precision"] = g.precision;
    r.version["tool"] = std::string("hcspmm ") + kToolVersion;
    r.version["report_format"] = kReportFormat;
    r.version["params_file"] = nullptr;
    return r;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// .mtx files go through the Matrix Market reader, anything else is an edge list.
Graph load_graph(const std::string& path, bool directed, RunReport& r) {
    if (ends_with(path, ".mtx")) return graph_from_matrix(load_matrix_market(path));
    auto f = load_edge_list_file(path, !directed);
    r.metrics["index_base"] = f.index_base;
    return std::move(f.graph);
}

CostParams load_params(const std::string& path, RunReport& r) {
    if (path.empty()) return CostParams::defaults();
    const auto f = load_cost_params(path);
    r.version["params_file"] = f.version;
    return f.params;
}

SelectorModel load_or_default_model(const std::string& path, const CostParams& params,
                                    index_t dim, const Context& ctx) {
    if (!path.empty()) return load_model(path);
    ctx.note("no --model given; training the default model on the analytic cost model");
    return default_model(params, dim);
}

/// "random:dim=32,seed=7" or a CSV path.
template <typename T>
DenseMatrix<T> load_dense(const std::string& spec, index_t rows, std::uint64_t default_seed,
                          index_t default_dim) {
    const std::string prefix = "random:";
    if (spec.rfind(prefix, 0) == 0 || spec == "random") {
        index_t dim = default_dim;
        std::uint64_t seed = default_seed;
        std::stringstream ss(spec.size() > prefix.size() ? spec.substr(prefix.size()) : "");
        std::string kv;
        while (std::getline(ss, kv, ',')) {
            if (kv.empty()) continue;
            const auto eq = kv.find('=');
            const std::string key = kv.substr(0, eq);
            const std::string val = eq == std::string::npos ? "" : kv.substr(eq + 1);
            bool ok = false;
            if (key == "dim") ok = detail::parse_number(std::string_view(val), dim) && dim >= 1;
            else if (key == "seed") ok = detail::parse_number(std::string_view(val), seed);
            if (!ok) throw InputError("bad dense spec '" + spec + "' at '" + kv + "'");
        }
        Rng rng(seed);
        return random_dense<T>(rows, dim, rng);
    }
    std::ifstream in(spec);
    if (!in) throw InputError("cannot open dense matrix '" + spec + "'");
    auto x = read_dense_csv<T>(in, spec);
    detail::require(x.rows == rows, "dense matrix '" + spec + "' has " + std::to_string(x.rows) +
                                        " rows, expected " + std::to_string(rows));
    return x;
}

template <typename T>
double checksum(const DenseMatrix<T>& z) {
    double s = 0;
    for (T v : z.data) s += static_cast<double>(v);
    return s;
}

template <typename F>
auto with_precision(const std::string& p, F&& f) {
    if (p == "f32") return f(float{});
    return f(double{});
}

struct WindowSummary {
    index_t windows_total = 0;
    index_t windows_empty = 0;
    index_t windows_tile = 0;
    double mean_ci = 0;  // over non-empty windows
};

WindowSummary summarize(const std::vector<WindowFeatures>& feats, const Assignment& assign) {
    WindowSummary s;
    s.windows_total = static_cast<index_t>(feats.size());
    double ci_sum = 0;
    for (std::size_t i = 0; i < feats.size(); ++i) {
        if (feats[i].nnz == 0) {
            ++s.windows_empty;
            continue;
        }
        ci_sum += feats[i].computing_intensity;
        if (assign[i] == Path::Tile) ++s.windows_tile;
    }
    const index_t nonempty = s.windows_total - s.windows_empty;
    s.mean_ci = nonempty > 0 ? ci_sum / static_cast<double>(nonempty) : 0.0;
    return s;
}

void put_stats(RunReport& r, const SpmmStats& st) {
    r.metrics["windows_scalar"] = st.windows_scalar;
    r.metrics["windows_tile"] = st.windows_tile;
    r.metrics["entries_scalar"] = st.entries_scalar;
    r.metrics["entries_tile"] = st.entries_tile;
    r.metrics["tiles_processed"] = st.tiles_processed;
}

ordered_json traffic_json(const TrafficReport& t) {
    return {{"intermediate_writes", t.intermediate_writes},
            {"intermediate_reads", t.intermediate_reads},
            {"pass_launches", t.pass_launches},
            {"cache_writes", t.cache_writes},
            {"cache_passes", t.cache_passes}};
}

std::string today_utc() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[16];
    std::strftime(buf, sizeof buf, "%Y-%m-%d", &tm);
    return buf;
}

// Re-throws with the stage name prefixed, preserving the error category.
template <typename F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const InputError& e) {
        throw InputError(std::string("stage ") + name + ": " + e.what());
    } catch (const InvariantError& e) {
        throw InvariantError(std::string("stage ") + name + ": " + e.what());
    }
}

// ---------------------------------------------------------------- commands

struct ConvertArgs {
    std::string in, format = "auto", out;
    bool directed = false;
};

RunReport cmd_convert(const ConvertArgs& a, const Context& ctx) {
    auto r = new_report("convert", ctx.g);
    std::string format = a.format;
    if (format == "auto") format = ends_with(a.in, ".mtx") ? "mtx" : "edgelist";
    r.inputs["in"] = a.in;
    r.inputs["format"] = format;
    r.inputs["directed"] = a.directed;

    SparseCsr<double> m;
    MmField field = MmField::Pattern;
    if (format == "mtx") {
        auto f = read_matrix_market_file(a.in);
        m = std::move(f.matrix);
        field = f.field;
    } else {
        auto f = load_edge_list_file(a.in, !a.directed);
        m = std::move(f.graph.adjacency);
        r.metrics["index_base"] = f.index_base;
    }
    if (!a.out.empty()) {
        write_matrix_market_file(a.out, m, field);
        r.outputs["matrix"] = a.out;
    }
    r.metrics["num_vertices"] = m.num_rows;
    r.metrics["num_cols"] = m.num_cols;
    r.metrics["nnz"] = m.nnz();
    return r;
}

struct PartitionArgs {
    std::string matrix, out, model, params;
};

RunReport cmd_partition_report(const PartitionArgs& a, const Context& ctx) {
    auto r = new_report("partition-report", ctx.g);
    r.inputs["matrix"] = a.matrix;
    const auto m = load_matrix_market(a.matrix);
    const auto p = partition(m, kWindowHeight, ctx.g.threads);
    const auto feats = features(p);
    if (!a.out.empty()) {
        auto out = open_out(a.out);
        out << "window_id,nnz,ncols,density,computing_intensity\n";
        for (std::size_t i = 0; i < feats.size(); ++i)
            out << i << ',' << feats[i].nnz << ',' << feats[i].ncols << ','
                << detail::format_double(feats[i].density) << ','
                << detail::format_double(feats[i].computing_intensity) << '\n';
        r.outputs["windows_csv"] = a.out;
    }
    Assignment assign(feats.size(), Path::Scalar);
    if (!a.model.empty()) {
        r.inputs["model"] = a.model;
        assign = classify(load_model(a.model), p);
    }
    const auto s = summarize(feats, assign);
    r.metrics["windows_total"] = s.windows_total;
    r.metrics["windows_empty"] = s.windows_empty;
    r.metrics["nnz"] = m.nnz();
    r.metrics["mean_ci"] = s.mean_ci;
    if (!a.model.empty()) r.metrics["windows_tile"] = s.windows_tile;
    return r;
}

struct ProviderHandle {
    std::unique_ptr<TimingProvider> provider;
    std::string name;
};

ProviderHandle make_provider(const std::string& spec, const CostParams& params,
                             std::uint64_t seed) {
    if (spec == "cost-model") return {std::make_unique<AnalyticProvider>(params), spec};
    if (spec == "measured") return {std::make_unique<MeasuredCpuProvider>(seed), spec};
    if (spec.rfind("csv:", 0) == 0) {
        auto p = std::make_unique<CsvTimingProvider>(CsvTimingProvider::from_file(spec.substr(4)));
        return {std::move(p), spec};
    }
    throw InputError("unknown provider '" + spec + "' (cost-model, measured, csv:<path>)");
}

struct TrainArgs {
    std::string grid = "default", provider = "cost-model", params, out;
    index_t repeats = 20;
    index_t dim = 32;
};

RunReport cmd_train_selector(const TrainArgs& a, const Context& ctx) {
    auto r = new_report("train-selector", ctx.g);
    r.inputs["grid"] = a.grid;
    r.inputs["provider"] = a.provider;
    r.inputs["repeats"] = a.repeats;
    r.inputs["dim"] = a.dim;
    const auto params = load_params(a.params, r);
    if (!a.params.empty()) r.inputs["params"] = a.params;

    auto handle = make_provider(a.provider, params, ctx.g.seed);
    const auto grid = a.grid == "full" ? full_training_grid(ctx.g.seed)
                                       : default_training_grid(ctx.g.seed);
    if (!handle.provider->deterministic())
        ctx.note("provider '" + handle.name + "' is timing based; labels vary between runs");
    const auto samples = collect_samples(grid, *handle.provider, a.repeats, a.dim, ctx.g.threads);
    TrainOptions opt;
    opt.seed = ctx.g.seed;
    const auto res = train(samples, opt);
    if (!a.out.empty()) {
        save_model(res.model, a.out);
        r.outputs["model"] = a.out;
    }
    index_t scalar_labels = 0;
    for (const auto& s : samples) scalar_labels += s.label;
    r.metrics["samples"] = static_cast<index_t>(samples.size());
    r.metrics["labels_scalar"] = scalar_labels;
    r.metrics["train_accuracy"] = accuracy(res.model, samples);
    r.metrics["epochs_run"] = res.epochs_run;
    r.metrics["final_loss"] = res.final_loss;
    return r;
}

struct ClassifyArgs {
    std::string model, matrix, out;
};

RunReport cmd_classify(const ClassifyArgs& a, const Context& ctx) {
    auto r = new_report("classify", ctx.g);
    r.inputs["model"] = a.model;
    r.inputs["matrix"] = a.matrix;
    const auto model = load_model(a.model);
    const auto p = partition(load_matrix_market(a.matrix), kWindowHeight, ctx.g.threads);
    const auto assign = classify(model, p);
    const auto feats = features(p);
    if (!a.out.empty()) {
        auto out = open_out(a.out);
        out << "window_id,ncols,density,path\n";
        for (std::size_t i = 0; i < feats.size(); ++i)
            out << i << ',' << feats[i].ncols << ',' << detail::format_double(feats[i].density)
                << ',' << to_string(assign[i]) << '\n';
        r.outputs["assignment"] = a.out;
    }
    const auto s = summarize(feats, assign);
    r.metrics["windows_total"] = s.windows_total;
    r.metrics["windows_empty"] = s.windows_empty;
    r.metrics["windows_tile"] = s.windows_tile;
    r.metrics["windows_scalar"] = s.windows_total - s.windows_empty - s.windows_tile;
    return r;
}

struct CalibrateArgs {
    std::string provider = "measured", params, out;
    index_t rounds = 7;
    index_t repeats = 20;
    index_t dim = 32;
};

// Windows spread over ncols and entries-per-column so both design matrices
// are well conditioned; ncols deliberately not all multiples of 8.
std::vector<RowWindow<double>> calibration_windows(std::uint64_t seed) {
    std::vector<RowWindow<double>> out;
    std::uint64_t s = seed;
    for (index_t ncols = 1; ncols <= 128; ncols += 6)
        for (index_t k : {1, 4, 8, 12, 15}) out.push_back(generate_synthetic(ncols, k * ncols, s++));
    return out;
}

RunReport cmd_calibrate(const CalibrateArgs& a, const Context& ctx) {
    auto r = new_report("calibrate", ctx.g);
    r.inputs["provider"] = a.provider;
    r.inputs["rounds"] = a.rounds;
    r.inputs["repeats"] = a.repeats;
    detail::require(a.rounds >= 1 && a.repeats >= 1, "calibrate: rounds and repeats must be >= 1");
    const auto base = load_params(a.params, r);
    auto handle = make_provider(a.provider, base, ctx.g.seed);
    const bool csv = a.provider.rfind("csv:", 0) == 0;
    const std::vector<index_t> dims = csv ? std::vector<index_t>{a.dim} : std::vector<index_t>{32, 96};

    const auto windows = calibration_windows(ctx.g.seed);
    struct Job {
        std::size_t w;
        index_t dim;
        std::vector<double> t_scalar, t_tile;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < windows.size(); ++i)
        for (index_t d : dims) jobs.push_back({i, d, {}, {}});
    // Interleaved rounds with a per-window median: host speed drifts in
    // phases, and a minimum would favor windows that hit a fast phase.
    const index_t rounds = handle.provider->deterministic() ? 1 : a.rounds;
    for (index_t round = 0; round < rounds; ++round) {
        for (auto& j : jobs) {
            const auto t = handle.provider->measure(windows[j.w], j.dim, a.repeats);
            j.t_scalar.push_back(t.t_scalar);
            j.t_tile.push_back(t.t_tile);
        }
    }
    auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
        return v[v.size() / 2];
    };
    std::vector<CalibrationSample> samples;
    for (const auto& j : jobs)
        samples.push_back({features(windows[j.w]), j.dim, median(j.t_scalar), median(j.t_tile)});
    const auto res = calibrate(samples);
    for (const auto& w : res.warnings) ctx.note("warning: " + w);

    if (!a.out.empty()) {
        CostParamsFile f;
        f.params = res.params;
        f.provenance = {handle.name, today_utc(), static_cast<index_t>(samples.size())};
        save_cost_params(a.out, f);
        r.outputs["params"] = a.out;
    }
    r.metrics["samples"] = static_cast<index_t>(samples.size());
    r.metrics["r2_scalar"] = res.r2_scalar;
    r.metrics["r2_tile"] = res.r2_tile;
    r.metrics["alpha_scalar"] = res.params.alpha_scalar;
    r.metrics["beta_scalar"] = res.params.beta_scalar;
    r.metrics["alpha_tile"] = res.params.alpha_tile;
    r.metrics["beta_tile"] = res.params.beta_tile;
    r.metrics["gamma_tile"] = res.params.gamma_tile;
    r.metrics["warnings"] = static_cast<index_t>(res.warnings.size());
    return r;
}

struct SweepArgs {
    std::string params, kind = "density", out;
    index_t ncols = 32, dim = 32, nnz = 256;
};

RunReport cmd_sweep(const SweepArgs& a, const Context& ctx) {
    auto r = new_report("sweep", ctx.g);
    r.inputs["kind"] = a.kind;
    r.inputs["dim"] = a.dim;
    const auto params = load_params(a.params, r);
    if (!a.params.empty()) r.inputs["params"] = a.params;
    detail::require(a.dim >= 1 && a.ncols >= 1 && a.nnz >= 1, "sweep: sizes must be >= 1");
    std::vector<SweepPoint> pts;
    if (a.kind == "ncols") {
        r.inputs["nnz"] = a.nnz;
        pts = sweep_ncols(a.nnz, a.dim, params);
    } else {
        r.inputs["ncols"] = a.ncols;
        pts = sweep_density(a.ncols, a.dim, params);
    }
    if (!a.out.empty()) {
        auto out = open_out(a.out);
        out << "ncols,nnz,density,sparsity_zero_fraction,t_scalar,t_tile\n";
        for (const auto& p : pts)
            out << p.ncols << ',' << p.nnz << ',' << detail::format_double(p.density) << ','
                << detail::format_double(1.0 - p.density) << ','
                << detail::format_double(p.t_scalar) << ',' << detail::format_double(p.t_tile)
                << '\n';
        r.outputs["sweep_csv"] = a.out;
    }
    r.metrics["points"] = static_cast<index_t>(pts.size());
    const auto cross = crossover_density(a.ncols, a.dim, params);
    r.metrics["crossover_density"] = cross ? ordered_json(*cross) : ordered_json(nullptr);
    r.metrics["tile_memory_dominates"] = tile_memory_dominates(params, a.ncols, a.dim) ? 1 : 0;
    return r;
}

struct SpmmArgs {
    std::string matrix, dense = "random:dim=32", mode = "hybrid", model, params, out, stats;
};

RunReport cmd_spmm(const SpmmArgs& a, const Context& ctx) {
    auto r = new_report("spmm", ctx.g);
    r.inputs["matrix"] = a.matrix;
    r.inputs["dense"] = a.dense;
    r.inputs["mode"] = a.mode;
    const auto params = load_params(a.params, r);
    const auto m = load_matrix_market(a.matrix);

    with_precision(ctx.g.precision, [&]<typename T>(T) {
        const auto csr = m.template cast<T>();
        const auto x = load_dense<T>(a.dense, csr.num_cols, ctx.g.seed, 32);
        SpmmResult<T> res;
        Assignment assign;
        Partition<T> p;
        if (a.mode == "scalar") {
            res = spmm_scalar(csr, x, ctx.g.threads);
        } else {
            p = partition(csr, kWindowHeight, ctx.g.threads);
            if (a.mode == "tile") {
                res = spmm_tile(p, x, ctx.g.threads);
                assign.assign(p.size(), Path::Tile);
            } else {
                const auto model = load_or_default_model(a.model, params, x.dim, ctx);
                assign = classify(model, p);
                res = spmm_hybrid(p, assign, x, ctx.g.threads);
            }
        }
        if (!a.out.empty()) {
            auto out = open_out(a.out);
            write_dense_csv(out, res.z);
            r.outputs["z"] = a.out;
        }
        if (!a.stats.empty()) {
            ordered_json s;
            s["windows"] = ordered_json::array();
            for (std::size_t i = 0; i < p.size(); ++i) {
                const auto f = features(p[i]);
                s["windows"].push_back({{"window_id", i},
                                        {"nnz", f.nnz},
                                        {"ncols", f.ncols},
                                        {"density", f.density},
                                        {"path", std::string(to_string(assign[i]))}});
            }
            auto out = open_out(a.stats);
            out << s.dump(2) << '\n';
            r.outputs["stats"] = a.stats;
        }
        put_stats(r, res.stats);
        r.metrics["rows"] = res.z.rows;
        r.metrics["dim"] = res.z.dim;
        r.metrics["checksum"] = checksum(res.z);
        return 0;
    });
    return r;
}

struct LoaArgs {
    std::string graph, out, perm, report, model, params;
    index_t vw = 128;
    bool directed = false;
};

ordered_json window_table(const std::vector<WindowFeatures>& feats, const Assignment& assign) {
    auto arr = ordered_json::array();
    for (std::size_t i = 0; i < feats.size(); ++i)
        arr.push_back({{"window_id", i},
                       {"nnz", feats[i].nnz},
                       {"ncols", feats[i].ncols},
                       {"computing_intensity", feats[i].computing_intensity},
                       {"path", std::string(to_string(assign[i]))}});
    return arr;
}

RunReport cmd_loa(const LoaArgs& a, const Context& ctx) {
    auto r = new_report("loa", ctx.g);
    r.inputs["graph"] = a.graph;
    r.inputs["vw"] = a.vw;
    const auto params = load_params(a.params, r);
    const auto g = load_graph(a.graph, a.directed, r);
    const auto model = load_or_default_model(a.model, params, 32, ctx);

    const auto p_before = partition(g.adjacency, kWindowHeight, ctx.g.threads);
    const auto grouping = build_windows_optimized(g, a.vw);
    const auto re = reorder(g, grouping);
    const auto p_after = partition(re.graph.adjacency, kWindowHeight, ctx.g.threads);
    const auto f_before = features(p_before), f_after = features(p_after);
    const auto a_before = classify(model, p_before), a_after = classify(model, p_after);
    const auto before = summarize(f_before, a_before), after = summarize(f_after, a_after);

    if (!a.out.empty()) {
        write_matrix_market_file(a.out, re.graph.adjacency, MmField::Pattern);
        r.outputs["reordered"] = a.out;
    }
    if (!a.perm.empty()) {
        auto out = open_out(a.perm);
        out << "old_id,new_id\n";
        for (std::size_t v = 0; v < re.perm.size(); ++v) out << v << ',' << re.perm[v] << '\n';
        r.outputs["perm"] = a.perm;
    }
    if (!a.report.empty()) {
        ordered_json j;
        j["vw"] = a.vw;
        j["windows_total"] = before.windows_total;
        j["mean_ci_before"] = before.mean_ci;
        j["mean_ci_after"] = after.mean_ci;
        j["windows_tile_before"] = before.windows_tile;
        j["windows_tile_after"] = after.windows_tile;
        j["before"] = window_table(f_before, a_before);
        j["after"] = window_table(f_after, a_after);
        auto out = open_out(a.report);
        out << j.dump(2) << '\n';
        r.outputs["report"] = a.report;
    }
    r.metrics["num_vertices"] = g.num_vertices;
    r.metrics["windows_total"] = before.windows_total;
    r.metrics["mean_ci_before"] = before.mean_ci;
    r.metrics["mean_ci_after"] = after.mean_ci;
    r.metrics["windows_tile_before"] = before.windows_tile;
    r.metrics["windows_tile_after"] = after.windows_tile;
    return r;
}

struct GnnArgs {
    std::string graph, mode = "both", model, params, out, norm = "gcn";
    index_t din = 32, dout = 22, repeats = 5;
    bool directed = false;
};

Normalization parse_norm(const std::string& s) {
    if (s == "gcn") return Normalization::Gcn;
    if (s == "row") return Normalization::RowNormalized;
    if (s == "raw") return Normalization::Raw;
    return Normalization::SelfLoopSum;
}

RunReport cmd_gnn_bench(const GnnArgs& a, const Context& ctx) {
    auto r = new_report("gnn-bench", ctx.g);
    r.inputs["graph"] = a.graph;
    r.inputs["din"] = a.din;
    r.inputs["dout"] = a.dout;
    r.inputs["mode"] = a.mode;
    r.inputs["norm"] = a.norm;
    r.inputs["repeats"] = a.repeats;
    detail::require(a.din >= 1 && a.dout >= 1, "gnn-bench: dimensions must be >= 1");
    const auto params = load_params(a.params, r);
    const auto g = load_graph(a.graph, a.directed, r);
    const auto model = load_or_default_model(a.model, params, a.din, ctx);
    const auto a_norm = normalize_adj(g, parse_norm(a.norm));

    std::vector<FusionMode> modes;
    if (a.mode != "fused") modes.push_back(FusionMode::Unfused);
    if (a.mode != "unfused") modes.push_back(FusionMode::Fused);

    with_precision(ctx.g.precision, [&]<typename T>(T) {
        const auto op = AggregationOperator<T>::build(a_norm, ctx.g.threads);
        const auto assign = classify(model, op.windows);
        Rng rng(ctx.g.seed);
        const auto x = random_dense<T>(g.num_vertices, a.din, rng);
        const GnnLayer<T> layer{random_dense<T>(a.din, a.dout, rng)};

        ordered_json bench;
        bench["graph"] = a.graph;
        bench["num_vertices"] = g.num_vertices;
        bench["din"] = a.din;
        bench["dout"] = a.dout;
        bench["precision"] = ctx.g.precision;
        bench["modes"] = ordered_json::array();
        std::vector<DenseMatrix<T>> outputs;
        for (auto mode : modes) {
            const std::string name(to_string(mode));
            const auto f = forward(layer, op, x, mode, assign, ctx.g.threads);
            outputs.push_back(f.x_next);
            const auto b = layer_bench(layer, op, x, assign, mode, a.repeats, ctx.g.threads);
            bench["modes"].push_back({{"mode", name},
                                      {"forward_seconds", b.forward_seconds},
                                      {"backward_seconds", b.backward_seconds},
                                      {"forward_traffic", traffic_json(b.forward_traffic)},
                                      {"backward_traffic", traffic_json(b.backward_traffic)}});
            const auto fwd = traffic_json(b.forward_traffic);
            const auto bwd = traffic_json(b.backward_traffic);
            for (const auto& [k, v] : fwd.items()) r.metrics[name + "_forward_" + k] = v;
            for (const auto& [k, v] : bwd.items()) r.metrics[name + "_backward_" + k] = v;
            r.metrics[name + "_checksum"] = checksum(f.x_next);
        }
        if (outputs.size() == 2) {
            double worst = 0;
            for (std::size_t i = 0; i < outputs[0].data.size(); ++i) {
                const double u = outputs[0].data[i], f = outputs[1].data[i];
                worst = std::max(worst, std::abs(u - f) / std::max(1.0, std::abs(u)));
            }
            r.metrics["max_rel_diff"] = worst;
        }
        auto out = open_out(a.out);
        out << bench.dump(2) << '\n';
        r.outputs["bench"] = a.out;
        return 0;
    });
    r.metrics["num_vertices"] = g.num_vertices;
    r.metrics["windows_total"] = detail::ceil_div(g.num_vertices, kWindowHeight);
    return r;
}

struct PipelineArgs {
    std::string graph, model, params, dense, out;
    bool loa = false;
    bool directed = false;
    index_t vw = 128;
    index_t dim = 32;
};

RunReport cmd_pipeline(const PipelineArgs& a, const Context& ctx) {
    auto r = new_report("pipeline", ctx.g);
    r.inputs["graph"] = a.graph;
    r.inputs["loa"] = a.loa;
    r.inputs["vw"] = a.vw;
    r.inputs["dim"] = a.dim;
    if (!a.model.empty()) r.inputs["model"] = a.model;
    if (!a.params.empty()) r.inputs["params"] = a.params;
    if (!a.dense.empty()) r.inputs["dense"] = a.dense;

    const auto params = stage("params", [&] { return load_params(a.params, r); });
    const auto g = stage("load", [&] { return load_graph(a.graph, a.directed, r); });
    const auto model =
        stage("model", [&] { return load_or_default_model(a.model, params, a.dim, ctx); });
    const std::string dense = a.dense.empty() ? "random:dim=" + std::to_string(a.dim) : a.dense;

    with_precision(ctx.g.precision, [&]<typename T>(T) {
        // X is indexed by original vertex ids throughout; rows follow the
        // reorder into the kernel and Z is mapped back afterwards.
        const auto x = stage("dense", [&] {
            return load_dense<T>(dense, g.num_vertices, ctx.g.seed, a.dim);
        });
        const auto adj = g.adjacency.template cast<T>();
        const auto p_before =
            stage("partition", [&] { return partition(adj, kWindowHeight, ctx.g.threads); });
        const auto assign_before = stage("classify", [&] { return classify(model, p_before); });
        const auto before = summarize(features(p_before), assign_before);

        std::optional<Reordered> re;
        if (a.loa) re = stage("loa", [&] { return reorder(g, build_windows_optimized(g, a.vw)); });

        Partition<T> p_after;
        Assignment assign_after;
        if (re) {
            p_after = stage("partition", [&] {
                return partition(re->graph.adjacency.template cast<T>(), kWindowHeight,
                                 ctx.g.threads);
            });
            assign_after = stage("classify", [&] { return classify(model, p_after); });
        }
        const auto& p_run = re ? p_after : p_before;
        const auto& assign_run = re ? assign_after : assign_before;
        const auto after = re ? summarize(features(p_after), assign_after) : before;

        auto res = stage("spmm", [&] {
            return spmm_hybrid(p_run, assign_run, re ? permute_rows(x, re->perm) : x,
                               ctx.g.threads);
        });
        DenseMatrix<T> z = re ? permute_rows(res.z, invert_permutation(re->perm)) : res.z;
        if (!a.out.empty()) {
            stage("write", [&] {
                auto out = open_out(a.out);
                write_dense_csv(out, z);
                return 0;
            });
            r.outputs["z"] = a.out;
        }
        r.metrics["num_vertices"] = g.num_vertices;
        r.metrics["nnz"] = g.adjacency.nnz();
        r.metrics["dim"] = x.dim;
        r.metrics["windows_total"] = before.windows_total;
        r.metrics["windows_empty"] = before.windows_empty;
        r.metrics["windows_tile_before_loa"] = before.windows_tile;
        r.metrics["windows_tile_after_loa"] = after.windows_tile;
        r.metrics["mean_ci_before"] = before.mean_ci;
        r.metrics["mean_ci_after"] = after.mean_ci;
        r.metrics["loa_applied"] = a.loa ? 1 : 0;
        put_stats(r, res.stats);
        r.metrics["spmm_checksum"] = checksum(z);
        return 0;
    });
    return r;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"hybrid scalar/tile SpMM toolkit", "hcspmm"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--threads", g.threads, "worker threads (1 = sequential, deterministic)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", g.seed, "base random seed")->capture_default_str();
    app.add_option("--precision", g.precision, "value type for kernels")
        ->capture_default_str()
        ->check(CLI::IsMember({"f32", "f64"}));
    app.add_flag("--quiet", g.quiet, "suppress informational messages");
    app.add_option("--report-file", g.report_file, "write the JSON run report here instead of stdout");

    std::function<RunReport(const Context&)> action;
    auto bind = [&](CLI::App* sub, auto fn, auto& args) {
        sub->callback([&action, fn, &args] {
            action = [fn, &args](const Context& c) { return fn(args, c); };
        });
    };

    ConvertArgs convert;
    auto* c = app.add_subcommand("convert", "normalize a graph or matrix to Matrix Market");
    c->add_option("--in", convert.in)->required();
    c->add_option("--format", convert.format)->check(CLI::IsMember({"auto", "mtx", "edgelist"}))
        ->capture_default_str();
    c->add_flag("--directed", convert.directed, "edge list is directed");
    c->add_option("--out", convert.out);
    bind(c, cmd_convert, convert);

    PartitionArgs part;
    auto* pr = app.add_subcommand("partition-report", "per-window features as CSV");
    pr->add_option("--matrix", part.matrix)->required();
    pr->add_option("--out", part.out);
    pr->add_option("--model", part.model, "also count tile-path windows under this model");
    bind(pr, cmd_partition_report, part);

    TrainArgs tr;
    auto* ts = app.add_subcommand("train-selector", "train the scalar/tile selector");
    ts->add_option("--grid", tr.grid)->check(CLI::IsMember({"default", "full"}))->capture_default_str();
    ts->add_option("--provider", tr.provider, "cost-model | measured | csv:<path>")->capture_default_str();
    ts->add_option("--params", tr.params, "cost params JSON for the cost-model provider");
    ts->add_option("--repeats", tr.repeats)->capture_default_str()->check(CLI::PositiveNumber);
    ts->add_option("--dim", tr.dim)->capture_default_str()->check(CLI::PositiveNumber);
    ts->add_option("--out", tr.out);
    bind(ts, cmd_train_selector, tr);

    ClassifyArgs cl;
    auto* cs = app.add_subcommand("classify", "assign each window a path");
    cs->add_option("--model", cl.model)->required();
    cs->add_option("--matrix", cl.matrix)->required();
    cs->add_option("--out", cl.out);
    bind(cs, cmd_classify, cl);

    CalibrateArgs cal;
    auto* ca = app.add_subcommand("calibrate", "fit cost-model parameters");
    ca->add_option("--provider", cal.provider, "measured | cost-model | csv:<path>")->capture_default_str();
    ca->add_option("--params", cal.params, "params for the cost-model provider");
    ca->add_option("--rounds", cal.rounds)->capture_default_str();
    ca->add_option("--repeats", cal.repeats)->capture_default_str();
    ca->add_option("--dim", cal.dim, "dim assumed for csv timings")->capture_default_str();
    ca->add_option("--out", cal.out);
    bind(ca, cmd_calibrate, cal);

    SweepArgs sw;
    auto* sp = app.add_subcommand("sweep", "cost-model estimates along density or ncols");
    sp->add_option("--params", sw.params);
    sp->add_option("--kind", sw.kind)->check(CLI::IsMember({"density", "ncols"}))->capture_default_str();
    sp->add_option("--ncols", sw.ncols)->capture_default_str();
    sp->add_option("--nnz", sw.nnz, "entry count for --kind ncols")->capture_default_str();
    sp->add_option("--dim", sw.dim)->capture_default_str();
    sp->add_option("--out", sw.out);
    bind(sp, cmd_sweep, sw);

    SpmmArgs sm;
    auto* mm = app.add_subcommand("spmm", "Z = A X with a chosen execution path");
    mm->add_option("--matrix", sm.matrix)->required();
    mm->add_option("--dense", sm.dense, "x.csv or random:dim=D,seed=S")->capture_default_str();
    mm->add_option("--mode", sm.mode)->check(CLI::IsMember({"scalar", "tile", "hybrid"}))
        ->capture_default_str();
    mm->add_option("--model", sm.model);
    mm->add_option("--params", sm.params);
    mm->add_option("--out", sm.out);
    mm->add_option("--stats", sm.stats, "per-window path JSON");
    bind(mm, cmd_spmm, sm);

    LoaArgs lo;
    auto* la = app.add_subcommand("loa", "reorder a graph for denser row windows");
    la->add_option("--graph", lo.graph)->required();
    la->add_option("--vw", lo.vw)->capture_default_str()->check(CLI::PositiveNumber);
    la->add_option("--out", lo.out);
    la->add_option("--perm", lo.perm);
    la->add_option("--report", lo.report);
    la->add_option("--model", lo.model);
    la->add_option("--params", lo.params);
    la->add_flag("--directed", lo.directed);
    bind(la, cmd_loa, lo);

    GnnArgs gn;
    auto* gb = app.add_subcommand("gnn-bench", "fused vs unfused GCN layer");
    gb->add_option("--graph", gn.graph)->required();
    gb->add_option("--din", gn.din)->capture_default_str();
    gb->add_option("--dout", gn.dout)->capture_default_str();
    gb->add_option("--mode", gn.mode)->check(CLI::IsMember({"fused", "unfused", "both"}))
        ->capture_default_str();
    gb->add_option("--norm", gn.norm)->check(CLI::IsMember({"gcn", "row", "raw", "selfloop"}))
        ->capture_default_str();
    gb->add_option("--repeats", gn.repeats)->capture_default_str()->check(CLI::PositiveNumber);
    gb->add_option("--model", gn.model);
    gb->add_option("--params", gn.params);
    gb->add_option("--out", gn.out, "timings and traffic JSON")->required();
    gb->add_flag("--directed", gn.directed);
    bind(gb, cmd_gnn_bench, gn);

    PipelineArgs pl;
    auto* pp = app.add_subcommand("pipeline", "partition, optional LOA, classify, hybrid SpMM");
    pp->add_option("--graph", pl.graph)->required();
    pp->add_option("--model", pl.model);
    pp->add_option("--params", pl.params);
    pp->add_flag("--loa", pl.loa, "reorder with LOA before execution");
    pp->add_option("--vw", pl.vw)->capture_default_str()->check(CLI::PositiveNumber);
    pp->add_option("--dim", pl.dim)->capture_default_str()->check(CLI::PositiveNumber);
    pp->add_option("--dense", pl.dense, "x.csv or random:dim=D,seed=S (default random, --dim, --seed)");
    pp->add_option("--out", pl.out);
    pp->add_flag("--directed", pl.directed);
    bind(pp, cmd_pipeline, pl);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    const Context ctx{g, err};
    try {
        const auto report = to_json(action(ctx)).dump(2);
        if (g.report_file.empty()) {
            out << report << '\n';
        } else {
            auto f = open_out(g.report_file);
            f << report << '\n';
        }
        return kOk;
    } catch (const InputError& e) {
        err << "hcspmm: error: " << e.what() << '\n';
        return kInputError;
    } catch (const nlohmann::json::exception& e) {
        err << "hcspmm: error: " << e.what() << '\n';
        return kInputError;
    } catch (const InvariantError& e) {
        err << "hcspmm: internal error: " << e.what() << '\n';
        return kInternalError;
    } catch (const std::exception& e) {
        err << "hcspmm: internal error: " << e.what() << '\n';
        return kInternalError;
    }
}

}  // namespace hcspmm::cli
