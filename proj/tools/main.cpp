// physprior command-line tool. Exit codes: 0 success, 1 verification or
// runtime failure, 2 usage or configuration error.

#include "io.hpp"

#include "physprior/verify.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>

using namespace physprior;
using io::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

io::Config config_from(const std::string& path) { return path.empty() ? io::Config{} : io::load_config(path); }

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        io::write_text_file(path, text);
}

std::pair<int, int> parse_grid(const std::string& s) {
    const auto x = s.find('x');
    try {
        if (x == std::string::npos) throw std::invalid_argument(s);
        size_t a = 0, b = 0;
        const int w = std::stoi(s.substr(0, x), &a), h = std::stoi(s.substr(x + 1), &b);
        if (a != x || b != s.size() - x - 1) throw std::invalid_argument(s);
        return {w, h};
    } catch (const std::exception&) {
        throw UsageError("--grid expects WxH, got '" + s + "'");
    }
}

template <class T>
std::vector<T> parse_list(const std::string& s, const char* flag) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        if constexpr (std::is_same_v<T, std::string>) {
            out.push_back(item);
        } else {
            size_t used = 0;
            long v = 0;
            try {
                v = std::stol(item, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != item.size()) throw UsageError(std::string(flag) + ": bad entry '" + item + "'");
            out.push_back(v);
        }
    }
    if (out.empty()) throw UsageError(std::string(flag) + ": empty list");
    return out;
}

// ---- verify ----------------------------------------------------------------

int run_verify(const std::string& suite) {
    const auto checks = verify::run_suite(suite);
    bool ok = true;
    std::printf("%-6s %-44s %8s  %s\n", "result", "check", "seconds", "detail");
    for (const auto& c : checks) {
        std::printf("%-6s %-44s %8.2f  %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.seconds, c.detail.c_str());
        ok = ok && c.passed;
    }
    return ok ? 0 : 1;
}

// ---- bench -----------------------------------------------------------------

struct BenchArgs {
    std::string mechanisms, lengths, out, config;
    std::optional<long> d;
    std::optional<int> reps;
    std::optional<std::uint64_t> seed;
};

int run_bench(const BenchArgs& a) {
    if (!a.seed) throw UsageError("bench: --seed is required");
    const io::Config cfg = config_from(a.config);
    std::vector<std::string> names = a.mechanisms.empty() ? cfg.bench.mechanisms : parse_list<std::string>(a.mechanisms, "--mechanisms");
    std::vector<long> lengths = a.lengths.empty() ? cfg.bench.lengths : parse_list<long>(a.lengths, "--lengths");
    const long d = a.d.value_or(cfg.bench.d);
    const int reps = a.reps.value_or(cfg.bench.reps);
    std::vector<bench::Mechanism> mechs;
    try {
        for (const auto& n : names) mechs.push_back(bench::parse_mechanism(n));
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (reps < 5) throw UsageError("bench: --reps must be >= 5");
    for (long L : lengths)
        if (L < 1) throw UsageError("bench: lengths must be positive");
    const long smallest = *std::min_element(lengths.begin(), lengths.end());
    for (auto m : mechs) {
        const double err = bench::cross_check(m, std::min(smallest, 256L), d, *a.seed);
        if (!(err <= 1e-9)) {
            std::fprintf(stderr, "bench: %s disagrees with its oracle (max abs error %g)\n",
                         bench::to_string(m).c_str(), err);
            return 1;
        }
    }
    std::vector<bench::BenchRecord> records;
    for (auto m : mechs)
        for (long L : lengths) records.push_back(bench::time_forward(m, L, d, reps, *a.seed));
    emit(a.out, io::bench_csv(records));
    return 0;
}

int run_bench_fit(const std::string& in) {
    std::ifstream f(in);
    if (!f) throw io::ConfigError("cannot open " + in);
    std::stringstream ss;
    ss << f.rdbuf();
    const auto records = io::bench_from_csv(ss.str());
    std::map<std::string, std::vector<bench::BenchRecord>> by;
    for (const auto& r : records) by[bench::to_string(r.mechanism)].push_back(r);
    json out;
    out["fits"] = json::object();
    for (const auto& [name, rs] : by) {
        try {
            const auto fit = bench::fit_scaling(rs);
            out["fits"][name] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared}};
        } catch (const std::invalid_argument& e) {
            out["fits"][name] = {{"error", e.what()}};
        }
    }
    out["crossovers"] = json::array();
    for (const auto& [a, ra] : by)
        for (const auto& [b, rb] : by) {
            if (a == b) continue;
            json row{{"baseline", a}, {"mechanism", b}};
            try {
                const auto cross = bench::find_crossover(ra, rb);
                row["L"] = cross ? json(*cross) : json(nullptr);
            } catch (const std::invalid_argument& e) {
                row["error"] = e.what();
            }
            out["crossovers"].push_back(row);
        }
    std::cout << out.dump(2) << '\n';
    return 0;
}

// ---- pdn -------------------------------------------------------------------

int run_pdn(const std::string& mesh_path, int probe, const std::string& out, const std::string& summary,
            const std::string& config) {
    const io::Config cfg = config_from(config);
    const pdn::MeshPdnSpec mesh = io::mesh_from_json(io::read_json_file(mesh_path));
    if (probe < 0 || probe >= mesh.nodes()) throw UsageError("pdn: --probe out of range");
    std::ostringstream csv;
    csv << "f_hz,node_index,d_manhattan,abs_z,re_z,im_z\n";
    json fits = json::array();
    const bool can_fit = mesh.width >= 4 && mesh.height >= 4;
    for (double f : cfg.band.points()) {
        const auto z = pdn::impedance_column(mesh, f, probe);
        for (int i = 0; i < mesh.nodes(); ++i)
            csv << io::num(f) << ',' << i << ',' << pdn::grid_manhattan(mesh.width, i, probe) << ','
                << io::num(std::abs(z(i))) << ',' << io::num(z(i).real()) << ',' << io::num(z(i).imag()) << '\n';
        if (can_fit) {
            const auto fit = pdn::fit_decay(mesh, f, probe);
            fits.push_back({{"f_hz", f}, {"slope", fit.slope}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared}});
        }
    }
    emit(out, csv.str());
    json s{{"mesh", io::mesh_to_json(mesh)}, {"probe", probe}, {"per_frequency", fits}};
    if (can_fit) {
        const double fm = cfg.band.geometric_mean();
        const auto fit = pdn::fit_decay(mesh, fm, probe);
        s["geometric_mean"] = {{"f_hz", fm}, {"slope", fit.slope}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared}};
    } else {
        s["geometric_mean"] = nullptr;
    }
    if (!summary.empty()) io::write_text_file(summary, s.dump(2) + "\n");
    else if (!out.empty() && out != "-") std::cout << s.dump(2) << '\n';
    return 0;
}

// ---- dpp -------------------------------------------------------------------

int run_dpp_gen(const std::string& grid, std::optional<int> k, std::optional<double> keep_out,
                std::optional<std::uint64_t> seed, const std::string& out, const std::string& config) {
    if (!seed) throw UsageError("dpp gen: --seed is required");
    io::Config cfg = config_from(config);
    dpp::GenerationConfig g = cfg.generation;
    if (!grid.empty()) std::tie(g.width, g.height) = parse_grid(grid);
    if (k) g.k_caps = *k;
    if (keep_out) g.keep_out_fraction = *keep_out;
    dpp::DppInstance inst;
    try {
        inst = dpp::generate_instance(g, *seed);
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("dpp gen: ") + e.what());
    }
    emit(out, io::instance_to_json(inst).dump(2) + "\n");
    return 0;
}

int run_dpp_eval(const std::string& instance, const std::string& placement) {
    const auto inst = io::instance_from_json(io::read_json_file(instance));
    const auto cells = io::placement_from_json(io::read_json_file(placement));
    std::vector<int> sorted = cells;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw io::ConfigError("placement: duplicate cells");
    for (int c : sorted)
        if (c < 0 || c >= inst.cells() || inst.is_blocked(c))
            throw io::ConfigError("placement: cell " + std::to_string(c) + " is not placeable");
    if (static_cast<int>(sorted.size()) > inst.k_caps)
        throw io::ConfigError("placement: more cells than k_caps");
    const double r = dpp::placement_reward(inst, sorted);
    std::cout << "{\"cells\": " << json(sorted).dump() << ", \"reward\": " << io::num(r) << "}\n";
    return 0;
}

struct TrainArgs {
    std::string instance, shaping = "none", out, config;
    std::optional<int> episodes, batch;
    std::optional<std::uint64_t> seed;
    std::optional<double> beta_init, beta_min, lambda, gamma, alpha, lr;
};

int run_dpp_train(const TrainArgs& a) {
    if (!a.seed) throw UsageError("dpp train: --seed is required");
    const io::Config cfg = config_from(a.config);
    auto inst = std::make_shared<const dpp::DppInstance>(io::instance_from_json(io::read_json_file(a.instance)));
    rl::ReinforceConfig rc = cfg.rl;
    rc.seed = *a.seed;
    if (a.episodes) rc.episodes = *a.episodes;
    if (a.batch) rc.batch_size = *a.batch;
    if (a.gamma) rc.gamma = *a.gamma;
    if (a.lr) rc.learning_rate = *a.lr;
    if (a.shaping == "dpp") {
        rl::ShapingConfig sc;
        sc.potential.alpha = a.alpha.value_or(cfg.shaping.alpha);
        sc.potential.lambda = a.lambda.value_or(cfg.shaping.lambda);
        sc.schedule = {a.beta_init.value_or(cfg.shaping.beta_init), a.beta_min.value_or(cfg.shaping.beta_min),
                       std::max(1, rc.episodes)};
        rc.shaping = sc;
    } else if (a.beta_init || a.beta_min || a.lambda || a.alpha) {
        throw UsageError("dpp train: shaping flags need --shaping dpp");
    }
    try {
        rc.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("dpp train: ") + e.what());
    }
    dpp::RewardCache cache(inst);
    emit(a.out, io::training_csv(rl::train(inst, rc, &cache)));
    return 0;
}

// ---- attn ------------------------------------------------------------------

int run_attn(const std::string& mechanism, const std::string& input, std::optional<long> length, std::optional<long> d,
             std::optional<std::uint64_t> seed, const std::string& out) {
    bench::Mechanism m;
    try {
        m = bench::parse_mechanism(mechanism);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    io::AttnInput in;
    if (!input.empty()) {
        if (length || d || seed) throw UsageError("attn run: --input excludes --length/--d/--seed");
        in = io::attn_input_from_json(io::read_json_file(input));
    } else {
        if (!length || !d || !seed) throw UsageError("attn run: need --input or all of --length, --d, --seed");
        if (*length < 1 || *d < 1) throw UsageError("attn run: --length and --d must be positive");
        in.batch = bench::bench_inputs(*length, *d, *seed);
    }
    attention::Matrix y;
    try {
        switch (m) {
            case bench::Mechanism::softmax: y = attention::softmax_attention(in.batch); break;
            case bench::Mechanism::linear: y = attention::linear_attention(in.batch, in.head.feature_map); break;
            case bench::Mechanism::psla_rank1: y = attention::psla_rank1(in.batch, in.head); break;
            case bench::Mechanism::psla_symmetric_grid:
                y = attention::psla_symmetric_grid(in.batch, in.head, bench::bench_grid(in.batch.length()));
                break;
            case bench::Mechanism::dense_symmetric:
                y = attention::dense_psla_reference(in.batch, in.head, attention::BiasMode::symmetric);
                break;
        }
    } catch (const std::invalid_argument& e) {
        throw io::ConfigError(std::string("attn run: ") + e.what());
    } catch (const std::length_error& e) {
        throw io::ConfigError(std::string("attn run: ") + e.what());
    }
    json j{{"mechanism", mechanism}, {"output", io::matrix_to_json(y)}};
    emit(out, j.dump() + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Physics-prior attention, PDN simulation and reward shaping tools"};
    app.require_subcommand(1);
    std::string config;

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "Run self-check suites");
    std::string suite;
    verify_cmd->add_option("suite", suite, "attn | grad | pbrs | pdn | all")
        ->required()
        ->check(CLI::IsMember({"attn", "grad", "pbrs", "pdn", "all"}));

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "Time attention forward passes");
    BenchArgs ba;
    bench_cmd->add_option("--mechanisms", ba.mechanisms, "Comma-separated mechanism names");
    bench_cmd->add_option("--lengths", ba.lengths, "Comma-separated sequence lengths");
    bench_cmd->add_option("--d", ba.d, "Feature dimension");
    bench_cmd->add_option("--reps", ba.reps, "Timed repetitions (>= 5)");
    bench_cmd->add_option("--seed", ba.seed, "Input seed");
    bench_cmd->add_option("--out", ba.out, "CSV output path (default stdout)");
    bench_cmd->add_option("--config", ba.config, "Config JSON");
    bench_cmd->require_subcommand(0, 1);
    auto* fit_cmd = bench_cmd->add_subcommand("fit", "Fit scaling slopes to a results CSV");
    std::string fit_in;
    fit_cmd->add_option("--in", fit_in, "Results CSV")->required();

    // pdn
    auto* pdn_cmd = app.add_subcommand("pdn", "Transfer impedance sweep and decay fit");
    std::string mesh_path, pdn_out, pdn_summary;
    int probe = 0;
    pdn_cmd->add_option("--mesh", mesh_path, "Mesh JSON")->required();
    pdn_cmd->add_option("--probe", probe, "Probe node index");
    pdn_cmd->add_option("--out", pdn_out, "CSV output path (default stdout)");
    pdn_cmd->add_option("--summary", pdn_summary, "Fit summary JSON path");
    pdn_cmd->add_option("--config", config, "Config JSON (band)");

    // dpp
    auto* dpp_cmd = app.add_subcommand("dpp", "Decoupling capacitor placement");
    dpp_cmd->require_subcommand(1);
    auto* gen_cmd = dpp_cmd->add_subcommand("gen", "Generate an instance");
    std::string grid, gen_out;
    std::optional<int> k;
    std::optional<double> keep_out;
    std::optional<std::uint64_t> gen_seed;
    gen_cmd->add_option("--grid", grid, "WxH");
    gen_cmd->add_option("--k", k, "Capacitors to place");
    gen_cmd->add_option("--keep-out", keep_out, "Keep-out fraction");
    gen_cmd->add_option("--seed", gen_seed, "Seed");
    gen_cmd->add_option("--out", gen_out, "Instance JSON path (default stdout)");
    gen_cmd->add_option("--config", config, "Config JSON");
    auto* eval_cmd = dpp_cmd->add_subcommand("eval", "Reward of a placement");
    std::string eval_inst, eval_place;
    eval_cmd->add_option("--instance", eval_inst, "Instance JSON")->required();
    eval_cmd->add_option("--placement", eval_place, "Placement JSON {\"cells\": [...]}")->required();
    auto* train_cmd = dpp_cmd->add_subcommand("train", "REINFORCE training");
    TrainArgs ta;
    train_cmd->add_option("--instance", ta.instance, "Instance JSON")->required();
    train_cmd->add_option("--episodes", ta.episodes, "Episodes");
    train_cmd->add_option("--seed", ta.seed, "Seed");
    train_cmd->add_option("--shaping", ta.shaping, "none | dpp")->check(CLI::IsMember({"none", "dpp"}));
    train_cmd->add_option("--beta-init", ta.beta_init, "Initial shaping weight");
    train_cmd->add_option("--beta-min", ta.beta_min, "Final shaping weight");
    train_cmd->add_option("--lambda", ta.lambda, "Dispersion weight");
    train_cmd->add_option("--alpha", ta.alpha, "Potential decay rate");
    train_cmd->add_option("--gamma", ta.gamma, "Discount");
    train_cmd->add_option("--lr", ta.lr, "Learning rate");
    train_cmd->add_option("--batch", ta.batch, "Episodes per update");
    train_cmd->add_option("--out", ta.out, "CSV output path (default stdout)");
    train_cmd->add_option("--config", ta.config, "Config JSON");

    // attn
    auto* attn_cmd = app.add_subcommand("attn", "Attention forward passes");
    attn_cmd->require_subcommand(1);
    auto* run_cmd = attn_cmd->add_subcommand("run", "Run one mechanism");
    std::string mechanism = "psla_rank1", attn_in, attn_out;
    std::optional<long> length, dim;
    std::optional<std::uint64_t> attn_seed;
    run_cmd->add_option("--mechanism", mechanism, "Mechanism name");
    run_cmd->add_option("--input", attn_in, "Batch JSON");
    run_cmd->add_option("--length", length, "Generated sequence length");
    run_cmd->add_option("--d", dim, "Generated feature dimension");
    run_cmd->add_option("--seed", attn_seed, "Generated input seed");
    run_cmd->add_option("--out", attn_out, "Output JSON path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (verify_cmd->parsed()) return run_verify(suite);
        if (bench_cmd->parsed()) return fit_cmd->parsed() ? run_bench_fit(fit_in) : run_bench(ba);
        if (pdn_cmd->parsed()) return run_pdn(mesh_path, probe, pdn_out, pdn_summary, config);
        if (gen_cmd->parsed()) return run_dpp_gen(grid, k, keep_out, gen_seed, gen_out, config);
        if (eval_cmd->parsed()) return run_dpp_eval(eval_inst, eval_place);
        if (train_cmd->parsed()) return run_dpp_train(ta);
        if (run_cmd->parsed()) return run_attn(mechanism, attn_in, length, dim, attn_seed, attn_out);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const io::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    std::cerr << app.help();
    return 2;
}
