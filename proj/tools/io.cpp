#include "io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace physprior::io {

namespace {

/// Reads keys from one JSON object and rejects any it did not consume.
class Obj {
public:
    Obj(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    bool has(const char* key) const { return j_.contains(key); }

    const json& raw(const char* key) {
        seen_.insert(key);
        return j_.at(key);
    }

    void num(const char* key, double& out) {
        if (!has(key)) return;
        const json& v = raw(key);
        if (!v.is_number()) fail(key, "a number");
        out = v.get<double>();
    }

    template <class Int>
    void integer(const char* key, Int& out) {
        if (!has(key)) return;
        const json& v = raw(key);
        if (!v.is_number_integer()) fail(key, "an integer");
        out = v.get<Int>();
    }

    void text(const char* key, std::string& out) {
        if (!has(key)) return;
        const json& v = raw(key);
        if (!v.is_string()) fail(key, "a string");
        out = v.get<std::string>();
    }

    void require(std::initializer_list<const char*> keys) const {
        for (const char* k : keys)
            if (!has(k)) throw ConfigError(where_ + ": missing key '" + k + "'");
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }

    [[noreturn]] void fail(const char* key, const char* what) const {
        throw ConfigError(where_ + "." + key + ": expected " + what);
    }

    const std::string& where() const { return where_; }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

void read_mesh(Obj& o, pdn::MeshPdnSpec& m) {
    o.integer("width", m.width);
    o.integer("height", m.height);
    o.num("r_seg", m.r_seg);
    o.num("l_seg", m.l_seg);
    o.num("c_node", m.c_node);
    o.num("g_node", m.g_node);
    o.finish();
}

void read_band(Obj& o, pdn::FrequencyBand& b) {
    o.num("f_min", b.f_min);
    o.num("f_max", b.f_max);
    o.integer("n_points", b.n_points);
    o.finish();
}

void read_cap(Obj& o, pdn::CapacitorModel& c) {
    o.num("c_val", c.c_val);
    o.num("esr", c.esr);
    o.num("esl", c.esl);
    o.finish();
}

void read_range(Obj& o, const char* key, dpp::Range& r) {
    if (!o.has(key)) return;
    const json& v = o.raw(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        o.fail(key, "[lo, hi]");
    r = {v[0].get<double>(), v[1].get<double>()};
}

template <class F>
void section(Obj& parent, const char* key, F&& body) {
    if (!parent.has(key)) return;
    Obj o(parent.raw(key), parent.where() + "." + key);
    body(o);
}

json band_to_json(const pdn::FrequencyBand& b) {
    return {{"f_min", b.f_min}, {"f_max", b.f_max}, {"n_points", b.n_points}};
}

json cap_to_json(const pdn::CapacitorModel& c) { return {{"c_val", c.c_val}, {"esr", c.esr}, {"esl", c.esl}}; }

attention::Matrix matrix_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a non-empty array of rows");
    const size_t cols = j[0].is_array() ? j[0].size() : 0;
    if (cols == 0) throw ConfigError(where + ": rows must be non-empty arrays");
    attention::Matrix m(j.size(), cols);
    for (size_t r = 0; r < j.size(); ++r) {
        if (!j[r].is_array() || j[r].size() != cols) throw ConfigError(where + ": ragged rows");
        for (size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number()) throw ConfigError(where + ": entries must be numbers");
            m(r, c) = j[r][c].get<double>();
        }
    }
    return m;
}

}  // namespace

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
    if (!out) throw ConfigError("write failed for " + path);
}

Config parse_config(const json& j) {
    Config c;
    Obj root(j, "config");
    section(root, "mesh", [&](Obj& o) { read_mesh(o, c.mesh); });
    section(root, "band", [&](Obj& o) { read_band(o, c.band); });
    section(root, "capacitor", [&](Obj& o) { read_cap(o, c.capacitor); });
    c.generation.cap_model = c.capacitor;
    c.generation.band = c.band;
    section(root, "generation", [&](Obj& o) {
        o.integer("width", c.generation.width);
        o.integer("height", c.generation.height);
        o.integer("k_caps", c.generation.k_caps);
        o.num("keep_out_fraction", c.generation.keep_out_fraction);
        read_range(o, "r_seg", c.generation.r_seg);
        read_range(o, "l_seg", c.generation.l_seg);
        read_range(o, "c_node", c.generation.c_node);
        read_range(o, "g_node", c.generation.g_node);
        o.finish();
    });
    section(root, "shaping", [&](Obj& o) {
        o.num("alpha", c.shaping.alpha);
        o.num("lambda", c.shaping.lambda);
        o.num("beta_init", c.shaping.beta_init);
        o.num("beta_min", c.shaping.beta_min);
        o.finish();
    });
    section(root, "rl", [&](Obj& o) {
        o.integer("episodes", c.rl.episodes);
        o.integer("batch_size", c.rl.batch_size);
        o.num("learning_rate", c.rl.learning_rate);
        o.num("gamma", c.rl.gamma);
        std::string baseline = "running_mean";
        o.text("baseline", baseline);
        if (baseline == "running_mean")
            c.rl.baseline = rl::Baseline::running_mean;
        else if (baseline == "none")
            c.rl.baseline = rl::Baseline::none;
        else
            o.fail("baseline", "\"running_mean\" or \"none\"");
        o.num("baseline_decay", c.rl.baseline_decay);
        o.integer("eval_interval", c.rl.eval_interval);
        o.integer("eval_rollouts", c.rl.eval_rollouts);
        o.finish();
    });
    section(root, "bench", [&](Obj& o) {
        if (o.has("mechanisms")) {
            const json& v = o.raw("mechanisms");
            if (!v.is_array()) o.fail("mechanisms", "an array of names");
            c.bench.mechanisms.clear();
            for (const auto& m : v) {
                if (!m.is_string()) o.fail("mechanisms", "an array of names");
                c.bench.mechanisms.push_back(m.get<std::string>());
            }
        }
        if (o.has("lengths")) {
            const json& v = o.raw("lengths");
            if (!v.is_array()) o.fail("lengths", "an array of integers");
            c.bench.lengths.clear();
            for (const auto& m : v) {
                if (!m.is_number_integer()) o.fail("lengths", "an array of integers");
                c.bench.lengths.push_back(m.get<long>());
            }
        }
        o.integer("d", c.bench.d);
        o.integer("reps", c.bench.reps);
        o.finish();
    });
    root.finish();
    try {
        c.mesh.validate();
        c.band.validate();
        c.capacitor.validate();
        c.generation.validate();
        c.rl.validate();
        for (const auto& m : c.bench.mechanisms) bench::parse_mechanism(m);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

Config load_config(const std::string& path) { return parse_config(read_json_file(path)); }

json mesh_to_json(const pdn::MeshPdnSpec& m) {
    return {{"width", m.width},   {"height", m.height}, {"r_seg", m.r_seg},
            {"l_seg", m.l_seg},   {"c_node", m.c_node}, {"g_node", m.g_node}};
}

pdn::MeshPdnSpec mesh_from_json(const json& j) {
    pdn::MeshPdnSpec m;
    Obj o(j, "mesh");
    o.require({"width", "height", "r_seg", "l_seg", "c_node", "g_node"});
    read_mesh(o, m);
    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return m;
}

json instance_to_json(const dpp::DppInstance& inst) {
    return {{"width", inst.width},
            {"height", inst.height},
            {"probe", inst.probe},
            {"keep_out", inst.keep_out},
            {"k_caps", inst.k_caps},
            {"mesh", mesh_to_json(inst.mesh)},
            {"capacitor", cap_to_json(inst.cap_model)},
            {"band", band_to_json(inst.band)},
            {"seed", inst.seed}};
}

dpp::DppInstance instance_from_json(const json& j) {
    dpp::DppInstance inst;
    Obj o(j, "instance");
    o.require({"width", "height", "probe", "keep_out", "k_caps", "mesh", "capacitor", "band", "seed"});
    o.integer("width", inst.width);
    o.integer("height", inst.height);
    o.integer("probe", inst.probe);
    o.integer("k_caps", inst.k_caps);
    o.integer("seed", inst.seed);
    const json& ko = o.raw("keep_out");
    if (!ko.is_array()) o.fail("keep_out", "an array of cells");
    for (const auto& c : ko) {
        if (!c.is_number_integer()) o.fail("keep_out", "an array of cells");
        inst.keep_out.push_back(c.get<int>());
    }
    inst.mesh = mesh_from_json(o.raw("mesh"));
    Obj cap(o.raw("capacitor"), "instance.capacitor");
    cap.require({"c_val", "esr", "esl"});
    read_cap(cap, inst.cap_model);
    Obj band(o.raw("band"), "instance.band");
    band.require({"f_min", "f_max", "n_points"});
    read_band(band, inst.band);
    o.finish();
    try {
        inst.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("instance: ") + e.what());
    }
    return inst;
}

std::vector<int> placement_from_json(const json& j) {
    Obj o(j, "placement");
    o.require({"cells"});
    const json& c = o.raw("cells");
    if (!c.is_array()) o.fail("cells", "an array of cells");
    std::vector<int> out;
    for (const auto& v : c) {
        if (!v.is_number_integer()) o.fail("cells", "an array of cells");
        out.push_back(v.get<int>());
    }
    o.finish();
    return out;
}

AttnInput attn_input_from_json(const json& j) {
    AttnInput in;
    Obj o(j, "input");
    o.require({"q", "k", "v", "positions"});
    in.batch.q = matrix_from_json(o.raw("q"), "input.q");
    in.batch.k = matrix_from_json(o.raw("k"), "input.k");
    in.batch.v = matrix_from_json(o.raw("v"), "input.v");
    const attention::Matrix pos = matrix_from_json(o.raw("positions"), "input.positions");
    if (pos.cols() != 2) throw ConfigError("input.positions: expected [x, y] pairs");
    try {
        for (Eigen::Index i = 0; i < pos.rows(); ++i) in.batch.positions.emplace_back(pos(i, 0), pos(i, 1));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("input.positions: ") + e.what());
    }
    section(o, "head", [&](Obj& h) {
        h.num("alpha_raw_x", in.head.decay.alpha_raw_x);
        h.num("alpha_raw_y", in.head.decay.alpha_raw_y);
        h.num("alpha_min", in.head.decay.alpha_min);
        h.num("alpha_max", in.head.decay.alpha_max);
        h.num("epsilon", in.head.feature_map.epsilon);
        h.finish();
    });
    o.finish();
    try {
        in.batch.validate();
        in.head.validate(in.batch.dim());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("input: ") + e.what());
    }
    return in;
}

json matrix_to_json(const attention::Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string bench_csv(const std::vector<bench::BenchRecord>& records) {
    std::ostringstream out;
    out << "mechanism,L,d,reps,median_s,trimmed_mean_s,modeled_bytes\n";
    for (const auto& r : records)
        out << bench::to_string(r.mechanism) << ',' << r.length << ',' << r.dim << ',' << r.reps << ','
            << num(r.median_s) << ',' << num(r.trimmed_mean_s) << ',' << num(r.modeled_bytes) << '\n';
    return out.str();
}

std::vector<bench::BenchRecord> bench_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "mechanism,L,d,reps,median_s,trimmed_mean_s,modeled_bytes")
        throw ConfigError("bench csv: unexpected header");
    std::vector<bench::BenchRecord> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != 7) throw ConfigError("bench csv line " + std::to_string(lineno) + ": expected 7 fields");
        try {
            out.push_back({bench::parse_mechanism(f[0]), std::stol(f[1]), std::stol(f[2]), std::stoi(f[3]),
                           std::stod(f[4]), std::stod(f[5]), std::stod(f[6])});
        } catch (const std::exception& e) {
            throw ConfigError("bench csv line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::string training_csv(const rl::TrainingLog& log) {
    std::ostringstream out;
    out << "episode,mean_return,mean_shaped_return,beta,seconds\n";
    for (const auto& e : log.entries)
        out << e.episode << ',' << num(e.mean_return) << ',' << num(e.mean_shaped_return) << ',' << num(e.beta) << ','
            << num(e.seconds) << '\n';
    return out.str();
}

}  // namespace physprior::io
