#pragma once

// JSON and CSV formats for the command-line tool. All readers are strict:
// unknown keys and wrong types raise ConfigError.

#include "physprior/attention.hpp"
#include "physprior/bench.hpp"
#include "physprior/dpp.hpp"
#include "physprior/rl.hpp"

#include "json.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace physprior::io {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapingDefaults {
    double alpha = 1.5;
    double lambda = 0.5;
    double beta_init = 1.0;
    double beta_min = 0.0;
};

struct BenchDefaults {
    std::vector<std::string> mechanisms{"softmax", "psla_rank1"};
    std::vector<long> lengths{512, 1024, 2048, 4096, 8192};
    long d = 64;
    int reps = 9;
};

struct Config {
    pdn::MeshPdnSpec mesh;
    pdn::FrequencyBand band;
    pdn::CapacitorModel capacitor;
    dpp::GenerationConfig generation;
    ShapingDefaults shaping;
    rl::ReinforceConfig rl;
    BenchDefaults bench;
};

json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// Missing sections keep their defaults.
Config parse_config(const json& j);
Config load_config(const std::string& path);

json mesh_to_json(const pdn::MeshPdnSpec& m);
pdn::MeshPdnSpec mesh_from_json(const json& j);

json instance_to_json(const dpp::DppInstance& inst);
dpp::DppInstance instance_from_json(const json& j);

/// {"cells": [...]}
std::vector<int> placement_from_json(const json& j);

/// {"q": [[...]], "k": ..., "v": ..., "positions": [[x, y], ...],
///  "head": {"alpha_raw_x", "alpha_raw_y", "alpha_min", "alpha_max", "epsilon"}}
struct AttnInput {
    attention::AttentionBatch batch;
    attention::HeadConfig head;
};
AttnInput attn_input_from_json(const json& j);
json matrix_to_json(const attention::Matrix& m);

/// %.17g
std::string num(double x);

std::string bench_csv(const std::vector<bench::BenchRecord>& records);
std::vector<bench::BenchRecord> bench_from_csv(const std::string& text);

std::string training_csv(const rl::TrainingLog& log);

}  // namespace physprior::io
