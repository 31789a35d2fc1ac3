#pragma once

// Decoupling-capacitor placement as a finite-horizon MDP on a PDN mesh.

#include "physprior/pdn.hpp"
#include "physprior/rng.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

namespace physprior::dpp {

using physprior::Rng;

struct DppInstance {
    int width = 6;
    int height = 6;
    int probe = 0;
    std::vector<int> keep_out;  // sorted, unique
    int k_caps = 4;
    pdn::MeshPdnSpec mesh;
    pdn::CapacitorModel cap_model;
    pdn::FrequencyBand band;
    std::uint64_t seed = 0;

    int cells() const { return width * height; }
    int free_cells() const { return cells() - static_cast<int>(keep_out.size()) - 1; }
    bool is_blocked(int cell) const;
    /// Throws std::invalid_argument when an invariant is broken.
    void validate() const;

    friend bool operator==(const DppInstance&, const DppInstance&);
};

struct Range {
    double lo;
    double hi;
};

struct GenerationConfig {
    int width = 6;
    int height = 6;
    int k_caps = 4;
    double keep_out_fraction = 0.0;
    Range r_seg{0.5, 0.5};
    Range l_seg{1e-11, 1e-11};
    Range c_node{1e-10, 1e-10};
    Range g_node{0.5, 0.5};
    pdn::CapacitorModel cap_model;
    pdn::FrequencyBand band;

    void validate() const;
};

/// Throws std::invalid_argument when the config cannot produce a valid instance.
DppInstance generate_instance(const GenerationConfig& cfg, std::uint64_t seed);

class PlacementState {
public:
    explicit PlacementState(std::shared_ptr<const DppInstance> inst);

    const DppInstance& instance() const { return *inst_; }
    const std::shared_ptr<const DppInstance>& instance_ptr() const { return inst_; }
    const std::vector<int>& placed() const { return placed_; }
    std::vector<int> placed_set() const;  // sorted
    bool terminal() const { return static_cast<int>(placed_.size()) == inst_->k_caps; }
    bool contains(int cell) const;

    PlacementState with(int cell) const;

private:
    std::shared_ptr<const DppInstance> inst_;
    std::vector<int> placed_;
};

/// Throws std::logic_error on a terminal state.
std::vector<int> legal_actions(const PlacementState& s);

/// Memoized terminal rewards keyed by the placed set.
class RewardCache {
public:
    explicit RewardCache(std::shared_ptr<const DppInstance> inst) : inst_(std::move(inst)) {}
    double operator()(const std::vector<int>& cells);
    std::size_t size() const { return table_.size(); }

private:
    std::shared_ptr<const DppInstance> inst_;
    std::map<std::vector<int>, double> table_;
};

double placement_reward(const DppInstance& inst, const std::vector<int>& cells);

struct StepResult {
    PlacementState next;
    double reward;
    bool terminal;
};

/// Throws std::invalid_argument on an illegal action and std::logic_error on
/// a terminal state.
StepResult step(const PlacementState& s, int action, RewardCache* cache = nullptr);

struct Trajectory {
    std::vector<PlacementState> states;  // s_0 .. s_T
    std::vector<int> actions;
    std::vector<double> rewards;
    std::optional<std::vector<double>> shaped_rewards;
    double terminal_reward = 0.0;
};

struct Optimum {
    std::vector<int> cells;  // sorted
    double reward;
};

inline constexpr double kEnumerationGuard = 1e6;

/// Exhaustive search over all k-subsets of free cells. Ties go to the
/// lexicographically smallest sorted set, so `order` (a permutation of the
/// free cells, default ascending) does not change the result.
Optimum exhaustive_optimum(const DppInstance& inst, RewardCache* cache = nullptr,
                           std::vector<int> order = {});

double binomial(int n, int k);

}  // namespace physprior::dpp
