#pragma once

// Self-checks shared by the command-line `verify` suites and the acceptance run.

#include <cstdint>
#include <string>
#include <vector>

namespace physprior::verify {

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

Check attention_oracles(std::uint64_t seed = 1);
Check alpha_zero_reduction(std::uint64_t seed = 2);
Check head_gradients(std::uint64_t seed = 3);
Check kron_equivalence(std::uint64_t seed = 4);
Check decay_law();
Check telescoping(std::uint64_t seed = 6);
Check policy_invariance();
Check taylor_bound(std::uint64_t seed = 8);
Check beta_schedule();
Check memory_model();

struct ScalingOptions {
    std::vector<long> lengths{512, 1024, 2048, 4096, 8192};
    long dim = 64;
    int reps = 9;
    std::uint64_t seed = 10;
};
/// Measured softmax and psla_rank1 slopes plus crossover. Takes minutes.
Check scaling_slopes(const ScalingOptions& opt = {});

struct LearningOptions {
    std::uint64_t instance_seed = 7;
    int seeds = 5;
    int episodes = 1000;
    double learning_rate = 0.2;
};
/// Shaped vs unshaped REINFORCE on a 6x6, k=4 instance.
Check shaping_benefit(const LearningOptions& opt = {});

/// Named suites: attn, grad, pbrs, pdn, all. Throws std::invalid_argument otherwise.
std::vector<Check> run_suite(const std::string& name);

}  // namespace physprior::verify
