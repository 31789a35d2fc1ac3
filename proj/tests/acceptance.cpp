// Prints one PASS/FAIL line per acceptance criterion; exit status 1 if any fail.

#include "physprior/verify.hpp"

#include <cstdio>
#include <cstring>
#include <algorithm>
#include <cstdlib>
#include <functional>
#include <limits>
#include <vector>

using physprior::verify::Check;

namespace {

struct Criterion {
    int id;
    double budget_s;
    std::function<Check()> run;
};

}  // namespace

int main(int argc, char** argv) {
    namespace v = physprior::verify;
    constexpr double kNone = std::numeric_limits<double>::infinity();
    const Criterion criteria[] = {
        {1, 60, [] { return v::attention_oracles(); }},
        {2, kNone, [] { return v::alpha_zero_reduction(); }},
        {3, 60, [] { return v::head_gradients(); }},
        {4, kNone, [] { return v::kron_equivalence(); }},
        {5, 10, [] { return v::decay_law(); }},
        {6, kNone, [] { return v::telescoping(); }},
        {7, 60, [] { return v::policy_invariance(); }},
        {8, kNone, [] { return v::taylor_bound(); }},
        {9, kNone, [] { return v::beta_schedule(); }},
        {10, 600, [] { return v::scaling_slopes(); }},
        {11, 900, [] { return v::shaping_benefit(); }},
        {12, kNone, [] { return v::memory_model(); }},
    };
    // optional: run a subset, e.g. `acceptance 1 5 12`
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const Check r = c.run();
        const bool in_time = r.seconds < c.budget_s;
        const bool ok = r.passed && in_time;
        failed += !ok;
        std::printf("%s criterion %2d: %s | %s | %.1f s%s\n", ok ? "PASS" : "FAIL", c.id, r.name.c_str(),
                    r.detail.c_str(), r.seconds, in_time ? "" : " (over time budget)");
        std::fflush(stdout);
    }
    std::printf("%d of %d criteria failed\n", failed, only.empty() ? 12 : static_cast<int>(only.size()));
    return failed ? 1 : 0;
}
