#include "physprior/dpp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace physprior::dpp {

namespace {

bool same_mesh(const pdn::MeshPdnSpec& a, const pdn::MeshPdnSpec& b) {
    return a.width == b.width && a.height == b.height && a.r_seg == b.r_seg &&
           a.l_seg == b.l_seg && a.c_node == b.c_node && a.g_node == b.g_node;
}

void check_range(const Range& r, const char* what) {
    if (!(r.lo > 0.0) || !(r.hi >= r.lo) || !std::isfinite(r.hi))
        throw std::invalid_argument(std::string("dpp: bad range for ") + what);
}

}  // namespace

bool DppInstance::is_blocked(int cell) const {
    return cell == probe || std::binary_search(keep_out.begin(), keep_out.end(), cell);
}

void DppInstance::validate() const {
    if (width < 2 || height < 2) throw std::invalid_argument("dpp: grid must be at least 2x2");
    if (mesh.width != width || mesh.height != height)
        throw std::invalid_argument("dpp: mesh dimensions do not match the grid");
    mesh.validate();
    cap_model.validate();
    band.validate();
    if (probe < 0 || probe >= cells()) throw std::invalid_argument("dpp: probe out of range");
    for (size_t i = 0; i < keep_out.size(); ++i) {
        if (keep_out[i] < 0 || keep_out[i] >= cells())
            throw std::invalid_argument("dpp: keep-out cell out of range");
        if (i > 0 && keep_out[i] <= keep_out[i - 1])
            throw std::invalid_argument("dpp: keep-out must be sorted and unique");
        if (keep_out[i] == probe) throw std::invalid_argument("dpp: probe inside keep-out");
    }
    if (k_caps < 1 || k_caps > free_cells())
        throw std::invalid_argument("dpp: k_caps exceeds the free cells");
}

bool operator==(const DppInstance& a, const DppInstance& b) {
    return a.width == b.width && a.height == b.height && a.probe == b.probe &&
           a.keep_out == b.keep_out && a.k_caps == b.k_caps && same_mesh(a.mesh, b.mesh) &&
           a.cap_model.c_val == b.cap_model.c_val && a.cap_model.esr == b.cap_model.esr &&
           a.cap_model.esl == b.cap_model.esl && a.band.f_min == b.band.f_min &&
           a.band.f_max == b.band.f_max && a.band.n_points == b.band.n_points && a.seed == b.seed;
}

void GenerationConfig::validate() const {
    if (width < 2 || height < 2) throw std::invalid_argument("dpp: grid must be at least 2x2");
    if (!(keep_out_fraction >= 0.0 && keep_out_fraction < 1.0))
        throw std::invalid_argument("dpp: keep_out_fraction must lie in [0, 1)");
    check_range(r_seg, "r_seg");
    check_range(l_seg, "l_seg");
    check_range(c_node, "c_node");
    check_range(g_node, "g_node");
    cap_model.validate();
    band.validate();
    const int cells = width * height;
    const int blocked = static_cast<int>(std::floor(keep_out_fraction * cells));
    if (k_caps < 1 || k_caps > cells - blocked - 1)
        throw std::invalid_argument("dpp: not enough free cells for k_caps");
}

DppInstance generate_instance(const GenerationConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    DppInstance inst;
    inst.width = cfg.width;
    inst.height = cfg.height;
    inst.k_caps = cfg.k_caps;
    inst.seed = seed;
    inst.cap_model = cfg.cap_model;
    inst.band = cfg.band;
    inst.probe = rng.below(inst.cells());

    std::vector<int> pool;
    for (int c = 0; c < inst.cells(); ++c)
        if (c != inst.probe) pool.push_back(c);
    const int blocked = static_cast<int>(std::floor(cfg.keep_out_fraction * inst.cells()));
    for (int i = 0; i < blocked; ++i) {
        const int j = i + rng.below(static_cast<int>(pool.size()) - i);
        std::swap(pool[i], pool[j]);
    }
    inst.keep_out.assign(pool.begin(), pool.begin() + blocked);
    std::sort(inst.keep_out.begin(), inst.keep_out.end());

    inst.mesh.width = cfg.width;
    inst.mesh.height = cfg.height;
    inst.mesh.r_seg = rng.uniform(cfg.r_seg.lo, cfg.r_seg.hi);
    inst.mesh.l_seg = rng.uniform(cfg.l_seg.lo, cfg.l_seg.hi);
    inst.mesh.c_node = rng.uniform(cfg.c_node.lo, cfg.c_node.hi);
    inst.mesh.g_node = rng.uniform(cfg.g_node.lo, cfg.g_node.hi);
    inst.validate();
    return inst;
}

PlacementState::PlacementState(std::shared_ptr<const DppInstance> inst) : inst_(std::move(inst)) {
    if (!inst_) throw std::invalid_argument("PlacementState: null instance");
    inst_->validate();
}

std::vector<int> PlacementState::placed_set() const {
    std::vector<int> out = placed_;
    std::sort(out.begin(), out.end());
    return out;
}

bool PlacementState::contains(int cell) const {
    return std::find(placed_.begin(), placed_.end(), cell) != placed_.end();
}

PlacementState PlacementState::with(int cell) const {
    if (terminal()) throw std::logic_error("dpp: state is terminal");
    if (cell < 0 || cell >= inst_->cells() || inst_->is_blocked(cell) || contains(cell))
        throw std::invalid_argument("dpp: illegal action");
    PlacementState next = *this;
    next.placed_.push_back(cell);
    return next;
}

std::vector<int> legal_actions(const PlacementState& s) {
    if (s.terminal()) throw std::logic_error("dpp: no actions in a terminal state");
    std::vector<int> out;
    const auto& inst = s.instance();
    for (int c = 0; c < inst.cells(); ++c)
        if (!inst.is_blocked(c) && !s.contains(c)) out.push_back(c);
    return out;
}

double placement_reward(const DppInstance& inst, const std::vector<int>& cells) {
    return pdn::dpp_reward(inst.mesh, cells, inst.cap_model, inst.band, inst.probe);
}

double RewardCache::operator()(const std::vector<int>& cells) {
    std::vector<int> key = cells;
    std::sort(key.begin(), key.end());
    auto it = table_.find(key);
    if (it != table_.end()) return it->second;
    const double r = placement_reward(*inst_, key);
    table_.emplace(std::move(key), r);
    return r;
}

StepResult step(const PlacementState& s, int action, RewardCache* cache) {
    PlacementState next = s.with(action);
    double r = 0.0;
    const bool done = next.terminal();
    if (done) {
        const auto set = next.placed_set();
        r = cache ? (*cache)(set) : placement_reward(next.instance(), set);
    }
    return {std::move(next), r, done};
}

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double out = 1.0;
    for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
    return std::round(out);
}

Optimum exhaustive_optimum(const DppInstance& inst, RewardCache* cache, std::vector<int> order) {
    inst.validate();
    std::vector<int> free;
    for (int c = 0; c < inst.cells(); ++c)
        if (!inst.is_blocked(c)) free.push_back(c);
    if (binomial(static_cast<int>(free.size()), inst.k_caps) > kEnumerationGuard)
        throw std::invalid_argument("exhaustive_optimum: too many subsets to enumerate");
    if (order.empty()) {
        order = free;
    } else {
        std::vector<int> sorted = order;
        std::sort(sorted.begin(), sorted.end());
        if (sorted != free)
            throw std::invalid_argument("exhaustive_optimum: order must permute the free cells");
    }

    const int n = static_cast<int>(order.size()), k = inst.k_caps;
    Optimum best{{}, -INFINITY};
    std::vector<int> idx(k), cells(k);
    std::function<void(int, int)> rec = [&](int depth, int start) {
        if (depth == k) {
            for (int i = 0; i < k; ++i) cells[i] = order[idx[i]];
            std::vector<int> set = cells;
            std::sort(set.begin(), set.end());
            const double r = cache ? (*cache)(set) : placement_reward(inst, set);
            if (r > best.reward || (r == best.reward && set < best.cells)) best = {set, r};
            return;
        }
        for (int i = start; i <= n - (k - depth); ++i) {
            idx[depth] = i;
            rec(depth + 1, i + 1);
        }
    };
    rec(0, 0);
    return best;
}

}  // namespace physprior::dpp
