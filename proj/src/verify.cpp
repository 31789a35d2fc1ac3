#include "physprior/verify.hpp"

#include "physprior/attention.hpp"
#include "physprior/bench.hpp"
#include "physprior/head_gradient.hpp"
#include "physprior/pdn.hpp"
#include "physprior/rl.hpp"
#include "physprior/rng.hpp"
#include "physprior/shaping.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace physprior::verify {

using attention::AttentionBatch;
using attention::HeadConfig;
using attention::Matrix;
using kernel::Coord2D;

namespace {

double normal(Rng& rng) {
    // Box-Muller on the portable uniform
    const double u1 = 1.0 - rng.uniform(), u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * normal(rng);
    return m;
}

enum class Layout { scattered, row, grid };

AttentionBatch random_batch(Eigen::Index L, Eigen::Index d, Eigen::Index dv, Rng& rng, Layout layout) {
    AttentionBatch b;
    b.q = random_matrix(L, d, rng);
    b.k = random_matrix(L, d, rng);
    b.v = random_matrix(L, dv, rng);
    if (layout == Layout::scattered) {
        for (Eigen::Index i = 0; i < L; ++i) b.positions.emplace_back(rng.uniform(), rng.uniform());
    } else if (layout == Layout::row) {
        std::vector<double> xs;
        for (Eigen::Index i = 0; i < L; ++i) xs.push_back(rng.uniform());
        std::sort(xs.begin(), xs.end());
        const double y = rng.uniform();
        for (double x : xs) b.positions.emplace_back(x, y);
    } else {
        const auto g = bench::bench_grid(L);
        for (Eigen::Index i = 0; i < L; ++i)
            b.positions.push_back(kernel::cell_center(static_cast<int>(i), g.width, g.height));
    }
    return b;
}

HeadConfig random_head(Eigen::Index d, Rng& rng, bool full) {
    HeadConfig h;
    h.decay = {normal(rng), normal(rng), 1.2, 1.8};
    if (!full) return h;
    for (auto* g : {&h.gate_q, &h.gate_k}) {
        attention::GateParams p;
        p.w1 = random_matrix(d, d + 1, rng, 0.5);
        p.b1 = random_matrix(d + 1, 1, rng, 0.1);
        p.w2 = random_matrix(d + 1, d, rng, 0.5);
        p.b2 = random_matrix(d, 1, rng, 0.5).array() - 2.0;
        *g = p;
    }
    for (auto* n : {&h.norm_q, &h.norm_k}) {
        attention::PreMapNorm p;
        p.weight = Matrix::Identity(d, d) + random_matrix(d, d, rng, 0.3);
        p.bias = random_matrix(d, 1, rng, 0.2);
        *n = p;
    }
    return h;
}

Matrix dense_unbiased(const AttentionBatch& b, const attention::FeatureMapConfig& cfg) {
    const Matrix pq = attention::feature_map(b.q, cfg), pk = attention::feature_map(b.k, cfg);
    Matrix out = Matrix::Zero(b.length(), b.value_dim());
    for (Eigen::Index i = 0; i < b.length(); ++i) {
        double z = 0.0;
        for (Eigen::Index j = 0; j < b.length(); ++j) {
            const double w = pq.row(i).dot(pk.row(j));
            out.row(i) += w * b.v.row(j);
            z += w;
        }
        out.row(i) /= z;
    }
    return out;
}

template <class F>
Check timed(const std::string& name, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Check c;
    c.name = name;
    try {
        body(c);
    } catch (const std::exception& e) {
        c.passed = false;
        c.detail = std::string("exception: ") + e.what();
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return c;
}

std::string fmt(double x) {
    std::ostringstream s;
    s.precision(3);
    s << x;
    return s.str();
}

std::shared_ptr<const dpp::DppInstance> grid_instance(int w, int h, int probe, int k) {
    auto inst = std::make_shared<dpp::DppInstance>();
    inst->width = w;
    inst->height = h;
    inst->mesh.width = w;
    inst->mesh.height = h;
    inst->probe = probe;
    inst->k_caps = k;
    inst->validate();
    return inst;
}

}  // namespace

Check attention_oracles(std::uint64_t seed) {
    return timed("attention oracle equivalence", [&](Check& c) {
        Rng rng(seed);
        const Eigen::Index lengths[] = {1, 2, 7, 64, 256};
        const Eigen::Index dims[] = {1, 4, 8};
        constexpr int kRepeats = 7;  // 5 lengths x 3 dims x 7 = 105 cases per mechanism
        const char* names[] = {"psla_rank1", "psla_symmetric_1d", "psla_symmetric_grid", "linear"};
        double worst[4] = {0, 0, 0, 0};
        int cases = 0;
        for (Eigen::Index L : lengths)
            for (Eigen::Index d : dims)
                for (int r = 0; r < kRepeats; ++r) {
                    const Eigen::Index dv = 1 + rng.below(4);
                    const HeadConfig head = random_head(d, rng, r % 2 == 1);
                    const auto bs = random_batch(L, d, dv, rng, Layout::scattered);
                    worst[0] = std::max(worst[0], (attention::psla_rank1(bs, head) -
                                                   attention::dense_psla_reference(bs, head, attention::BiasMode::directional))
                                                      .cwiseAbs().maxCoeff());
                    const auto br = random_batch(L, d, dv, rng, Layout::row);
                    worst[1] = std::max(worst[1], (attention::psla_symmetric_1d(br, head) -
                                                   attention::dense_psla_reference(br, head, attention::BiasMode::symmetric))
                                                      .cwiseAbs().maxCoeff());
                    const auto bg = random_batch(L, d, dv, rng, Layout::grid);
                    worst[2] = std::max(worst[2], (attention::psla_symmetric_grid(bg, head, bench::bench_grid(L)) -
                                                   attention::dense_psla_reference(bg, head, attention::BiasMode::symmetric))
                                                      .cwiseAbs().maxCoeff());
                    worst[3] = std::max(worst[3], (attention::linear_attention(bs, head.feature_map) -
                                                   dense_unbiased(bs, head.feature_map))
                                                      .cwiseAbs().maxCoeff());
                    ++cases;
                }
        c.passed = true;
        std::ostringstream d;
        d << cases << " cases each;";
        for (int i = 0; i < 4; ++i) {
            c.passed = c.passed && worst[i] <= 1e-9;
            d << " " << names[i] << " " << fmt(worst[i]);
        }
        c.detail = d.str();
    });
}

Check alpha_zero_reduction(std::uint64_t seed) {
    return timed("alpha -> 0 reduces to linear attention", [&](Check& c) {
        Rng rng(seed);
        HeadConfig head;
        head.decay = {-1e6, -1e6, 0.0, 0.6};  // rates clamp to the smallest positive double
        double worst = 0.0;
        for (int i = 0; i < 50; ++i) {
            const Eigen::Index L = 1 + rng.below(200), d = 1 + rng.below(8);
            const auto b = random_batch(L, d, 1 + rng.below(4), rng, Layout::scattered);
            worst = std::max(worst, (attention::psla_rank1(b, head) - attention::linear_attention(b, head.feature_map))
                                        .cwiseAbs().maxCoeff());
        }
        c.passed = worst <= 1e-12;
        c.detail = "50 batches; max abs error " + fmt(worst);
    });
}

Check head_gradients(std::uint64_t seed) {
    return timed("head gradients vs finite differences", [&](Check& c) {
        Rng rng(seed);
        double worst = 0.0;
        int runs = 0;
        c.passed = true;
        for (Eigen::Index L : {2, 5, 16})
            for (Eigen::Index d : {4, 8}) {
                autodiff::HeadProblem p;
                p.batch = random_batch(L, d, 3, rng, Layout::scattered);
                p.head = random_head(d, rng, true);
                p.loss_weights = random_matrix(L, 3, rng);
                const auto rep = autodiff::check_head_gradients(p);
                worst = std::max(worst, rep.worst_rel_error);
                c.passed = c.passed && rep.passed && rep.params.size() == 17;
                ++runs;
            }
        c.detail = std::to_string(runs) + " heads (L in {2,5,16}, d in {4,8}), 17 parameters each; worst rel error " +
                   fmt(worst);
    });
}

Check kron_equivalence(std::uint64_t seed) {
    return timed("Kron reduction vs full inverse", [&](Check& c) {
        Rng rng(seed);
        double worst = 0.0;
        for (int n : {5, 10, 20, 50, 100}) {
            for (int trial = 0; trial < 4; ++trial) {
                pdn::ComplexMatrix y(n, n);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j <= i; ++j) y(i, j) = y(j, i) = {normal(rng), normal(rng)};
                y.diagonal().array() += pdn::Complex(2.0 * std::sqrt(static_cast<double>(n)), 0.0);
                std::vector<int> ports;
                for (int i = 0; i < n; ++i)
                    if (rng.uniform() < 0.2 || i == trial) ports.push_back(i);
                const pdn::ComplexMatrix full = y.inverse();
                const pdn::ComplexMatrix z = pdn::kron_reduce(y, ports);
                worst = std::max(worst, (z - full(ports, ports)).cwiseAbs().maxCoeff() /
                                            full(ports, ports).cwiseAbs().maxCoeff());
            }
        }
        // assembled 10 x 10 mesh with capacitors
        pdn::MeshPdnSpec mesh;
        mesh.width = mesh.height = 10;
        const auto ym = pdn::build_admittance(mesh, 7e8, {{3, {}}, {55, {}}});
        const std::vector<int> ports{0, 55, 99};
        const pdn::ComplexMatrix fm = ym.inverse();
        worst = std::max(worst, (pdn::kron_reduce(ym, ports) - fm(ports, ports)).cwiseAbs().maxCoeff() /
                                    fm(ports, ports).cwiseAbs().maxCoeff());

        double closed = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            const pdn::Complex y0(rng.uniform(0.1, 2), rng.uniform(-1, 1)), y1(rng.uniform(0.1, 2), rng.uniform(-1, 1)),
                g(rng.uniform(0.1, 2), rng.uniform(-1, 1));
            pdn::ComplexMatrix y(2, 2);
            y << y0 + g, -g, -g, y1 + g;
            const pdn::Complex expect = 1.0 / (y0 + g - g * g / (y1 + g));
            closed = std::max(closed, std::abs(pdn::kron_reduce(y, {0})(0, 0) - expect) / std::abs(expect));
        }
        c.passed = worst <= 1e-10 && closed <= 1e-12;
        c.detail = "systems up to 100 nodes, worst rel " + fmt(worst) + "; 2-node closed form rel " + fmt(closed);
    });
}

Check decay_law() {
    return timed("exponential decay of transfer impedance", [&](Check& c) {
        pdn::MeshPdnSpec mesh;
        mesh.width = mesh.height = 8;
        const double fm = pdn::FrequencyBand{}.geometric_mean();
        const auto corner = pdn::fit_decay(mesh, fm, 0);
        const auto center = pdn::fit_decay(mesh, fm, 27);
        c.passed = corner.slope < 0 && corner.r_squared >= 0.9 && center.slope < 0 && center.r_squared >= 0.85;
        c.detail = "8x8 at " + fmt(fm) + " Hz: corner probe slope " + fmt(corner.slope) + " r2 " +
                   fmt(corner.r_squared) + "; center probe slope " + fmt(center.slope) + " r2 " + fmt(center.r_squared);
    });
}

Check telescoping(std::uint64_t seed) {
    return timed("telescoping of shaped returns", [&](Check& c) {
        Rng rng(seed);
        double worst_res = 0.0, worst_collapse = 0.0;
        int count = 0;
        for (int group = 0; group < 10; ++group) {
            dpp::GenerationConfig cfg;
            cfg.width = 4;
            cfg.height = 4;
            cfg.k_caps = 1 + group % 5;
            cfg.keep_out_fraction = 0.1;
            auto inst = std::make_shared<const dpp::DppInstance>(dpp::generate_instance(cfg, rng.next()));
            dpp::RewardCache cache(inst);
            shaping::PotentialSpec spec;
            spec.alpha = rng.uniform(0.5, 3.0);
            spec.lambda = rng.uniform(0.0, 1.0);
            rl::ShapingConfig sc{spec, {}};
            rl::Policy pol = rl::Policy::uniform(inst->cells());
            for (int t = 0; t < 100; ++t) {
                const double gamma = (t % 3 == 0) ? 0.9 : (t % 3 == 1 ? 0.99 : 1.0);
                const double beta = rng.uniform(0.0, 1.0);
                Rng r(rng.next());
                const auto traj = rl::sample_trajectory(pol, inst, r, &sc, beta, gamma, &cache);
                std::vector<double> phi;
                for (const auto& s : traj.states) phi.push_back(shaping::phi_dpp(s, spec));
                double scale = 1.0;
                for (double p : phi) scale = std::max(scale, std::abs(p));
                worst_res = std::max(worst_res, std::abs(shaping::telescoping_residual(traj, phi, gamma)) / scale);
                if (gamma == 1.0) {
                    double shaped = 0.0, plain = 0.0;
                    for (size_t k = 0; k < traj.rewards.size(); ++k) {
                        shaped += (*traj.shaped_rewards)[k];
                        plain += traj.rewards[k];
                    }
                    const double target = beta * (phi.back() - phi.front());
                    worst_collapse = std::max(worst_collapse, std::abs((shaped - plain) - target) /
                                                                  std::max({1.0, std::abs(shaped), std::abs(plain)}));
                }
                ++count;
            }
        }
        c.passed = worst_res <= 1e-12 && worst_collapse <= 1e-12;
        c.detail = std::to_string(count) + " trajectories; residual " + fmt(worst_res) + "; gamma=1 collapse " +
                   fmt(worst_collapse);
    });
}

Check policy_invariance() {
    return timed("shaped Q identity and greedy policy", [&](Check& c) {
        shaping::PotentialSpec spec;
        spec.terminal_zeroed = true;
        double worst = 0.0;
        bool greedy = true;
        long states = 0;
        for (auto [w, probe] : {std::pair{3, 4}, std::pair{3, 0}, std::pair{4, 5}, std::pair{4, 0}}) {
            auto inst = grid_instance(w, w, probe, 2);
            dpp::RewardCache cache(inst);
            for (double gamma : {0.9, 1.0}) {
                const auto q = shaping::shaped_q_check(*inst, spec, gamma, 1.0, &cache);
                worst = std::max(worst, q.max_deviation);
                greedy = greedy && q.greedy_identical;
                states += q.states;
            }
        }
        c.passed = worst <= 1e-10 && greedy;
        c.detail = "3x3 and 4x4, k=2, gamma in {0.9,1}; " + std::to_string(states) + " states; max deviation " +
                   fmt(worst) + (greedy ? "; greedy identical" : "; greedy differs");
    });
}

Check taylor_bound(std::uint64_t seed) {
    return timed("connectivity vs wirelength bound", [&](Check& c) {
        Rng rng(seed);
        c.passed = true;
        double tightest = 0.0;
        for (int t = 0; t < 100; ++t) {
            shaping::PotentialSpec spec;
            spec.kind = shaping::PotentialKind::connectivity;
            const int nets = 1 + rng.below(5);
            shaping::Placed pins;
            double dmax = 0.0;
            for (int e = 0; e < nets; ++e) {
                const Coord2D a{rng.uniform(), rng.uniform()}, b{rng.uniform(), rng.uniform()};
                pins.push_back(a);
                pins.push_back(b);
                dmax = std::max(dmax, kernel::manhattan_distance(a, b));
                spec.nets.push_back({rng.uniform(0.1, 2.0), {2 * e, 2 * e + 1}});
            }
            spec.alpha = rng.uniform(0.01, 1.0) / std::max(dmax, 1e-3);
            const auto g = shaping::conn_hpwl_gap(pins, spec);
            c.passed = c.passed && g.gap <= g.bound;
            if (g.bound > 0) tightest = std::max(tightest, g.gap / g.bound);
        }
        shaping::PotentialSpec zero;
        zero.kind = shaping::PotentialKind::connectivity;
        zero.nets = {{1.0, {0, 1}}};
        const auto z = shaping::conn_hpwl_gap({Coord2D{0.4, 0.4}, Coord2D{0.4, 0.4}}, zero);
        c.passed = c.passed && z.gap == 0.0 && z.bound == 0.0;
        c.detail = "100 configurations with alpha d <= 1; max gap/bound " + fmt(tightest) + "; d=0 gap " + fmt(z.gap);
    });
}

Check beta_schedule() {
    return timed("cosine beta schedule", [&](Check& c) {
        c.passed = true;
        for (auto s : {shaping::BetaSchedule{1.0, 0.0, 1000}, shaping::BetaSchedule{0.7, 0.05, 37},
                       shaping::BetaSchedule{2.0, 0.5, 2}}) {
            c.passed = c.passed && shaping::beta_at(s, 0) == s.beta_init && shaping::beta_at(s, s.t_anneal) == s.beta_min;
            if (s.t_anneal % 2 == 0)
                c.passed = c.passed && shaping::beta_at(s, s.t_anneal / 2) == (s.beta_init + s.beta_min) / 2;
            double prev = INFINITY;
            for (long t = 0; t <= 3L * s.t_anneal; ++t) {
                const double b = shaping::beta_at(s, t);
                c.passed = c.passed && b <= prev;
                prev = b;
            }
        }
        c.detail = "endpoints, midpoint and monotonicity over t in [0, 3T]";
    });
}

Check memory_model() {
    return timed("memory model", [&](Check& c) {
        using bench::Mechanism;
        double prev = 0.0;
        bool monotone = true;
        for (long L = 64; L <= 65536; L *= 2) {
            const double r = bench::memory_model(Mechanism::softmax, L, 64, 64) /
                             bench::memory_model(Mechanism::psla_rank1, L, 64, 64);
            monotone = monotone && r > prev;
            prev = r;
        }
        const double r4096 = bench::memory_model(Mechanism::softmax, 4096, 64, 64) /
                             bench::memory_model(Mechanism::psla_rank1, 4096, 64, 64);
        bool linear = true;
        const double step = bench::memory_model(Mechanism::psla_rank1, 2, 64, 64) -
                            bench::memory_model(Mechanism::psla_rank1, 1, 64, 64);
        for (long L = 1; L < 20000; L += 97)
            linear = linear && bench::memory_model(Mechanism::psla_rank1, L + 1, 64, 64) -
                                       bench::memory_model(Mechanism::psla_rank1, L, 64, 64) == step;
        c.passed = monotone && r4096 >= 10.0 && linear;
        c.detail = "ratio at L=4096, d=64: " + fmt(r4096) + (monotone ? "; monotone" : "; not monotone") +
                   (linear ? "; PSLA model affine in L" : "; PSLA model not affine");
    });
}

Check scaling_slopes(const ScalingOptions& opt) {
    return timed("attention scaling slopes", [&](Check& c) {
        using bench::Mechanism;
        const long small = *std::min_element(opt.lengths.begin(), opt.lengths.end());
        const double xs = bench::cross_check(Mechanism::softmax, std::min(small, 256L), opt.dim, opt.seed);
        const double xp = bench::cross_check(Mechanism::psla_rank1, std::min(small, 256L), opt.dim, opt.seed);
        std::vector<bench::BenchRecord> soft, psla;
        for (long L : opt.lengths) {
            soft.push_back(bench::time_forward(Mechanism::softmax, L, opt.dim, opt.reps, opt.seed));
            psla.push_back(bench::time_forward(Mechanism::psla_rank1, L, opt.dim, opt.reps, opt.seed));
        }
        const auto fs = bench::fit_scaling(soft), fp = bench::fit_scaling(psla);
        const auto cross = bench::find_crossover(soft, psla);
        c.passed = xs <= 1e-9 && xp <= 1e-9 && fs.slope >= 1.6 && fs.slope <= 2.4 && fs.r_squared >= 0.9 &&
                   fp.slope >= 0.7 && fp.slope <= 1.4 && fp.r_squared >= 0.9 && cross && *cross <= 16384;
        c.detail = "softmax slope " + fmt(fs.slope) + " r2 " + fmt(fs.r_squared) + "; psla_rank1 slope " +
                   fmt(fp.slope) + " r2 " + fmt(fp.r_squared) + "; crossover L* " +
                   (cross ? std::to_string(*cross) : std::string("none"));
    });
}

Check shaping_benefit(const LearningOptions& opt) {
    return timed("shaping improves REINFORCE", [&](Check& c) {
        dpp::GenerationConfig g;
        auto inst = std::make_shared<const dpp::DppInstance>(dpp::generate_instance(g, opt.instance_seed));
        dpp::RewardCache cache(inst);
        std::vector<double> fu, fs, au, as;
        for (int s = 0; s < opt.seeds; ++s) {
            rl::ReinforceConfig cfg;
            cfg.episodes = opt.episodes;
            cfg.learning_rate = opt.learning_rate;
            cfg.seed = static_cast<std::uint64_t>(s);
            const auto plain = rl::train(inst, cfg, &cache);
            cfg.shaping = rl::ShapingConfig{shaping::PotentialSpec{}, shaping::BetaSchedule{1.0, 0.0, opt.episodes}};
            const auto shaped = rl::train(inst, cfg, &cache);
            fu.push_back(plain.entries.back().mean_return);
            fs.push_back(shaped.entries.back().mean_return);
            au.push_back(rl::area_under_curve(plain));
            as.push_back(rl::area_under_curve(shaped));
        }
        auto median = [](std::vector<double> v) {
            std::sort(v.begin(), v.end());
            const size_t n = v.size();
            return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
        };
        const double mfu = median(fu), mfs = median(fs), mau = median(au), mas = median(as);
        c.passed = mfs >= mfu && mas >= mau;
        c.detail = "median final return shaped " + fmt(mfs) + " vs " + fmt(mfu) + "; median AUC shaped " + fmt(mas) +
                   " vs " + fmt(mau);
    });
}

std::vector<Check> run_suite(const std::string& name) {
    std::vector<Check> out;
    const bool all = name == "all";
    if (!all && name != "attn" && name != "grad" && name != "pbrs" && name != "pdn")
        throw std::invalid_argument("unknown suite '" + name + "'");
    if (all || name == "attn") {
        out.push_back(attention_oracles());
        out.push_back(alpha_zero_reduction());
        out.push_back(memory_model());
    }
    if (all || name == "grad") out.push_back(head_gradients());
    if (all || name == "pdn") {
        out.push_back(kron_equivalence());
        out.push_back(decay_law());
    }
    if (all || name == "pbrs") {
        out.push_back(telescoping());
        out.push_back(policy_invariance());
        out.push_back(taylor_bound());
        out.push_back(beta_schedule());
    }
    return out;
}

}  // namespace physprior::verify
