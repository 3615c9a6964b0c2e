#include <doctest.h>

#include <cmath>
#include <numeric>

#include "rfauth/attack.hpp"
#include "rfauth/signal.hpp"

using namespace rfauth;
using namespace rfauth::attack;
using nn::Tensor;

namespace {

IqSignal random_message(int n_symbols, Rng& rng) {
    return qpsk_modulate(generate_random_bits(2 * n_symbols, rng));
}

GaussianPolicy make_policy(PolicyStateVariant v, int hidden, std::uint64_t seed) {
    Rng rng(seed);
    return GaussianPolicy(v, hidden, rng);
}

// Policy emitting an exact N(0, I) at every step (zeroed heads).
void zero_heads(GaussianPolicy& p) {
    p.w_mean.zero();
    p.b_mean.zero();
    p.w_logvar.zero();
    p.b_logvar.zero();
}

double max_abs_param(GaussianPolicy& p) {
    double m = 0.0;
    for (auto* t : p.params())
        for (double v : t->data) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace

TEST_CASE("clip_action: box semantics") {
    // |s| = 1, so the box half-width equals epsilon.
    const cplx s{0.6, 0.8};
    auto c = clip_action({0.9, 0.8}, s, 0.2);
    CHECK(c[0] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(c[1] == doctest::Approx(0.8).epsilon(1e-12));

    // Inside the box -> unchanged.
    auto c2 = clip_action({0.55, 0.75}, s, 0.2);
    CHECK(c2[0] == doctest::Approx(0.55).epsilon(1e-12));
    CHECK(c2[1] == doctest::Approx(0.75).epsilon(1e-12));

    // Zero sample -> zero-width box -> forced to the sample itself.
    auto c3 = clip_action({5.0, -3.0}, cplx{0.0, 0.0}, 0.2);
    CHECK(c3[0] == 0.0);
    CHECK(c3[1] == 0.0);

    // Lower clamp.
    auto c4 = clip_action({-9.0, 0.0}, cplx{1.0, 0.0}, 0.1);
    CHECK(c4[0] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(c4[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("clipping box invariant over 100 random trajectories") {
    auto policy = make_policy(PolicyStateVariant::Recurrent, 12, 1);
    Rng rng(2);
    const double eps = 0.2;
    for (int i = 0; i < 100; ++i) {
        const IqSignal msg = random_message(24, rng);
        const Trajectory t = generate_trajectory(policy, msg, eps, rng);
        REQUIRE(t.states.size() == 24);
        REQUIRE(t.clipped.size() == 24);
        for (std::size_t k = 0; k < t.length(); ++k) {
            const double half = eps * std::abs(t.states[k]) + 1e-12;
            CHECK(std::abs(t.clipped[k][0] - t.states[k].real()) <= half);
            CHECK(std::abs(t.clipped[k][1] - t.states[k].imag()) <= half);
        }
    }
}

TEST_CASE("policy_step: entropy and log-density closed forms") {
    auto policy = make_policy(PolicyStateVariant::Recurrent, 8, 3);
    zero_heads(policy);  // mean = (0,0), logvar = (0,0) -> N(0, I)

    Rng rng(4);
    const auto hid = initial_hidden(policy);
    const auto step = policy_step(policy, cplx{0.3, -0.4}, hid, rng);

    // H = ln(2*pi*e) for unit variances in 2-D... per-dim 1/2 ln(2 pi e).
    const double want_h = std::log(2.0 * M_PI * std::exp(1.0)) + 0.0;
    CHECK(step.entropy == doctest::Approx(want_h).epsilon(1e-9));

    // Density at the sampled point, cross-checked directly.
    const double lp = -0.5 * (2.0 * std::log(2.0 * M_PI) + step.action[0] * step.action[0] +
                              step.action[1] * step.action[1]);
    CHECK(step.log_prob == doctest::Approx(lp).epsilon(1e-9));

    // At the mode the density is -1/2 sum ln(2 pi var).
    Trajectory t;
    t.states = {cplx{0.3, -0.4}};
    t.actions = {{0.0, 0.0}};
    t.clipped = {{0.0, 0.0}};
    t.log_probs = {0.0};
    t.entropies = {want_h};
    t.rewards = {1.0};
    AttackConfig cfg;
    cfg.entropy_coef = 0.0;
    GaussianPolicy p2 = policy;
    const double j = surrogate_objective(p2, t, cfg);
    CHECK(j == doctest::Approx(1.0 * -std::log(2.0 * M_PI)).epsilon(1e-9));
}

TEST_CASE("policy_step: fixed seed gives identical samples; sync makes policies agree") {
    auto policy = make_policy(PolicyStateVariant::Recurrent, 10, 5);
    const auto hid = initial_hidden(policy);
    Rng r1(7), r2(7);
    const auto a = policy_step(policy, cplx{0.5, 0.5}, hid, r1);
    const auto b = policy_step(policy, cplx{0.5, 0.5}, hid, r2);
    CHECK(a.action[0] == b.action[0]);
    CHECK(a.action[1] == b.action[1]);
    CHECK(a.log_prob == b.log_prob);

    RolloutPolicy roll;
    sync_rollout(policy, roll);
    Rng r3(9), r4(9);
    const auto c = policy_step(roll.snapshot, cplx{-0.2, 0.1}, hid, r3);
    const auto d = policy_step(policy, cplx{-0.2, 0.1}, hid, r4);
    CHECK(c.action[0] == d.action[0]);
    CHECK(c.log_prob == d.log_prob);

    // Idempotent.
    sync_rollout(policy, roll);
    Rng r5(9);
    const auto e = policy_step(roll.snapshot, cplx{-0.2, 0.1}, hid, r5);
    CHECK(e.action[0] == c.action[0]);
}

TEST_CASE("complete_with_rollout boundaries and determinism") {
    auto policy = make_policy(PolicyStateVariant::Recurrent, 8, 11);
    Rng rng(12);
    const IqSignal msg = random_message(16, rng);
    const Trajectory traj = generate_trajectory(policy, msg, 0.2, rng);
    RolloutPolicy roll;
    sync_rollout(policy, roll);

    // t = Gamma: exactly the emitted prefix.
    Rng r1(13);
    const IqSignal full = complete_with_rollout(traj, traj.length(), roll, 0.2, r1);
    REQUIRE(full.size() == traj.length());
    for (std::size_t i = 0; i < full.size(); ++i) {
        CHECK(full.samples[i].real() == traj.clipped[i][0]);
        CHECK(full.samples[i].imag() == traj.clipped[i][1]);
    }

    // t = 1: only the first sample from the prefix.
    Rng r2(14), r3(14);
    const IqSignal one_a = complete_with_rollout(traj, 1, roll, 0.2, r2);
    const IqSignal one_b = complete_with_rollout(traj, 1, roll, 0.2, r3);
    CHECK(one_a.samples[0] == cplx(traj.clipped[0][0], traj.clipped[0][1]));
    for (std::size_t i = 0; i < one_a.size(); ++i) CHECK(one_a.samples[i] == one_b.samples[i]);

    CHECK_THROWS_AS(complete_with_rollout(traj, 0, roll, 0.2, r2), std::invalid_argument);
    CHECK_THROWS_AS(complete_with_rollout(traj, traj.length() + 1, roll, 0.2, r2),
                    std::invalid_argument);
}

TEST_CASE("estimate_rewards: oracle bounds, averaging, and feedback counting") {
    auto policy = make_policy(PolicyStateVariant::Recurrent, 8, 15);
    Rng rng(16);
    const IqSignal msg = random_message(12, rng);
    Trajectory traj = generate_trajectory(policy, msg, 0.2, rng);
    RolloutPolicy roll;
    sync_rollout(policy, roll);

    Rng r1(17);
    long n = estimate_rewards(traj, roll, [](const IqSignal&) { return 1; }, 1, r1);
    CHECK(n == 12);
    for (double r : traj.rewards) CHECK(r == 1.0);

    Rng r2(18);
    estimate_rewards(traj, roll, [](const IqSignal&) { return 0; }, 3, r2);
    for (double r : traj.rewards) CHECK(r == 0.0);

    // Alternating oracle with M=4: every intermediate step sees 2 accepts of 4.
    long calls = 0;
    Rng r3(19);
    long n4 = estimate_rewards(
        traj, roll, [&calls](const IqSignal&) { return static_cast<int>(calls++ % 2); }, 4, r3);
    CHECK(n4 == 4 * 11 + 1);
    for (std::size_t t = 0; t + 1 < traj.length(); ++t) CHECK(traj.rewards[t] == 0.5);
    CHECK((traj.rewards.back() == 0.0 || traj.rewards.back() == 1.0));

    // Reward range invariant.
    for (double r : traj.rewards) {
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
    }
}

TEST_CASE("policy_gradient: degenerate zeros and reward-to-go arithmetic") {
    auto policy = make_policy(PolicyStateVariant::Recurrent, 6, 20);
    Rng rng(21);
    const IqSignal msg = random_message(5, rng);
    Trajectory traj = generate_trajectory(policy, msg, 0.2, rng);

    AttackConfig cfg;
    cfg.entropy_coef = 0.0;

    // All rewards zero with no entropy bonus -> zero gradient.
    traj.rewards.assign(traj.length(), 0.0);
    policy.zero_grads();
    const double j0 = policy_gradient(policy, traj, cfg);
    CHECK(j0 == 0.0);
    for (auto* g : policy.grads())
        for (double v : g->data) CHECK(v == 0.0);

    // gamma = 1, all rewards 1, eta = 0: coefficient on step t is Gamma-t+1.
    traj.rewards.assign(traj.length(), 1.0);
    const double j1 = surrogate_objective(policy, traj, cfg);
    double want = 0.0;
    for (std::size_t t = 0; t < traj.length(); ++t)
        want += traj.log_probs[t] * static_cast<double>(traj.length() - t);
    CHECK(j1 == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("policy_gradient matches finite differences of the surrogate") {
    for (auto variant : {PolicyStateVariant::Recurrent, PolicyStateVariant::Memoryless}) {
        auto policy = make_policy(variant, 4, 22);
        Rng rng(23);
        const IqSignal msg = random_message(3, rng);
        Trajectory traj = generate_trajectory(policy, msg, 0.2, rng);
        traj.rewards = {1.0, 0.0, 1.0};

        AttackConfig cfg;
        cfg.gamma = 0.9;
        cfg.entropy_coef = 1.5;  // exercises the entropy path through the variance head

        policy.zero_grads();
        policy_gradient(policy, traj, cfg);
        std::vector<double> analytic;  // gradient of -J
        for (auto* g : policy.grads())
            for (double v : g->data) analytic.push_back(v);

        std::vector<double> fd;
        const double h = 1e-6;
        for (auto* p : policy.params()) {
            for (auto& v : p->data) {
                const double keep = v;
                v = keep + h;
                const double jp = surrogate_objective(policy, traj, cfg);
                v = keep - h;
                const double jm = surrogate_objective(policy, traj, cfg);
                v = keep;
                fd.push_back(-(jp - jm) / (2.0 * h));
            }
        }
        REQUIRE(fd.size() == analytic.size());
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < fd.size(); ++i) {
            num += (fd[i] - analytic[i]) * (fd[i] - analytic[i]);
            den += fd[i] * fd[i];
        }
        REQUIRE(den > 0.0);
        CHECK(std::sqrt(num / den) < 1e-3);
    }
}

TEST_CASE("pretrain_identity reaches near-zero distortion and 0 epochs is a no-op") {
    auto policy = make_policy(PolicyStateVariant::Recurrent, 24, 24);
    Rng rng(25);
    std::vector<IqSignal> corpus;
    for (int i = 0; i < 6; ++i) corpus.push_back(random_message(32, rng));

    const double before = max_abs_param(policy);
    GaussianPolicy copy = policy;
    Rng r0(26);
    pretrain_identity(copy, corpus, 0, r0);
    CHECK(max_abs_param(copy) == before);

    Rng r1(27);
    const double rms = pretrain_identity(policy, corpus, 150, r1);
    CHECK(rms < 0.01);

    // Clipped actions of a pretrained policy stay inside the box trivially.
    Rng r2(28);
    const Trajectory t = generate_trajectory(policy, corpus[0], 0.2, r2);
    for (std::size_t k = 0; k < t.length(); ++k) {
        const double half = 0.2 * std::abs(t.states[k]) + 1e-12;
        CHECK(std::abs(t.clipped[k][0] - t.states[k].real()) <= half);
        CHECK(std::abs(t.clipped[k][1] - t.states[k].imag()) <= half);
    }
}

TEST_CASE("run_attack: feedback budget, always-accept oracle, determinism") {
    auto policy = make_policy(PolicyStateVariant::Recurrent, 8, 29);
    RolloutPolicy roll;
    sync_rollout(policy, roll);

    AttackEnv env;
    env.make_message = [](Rng& r) { return random_message(256, r); };
    env.feedback = [](const IqSignal&) { return 1; };

    AttackConfig cfg;
    cfg.iterations = 1;
    cfg.g_steps = 1;
    cfg.mc_searches = 1;
    cfg.eval_transmissions = 10;

    Rng rng(30);
    const auto hist = run_attack(policy, roll, env, cfg, rng);
    CHECK(hist.total_feedbacks == 256);
    REQUIRE(hist.records.size() == 1);
    CHECK(hist.records[0].fooling == 1.0);
    CHECK(hist.initial_fooling == 1.0);

    // Same seeds -> identical history and parameters.
    auto p1 = make_policy(PolicyStateVariant::Recurrent, 8, 31);
    auto p2 = make_policy(PolicyStateVariant::Recurrent, 8, 31);
    RolloutPolicy roll1, roll2;
    sync_rollout(p1, roll1);
    sync_rollout(p2, roll2);
    AttackEnv env2;
    env2.make_message = [](Rng& r) { return random_message(16, r); };
    long parity1 = 0, parity2 = 0;
    AttackConfig cfg2;
    cfg2.iterations = 3;
    cfg2.eval_transmissions = 5;
    Rng ra(32), rb(32);
    AttackEnv env2b = env2;
    env2.feedback = [&parity1](const IqSignal& s) {
        return static_cast<int>((parity1++ + s.samples.size()) % 2);
    };
    env2b.feedback = [&parity2](const IqSignal& s) {
        return static_cast<int>((parity2++ + s.samples.size()) % 2);
    };
    const auto h1 = run_attack(p1, roll1, env2, cfg2, ra);
    const auto h2 = run_attack(p2, roll2, env2b, cfg2, rb);
    REQUIRE(h1.records.size() == h2.records.size());
    for (std::size_t i = 0; i < h1.records.size(); ++i) {
        CHECK(h1.records[i].fooling == h2.records[i].fooling);
        CHECK(h1.records[i].feedbacks == h2.records[i].feedbacks);
    }
    auto pa = p1.params(), pb = p2.params();
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->data == pb[i]->data);
}

TEST_CASE("linear-oracle toy task: fooling reaches 0.9 within 50 iterations") {
    // Oracle accepts iff the mean real-part distortion exceeds a threshold
    // reachable inside the clipping box.
    auto policy = make_policy(PolicyStateVariant::Recurrent, 16, 33);
    Rng pre_rng(34);
    std::vector<IqSignal> corpus;
    for (int i = 0; i < 4; ++i) corpus.push_back(random_message(32, pre_rng));
    pretrain_identity(policy, corpus, 150, pre_rng);
    RolloutPolicy roll;
    sync_rollout(policy, roll);

    // Messages are fresh QPSK blocks; the oracle compares the emitted signal
    // against the nearest QPSK constellation point to measure distortion.
    AttackEnv env;
    env.make_message = [](Rng& r) { return random_message(32, r); };
    env.feedback = [](const IqSignal& s) {
        double mean_shift = 0.0;
        const double q = 1.0 / std::sqrt(2.0);
        for (const auto& z : s.samples) {
            const double sr = z.real() >= 0 ? q : -q;
            mean_shift += (z.real() - sr) * (sr >= 0 ? 1.0 : -1.0);
        }
        mean_shift /= static_cast<double>(s.samples.size());
        return mean_shift > 0.02 ? 1 : 0;
    };

    AttackConfig cfg;
    cfg.iterations = 50;
    cfg.g_steps = 4;
    cfg.entropy_coef = 0.01;
    cfg.eval_transmissions = 50;
    cfg.lr = {0.005, 0.5, 200};

    Rng rng(35);
    const auto hist = run_attack(policy, roll, env, cfg, rng);
    CHECK(hist.initial_fooling < 0.2);
    double best = 0.0;
    for (const auto& rec : hist.records) best = std::max(best, rec.fooling);
    CHECK(best >= 0.9);
}
