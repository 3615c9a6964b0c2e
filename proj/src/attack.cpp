#include "rfauth/attack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rfauth::attack {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // ln(2*pi)

void init_uniform(Tensor& t, double bound, Rng& rng) {
    for (auto& v : t.data) v = rng.uniform(-bound, bound);
}

// Per-step forward evaluation with everything needed for backprop.
struct StepTrace {
    nn::LstmCell::StepCache cache;  // Recurrent
    Tensor x;                       // (2) input
    Tensor body_pre;                // Memoryless pre-relu
    Tensor h;                       // body output
    std::array<double, 2> mean{};
    std::array<double, 2> logvar_raw{};
    std::array<double, 2> logvar{};
};

void head_forward(const Tensor& w, const Tensor& b, const Tensor& h, std::array<double, 2>& out) {
    const int hidden = static_cast<int>(h.size());
    out = {b[0], b[1]};
    for (int j = 0; j < hidden; ++j) {
        out[0] += h[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(2 * j)];
        out[1] += h[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(2 * j + 1)];
    }
}

// h-gradient contribution of a 2-output dense head; accumulates weight/bias
// gradients into gw/gb.
void head_backward(const Tensor& w, Tensor& gw, Tensor& gb, const Tensor& h,
                   const std::array<double, 2>& dout, Tensor& dh) {
    const int hidden = static_cast<int>(h.size());
    gb[0] += dout[0];
    gb[1] += dout[1];
    for (int j = 0; j < hidden; ++j) {
        const std::size_t u = static_cast<std::size_t>(j);
        gw[2 * u] += h[u] * dout[0];
        gw[2 * u + 1] += h[u] * dout[1];
        dh[u] += w[2 * u] * dout[0] + w[2 * u + 1] * dout[1];
    }
}

StepTrace step_forward(const GaussianPolicy& p, cplx state, const Tensor& h_prev,
                       const Tensor& c_prev, Tensor& h_out, Tensor& c_out, bool keep_cache) {
    StepTrace tr;
    tr.x = Tensor({2});
    tr.x[0] = state.real();
    tr.x[1] = state.imag();
    if (p.variant == PolicyStateVariant::Recurrent) {
        p.cell.step(tr.x, h_prev, c_prev, h_out, c_out, keep_cache ? &tr.cache : nullptr);
        tr.h = h_out;
    } else {
        const int hidden = p.hidden_size;
        tr.body_pre = Tensor({hidden});
        tr.body_pre.data = p.b_body.data;
        nn::matmul_acc(tr.x.data.data(), p.w_body.data.data(), tr.body_pre.data.data(), 1, 2,
                       hidden);
        tr.h = Tensor({hidden});
        for (std::size_t j = 0; j < tr.h.size(); ++j) tr.h[j] = std::max(0.0, tr.body_pre[j]);
        h_out = tr.h;
        c_out = Tensor();
    }
    head_forward(p.w_mean, p.b_mean, tr.h, tr.mean);
    head_forward(p.w_logvar, p.b_logvar, tr.h, tr.logvar_raw);
    for (int d = 0; d < 2; ++d)
        tr.logvar[static_cast<std::size_t>(d)] =
            std::clamp(tr.logvar_raw[static_cast<std::size_t>(d)], kLogVarMin, kLogVarMax);
    if (!std::isfinite(tr.mean[0]) || !std::isfinite(tr.mean[1]) || !std::isfinite(tr.logvar[0]) ||
        !std::isfinite(tr.logvar[1]))
        throw std::runtime_error("policy forward: non-finite network output");
    return tr;
}

double gaussian_log_prob(const std::array<double, 2>& a, const std::array<double, 2>& mean,
                         const std::array<double, 2>& logvar) {
    double lp = 0.0;
    for (int d = 0; d < 2; ++d) {
        const std::size_t u = static_cast<std::size_t>(d);
        const double e = a[u] - mean[u];
        lp += -0.5 * (kLog2Pi + logvar[u] + e * e * std::exp(-logvar[u]));
    }
    return lp;
}

double gaussian_entropy(const std::array<double, 2>& logvar) {
    return kLog2Pi + 1.0 + 0.5 * (logvar[0] + logvar[1]);
}

// Shared forward pass over a whole trajectory (states only; actions do not
// feed back into the recurrence).
std::vector<StepTrace> sequence_forward(const GaussianPolicy& p, const std::vector<cplx>& states,
                                        bool keep_caches) {
    std::vector<StepTrace> traces;
    traces.reserve(states.size());
    PolicyHidden hid = initial_hidden(p);
    for (const cplx s : states) {
        Tensor h_out, c_out;
        traces.push_back(step_forward(p, s, hid.h, hid.c, h_out, c_out, keep_caches));
        hid.h = std::move(h_out);
        hid.c = std::move(c_out);
    }
    return traces;
}

std::array<double, 2> sample_action(const std::array<double, 2>& mean,
                                    const std::array<double, 2>& logvar, Rng& rng) {
    std::array<double, 2> a{};
    for (int d = 0; d < 2; ++d) {
        const std::size_t u = static_cast<std::size_t>(d);
        a[u] = mean[u] + std::exp(0.5 * logvar[u]) * rng.normal();
    }
    return a;
}

// Backward through the body given per-step h-gradients.
void sequence_backward(GaussianPolicy& p, std::vector<StepTrace>& traces,
                       const std::vector<Tensor>& dh_steps) {
    const std::size_t n = traces.size();
    if (p.variant == PolicyStateVariant::Recurrent) {
        const int hidden = p.hidden_size;
        Tensor dh_next({hidden}), dc_next({hidden});
        for (std::size_t t = n; t-- > 0;) {
            Tensor dh = dh_steps[t];
            for (std::size_t j = 0; j < dh.size(); ++j) dh[j] += dh_next[j];
            Tensor dh_prev, dc_prev;
            p.cell.backward_step(traces[t].cache, dh, dc_next, dh_prev, dc_prev);
            dh_next = std::move(dh_prev);
            dc_next = std::move(dc_prev);
        }
    } else {
        for (std::size_t t = 0; t < n; ++t) {
            const StepTrace& tr = traces[t];
            for (std::size_t j = 0; j < dh_steps[t].size(); ++j) {
                if (tr.body_pre[j] <= 0.0) continue;
                const double g = dh_steps[t][j];
                p.gb_body[j] += g;
                p.gw_body[j] += tr.x[0] * g;  // w_body is (2, hidden) row-major
                p.gw_body[static_cast<std::size_t>(p.hidden_size) + j] += tr.x[1] * g;
            }
        }
    }
}

}  // namespace

GaussianPolicy::GaussianPolicy(PolicyStateVariant v, int hidden, Rng& rng)
    : variant(v), hidden_size(hidden) {
    if (hidden < 1) throw std::invalid_argument("policy: hidden size must be >= 1");
    if (variant == PolicyStateVariant::Recurrent) {
        cell = nn::LstmCell(2, hidden, rng);
    } else {
        w_body = Tensor({2, hidden});
        b_body = Tensor({hidden});
        gw_body = Tensor({2, hidden});
        gb_body = Tensor({hidden});
        init_uniform(w_body, std::sqrt(3.0 / 2.0), rng);
    }
    w_mean = Tensor({hidden, 2});
    b_mean = Tensor({2});
    gw_mean = Tensor({hidden, 2});
    gb_mean = Tensor({2});
    init_uniform(w_mean, std::sqrt(3.0 / hidden), rng);
    w_logvar = Tensor({hidden, 2});
    b_logvar = Tensor({2});
    gw_logvar = Tensor({hidden, 2});
    gb_logvar = Tensor({2});
    init_uniform(w_logvar, std::sqrt(3.0 / hidden), rng);
    // Start with small exploration noise (std ~ exp(-3) ~ 0.05).
    b_logvar[0] = -6.0;
    b_logvar[1] = -6.0;
}

std::vector<Tensor*> GaussianPolicy::params() {
    std::vector<Tensor*> out;
    if (variant == PolicyStateVariant::Recurrent) {
        auto c = cell.params();
        out.insert(out.end(), c.begin(), c.end());
    } else {
        out.push_back(&w_body);
        out.push_back(&b_body);
    }
    out.push_back(&w_mean);
    out.push_back(&b_mean);
    out.push_back(&w_logvar);
    out.push_back(&b_logvar);
    return out;
}

std::vector<Tensor*> GaussianPolicy::grads() {
    std::vector<Tensor*> out;
    if (variant == PolicyStateVariant::Recurrent) {
        auto c = cell.grads();
        out.insert(out.end(), c.begin(), c.end());
    } else {
        out.push_back(&gw_body);
        out.push_back(&gb_body);
    }
    out.push_back(&gw_mean);
    out.push_back(&gb_mean);
    out.push_back(&gw_logvar);
    out.push_back(&gb_logvar);
    return out;
}

void GaussianPolicy::zero_grads() {
    for (auto* g : grads()) g->zero();
}

PolicyHidden initial_hidden(const GaussianPolicy& policy) {
    PolicyHidden hid;
    if (policy.variant == PolicyStateVariant::Recurrent) {
        hid.h = Tensor({policy.hidden_size});
        hid.c = Tensor({policy.hidden_size});
    }
    return hid;
}

PolicyStep policy_step(const GaussianPolicy& policy, cplx state, const PolicyHidden& hidden,
                       Rng& rng) {
    PolicyStep out;
    Tensor h_out, c_out;
    const StepTrace tr = step_forward(policy, state, hidden.h, hidden.c, h_out, c_out, false);
    out.action = sample_action(tr.mean, tr.logvar, rng);
    out.log_prob = gaussian_log_prob(out.action, tr.mean, tr.logvar);
    out.entropy = gaussian_entropy(tr.logvar);
    out.next_hidden.h = std::move(h_out);
    out.next_hidden.c = std::move(c_out);
    return out;
}

std::array<double, 2> clip_action(const std::array<double, 2>& raw, cplx state, double epsilon) {
    const double half = epsilon * std::abs(state);
    const std::array<double, 2> s{state.real(), state.imag()};
    std::array<double, 2> out{};
    for (int d = 0; d < 2; ++d) {
        const std::size_t u = static_cast<std::size_t>(d);
        out[u] = std::min(s[u] + half, std::max(raw[u], s[u] - half));
    }
    return out;
}

IqSignal Trajectory::emitted_signal() const {
    IqSignal sig;
    sig.samples.reserve(clipped.size());
    for (const auto& a : clipped) sig.samples.push_back(cplx{a[0], a[1]});
    return sig;
}

Trajectory generate_trajectory(const GaussianPolicy& policy, const IqSignal& message,
                               double epsilon, Rng& rng) {
    if (message.samples.empty()) throw std::invalid_argument("generate_trajectory: empty message");
    Trajectory traj;
    traj.clip_epsilon = epsilon;
    traj.states = message.samples;
    const auto traces = sequence_forward(policy, traj.states, false);
    traj.actions.reserve(traces.size());
    traj.clipped.reserve(traces.size());
    traj.log_probs.reserve(traces.size());
    traj.entropies.reserve(traces.size());
    for (std::size_t t = 0; t < traces.size(); ++t) {
        const auto a = sample_action(traces[t].mean, traces[t].logvar, rng);
        traj.actions.push_back(a);
        traj.clipped.push_back(clip_action(a, traj.states[t], epsilon));
        traj.log_probs.push_back(gaussian_log_prob(a, traces[t].mean, traces[t].logvar));
        traj.entropies.push_back(gaussian_entropy(traces[t].logvar));
    }
    return traj;
}

void sync_rollout(const GaussianPolicy& policy, RolloutPolicy& rollout) {
    rollout.snapshot = policy;
}

IqSignal complete_with_rollout(const Trajectory& prefix, std::size_t t,
                               const RolloutPolicy& rollout, double epsilon, Rng& rng) {
    const std::size_t n = prefix.length();
    if (t < 1 || t > n) throw std::invalid_argument("complete_with_rollout: t out of range");
    IqSignal sig;
    sig.samples.reserve(n);
    for (std::size_t i = 0; i < t; ++i)
        sig.samples.push_back(cplx{prefix.clipped[i][0], prefix.clipped[i][1]});
    if (t == n) return sig;
    const auto traces = sequence_forward(rollout.snapshot, prefix.states, false);
    for (std::size_t i = t; i < n; ++i) {
        const auto raw = sample_action(traces[i].mean, traces[i].logvar, rng);
        const auto a = clip_action(raw, prefix.states[i], epsilon);
        sig.samples.push_back(cplx{a[0], a[1]});
    }
    return sig;
}

long estimate_rewards(Trajectory& trajectory, const RolloutPolicy& rollout,
                      const FeedbackFn& feedback, int mc_searches, Rng& rng) {
    const std::size_t n = trajectory.length();
    if (n == 0) throw std::invalid_argument("estimate_rewards: empty trajectory");
    if (mc_searches < 1) throw std::invalid_argument("estimate_rewards: M must be >= 1");
    trajectory.rewards.assign(n, 0.0);
    long count = 0;

    // The rollout distribution at each step depends only on the input states,
    // so one forward pass serves every completion.
    const auto traces = sequence_forward(rollout.snapshot, trajectory.states, false);

    IqSignal sig;
    sig.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        sig.samples[i] = cplx{trajectory.clipped[i][0], trajectory.clipped[i][1]};

    for (std::size_t t = 0; t + 1 < n; ++t) {
        double acc = 0.0;
        for (int m = 0; m < mc_searches; ++m) {
            IqSignal comp = sig;
            for (std::size_t i = t + 1; i < n; ++i) {
                const auto raw = sample_action(traces[i].mean, traces[i].logvar, rng);
                const auto a = clip_action(raw, trajectory.states[i], trajectory.clip_epsilon);
                comp.samples[i] = cplx{a[0], a[1]};
            }
            acc += feedback(comp);
            ++count;
        }
        trajectory.rewards[t] = acc / static_cast<double>(mc_searches);
    }
    const int last = feedback(sig);
    ++count;
    if (last != 0 && last != 1)
        throw std::invalid_argument("estimate_rewards: feedback must be 0 or 1");
    trajectory.rewards[n - 1] = last;
    return count;
}

namespace {

// Shared forward + objective evaluation; optionally accumulates gradients.
double surrogate_impl(GaussianPolicy& policy, const Trajectory& traj, const AttackConfig& config,
                      bool with_grad) {
    const std::size_t n = traj.length();
    if (traj.rewards.size() != n) throw std::invalid_argument("surrogate: rewards not populated");
    if (config.baseline == BaselineKind::Learned)
        throw std::invalid_argument("surrogate: learned baseline is not implemented");

    auto traces = sequence_forward(policy, traj.states, with_grad);

    std::vector<double> log_probs(n), entropies(n);
    for (std::size_t t = 0; t < n; ++t) {
        log_probs[t] = gaussian_log_prob(traj.actions[t], traces[t].mean, traces[t].logvar);
        entropies[t] = gaussian_entropy(traces[t].logvar);
    }

    // RTG_t = sum_{t'>=t} gamma^(t'-t) (r_t' + eta*H_t'), single backward pass.
    std::vector<double> rtg(n);
    double acc = 0.0;
    for (std::size_t t = n; t-- > 0;) {
        acc = traj.rewards[t] + config.entropy_coef * entropies[t] + config.gamma * acc;
        rtg[t] = acc;
    }
    double objective = 0.0;
    for (std::size_t t = 0; t < n; ++t) objective += log_probs[t] * rtg[t];
    if (!std::isfinite(objective))
        throw std::runtime_error("policy_gradient: non-finite surrogate");
    if (!with_grad) return objective;

    // dJ/dH_t = eta * C_t with C_t = sum_{t'<=t} gamma^(t-t') log_prob_t',
    // from the entropy terms inside every earlier step's reward-to-go.
    std::vector<double> dH(n);
    double fwd = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        fwd = log_probs[t] + config.gamma * fwd;
        dH[t] = config.entropy_coef * fwd;
    }

    // We minimize -J: flip signs once at the head gradients.
    std::vector<Tensor> dh_steps(n, Tensor({policy.hidden_size}));
    for (std::size_t t = 0; t < n; ++t) {
        std::array<double, 2> dmean{}, dlogvar{};
        for (int d = 0; d < 2; ++d) {
            const std::size_t u = static_cast<std::size_t>(d);
            const double e = traj.actions[t][u] - traces[t].mean[u];
            const double inv_var = std::exp(-traces[t].logvar[u]);
            // d log_prob / d mean, d log_prob / d logvar at the clamped value.
            const double dlp_dm = e * inv_var;
            const double dlp_dlv = -0.5 * (1.0 - e * e * inv_var);
            dmean[u] = rtg[t] * dlp_dm;
            dlogvar[u] = rtg[t] * dlp_dlv + dH[t] * 0.5;  // dH/dlogvar = 1/2
            // Clamp mask: no gradient where the raw log-variance was clipped.
            if (traces[t].logvar_raw[u] <= kLogVarMin || traces[t].logvar_raw[u] >= kLogVarMax)
                dlogvar[u] = 0.0;
            dmean[u] = -dmean[u];
            dlogvar[u] = -dlogvar[u];
        }
        head_backward(policy.w_mean, policy.gw_mean, policy.gb_mean, traces[t].h, dmean,
                      dh_steps[t]);
        head_backward(policy.w_logvar, policy.gw_logvar, policy.gb_logvar, traces[t].h, dlogvar,
                      dh_steps[t]);
    }
    sequence_backward(policy, traces, dh_steps);
    return objective;
}

}  // namespace

double surrogate_objective(GaussianPolicy& policy, const Trajectory& trajectory,
                           const AttackConfig& config) {
    return surrogate_impl(policy, trajectory, config, false);
}

double policy_gradient(GaussianPolicy& policy, const Trajectory& trajectory,
                       const AttackConfig& config) {
    return surrogate_impl(policy, trajectory, config, true);
}

double pretrain_identity(GaussianPolicy& policy, const std::vector<IqSignal>& signals, int epochs,
                         Rng& rng) {
    if (signals.empty()) throw std::invalid_argument("pretrain_identity: empty corpus");
    for (const auto& s : signals)
        if (s.samples.empty()) throw std::invalid_argument("pretrain_identity: empty signal");

    nn::AdamState adam;
    nn::AnnealSchedule schedule{0.005, 1.0, 1};
    auto params = policy.params();
    auto grads = policy.grads();

    double rms = 0.0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = 0; i < signals.size(); ++i) {
            const std::size_t pick = rng.uniform_int(signals.size());
            const auto& sig = signals[pick];
            const std::size_t n = sig.samples.size();
            auto traces = sequence_forward(policy, sig.samples, true);
            policy.zero_grads();
            std::vector<Tensor> dh_steps(n, Tensor({policy.hidden_size}));
            const double scale = 1.0 / static_cast<double>(2 * n);
            for (std::size_t t = 0; t < n; ++t) {
                const std::array<double, 2> target{sig.samples[t].real(), sig.samples[t].imag()};
                std::array<double, 2> dmean{};
                for (int d = 0; d < 2; ++d) {
                    const std::size_t u = static_cast<std::size_t>(d);
                    dmean[u] = 2.0 * (traces[t].mean[u] - target[u]) * scale;
                }
                head_backward(policy.w_mean, policy.gw_mean, policy.gb_mean, traces[t].h, dmean,
                              dh_steps[t]);
            }
            sequence_backward(policy, traces, dh_steps);
            nn::adam_step(params, grads, adam, schedule);
        }
    }

    // Final reconstruction RMS over the corpus.
    double se = 0.0;
    long cnt = 0;
    for (const auto& sig : signals) {
        const auto traces = sequence_forward(policy, sig.samples, false);
        for (std::size_t t = 0; t < sig.samples.size(); ++t) {
            const double er = traces[t].mean[0] - sig.samples[t].real();
            const double ei = traces[t].mean[1] - sig.samples[t].imag();
            se += er * er + ei * ei;
            cnt += 2;
        }
    }
    rms = std::sqrt(se / static_cast<double>(cnt));
    if (!std::isfinite(rms)) throw std::runtime_error("pretrain_identity: training diverged");
    return rms;
}

AttackHistory run_attack(GaussianPolicy& policy, RolloutPolicy& rollout, const AttackEnv& env,
                         const AttackConfig& config, Rng& rng) {
    if (!env.make_message || !env.feedback)
        throw std::invalid_argument("run_attack: environment hooks must be set");
    if (config.iterations < 1 || config.g_steps < 1)
        throw std::invalid_argument("run_attack: iterations and g_steps must be >= 1");

    Rng traj_rng = rng.derive(1);
    Rng mc_rng = rng.derive(2);
    Rng eval_rng = rng.derive(3);

    auto eval_fooling = [&]() {
        double acc = 0.0;
        for (int i = 0; i < config.eval_transmissions; ++i) {
            const IqSignal msg = env.make_message(eval_rng);
            const Trajectory t = generate_trajectory(policy, msg, config.epsilon, eval_rng);
            acc += env.feedback(t.emitted_signal());
        }
        return acc / static_cast<double>(config.eval_transmissions);
    };

    AttackHistory history;
    history.initial_fooling = eval_fooling();

    nn::AdamState adam;
    auto params = policy.params();
    auto grads = policy.grads();

    for (int iter = 1; iter <= config.iterations; ++iter) {
        for (int g = 0; g < config.g_steps; ++g) {
            const IqSignal msg = env.make_message(traj_rng);
            Trajectory traj = generate_trajectory(policy, msg, config.epsilon, traj_rng);
            history.total_feedbacks +=
                estimate_rewards(traj, rollout, env.feedback, config.mc_searches, mc_rng);
            policy.zero_grads();
            policy_gradient(policy, traj, config);
            nn::adam_step(params, grads, adam, config.lr);
        }
        sync_rollout(policy, rollout);
        AttackIterationRecord rec;
        rec.iteration = iter;
        rec.fooling = eval_fooling();
        rec.feedbacks = history.total_feedbacks;
        history.records.push_back(rec);
        if (env.stop && env.stop(history)) break;
    }
    return history;
}

}  // namespace rfauth::attack
