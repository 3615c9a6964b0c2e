#ifndef RFAUTH_ATTACK_HPP
#define RFAUTH_ATTACK_HPP

#include <array>
#include <functional>
#include <vector>

#include "rfauth/nn.hpp"
#include "rfauth/signal.hpp"

namespace rfauth::attack {

using nn::Tensor;

enum class PolicyStateVariant { Memoryless, Recurrent };
enum class BaselineKind { None, Learned };

struct AttackConfig {
    double epsilon = 0.2;       // max relative distortion per component
    double gamma = 1.0;         // reward discount
    double entropy_coef = 1000.0;  // eta: per-step entropy bonus weight
    int mc_searches = 1;        // M: rollout completions per intermediate step
    int iterations = 100;       // K: outer iterations (one rollout sync each)
    int g_steps = 1;            // policy updates per outer iteration
    nn::AnnealSchedule lr{0.001, 0.5, 50};
    BaselineKind baseline = BaselineKind::None;  // Learned is a disabled hook
    int eval_transmissions = 100;  // fresh eval transmissions per iteration
};

// Recurrent (default) or feedforward Gaussian policy over per-sample IQ
// distortions. Each step consumes one complex input sample and emits the mean
// and log-variance of a 2-D diagonal Gaussian; log-variances are clamped to
// [-10, 2].
class GaussianPolicy {
public:
    GaussianPolicy() = default;
    GaussianPolicy(PolicyStateVariant variant, int hidden, Rng& rng);

    PolicyStateVariant variant = PolicyStateVariant::Recurrent;
    int hidden_size = 0;

    // Recurrent body.
    nn::LstmCell cell;
    // Memoryless body: dense + relu.
    Tensor w_body, b_body, gw_body, gb_body;
    // Gaussian heads.
    Tensor w_mean, b_mean, gw_mean, gb_mean;
    Tensor w_logvar, b_logvar, gw_logvar, gb_logvar;

    std::vector<Tensor*> params();
    std::vector<Tensor*> grads();
    void zero_grads();
};

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 2.0;

// Hidden recurrence carried between steps (empty tensors for Memoryless).
struct PolicyHidden {
    Tensor h, c;
};
PolicyHidden initial_hidden(const GaussianPolicy& policy);

struct PolicyStep {
    std::array<double, 2> action{};  // raw Gaussian sample (pre-clipping)
    double log_prob = 0.0;
    double entropy = 0.0;
    PolicyHidden next_hidden;
};

// Evaluates the policy at one state, samples an action, and reports the exact
// Gaussian log-density and entropy at the current parameters.
PolicyStep policy_step(const GaussianPolicy& policy, cplx state, const PolicyHidden& hidden,
                       Rng& rng);

// Component-wise clamp of the raw action into the box of half-width
// epsilon*|s| centered on the input sample (forces (0,0) when s = 0).
std::array<double, 2> clip_action(const std::array<double, 2>& raw, cplx state, double epsilon);

struct Trajectory {
    std::vector<cplx> states;                      // input samples s_t
    std::vector<std::array<double, 2>> actions;    // raw Gaussian samples
    std::vector<std::array<double, 2>> clipped;    // emitted (transmitted) samples
    std::vector<double> log_probs;
    std::vector<double> entropies;
    std::vector<double> rewards;                   // in [0,1]; set by estimate_rewards
    double clip_epsilon = 0.2;                     // box half-width factor used when emitting

    std::size_t length() const { return states.size(); }
    // Emitted complex signal a_1..a_Gamma.
    IqSignal emitted_signal() const;
};

// Runs the policy over a fresh message, sampling and clipping each step.
Trajectory generate_trajectory(const GaussianPolicy& policy, const IqSignal& message,
                               double epsilon, Rng& rng);

// Frozen snapshot G_beta used to complete partial trajectories.
struct RolloutPolicy {
    GaussianPolicy snapshot;
};
void sync_rollout(const GaussianPolicy& policy, RolloutPolicy& rollout);

// Completes the trajectory prefix a_1..a_t with clipped samples from the
// rollout policy over states s_{t+1}..s_Gamma.
IqSignal complete_with_rollout(const Trajectory& prefix, std::size_t t,
                               const RolloutPolicy& rollout, double epsilon, Rng& rng);

using FeedbackFn = std::function<int(const IqSignal&)>;

// Populates trajectory rewards: r_Gamma from the actual emitted signal, and
// r_t (t < Gamma) as the mean of M feedbacks on fresh rollout completions.
// Returns the number of feedback queries consumed.
long estimate_rewards(Trajectory& trajectory, const RolloutPolicy& rollout,
                      const FeedbackFn& feedback, int mc_searches, Rng& rng);

// Entropy-regularized score-function surrogate, fully differentiable in the
// policy parameters at the stored states/actions/rewards:
//   J = sum_t log pi(a_t|s_t) * RTG_t,
//   RTG_t = sum_{t'>=t} gamma^(t'-t) * (r_t' + eta*H_t').
double surrogate_objective(GaussianPolicy& policy, const Trajectory& trajectory,
                           const AttackConfig& config);

// Accumulates d(-J)/d(theta) into the policy's gradient buffers (exact
// gradient of the surrogate, including the entropy path through the variance
// head). Returns J.
double policy_gradient(GaussianPolicy& policy, const Trajectory& trajectory,
                       const AttackConfig& config);

// Supervised identity pretraining: minimizes per-step MSE between the policy
// mean and the input sample over the authorized-signal corpus.
// Returns the final mean reconstruction RMS.
double pretrain_identity(GaussianPolicy& policy, const std::vector<IqSignal>& signals,
                         int epochs, Rng& rng);

struct AttackIterationRecord {
    int iteration = 0;          // 1-based
    double fooling = 0.0;       // eval fooling rate after this iteration
    long feedbacks = 0;         // cumulative training feedbacks
};

struct AttackHistory {
    std::vector<AttackIterationRecord> records;
    double initial_fooling = 0.0;  // pre-update policy, fresh transmissions
    long total_feedbacks = 0;
};

struct AttackEnv {
    // Fresh 256-sample message (the adversary's own baseband samples).
    std::function<IqSignal(Rng&)> make_message;
    // 1-bit authenticator feedback on an emitted signal (full transmit path
    // with a fresh channel realization); the attacker sees nothing else.
    FeedbackFn feedback;
    // Optional early-stop check, consulted after each iteration's record.
    std::function<bool(const AttackHistory&)> stop;
};

// Full attack loop: per iteration, g_steps policy updates (trajectory, reward
// estimation, surrogate gradient, Adam), then rollout sync and a fooling-rate
// evaluation over fresh transmissions (not counted as training feedback).
AttackHistory run_attack(GaussianPolicy& policy, RolloutPolicy& rollout, const AttackEnv& env,
                         const AttackConfig& config, Rng& rng);

}  // namespace rfauth::attack

#endif
