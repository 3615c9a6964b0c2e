#include "rfauth/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rfauth::harness {

using nlohmann::json;
using clock_type = std::chrono::steady_clock;

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string kind_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::SnrSweep: return "snr-sweep";
        case ExperimentKind::EpsilonSweep: return "epsilon-sweep";
        case ExperimentKind::Transferability: return "transferability";
        case ExperimentKind::Single: return "single";
    }
    return "single";
}

ExperimentKind kind_from_name(const std::string& s) {
    if (s == "snr-sweep") return ExperimentKind::SnrSweep;
    if (s == "epsilon-sweep") return ExperimentKind::EpsilonSweep;
    if (s == "transferability") return ExperimentKind::Transferability;
    if (s == "single") return ExperimentKind::Single;
    throw std::invalid_argument("unknown experiment kind: " + s);
}

void validate(const ExperimentConfig& c) {
    if (c.n_authorized < 2) throw std::invalid_argument("config: n_authorized must be >= 2");
    if (c.n_outliers < 1) throw std::invalid_argument("config: n_outliers must be >= 1");
    if (c.snr_list.empty() || c.epsilon_list.empty() || c.seeds.empty())
        throw std::invalid_argument("config: snr_list, epsilon_list, and seeds must be non-empty");
    if (c.budget < 1) throw std::invalid_argument("config: budget must be >= 1");
}

struct TrainedCell {
    Population pop;
    rf::ChannelModel model;
    auth::Discriminator disc;
    double holdout = 0.0;
};

// Builds the population, dataset, and trained authenticator for a cell.
TrainedCell prepare_cell(const ExperimentConfig& config, double snr_db, std::uint64_t seed,
                         auth::DiscVariant variant, std::uint64_t disc_stream) {
    TrainedCell cell;
    Rng base(seed);
    Rng prof_rng = base.derive(1);
    cell.pop = sample_population(config.n_authorized, config.n_outliers, prof_rng);
    cell.model = config.channel;
    cell.model.snr_db = snr_db;

    PulseShapeConfig pulse;
    Rng ds_rng = base.derive(2);
    const auto ds = auth::build_training_set(cell.pop.authorized, cell.pop.outliers, cell.model,
                                             config.n_per_tx, pulse, ds_rng);
    auth::DiscriminatorSpec spec = config.discriminator;
    spec.variant = variant;
    spec.n_authorized = config.n_authorized;
    Rng build_rng = base.derive(3 + disc_stream);
    cell.disc = auth::build_discriminator(spec, build_rng);
    Rng train_rng = base.derive(100 + disc_stream);
    const auto report =
        auth::train_authenticator(cell.disc, ds, config.train_epochs, config.train_batch, train_rng);
    cell.holdout = report.holdout_accuracy;
    return cell;
}

attack::GaussianPolicy pretrained_policy(std::uint64_t seed, int pretrain_epochs) {
    Rng base(seed);
    Rng build_rng = base.derive(10);
    attack::GaussianPolicy policy(attack::PolicyStateVariant::Recurrent, 100, build_rng);
    Rng pre_rng = base.derive(11);
    std::vector<IqSignal> corpus;
    for (int i = 0; i < 8; ++i) corpus.push_back(qpsk_modulate(generate_random_bits(512, pre_rng)));
    pretrain_identity(policy, corpus, pretrain_epochs, pre_rng);
    return policy;
}

attack::AttackEnv make_env(const TrainedCell& cell, const PulseShapeConfig& pulse, Rng& fb_rng) {
    attack::AttackEnv env;
    env.make_message = [](Rng& r) { return qpsk_modulate(generate_random_bits(512, r)); };
    env.feedback = [&cell, pulse, &fb_rng](const IqSignal& s) {
        const auto y = rf::transmit(s, cell.pop.adversary, cell.model, pulse, fb_rng);
        return auth::authenticate(cell.disc, y).accept ? 1 : 0;
    };
    return env;
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t x = mix64(master ^ 0x8f1bbcdcbfa53e0bULL);
    x = mix64(x ^ mix64(a));
    x = mix64(x ^ mix64(b));
    x = mix64(x ^ mix64(c));
    return x;
}

Population sample_population(int n_authorized, int n_outliers, Rng& rng) {
    // Authorized fingerprints occupy the strong-nonlinearity band; outliers
    // and the adversary a disjoint weaker band, so the task is learnable by
    // the fixed feature extractor while the adversary starts rejected.
    auto sample_band = [&rng](int n, double lo, double hi, double min_gap, int id0) {
        std::vector<rf::TransmitterProfile> out;
        while (static_cast<int>(out.size()) < n) {
            const double p = lo + (hi - lo) * rng.uniform();
            bool ok = true;
            for (const auto& q : out)
                if (std::abs(q.psi0 - p) < min_gap) ok = false;
            if (!ok) continue;
            const double kappa = 0.5 + rng.uniform();
            out.push_back({id0 + static_cast<int>(out.size()), p, kappa * p * p});
        }
        return out;
    };
    Population pop;
    pop.authorized = sample_band(n_authorized, -0.15, -0.096, 0.3 / (10.0 * n_authorized), 0);
    pop.outliers = sample_band(n_outliers, -0.066, -0.03, 0.2 / (10.0 * n_outliers), n_authorized);
    pop.adversary = sample_band(1, -0.055, -0.03, 0.0, n_authorized + n_outliers)[0];
    return pop;
}

int detect_convergence(const std::vector<double>& fooling, double initial) {
    constexpr int kWindow = 20;
    constexpr double kPlateau = 0.02;
    constexpr double kTakeoff = 0.05;
    for (std::size_t i = static_cast<std::size_t>(kWindow); i <= fooling.size(); ++i) {
        double lo = 1.0, hi = 0.0;
        for (std::size_t j = i - kWindow; j < i; ++j) {
            lo = std::min(lo, fooling[j]);
            hi = std::max(hi, fooling[j]);
        }
        // A plateau at the starting level is "not yet learning", not
        // convergence; require the window to sit away from the initial rate.
        if (hi - lo < kPlateau && lo >= initial + kTakeoff)
            return static_cast<int>(i);
    }
    return 0;
}

CellResult run_cell(const ExperimentConfig& config, double snr_db, double epsilon,
                    std::uint64_t seed) {
    validate(config);
    CellResult result;
    result.snr_db = snr_db;
    result.epsilon = epsilon;
    result.seed = seed;
    result.channel = config.channel.variant == rf::ChannelVariant::Dynamic ? "dynamic" : "awgn";

    const TrainedCell cell =
        prepare_cell(config, snr_db, seed, config.discriminator.variant, 0);
    attack::GaussianPolicy policy = pretrained_policy(seed, config.pretrain_epochs);
    attack::RolloutPolicy rollout;
    attack::sync_rollout(policy, rollout);

    PulseShapeConfig pulse;
    Rng base(seed);
    Rng fb_rng = base.derive(20);
    attack::AttackEnv env = make_env(cell, pulse, fb_rng);

    const auto t0 = clock_type::now();
    std::vector<double> fooling_series;
    env.stop = [&fooling_series](const attack::AttackHistory& h) {
        fooling_series.push_back(h.records.back().fooling);
        return detect_convergence(fooling_series, h.initial_fooling) != 0;
    };

    attack::AttackConfig acfg = config.attack;
    acfg.epsilon = epsilon;
    acfg.iterations = config.budget;
    Rng attack_rng = base.derive(21);
    const auto hist = attack::run_attack(policy, rollout, env, acfg, attack_rng);
    const double total_s = std::chrono::duration<double>(clock_type::now() - t0).count();

    result.initial_fooling = hist.initial_fooling;
    result.final_fooling = hist.records.back().fooling;
    result.curve.initial_fooling = hist.initial_fooling;
    for (std::size_t i = 0; i < hist.records.size(); ++i) {
        CurvePoint p;
        p.iteration = hist.records[i].iteration;
        p.fooling = hist.records[i].fooling;
        p.feedbacks = hist.records[i].feedbacks;
        p.wall_seconds = total_s * static_cast<double>(i + 1) /
                         static_cast<double>(hist.records.size());
        result.curve.points.push_back(p);
    }
    const int conv = detect_convergence(fooling_series, hist.initial_fooling);
    result.converged = conv != 0;
    // Convergence time in generator gradient updates (g_steps per iteration).
    result.convergence_iterations =
        (conv != 0 ? conv : static_cast<int>(hist.records.size())) * config.attack.g_steps;
    return result;
}

ExperimentResult run_snr_sweep(const ExperimentConfig& config) {
    validate(config);
    ExperimentResult out;
    out.experiment = ExperimentKind::SnrSweep;
    for (std::size_t si = 0; si < config.snr_list.size(); ++si)
        for (std::size_t ki = 0; ki < config.seeds.size(); ++ki) {
            const std::uint64_t seed = cell_seed(config.seeds[ki], 1, si, 0);
            out.cells.push_back(
                run_cell(config, config.snr_list[si], config.attack.epsilon, seed));
        }
    return out;
}

ExperimentResult run_epsilon_sweep(const ExperimentConfig& config) {
    validate(config);
    if (config.channel.variant != rf::ChannelVariant::Awgn)
        throw std::invalid_argument("epsilon sweep: requires the simple (awgn) channel");
    ExperimentResult out;
    out.experiment = ExperimentKind::EpsilonSweep;
    for (std::size_t ei = 0; ei < config.epsilon_list.size(); ++ei)
        for (std::size_t si = 0; si < config.snr_list.size(); ++si)
            for (std::size_t ki = 0; ki < config.seeds.size(); ++ki) {
                const std::uint64_t seed = cell_seed(config.seeds[ki], 2, si, ei);
                out.cells.push_back(
                    run_cell(config, config.snr_list[si], config.epsilon_list[ei], seed));
            }
    return out;
}

ExperimentResult run_transferability(const ExperimentConfig& config) {
    validate(config);
    ExperimentResult out;
    out.experiment = ExperimentKind::Transferability;
    const double snr = config.snr_list.front();
    const std::uint64_t master = config.seeds.front();

    // Six authenticators on the same population (seeded population stream,
    // distinct initialization/training streams).
    const std::uint64_t pop_seed = cell_seed(master, 3, 0, 0);
    struct Target {
        std::string id;
        auth::DiscVariant variant;
        TrainedCell cell;
    };
    std::vector<Target> targets;
    const std::pair<std::string, auth::DiscVariant> kinds[] = {
        {"disc", auth::DiscVariant::Disc},
        {"dclass", auth::DiscVariant::Dclass},
        {"ova", auth::DiscVariant::Ova},
    };
    for (const auto& [name, variant] : kinds)
        for (int copy = 1; copy <= 2; ++copy) {
            Target t;
            t.id = name + "_" + std::to_string(copy);
            t.variant = variant;
            t.cell = prepare_cell(config, snr, pop_seed, variant,
                                  static_cast<std::uint64_t>(targets.size() + 1) * 7);
            targets.push_back(std::move(t));
        }

    PulseShapeConfig pulse;
    for (int attacked = 0; attacked < 2; ++attacked) {  // disc_1, disc_2
        const Target& victim = targets[static_cast<std::size_t>(attacked)];
        const std::uint64_t atk_seed = cell_seed(master, 4, static_cast<std::uint64_t>(attacked), 0);
        attack::GaussianPolicy policy = pretrained_policy(atk_seed, config.pretrain_epochs);
        attack::RolloutPolicy rollout;
        attack::sync_rollout(policy, rollout);
        Rng base(atk_seed);
        Rng fb_rng = base.derive(20);
        attack::AttackEnv env = make_env(victim.cell, pulse, fb_rng);
        std::vector<double> series;
        env.stop = [&series](const attack::AttackHistory& h) {
            series.push_back(h.records.back().fooling);
            return detect_convergence(series, h.initial_fooling) != 0;
        };
        attack::AttackConfig acfg = config.attack;
        acfg.iterations = config.budget;
        Rng attack_rng = base.derive(21);
        const auto hist = attack::run_attack(policy, rollout, env, acfg, attack_rng);

        CellResult cr;
        cr.snr_db = snr;
        cr.epsilon = acfg.epsilon;
        cr.seed = atk_seed;
        cr.channel = config.channel.variant == rf::ChannelVariant::Dynamic ? "dynamic" : "awgn";
        cr.initial_fooling = hist.initial_fooling;
        cr.final_fooling = hist.records.back().fooling;
        for (const auto& r : hist.records)
            cr.curve.points.push_back({r.iteration, r.fooling, r.feedbacks, 0.0});
        out.cells.push_back(std::move(cr));

        // Evaluate the converged generator's transmissions against every
        // authenticator: same emitted signals, independent channel draws.
        Rng eval_rng = base.derive(22);
        std::vector<IqSignal> received(targets.size());
        const int n_eval = 200;
        std::vector<int> accepts(targets.size(), 0);
        for (int i = 0; i < n_eval; ++i) {
            const IqSignal msg = qpsk_modulate(generate_random_bits(512, eval_rng));
            const auto traj = attack::generate_trajectory(policy, msg, acfg.epsilon, eval_rng);
            const IqSignal emitted = traj.emitted_signal();
            for (std::size_t t = 0; t < targets.size(); ++t) {
                const auto y = rf::transmit(emitted, targets[t].cell.pop.adversary,
                                            targets[t].cell.model, pulse, eval_rng);
                accepts[t] += auth::authenticate(targets[t].cell.disc, y).accept;
            }
        }
        for (std::size_t t = 0; t < targets.size(); ++t)
            out.transfer.entries.push_back(
                {victim.id, targets[t].id,
                 static_cast<double>(accepts[t]) / static_cast<double>(n_eval)});
    }
    return out;
}

ExperimentResult run_single(const ExperimentConfig& config) {
    validate(config);
    ExperimentResult out;
    out.experiment = ExperimentKind::Single;
    for (const std::uint64_t s : config.seeds)
        out.cells.push_back(run_cell(config, config.snr_list.front(), config.attack.epsilon,
                                     cell_seed(s, 0, 0, 0)));
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    switch (config.experiment) {
        case ExperimentKind::SnrSweep: return run_snr_sweep(config);
        case ExperimentKind::EpsilonSweep: return run_epsilon_sweep(config);
        case ExperimentKind::Transferability: return run_transferability(config);
        case ExperimentKind::Single: return run_single(config);
    }
    throw std::invalid_argument("run_experiment: unknown experiment kind");
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);  // binary: byte-identical newlines
    if (!f) throw std::runtime_error("export_csv: cannot open " + path);
    return f;
}

}  // namespace

void export_curves_csv(const ExperimentResult& result, const std::string& path) {
    auto f = open_out(path);
    f << "experiment,channel,snr_db,epsilon,seed,iteration,fooling,feedbacks\n";
    for (const auto& c : result.cells)
        for (const auto& p : c.curve.points)
            f << kind_name(result.experiment) << ',' << c.channel << ',' << fmt6(c.snr_db) << ','
              << fmt6(c.epsilon) << ',' << c.seed << ',' << p.iteration << ',' << fmt6(p.fooling)
              << ',' << p.feedbacks << '\n';
    if (!f) throw std::runtime_error("export_csv: write failed for " + path);
}

void export_summary_csv(const ExperimentResult& result, const std::string& path) {
    auto f = open_out(path);
    f << "experiment,channel,snr_db,epsilon,seed,initial_fooling,final_fooling,"
         "convergence_updates,converged\n";
    for (const auto& c : result.cells)
        f << kind_name(result.experiment) << ',' << c.channel << ',' << fmt6(c.snr_db) << ','
          << fmt6(c.epsilon) << ',' << c.seed << ',' << fmt6(c.initial_fooling) << ','
          << fmt6(c.final_fooling) << ',' << c.convergence_iterations << ','
          << (c.converged ? 1 : 0) << '\n';
    if (!f) throw std::runtime_error("export_csv: write failed for " + path);
}

void export_transfer_csv(const TransferMatrix& matrix, const std::string& path) {
    auto f = open_out(path);
    f << "train_id,test_id,fooling_rate\n";
    for (const auto& e : matrix.entries)
        f << e.train_id << ',' << e.test_id << ',' << fmt6(e.fooling) << '\n';
    if (!f) throw std::runtime_error("export_csv: write failed for " + path);
}

namespace {

json channel_to_json(const rf::ChannelModel& m) {
    return {{"variant", m.variant == rf::ChannelVariant::Dynamic ? "dynamic" : "awgn"},
            {"snr_db", m.snr_db},
            {"cfo_std_hz", m.cfo_std_hz},
            {"n_taps", m.n_taps},
            {"rayleigh_scale", m.rayleigh_scale},
            {"interp_factor", m.interp_factor}};
}

rf::ChannelModel channel_from_json(const json& j) {
    rf::ChannelModel m;
    const std::string v = j.value("variant", "awgn");
    if (v == "dynamic")
        m.variant = rf::ChannelVariant::Dynamic;
    else if (v == "awgn")
        m.variant = rf::ChannelVariant::Awgn;
    else
        throw std::invalid_argument("config: unknown channel variant " + v);
    m.snr_db = j.value("snr_db", m.snr_db);
    m.cfo_std_hz = j.value("cfo_std_hz", m.cfo_std_hz);
    m.n_taps = j.value("n_taps", m.n_taps);
    m.rayleigh_scale = j.value("rayleigh_scale", m.rayleigh_scale);
    m.interp_factor = j.value("interp_factor", m.interp_factor);
    return m;
}

std::string disc_variant_name(auth::DiscVariant v) {
    switch (v) {
        case auth::DiscVariant::Disc: return "disc";
        case auth::DiscVariant::Dclass: return "dclass";
        case auth::DiscVariant::Ova: return "ova";
    }
    return "disc";
}

auth::DiscVariant disc_variant_from(const std::string& s) {
    if (s == "disc") return auth::DiscVariant::Disc;
    if (s == "dclass") return auth::DiscVariant::Dclass;
    if (s == "ova") return auth::DiscVariant::Ova;
    throw std::invalid_argument("config: unknown discriminator variant " + s);
}

}  // namespace

void save_config(const ExperimentConfig& c, const std::string& path) {
    json j;
    j["experiment"] = kind_name(c.experiment);
    j["n_authorized"] = c.n_authorized;
    j["n_outliers"] = c.n_outliers;
    j["snr_list"] = c.snr_list;
    j["epsilon_list"] = c.epsilon_list;
    j["channel"] = channel_to_json(c.channel);
    j["attack"] = {{"epsilon", c.attack.epsilon},
                   {"gamma", c.attack.gamma},
                   {"entropy_coef", c.attack.entropy_coef},
                   {"mc_searches", c.attack.mc_searches},
                   {"g_steps", c.attack.g_steps},
                   {"lr_initial", c.attack.lr.initial_lr},
                   {"lr_decay", c.attack.lr.decay_factor},
                   {"lr_decay_every", c.attack.lr.decay_every},
                   {"baseline", c.attack.baseline == attack::BaselineKind::None ? "none" : "learned"},
                   {"eval_transmissions", c.attack.eval_transmissions}};
    j["discriminator"] = {{"variant", disc_variant_name(c.discriminator.variant)},
                          {"preprocessing", c.discriminator.preprocessing ==
                                                    auth::Preprocessing::DftMagnitude
                                                ? "dft-magnitude"
                                                : "raw-iq"},
                          {"feature_filters", c.discriminator.feature_filters},
                          {"classifier_hidden", c.discriminator.classifier_hidden},
                          {"kernel", c.discriminator.kernel},
                          {"l2_weight", c.discriminator.l2_weight}};
    j["seeds"] = c.seeds;
    j["budget"] = c.budget;
    j["n_per_tx"] = c.n_per_tx;
    j["train_epochs"] = c.train_epochs;
    j["train_batch"] = c.train_batch;
    j["pretrain_epochs"] = c.pretrain_epochs;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_config: cannot open " + path);
    f << j.dump(2) << '\n';
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_config: cannot open " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument("load_config: malformed config " + path + ": " + e.what());
    }
    ExperimentConfig c;
    if (j.contains("experiment")) c.experiment = kind_from_name(j["experiment"].get<std::string>());
    c.n_authorized = j.value("n_authorized", c.n_authorized);
    c.n_outliers = j.value("n_outliers", c.n_outliers);
    if (j.contains("snr_list")) {
        // JSON has no infinity literal; null round-trips the noiseless sentinel.
        c.snr_list.clear();
        for (const auto& v : j["snr_list"])
            c.snr_list.push_back(v.is_null() ? rf::kSnrInfinity : v.get<double>());
    }
    if (j.contains("epsilon_list")) c.epsilon_list = j["epsilon_list"].get<std::vector<double>>();
    if (j.contains("channel")) c.channel = channel_from_json(j["channel"]);
    if (j.contains("attack")) {
        const json& a = j["attack"];
        c.attack.epsilon = a.value("epsilon", c.attack.epsilon);
        c.attack.gamma = a.value("gamma", c.attack.gamma);
        c.attack.entropy_coef = a.value("entropy_coef", c.attack.entropy_coef);
        c.attack.mc_searches = a.value("mc_searches", c.attack.mc_searches);
        c.attack.g_steps = a.value("g_steps", c.attack.g_steps);
        c.attack.lr.initial_lr = a.value("lr_initial", c.attack.lr.initial_lr);
        c.attack.lr.decay_factor = a.value("lr_decay", c.attack.lr.decay_factor);
        c.attack.lr.decay_every = a.value("lr_decay_every", c.attack.lr.decay_every);
        if (a.contains("baseline")) {
            const std::string b = a["baseline"].get<std::string>();
            if (b == "none")
                c.attack.baseline = attack::BaselineKind::None;
            else if (b == "learned")
                c.attack.baseline = attack::BaselineKind::Learned;
            else
                throw std::invalid_argument("config: unknown baseline " + b);
        }
        c.attack.eval_transmissions = a.value("eval_transmissions", c.attack.eval_transmissions);
    }
    if (j.contains("discriminator")) {
        const json& d = j["discriminator"];
        if (d.contains("variant"))
            c.discriminator.variant = disc_variant_from(d["variant"].get<std::string>());
        if (d.contains("preprocessing")) {
            const std::string p = d["preprocessing"].get<std::string>();
            if (p == "raw-iq")
                c.discriminator.preprocessing = auth::Preprocessing::RawIq;
            else if (p == "dft-magnitude")
                c.discriminator.preprocessing = auth::Preprocessing::DftMagnitude;
            else
                throw std::invalid_argument("config: unknown preprocessing " + p);
        }
        if (d.contains("feature_filters"))
            c.discriminator.feature_filters = d["feature_filters"].get<std::vector<int>>();
        if (d.contains("classifier_hidden"))
            c.discriminator.classifier_hidden = d["classifier_hidden"].get<std::vector<int>>();
        c.discriminator.kernel = d.value("kernel", c.discriminator.kernel);
        c.discriminator.l2_weight = d.value("l2_weight", c.discriminator.l2_weight);
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    c.budget = j.value("budget", c.budget);
    c.n_per_tx = j.value("n_per_tx", c.n_per_tx);
    c.train_epochs = j.value("train_epochs", c.train_epochs);
    c.train_batch = j.value("train_batch", c.train_batch);
    c.pretrain_epochs = j.value("pretrain_epochs", c.pretrain_epochs);
    validate(c);
    return c;
}

}  // namespace rfauth::harness
