// Command-line front end: population generation, authenticator training,
// single attacks, experiment sweeps, and reporting over an output directory.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rfauth/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rfauth::harness {

namespace {

constexpr int kExitUsage = 2;

ExperimentConfig load_or_fail(const std::string& path) {
    if (path.empty()) throw CLI::ValidationError("--config", "a config file is required");
    return load_config(path);  // throws naming the path if missing/malformed
}

void apply_overrides(ExperimentConfig& cfg, std::uint64_t seed, bool seed_set) {
    if (seed_set) cfg.seeds = {seed};
}

void write_profiles_json(const Population& pop, const std::string& path) {
    json j;
    auto enc = [](const rf::TransmitterProfile& t) {
        return json{{"id", t.id}, {"psi0", t.psi0}, {"psi1", t.psi1}};
    };
    for (const auto& t : pop.authorized) j["authorized"].push_back(enc(t));
    for (const auto& t : pop.outliers) j["outliers"].push_back(enc(t));
    j["adversary"] = enc(pop.adversary);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    f << j.dump(2) << '\n';
}

int cmd_gen_profiles(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& out) {
    Rng base(seed);
    Rng prof_rng = base.derive(1);
    const Population pop = sample_population(cfg.n_authorized, cfg.n_outliers, prof_rng);
    write_profiles_json(pop, out + "/profiles.json");

    // A small deterministic capture: 4 packets per authorized transmitter.
    rf::ChannelModel model = cfg.channel;
    model.snr_db = cfg.snr_list.front();
    PulseShapeConfig pulse;
    Rng cap_rng = base.derive(2);
    std::vector<IqSignal> records;
    for (const auto& t : pop.authorized)
        for (int i = 0; i < 4; ++i) {
            const IqSignal msg = qpsk_modulate(generate_random_bits(512, cap_rng));
            records.push_back(rf::transmit(msg, t, model, pulse, cap_rng));
        }
    write_rfsg(out + "/captures.rfsg", records);
    std::printf("wrote %s/profiles.json and %s/captures.rfsg (%zu records)\n", out.c_str(),
                out.c_str(), records.size());
    return 0;
}

int cmd_train_auth(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& out) {
    Rng base(seed);
    Rng prof_rng = base.derive(1);
    const Population pop = sample_population(cfg.n_authorized, cfg.n_outliers, prof_rng);
    rf::ChannelModel model = cfg.channel;
    model.snr_db = cfg.snr_list.front();
    PulseShapeConfig pulse;
    Rng ds_rng = base.derive(2);
    const auto ds =
        auth::build_training_set(pop.authorized, pop.outliers, model, cfg.n_per_tx, pulse, ds_rng);
    auth::DiscriminatorSpec spec = cfg.discriminator;
    spec.n_authorized = cfg.n_authorized;
    Rng build_rng = base.derive(3);
    auth::Discriminator d = auth::build_discriminator(spec, build_rng);
    Rng train_rng = base.derive(100);
    const auto report = auth::train_authenticator(d, ds, cfg.train_epochs, cfg.train_batch, train_rng);
    const std::string ckpt = out + "/authenticator.rfnn";
    d.save(ckpt);
    std::printf("holdout_accuracy=%.4f checkpoint=%s\n", report.holdout_accuracy, ckpt.c_str());
    return 0;
}

void export_all(const ExperimentResult& r, const std::string& out) {
    export_curves_csv(r, out + "/curves.csv");
    export_summary_csv(r, out + "/summary.csv");
    if (!r.transfer.entries.empty()) export_transfer_csv(r.transfer, out + "/transfer.csv");
}

int cmd_attack(ExperimentConfig cfg, const std::string& out) {
    cfg.experiment = ExperimentKind::Single;
    const ExperimentResult r = run_single(cfg);
    export_all(r, out);
    for (const auto& c : r.cells)
        std::printf("seed=%llu initial=%.4f final=%.4f converged=%d updates=%d\n",
                    static_cast<unsigned long long>(c.seed), c.initial_fooling, c.final_fooling,
                    c.converged ? 1 : 0, c.convergence_iterations);
    return 0;
}

int cmd_experiment(ExperimentConfig cfg, const std::string& name, const std::string& out) {
    if (name == "snr-sweep")
        cfg.experiment = ExperimentKind::SnrSweep;
    else if (name == "epsilon-sweep")
        cfg.experiment = ExperimentKind::EpsilonSweep;
    else if (name == "transferability")
        cfg.experiment = ExperimentKind::Transferability;
    else if (name == "single")
        cfg.experiment = ExperimentKind::Single;
    else
        throw CLI::ValidationError("experiment",
                                   "unknown experiment name: " + name +
                                       " (expected snr-sweep, epsilon-sweep, transferability, "
                                       "or single)");
    const ExperimentResult r = run_experiment(cfg);
    export_all(r, out);
    std::printf("experiment=%s cells=%zu out=%s\n", name.c_str(), r.cells.size(), out.c_str());
    return 0;
}

int cmd_report(const std::string& out) {
    const std::string summary = out + "/summary.csv";
    std::ifstream f(summary);
    if (!f) throw std::runtime_error("cannot open " + summary);
    std::string line;
    std::getline(f, line);  // header
    std::printf("%-14s %-8s %7s %7s %10s %8s %8s %9s\n", "experiment", "channel", "snr_db",
                "epsilon", "seed", "initial", "final", "converged");
    while (std::getline(f, line)) {
        std::istringstream ss(line);
        std::vector<std::string> cols;
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
        if (cols.size() != 9) throw std::runtime_error("malformed summary row in " + summary);
        std::printf("%-14s %-8s %7s %7s %10s %8s %8s %9s\n", cols[0].c_str(), cols[1].c_str(),
                    cols[2].c_str(), cols[3].c_str(), cols[4].c_str(), cols[5].c_str(),
                    cols[6].c_str(), cols[8].c_str());
    }
    const std::string transfer = out + "/transfer.csv";
    std::ifstream tf(transfer);
    if (tf) {
        std::getline(tf, line);
        std::printf("\n%-10s %-10s %s\n", "train_id", "test_id", "fooling");
        while (std::getline(tf, line)) {
            std::istringstream ss(line);
            std::vector<std::string> cols;
            std::string c;
            while (std::getline(ss, c, ',')) cols.push_back(c);
            if (cols.size() != 3) throw std::runtime_error("malformed transfer row in " + transfer);
            std::printf("%-10s %-10s %s\n", cols[0].c_str(), cols[1].c_str(), cols[2].c_str());
        }
    }
    return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"RF-fingerprint authentication testbench and adversarial attack harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 1;
    std::string out = ".";
    app.add_option("--config", config_path, "experiment config file (json)");
    auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides config seeds)");
    app.add_option("--out", out, "output directory");

    auto* gen = app.add_subcommand("gen-profiles", "sample a transmitter population");
    auto* train = app.add_subcommand("train-auth", "train the authenticator");
    auto* atk = app.add_subcommand("attack", "run a single attack cell");
    auto* exp = app.add_subcommand("experiment", "run a named experiment sweep");
    std::string exp_name;
    exp->add_option("name", exp_name, "snr-sweep | epsilon-sweep | transferability | single")
        ->required();
    auto* rep = app.add_subcommand("report", "print a summary table from an output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        fs::create_directories(out);
        if (rep->parsed()) return cmd_report(out);

        ExperimentConfig cfg = load_or_fail(config_path);
        apply_overrides(cfg, seed, seed_opt->count() > 0);
        const std::uint64_t master = cfg.seeds.front();
        if (gen->parsed()) return cmd_gen_profiles(cfg, master, out);
        if (train->parsed()) return cmd_train_auth(cfg, master, out);
        if (atk->parsed()) return cmd_attack(cfg, out);
        if (exp->parsed()) return cmd_experiment(cfg, exp_name, out);
        std::fprintf(stderr, "error: no subcommand\n");
        return kExitUsage;
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::runtime_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace rfauth::harness

int main(int argc, char** argv) { return rfauth::harness::cli_main(argc, argv); }
