#ifndef RFAUTH_HARNESS_HPP
#define RFAUTH_HARNESS_HPP

#include <string>
#include <vector>

#include "rfauth/attack.hpp"
#include "rfauth/auth.hpp"
#include "rfauth/rf.hpp"

namespace rfauth::harness {

enum class ExperimentKind { SnrSweep, EpsilonSweep, Transferability, Single };

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::Single;
    int n_authorized = 10;
    int n_outliers = 10;
    std::vector<double> snr_list = {5.0, 10.0, 15.0, 20.0, 25.0};
    std::vector<double> epsilon_list = {0.1, 0.2, 0.3, 0.4};
    rf::ChannelModel channel;
    attack::AttackConfig attack;
    auth::DiscriminatorSpec discriminator;
    std::vector<std::uint64_t> seeds = {1};
    int budget = 500;  // max attack iterations per cell

    // Authenticator training knobs (defaults match the reproduction profile).
    int n_per_tx = 150;
    int train_epochs = 30;
    int train_batch = 32;

    // Identity-pretraining depth for the attacker policy. Deeper pretraining
    // tightens the identity fit but also shrinks the policy's exploration
    // noise, which matters when the authenticator starts out near-perfect.
    int pretrain_epochs = 80;
};

// One fooling-rate history point. Wall-clock time is reported for humans and
// deliberately excluded from CSV exports to keep them byte-deterministic.
struct CurvePoint {
    int iteration = 0;
    double fooling = 0.0;
    long feedbacks = 0;
    double wall_seconds = 0.0;
};

struct FoolingCurve {
    std::vector<CurvePoint> points;
    double initial_fooling = 0.0;
};

struct CellResult {
    double snr_db = 0.0;
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    std::string channel;       // "awgn" or "dynamic"
    double initial_fooling = 0.0;
    double final_fooling = 0.0;
    int convergence_iterations = 0;  // generator gradient updates at convergence
    bool converged = false;          // false = budget exhausted
    FoolingCurve curve;
};

struct TransferEntry {
    std::string train_id;  // e.g. "disc_1"
    std::string test_id;
    double fooling = 0.0;
};

struct TransferMatrix {
    std::vector<TransferEntry> entries;
};

struct ExperimentResult {
    ExperimentKind experiment = ExperimentKind::Single;
    std::vector<CellResult> cells;
    TransferMatrix transfer;  // Transferability only
};

// Deterministic per-cell seed derived from the master seed and cell coords.
std::uint64_t cell_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b, std::uint64_t c);

// Split-band transmitter population: authorized devices in the strong-
// nonlinearity band, outliers and the adversary in a disjoint weaker band.
struct Population {
    std::vector<rf::TransmitterProfile> authorized;
    std::vector<rf::TransmitterProfile> outliers;
    rf::TransmitterProfile adversary;
};
Population sample_population(int n_authorized, int n_outliers, Rng& rng);

// Trains the authenticator and runs one attack cell to convergence (fooling
// plateau < 0.02 over 20 iterations after the curve has left its initial
// level, never before iteration 20) or budget exhaustion.
CellResult run_cell(const ExperimentConfig& config, double snr_db, double epsilon,
                    std::uint64_t seed);

ExperimentResult run_snr_sweep(const ExperimentConfig& config);
ExperimentResult run_epsilon_sweep(const ExperimentConfig& config);
ExperimentResult run_transferability(const ExperimentConfig& config);
ExperimentResult run_single(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config);

// Convergence detector used by run_cell; exposed for testing. Returns the
// 1-based iteration of convergence, or 0 if the series has not converged.
int detect_convergence(const std::vector<double>& fooling, double initial);

// CSV export (UTF-8, header row, 6 significant digits, no wall-clock column).
void export_curves_csv(const ExperimentResult& result, const std::string& path);
void export_summary_csv(const ExperimentResult& result, const std::string& path);
void export_transfer_csv(const TransferMatrix& matrix, const std::string& path);

// Config file I/O (JSON with the documented key set).
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);

int cli_main(int argc, char** argv);

}  // namespace rfauth::harness

#endif
