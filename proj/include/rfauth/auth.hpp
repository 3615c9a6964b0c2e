#ifndef RFAUTH_AUTH_HPP
#define RFAUTH_AUTH_HPP

#include <memory>
#include <string>
#include <vector>

#include "rfauth/nn.hpp"
#include "rfauth/rf.hpp"
#include "rfauth/signal.hpp"

namespace rfauth::auth {

enum class DiscVariant { Disc, Dclass, Ova };
enum class Preprocessing { RawIq, DftMagnitude };

struct DiscriminatorSpec {
    DiscVariant variant = DiscVariant::Disc;
    Preprocessing preprocessing = Preprocessing::RawIq;
    std::vector<int> feature_filters = {32, 32, 64};
    std::vector<int> classifier_hidden = {128};
    int kernel = 3;
    double l2_weight = 0.001;  // 0.001 or 0.002
    int n_authorized = 10;
};

struct AuthDecision {
    double score = 0.0;  // in [0,1]
    bool accept = false;
};

// Authenticator D: shared feature extractor plus one or more classifier heads.
// disc: 1 sigmoid head; dclass: softmax over n_authorized+1 classes (last =
// outlier); ova: n_authorized sigmoid heads.
class Discriminator {
public:
    Discriminator() = default;

    DiscriminatorSpec spec;
    double threshold = 0.5;
    std::unique_ptr<nn::Network> features;
    std::vector<std::unique_ptr<nn::Network>> heads;

    std::vector<nn::Tensor*> params() const;
    std::vector<nn::Tensor*> grads() const;

    // Raw per-head outputs for a preprocessed input.
    std::vector<nn::Tensor> forward(const nn::Tensor& input) const;

    void save(const std::string& path) const;
    static Discriminator load(const std::string& path);
};

Discriminator build_discriminator(const DiscriminatorSpec& spec, Rng& rng);

// RawIq -> (256,2) of (I,Q); DftMagnitude -> (128,2) of DFT magnitudes
// (scaled by 1/sqrt(N) to keep activations near unit range).
nn::Tensor preprocess(const IqSignal& signal, Preprocessing mode);

struct AuthDataset {
    std::vector<IqSignal> records;   // 256 symbol-rate samples each
    std::vector<int> labels;         // transmitter index in [0, |T|), or -1 for outliers
};

// n_per_tx packets per authorized transmitter; outlier packet counts chosen so
// positives and negatives stay balanced within 10%.
AuthDataset build_training_set(const std::vector<rf::TransmitterProfile>& authorized,
                               const std::vector<rf::TransmitterProfile>& outliers,
                               const rf::ChannelModel& model, int n_per_tx,
                               const PulseShapeConfig& pulse, Rng& rng);

struct TrainReport {
    double final_loss = 0.0;
    double holdout_accuracy = 0.0;  // authorized-vs-outlier decision accuracy
    long samples_seen = 0;
};

// Minimizes BCE (disc/ova) or cross-entropy (dclass) with Adam at lr 1e-3.
// The last holdout_fraction of a shuffled copy of the dataset is held out.
TrainReport train_authenticator(Discriminator& d, const AuthDataset& dataset, int epochs,
                                int batch, Rng& rng, double holdout_fraction = 0.2);

AuthDecision authenticate(const Discriminator& d, const IqSignal& signal);

double fooling_rate(const Discriminator& d, const std::vector<IqSignal>& signals);

}  // namespace rfauth::auth

#endif
