#include "rfauth/auth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rfauth::auth {

using nn::Tensor;

namespace {

const char* variant_name(DiscVariant v) {
    switch (v) {
        case DiscVariant::Disc: return "disc";
        case DiscVariant::Dclass: return "dclass";
        default: return "ova";
    }
}

DiscVariant variant_from_name(const std::string& s) {
    if (s == "disc") return DiscVariant::Disc;
    if (s == "dclass") return DiscVariant::Dclass;
    if (s == "ova") return DiscVariant::Ova;
    throw std::runtime_error("unknown discriminator variant: " + s);
}

std::unique_ptr<nn::Network> build_features(const DiscriminatorSpec& spec, Rng& rng) {
    auto net = std::make_unique<nn::Network>();
    int ch = 2;
    net->add(nn::make_conv1d(ch, spec.feature_filters.front(), spec.kernel, 1, 0.0, rng));
    net->add(nn::make_relu());
    ch = spec.feature_filters.front();
    for (int filters : spec.feature_filters) {
        net->add(nn::make_residual_block(ch, filters, spec.kernel, rng));
        net->add(nn::make_relu());
        ch = filters;
    }
    net->add(nn::make_gap());
    return net;
}

std::unique_ptr<nn::Network> build_binary_head(const DiscriminatorSpec& spec, Rng& rng) {
    auto head = std::make_unique<nn::Network>();
    int in = spec.feature_filters.back();
    for (int hidden : spec.classifier_hidden) {
        head->add(nn::make_dense(in, hidden, spec.l2_weight, rng));
        head->add(nn::make_relu());
        in = hidden;
    }
    head->add(nn::make_dense(in, 1, spec.l2_weight, rng));
    head->add(nn::make_sigmoid());
    return head;
}

std::unique_ptr<nn::Network> build_multiclass_head(const DiscriminatorSpec& spec, Rng& rng) {
    auto head = std::make_unique<nn::Network>();
    int in = spec.feature_filters.back();
    for (int hidden : spec.classifier_hidden) {
        head->add(nn::make_dense(in, hidden, spec.l2_weight, rng));
        head->add(nn::make_relu());
        in = hidden;
    }
    head->add(nn::make_dense(in, spec.n_authorized + 1, spec.l2_weight, rng));
    head->add(nn::make_softmax());
    return head;
}

}  // namespace

Discriminator build_discriminator(const DiscriminatorSpec& spec, Rng& rng) {
    if (spec.feature_filters.empty())
        throw std::invalid_argument("build_discriminator: feature_filters must be non-empty");
    if (spec.n_authorized < 1)
        throw std::invalid_argument("build_discriminator: n_authorized must be >= 1");

    Discriminator d;
    d.spec = spec;
    d.features = build_features(spec, rng);
    switch (spec.variant) {
        case DiscVariant::Disc:
            d.heads.push_back(build_binary_head(spec, rng));
            break;
        case DiscVariant::Dclass:
            d.heads.push_back(build_multiclass_head(spec, rng));
            break;
        case DiscVariant::Ova:
            for (int i = 0; i < spec.n_authorized; ++i) d.heads.push_back(build_binary_head(spec, rng));
            break;
    }
    return d;
}

std::vector<Tensor*> Discriminator::params() const {
    auto out = features->params();
    for (const auto& h : heads) {
        auto p = h->params();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

std::vector<Tensor*> Discriminator::grads() const {
    auto out = features->grads();
    for (const auto& h : heads) {
        auto g = h->grads();
        out.insert(out.end(), g.begin(), g.end());
    }
    return out;
}

std::vector<Tensor> Discriminator::forward(const Tensor& input) const {
    const Tensor feat = features->forward(input);
    std::vector<Tensor> outs;
    outs.reserve(heads.size());
    for (const auto& h : heads) outs.push_back(h->forward(feat));
    return outs;
}

Tensor preprocess(const IqSignal& signal, Preprocessing mode) {
    if (signal.size() != 256) throw std::invalid_argument("preprocess: signal must have 256 samples");
    if (mode == Preprocessing::RawIq) {
        Tensor t({256, 2});
        for (int k = 0; k < 256; ++k) {
            t[static_cast<std::size_t>(2 * k)] = signal.samples[static_cast<std::size_t>(k)].real();
            t[static_cast<std::size_t>(2 * k + 1)] = signal.samples[static_cast<std::size_t>(k)].imag();
        }
        return t;
    }
    const auto feat = dft_magnitude_features(signal);
    Tensor t({128, 2});
    const double scale = 1.0 / std::sqrt(256.0);
    for (std::size_t i = 0; i < feat.size(); ++i) t[i] = feat[i] * scale;
    return t;
}

AuthDataset build_training_set(const std::vector<rf::TransmitterProfile>& authorized,
                               const std::vector<rf::TransmitterProfile>& outliers,
                               const rf::ChannelModel& model, int n_per_tx,
                               const PulseShapeConfig& pulse, Rng& rng) {
    if (authorized.empty() || outliers.empty())
        throw std::invalid_argument("build_training_set: both profile sets must be non-empty");
    if (n_per_tx < 1) throw std::invalid_argument("build_training_set: n_per_tx must be >= 1");
    for (const auto& a : authorized)
        for (const auto& o : outliers)
            if (a.psi0 == o.psi0 && a.psi1 == o.psi1)
                throw std::invalid_argument("build_training_set: authorized/outlier profile overlap");

    const long n_pos = static_cast<long>(authorized.size()) * n_per_tx;
    const int n_per_outlier = static_cast<int>(
        (n_pos + static_cast<long>(outliers.size()) - 1) / static_cast<long>(outliers.size()));

    AuthDataset ds;
    auto emit = [&](const rf::TransmitterProfile& p, int label, int count) {
        for (int i = 0; i < count; ++i) {
            const auto bits = generate_random_bits(512, rng);
            const auto sym = qpsk_modulate(bits);
            ds.records.push_back(rf::transmit(sym, p, model, pulse, rng));
            ds.labels.push_back(label);
        }
    };
    for (std::size_t t = 0; t < authorized.size(); ++t)
        emit(authorized[t], static_cast<int>(t), n_per_tx);
    for (const auto& o : outliers) emit(o, -1, n_per_outlier);
    return ds;
}

namespace {

// One backward pass through the classifier heads for a single cached feature
// vector; returns the per-sample loss. grad_scale folds in the 1/batch factor.
double train_sample(Discriminator& d, const Tensor& feat, int label, double grad_scale) {
    double loss = 0.0;
    if (d.spec.variant == DiscVariant::Disc) {
        const Tensor out = d.heads[0]->forward(feat);
        const int y = label >= 0 ? 1 : 0;
        loss = nn::bce_loss(out[0], y);
        Tensor g({1});
        g[0] = nn::bce_grad(out[0], y) * grad_scale;
        d.heads[0]->backward(g, false);
    } else if (d.spec.variant == DiscVariant::Dclass) {
        const Tensor out = d.heads[0]->forward(feat);
        const int cls = label >= 0 ? label : d.spec.n_authorized;
        const double p = std::max(1e-12, out[static_cast<std::size_t>(cls)]);
        loss = -std::log(p);
        Tensor g(out.shape);
        g[static_cast<std::size_t>(cls)] = -grad_scale / p;
        d.heads[0]->backward(g, false);
    } else {
        for (std::size_t i = 0; i < d.heads.size(); ++i) {
            const Tensor out = d.heads[i]->forward(feat);
            const int y = (label == static_cast<int>(i)) ? 1 : 0;
            loss += nn::bce_loss(out[0], y);
            Tensor g({1});
            g[0] = nn::bce_grad(out[0], y) * grad_scale;
            d.heads[i]->backward(g, false);
        }
    }
    return loss;
}

// Score from head outputs alone (mirrors authenticate's per-variant rule).
double score_from_heads(const Discriminator& d, const Tensor& feat) {
    if (d.spec.variant == DiscVariant::Disc) return d.heads[0]->forward(feat)[0];
    if (d.spec.variant == DiscVariant::Dclass)
        return 1.0 - d.heads[0]->forward(feat)[static_cast<std::size_t>(d.spec.n_authorized)];
    double best = 0.0;
    for (const auto& h : d.heads) best = std::max(best, h->forward(feat)[0]);
    return best;
}

double balanced_accuracy(const Discriminator& d, const std::vector<Tensor>& feats,
                         const std::vector<int>& labels, double threshold) {
    double tp = 0, np = 0, tn = 0, nn2 = 0;
    for (std::size_t i = 0; i < feats.size(); ++i) {
        const bool accept = score_from_heads(d, feats[i]) > threshold;
        if (labels[i] >= 0) {
            np += 1;
            tp += accept;
        } else {
            nn2 += 1;
            tn += !accept;
        }
    }
    if (np == 0 || nn2 == 0) return 0.0;
    return 0.5 * (tp / np + tn / nn2);
}

// Pooled features have large shared means and tiny per-record spread, which
// makes the head's weight dynamics too stiff for Adam: with all-positive
// inputs the per-unit weight gradients are sign-coherent, so a few steps shift
// every pre-activation far enough to kill the relu layer. Training instead on
// standardized copies of the cached features fixes the dynamics; the affine
// transform is folded into the first dense layer of each head afterwards, so
// the saved model still consumes raw pooled features.
struct FeatureStats {
    std::vector<double> mu, sigma;
    bool active = false;
};

FeatureStats standardize_features(std::vector<Tensor>& feats) {
    const std::size_t dim = feats[0].size();
    const double n = static_cast<double>(feats.size());
    FeatureStats st;
    st.mu.assign(dim, 0.0);
    st.sigma.assign(dim, 0.0);
    for (const auto& f : feats)
        for (std::size_t j = 0; j < dim; ++j) st.mu[j] += f[j];
    for (auto& v : st.mu) v /= n;
    for (const auto& f : feats)
        for (std::size_t j = 0; j < dim; ++j)
            st.sigma[j] += (f[j] - st.mu[j]) * (f[j] - st.mu[j]);
    double mean_sigma = 0.0;
    for (auto& v : st.sigma) {
        v = std::sqrt(v / n);
        mean_sigma += v;
    }
    mean_sigma /= static_cast<double>(dim);
    if (!(mean_sigma > 1e-15)) return st;  // degenerate dataset: leave untouched

    // Floor protects dead pooled channels; informative low-noise coordinates
    // (well above the floor) keep their full whitening gain.
    for (auto& v : st.sigma) v = std::max(v, 1e-3 * mean_sigma);
    for (auto& f : feats)
        for (std::size_t j = 0; j < dim; ++j) f[j] = (f[j] - st.mu[j]) / st.sigma[j];
    st.active = true;
    return st;
}

void fold_standardization(Discriminator& d, const FeatureStats& st) {
    if (!st.active) return;
    const std::size_t dim = st.mu.size();
    for (auto& h : d.heads) {
        auto p = h->layer(0).params();  // dense: w (in,out), b (out)
        Tensor& w = *p[0];
        Tensor& b = *p[1];
        const std::size_t out = b.size();
        for (std::size_t o = 0; o < out; ++o) {
            double dot = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                double& wv = w[j * out + o];
                wv /= st.sigma[j];
                dot += wv * st.mu[j];
            }
            b[o] -= dot;
        }
    }
}

// Picks the score threshold maximizing balanced accuracy on the training
// features, then folds it into the decision layer(s) so the fixed 0.5
// threshold sits at that boundary.
void calibrate_decision_bias(Discriminator& d, const std::vector<Tensor>& feats,
                             const std::vector<int>& labels) {
    std::vector<std::pair<double, int>> scored;
    scored.reserve(feats.size());
    double np = 0, nn2 = 0;
    for (std::size_t i = 0; i < feats.size(); ++i) {
        scored.push_back({score_from_heads(d, feats[i]), labels[i] >= 0 ? 1 : 0});
        (labels[i] >= 0 ? np : nn2) += 1;
    }
    if (np == 0 || nn2 == 0) return;
    std::sort(scored.begin(), scored.end());
    double best = -1.0, tstar = 0.5;
    double tp = np, tn = 0;
    for (std::size_t i = 0; i + 1 < scored.size(); ++i) {
        if (scored[i].second) tp -= 1; else tn += 1;
        const double bal = 0.5 * (tp / np + tn / nn2);
        if (bal > best) {
            best = bal;
            tstar = 0.5 * (scored[i].first + scored[i + 1].first);
        }
    }
    tstar = std::min(1.0 - 1e-9, std::max(1e-9, tstar));

    if (d.spec.variant == DiscVariant::Disc) {
        // score = sigmoid(logit): shift the final bias by -logit(t*).
        auto& head = *d.heads[0];
        head.layer(head.layer_count() - 2).params()[1]->data[0] -=
            std::log(tstar / (1.0 - tstar));
        return;
    }
    if (d.spec.variant == DiscVariant::Ova) {
        // Max-head rule: shift every head's final bias by the same amount.
        const double shift = -std::log(tstar / (1.0 - tstar));
        for (auto& h : d.heads)
            h->layer(h->layer_count() - 2).params()[1]->data[0] += shift;
        return;
    }
    // dclass: the score is 1 - softmax outlier probability; a uniform shift of
    // the outlier logit moves it monotonically. Grid-search that shift.
    auto& head = *d.heads[0];
    double& outlier_bias =
        head.layer(head.layer_count() - 2).params()[1]->data[static_cast<std::size_t>(d.spec.n_authorized)];
    double best_bal = -1.0, best_delta = 0.0;
    for (int k = -40; k <= 40; ++k) {
        const double delta = 0.1 * k;
        outlier_bias += delta;
        const double bal = balanced_accuracy(d, feats, labels, 0.5);
        outlier_bias -= delta;
        if (bal > best_bal) {
            best_bal = bal;
            best_delta = delta;
        }
    }
    outlier_bias += best_delta;
}

}  // namespace

TrainReport train_authenticator(Discriminator& d, const AuthDataset& dataset, int epochs,
                                int batch, Rng& rng, double holdout_fraction) {
    if (dataset.records.empty() || dataset.records.size() != dataset.labels.size())
        throw std::invalid_argument("train_authenticator: bad dataset");
    if (batch < 1) throw std::invalid_argument("train_authenticator: batch must be >= 1");

    // Deterministic shuffle, then hold out the tail.
    std::vector<std::size_t> order(dataset.records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_int(i)]);
    const std::size_t n_train =
        order.size() - static_cast<std::size_t>(holdout_fraction * static_cast<double>(order.size()));

    TrainReport report;
    double epoch_loss = 0.0;
    if (epochs > 0 && n_train > 0) {
        // The feature extractor stays at its random init; only the classifier
        // heads are trained, on standardized copies of cached pooled features.
        std::vector<Tensor> feats(n_train);
        std::vector<int> labels(n_train);
        for (std::size_t i = 0; i < n_train; ++i) {
            feats[i] = d.features->forward(
                preprocess(dataset.records[order[i]], d.spec.preprocessing));
            labels[i] = dataset.labels[order[i]];
        }
        const FeatureStats stats = standardize_features(feats);

        std::vector<Tensor*> params, grads;
        for (auto& h : d.heads) {
            auto p = h->params();
            auto g = h->grads();
            params.insert(params.end(), p.begin(), p.end());
            grads.insert(grads.end(), g.begin(), g.end());
        }
        nn::AdamState adam;
        const int steps_per_epoch = static_cast<int>((n_train + static_cast<std::size_t>(batch) - 1) /
                                                     static_cast<std::size_t>(batch));
        nn::AnnealSchedule schedule{0.001, 0.5, std::max(1, steps_per_epoch * epochs / 3)};

        std::vector<std::size_t> idx(n_train);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (int epoch = 0; epoch < epochs; ++epoch) {
            for (std::size_t i = idx.size(); i > 1; --i)
                std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
            epoch_loss = 0.0;
            std::size_t pos = 0;
            while (pos < n_train) {
                const std::size_t take =
                    std::min<std::size_t>(static_cast<std::size_t>(batch), n_train - pos);
                for (auto* g : grads) g->zero();
                for (std::size_t b = 0; b < take; ++b) {
                    epoch_loss += train_sample(d, feats[idx[pos + b]], labels[idx[pos + b]],
                                               1.0 / static_cast<double>(take));
                    ++report.samples_seen;
                }
                for (auto& h : d.heads) h->add_l2_grads();
                nn::adam_step(params, grads, adam, schedule);
                pos += take;
            }
            if (!std::isfinite(epoch_loss))
                throw std::runtime_error("train_authenticator: training diverged (non-finite loss)");
        }
        // Calibrate on the standardized features (identical scores to the
        // folded model on raw features), then fold the standardization into
        // each head's first dense layer so inference consumes raw features.
        calibrate_decision_bias(d, feats, labels);
        fold_standardization(d, stats);
    }
    report.final_loss = n_train ? epoch_loss / static_cast<double>(n_train) : 0.0;

    // Held-out authorized-vs-outlier accuracy.
    std::size_t correct = 0, total = 0;
    for (std::size_t i = n_train; i < order.size(); ++i) {
        const std::size_t idx = order[i];
        const auto decision = authenticate(d, dataset.records[idx]);
        const bool want_accept = dataset.labels[idx] >= 0;
        if (decision.accept == want_accept) ++correct;
        ++total;
    }
    report.holdout_accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    return report;
}

AuthDecision authenticate(const Discriminator& d, const IqSignal& signal) {
    const Tensor input = preprocess(signal, d.spec.preprocessing);
    const auto outs = d.forward(input);
    AuthDecision decision;
    switch (d.spec.variant) {
        case DiscVariant::Disc:
            decision.score = outs[0][0];
            break;
        case DiscVariant::Dclass:
            decision.score = 1.0 - outs[0][static_cast<std::size_t>(d.spec.n_authorized)];
            break;
        case DiscVariant::Ova: {
            double best = 0.0;
            for (const auto& o : outs) best = std::max(best, o[0]);
            decision.score = best;
            break;
        }
    }
    decision.accept = decision.score > d.threshold;
    return decision;
}

double fooling_rate(const Discriminator& d, const std::vector<IqSignal>& signals) {
    if (signals.empty()) throw std::invalid_argument("fooling_rate: empty signal list");
    std::size_t accepted = 0;
    for (const auto& s : signals)
        if (authenticate(d, s).accept) ++accepted;
    return static_cast<double>(accepted) / static_cast<double>(signals.size());
}

void Discriminator::save(const std::string& path) const {
    nn::json spec_json = {
        {"variant", variant_name(spec.variant)},
        {"preprocessing", spec.preprocessing == Preprocessing::RawIq ? "raw_iq" : "dft_magnitude"},
        {"feature_filters", spec.feature_filters},
        {"classifier_hidden", spec.classifier_hidden},
        {"kernel", spec.kernel},
        {"l2_weight", spec.l2_weight},
        {"n_authorized", spec.n_authorized},
        {"threshold", threshold},
        {"features", features->spec()},
    };
    nn::json head_specs = nn::json::array();
    for (const auto& h : heads) head_specs.push_back(h->spec());
    spec_json["heads"] = head_specs;
    nn::save_checkpoint(path, spec_json, params());
}

Discriminator Discriminator::load(const std::string& path) {
    Discriminator d;
    // Two passes: size the networks from the spec table, then fill parameters.
    const nn::json spec_json = nn::peek_checkpoint_spec(path);
    d.spec.variant = variant_from_name(spec_json.at("variant"));
    d.spec.preprocessing = spec_json.at("preprocessing") == "raw_iq" ? Preprocessing::RawIq
                                                                     : Preprocessing::DftMagnitude;
    d.spec.feature_filters = spec_json.at("feature_filters").get<std::vector<int>>();
    d.spec.classifier_hidden = spec_json.at("classifier_hidden").get<std::vector<int>>();
    d.spec.kernel = spec_json.at("kernel");
    d.spec.l2_weight = spec_json.at("l2_weight");
    d.spec.n_authorized = spec_json.at("n_authorized");
    d.threshold = spec_json.at("threshold");

    Rng init_rng(0);
    d.features = nn::network_from_spec(spec_json.at("features"), init_rng);
    for (const auto& hs : spec_json.at("heads")) d.heads.push_back(nn::network_from_spec(hs, init_rng));
    nn::load_checkpoint(path, d.params());
    return d;
}

}  // namespace rfauth::auth
