#ifndef RFAUTH_NN_HPP
#define RFAUTH_NN_HPP

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfauth/rng.hpp"

namespace rfauth::nn {

using json = nlohmann::json;

struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(count(shape)), 0.0);
    }

    static long count(const std::vector<int>& s) {
        long n = 1;
        for (int d : s) n *= d;
        return n;
    }

    std::size_t size() const { return data.size(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }
    void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

// C[m x n] += A[m x k] * B[k x n], all row-major.
void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n);
// C[k x n] += A[m x k]^T * B[m x n]
void matmul_at_b_acc(const double* a, const double* b, double* c, int m, int k, int n);
// C[m x k] += A[m x n] * B[k x n]^T
void matmul_a_bt_acc(const double* a, const double* b, double* c, int m, int n, int k);

// ---- layers ----
//
// Layers own their parameters and gradient buffers. forward() caches the
// activations needed by the next backward() call; networks are single-writer.

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x) = 0;
    virtual Tensor backward(const Tensor& gout) = 0;
    virtual std::vector<Tensor*> params() { return {}; }
    virtual std::vector<Tensor*> grads() { return {}; }
    virtual std::string kind() const = 0;
    virtual json spec() const { return {{"kind", kind()}}; }
    virtual double l2_weight() const { return 0.0; }
    // Adds d/dw of l2 * sum(w^2) for regularized parameter tensors.
    virtual void add_l2_grads() {}
};

class Dense : public Layer {
public:
    Dense(int in, int out, double l2, Rng& rng);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gout) override;
    std::vector<Tensor*> params() override { return {&w_, &b_}; }
    std::vector<Tensor*> grads() override { return {&gw_, &gb_}; }
    std::string kind() const override { return "dense"; }
    json spec() const override;
    double l2_weight() const override { return l2_; }
    void add_l2_grads() override;

    Tensor w_, b_, gw_, gb_;

private:
    int in_, out_;
    double l2_;
    Tensor x_cache_;
};

class Conv1d : public Layer {
public:
    Conv1d(int in_ch, int out_ch, int kernel, int stride, double l2, Rng& rng);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gout) override;
    std::vector<Tensor*> params() override { return {&w_, &b_}; }
    std::vector<Tensor*> grads() override { return {&gw_, &gb_}; }
    std::string kind() const override { return "conv1d"; }
    json spec() const override;
    double l2_weight() const override { return l2_; }
    void add_l2_grads() override;

    Tensor w_, b_, gw_, gb_;  // w: (kernel, in_ch, out_ch)

private:
    int in_ch_, out_ch_, kernel_, stride_;
    double l2_;
    Tensor x_cache_;
};

class Relu : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gout) override;
    std::string kind() const override { return "relu"; }

private:
    Tensor x_cache_;
};

class Sigmoid : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gout) override;
    std::string kind() const override { return "sigmoid"; }

private:
    Tensor y_cache_;
};

class Softmax : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gout) override;
    std::string kind() const override { return "softmax"; }

private:
    Tensor y_cache_;
};

class Flatten : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gout) override;
    std::string kind() const override { return "flatten"; }

private:
    std::vector<int> in_shape_;
};

class GlobalAvgPool : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gout) override;
    std::string kind() const override { return "gap"; }

private:
    std::vector<int> in_shape_;
};

class Network;

class Residual : public Layer {
public:
    // out = block(x) + skip(x); skip is a 1x1 conv when channel counts differ.
    Residual(std::unique_ptr<Network> block, int in_ch, int out_ch, Rng& rng);
    ~Residual() override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gout) override;
    std::vector<Tensor*> params() override;
    std::vector<Tensor*> grads() override;
    std::string kind() const override { return "residual"; }
    json spec() const override;
    void add_l2_grads() override;

    Network& block() { return *block_; }

private:
    std::unique_ptr<Network> block_;
    std::unique_ptr<Conv1d> proj_;  // null when identity skip works
};

class Network {
public:
    Network() = default;
    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

    Tensor forward(const Tensor& x);
    // Reverse pass; returns the input gradient and accumulates parameter
    // gradients. L2 penalty gradients are added once when include_l2 is set.
    Tensor backward(const Tensor& gout, bool include_l2 = true);

    std::vector<Tensor*> params();
    std::vector<Tensor*> grads();
    void zero_grads();
    void add_l2_grads();

    std::size_t layer_count() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }

    json spec() const;

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// Construction helpers.
std::unique_ptr<Layer> make_dense(int in, int out, double l2, Rng& rng);
std::unique_ptr<Layer> make_conv1d(int in_ch, int out_ch, int kernel, int stride, double l2, Rng& rng);
std::unique_ptr<Layer> make_relu();
std::unique_ptr<Layer> make_sigmoid();
std::unique_ptr<Layer> make_softmax();
std::unique_ptr<Layer> make_flatten();
std::unique_ptr<Layer> make_gap();
// conv(k)-relu-conv(k) block with a skip connection.
std::unique_ptr<Layer> make_residual_block(int in_ch, int out_ch, int kernel, Rng& rng);

// ---- recurrent cell ----

// Standard LSTM recurrence (gates i, f, g, o; forget bias initialized to 1).
class LstmCell {
public:
    LstmCell() = default;
    LstmCell(int input_size, int hidden_size, Rng& rng);

    struct StepCache {
        Tensor x, h_prev, c_prev;
        Tensor gates;  // pre-activations (4H)
        Tensor i, f, g, o, c, tanh_c;
    };

    void step(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev, Tensor& h_out,
              Tensor& c_out, StepCache* cache) const;
    // dh/dc are gradients flowing into this step's outputs; returns dx and
    // updates dh_prev/dc_prev in place; accumulates parameter gradients.
    Tensor backward_step(const StepCache& cache, const Tensor& dh, const Tensor& dc,
                         Tensor& dh_prev, Tensor& dc_prev);

    int input_size() const { return input_size_; }
    int hidden_size() const { return hidden_size_; }

    std::vector<Tensor*> params() { return {&wx_, &wh_, &b_}; }
    std::vector<Tensor*> grads() { return {&gwx_, &gwh_, &gb_}; }
    void zero_grads();

    Tensor wx_, wh_, b_;     // (in,4H), (H,4H), (4H)
    Tensor gwx_, gwh_, gb_;

private:
    int input_size_ = 0, hidden_size_ = 0;
};

// ---- losses ----

double bce_loss(double p, int y);
// d bce / d p, with the same clamping as bce_loss.
double bce_grad(double p, int y);
double mse_loss(const Tensor& a, const Tensor& b);

// ---- optimization ----

struct AnnealSchedule {
    double initial_lr = 0.001;
    double decay_factor = 0.5;
    int decay_every = 50;

    double lr(long step) const {
        return initial_lr * std::pow(decay_factor, static_cast<double>(step / decay_every));
    }
};

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-7;
    long step = 0;
    std::vector<Tensor> m, v;
};

// Bias-corrected Adam update; lr taken from the schedule at the pre-update step.
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads,
               AdamState& state, const AnnealSchedule& schedule);

// ---- checkpoints ----
// RFNN: "RFNN", u16 version=1, u32 spec-table length + JSON bytes, then
// float32 parameter blobs in declaration order.

void save_checkpoint(const std::string& path, const json& spec,
                     const std::vector<Tensor*>& params);
json load_checkpoint(const std::string& path, const std::vector<Tensor*>& params);
// Reads only the spec table (used to size networks before loading blobs).
json peek_checkpoint_spec(const std::string& path);

// Rebuild a network from its spec() json (parameters uninitialized).
std::unique_ptr<Network> network_from_spec(const json& spec, Rng& rng);

}  // namespace rfauth::nn

#endif
