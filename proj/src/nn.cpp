#include "rfauth/nn.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace rfauth::nn {

void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        double* ci = c + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_at_b_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        const double* bi = b + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            double* cp = c + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) cp[j] += av * bi[j];
        }
    }
}

void matmul_a_bt_acc(const double* a, const double* b, double* c, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * n;
        double* ci = c + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double* bp = b + static_cast<std::size_t>(p) * n;
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += ai[j] * bp[j];
            ci[p] += acc;
        }
    }
}

namespace {

void init_uniform(Tensor& t, double bound, Rng& rng) {
    for (auto& v : t.data) v = rng.uniform(-bound, bound);
}

void check_shape(const Tensor& x, const std::vector<int>& want, const char* where) {
    if (x.shape != want) throw std::invalid_argument(std::string(where) + ": shape mismatch");
}

}  // namespace

// ---- Dense ----

Dense::Dense(int in, int out, double l2, Rng& rng)
    : w_(Tensor({in, out})), b_(Tensor({out})), gw_(Tensor({in, out})), gb_(Tensor({out})),
      in_(in), out_(out), l2_(l2) {
    init_uniform(w_, std::sqrt(3.0 / in), rng);
}

Tensor Dense::forward(const Tensor& x) {
    check_shape(x, {in_}, "dense");
    x_cache_ = x;
    Tensor y({out_});
    y.data = b_.data;
    matmul_acc(x.data.data(), w_.data.data(), y.data.data(), 1, in_, out_);
    return y;
}

Tensor Dense::backward(const Tensor& gout) {
    check_shape(gout, {out_}, "dense backward");
    matmul_at_b_acc(x_cache_.data.data(), gout.data.data(), gw_.data.data(), 1, in_, out_);
    for (int o = 0; o < out_; ++o) gb_[static_cast<std::size_t>(o)] += gout[static_cast<std::size_t>(o)];
    Tensor gin({in_});
    matmul_a_bt_acc(gout.data.data(), w_.data.data(), gin.data.data(), 1, out_, in_);
    return gin;
}

void Dense::add_l2_grads() {
    if (l2_ == 0.0) return;
    for (std::size_t i = 0; i < w_.size(); ++i) gw_[i] += 2.0 * l2_ * w_[i];
}

json Dense::spec() const {
    return {{"kind", "dense"}, {"in", in_}, {"out", out_}, {"l2", l2_}};
}

// ---- Conv1d ----

Conv1d::Conv1d(int in_ch, int out_ch, int kernel, int stride, double l2, Rng& rng)
    : w_(Tensor({kernel, in_ch, out_ch})), b_(Tensor({out_ch})),
      gw_(Tensor({kernel, in_ch, out_ch})), gb_(Tensor({out_ch})),
      in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), l2_(l2) {
    if (kernel < 1 || stride < 1) throw std::invalid_argument("conv1d: bad kernel/stride");
    init_uniform(w_, std::sqrt(3.0 / (kernel * in_ch)), rng);
}

Tensor Conv1d::forward(const Tensor& x) {
    if (x.shape.size() != 2 || x.shape[1] != in_ch_)
        throw std::invalid_argument("conv1d: expected (T, in_ch) input");
    x_cache_ = x;
    const int t_in = x.shape[0];
    const int pad = (kernel_ - 1) / 2;
    const int t_out = (t_in + 2 * pad - kernel_) / stride_ + 1;
    Tensor y({t_out, out_ch_});
    for (int to = 0; to < t_out; ++to)
        std::memcpy(&y.data[static_cast<std::size_t>(to) * out_ch_], b_.data.data(),
                    sizeof(double) * static_cast<std::size_t>(out_ch_));
    if (stride_ == 1) {
        for (int dk = 0; dk < kernel_; ++dk) {
            const int to0 = std::max(0, pad - dk);
            const int to1 = std::min(t_out, t_in + pad - dk);
            if (to1 <= to0) continue;
            matmul_acc(&x.data[static_cast<std::size_t>(to0 + dk - pad) * in_ch_],
                       &w_.data[static_cast<std::size_t>(dk) * in_ch_ * out_ch_],
                       &y.data[static_cast<std::size_t>(to0) * out_ch_], to1 - to0, in_ch_, out_ch_);
        }
    } else {
        for (int to = 0; to < t_out; ++to) {
            for (int dk = 0; dk < kernel_; ++dk) {
                const int ti = to * stride_ + dk - pad;
                if (ti < 0 || ti >= t_in) continue;
                matmul_acc(&x.data[static_cast<std::size_t>(ti) * in_ch_],
                           &w_.data[static_cast<std::size_t>(dk) * in_ch_ * out_ch_],
                           &y.data[static_cast<std::size_t>(to) * out_ch_], 1, in_ch_, out_ch_);
            }
        }
    }
    return y;
}

Tensor Conv1d::backward(const Tensor& gout) {
    const int t_in = x_cache_.shape[0];
    const int pad = (kernel_ - 1) / 2;
    const int t_out = gout.shape[0];
    if (gout.shape.size() != 2 || gout.shape[1] != out_ch_)
        throw std::invalid_argument("conv1d backward: shape mismatch");
    Tensor gin({t_in, in_ch_});
    for (int to = 0; to < t_out; ++to)
        for (int oc = 0; oc < out_ch_; ++oc)
            gb_[static_cast<std::size_t>(oc)] += gout[static_cast<std::size_t>(to) * out_ch_ + oc];
    if (stride_ == 1) {
        for (int dk = 0; dk < kernel_; ++dk) {
            const int to0 = std::max(0, pad - dk);
            const int to1 = std::min(t_out, t_in + pad - dk);
            if (to1 <= to0) continue;
            const int rows = to1 - to0;
            const std::size_t x_off = static_cast<std::size_t>(to0 + dk - pad) * in_ch_;
            matmul_at_b_acc(&x_cache_.data[x_off], &gout.data[static_cast<std::size_t>(to0) * out_ch_],
                            &gw_.data[static_cast<std::size_t>(dk) * in_ch_ * out_ch_], rows, in_ch_,
                            out_ch_);
            matmul_a_bt_acc(&gout.data[static_cast<std::size_t>(to0) * out_ch_],
                            &w_.data[static_cast<std::size_t>(dk) * in_ch_ * out_ch_], &gin.data[x_off],
                            rows, out_ch_, in_ch_);
        }
    } else {
        for (int to = 0; to < t_out; ++to) {
            for (int dk = 0; dk < kernel_; ++dk) {
                const int ti = to * stride_ + dk - pad;
                if (ti < 0 || ti >= t_in) continue;
                matmul_at_b_acc(&x_cache_.data[static_cast<std::size_t>(ti) * in_ch_],
                                &gout.data[static_cast<std::size_t>(to) * out_ch_],
                                &gw_.data[static_cast<std::size_t>(dk) * in_ch_ * out_ch_], 1, in_ch_,
                                out_ch_);
                matmul_a_bt_acc(&gout.data[static_cast<std::size_t>(to) * out_ch_],
                                &w_.data[static_cast<std::size_t>(dk) * in_ch_ * out_ch_],
                                &gin.data[static_cast<std::size_t>(ti) * in_ch_], 1, out_ch_, in_ch_);
            }
        }
    }
    return gin;
}

void Conv1d::add_l2_grads() {
    if (l2_ == 0.0) return;
    for (std::size_t i = 0; i < w_.size(); ++i) gw_[i] += 2.0 * l2_ * w_[i];
}

json Conv1d::spec() const {
    return {{"kind", "conv1d"}, {"in_ch", in_ch_}, {"out_ch", out_ch_},
            {"kernel", kernel_}, {"stride", stride_}, {"l2", l2_}};
}

// ---- element-wise layers ----

Tensor Relu::forward(const Tensor& x) {
    x_cache_ = x;
    Tensor y = x;
    for (auto& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor Relu::backward(const Tensor& gout) {
    Tensor gin = gout;
    for (std::size_t i = 0; i < gin.size(); ++i)
        if (x_cache_[i] <= 0.0) gin[i] = 0.0;
    return gin;
}

Tensor Sigmoid::forward(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data) v = 1.0 / (1.0 + std::exp(-v));
    y_cache_ = y;
    return y;
}

Tensor Sigmoid::backward(const Tensor& gout) {
    Tensor gin = gout;
    for (std::size_t i = 0; i < gin.size(); ++i) gin[i] *= y_cache_[i] * (1.0 - y_cache_[i]);
    return gin;
}

Tensor Softmax::forward(const Tensor& x) {
    Tensor y = x;
    double mx = y.data[0];
    for (double v : y.data) mx = std::max(mx, v);
    double sum = 0.0;
    for (auto& v : y.data) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (auto& v : y.data) v /= sum;
    y_cache_ = y;
    return y;
}

Tensor Softmax::backward(const Tensor& gout) {
    double dot = 0.0;
    for (std::size_t i = 0; i < gout.size(); ++i) dot += gout[i] * y_cache_[i];
    Tensor gin = gout;
    for (std::size_t i = 0; i < gin.size(); ++i) gin[i] = y_cache_[i] * (gout[i] - dot);
    return gin;
}

Tensor Flatten::forward(const Tensor& x) {
    in_shape_ = x.shape;
    Tensor y = x;
    y.shape = {static_cast<int>(x.size())};
    return y;
}

Tensor Flatten::backward(const Tensor& gout) {
    Tensor gin = gout;
    gin.shape = in_shape_;
    return gin;
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
    if (x.shape.size() != 2) throw std::invalid_argument("gap: expected (T, C) input");
    in_shape_ = x.shape;
    const int t = x.shape[0], c = x.shape[1];
    Tensor y({c});
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < c; ++j) y[static_cast<std::size_t>(j)] += x[static_cast<std::size_t>(i) * c + j];
    for (auto& v : y.data) v /= t;
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& gout) {
    const int t = in_shape_[0], c = in_shape_[1];
    Tensor gin({t, c});
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < c; ++j)
            gin[static_cast<std::size_t>(i) * c + j] = gout[static_cast<std::size_t>(j)] / t;
    return gin;
}

// ---- Residual ----

Residual::Residual(std::unique_ptr<Network> block, int in_ch, int out_ch, Rng& rng)
    : block_(std::move(block)) {
    if (in_ch != out_ch) proj_ = std::make_unique<Conv1d>(in_ch, out_ch, 1, 1, 0.0, rng);
}

Residual::~Residual() = default;

Tensor Residual::forward(const Tensor& x) {
    Tensor main = block_->forward(x);
    Tensor skip = proj_ ? proj_->forward(x) : x;
    if (main.shape != skip.shape) throw std::invalid_argument("residual: branch shape mismatch");
    for (std::size_t i = 0; i < main.size(); ++i) main[i] += skip[i];
    return main;
}

Tensor Residual::backward(const Tensor& gout) {
    Tensor gin = block_->backward(gout, false);
    if (proj_) {
        Tensor gskip = proj_->backward(gout);
        for (std::size_t i = 0; i < gin.size(); ++i) gin[i] += gskip[i];
    } else {
        for (std::size_t i = 0; i < gin.size(); ++i) gin[i] += gout[i];
    }
    return gin;
}

std::vector<Tensor*> Residual::params() {
    auto out = block_->params();
    if (proj_) {
        auto pp = proj_->params();
        out.insert(out.end(), pp.begin(), pp.end());
    }
    return out;
}

std::vector<Tensor*> Residual::grads() {
    auto out = block_->grads();
    if (proj_) {
        auto pg = proj_->grads();
        out.insert(out.end(), pg.begin(), pg.end());
    }
    return out;
}

void Residual::add_l2_grads() {
    block_->add_l2_grads();
    if (proj_) proj_->add_l2_grads();
}

json Residual::spec() const {
    return {{"kind", "residual"}, {"block", block_->spec()}, {"projected", proj_ != nullptr},
            {"proj", proj_ ? proj_->spec() : json{}}};
}

// ---- Network ----

Tensor Network::forward(const Tensor& x) {
    Tensor cur = x;
    for (auto& layer : layers_) cur = layer->forward(cur);
    return cur;
}

Tensor Network::backward(const Tensor& gout, bool include_l2) {
    Tensor cur = gout;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
    if (include_l2) add_l2_grads();
    return cur;
}

std::vector<Tensor*> Network::params() {
    std::vector<Tensor*> out;
    for (auto& layer : layers_) {
        auto p = layer->params();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

std::vector<Tensor*> Network::grads() {
    std::vector<Tensor*> out;
    for (auto& layer : layers_) {
        auto g = layer->grads();
        out.insert(out.end(), g.begin(), g.end());
    }
    return out;
}

void Network::zero_grads() {
    for (auto* g : grads()) g->zero();
}

void Network::add_l2_grads() {
    for (auto& layer : layers_) layer->add_l2_grads();
}

json Network::spec() const {
    json layers = json::array();
    for (const auto& layer : layers_) layers.push_back(layer->spec());
    return layers;
}

// ---- construction helpers ----

std::unique_ptr<Layer> make_dense(int in, int out, double l2, Rng& rng) {
    return std::make_unique<Dense>(in, out, l2, rng);
}
std::unique_ptr<Layer> make_conv1d(int in_ch, int out_ch, int kernel, int stride, double l2, Rng& rng) {
    return std::make_unique<Conv1d>(in_ch, out_ch, kernel, stride, l2, rng);
}
std::unique_ptr<Layer> make_relu() { return std::make_unique<Relu>(); }
std::unique_ptr<Layer> make_sigmoid() { return std::make_unique<Sigmoid>(); }
std::unique_ptr<Layer> make_softmax() { return std::make_unique<Softmax>(); }
std::unique_ptr<Layer> make_flatten() { return std::make_unique<Flatten>(); }
std::unique_ptr<Layer> make_gap() { return std::make_unique<GlobalAvgPool>(); }

std::unique_ptr<Layer> make_residual_block(int in_ch, int out_ch, int kernel, Rng& rng) {
    auto block = std::make_unique<Network>();
    block->add(make_conv1d(in_ch, out_ch, kernel, 1, 0.0, rng));
    block->add(make_relu());
    block->add(make_conv1d(out_ch, out_ch, kernel, 1, 0.0, rng));
    return std::make_unique<Residual>(std::move(block), in_ch, out_ch, rng);
}

// ---- LSTM cell ----

LstmCell::LstmCell(int input_size, int hidden_size, Rng& rng)
    : wx_(Tensor({input_size, 4 * hidden_size})), wh_(Tensor({hidden_size, 4 * hidden_size})),
      b_(Tensor({4 * hidden_size})), gwx_(Tensor({input_size, 4 * hidden_size})),
      gwh_(Tensor({hidden_size, 4 * hidden_size})), gb_(Tensor({4 * hidden_size})),
      input_size_(input_size), hidden_size_(hidden_size) {
    init_uniform(wx_, std::sqrt(3.0 / input_size), rng);
    init_uniform(wh_, std::sqrt(1.0 / hidden_size), rng);
    // Forget-gate bias starts at 1.
    for (int i = hidden_size; i < 2 * hidden_size; ++i) b_[static_cast<std::size_t>(i)] = 1.0;
}

void LstmCell::step(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev, Tensor& h_out,
                    Tensor& c_out, StepCache* cache) const {
    const int h = hidden_size_;
    if (static_cast<int>(x.size()) != input_size_ || static_cast<int>(h_prev.size()) != h ||
        static_cast<int>(c_prev.size()) != h)
        throw std::invalid_argument("lstm step: shape mismatch");

    Tensor gates({4 * h});
    gates.data = b_.data;
    matmul_acc(x.data.data(), wx_.data.data(), gates.data.data(), 1, input_size_, 4 * h);
    matmul_acc(h_prev.data.data(), wh_.data.data(), gates.data.data(), 1, h, 4 * h);

    Tensor ig({h}), fg({h}), gg({h}), og({h}), c({h}), tc({h});
    for (int j = 0; j < h; ++j) {
        const std::size_t u = static_cast<std::size_t>(j);
        ig[u] = 1.0 / (1.0 + std::exp(-gates[u]));
        fg[u] = 1.0 / (1.0 + std::exp(-gates[static_cast<std::size_t>(h) + u]));
        gg[u] = std::tanh(gates[static_cast<std::size_t>(2 * h) + u]);
        og[u] = 1.0 / (1.0 + std::exp(-gates[static_cast<std::size_t>(3 * h) + u]));
        c[u] = fg[u] * c_prev[u] + ig[u] * gg[u];
        tc[u] = std::tanh(c[u]);
    }
    h_out = Tensor({h});
    c_out = c;
    for (int j = 0; j < h; ++j) h_out[static_cast<std::size_t>(j)] = og[static_cast<std::size_t>(j)] * tc[static_cast<std::size_t>(j)];

    if (cache) {
        cache->x = x;
        cache->h_prev = h_prev;
        cache->c_prev = c_prev;
        cache->gates = gates;
        cache->i = ig;
        cache->f = fg;
        cache->g = gg;
        cache->o = og;
        cache->c = c;
        cache->tanh_c = tc;
    }
}

Tensor LstmCell::backward_step(const StepCache& cache, const Tensor& dh, const Tensor& dc,
                               Tensor& dh_prev, Tensor& dc_prev) {
    const int h = hidden_size_;
    Tensor dgates({4 * h});
    dc_prev = Tensor({h});
    for (int j = 0; j < h; ++j) {
        const std::size_t u = static_cast<std::size_t>(j);
        const double d_o = dh[u] * cache.tanh_c[u];
        const double dct = dc[u] + dh[u] * cache.o[u] * (1.0 - cache.tanh_c[u] * cache.tanh_c[u]);
        const double d_f = dct * cache.c_prev[u];
        const double d_i = dct * cache.g[u];
        const double d_g = dct * cache.i[u];
        dc_prev[u] = dct * cache.f[u];
        dgates[u] = d_i * cache.i[u] * (1.0 - cache.i[u]);
        dgates[static_cast<std::size_t>(h) + u] = d_f * cache.f[u] * (1.0 - cache.f[u]);
        dgates[static_cast<std::size_t>(2 * h) + u] = d_g * (1.0 - cache.g[u] * cache.g[u]);
        dgates[static_cast<std::size_t>(3 * h) + u] = d_o * cache.o[u] * (1.0 - cache.o[u]);
    }
    matmul_at_b_acc(cache.x.data.data(), dgates.data.data(), gwx_.data.data(), 1, input_size_, 4 * h);
    matmul_at_b_acc(cache.h_prev.data.data(), dgates.data.data(), gwh_.data.data(), 1, h, 4 * h);
    for (std::size_t j = 0; j < gb_.size(); ++j) gb_[j] += dgates[j];

    Tensor dx({input_size_});
    matmul_a_bt_acc(dgates.data.data(), wx_.data.data(), dx.data.data(), 1, 4 * h, input_size_);
    dh_prev = Tensor({h});
    matmul_a_bt_acc(dgates.data.data(), wh_.data.data(), dh_prev.data.data(), 1, 4 * h, h);
    return dx;
}

void LstmCell::zero_grads() {
    gwx_.zero();
    gwh_.zero();
    gb_.zero();
}

// ---- losses ----

namespace {
double clamp_prob(double p) { return std::min(1.0 - 1e-7, std::max(1e-7, p)); }
}

double bce_loss(double p, int y) {
    const double q = clamp_prob(p);
    return y ? -std::log(q) : -std::log(1.0 - q);
}

double bce_grad(double p, int y) {
    const double q = clamp_prob(p);
    return y ? -1.0 / q : 1.0 / (1.0 - q);
}

double mse_loss(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) throw std::invalid_argument("mse_loss: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

// ---- Adam ----

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads,
               AdamState& state, const AnnealSchedule& schedule) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam_step: param/grad count mismatch");
    if (state.m.empty()) {
        for (auto* p : params) {
            state.m.emplace_back(p->shape);
            state.v.emplace_back(p->shape);
        }
    }
    const double lr = schedule.lr(state.step);
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        if (p.shape != g.shape) throw std::invalid_argument("adam_step: shape mismatch");
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

// ---- checkpoints ----

namespace {
void put_u16(FILE* f, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>(v >> 8)};
    std::fwrite(b, 1, 2, f);
}
void put_u32(FILE* f, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    std::fwrite(b, 1, 4, f);
}
std::uint16_t get_u16(FILE* f) {
    unsigned char b[2];
    if (std::fread(b, 1, 2, f) != 2) throw std::runtime_error("RFNN: truncated file");
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}
std::uint32_t get_u32(FILE* f) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4) throw std::runtime_error("RFNN: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace

void save_checkpoint(const std::string& path, const json& spec,
                     const std::vector<Tensor*>& params) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    std::fwrite("RFNN", 1, 4, f);
    put_u16(f, 1);
    const std::string spec_str = spec.dump();
    put_u32(f, static_cast<std::uint32_t>(spec_str.size()));
    std::fwrite(spec_str.data(), 1, spec_str.size(), f);
    put_u32(f, static_cast<std::uint32_t>(params.size()));
    for (const auto* p : params) {
        put_u32(f, static_cast<std::uint32_t>(p->size()));
        std::vector<float> buf(p->size());
        for (std::size_t i = 0; i < p->size(); ++i) buf[i] = static_cast<float>(p->data[i]);
        std::fwrite(buf.data(), sizeof(float), buf.size(), f);
    }
    std::fclose(f);
}

json load_checkpoint(const std::string& path, const std::vector<Tensor*>& params) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[4];
    if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, "RFNN", 4) != 0) {
        std::fclose(f);
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    }
    if (get_u16(f) != 1) {
        std::fclose(f);
        throw std::runtime_error("load_checkpoint: unsupported version");
    }
    const std::uint32_t spec_len = get_u32(f);
    std::string spec_str(spec_len, '\0');
    if (std::fread(spec_str.data(), 1, spec_len, f) != spec_len) {
        std::fclose(f);
        throw std::runtime_error("load_checkpoint: truncated spec");
    }
    const std::uint32_t n_blobs = get_u32(f);
    if (n_blobs != params.size()) {
        std::fclose(f);
        throw std::runtime_error("load_checkpoint: parameter count mismatch");
    }
    for (auto* p : params) {
        const std::uint32_t len = get_u32(f);
        if (len != p->size()) {
            std::fclose(f);
            throw std::runtime_error("load_checkpoint: blob size mismatch");
        }
        std::vector<float> buf(len);
        if (std::fread(buf.data(), sizeof(float), len, f) != len) {
            std::fclose(f);
            throw std::runtime_error("load_checkpoint: truncated blob");
        }
        for (std::size_t i = 0; i < len; ++i) p->data[i] = buf[i];
    }
    std::fclose(f);
    return json::parse(spec_str);
}

json peek_checkpoint_spec(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("peek_checkpoint_spec: cannot open " + path);
    char magic[4];
    if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, "RFNN", 4) != 0) {
        std::fclose(f);
        throw std::runtime_error("peek_checkpoint_spec: bad magic in " + path);
    }
    if (get_u16(f) != 1) {
        std::fclose(f);
        throw std::runtime_error("peek_checkpoint_spec: unsupported version");
    }
    const std::uint32_t spec_len = get_u32(f);
    std::string spec_str(spec_len, '\0');
    if (std::fread(spec_str.data(), 1, spec_len, f) != spec_len) {
        std::fclose(f);
        throw std::runtime_error("peek_checkpoint_spec: truncated spec");
    }
    std::fclose(f);
    return json::parse(spec_str);
}

std::unique_ptr<Network> network_from_spec(const json& spec, Rng& rng) {
    auto net = std::make_unique<Network>();
    for (const auto& ls : spec) {
        const std::string kind = ls.at("kind");
        if (kind == "dense") {
            net->add(make_dense(ls.at("in"), ls.at("out"), ls.at("l2"), rng));
        } else if (kind == "conv1d") {
            net->add(make_conv1d(ls.at("in_ch"), ls.at("out_ch"), ls.at("kernel"), ls.at("stride"),
                                 ls.at("l2"), rng));
        } else if (kind == "relu") {
            net->add(make_relu());
        } else if (kind == "sigmoid") {
            net->add(make_sigmoid());
        } else if (kind == "softmax") {
            net->add(make_softmax());
        } else if (kind == "flatten") {
            net->add(make_flatten());
        } else if (kind == "gap") {
            net->add(make_gap());
        } else if (kind == "residual") {
            auto block = network_from_spec(ls.at("block"), rng);
            int in_ch = 0, out_ch = 0;
            if (ls.at("projected").get<bool>()) {
                in_ch = ls.at("proj").at("in_ch");
                out_ch = ls.at("proj").at("out_ch");
            } else {
                // Identity skip: channel counts match; recover from the block.
                in_ch = ls.at("block").front().at("in_ch");
                out_ch = in_ch;
            }
            net->add(std::make_unique<Residual>(std::move(block), in_ch, out_ch, rng));
        } else {
            throw std::runtime_error("network_from_spec: unknown layer kind " + kind);
        }
    }
    return net;
}

}  // namespace rfauth::nn
