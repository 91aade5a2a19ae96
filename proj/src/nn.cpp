#include "kdda/nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "kdda/rng.hpp"

namespace kdda {

namespace {
void check_image_input(const Tensor& x, const char* who) {
    if (x.rank() != 4)
        throw std::invalid_argument(std::string(who) + " expects {N,C,H,W} input, got " + x.shape_str());
}
}  // namespace

// ---------------------------------------------------------------- Conv3x3

Conv3x3::Conv3x3(int in_channels, int out_channels)
    : in_c_(in_channels),
      out_c_(out_channels),
      weight_({out_channels, in_channels, 3, 3}),
      bias_({out_channels}),
      dweight_({out_channels, in_channels, 3, 3}),
      dbias_({out_channels}) {}

std::string Conv3x3::spec() const {
    return "conv3x3:" + std::to_string(in_c_) + ":" + std::to_string(out_c_);
}

std::vector<int> Conv3x3::out_shape(const std::vector<int>& in) const {
    if (in.size() != 4 || in[1] != in_c_)
        throw std::invalid_argument("conv3x3 input shape mismatch");
    return {in[0], out_c_, in[2], in[3]};
}

Tensor Conv3x3::forward(const Tensor& x) {
    check_image_input(x, "conv3x3");
    input_ = x;
    const int n = x.extent(0), h = x.extent(2), w = x.extent(3);
    if (x.extent(1) != in_c_) throw std::invalid_argument("conv3x3 channel mismatch");
    Tensor out({n, out_c_, h, w});

    const int plane = h * w;
    for (int b = 0; b < n; ++b) {
        const double* in_b = x.data() + static_cast<std::size_t>(b) * in_c_ * plane;
        double* out_b = out.data() + static_cast<std::size_t>(b) * out_c_ * plane;
        for (int oc = 0; oc < out_c_; ++oc) {
            double* o = out_b + static_cast<std::size_t>(oc) * plane;
            const double bv = bias_[oc];
            for (int i = 0; i < plane; ++i) o[i] = bv;
            for (int ic = 0; ic < in_c_; ++ic) {
                const double* in_p = in_b + static_cast<std::size_t>(ic) * plane;
                const double* wk = weight_.data() + ((static_cast<std::size_t>(oc) * in_c_ + ic) * 9);
                for (int ky = 0; ky < 3; ++ky) {
                    for (int kx = 0; kx < 3; ++kx) {
                        const double wv = wk[ky * 3 + kx];
                        const int dy = ky - 1, dx = kx - 1;
                        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                        for (int y = y0; y < y1; ++y) {
                            double* orow = o + y * w;
                            const double* irow = in_p + (y + dy) * w + dx;
                            for (int xx = x0; xx < x1; ++xx) orow[xx] += wv * irow[xx];
                        }
                    }
                }
            }
        }
    }
    return out;
}

Tensor Conv3x3::backward(const Tensor& grad_out) {
    if (input_.size() == 0) throw std::logic_error("conv3x3 backward before forward");
    const int n = input_.extent(0), h = input_.extent(2), w = input_.extent(3);
    Tensor din(input_.shape());
    const int plane = h * w;

    for (int b = 0; b < n; ++b) {
        const double* in_b = input_.data() + static_cast<std::size_t>(b) * in_c_ * plane;
        const double* go_b = grad_out.data() + static_cast<std::size_t>(b) * out_c_ * plane;
        double* di_b = din.data() + static_cast<std::size_t>(b) * in_c_ * plane;
        for (int oc = 0; oc < out_c_; ++oc) {
            const double* go = go_b + static_cast<std::size_t>(oc) * plane;
            double gb = 0.0;
            for (int i = 0; i < plane; ++i) gb += go[i];
            dbias_[oc] += gb;
            for (int ic = 0; ic < in_c_; ++ic) {
                const double* in_p = in_b + static_cast<std::size_t>(ic) * plane;
                double* di_p = di_b + static_cast<std::size_t>(ic) * plane;
                double* dwk = dweight_.data() + ((static_cast<std::size_t>(oc) * in_c_ + ic) * 9);
                const double* wk = weight_.data() + ((static_cast<std::size_t>(oc) * in_c_ + ic) * 9);
                for (int ky = 0; ky < 3; ++ky) {
                    for (int kx = 0; kx < 3; ++kx) {
                        const double wv = wk[ky * 3 + kx];
                        const int dy = ky - 1, dx = kx - 1;
                        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                        double gw = 0.0;
                        for (int y = y0; y < y1; ++y) {
                            const double* gorow = go + y * w;
                            const double* irow = in_p + (y + dy) * w + dx;
                            double* dirow = di_p + (y + dy) * w + dx;
                            for (int xx = x0; xx < x1; ++xx) {
                                gw += gorow[xx] * irow[xx];
                                dirow[xx] += gorow[xx] * wv;
                            }
                        }
                        dwk[ky * 3 + kx] += gw;
                    }
                }
            }
        }
    }
    input_ = Tensor();
    return din;
}

std::unique_ptr<Layer> Conv3x3::clone() const {
    auto c = std::make_unique<Conv3x3>(in_c_, out_c_);
    c->weight_ = weight_;
    c->bias_ = bias_;
    return c;
}

// ------------------------------------------------------------------ Dense

Dense::Dense(int in_features, int out_features)
    : in_f_(in_features),
      out_f_(out_features),
      weight_({out_features, in_features}),
      bias_({out_features}),
      dweight_({out_features, in_features}),
      dbias_({out_features}) {}

std::string Dense::spec() const {
    return "dense:" + std::to_string(in_f_) + ":" + std::to_string(out_f_);
}

std::vector<int> Dense::out_shape(const std::vector<int>& in) const {
    if (in.empty()) throw std::invalid_argument("dense input shape empty");
    int flat = 1;
    for (std::size_t i = 1; i < in.size(); ++i) flat *= in[i];
    if (flat != in_f_) throw std::invalid_argument("dense input size mismatch");
    return {in[0], out_f_};
}

Tensor Dense::forward(const Tensor& x) {
    const int n = x.extent(0);
    if (x.size() / n != in_f_)
        throw std::invalid_argument("dense input size mismatch: " + x.shape_str());
    in_shape_ = x.shape();
    input_ = x;
    Tensor out({n, out_f_});
    for (int b = 0; b < n; ++b) {
        const double* in_p = x.data() + static_cast<std::size_t>(b) * in_f_;
        double* o = out.data() + static_cast<std::size_t>(b) * out_f_;
        for (int j = 0; j < out_f_; ++j) {
            const double* wrow = weight_.data() + static_cast<std::size_t>(j) * in_f_;
            double acc = bias_[j];
            for (int i = 0; i < in_f_; ++i) acc += wrow[i] * in_p[i];
            o[j] = acc;
        }
    }
    return out;
}

Tensor Dense::backward(const Tensor& grad_out) {
    if (input_.size() == 0) throw std::logic_error("dense backward before forward");
    const int n = input_.extent(0);
    Tensor din(in_shape_);
    for (int b = 0; b < n; ++b) {
        const double* in_p = input_.data() + static_cast<std::size_t>(b) * in_f_;
        const double* go = grad_out.data() + static_cast<std::size_t>(b) * out_f_;
        double* di = din.data() + static_cast<std::size_t>(b) * in_f_;
        for (int j = 0; j < out_f_; ++j) {
            const double g = go[j];
            dbias_[j] += g;
            double* dwrow = dweight_.data() + static_cast<std::size_t>(j) * in_f_;
            const double* wrow = weight_.data() + static_cast<std::size_t>(j) * in_f_;
            for (int i = 0; i < in_f_; ++i) {
                dwrow[i] += g * in_p[i];
                di[i] += g * wrow[i];
            }
        }
    }
    input_ = Tensor();
    return din;
}

std::unique_ptr<Layer> Dense::clone() const {
    auto c = std::make_unique<Dense>(in_f_, out_f_);
    c->weight_ = weight_;
    c->bias_ = bias_;
    return c;
}

// ------------------------------------------------------------------- Relu

Tensor Relu::forward(const Tensor& x) {
    input_ = x;
    Tensor out(x.shape());
    for (int i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    return out;
}

Tensor Relu::backward(const Tensor& grad_out) {
    if (input_.size() == 0) throw std::logic_error("relu backward before forward");
    Tensor din(input_.shape());
    for (int i = 0; i < input_.size(); ++i) din[i] = input_[i] > 0.0 ? grad_out[i] : 0.0;
    input_ = Tensor();
    return din;
}

// --------------------------------------------------------------- MaxPool2

std::vector<int> MaxPool2::out_shape(const std::vector<int>& in) const {
    if (in.size() != 4 || in[2] % 2 != 0 || in[3] % 2 != 0)
        throw std::invalid_argument("maxpool2 needs {N,C,evenH,evenW} input");
    return {in[0], in[1], in[2] / 2, in[3] / 2};
}

Tensor MaxPool2::forward(const Tensor& x) {
    check_image_input(x, "maxpool2");
    const int n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
    if (h % 2 || w % 2) throw std::invalid_argument("maxpool2 needs even spatial extents");
    in_shape_ = x.shape();
    const int oh = h / 2, ow = w / 2;
    Tensor out({n, c, oh, ow});
    argmax_.assign(static_cast<std::size_t>(out.size()), 0);
    for (int b = 0; b < n; ++b) {
        for (int ch = 0; ch < c; ++ch) {
            const double* in_p = x.data() + (static_cast<std::size_t>(b) * c + ch) * h * w;
            double* o = out.data() + (static_cast<std::size_t>(b) * c + ch) * oh * ow;
            int* am = argmax_.data() + (static_cast<std::size_t>(b) * c + ch) * oh * ow;
            for (int y = 0; y < oh; ++y) {
                for (int xx = 0; xx < ow; ++xx) {
                    const int base = (2 * y) * w + 2 * xx;
                    int best = base;
                    double bv = in_p[base];
                    const int cand[3] = {base + 1, base + w, base + w + 1};
                    for (const int idx : cand) {
                        if (in_p[idx] > bv) {
                            bv = in_p[idx];
                            best = idx;
                        }
                    }
                    o[y * ow + xx] = bv;
                    am[y * ow + xx] = best;
                }
            }
        }
    }
    return out;
}

Tensor MaxPool2::backward(const Tensor& grad_out) {
    if (argmax_.empty()) throw std::logic_error("maxpool2 backward before forward");
    Tensor din(in_shape_);
    const int c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    const int oh = h / 2, ow = w / 2;
    for (int b = 0; b < in_shape_[0]; ++b) {
        for (int ch = 0; ch < c; ++ch) {
            const double* go = grad_out.data() + (static_cast<std::size_t>(b) * c + ch) * oh * ow;
            double* di = din.data() + (static_cast<std::size_t>(b) * c + ch) * h * w;
            const int* am = argmax_.data() + (static_cast<std::size_t>(b) * c + ch) * oh * ow;
            for (int i = 0; i < oh * ow; ++i) di[am[i]] += go[i];
        }
    }
    argmax_.clear();
    return din;
}

// ----------------------------------------------------------- GlobalAvgPool

std::vector<int> GlobalAvgPool::out_shape(const std::vector<int>& in) const {
    if (in.size() != 4) throw std::invalid_argument("gap needs {N,C,H,W} input");
    return {in[0], in[1]};
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
    check_image_input(x, "gap");
    in_shape_ = x.shape();
    const int n = x.extent(0), c = x.extent(1), plane = x.extent(2) * x.extent(3);
    Tensor out({n, c});
    for (int b = 0; b < n; ++b) {
        for (int ch = 0; ch < c; ++ch) {
            const double* in_p = x.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
            double acc = 0.0;
            for (int i = 0; i < plane; ++i) acc += in_p[i];
            out[b * c + ch] = acc / plane;
        }
    }
    return out;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
    if (in_shape_.empty()) throw std::logic_error("gap backward before forward");
    Tensor din(in_shape_);
    const int n = in_shape_[0], c = in_shape_[1], plane = in_shape_[2] * in_shape_[3];
    for (int b = 0; b < n; ++b) {
        for (int ch = 0; ch < c; ++ch) {
            const double g = grad_out[b * c + ch] / plane;
            double* di = din.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
            for (int i = 0; i < plane; ++i) di[i] = g;
        }
    }
    in_shape_.clear();
    return din;
}

// ------------------------------------------------------------------ Model

Model::Model(const Model& other) {
    layers_.reserve(other.layers_.size());
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Model& Model::operator=(const Model& other) {
    if (this != &other) {
        layers_.clear();
        for (const auto& l : other.layers_) layers_.push_back(l->clone());
        has_forwarded_ = false;
    }
    return *this;
}

Model Model::from_spec(const std::string& spec, std::uint64_t init_seed) {
    Model m;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        std::stringstream ts(tok);
        std::string name;
        std::getline(ts, name, ':');
        if (name == "relu") {
            m.layers_.push_back(std::make_unique<Relu>());
        } else if (name == "maxpool2") {
            m.layers_.push_back(std::make_unique<MaxPool2>());
        } else if (name == "gap") {
            m.layers_.push_back(std::make_unique<GlobalAvgPool>());
        } else if (name == "conv3x3" || name == "dense") {
            std::string a, b;
            if (!std::getline(ts, a, ':') || !std::getline(ts, b, ':'))
                throw std::invalid_argument("layer spec needs in:out sizes: " + tok);
            const int in = std::stoi(a), out = std::stoi(b);
            if (in <= 0 || out <= 0) throw std::invalid_argument("layer sizes must be positive: " + tok);
            if (name == "conv3x3")
                m.layers_.push_back(std::make_unique<Conv3x3>(in, out));
            else
                m.layers_.push_back(std::make_unique<Dense>(in, out));
        } else {
            throw std::invalid_argument("unknown layer kind: " + name);
        }
    }
    if (m.layers_.empty()) throw std::invalid_argument("empty model spec");

    // He-normal init, fan-in scaled; biases start at zero.
    Rng rng(Rng::derive(init_seed, {0x1417u}));
    for (auto& layer : m.layers_) {
        auto ps = layer->params();
        if (ps.empty()) continue;
        Tensor& w = *ps[0];
        const int fan_in = w.size() / w.extent(0);
        const double std_dev = std::sqrt(2.0 / fan_in);
        for (int i = 0; i < w.size(); ++i) w[i] = std_dev * rng.normal();
    }
    return m;
}

Tensor Model::forward(const Tensor& x) {
    require_finite(x, "model input");
    Tensor cur = x;
    for (auto& layer : layers_) cur = layer->forward(cur);
    require_finite(cur, "model forward output");
    has_forwarded_ = true;
    return cur;
}

void Model::backward(const Tensor& grad_out) {
    if (!has_forwarded_) throw std::logic_error("model backward without a recorded forward");
    Tensor g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    require_finite(g, "model backward output");
    has_forwarded_ = false;
}

std::vector<Tensor*> Model::params() {
    std::vector<Tensor*> out;
    for (auto& l : layers_)
        for (Tensor* p : l->params()) out.push_back(p);
    return out;
}

std::vector<const Tensor*> Model::params() const {
    std::vector<const Tensor*> out;
    for (const auto& l : layers_)
        for (Tensor* p : const_cast<Layer&>(*l).params()) out.push_back(p);
    return out;
}

std::vector<Tensor*> Model::grads() {
    std::vector<Tensor*> out;
    for (auto& l : layers_)
        for (Tensor* g : l->grads()) out.push_back(g);
    return out;
}

void Model::zero_grads() {
    for (Tensor* g : grads()) g->fill(0.0);
}

int Model::param_count() const {
    int n = 0;
    for (const Tensor* p : params()) n += p->size();
    return n;
}

std::string Model::spec() const {
    std::string out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (i) out += ',';
        out += layers_[i]->spec();
    }
    return out;
}

std::vector<int> Model::out_shape(const std::vector<int>& in) const {
    std::vector<int> cur = in;
    for (const auto& l : layers_) cur = l->out_shape(cur);
    return cur;
}

}  // namespace kdda
