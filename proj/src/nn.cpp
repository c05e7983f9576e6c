#include "countvqa/nn.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cvqa {

Parameter& ParameterStore::emplace(Parameter p) {
    detail::require(by_name_.find(p.name) == by_name_.end(),
                    "parameter already exists: " + p.name);
    params_.push_back(std::move(p));
    Parameter& ref = params_.back();
    order_.push_back(&ref);
    by_name_[ref.name] = &ref;
    return ref;
}

Parameter& ParameterStore::matrix(const std::string& name, std::size_t rows, std::size_t cols) {
    Tensor t({rows, cols});
    double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng_.uniform(-a, a);
    return emplace(Parameter(name, std::move(t)));
}

Parameter& ParameterStore::zeros(const std::string& name, std::size_t n) {
    return emplace(Parameter(name, Tensor({n})));
}

Parameter& ParameterStore::scalar(const std::string& name, double v, bool trainable) {
    Parameter p(name, Tensor::scalar(v));
    p.trainable = trainable;
    return emplace(std::move(p));
}

Parameter* ParameterStore::find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParameterStore::find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

std::vector<Parameter*> ParameterStore::all() { return order_; }

void ParameterStore::zero_grads() {
    for (Parameter* p : order_) p->zero_grad();
}

bool ParameterStore::grads_finite() const {
    for (const Parameter* p : order_)
        if (!p->grad.all_finite()) return false;
    return true;
}

AffineParams make_affine(ParameterStore& ps, const std::string& name, std::size_t in,
                         std::size_t out) {
    AffineParams p;
    p.w = &ps.matrix(name + ".w", out, in);
    p.b = &ps.zeros(name + ".b", out);
    return p;
}

Var affine(Graph& g, Var x, const AffineParams& p) {
    return g.affine(x, g.param(*p.w), g.param(*p.b));
}

Var linear_rows(Graph& g, Var x, const AffineParams& p) {
    return g.linear(x, g.param(*p.w), g.param(*p.b));
}

GtuParams make_gtu(ParameterStore& ps, const std::string& name, std::size_t in, std::size_t out) {
    GtuParams p;
    p.lin = make_affine(ps, name + ".lin", in, out);
    p.gate = make_affine(ps, name + ".gate", in, out);
    return p;
}

Var gtu(Graph& g, Var x, const GtuParams& p) {
    return g.mul(g.tanh_op(affine(g, x, p.lin)), g.sigmoid_op(affine(g, x, p.gate)));
}

Var gtu_rows(Graph& g, Var x, const GtuParams& p) {
    return g.mul(g.tanh_op(linear_rows(g, x, p.lin)), g.sigmoid_op(linear_rows(g, x, p.gate)));
}

LstmParams make_lstm(ParameterStore& ps, const std::string& name, std::size_t in,
                     std::size_t hidden) {
    LstmParams p;
    std::size_t z = in + hidden;
    p.input_gate = make_affine(ps, name + ".i", z, hidden);
    p.forget_gate = make_affine(ps, name + ".f", z, hidden);
    p.output_gate = make_affine(ps, name + ".o", z, hidden);
    p.cell = make_affine(ps, name + ".g", z, hidden);
    p.hidden = hidden;
    return p;
}

std::pair<Var, Var> lstm_step(Graph& g, Var x, Var h_prev, Var c_prev, const LstmParams& p) {
    Var z = g.concat(x, h_prev);
    Var i = g.sigmoid_op(affine(g, z, p.input_gate));
    Var f = g.sigmoid_op(affine(g, z, p.forget_gate));
    Var o = g.sigmoid_op(affine(g, z, p.output_gate));
    Var cand = g.tanh_op(affine(g, z, p.cell));
    Var c = g.add(g.mul(f, c_prev), g.mul(i, cand));
    Var h = g.mul(o, g.tanh_op(c));
    return {h, c};
}

double huber(double e) {
    detail::require(e >= 0.0, "huber: negative input");
    return e <= 1.0 ? 0.5 * e * e : e - 0.5;
}

void Adam::step(ParameterStore& ps) {
    ++step_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (Parameter* p : ps.all()) {
        if (!p->trainable) continue;
        Slot& s = slots_[p];
        if (s.m.size() != p->value.size()) {
            s.m = Tensor::zeros(p->value.shape());
            s.v = Tensor::zeros(p->value.shape());
        }
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            double g = p->grad[i];
            s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g;
            s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g * g;
            double mhat = s.m[i] / bc1;
            double vhat = s.v[i] / bc2;
            p->value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        p->zero_grad();
    }
}

const Tensor* Adam::first_moment(Parameter* p) const {
    auto it = slots_.find(p);
    return it == slots_.end() ? nullptr : &it->second.m;
}

const Tensor* Adam::second_moment(Parameter* p) const {
    auto it = slots_.find(p);
    return it == slots_.end() ? nullptr : &it->second.v;
}

namespace {

constexpr char kCkptMagic[8] = {'I', 'R', 'L', 'C', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f64(std::ostream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

}  // namespace

void save_checkpoint(const ParameterStore&, const std::vector<Parameter*>& params,
                     const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    os.write(kCkptMagic, 8);
    write_u32(os, kCkptVersion);
    write_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const Parameter* p : params) {
        write_u32(os, static_cast<std::uint32_t>(p->name.size()));
        os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_u32(os, static_cast<std::uint32_t>(p->value.ndim()));
        for (std::size_t d : p->value.shape()) write_u32(os, static_cast<std::uint32_t>(d));
        for (std::size_t i = 0; i < p->value.size(); ++i) write_f64(os, p->value[i]);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

void save_checkpoint(ParameterStore& ps, const std::string& path) {
    save_checkpoint(ps, ps.all(), path);
}

void load_checkpoint(ParameterStore& ps, const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    std::uint32_t version = read_u32(is);
    if (version != kCkptVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    std::uint32_t count = read_u32(is);
    std::vector<std::string> loaded;
    for (std::uint32_t k = 0; k < count; ++k) {
        std::uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw std::runtime_error("checkpoint: truncated file");
        std::uint32_t ndim = read_u32(is);
        std::vector<std::size_t> shape(ndim);
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            shape[d] = read_u32(is);
            n *= shape[d];
        }
        Parameter* p = ps.find(name);
        if (p) {
            if (p->value.shape() != shape)
                throw std::runtime_error("checkpoint: shape mismatch for " + name + ": file " +
                                         Tensor(shape).shape_str() + " vs model " +
                                         p->value.shape_str());
            for (std::size_t i = 0; i < n; ++i) p->value[i] = read_f64(is);
            loaded.push_back(name);
        } else {
            for (std::size_t i = 0; i < n; ++i) read_f64(is);
        }
    }
    for (Parameter* p : ps.all()) {
        bool found = false;
        for (const auto& name : loaded)
            if (name == p->name) {
                found = true;
                break;
            }
        if (!found)
            throw std::runtime_error("checkpoint: parameter missing from " + path + ": " +
                                     p->name);
    }
}

}  // namespace cvqa
