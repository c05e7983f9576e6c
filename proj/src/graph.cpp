#include "countvqa/graph.hpp"

#include <algorithm>
#include <cmath>

namespace cvqa {

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

constexpr double kLogFloor = -50.0;  // clamp for log of underflowed probabilities

}  // namespace

Var Graph::input(Tensor t) { return push(std::move(t)); }

Var Graph::param(Parameter& p) {
    Var out = push(p.value);
    if (recording_ && p.trainable) {
        nodes_[out.id].parameter = &p;
    }
    return out;
}

Var Graph::add(Var a, Var b) {
    const Tensor &ta = v(check_var(a)), &tb = v(check_var(b));
    detail::require(ta.same_shape(tb), "add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += tb[i];
    Var r = push(std::move(out));
    set_back(r, [r, a, b](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        for (std::size_t i = 0; i < go.size(); ++i) {
            gr.g(a.id)[i] += go[i];
            gr.g(b.id)[i] += go[i];
        }
    });
    return r;
}

Var Graph::sub(Var a, Var b) {
    const Tensor &ta = v(check_var(a)), &tb = v(check_var(b));
    detail::require(ta.same_shape(tb), "sub: shape mismatch");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= tb[i];
    Var r = push(std::move(out));
    set_back(r, [r, a, b](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        for (std::size_t i = 0; i < go.size(); ++i) {
            gr.g(a.id)[i] += go[i];
            gr.g(b.id)[i] -= go[i];
        }
    });
    return r;
}

Var Graph::mul(Var a, Var b) {
    const Tensor &ta = v(check_var(a)), &tb = v(check_var(b));
    detail::require(ta.same_shape(tb), "mul: shape mismatch");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= tb[i];
    Var r = push(std::move(out));
    set_back(r, [r, a, b](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        const Tensor &va = gr.v(a.id), &vb = gr.v(b.id);
        for (std::size_t i = 0; i < go.size(); ++i) {
            gr.g(a.id)[i] += go[i] * vb[i];
            gr.g(b.id)[i] += go[i] * va[i];
        }
    });
    return r;
}

Var Graph::neg(Var a) { return scale(a, -1.0); }

Var Graph::scale(Var a, double c) {
    Tensor out = v(check_var(a));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    Var r = push(std::move(out));
    set_back(r, [r, a, c](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        for (std::size_t i = 0; i < go.size(); ++i) gr.g(a.id)[i] += c * go[i];
    });
    return r;
}

Var Graph::add_scalar(Var a, double c) {
    Tensor out = v(check_var(a));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c;
    Var r = push(std::move(out));
    set_back(r, [r, a](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        for (std::size_t i = 0; i < go.size(); ++i) gr.g(a.id)[i] += go[i];
    });
    return r;
}

Var Graph::tanh_op(Var a) {
    Tensor out = v(check_var(a));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    Var r = push(std::move(out));
    set_back(r, [r, a](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        const Tensor& y = gr.v(r.id);
        for (std::size_t i = 0; i < go.size(); ++i)
            gr.g(a.id)[i] += go[i] * (1.0 - y[i] * y[i]);
    });
    return r;
}

Var Graph::sigmoid_op(Var a) {
    Tensor out = v(check_var(a));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(out[i]);
    Var r = push(std::move(out));
    set_back(r, [r, a](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        const Tensor& y = gr.v(r.id);
        for (std::size_t i = 0; i < go.size(); ++i)
            gr.g(a.id)[i] += go[i] * y[i] * (1.0 - y[i]);
    });
    return r;
}

Var Graph::relu_op(Var a) {
    Tensor out = v(check_var(a));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
    Var r = push(std::move(out));
    set_back(r, [r, a](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        const Tensor& x = gr.v(a.id);
        for (std::size_t i = 0; i < go.size(); ++i)
            if (x[i] > 0.0) gr.g(a.id)[i] += go[i];
    });
    return r;
}

Var Graph::abs_op(Var a) {
    Tensor out = v(check_var(a));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(out[i]);
    Var r = push(std::move(out));
    set_back(r, [r, a](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        const Tensor& x = gr.v(a.id);
        for (std::size_t i = 0; i < go.size(); ++i) {
            double s = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
            gr.g(a.id)[i] += go[i] * s;
        }
    });
    return r;
}

Var Graph::log_op(Var a) {
    const double floor_x = std::exp(kLogFloor);
    Tensor out = v(check_var(a));
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = out[i] < floor_x ? kLogFloor : std::log(out[i]);
    Var r = push(std::move(out));
    set_back(r, [r, a, floor_x](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        const Tensor& x = gr.v(a.id);
        for (std::size_t i = 0; i < go.size(); ++i)
            if (x[i] >= floor_x) gr.g(a.id)[i] += go[i] / x[i];
    });
    return r;
}

Var Graph::huber_op(Var a) {
    Tensor out = v(check_var(a));
    for (std::size_t i = 0; i < out.size(); ++i) {
        double e = out[i];
        detail::require(e >= 0.0, "huber: negative input");
        out[i] = e <= 1.0 ? 0.5 * e * e : e - 0.5;
    }
    Var r = push(std::move(out));
    set_back(r, [r, a](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        const Tensor& x = gr.v(a.id);
        for (std::size_t i = 0; i < go.size(); ++i)
            gr.g(a.id)[i] += go[i] * (x[i] <= 1.0 ? x[i] : 1.0);
    });
    return r;
}

Var Graph::sum(Var a) {
    const Tensor& ta = v(check_var(a));
    double s = 0.0;
    for (std::size_t i = 0; i < ta.size(); ++i) s += ta[i];
    Var r = push(Tensor::scalar(s));
    set_back(r, [r, a](Graph& gr) {
        double go = gr.g(r.id)[0];
        Tensor& ga = gr.g(a.id);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go;
    });
    return r;
}

Var Graph::mean(Var a) {
    const Tensor& ta = v(check_var(a));
    detail::require(ta.size() > 0, "mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(ta.size()));
}

Var Graph::dot(Var a, Var b) {
    const Tensor &ta = v(check_var(a)), &tb = v(check_var(b));
    detail::require(ta.same_shape(tb), "dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < ta.size(); ++i) s += ta[i] * tb[i];
    Var r = push(Tensor::scalar(s));
    set_back(r, [r, a, b](Graph& gr) {
        double go = gr.g(r.id)[0];
        const Tensor &va = gr.v(a.id), &vb = gr.v(b.id);
        for (std::size_t i = 0; i < va.size(); ++i) {
            gr.g(a.id)[i] += go * vb[i];
            gr.g(b.id)[i] += go * va[i];
        }
    });
    return r;
}

Var Graph::affine(Var x, Var w, Var b) {
    const Tensor& tx = v(check_var(x));
    const Tensor& tw = v(check_var(w));
    const Tensor& tb = v(check_var(b));
    detail::require(tx.is_vector() && tw.is_matrix() && tb.is_vector(), "affine: rank mismatch");
    std::size_t k = tw.rows(), m = tw.cols();
    detail::require(tx.size() == m && tb.size() == k,
                    "affine: shape mismatch " + tw.shape_str() + " * " + tx.shape_str());
    Tensor out({k});
    for (std::size_t i = 0; i < k; ++i) {
        double s = tb[i];
        for (std::size_t j = 0; j < m; ++j) s += tw.at(i, j) * tx[j];
        out[i] = s;
    }
    Var r = push(std::move(out));
    set_back(r, [r, x, w, b, k, m](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        const Tensor& vx = gr.v(x.id);
        const Tensor& vw = gr.v(w.id);
        Tensor& gx = gr.g(x.id);
        Tensor& gw = gr.g(w.id);
        Tensor& gb = gr.g(b.id);
        for (std::size_t i = 0; i < k; ++i) {
            double gi = go[i];
            gb[i] += gi;
            for (std::size_t j = 0; j < m; ++j) {
                gw.at(i, j) += gi * vx[j];
                gx[j] += gi * vw.at(i, j);
            }
        }
    });
    return r;
}

Var Graph::linear(Var x, Var w, Var b) {
    const Tensor& tx = v(check_var(x));
    const Tensor& tw = v(check_var(w));
    const Tensor& tb = v(check_var(b));
    detail::require(tx.is_matrix() && tw.is_matrix() && tb.is_vector(), "linear: rank mismatch");
    std::size_t rws = tx.rows(), m = tx.cols(), k = tw.rows();
    detail::require(tw.cols() == m && tb.size() == k, "linear: shape mismatch");
    Tensor out({rws, k});
    for (std::size_t r0 = 0; r0 < rws; ++r0)
        for (std::size_t i = 0; i < k; ++i) {
            double s = tb[i];
            for (std::size_t j = 0; j < m; ++j) s += tx.at(r0, j) * tw.at(i, j);
            out.at(r0, i) = s;
        }
    Var r = push(std::move(out));
    set_back(r, [r, x, w, b, rws, m, k](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        const Tensor& vx = gr.v(x.id);
        const Tensor& vw = gr.v(w.id);
        Tensor& gx = gr.g(x.id);
        Tensor& gw = gr.g(w.id);
        Tensor& gb = gr.g(b.id);
        for (std::size_t r0 = 0; r0 < rws; ++r0)
            for (std::size_t i = 0; i < k; ++i) {
                double gi = go.at(r0, i);
                gb[i] += gi;
                for (std::size_t j = 0; j < m; ++j) {
                    gw.at(i, j) += gi * vx.at(r0, j);
                    gx.at(r0, j) += gi * vw.at(i, j);
                }
            }
    });
    return r;
}

Var Graph::matmul(Var a, Var b) {
    const Tensor &ta = v(check_var(a)), &tb = v(check_var(b));
    detail::require(ta.is_matrix() && tb.is_matrix() && ta.cols() == tb.rows(),
                    "matmul: shape mismatch");
    std::size_t n = ta.rows(), k = ta.cols(), m = tb.cols();
    Tensor out({n, m});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) s += ta.at(i, t) * tb.at(t, j);
            out.at(i, j) = s;
        }
    Var r = push(std::move(out));
    set_back(r, [r, a, b, n, k, m](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        const Tensor &va = gr.v(a.id), &vb = gr.v(b.id);
        Tensor &ga = gr.g(a.id), &gb = gr.g(b.id);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                double gij = go.at(i, j);
                for (std::size_t t = 0; t < k; ++t) {
                    ga.at(i, t) += gij * vb.at(t, j);
                    gb.at(t, j) += gij * va.at(i, t);
                }
            }
    });
    return r;
}

Var Graph::vecmat(Var x, Var a) {
    const Tensor &tx = v(check_var(x)), &ta = v(check_var(a));
    detail::require(tx.is_vector() && ta.is_matrix() && tx.size() == ta.rows(),
                    "vecmat: shape mismatch");
    std::size_t rws = ta.rows(), c = ta.cols();
    Tensor out({c});
    for (std::size_t j = 0; j < c; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < rws; ++i) s += tx[i] * ta.at(i, j);
        out[j] = s;
    }
    Var r = push(std::move(out));
    set_back(r, [r, x, a, rws, c](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        const Tensor &vx = gr.v(x.id), &va = gr.v(a.id);
        Tensor &gx = gr.g(x.id), &ga = gr.g(a.id);
        for (std::size_t i = 0; i < rws; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                gx[i] += go[j] * va.at(i, j);
                ga.at(i, j) += go[j] * vx[i];
            }
    });
    return r;
}

Var Graph::concat(Var a, Var b) {
    const Tensor &ta = v(check_var(a)), &tb = v(check_var(b));
    detail::require(ta.ndim() <= 1 && tb.ndim() <= 1, "concat: vectors or scalars only");
    std::size_t na = ta.size(), nb = tb.size();
    Tensor out({na + nb});
    for (std::size_t i = 0; i < na; ++i) out[i] = ta[i];
    for (std::size_t i = 0; i < nb; ++i) out[na + i] = tb[i];
    Var r = push(std::move(out));
    set_back(r, [r, a, b, na, nb](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        for (std::size_t i = 0; i < na; ++i) gr.g(a.id)[i] += go[i];
        for (std::size_t i = 0; i < nb; ++i) gr.g(b.id)[i] += go[na + i];
    });
    return r;
}

Var Graph::hconcat(Var a, Var b) {
    const Tensor &ta = v(check_var(a)), &tb = v(check_var(b));
    detail::require(ta.is_matrix() && tb.is_matrix() && ta.rows() == tb.rows(),
                    "hconcat: row count mismatch");
    std::size_t rws = ta.rows(), ca = ta.cols(), cb = tb.cols();
    Tensor out({rws, ca + cb});
    for (std::size_t i = 0; i < rws; ++i) {
        for (std::size_t j = 0; j < ca; ++j) out.at(i, j) = ta.at(i, j);
        for (std::size_t j = 0; j < cb; ++j) out.at(i, ca + j) = tb.at(i, j);
    }
    Var r = push(std::move(out));
    set_back(r, [r, a, b, rws, ca, cb](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        Tensor &ga = gr.g(a.id), &gb = gr.g(b.id);
        for (std::size_t i = 0; i < rws; ++i) {
            for (std::size_t j = 0; j < ca; ++j) ga.at(i, j) += go.at(i, j);
            for (std::size_t j = 0; j < cb; ++j) gb.at(i, j) += go.at(i, ca + j);
        }
    });
    return r;
}

Var Graph::tile_rows(Var a, std::size_t r0) {
    const Tensor& ta = v(check_var(a));
    detail::require(ta.is_vector(), "tile_rows: vector expected");
    std::size_t c = ta.size();
    Tensor out({r0, c});
    for (std::size_t i = 0; i < r0; ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) = ta[j];
    Var r = push(std::move(out));
    set_back(r, [r, a, r0, c](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        Tensor& ga = gr.g(a.id);
        for (std::size_t i = 0; i < r0; ++i)
            for (std::size_t j = 0; j < c; ++j) ga[j] += go.at(i, j);
    });
    return r;
}

Var Graph::row(Var m, std::size_t i) {
    const Tensor& tm = v(check_var(m));
    detail::require(tm.is_matrix() && i < tm.rows(), "row: index out of range");
    std::size_t c = tm.cols();
    Tensor out({c});
    for (std::size_t j = 0; j < c; ++j) out[j] = tm.at(i, j);
    Var r = push(std::move(out));
    set_back(r, [r, m, i, c](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        Tensor& gm = gr.g(m.id);
        for (std::size_t j = 0; j < c; ++j) gm.at(i, j) += go[j];
    });
    return r;
}

Var Graph::pick(Var a, std::size_t i) {
    const Tensor& ta = v(check_var(a));
    detail::require(i < ta.size(), "pick: index out of range");
    Var r = push(Tensor::scalar(ta[i]));
    set_back(r, [r, a, i](Graph& gr) { gr.g(a.id)[i] += gr.g(r.id)[0]; });
    return r;
}

Var Graph::gather(Var a, std::vector<std::size_t> idx) {
    const Tensor& ta = v(check_var(a));
    Tensor out({idx.size()});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        detail::require(idx[i] < ta.size(), "gather: index out of range");
        out[i] = ta[idx[i]];
    }
    Var r = push(std::move(out));
    set_back(r, [r, a, idx = std::move(idx)](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        Tensor& ga = gr.g(a.id);
        for (std::size_t i = 0; i < idx.size(); ++i) ga[idx[i]] += go[i];
    });
    return r;
}

Var Graph::reshape(Var a, std::vector<std::size_t> shape) {
    const Tensor& ta = v(check_var(a));
    Tensor out(shape);
    detail::require(out.size() == ta.size(), "reshape: element count mismatch");
    for (std::size_t i = 0; i < ta.size(); ++i) out[i] = ta[i];
    Var r = push(std::move(out));
    set_back(r, [r, a](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        Tensor& ga = gr.g(a.id);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    });
    return r;
}

Var Graph::softmax(Var a) {
    const Tensor& ta = v(check_var(a));
    detail::require(ta.is_vector() && ta.size() > 0, "softmax: nonempty vector expected");
    double mx = ta[0];
    for (std::size_t i = 1; i < ta.size(); ++i) mx = std::max(mx, ta[i]);
    Tensor out({ta.size()});
    double z = 0.0;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        out[i] = std::exp(ta[i] - mx);
        z += out[i];
    }
    for (std::size_t i = 0; i < ta.size(); ++i) out[i] /= z;
    Var r = push(std::move(out));
    set_back(r, [r, a](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        const Tensor& y = gr.v(r.id);
        double inner = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) inner += go[i] * y[i];
        for (std::size_t i = 0; i < y.size(); ++i)
            gr.g(a.id)[i] += y[i] * (go[i] - inner);
    });
    return r;
}

Var Graph::cross_entropy(Var p, std::size_t target) {
    const Tensor& tp = v(check_var(p));
    detail::require(tp.is_vector(), "cross_entropy: vector expected");
    detail::require(target < tp.size(), "cross_entropy: target out of range");
    double pt = tp[target];
    bool clamped = pt <= 0.0 || -std::log(pt) > 50.0;
    double loss = clamped ? 50.0 : -std::log(pt);
    Var r = push(Tensor::scalar(loss));
    set_back(r, [r, p, target, clamped](Graph& gr) {
        if (clamped) return;
        double go = gr.g(r.id)[0];
        gr.g(p.id)[target] += go * (-1.0 / gr.v(p.id)[target]);
    });
    return r;
}

Var Graph::dropout(Var x, double rate, bool training, Rng& rng) {
    detail::require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
    if (!training || rate == 0.0) return x;
    const Tensor& tx = v(check_var(x));
    std::vector<double> mask(tx.size());
    double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = rng.uniform01() < rate ? 0.0 : keep_scale;
    Tensor out = tx;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    Var r = push(std::move(out));
    set_back(r, [r, x, mask = std::move(mask)](Graph& gr) {
        const Tensor& go = gr.g(r.id);
        Tensor& gx = gr.g(x.id);
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * mask[i];
    });
    return r;
}

void Graph::backward(Var loss) {
    detail::require(recording_, "backward: graph is not recording");
    int lid = check_var(loss);
    detail::require(nodes_[lid].value.size() == 1, "backward: loss must be a scalar");
    for (auto& n : nodes_) n.grad.fill(0.0);
    nodes_[lid].grad[0] = 1.0;
    for (int i = lid; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.back) n.back(*this);
        if (n.parameter) {
            Tensor& pg = n.parameter->grad;
            for (std::size_t j = 0; j < pg.size(); ++j) pg[j] += n.grad[j];
        }
    }
}

}  // namespace cvqa
