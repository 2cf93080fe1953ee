#pragma once

// Reverse-mode autodiff over dense double matrices. A Tape records forward
// ops and replays their adjoints in reverse; leaves may point at external
// gradient sinks (parameter stores). All arithmetic is 64-bit and
// single-threaded, so identical inputs give bitwise identical results.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "kgsum/util.hpp"

namespace kgsum::ad {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

class Tape {
public:
    // Leaf with an optional external gradient sink (accumulated on backward).
    Var leaf(Mat value, Mat* grad_sink) {
        Node n;
        n.val = std::move(value);
        n.needs_grad = grad_sink != nullptr;
        const int id = push(std::move(n));
        if (grad_sink) {
            nodes_[static_cast<std::size_t>(id)].back = [id, grad_sink](Tape& t) {
                *grad_sink += t.grad_ref(id);
            };
        }
        return Var{id};
    }

    Var constant(Mat value) { return leaf(std::move(value), nullptr); }

    const Mat& val(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].val; }
    int rows(Var v) const { return static_cast<int>(val(v).rows()); }
    int cols(Var v) const { return static_cast<int>(val(v).cols()); }

    // Number of nodes; pair with truncate() to reclaim decode-loop scratch.
    std::size_t size() const { return nodes_.size(); }
    void truncate(std::size_t n) { nodes_.resize(n); }

    Var add(Var a, Var b) {
        Node n;
        n.val = val(a) + val(b);
        return unary_binary(std::move(n), a, b, [](Tape& t, int id, int ia, int ib) {
            const Mat& g = t.grad_ref(id);
            if (t.wants(ia)) t.grad_acc(ia) += g;
            if (t.wants(ib)) t.grad_acc(ib) += g;
        });
    }

    Var sub(Var a, Var b) {
        Node n;
        n.val = val(a) - val(b);
        return unary_binary(std::move(n), a, b, [](Tape& t, int id, int ia, int ib) {
            const Mat& g = t.grad_ref(id);
            if (t.wants(ia)) t.grad_acc(ia) += g;
            if (t.wants(ib)) t.grad_acc(ib) -= g;
        });
    }

    Var hadamard(Var a, Var b) {
        Node n;
        n.val = val(a).cwiseProduct(val(b));
        return unary_binary(std::move(n), a, b, [](Tape& t, int id, int ia, int ib) {
            const Mat& g = t.grad_ref(id);
            if (t.wants(ia)) t.grad_acc(ia) += g.cwiseProduct(t.val(Var{ib}));
            if (t.wants(ib)) t.grad_acc(ib) += g.cwiseProduct(t.val(Var{ia}));
        });
    }

    // alpha * a + beta (elementwise)
    Var affine(Var a, double alpha, double beta = 0.0) {
        Node n;
        n.val = (alpha * val(a).array() + beta).matrix();
        return unary(std::move(n), a, [alpha](Tape& t, int id, int ia) {
            if (t.wants(ia)) t.grad_acc(ia) += alpha * t.grad_ref(id);
        });
    }

    Var scale(Var a, double c) { return affine(a, c, 0.0); }

    Var matmul(Var a, Var b) {
        Node n;
        n.val = val(a) * val(b);
        return unary_binary(std::move(n), a, b, [](Tape& t, int id, int ia, int ib) {
            const Mat& g = t.grad_ref(id);
            if (t.wants(ia)) t.grad_acc(ia) += g * t.val(Var{ib}).transpose();
            if (t.wants(ib)) t.grad_acc(ib) += t.val(Var{ia}).transpose() * g;
        });
    }

    Var transpose(Var a) {
        Node n;
        n.val = val(a).transpose();
        return unary(std::move(n), a, [](Tape& t, int id, int ia) {
            if (t.wants(ia)) t.grad_acc(ia) += t.grad_ref(id).transpose();
        });
    }

    // a[m x n] + broadcast of row[1 x n]
    Var add_rowvec(Var a, Var row) {
        Node n;
        n.val = val(a).rowwise() + val(row).row(0);
        return unary_binary(std::move(n), a, row, [](Tape& t, int id, int ia, int ir) {
            const Mat& g = t.grad_ref(id);
            if (t.wants(ia)) t.grad_acc(ia) += g;
            if (t.wants(ir)) t.grad_acc(ir) += g.colwise().sum();
        });
    }

    Var relu(Var a) {
        Node n;
        n.val = val(a).cwiseMax(0.0);
        return unary(std::move(n), a, [](Tape& t, int id, int ia) {
            if (!t.wants(ia)) return;
            const Mat& g = t.grad_ref(id);
            const Mat& x = t.val(Var{ia});
            t.grad_acc(ia) += (x.array() > 0.0).select(g, Mat::Zero(g.rows(), g.cols()));
        });
    }

    Var sigmoid(Var a) {
        Node n;
        n.val = (1.0 / (1.0 + (-val(a).array()).exp())).matrix();
        const int id = push(std::move(n));
        attach(id, {a.id});
        nodes_[static_cast<std::size_t>(id)].back = [id, ia = a.id](Tape& t) {
            if (!t.wants(ia)) return;
            const Mat& y = t.val(Var{id});
            t.grad_acc(ia) +=
                t.grad_ref(id).cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
        };
        return Var{id};
    }

    // Row-wise softmax of (a + add_mask). Masked entries (-inf) get weight 0
    // exactly; every row must keep at least one finite entry.
    Var softmax_rows(Var a, const Mat* add_mask = nullptr) {
        const Mat& x = val(a);
        Mat z = x;
        if (add_mask) z += *add_mask;
        Mat y(z.rows(), z.cols());
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const double m = z.row(i).maxCoeff();
            Eigen::ArrayXd e = (z.row(i).array() - m).exp().transpose();
            const double s = e.sum();
            y.row(i) = (e / s).transpose();
        }
        Node n;
        n.val = std::move(y);
        const int id = push(std::move(n));
        attach(id, {a.id});
        nodes_[static_cast<std::size_t>(id)].back = [id, ia = a.id](Tape& t) {
            if (!t.wants(ia)) return;
            const Mat& y = t.val(Var{id});
            const Mat& g = t.grad_ref(id);
            Mat& ga = t.grad_acc(ia);
            for (Eigen::Index i = 0; i < y.rows(); ++i) {
                const double dot = g.row(i).dot(y.row(i));
                ga.row(i) += (y.row(i).array() * (g.row(i).array() - dot)).matrix();
            }
        };
        return Var{id};
    }

    // Column scaling by a constant positive vector (salience multipliers).
    Var col_scale(Var a, Vec s) {
        Node n;
        n.val = val(a) * s.asDiagonal();
        const int id = push(std::move(n));
        attach(id, {a.id});
        nodes_[static_cast<std::size_t>(id)].back = [id, ia = a.id, s = std::move(s)](Tape& t) {
            if (t.wants(ia)) t.grad_acc(ia) += t.grad_ref(id) * s.asDiagonal();
        };
        return Var{id};
    }

    // y = a / rowsum(a); rows must have strictly positive sums.
    Var normalize_rows(Var a) {
        const Mat& x = val(a);
        Vec r = x.rowwise().sum();
        Node n;
        n.val = r.cwiseInverse().asDiagonal() * x;
        const int id = push(std::move(n));
        attach(id, {a.id});
        nodes_[static_cast<std::size_t>(id)].back = [id, ia = a.id, r = std::move(r)](Tape& t) {
            if (!t.wants(ia)) return;
            const Mat& y = t.val(Var{id});
            const Mat& g = t.grad_ref(id);
            Mat& ga = t.grad_acc(ia);
            for (Eigen::Index i = 0; i < y.rows(); ++i) {
                const double dot = g.row(i).dot(y.row(i));
                ga.row(i) += (g.row(i).array() - dot).matrix() / r(i);
            }
        };
        return Var{id};
    }

    // Row-wise layer normalization with gain/bias rows [1 x n].
    Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-6) {
        const Mat& x = val(a);
        const Eigen::Index m = x.rows(), d = x.cols();
        Mat xhat(m, d);
        Vec inv_std(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double mu = x.row(i).mean();
            const double var = (x.row(i).array() - mu).square().mean();
            const double s = 1.0 / std::sqrt(var + eps);
            inv_std(i) = s;
            xhat.row(i) = (x.row(i).array() - mu) * s;
        }
        Node n;
        n.val = (xhat.array().rowwise() * val(gain).row(0).array()).rowwise() + val(bias).row(0).array();
        const int id = push(std::move(n));
        attach(id, {a.id, gain.id, bias.id});
        nodes_[static_cast<std::size_t>(id)].back = [id, ia = a.id, ig = gain.id, ib = bias.id,
                                                     xhat = std::move(xhat),
                                                     inv_std = std::move(inv_std)](Tape& t) {
            const Mat& g = t.grad_ref(id);
            if (t.wants(ib)) t.grad_acc(ib) += g.colwise().sum();
            if (t.wants(ig)) t.grad_acc(ig) += g.cwiseProduct(xhat).colwise().sum();
            if (t.wants(ia)) {
                const Mat& gamma = t.val(Var{ig});
                Mat dxh = g.array().rowwise() * gamma.row(0).array();
                Mat& ga = t.grad_acc(ia);
                for (Eigen::Index i = 0; i < g.rows(); ++i) {
                    const double mean_dxh = dxh.row(i).mean();
                    const double mean_dxh_xhat = dxh.row(i).cwiseProduct(xhat.row(i)).mean();
                    ga.row(i) += inv_std(i) *
                                 (dxh.row(i).array() - mean_dxh - xhat.row(i).array() * mean_dxh_xhat)
                                     .matrix();
                }
            }
        };
        return Var{id};
    }

    Var concat_cols(const std::vector<Var>& parts) {
        Eigen::Index m = val(parts.front()).rows(), total = 0;
        for (const auto& p : parts) total += val(p).cols();
        Mat v(m, total);
        std::vector<std::pair<int, int>> spans;  // (id, first col)
        Eigen::Index at = 0;
        for (const auto& p : parts) {
            v.middleCols(at, val(p).cols()) = val(p);
            spans.emplace_back(p.id, static_cast<int>(at));
            at += val(p).cols();
        }
        Node n;
        n.val = std::move(v);
        const int id = push(std::move(n));
        for (const auto& p : parts) attach(id, {p.id});
        nodes_[static_cast<std::size_t>(id)].back = [id, spans = std::move(spans)](Tape& t) {
            const Mat& g = t.grad_ref(id);
            for (const auto& [pid, c0] : spans) {
                if (!t.wants(pid)) continue;
                Mat& gp = t.grad_acc(pid);
                gp += g.middleCols(c0, gp.cols());
            }
        };
        return Var{id};
    }

    Var slice_cols(Var a, int c0, int width) {
        Node n;
        n.val = val(a).middleCols(c0, width);
        const int id = push(std::move(n));
        attach(id, {a.id});
        nodes_[static_cast<std::size_t>(id)].back = [id, ia = a.id, c0, width](Tape& t) {
            if (t.wants(ia)) t.grad_acc(ia).middleCols(c0, width) += t.grad_ref(id);
        };
        return Var{id};
    }

    Var concat_rows(const std::vector<Var>& parts) {
        Eigen::Index d = val(parts.front()).cols(), total = 0;
        for (const auto& p : parts) total += val(p).rows();
        Mat v(total, d);
        std::vector<std::pair<int, int>> spans;
        Eigen::Index at = 0;
        for (const auto& p : parts) {
            v.middleRows(at, val(p).rows()) = val(p);
            spans.emplace_back(p.id, static_cast<int>(at));
            at += val(p).rows();
        }
        Node n;
        n.val = std::move(v);
        const int id = push(std::move(n));
        for (const auto& p : parts) attach(id, {p.id});
        nodes_[static_cast<std::size_t>(id)].back = [id, spans = std::move(spans)](Tape& t) {
            const Mat& g = t.grad_ref(id);
            for (const auto& [pid, r0] : spans) {
                if (!t.wants(pid)) continue;
                Mat& gp = t.grad_acc(pid);
                gp += g.middleRows(r0, gp.rows());
            }
        };
        return Var{id};
    }

    // Row gather; repeated indices are allowed (backward scatter-adds).
    Var select_rows(Var a, std::vector<int> idx) {
        Mat v(static_cast<Eigen::Index>(idx.size()), val(a).cols());
        for (std::size_t k = 0; k < idx.size(); ++k) v.row(static_cast<Eigen::Index>(k)) = val(a).row(idx[k]);
        Node n;
        n.val = std::move(v);
        const int id = push(std::move(n));
        attach(id, {a.id});
        nodes_[static_cast<std::size_t>(id)].back = [id, ia = a.id, idx = std::move(idx)](Tape& t) {
            if (!t.wants(ia)) return;
            const Mat& g = t.grad_ref(id);
            Mat& ga = t.grad_acc(ia);
            for (std::size_t k = 0; k < idx.size(); ++k)
                ga.row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
        };
        return Var{id};
    }

    // Column mean over rows -> [1 x n].
    Var mean_rows(Var a) {
        const double m = static_cast<double>(val(a).rows());
        Node n;
        n.val = val(a).colwise().sum() / m;
        return unary(std::move(n), a, [m](Tape& t, int id, int ia) {
            if (!t.wants(ia)) return;
            const Mat& g = t.grad_ref(id);
            Mat& ga = t.grad_acc(ia);
            ga += (Mat::Ones(ga.rows(), 1) * g.row(0)) / m;
        });
    }

    // Pointer-generator mixture over the extended vocabulary:
    //   y[:, :V]        = p_gen .* p_vocab
    //   y[:, id(k)]    += (1 - p_gen) .* attn[:, k]   for each source slot k
    Var mixture_with_copy(Var p_vocab, Var p_gen, Var attn, std::vector<int> slot_ids, int v_ext) {
        const Mat& pg = val(p_vocab);
        const Mat& gate = val(p_gen);
        const Mat& at = val(attn);
        const Eigen::Index m = pg.rows();
        const int v_base = static_cast<int>(pg.cols());
        Mat y = Mat::Zero(m, v_ext);
        for (Eigen::Index i = 0; i < m; ++i) {
            y.row(i).head(v_base) = gate(i, 0) * pg.row(i);
            for (std::size_t k = 0; k < slot_ids.size(); ++k)
                y(i, slot_ids[k]) += (1.0 - gate(i, 0)) * at(i, static_cast<Eigen::Index>(k));
        }
        Node n;
        n.val = std::move(y);
        const int id = push(std::move(n));
        attach(id, {p_vocab.id, p_gen.id, attn.id});
        nodes_[static_cast<std::size_t>(id)].back = [id, ipv = p_vocab.id, ipg = p_gen.id,
                                                     iat = attn.id, slot_ids = std::move(slot_ids),
                                                     v_base](Tape& t) {
            const Mat& g = t.grad_ref(id);
            const Mat& pg = t.val(Var{ipv});
            const Mat& gate = t.val(Var{ipg});
            const Mat& at = t.val(Var{iat});
            for (Eigen::Index i = 0; i < g.rows(); ++i) {
                if (t.wants(ipv)) t.grad_acc(ipv).row(i) += gate(i, 0) * g.row(i).head(v_base);
                double dgate = g.row(i).head(v_base).dot(pg.row(i));
                for (std::size_t k = 0; k < slot_ids.size(); ++k) {
                    const double gk = g(i, slot_ids[k]);
                    if (t.wants(iat)) t.grad_acc(iat)(i, static_cast<Eigen::Index>(k)) += (1.0 - gate(i, 0)) * gk;
                    dgate -= gk * at(i, static_cast<Eigen::Index>(k));
                }
                if (t.wants(ipg)) t.grad_acc(ipg)(i, 0) += dgate;
            }
        };
        return Var{id};
    }

    // Mean label-smoothed negative log likelihood over rows of a probability
    // matrix. Mass 1-eps on the gold id, eps spread over the other BASE
    // vocabulary ids only; extended ids never receive smoothing mass.
    Var nll_smoothed(Var probs, std::vector<int> gold, double eps, int v_base) {
        const Mat& p = val(probs);
        const Eigen::Index m = p.rows();
        if (static_cast<Eigen::Index>(gold.size()) != m)
            throw DataError("nll_smoothed: one gold id per row required");
        for (int g : gold)
            if (g < 0 || g >= static_cast<int>(p.cols()))
                throw DataError("nll_smoothed: gold id " + std::to_string(g) + " out of range (V_ext=" +
                                std::to_string(p.cols()) + ")");
        if (eps > 0.0 && v_base < 2) throw DataError("nll_smoothed: smoothing needs v_base >= 2");
        constexpr double floor = 1e-12;
        const double off_mass = (v_base > 1) ? eps / static_cast<double>(v_base - 1) : 0.0;
        double total = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            double row_loss = -(1.0 - eps) * std::log(std::max(p(i, gold[static_cast<std::size_t>(i)]), floor));
            if (eps > 0.0) {
                for (int j = 0; j < v_base; ++j) {
                    if (j == gold[static_cast<std::size_t>(i)]) continue;
                    row_loss -= off_mass * std::log(std::max(p(i, j), floor));
                }
            }
            total += row_loss;
        }
        Node n;
        n.val = Mat::Constant(1, 1, total / static_cast<double>(m));
        const int id = push(std::move(n));
        attach(id, {probs.id});
        nodes_[static_cast<std::size_t>(id)].back = [id, ip = probs.id, gold = std::move(gold), eps,
                                                     v_base, off_mass](Tape& t) {
            if (!t.wants(ip)) return;
            constexpr double floor = 1e-12;
            const double gscale = t.grad_ref(id)(0, 0);
            const Mat& p = t.val(Var{ip});
            Mat& gp = t.grad_acc(ip);
            const double inv_m = 1.0 / static_cast<double>(p.rows());
            for (Eigen::Index i = 0; i < p.rows(); ++i) {
                const int g = gold[static_cast<std::size_t>(i)];
                if (p(i, g) > floor) gp(i, g) -= gscale * inv_m * (1.0 - eps) / p(i, g);
                if (eps > 0.0) {
                    for (int j = 0; j < v_base; ++j) {
                        if (j == g || p(i, j) <= floor) continue;
                        gp(i, j) -= gscale * inv_m * off_mass / p(i, j);
                    }
                }
            }
        };
        return Var{id};
    }

    // Seeds d(root)/d(root) = seed and runs all adjoints in reverse order.
    void backward(Var root, double seed = 1.0) {
        if (rows(root) != 1 || cols(root) != 1)
            throw DataError("backward: root must be a 1x1 scalar");
        grad_acc(root.id)(0, 0) += seed;
        for (int i = root.id; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.grad_alloc && n.back) n.back(*this);
        }
    }

    bool wants(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

    Mat& grad_acc(int id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.grad_alloc) {
            n.grad = Mat::Zero(n.val.rows(), n.val.cols());
            n.grad_alloc = true;
        }
        return n.grad;
    }

    const Mat& grad_ref(int id) const {
        static const Mat empty;
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        return n.grad_alloc ? n.grad : empty;
    }

    bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad_alloc; }

private:
    struct Node {
        Mat val;
        Mat grad;
        bool needs_grad = false;
        bool grad_alloc = false;
        std::function<void(Tape&)> back;
    };

    int push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    void attach(int id, std::initializer_list<int> parents) {
        for (int p : parents)
            if (nodes_[static_cast<std::size_t>(p)].needs_grad)
                nodes_[static_cast<std::size_t>(id)].needs_grad = true;
    }

    template <typename F>
    Var unary(Node n, Var a, F&& back) {
        const int id = push(std::move(n));
        attach(id, {a.id});
        nodes_[static_cast<std::size_t>(id)].back = [id, ia = a.id, back](Tape& t) { back(t, id, ia); };
        return Var{id};
    }

    template <typename F>
    Var unary_binary(Node n, Var a, Var b, F&& back) {
        const int id = push(std::move(n));
        attach(id, {a.id, b.id});
        nodes_[static_cast<std::size_t>(id)].back = [id, ia = a.id, ib = b.id, back](Tape& t) {
            back(t, id, ia, ib);
        };
        return Var{id};
    }

    std::vector<Node> nodes_;
};

}  // namespace kgsum::ad
