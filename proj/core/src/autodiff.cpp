#include "semcom/autodiff.hpp"

#include <cmath>
#include <memory>

namespace semcom::nn {

namespace {
constexpr double kInvLn2 = 1.4426950408889634;  // 1/ln(2)
}

Graph::NodeId Graph::push(Mat value, std::function<void(Graph&)> back) {
    Node n;
    n.value = std::move(value);
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

Graph::NodeId Graph::constant(Mat value) { return push(std::move(value), {}); }

Graph::NodeId Graph::param(const Mat& value) { return push(value, {}); }

Graph::NodeId Graph::matmul(NodeId a, NodeId b) {
    Mat v = nodes_[a].value * nodes_[b].value;
    NodeId id = push(std::move(v), nullptr);
    nodes_[id].back = [a, b, id](Graph& g) {
        const Mat& dc = g.nodes_[id].grad;
        g.grad_mut(a).noalias() += dc * g.nodes_[b].value.transpose();
        g.grad_mut(b).noalias() += g.nodes_[a].value.transpose() * dc;
    };
    return id;
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
    NodeId id = push(nodes_[a].value + nodes_[b].value, nullptr);
    nodes_[id].back = [a, b, id](Graph& g) {
        g.grad_mut(a) += g.nodes_[id].grad;
        g.grad_mut(b) += g.nodes_[id].grad;
    };
    return id;
}

Graph::NodeId Graph::sub(NodeId a, NodeId b) {
    NodeId id = push(nodes_[a].value - nodes_[b].value, nullptr);
    nodes_[id].back = [a, b, id](Graph& g) {
        g.grad_mut(a) += g.nodes_[id].grad;
        g.grad_mut(b) -= g.nodes_[id].grad;
    };
    return id;
}

Graph::NodeId Graph::mul(NodeId a, NodeId b) {
    NodeId id = push(nodes_[a].value.cwiseProduct(nodes_[b].value), nullptr);
    nodes_[id].back = [a, b, id](Graph& g) {
        g.grad_mut(a) += g.nodes_[id].grad.cwiseProduct(g.nodes_[b].value);
        g.grad_mut(b) += g.nodes_[id].grad.cwiseProduct(g.nodes_[a].value);
    };
    return id;
}

Graph::NodeId Graph::add_colvec(NodeId a, NodeId bias) {
    Mat v = nodes_[a].value.colwise() + Eigen::VectorXd(nodes_[bias].value.col(0));
    NodeId id = push(std::move(v), nullptr);
    nodes_[id].back = [a, bias, id](Graph& g) {
        const Mat& dc = g.nodes_[id].grad;
        g.grad_mut(a) += dc;
        g.grad_mut(bias) += dc.rowwise().sum();
    };
    return id;
}

Graph::NodeId Graph::scale(NodeId a, double s) {
    NodeId id = push(nodes_[a].value * s, nullptr);
    nodes_[id].back = [a, s, id](Graph& g) { g.grad_mut(a) += s * g.nodes_[id].grad; };
    return id;
}

Graph::NodeId Graph::add_scalar(NodeId a, double s) {
    NodeId id = push(nodes_[a].value.array() + s, nullptr);
    nodes_[id].back = [a, id](Graph& g) { g.grad_mut(a) += g.nodes_[id].grad; };
    return id;
}

Graph::NodeId Graph::relu(NodeId a) {
    NodeId id = push(nodes_[a].value.cwiseMax(0.0), nullptr);
    nodes_[id].back = [a, id](Graph& g) {
        g.grad_mut(a).array() +=
            g.nodes_[id].grad.array() * (g.nodes_[a].value.array() > 0.0).cast<double>();
    };
    return id;
}

Graph::NodeId Graph::tanh(NodeId a) {
    NodeId id = push(nodes_[a].value.array().tanh(), nullptr);
    nodes_[id].back = [a, id](Graph& g) {
        g.grad_mut(a).array() +=
            g.nodes_[id].grad.array() * (1.0 - g.nodes_[id].value.array().square());
    };
    return id;
}

Graph::NodeId Graph::exp(NodeId a) {
    NodeId id = push(nodes_[a].value.array().exp(), nullptr);
    nodes_[id].back = [a, id](Graph& g) {
        g.grad_mut(a).array() += g.nodes_[id].grad.array() * g.nodes_[id].value.array();
    };
    return id;
}

Graph::NodeId Graph::square(NodeId a) {
    NodeId id = push(nodes_[a].value.array().square(), nullptr);
    nodes_[id].back = [a, id](Graph& g) {
        g.grad_mut(a).array() += 2.0 * g.nodes_[id].grad.array() * g.nodes_[a].value.array();
    };
    return id;
}

Graph::NodeId Graph::softmax_cols(NodeId a) {
    const Mat& x = nodes_[a].value;
    Mat v(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        Eigen::ArrayXd e = (x.col(j).array() - x.col(j).maxCoeff()).exp();
        v.col(j) = e / e.sum();
    }
    NodeId id = push(std::move(v), nullptr);
    nodes_[id].back = [a, id](Graph& g) {
        const Mat& y = g.nodes_[id].value;
        const Mat& dy = g.nodes_[id].grad;
        Mat& da = g.grad_mut(a);
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            const double dot = y.col(j).dot(dy.col(j));
            da.col(j).array() += y.col(j).array() * (dy.col(j).array() - dot);
        }
    };
    return id;
}

Graph::NodeId Graph::transpose(NodeId a) {
    NodeId id = push(nodes_[a].value.transpose(), nullptr);
    nodes_[id].back = [a, id](Graph& g) {
        g.grad_mut(a) += g.nodes_[id].grad.transpose();
    };
    return id;
}

Graph::NodeId Graph::reshape(NodeId a, Eigen::Index rows, Eigen::Index cols) {
    const Mat& x = nodes_[a].value;
    if (rows * cols != x.size()) throw ValidationError("reshape: size mismatch");
    Mat v = Eigen::Map<const Mat>(x.data(), rows, cols);
    NodeId id = push(std::move(v), nullptr);
    nodes_[id].back = [a, id](Graph& g) {
        const Mat& dy = g.nodes_[id].grad;
        Mat& da = g.grad_mut(a);
        da += Eigen::Map<const Mat>(dy.data(), da.rows(), da.cols());
    };
    return id;
}

Graph::NodeId Graph::slice_rows(NodeId a, Eigen::Index row0, Eigen::Index nrows) {
    NodeId id = push(nodes_[a].value.middleRows(row0, nrows), nullptr);
    nodes_[id].back = [a, row0, nrows, id](Graph& g) {
        g.grad_mut(a).middleRows(row0, nrows) += g.nodes_[id].grad;
    };
    return id;
}

Graph::NodeId Graph::sum_all(NodeId a) {
    Mat v(1, 1);
    v(0, 0) = nodes_[a].value.sum();
    NodeId id = push(std::move(v), nullptr);
    nodes_[id].back = [a, id](Graph& g) {
        g.grad_mut(a).array() += g.nodes_[id].grad(0, 0);
    };
    return id;
}

Graph::NodeId Graph::mean_all(NodeId a) {
    const double n = static_cast<double>(nodes_[a].value.size());
    Mat v(1, 1);
    v(0, 0) = nodes_[a].value.sum() / n;
    NodeId id = push(std::move(v), nullptr);
    nodes_[id].back = [a, n, id](Graph& g) {
        g.grad_mut(a).array() += g.nodes_[id].grad(0, 0) / n;
    };
    return id;
}

Graph::NodeId Graph::cross_entropy_bits(NodeId logits, const std::vector<int>& labels) {
    const Mat& x = nodes_[logits].value;
    const Eigen::Index n = x.cols();
    if (static_cast<Eigen::Index>(labels.size()) != n)
        throw ValidationError("cross_entropy_bits: label count mismatch");
    // Cache the softmax for the backward pass.
    auto probs = std::make_shared<Mat>(x.rows(), n);
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double mx = x.col(j).maxCoeff();
        Eigen::ArrayXd e = (x.col(j).array() - mx).exp();
        const double z = e.sum();
        probs->col(j) = e / z;
        total += -(x(labels[j], j) - mx - std::log(z));
    }
    Mat v(1, 1);
    v(0, 0) = total / static_cast<double>(n) * kInvLn2;
    NodeId id = push(std::move(v), nullptr);
    nodes_[id].back = [logits, labels, probs, n, id](Graph& g) {
        const double go = g.nodes_[id].grad(0, 0) * kInvLn2 / static_cast<double>(n);
        Mat& da = g.grad_mut(logits);
        da += go * (*probs);
        for (Eigen::Index j = 0; j < n; ++j) da(labels[j], j) -= go;
    };
    return id;
}

Graph::NodeId Graph::gaussian_kl_bits(NodeId mu, NodeId log_std) {
    const Mat& m = nodes_[mu].value;
    const Mat& ls = nodes_[log_std].value;
    if (m.rows() != ls.rows() || m.cols() != ls.cols())
        throw ValidationError("gaussian_kl_bits: shape mismatch");
    const double n = static_cast<double>(m.cols());
    // Per entry, in nats: 0.5*(mu^2 + sigma^2 - 1) - log_std.
    Eigen::ArrayXXd var = (2.0 * ls.array()).exp();
    const double nats = (0.5 * (m.array().square() + var - 1.0) - ls.array()).sum() / n;
    Mat v(1, 1);
    v(0, 0) = nats * kInvLn2;
    auto var_cache = std::make_shared<Eigen::ArrayXXd>(std::move(var));
    NodeId id = push(std::move(v), nullptr);
    nodes_[id].back = [mu, log_std, var_cache, n, id](Graph& g) {
        const double go = g.nodes_[id].grad(0, 0) * kInvLn2 / n;
        g.grad_mut(mu).array() += go * g.nodes_[mu].value.array();
        g.grad_mut(log_std).array() += go * (*var_cache - 1.0);
    };
    return id;
}

Graph::NodeId Graph::unit_power_cols(NodeId a, Eigen::Index complex_dim) {
    const Mat& x = nodes_[a].value;
    const double target = static_cast<double>(complex_dim);
    Eigen::ArrayXd q = x.colwise().squaredNorm().array() + 1e-12;
    Eigen::ArrayXd s = (target / q).sqrt();
    Mat v = x.array().rowwise() * s.transpose();
    auto cache = std::make_shared<std::pair<Eigen::ArrayXd, Eigen::ArrayXd>>(std::move(q),
                                                                             std::move(s));
    NodeId id = push(std::move(v), nullptr);
    nodes_[id].back = [a, cache, id](Graph& g) {
        const Mat& x2 = g.nodes_[a].value;
        const Mat& dy = g.nodes_[id].grad;
        const auto& [q2, s2] = *cache;
        Mat& da = g.grad_mut(a);
        for (Eigen::Index j = 0; j < x2.cols(); ++j) {
            // y = s*x with s = sqrt(t/q), q = |x|^2:
            // dL/dx = s*dy - (dy.x) * s/q * x
            const double dot = dy.col(j).dot(x2.col(j));
            da.col(j) += s2(j) * dy.col(j) - (dot * s2(j) / q2(j)) * x2.col(j);
        }
    };
    return id;
}

Graph::NodeId Graph::soft_assignment(NodeId a, const Mat& points, double scale) {
    const Mat& y = nodes_[a].value;
    if (y.rows() != 2 || points.rows() != 2)
        throw ValidationError("soft_assignment: expects 2 x N symbols and 2 x K points");
    if (!(scale > 0.0)) throw ValidationError("soft_assignment: scale must be positive");
    const Eigen::Index k = points.cols();
    const Eigen::Index n = y.cols();
    Mat u(k, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < k; ++i) {
            const double dr = y(0, j) - points(0, i);
            const double di = y(1, j) - points(1, i);
            u(i, j) = -(dr * dr + di * di) / scale;
        }
    }
    Mat w(k, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::ArrayXd e = (u.col(j).array() - u.col(j).maxCoeff()).exp();
        w.col(j) = e / e.sum();
    }
    auto pts = std::make_shared<Mat>(points);
    NodeId id = push(std::move(w), nullptr);
    nodes_[id].back = [a, pts, scale, id](Graph& g) {
        const Mat& wv = g.nodes_[id].value;
        const Mat& dw = g.nodes_[id].grad;
        const Mat& yv = g.nodes_[a].value;
        Mat& da = g.grad_mut(a);
        const Eigen::Index kk = pts->cols();
        for (Eigen::Index j = 0; j < yv.cols(); ++j) {
            const double dot = wv.col(j).dot(dw.col(j));
            for (Eigen::Index i = 0; i < kk; ++i) {
                const double du = wv(i, j) * (dw(i, j) - dot);  // softmax backward
                const double c = 2.0 / scale * du;
                da(0, j) += c * ((*pts)(0, i) - yv(0, j));
                da(1, j) += c * ((*pts)(1, i) - yv(1, j));
            }
        }
    };
    return id;
}

Graph::NodeId Graph::straight_through(NodeId a, Mat hard) {
    if (hard.rows() != nodes_[a].value.rows() || hard.cols() != nodes_[a].value.cols())
        throw ValidationError("straight_through: shape mismatch");
    NodeId id = push(std::move(hard), nullptr);
    nodes_[id].back = [a, id](Graph& g) { g.grad_mut(a) += g.nodes_[id].grad; };
    return id;
}

void Graph::backward(NodeId root) {
    if (nodes_[root].value.size() != 1)
        throw ValidationError("backward: root must be scalar");
    nodes_[root].grad(0, 0) = 1.0;
    for (NodeId i = root; i >= 0; --i) {
        if (nodes_[i].back) nodes_[i].back(*this);
    }
}

void Graph::check_finite(NodeId id, const char* what) const {
    if (!nodes_[id].value.allFinite())
        throw NumericError(std::string("non-finite values in ") + what);
}

void Adam::step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads) {
    if (params.size() != grads.size())
        throw ValidationError("Adam::step: parameter/gradient count mismatch");
    if (m_.empty()) {
        for (const Mat* p : params) {
            m_.emplace_back(Mat::Zero(p->rows(), p->cols()));
            v_.emplace_back(Mat::Zero(p->rows(), p->cols()));
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Mat& g = *grads[i];
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
        params[i]->array() -= lr_ * (m_[i].array() / bc1) /
                              ((v_[i].array() / bc2).sqrt() + eps_);
    }
}

}  // namespace semcom::nn
