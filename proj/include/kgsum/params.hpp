#pragma once

// Named trainable arrays with gradients and Adam moments. Creation order is
// deterministic, so a fixed seed reproduces the same initialization.

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgsum/autodiff.hpp"
#include "kgsum/util.hpp"

namespace kgsum {

struct Param {
    std::string name;
    ad::Mat value;
    ad::Mat grad;
    ad::Mat adam_m;
    ad::Mat adam_v;

    long long count() const { return static_cast<long long>(value.size()); }
    void zero_grad() { grad.setZero(); }
};

enum class Init { Zeros, Ones, Glorot, Embedding };

class ParameterStore {
public:
    explicit ParameterStore(std::uint64_t seed = 0) : rng_(mix_seed(seed, 0x9a7a)) {}

    Param& create(const std::string& name, int rows, int cols, Init init) {
        if (index_.count(name)) throw DataError("duplicate parameter name: " + name);
        auto p = std::make_unique<Param>();
        p->name = name;
        p->value.resize(rows, cols);
        switch (init) {
            case Init::Zeros:
                p->value.setZero();
                break;
            case Init::Ones:
                p->value.setOnes();
                break;
            case Init::Glorot: {
                const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
                for (Eigen::Index i = 0; i < p->value.rows(); ++i)
                    for (Eigen::Index j = 0; j < p->value.cols(); ++j)
                        p->value(i, j) = rng_.uniform(-limit, limit);
                break;
            }
            case Init::Embedding:
                for (Eigen::Index i = 0; i < p->value.rows(); ++i)
                    for (Eigen::Index j = 0; j < p->value.cols(); ++j)
                        p->value(i, j) = 0.1 * rng_.normal();
                break;
        }
        p->grad = ad::Mat::Zero(rows, cols);
        p->adam_m = ad::Mat::Zero(rows, cols);
        p->adam_v = ad::Mat::Zero(rows, cols);
        index_.emplace(name, params_.size());
        params_.push_back(std::move(p));
        return *params_.back();
    }

    Param* find(const std::string& name) {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : params_[it->second].get();
    }

    const Param* find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : params_[it->second].get();
    }

    std::size_t size() const { return params_.size(); }
    Param& at(std::size_t i) { return *params_[i]; }
    const Param& at(std::size_t i) const { return *params_[i]; }

    long long total_count() const {
        long long n = 0;
        for (const auto& p : params_) n += p->count();
        return n;
    }

    void zero_grads() {
        for (auto& p : params_) p->zero_grad();
    }

    double grad_norm() const {
        double sq = 0.0;
        for (const auto& p : params_) sq += p->grad.squaredNorm();
        return std::sqrt(sq);
    }

    void scale_grads(double s) {
        for (auto& p : params_) p->grad *= s;
    }

    // ---- serialization ------------------------------------------------

    static nlohmann::json matrix_to_json(const ad::Mat& m) {
        // Row-major little-endian doubles, base64; bit-exact round trip.
        std::vector<double> buf;
        buf.reserve(static_cast<std::size_t>(m.size()));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) buf.push_back(m(i, j));
        nlohmann::json j;
        j["rows"] = m.rows();
        j["cols"] = m.cols();
        j["data"] = base64::encode(buf.data(), buf.size() * sizeof(double));
        return j;
    }

    static ad::Mat matrix_from_json(const nlohmann::json& j) {
        const auto rows = j.at("rows").get<Eigen::Index>();
        const auto cols = j.at("cols").get<Eigen::Index>();
        const auto bytes = base64::decode(j.at("data").get<std::string>());
        if (bytes.size() != static_cast<std::size_t>(rows * cols) * sizeof(double))
            throw DataError("parameter blob has wrong size");
        ad::Mat m(rows, cols);
        const double* p = reinterpret_cast<const double*>(bytes.data());
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = *p++;
        return m;
    }

    nlohmann::json to_json(bool with_moments) const {
        nlohmann::json params = nlohmann::json::object();
        nlohmann::json moments = nlohmann::json::object();
        for (const auto& p : params_) {
            params[p->name] = matrix_to_json(p->value);
            if (with_moments) {
                moments[p->name] = {{"m", matrix_to_json(p->adam_m)}, {"v", matrix_to_json(p->adam_v)}};
            }
        }
        nlohmann::json out;
        out["params"] = std::move(params);
        if (with_moments) out["adam"] = std::move(moments);
        return out;
    }

    // Loads values (and moments when present) into already-created params.
    void load_json(const nlohmann::json& j) {
        const auto& params = j.at("params");
        for (auto& p : params_) {
            if (!params.contains(p->name))
                throw DataError("checkpoint missing parameter '" + p->name + "'");
            ad::Mat v = matrix_from_json(params.at(p->name));
            if (v.rows() != p->value.rows() || v.cols() != p->value.cols())
                throw DataError("checkpoint parameter '" + p->name + "' has mismatched shape");
            p->value = std::move(v);
        }
        if (params.size() != params_.size())
            throw DataError("checkpoint contains unexpected parameters");
        if (j.contains("adam")) {
            const auto& moments = j.at("adam");
            for (auto& p : params_) {
                if (!moments.contains(p->name)) continue;
                p->adam_m = matrix_from_json(moments.at(p->name).at("m"));
                p->adam_v = matrix_from_json(moments.at(p->name).at("v"));
            }
        }
    }

private:
    Rng rng_;
    std::vector<std::unique_ptr<Param>> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Tape leaf for a parameter: gradients accumulate into the store.
inline ad::Var use(ad::Tape& t, Param& p) { return t.leaf(p.value, &p.grad); }

}  // namespace kgsum
