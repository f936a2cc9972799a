#include "gta/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace gta {

Preprocessor::Preprocessor(const TrainingSample& sample) {
    const int n = sample.n();
    const int d = sample.d_in();
    const int m = sample.d_out();

    columns_.resize(static_cast<std::size_t>(d));
    int offset = 0;
    for (int j = 0; j < d; ++j) {
        Column& col = columns_[static_cast<std::size_t>(j)];
        col.offset = offset;
        if (sample.is_categorical(j)) {
            col.categorical = true;
            std::set<double> labels(sample.inputs.col(j).begin(), sample.inputs.col(j).end());
            col.labels.assign(labels.begin(), labels.end());
            offset += static_cast<int>(col.labels.size());
        } else {
            col.mean = sample.inputs.col(j).mean();
            const double var =
                (sample.inputs.col(j).array() - col.mean).square().sum() / std::max(1, n);
            col.scale = var > 0.0 ? std::sqrt(var) : 1.0;
            offset += 1;
        }
    }
    d_enc_ = offset;

    out_mean_.resize(static_cast<std::size_t>(m));
    out_scale_.resize(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        out_mean_[static_cast<std::size_t>(k)] = sample.outputs.col(k).mean();
        const double var = (sample.outputs.col(k).array() - out_mean_[static_cast<std::size_t>(k)])
                               .square()
                               .sum() /
                           std::max(1, n);
        out_scale_[static_cast<std::size_t>(k)] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
}

Eigen::VectorXd Preprocessor::encode(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != d_in())
        throw DataError("input has " + std::to_string(x.size()) + " components, expected " +
                        std::to_string(d_in()));
    Eigen::VectorXd u = Eigen::VectorXd::Zero(d_enc_);
    for (int j = 0; j < d_in(); ++j) {
        const Column& col = columns_[static_cast<std::size_t>(j)];
        if (col.categorical) {
            auto it = std::lower_bound(col.labels.begin(), col.labels.end(), x[j]);
            if (it == col.labels.end() || *it != x[j])
                throw DataError("unseen categorical label in column " + std::to_string(j + 1));
            u[col.offset + static_cast<int>(it - col.labels.begin())] = 1.0;
        } else {
            u[col.offset] = (x[j] - col.mean) / col.scale;
        }
    }
    return u;
}

Eigen::MatrixXd Preprocessor::encode_rows(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
    Eigen::MatrixXd U(X.rows(), d_enc_);
    for (Eigen::Index i = 0; i < X.rows(); ++i) U.row(i) = encode(X.row(i).transpose()).transpose();
    return U;
}

Eigen::MatrixXd Preprocessor::standardize_outputs(
    const Eigen::Ref<const Eigen::MatrixXd>& Y) const {
    Eigen::MatrixXd S(Y.rows(), Y.cols());
    for (Eigen::Index k = 0; k < Y.cols(); ++k)
        S.col(k) = (Y.col(k).array() - out_mean_[static_cast<std::size_t>(k)]) /
                   out_scale_[static_cast<std::size_t>(k)];
    return S;
}

Eigen::VectorXd Preprocessor::unstandardize_output(
    const Eigen::Ref<const Eigen::VectorXd>& y) const {
    Eigen::VectorXd out(y.size());
    for (Eigen::Index k = 0; k < y.size(); ++k)
        out[k] = out_mean_[static_cast<std::size_t>(k)] +
                 out_scale_[static_cast<std::size_t>(k)] * y[k];
    return out;
}

Eigen::MatrixXd Preprocessor::chain_jacobian(
    const Eigen::Ref<const Eigen::MatrixXd>& jac_encoded) const {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(jac_encoded.rows(), d_in());
    for (int j = 0; j < d_in(); ++j) {
        const Column& col = columns_[static_cast<std::size_t>(j)];
        if (col.categorical) continue;  // derivative w.r.t. labels is defined as zero
        jac.col(j) = jac_encoded.col(col.offset) / col.scale;
    }
    for (Eigen::Index k = 0; k < jac.rows(); ++k)
        jac.row(k) *= out_scale_[static_cast<std::size_t>(k)];
    return jac;
}

Eigen::VectorXd Preprocessor::unscale_ae(const Eigen::Ref<const Eigen::VectorXd>& ae) const {
    Eigen::VectorXd out(ae.size());
    for (Eigen::Index k = 0; k < ae.size(); ++k)
        out[k] = ae[k] * out_scale_[static_cast<std::size_t>(k)];
    return out;
}

bool Preprocessor::any_categorical() const {
    for (const auto& c : columns_)
        if (c.categorical) return true;
    return false;
}

nlohmann::json Preprocessor::to_json() const {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : columns_) {
        cols.push_back({{"categorical", c.categorical},
                        {"mean", c.mean},
                        {"scale", c.scale},
                        {"labels", c.labels},
                        {"offset", c.offset}});
    }
    return {{"columns", cols},
            {"out_mean", out_mean_},
            {"out_scale", out_scale_},
            {"d_enc", d_enc_}};
}

Preprocessor Preprocessor::from_json(const nlohmann::json& j) {
    Preprocessor pp;
    for (const auto& c : j.at("columns")) {
        Column col;
        col.categorical = c.at("categorical").get<bool>();
        col.mean = c.at("mean").get<double>();
        col.scale = c.at("scale").get<double>();
        col.labels = c.at("labels").get<std::vector<double>>();
        col.offset = c.at("offset").get<int>();
        pp.columns_.push_back(std::move(col));
    }
    pp.out_mean_ = j.at("out_mean").get<std::vector<double>>();
    pp.out_scale_ = j.at("out_scale").get<std::vector<double>>();
    pp.d_enc_ = j.at("d_enc").get<int>();
    return pp;
}

}  // namespace gta
