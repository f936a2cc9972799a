#pragma once

#include <Eigen/Dense>
#include <vector>

#include <json.hpp>

#include "gta/types.hpp"

namespace gta {

/// Input/output conditioning shared by every trainer: continuous input
/// columns are mapped to zero mean / unit variance, categorical columns are
/// one-hot expanded against the label set seen at training time, and outputs
/// are standardized per component. Models store this object and apply it
/// transparently, so predict/gradient always speak raw coordinates.
class Preprocessor {
public:
    Preprocessor() = default;
    Preprocessor(const TrainingSample& sample);

    int d_in() const { return static_cast<int>(columns_.size()); }
    int d_enc() const { return d_enc_; }
    int d_out() const { return static_cast<int>(out_mean_.size()); }

    /// Raw input row -> standardized/one-hot encoded vector.
    Eigen::VectorXd encode(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    Eigen::MatrixXd encode_rows(const Eigen::Ref<const Eigen::MatrixXd>& X) const;

    Eigen::MatrixXd standardize_outputs(const Eigen::Ref<const Eigen::MatrixXd>& Y) const;
    Eigen::VectorXd unstandardize_output(const Eigen::Ref<const Eigen::VectorXd>& y) const;

    double output_mean(int k) const { return out_mean_[static_cast<std::size_t>(k)]; }
    double output_scale(int k) const { return out_scale_[static_cast<std::size_t>(k)]; }

    /// Chain rule from a Jacobian in encoded coordinates (d_out x d_enc,
    /// standardized outputs) to raw coordinates (d_out x d_in). Categorical
    /// columns get zero derivative.
    Eigen::MatrixXd chain_jacobian(const Eigen::Ref<const Eigen::MatrixXd>& jac_encoded) const;

    /// Scale a standardized-output AE vector back to raw output units.
    Eigen::VectorXd unscale_ae(const Eigen::Ref<const Eigen::VectorXd>& ae) const;

    bool any_categorical() const;
    const std::vector<double>& categories(int col) const {
        return columns_[static_cast<std::size_t>(col)].labels;
    }

    nlohmann::json to_json() const;
    static Preprocessor from_json(const nlohmann::json& j);

private:
    struct Column {
        bool categorical = false;
        double mean = 0.0;
        double scale = 1.0;
        std::vector<double> labels;  // sorted distinct values, categorical only
        int offset = 0;              // first encoded index for this column
    };

    std::vector<Column> columns_;
    std::vector<double> out_mean_;
    std::vector<double> out_scale_;
    int d_enc_ = 0;
};

}  // namespace gta
