#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <memory>
#include <string>

#include "gta/preprocess.hpp"
#include "gta/types.hpp"

namespace gta {

struct Capabilities {
    bool gradient = false;  // analytic Jacobian available
    bool accuracy = false;  // pointwise accuracy evaluation available
    bool smooth = false;    // smoothing operator applicable
};

/// Technique-specific trained core. Works entirely in the encoded,
/// standardized space produced by Preprocessor; the SurrogateModel wrapper
/// owns raw-coordinate conversion.
class TechniqueModel {
public:
    virtual ~TechniqueModel() = default;

    virtual Technique technique() const = 0;
    virtual int input_dim() const = 0;   // encoded
    virtual int output_dim() const = 0;  // standardized outputs
    virtual Capabilities capabilities() const = 0;

    virtual Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& u) const = 0;

    /// d_out x d_enc Jacobian; throws CapabilityError when !capabilities().gradient.
    virtual Eigen::MatrixXd jacobian(const Eigen::Ref<const Eigen::VectorXd>& u) const;

    /// Pointwise accuracy estimate (standardized units); throws when unsupported.
    virtual Eigen::VectorXd accuracy(const Eigen::Ref<const Eigen::VectorXd>& u) const;

    /// New core with additional regularization strength s in [0,1]; s=0 is an
    /// exact no-op. Throws CapabilityError when !capabilities().smooth.
    virtual std::unique_ptr<TechniqueModel> resmoothed(double s) const;

    virtual nlohmann::json params_json() const = 0;
};

struct ModelMeta {
    int n_train = 0;
    double train_seconds = 0.0;
    Eigen::VectorXd bbox_lo;  // raw-input training bounding box
    Eigen::VectorXd bbox_hi;
    std::vector<std::string> warnings;  // recorded during training
};

/// The uniform trained-model artifact: immutable, shareable across threads,
/// deterministic predict/gradient/AE given the stored parameters.
class SurrogateModel {
public:
    SurrogateModel() = default;
    SurrogateModel(Preprocessor pp, std::shared_ptr<const TechniqueModel> core, ModelOptions options,
                   ModelMeta meta);

    Technique technique() const { return core_->technique(); }
    int d_in() const { return pp_.d_in(); }
    int d_out() const { return pp_.d_out(); }
    bool has_gradient() const { return core_->capabilities().gradient; }
    bool has_ae() const { return core_->capabilities().accuracy; }
    bool is_smooth() const { return core_->capabilities().smooth; }

    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    Eigen::MatrixXd predict_rows(const Eigen::Ref<const Eigen::MatrixXd>& X) const;

    /// d_out x d_in Jacobian in raw coordinates.
    Eigen::MatrixXd jacobian(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    /// Pointwise accuracy estimate in raw output units (one value per output).
    Eigen::VectorXd accuracy(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    /// predict + accuracy in one call.
    std::pair<Eigen::VectorXd, Eigen::VectorXd> predict_with_ae(
        const Eigen::Ref<const Eigen::VectorXd>& x) const;

    const ModelOptions& options() const { return options_; }
    const ModelMeta& meta() const { return meta_; }
    const Preprocessor& preprocessor() const { return pp_; }
    const TechniqueModel& core() const { return *core_; }

    nlohmann::json to_json() const;
    static SurrogateModel from_json(const nlohmann::json& j);

private:
    Preprocessor pp_;
    std::shared_ptr<const TechniqueModel> core_;
    ModelOptions options_;
    ModelMeta meta_;
};

/// Additional smoothing of a trained model; s=0 returns an identical
/// predictor, larger s trades fidelity for lower gradient energy.
SurrogateModel smooth_model(const SurrogateModel& model, double s);

/// Mean squared gradient norm over a seeded 1000-point probe of the training
/// bounding box. The reference roughness functional used by smoothing tests.
double roughness_probe(const SurrogateModel& model, std::uint64_t seed = 1234);

void save_model(const SurrogateModel& model, const std::string& path);
SurrogateModel load_model(const std::string& path);

nlohmann::json options_to_json(const ModelOptions& o);
ModelOptions options_from_json(const nlohmann::json& j);

}  // namespace gta
