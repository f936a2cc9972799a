#include "gta/model.hpp"

#include <fstream>

#include "gta/detail/registry.hpp"

namespace gta {

Eigen::MatrixXd TechniqueModel::jacobian(const Eigen::Ref<const Eigen::VectorXd>&) const {
    throw CapabilityError("technique has no gradient: " + technique_name(technique()));
}

Eigen::VectorXd TechniqueModel::accuracy(const Eigen::Ref<const Eigen::VectorXd>&) const {
    throw CapabilityError("technique has no accuracy evaluation: " +
                          technique_name(technique()));
}

std::unique_ptr<TechniqueModel> TechniqueModel::resmoothed(double) const {
    throw CapabilityError("technique does not support smoothing: " +
                          technique_name(technique()));
}

SurrogateModel::SurrogateModel(Preprocessor pp, std::shared_ptr<const TechniqueModel> core,
                               ModelOptions options, ModelMeta meta)
    : pp_(std::move(pp)), core_(std::move(core)), options_(std::move(options)),
      meta_(std::move(meta)) {}

Eigen::VectorXd SurrogateModel::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return pp_.unstandardize_output(core_->predict(pp_.encode(x)));
}

Eigen::MatrixXd SurrogateModel::predict_rows(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
    Eigen::MatrixXd out(X.rows(), d_out());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out.row(i) = predict(X.row(i).transpose());
    return out;
}

Eigen::MatrixXd SurrogateModel::jacobian(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return pp_.chain_jacobian(core_->jacobian(pp_.encode(x)));
}

Eigen::VectorXd SurrogateModel::accuracy(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return pp_.unscale_ae(core_->accuracy(pp_.encode(x)));
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> SurrogateModel::predict_with_ae(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Eigen::VectorXd u = pp_.encode(x);
    return {pp_.unstandardize_output(core_->predict(u)), pp_.unscale_ae(core_->accuracy(u))};
}

SurrogateModel smooth_model(const SurrogateModel& model, double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("smoothing must lie in [0,1]");
    if (!model.is_smooth())
        throw CapabilityError("technique does not support smoothing: " +
                              technique_name(model.technique()));
    if (s == 0.0) return model;
    std::shared_ptr<const TechniqueModel> core(model.core().resmoothed(s));
    return SurrogateModel(model.preprocessor(), std::move(core), model.options(), model.meta());
}

double roughness_probe(const SurrogateModel& model, std::uint64_t seed) {
    const auto& meta = model.meta();
    Rng rng(seed);
    const int n_probe = 1000;
    double acc = 0.0;
    Eigen::VectorXd x(model.d_in());
    for (int i = 0; i < n_probe; ++i) {
        for (int j = 0; j < model.d_in(); ++j) x[j] = rng.uniform(meta.bbox_lo[j], meta.bbox_hi[j]);
        acc += model.jacobian(x).squaredNorm();
    }
    return acc / n_probe;
}

nlohmann::json options_to_json(const ModelOptions& o) {
    nlohmann::json j{{"technique", choice_name(o.technique)},
                     {"exact_fit", o.exact_fit},
                     {"require_ae", o.require_ae},
                     {"require_linearity", o.require_linearity},
                     {"enable_tensor", o.enable_tensor},
                     {"smoothing", o.smoothing},
                     {"joint_outputs", o.joint_outputs},
                     {"accelerator", o.accelerator},
                     {"hints", std::vector<std::string>(o.hints.begin(), o.hints.end())},
                     {"seed", o.seed},
                     {"moa_max_parts", o.moa_max_parts},
                     {"moa_tau", o.moa_tau}};
    if (o.acceptable_quality) j["acceptable_quality"] = *o.acceptable_quality;
    return j;
}

ModelOptions options_from_json(const nlohmann::json& j) {
    ModelOptions o;
    o.technique = choice_from_name(j.value("technique", "auto"));
    o.exact_fit = j.value("exact_fit", false);
    o.require_ae = j.value("require_ae", false);
    o.require_linearity = j.value("require_linearity", false);
    o.enable_tensor = j.value("enable_tensor", true);
    o.smoothing = j.value("smoothing", 0.0);
    o.joint_outputs = j.value("joint_outputs", false);
    o.accelerator = j.value("accelerator", 1);
    for (const auto& h : j.value("hints", std::vector<std::string>{})) o.hints.insert(h);
    o.seed = j.value("seed", std::uint64_t{0});
    o.moa_max_parts = j.value("moa_max_parts", 5);
    o.moa_tau = j.value("moa_tau", 0.01);
    if (j.contains("acceptable_quality")) o.acceptable_quality = j["acceptable_quality"].get<double>();
    return o;
}

namespace {

constexpr int kFormatVersion = 1;

std::vector<double> to_vec(const Eigen::VectorXd& v) {
    return std::vector<double>(v.begin(), v.end());
}

Eigen::VectorXd from_vec(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json SurrogateModel::to_json() const {
    // Input standardization is exposed at top level per raw column; categorical
    // columns report the identity map and keep their label sets inside the
    // preprocess block.
    std::vector<double> mean(static_cast<std::size_t>(d_in()), 0.0);
    std::vector<double> scale(static_cast<std::size_t>(d_in()), 1.0);
    const nlohmann::json pp = pp_.to_json();
    for (int j = 0; j < d_in(); ++j) {
        const auto& col = pp.at("columns").at(static_cast<std::size_t>(j));
        if (!col.at("categorical").get<bool>()) {
            mean[static_cast<std::size_t>(j)] = col.at("mean").get<double>();
            scale[static_cast<std::size_t>(j)] = col.at("scale").get<double>();
        }
    }
    return {{"format_version", kFormatVersion},
            {"technique", technique_name(core_->technique())},
            {"d_in", d_in()},
            {"d_out", d_out()},
            {"options", options_to_json(options_)},
            {"standardization", {{"mean", mean}, {"scale", scale}}},
            {"parameters", {{"preprocess", pp}, {"core", core_->params_json()}}},
            {"meta",
             {{"n_train", meta_.n_train},
              {"train_seconds", meta_.train_seconds},
              {"bbox_lo", to_vec(meta_.bbox_lo)},
              {"bbox_hi", to_vec(meta_.bbox_hi)},
              {"warnings", meta_.warnings}}}};
}

SurrogateModel SurrogateModel::from_json(const nlohmann::json& j) {
    for (const char* field :
         {"format_version", "technique", "d_in", "d_out", "options", "standardization",
          "parameters", "meta"})
        if (!j.contains(field)) throw IoError(std::string("model file: missing field '") + field + "'");

    const int version = j.at("format_version").get<int>();
    if (version != kFormatVersion)
        throw IoError("model file: unsupported format_version " + std::to_string(version));

    const std::string tech = j.at("technique").get<std::string>();
    const auto& params = j.at("parameters");
    if (!params.contains("preprocess") || !params.contains("core"))
        throw IoError("model file: missing field 'parameters.preprocess/core'");

    SurrogateModel m;
    m.pp_ = Preprocessor::from_json(params.at("preprocess"));
    m.core_ = detail::load_core(tech, params.at("core"));
    m.options_ = options_from_json(j.at("options"));
    const auto& meta = j.at("meta");
    m.meta_.n_train = meta.at("n_train").get<int>();
    m.meta_.train_seconds = meta.at("train_seconds").get<double>();
    m.meta_.bbox_lo = from_vec(meta.at("bbox_lo").get<std::vector<double>>());
    m.meta_.bbox_hi = from_vec(meta.at("bbox_hi").get<std::vector<double>>());
    m.meta_.warnings = meta.value("warnings", std::vector<std::string>{});
    return m;
}

void save_model(const SurrogateModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << model.to_json().dump(1) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

SurrogateModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("model file: malformed JSON (" + std::string(e.what()) + ")");
    }
    return SurrogateModel::from_json(j);
}

}  // namespace gta
