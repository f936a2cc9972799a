#include "gta/train.hpp"

#include <cmath>

#include "gta/gp.hpp"
#include "gta/hda.hpp"
#include "gta/moa.hpp"
#include "gta/piecewise.hpp"
#include "gta/rsm.hpp"
#include "gta/selector.hpp"
#include "gta/splines.hpp"
#include "gta/tensor.hpp"

namespace gta {

namespace {

ModelMeta make_meta(const TrainingSample& sample) {
    ModelMeta meta;
    meta.n_train = sample.n();
    meta.bbox_lo = sample.inputs.colwise().minCoeff().transpose();
    meta.bbox_hi = sample.inputs.colwise().maxCoeff().transpose();
    return meta;
}

std::unique_ptr<TechniqueModel> dispatch(Technique technique, const TrainingSample& sample,
                                         const Preprocessor& pp, const Eigen::MatrixXd& U,
                                         const Eigen::MatrixXd& Y, TrainContext& ctx) {
    switch (technique) {
        case Technique::rsm: return fit_rsm_core(U, Y, ctx);
        case Technique::splt: return fit_splt_core(U, Y, ctx);
        case Technique::gp: return fit_gp_core(U, Y, ctx);
        case Technique::sgp: return fit_sgp_core(U, Y, ctx);
        case Technique::hda: return boost_hda_core(U, Y, ctx);
        case Technique::ta: {
            const auto factorization = factorize_doe(U);
            return fit_ta_core(U, Y, factorization, {}, ctx);
        }
        case Technique::ita: {
            const auto grid = detect_incomplete_grid(U);
            if (!grid)
                throw ConfigError("ita: training inputs do not form an incomplete grid");
            return fit_ita_core(U, Y, *grid, ctx);
        }
        case Technique::gbrt: return fit_gbrt_core(U, Y, ctx);
        case Technique::pla: return fit_pla_core(U, Y, ctx);
        case Technique::moa: return fit_moa_core(sample, pp, U, Y, ctx);
    }
    throw Error("unreachable technique dispatch");
}

}  // namespace

SurrogateModel train_technique(const TrainingSample& sample0, const ModelOptions& options,
                               Technique technique, const TuneParams& tune) {
    TrainingSample sample = sample0;
    sample.normalize_metadata();

    ModelOptions opt = options;
    opt.technique = choice_from_name(technique_name(technique));
    const ValidationReport report = validate_sample(sample, opt);
    if (report.has_conflict()) throw ConfigError("invalid training request:\n" + report.summary());

    Stopwatch watch;
    ModelMeta meta = make_meta(sample);
    Preprocessor pp(sample);
    const Eigen::MatrixXd U = pp.encode_rows(sample.inputs);
    const Eigen::MatrixXd Y = pp.standardize_outputs(sample.outputs);

    TrainContext ctx{opt, tune, Rng(opt.seed), &meta.warnings};

    std::unique_ptr<TechniqueModel> core;
    if (sample.n() == 1) {
        // Degenerate sample: every technique falls back to the constant model.
        core = fit_constant_core(pp.d_enc(), Y.colwise().mean().transpose());
    } else {
        core = dispatch(technique, sample, pp, U, Y, ctx);
    }

    if (opt.smoothing > 0.0) {
        if (core->capabilities().smooth)
            core = core->resmoothed(opt.smoothing);
        else
            ctx.warn("smoothing ignored: technique " + technique_name(technique) +
                     " is not smooth");
    }

    meta.train_seconds = watch.seconds();
    return SurrogateModel(std::move(pp), std::shared_ptr<const TechniqueModel>(std::move(core)),
                          std::move(opt), std::move(meta));
}

SurrogateModel train(const TrainingSample& sample0, const ModelOptions& options) {
    TrainingSample sample = sample0;
    sample.normalize_metadata();

    const ValidationReport report = validate_sample(sample, options);
    if (report.has_conflict()) throw ConfigError("invalid training request:\n" + report.summary());

    if (const auto tech = concrete_technique(options.technique))
        return train_technique(sample, options, *tech);

    if (options.technique == TechniqueChoice::smart) return smart_select(sample, options);

    const Technique chosen = decision_tree_select(sample, options);
    return train_technique(sample, options, chosen);
}

}  // namespace gta
