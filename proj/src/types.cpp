#include "gta/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>
#include <unordered_map>

namespace gta {

namespace {

const std::map<std::string, Technique>& technique_table() {
    static const std::map<std::string, Technique> table = {
        {"rsm", Technique::rsm}, {"splt", Technique::splt}, {"gp", Technique::gp},
        {"sgp", Technique::sgp}, {"hda", Technique::hda},   {"ta", Technique::ta},
        {"ita", Technique::ita}, {"gbrt", Technique::gbrt}, {"pla", Technique::pla},
        {"moa", Technique::moa},
    };
    return table;
}

}  // namespace

std::string technique_name(Technique t) {
    for (const auto& [name, tech] : technique_table())
        if (tech == t) return name;
    return "?";
}

Technique technique_from_name(const std::string& name) {
    auto it = technique_table().find(name);
    if (it == technique_table().end()) throw ConfigError("unknown technique: " + name);
    return it->second;
}

std::string choice_name(TechniqueChoice c) {
    if (c == TechniqueChoice::automatic) return "auto";
    if (c == TechniqueChoice::smart) return "smart";
    return technique_name(*concrete_technique(c));
}

TechniqueChoice choice_from_name(const std::string& name) {
    if (name == "auto") return TechniqueChoice::automatic;
    if (name == "smart") return TechniqueChoice::smart;
    switch (technique_from_name(name)) {
        case Technique::rsm: return TechniqueChoice::rsm;
        case Technique::splt: return TechniqueChoice::splt;
        case Technique::gp: return TechniqueChoice::gp;
        case Technique::sgp: return TechniqueChoice::sgp;
        case Technique::hda: return TechniqueChoice::hda;
        case Technique::ta: return TechniqueChoice::ta;
        case Technique::ita: return TechniqueChoice::ita;
        case Technique::gbrt: return TechniqueChoice::gbrt;
        case Technique::pla: return TechniqueChoice::pla;
        case Technique::moa: return TechniqueChoice::moa;
    }
    throw ConfigError("unknown technique: " + name);
}

std::optional<Technique> concrete_technique(TechniqueChoice c) {
    switch (c) {
        case TechniqueChoice::automatic:
        case TechniqueChoice::smart: return std::nullopt;
        case TechniqueChoice::rsm: return Technique::rsm;
        case TechniqueChoice::splt: return Technique::splt;
        case TechniqueChoice::gp: return Technique::gp;
        case TechniqueChoice::sgp: return Technique::sgp;
        case TechniqueChoice::hda: return Technique::hda;
        case TechniqueChoice::ta: return Technique::ta;
        case TechniqueChoice::ita: return Technique::ita;
        case TechniqueChoice::gbrt: return Technique::gbrt;
        case TechniqueChoice::pla: return Technique::pla;
        case TechniqueChoice::moa: return Technique::moa;
    }
    return std::nullopt;
}

double accelerator_factor(int level) {
    static const double factors[5] = {1.0, 0.75, 0.5, 0.3, 0.2};
    if (level < 1 || level > 5) throw ConfigError("accelerator must be in 1..5");
    return factors[level - 1];
}

void TrainingSample::normalize_metadata() {
    if (input_names.empty())
        for (int j = 0; j < d_in(); ++j) input_names.push_back("x" + std::to_string(j + 1));
    if (output_names.empty())
        for (int k = 0; k < d_out(); ++k) output_names.push_back("y" + std::to_string(k + 1));
    if (categorical_mask.empty()) categorical_mask.assign(static_cast<std::size_t>(d_in()), false);
}

TrainingSample make_sample(Eigen::MatrixXd inputs, Eigen::MatrixXd outputs) {
    TrainingSample s;
    s.inputs = std::move(inputs);
    s.outputs = std::move(outputs);
    s.normalize_metadata();
    return s;
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& i : issues) {
        os << (i.severity == ValidationIssue::Severity::conflict ? "conflict" : "warning") << " ["
           << i.code << "]: " << i.message << "\n";
    }
    return os.str();
}

namespace {

void add_issue(ValidationReport& r, ValidationIssue::Severity sev, std::string code,
               std::string message) {
    r.issues.push_back({sev, std::move(code), std::move(message)});
}

struct RowHash {
    std::size_t operator()(const std::vector<double>& v) const {
        std::size_t h = 1469598103934665603ull;
        for (double x : v) {
            std::uint64_t bits;
            std::memcpy(&bits, &x, sizeof(bits));
            h = (h ^ bits) * 1099511628211ull;
        }
        return h;
    }
};

}  // namespace

ValidationReport validate_sample(const TrainingSample& sample, const ModelOptions& options) {
    using Sev = ValidationIssue::Severity;
    ValidationReport report;

    if (sample.n() < 1 || sample.d_in() < 1 || sample.d_out() < 1) {
        add_issue(report, Sev::conflict, "empty-sample",
                  "sample must have N >= 1, d_in >= 1, d_out >= 1");
        return report;
    }
    if (sample.outputs.rows() != sample.inputs.rows())
        add_issue(report, Sev::conflict, "row-mismatch", "inputs and outputs row counts differ");
    if (!sample.inputs.allFinite() || !sample.outputs.allFinite())
        add_issue(report, Sev::conflict, "non-finite", "sample contains NaN or Inf entries");

    if (!(options.smoothing >= 0.0 && options.smoothing <= 1.0))
        add_issue(report, Sev::conflict, "smoothing-range", "smoothing must lie in [0,1]");
    if (options.accelerator < 1 || options.accelerator > 5)
        add_issue(report, Sev::conflict, "accelerator-range", "accelerator must be in 1..5");

    // Duplicate inputs with contradictory outputs break the exact-fit contract.
    if (options.exact_fit && sample.inputs.allFinite()) {
        std::unordered_map<std::vector<double>, int, RowHash> seen;
        for (int i = 0; i < sample.n(); ++i) {
            std::vector<double> key(sample.inputs.row(i).begin(), sample.inputs.row(i).end());
            auto [it, inserted] = seen.emplace(std::move(key), i);
            if (!inserted) {
                const int j = it->second;
                if ((sample.outputs.row(i) - sample.outputs.row(j)).cwiseAbs().maxCoeff() > 0.0) {
                    add_issue(report, Sev::conflict, "exact-fit-contradiction",
                              "exact fit impossible: rows " + std::to_string(j) + " and " +
                                  std::to_string(i) + " share inputs but differ in outputs");
                    break;
                }
            }
        }
    }

    const auto tech = concrete_technique(options.technique);
    if (options.require_linearity && tech && *tech != Technique::rsm)
        add_issue(report, Sev::conflict, "linearity-technique",
                  "linearity requires rsm, got " + technique_name(*tech));
    if (options.require_linearity && options.require_ae)
        add_issue(report, Sev::conflict, "linearity-ae",
                  "no linear technique provides accuracy evaluation");
    if (options.require_ae && tech && *tech != Technique::gp && *tech != Technique::sgp &&
        *tech != Technique::moa)
        add_issue(report, Sev::conflict, "ae-technique",
                  "accuracy evaluation requires gp or sgp, got " + technique_name(*tech));
    if (options.exact_fit && options.hints.count("IsNoisy"))
        add_issue(report, Sev::conflict, "exact-fit-noisy",
                  "exact fit conflicts with the IsNoisy hint");

    return report;
}

}  // namespace gta
