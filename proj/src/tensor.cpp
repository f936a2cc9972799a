#include "gta/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

#include "gta/hda.hpp"
#include "gta/splines.hpp"

namespace gta {

namespace {

struct VecHash {
    std::size_t operator()(const std::vector<int>& v) const {
        std::size_t h = 1469598103934665603ull;
        for (int x : v) h = (h ^ static_cast<std::size_t>(x)) * 1099511628211ull;
        return h;
    }
};

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

/// Distinct-value id per column entry (exact double identity).
std::vector<std::vector<int>> column_value_ids(const Eigen::Ref<const Eigen::MatrixXd>& X) {
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    std::vector<std::vector<int>> ids(static_cast<std::size_t>(d),
                                      std::vector<int>(static_cast<std::size_t>(n)));
    for (Eigen::Index j = 0; j < d; ++j) {
        std::map<double, int> seen;
        for (Eigen::Index i = 0; i < n; ++i) {
            auto [it, inserted] = seen.emplace(X(i, j), static_cast<int>(seen.size()));
            ids[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = it->second;
        }
    }
    return ids;
}

struct GroupState {
    std::vector<int> vars;
    std::vector<int> row_node;  // node id per row
    int node_count = 0;
};

/// Node ids of rows projected onto a variable subset.
GroupState project_group(const std::vector<int>& vars,
                         const std::vector<std::vector<int>>& col_ids, int n) {
    GroupState g;
    g.vars = vars;
    g.row_node.resize(static_cast<std::size_t>(n));
    std::unordered_map<std::vector<int>, int, VecHash> seen;
    std::vector<int> key(vars.size());
    for (int i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < vars.size(); ++t)
            key[t] = col_ids[static_cast<std::size_t>(vars[t])][static_cast<std::size_t>(i)];
        auto [it, inserted] = seen.emplace(key, static_cast<int>(seen.size()));
        g.row_node[static_cast<std::size_t>(i)] = it->second;
    }
    g.node_count = static_cast<int>(seen.size());
    return g;
}

/// Distinct count of the joined projection of several groups.
long long joined_count(const std::vector<const GroupState*>& groups, int n) {
    std::unordered_map<std::vector<int>, int, VecHash> seen;
    std::vector<int> key(groups.size());
    for (int i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < groups.size(); ++t)
            key[t] = groups[t]->row_node[static_cast<std::size_t>(i)];
        seen.emplace(key, 0);
    }
    return static_cast<long long>(seen.size());
}

long long saturating_product(const std::vector<GroupState>& groups, long long cap) {
    long long p = 1;
    for (const auto& g : groups) {
        p *= g.node_count;
        if (p > cap) return cap + 1;
    }
    return p;
}

}  // namespace

DoeFactorization factorize_doe(const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
    const int n = static_cast<int>(inputs.rows());
    const int d = static_cast<int>(inputs.cols());
    if (n < 1 || d < 1) throw DataError("factorize_doe: empty input matrix");

    {
        std::unordered_map<std::vector<double>, int, RowHash> seen;
        for (int i = 0; i < n; ++i) {
            std::vector<double> row(inputs.row(i).begin(), inputs.row(i).end());
            auto [it, inserted] = seen.emplace(std::move(row), i);
            if (!inserted)
                throw DataError("factorize_doe: duplicate rows " + std::to_string(it->second) +
                                " and " + std::to_string(i));
        }
    }

    const auto col_ids = column_value_ids(inputs);
    std::vector<GroupState> groups;
    for (int j = 0; j < d; ++j) groups.push_back(project_group({j}, col_ids, n));

    auto merge_set = [&](const std::vector<std::size_t>& which) {
        std::vector<int> vars;
        for (std::size_t idx : which)
            vars.insert(vars.end(), groups[idx].vars.begin(), groups[idx].vars.end());
        std::sort(vars.begin(), vars.end());
        std::vector<GroupState> next;
        for (std::size_t g = 0; g < groups.size(); ++g)
            if (std::find(which.begin(), which.end(), g) == which.end())
                next.push_back(std::move(groups[g]));
        next.push_back(project_group(vars, col_ids, n));
        groups = std::move(next);
    };

    while (saturating_product(groups, n) != n && groups.size() > 1) {
        // Entangled pairs first: their joined projection is smaller than the
        // count product.
        bool merged = false;
        for (std::size_t a = 0; a < groups.size() && !merged; ++a) {
            for (std::size_t b = a + 1; b < groups.size() && !merged; ++b) {
                const long long pair =
                    static_cast<long long>(groups[a].node_count) * groups[b].node_count;
                if (joined_count({&groups[a], &groups[b]}, n) != pair) {
                    merge_set({a, b});
                    merged = true;
                }
            }
        }
        if (merged) continue;

        // All pairs independent yet the whole is not Cartesian: find the
        // smallest entangled subset (subset counts stay tiny in practice).
        const std::size_t g_count = groups.size();
        bool found = false;
        for (std::size_t k = 3; k <= g_count && !found; ++k) {
            std::vector<std::size_t> pick(k);
            std::iota(pick.begin(), pick.end(), 0);
            for (;;) {
                long long prod = 1;
                std::vector<const GroupState*> view;
                for (std::size_t idx : pick) {
                    prod *= groups[idx].node_count;
                    if (prod > n) prod = n + 1;
                    view.push_back(&groups[idx]);
                }
                if (prod <= n && joined_count(view, n) != prod) {
                    merge_set(pick);
                    found = true;
                    break;
                }
                // next k-combination
                std::size_t t = k;
                while (t > 0 && pick[t - 1] == g_count - k + t - 1) --t;
                if (t == 0) break;
                ++pick[t - 1];
                for (std::size_t q = t; q < k; ++q) pick[q] = pick[q - 1] + 1;
            }
        }
        if (!found) {
            // Degenerate fallback: collapse everything.
            std::vector<std::size_t> all(groups.size());
            std::iota(all.begin(), all.end(), 0);
            merge_set(all);
        }
    }

    // Deterministic order: groups by smallest member variable.
    std::sort(groups.begin(), groups.end(),
              [](const GroupState& a, const GroupState& b) { return a.vars[0] < b.vars[0]; });

    DoeFactorization out;
    for (const auto& g : groups) {
        // Distinct node tuples, sorted lexicographically.
        std::map<std::vector<double>, int> nodes;
        std::vector<std::vector<double>> row_key(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            std::vector<double> key(g.vars.size());
            for (std::size_t t = 0; t < g.vars.size(); ++t) key[t] = inputs(i, g.vars[t]);
            nodes.emplace(key, 0);
            row_key[static_cast<std::size_t>(i)] = std::move(key);
        }
        int id = 0;
        for (auto& [key, value] : nodes) value = id++;
        Eigen::MatrixXd node_mat(static_cast<Eigen::Index>(nodes.size()),
                                 static_cast<Eigen::Index>(g.vars.size()));
        for (const auto& [key, value] : nodes)
            for (std::size_t t = 0; t < key.size(); ++t)
                node_mat(value, static_cast<Eigen::Index>(t)) = key[t];

        out.groups.push_back(g.vars);
        out.factor_nodes.push_back(std::move(node_mat));
        std::vector<int> idx(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = nodes.at(row_key[static_cast<std::size_t>(i)]);
        out.grid_index.push_back(std::move(idx));
    }
    // grid_index is stored per group; transpose to per row.
    std::vector<std::vector<int>> per_row(static_cast<std::size_t>(n),
                                          std::vector<int>(out.groups.size()));
    for (std::size_t g = 0; g < out.groups.size(); ++g)
        for (int i = 0; i < n; ++i) per_row[static_cast<std::size_t>(i)][g] = out.grid_index[g][static_cast<std::size_t>(i)];
    out.grid_index = std::move(per_row);
    return out;
}

std::optional<IncompleteGrid> detect_incomplete_grid(
    const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
    const int n = static_cast<int>(inputs.rows());
    const int d = static_cast<int>(inputs.cols());
    if (n < 1 || d < 1) return std::nullopt;

    IncompleteGrid grid;
    grid.axis_nodes.resize(static_cast<std::size_t>(d));
    grid.cell_index.assign(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(d)));
    double log_cells = 0.0;
    for (int j = 0; j < d; ++j) {
        std::map<double, int> seen;
        for (int i = 0; i < n; ++i) seen.emplace(inputs(i, j), 0);
        int id = 0;
        for (auto& [value, idx] : seen) {
            idx = id++;
            grid.axis_nodes[static_cast<std::size_t>(j)].push_back(value);
        }
        for (int i = 0; i < n; ++i)
            grid.cell_index[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                seen.at(inputs(i, j));
        log_cells += std::log(static_cast<double>(seen.size()));
    }
    const double log_fill = std::log(static_cast<double>(n)) - log_cells;
    if (log_fill < std::log(0.05)) return std::nullopt;
    grid.fill_ratio = std::exp(log_fill);
    return grid;
}

// --- shared tensor machinery -------------------------------------------------

namespace {

long long product_of(const std::vector<int>& dims) {
    long long p = 1;
    for (int v : dims) p *= v;
    return p;
}

/// Mode-k product: contract axis `axis` of the row-major tensor with M
/// (q x dims[axis]); returns the tensor with that axis resized to q.
Eigen::VectorXd mode_multiply(const Eigen::VectorXd& flat, std::vector<int>& dims, int axis,
                              const Eigen::MatrixXd& M) {
    const int n = dims[static_cast<std::size_t>(axis)];
    const auto q = static_cast<int>(M.rows());
    long long before = 1, after = 1;
    for (int k = 0; k < axis; ++k) before *= dims[static_cast<std::size_t>(k)];
    for (std::size_t k = static_cast<std::size_t>(axis) + 1; k < dims.size(); ++k) after *= dims[k];

    Eigen::VectorXd out(before * q * after);
    for (long long b = 0; b < before; ++b) {
        // slab (n x after), row-major within the flat layout
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            slab(flat.data() + b * n * after, n, after);
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dst(
            out.data() + b * q * after, q, after);
        dst = M * slab;
    }
    dims[static_cast<std::size_t>(axis)] = q;
    return out;
}

/// Contract a row-major coefficient tensor with per-axis weight vectors.
double contract_all(const Eigen::VectorXd& flat, const std::vector<int>& dims,
                    const std::vector<Eigen::VectorXd>& weights) {
    Eigen::VectorXd v = flat;
    long long rest = product_of(dims);
    for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
        const int p = dims[static_cast<std::size_t>(k)];
        rest /= p;
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            view(v.data(), rest, p);
        Eigen::VectorXd next = view * weights[static_cast<std::size_t>(k)];
        v = std::move(next);
    }
    return v[0];
}

/// Linear-extrapolating basis evaluation for 1D spline factors.
void bspl_eval_extrap(const BsplBasis& basis, double t, Eigen::VectorXd& values,
                      Eigen::VectorXd* derivs) {
    const double lo = basis.range_lo(), hi = basis.range_hi();
    const double tc = std::clamp(t, lo, hi);
    values = basis.eval(tc);
    Eigen::VectorXd dv = basis.eval_derivative(tc);
    if (t != tc) values += (t - tc) * dv;
    if (derivs) *derivs = std::move(dv);
}

struct Factor {
    FactorTech tech = FactorTech::bspl;
    std::vector<int> vars;
    Eigen::MatrixXd nodes;  // n_k x |vars|
    BsplBasis bspl;
    double gp_log_length = 0.0;
    std::vector<HdaUnit> units;

    int dim() const { return static_cast<int>(vars.size()); }

    int basis_size() const {
        switch (tech) {
            case FactorTech::bspl: return bspl.size();
            case FactorTech::lr: return 1 + dim();
            case FactorTech::gp: return static_cast<int>(nodes.rows());
            case FactorTech::hda: return 1 + dim() + static_cast<int>(units.size());
        }
        return 0;
    }

    /// Basis values (and optionally d(values)/d(coords)) at a point of the
    /// factor's subspace.
    void eval(const Eigen::Ref<const Eigen::VectorXd>& coords, Eigen::VectorXd& values,
              Eigen::MatrixXd* derivs) const {
        const int p = basis_size();
        if (derivs) derivs->setZero(p, dim());
        switch (tech) {
            case FactorTech::bspl: {
                Eigen::VectorXd dv;
                bspl_eval_extrap(bspl, coords[0], values, derivs ? &dv : nullptr);
                if (derivs) derivs->col(0) = dv;
                return;
            }
            case FactorTech::lr: {
                values.resize(p);
                values[0] = 1.0;
                values.tail(dim()) = coords;
                if (derivs)
                    derivs->bottomRows(dim()) = Eigen::MatrixXd::Identity(dim(), dim());
                return;
            }
            case FactorTech::gp: {
                const double inv2 = std::exp(-2.0 * gp_log_length);
                values.resize(p);
                for (Eigen::Index i = 0; i < nodes.rows(); ++i) {
                    const Eigen::VectorXd diff = coords - nodes.row(i).transpose();
                    const double v = std::exp(-0.5 * inv2 * diff.squaredNorm());
                    values[i] = v;
                    if (derivs) derivs->row(i) = -v * inv2 * diff.transpose();
                }
                return;
            }
            case FactorTech::hda: {
                values.resize(p);
                values[0] = 1.0;
                values.segment(1, dim()) = coords;
                if (derivs)
                    derivs->block(1, 0, dim(), dim()) = Eigen::MatrixXd::Identity(dim(), dim());
                for (std::size_t t = 0; t < units.size(); ++t) {
                    values[1 + dim() + static_cast<Eigen::Index>(t)] = units[t].eval(coords);
                    if (derivs)
                        derivs->row(1 + dim() + static_cast<Eigen::Index>(t)) =
                            units[t].grad(coords).transpose();
                }
                return;
            }
        }
    }

    Eigen::MatrixXd design() const {
        Eigen::MatrixXd B(nodes.rows(), basis_size());
        Eigen::VectorXd values;
        for (Eigen::Index i = 0; i < nodes.rows(); ++i) {
            eval(nodes.row(i).transpose(), values, nullptr);
            B.row(i) = values.transpose();
        }
        return B;
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"tech",
                          tech == FactorTech::bspl ? "bspl"
                          : tech == FactorTech::lr ? "lr"
                          : tech == FactorTech::gp ? "gp"
                                                   : "hda"},
                         {"vars", vars},
                         {"nodes", std::vector<double>(nodes.data(), nodes.data() + nodes.size())},
                         {"n_nodes", nodes.rows()}};
        if (tech == FactorTech::bspl) j["bspl"] = bspl.to_json();
        if (tech == FactorTech::gp) j["gp_log_length"] = gp_log_length;
        if (tech == FactorTech::hda) {
            nlohmann::json units_json = nlohmann::json::array();
            for (const auto& u : units)
                units_json.push_back(
                    {{"type", u.type == HdaUnit::Type::sigmoid ? "sigmoid" : "gaussian"},
                     {"direction", std::vector<double>(u.direction.begin(), u.direction.end())},
                     {"offset", u.offset},
                     {"width", u.width}});
            j["units"] = units_json;
        }
        return j;
    }

    static Factor from_json(const nlohmann::json& j) {
        Factor f;
        const std::string t = j.at("tech");
        f.tech = t == "bspl" ? FactorTech::bspl
                 : t == "lr" ? FactorTech::lr
                 : t == "gp" ? FactorTech::gp
                             : FactorTech::hda;
        f.vars = j.at("vars").get<std::vector<int>>();
        const auto nv = j.at("nodes").get<std::vector<double>>();
        const auto rows = j.at("n_nodes").get<Eigen::Index>();
        f.nodes = Eigen::Map<const Eigen::MatrixXd>(nv.data(), rows,
                                                    static_cast<Eigen::Index>(f.vars.size()));
        if (f.tech == FactorTech::bspl) f.bspl = BsplBasis::from_json(j.at("bspl"));
        if (f.tech == FactorTech::gp) f.gp_log_length = j.at("gp_log_length").get<double>();
        if (f.tech == FactorTech::hda) {
            for (const auto& uj : j.at("units")) {
                HdaUnit u;
                u.type = uj.at("type") == "sigmoid" ? HdaUnit::Type::sigmoid
                                                    : HdaUnit::Type::gaussian;
                const auto dir = uj.at("direction").get<std::vector<double>>();
                u.direction = Eigen::Map<const Eigen::VectorXd>(dir.data(),
                                                                static_cast<Eigen::Index>(dir.size()));
                u.offset = uj.at("offset").get<double>();
                u.width = uj.at("width").get<double>();
                f.units.push_back(std::move(u));
            }
        }
        return f;
    }
};

class TaCore final : public TechniqueModel {
public:
    std::vector<Factor> factors;
    std::vector<int> dims;           // basis size per factor
    Eigen::MatrixXd coef;            // prod(dims) x m, row-major tensor per column
    // Solve state for ridge re-solves (smoothing).
    Eigen::MatrixXd rhs_rotated;     // prod(dims) x m
    std::vector<Eigen::MatrixXd> eigvecs;  // per factor
    std::vector<Eigen::VectorXd> eigvals;
    double ridge = 0.0;
    int d = 0;
    int m = 0;

    Technique technique() const override { return Technique::ta; }
    int input_dim() const override { return d; }
    int output_dim() const override { return m; }
    Capabilities capabilities() const override { return {true, false, true}; }

    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& u) const override {
        std::vector<Eigen::VectorXd> w(factors.size());
        Eigen::VectorXd values;
        for (std::size_t k = 0; k < factors.size(); ++k) {
            Eigen::VectorXd coords(factors[k].dim());
            for (int t = 0; t < factors[k].dim(); ++t) coords[t] = u[factors[k].vars[static_cast<std::size_t>(t)]];
            factors[k].eval(coords, values, nullptr);
            w[k] = values;
        }
        Eigen::VectorXd out(m);
        for (int k = 0; k < m; ++k) out[k] = contract_all(coef.col(k), dims, w);
        return out;
    }

    Eigen::MatrixXd jacobian(const Eigen::Ref<const Eigen::VectorXd>& u) const override {
        std::vector<Eigen::VectorXd> w(factors.size());
        std::vector<Eigen::MatrixXd> dw(factors.size());
        Eigen::VectorXd values;
        for (std::size_t k = 0; k < factors.size(); ++k) {
            Eigen::VectorXd coords(factors[k].dim());
            for (int t = 0; t < factors[k].dim(); ++t) coords[t] = u[factors[k].vars[static_cast<std::size_t>(t)]];
            Eigen::MatrixXd derivs;
            factors[k].eval(coords, values, &derivs);
            w[k] = values;
            dw[k] = derivs;
        }
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, d);
        for (std::size_t k = 0; k < factors.size(); ++k) {
            for (int t = 0; t < factors[k].dim(); ++t) {
                auto wt = w;
                wt[k] = dw[k].col(t);
                for (int out = 0; out < m; ++out)
                    jac(out, factors[k].vars[static_cast<std::size_t>(t)]) +=
                        contract_all(coef.col(out), dims, wt);
            }
        }
        return jac;
    }

    void solve_with_ridge(double lambda) {
        // Divide the rotated right-hand side by the eigenvalue products and
        // rotate back; zero products mean the minimum-norm solution.
        const long long total = product_of(dims);
        Eigen::VectorXd denom(total);
        double max_denom = 0.0;
        for (long long idx = 0; idx < total; ++idx) {
            long long rest = idx;
            double prod = 1.0;
            for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
                const int p = dims[static_cast<std::size_t>(k)];
                prod *= eigvals[static_cast<std::size_t>(k)][rest % p];
                rest /= p;
            }
            denom[idx] = prod + lambda;
            max_denom = std::max(max_denom, std::abs(denom[idx]));
        }
        const double tol = 1e-10 * std::max(max_denom, 1e-300);
        coef.resize(total, m);
        for (int k = 0; k < m; ++k) {
            Eigen::VectorXd t = rhs_rotated.col(k);
            for (long long idx = 0; idx < total; ++idx)
                t[idx] = std::abs(denom[idx]) > tol ? t[idx] / denom[idx] : 0.0;
            std::vector<int> dd = dims;
            for (std::size_t f = 0; f < factors.size(); ++f)
                t = mode_multiply(t, dd, static_cast<int>(f), eigvecs[f]);
            coef.col(k) = t;
        }
        ridge = lambda;
    }

    std::unique_ptr<TechniqueModel> resmoothed(double s) const override {
        auto copy = std::make_unique<TaCore>(*this);
        double base = 1e-6;
        for (const auto& ev : eigvals) base *= std::max(ev.maxCoeff(), 1e-12);
        copy->solve_with_ridge(ridge + (std::pow(10.0, 4.0 * s) - 1.0) * base);
        return copy;
    }

    nlohmann::json params_json() const override {
        nlohmann::json fs = nlohmann::json::array();
        for (const auto& f : factors) fs.push_back(f.to_json());
        auto dump = [](const Eigen::MatrixXd& M) {
            return std::vector<double>(M.data(), M.data() + M.size());
        };
        nlohmann::json eig = nlohmann::json::array();
        for (std::size_t k = 0; k < eigvecs.size(); ++k)
            eig.push_back({{"vectors", dump(eigvecs[k])},
                           {"values", std::vector<double>(eigvals[k].begin(), eigvals[k].end())}});
        return {{"factors", fs},     {"dims", dims},   {"coef", dump(coef)},
                {"rhs_rotated", dump(rhs_rotated)},    {"eigen", eig},
                {"ridge", ridge},    {"d", d},         {"m", m}};
    }
};

class ItaCore final : public TechniqueModel {
public:
    std::vector<std::vector<double>> axis_nodes;
    std::vector<BsplBasis> bases;
    std::vector<int> dims;
    Eigen::MatrixXd coef;  // prod(dims) x m
    double lambda = 1e-3;
    double shift = 0.0;    // tiny diagonal shift for strict positive definiteness
    // Observed data kept for re-solves.
    std::vector<std::vector<int>> cells;
    Eigen::MatrixXd targets;
    std::vector<double> cg_objectives;  // last solve trace
    int d = 0;
    int m = 0;

    Technique technique() const override { return Technique::ita; }
    int input_dim() const override { return d; }
    int output_dim() const override { return m; }
    Capabilities capabilities() const override { return {true, false, true}; }

    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& u) const override {
        std::vector<Eigen::VectorXd> w(static_cast<std::size_t>(d));
        for (int k = 0; k < d; ++k)
            bspl_eval_extrap(bases[static_cast<std::size_t>(k)], u[k], w[static_cast<std::size_t>(k)], nullptr);
        Eigen::VectorXd out(m);
        for (int k = 0; k < m; ++k) out[k] = contract_all(coef.col(k), dims, w);
        return out;
    }

    Eigen::MatrixXd jacobian(const Eigen::Ref<const Eigen::VectorXd>& u) const override {
        std::vector<Eigen::VectorXd> w(static_cast<std::size_t>(d)), dw(static_cast<std::size_t>(d));
        for (int k = 0; k < d; ++k) {
            Eigen::VectorXd deriv;
            bspl_eval_extrap(bases[static_cast<std::size_t>(k)], u[k], w[static_cast<std::size_t>(k)], &deriv);
            dw[static_cast<std::size_t>(k)] = deriv;
        }
        Eigen::MatrixXd jac(m, d);
        for (int axis = 0; axis < d; ++axis) {
            auto wt = w;
            wt[static_cast<std::size_t>(axis)] = dw[static_cast<std::size_t>(axis)];
            for (int k = 0; k < m; ++k) jac(k, axis) = contract_all(coef.col(k), dims, wt);
        }
        return jac;
    }

    void solve(TrainContext* ctx);

    std::unique_ptr<TechniqueModel> resmoothed(double s) const override {
        auto copy = std::make_unique<ItaCore>(*this);
        copy->lambda = lambda * std::pow(10.0, 4.0 * s);
        copy->solve(nullptr);
        return copy;
    }

    nlohmann::json params_json() const override {
        nlohmann::json bs = nlohmann::json::array();
        for (const auto& b : bases) bs.push_back(b.to_json());
        return {{"axis_nodes", axis_nodes},
                {"bases", bs},
                {"dims", dims},
                {"coef", std::vector<double>(coef.data(), coef.data() + coef.size())},
                {"lambda", lambda},
                {"shift", shift},
                {"cells", cells},
                {"targets", std::vector<double>(targets.data(), targets.data() + targets.size())},
                {"n_obs", targets.rows()},
                {"d", d},
                {"m", m}};
    }
};

/// Sparse per-row basis footprint: per axis, the first nonzero index and the
/// (degree+1) weights.
struct SparseRow {
    std::vector<int> offset;
    std::vector<Eigen::VectorXd> weights;
};

void ItaCore::solve(TrainContext* ctx) {
    const long long total = product_of(dims);
    const auto n_obs = targets.rows();

    std::vector<SparseRow> rows(static_cast<std::size_t>(n_obs));
    for (Eigen::Index r = 0; r < n_obs; ++r) {
        SparseRow sr;
        for (int a = 0; a < d; ++a) {
            const auto& basis = bases[static_cast<std::size_t>(a)];
            const double t = axis_nodes[static_cast<std::size_t>(a)]
                                       [static_cast<std::size_t>(cells[static_cast<std::size_t>(r)][static_cast<std::size_t>(a)])];
            const Eigen::VectorXd v = basis.eval(t);
            int first = 0;
            int last = static_cast<int>(v.size()) - 1;
            while (first < last && v[first] == 0.0) ++first;
            while (last > first && v[last] == 0.0) --last;
            sr.offset.push_back(first);
            sr.weights.push_back(v.segment(first, last - first + 1));
        }
        rows[static_cast<std::size_t>(r)] = std::move(sr);
    }

    // Row-major strides of the coefficient tensor.
    std::vector<long long> stride(static_cast<std::size_t>(d), 1);
    for (int a = d - 2; a >= 0; --a)
        stride[static_cast<std::size_t>(a)] =
            stride[static_cast<std::size_t>(a) + 1] * dims[static_cast<std::size_t>(a) + 1];

    auto row_dot = [&](const SparseRow& sr, const Eigen::VectorXd& c) {
        double acc = 0.0;
        std::vector<int> idx(static_cast<std::size_t>(d), 0);
        for (;;) {
            long long flat = 0;
            double w = 1.0;
            for (int a = 0; a < d; ++a) {
                flat += (sr.offset[static_cast<std::size_t>(a)] + idx[static_cast<std::size_t>(a)]) *
                        stride[static_cast<std::size_t>(a)];
                w *= sr.weights[static_cast<std::size_t>(a)][idx[static_cast<std::size_t>(a)]];
            }
            acc += w * c[flat];
            int a = d - 1;
            while (a >= 0 && ++idx[static_cast<std::size_t>(a)] >=
                                 sr.weights[static_cast<std::size_t>(a)].size()) {
                idx[static_cast<std::size_t>(a)] = 0;
                --a;
            }
            if (a < 0) break;
        }
        return acc;
    };
    auto row_axpy = [&](const SparseRow& sr, double alpha, Eigen::VectorXd& c) {
        std::vector<int> idx(static_cast<std::size_t>(d), 0);
        for (;;) {
            long long flat = 0;
            double w = 1.0;
            for (int a = 0; a < d; ++a) {
                flat += (sr.offset[static_cast<std::size_t>(a)] + idx[static_cast<std::size_t>(a)]) *
                        stride[static_cast<std::size_t>(a)];
                w *= sr.weights[static_cast<std::size_t>(a)][idx[static_cast<std::size_t>(a)]];
            }
            c[flat] += alpha * w;
            int a = d - 1;
            while (a >= 0 && ++idx[static_cast<std::size_t>(a)] >=
                                 sr.weights[static_cast<std::size_t>(a)].size()) {
                idx[static_cast<std::size_t>(a)] = 0;
                --a;
            }
            if (a < 0) break;
        }
    };

    // Second-difference penalty matrices per axis.
    std::vector<Eigen::MatrixXd> S(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) {
        const int p = dims[static_cast<std::size_t>(a)];
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(std::max(0, p - 2), p);
        for (int i = 0; i + 2 < p; ++i) {
            D(i, i) = 1.0;
            D(i, i + 1) = -2.0;
            D(i, i + 2) = 1.0;
        }
        S[static_cast<std::size_t>(a)] = D.transpose() * D;
    }

    shift = 1e-12;
    auto apply = [&](const Eigen::VectorXd& c) {
        Eigen::VectorXd out = shift * c;
        for (Eigen::Index r = 0; r < n_obs; ++r)
            row_axpy(rows[static_cast<std::size_t>(r)], row_dot(rows[static_cast<std::size_t>(r)], c), out);
        for (int a = 0; a < d; ++a) {
            std::vector<int> dd = dims;
            out += lambda * mode_multiply(c, dd, a, S[static_cast<std::size_t>(a)]);
        }
        return out;
    };

    coef.resize(total, m);
    cg_objectives.clear();
    for (int k = 0; k < m; ++k) {
        Eigen::VectorXd b = Eigen::VectorXd::Zero(total);
        for (Eigen::Index r = 0; r < n_obs; ++r)
            row_axpy(rows[static_cast<std::size_t>(r)], targets(r, k), b);

        Eigen::VectorXd x = Eigen::VectorXd::Zero(total);
        Eigen::VectorXd res = b;  // b - A*0
        Eigen::VectorXd p = res;
        double rr = res.squaredNorm();
        const double rr0 = rr;
        double objective = 0.0;  // value of 1/2 x'Ax - b'x at the current iterate
        const int max_iter = static_cast<int>(2 * total) + 200;
        for (int it = 0; it < max_iter && rr > 1e-30; ++it) {
            if (std::sqrt(rr) <= 1e-8 * std::sqrt(rr0)) break;
            const Eigen::VectorXd Ap = apply(p);
            const double alpha = rr / p.dot(Ap);
            x += alpha * p;
            res -= alpha * Ap;
            objective -= 0.5 * alpha * rr;  // exact per-step decrease
            const double rr_new = res.squaredNorm();
            p = res + (rr_new / rr) * p;
            rr = rr_new;
            if (k == 0) cg_objectives.push_back(objective);
        }
        coef.col(k) = x;
    }

    if (ctx) {
        // Axes with empty slabs are solvable through the regularizer, but
        // their node values are extrapolations.
        for (int a = 0; a < d; ++a) {
            std::vector<int> counts(axis_nodes[static_cast<std::size_t>(a)].size(), 0);
            for (const auto& cell : cells) ++counts[static_cast<std::size_t>(cell[static_cast<std::size_t>(a)])];
            for (std::size_t t = 0; t < counts.size(); ++t)
                if (counts[t] == 0)
                    ctx->warn("ita: axis " + std::to_string(a + 1) + " node " + std::to_string(t) +
                              " has no observed cells (extrapolated)");
        }
    }
}

}  // namespace

std::unique_ptr<TechniqueModel> fit_ta_core(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                            const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                            const DoeFactorization& factorization,
                                            const std::vector<FactorTech>& techniques,
                                            TrainContext& ctx) {
    const int n = static_cast<int>(U.rows());
    const int m = static_cast<int>(Y.cols());
    if (factorization.cell_count() != n)
        throw ConfigError("ta: factorization does not cover the sample (incomplete grid?)");

    auto core = std::make_unique<TaCore>();
    core->d = static_cast<int>(U.cols());
    core->m = m;

    const std::size_t n_groups = factorization.groups.size();
    std::vector<FactorTech> assigned(n_groups);
    for (std::size_t g = 0; g < n_groups; ++g) {
        if (g < techniques.size()) {
            assigned[g] = techniques[g];
        } else if (factorization.groups[g].size() == 1) {
            assigned[g] = FactorTech::bspl;
        } else {
            assigned[g] = factorization.factor_nodes[g].rows() <= 1000 ? FactorTech::gp
                                                                       : FactorTech::hda;
        }
        if (assigned[g] == FactorTech::bspl && factorization.groups[g].size() != 1)
            throw ConfigError("ta: bspl factors require one-dimensional groups");
    }

    // Profile targets per factor node (mean over the other axes), used to fit
    // hda factor dictionaries.
    for (std::size_t g = 0; g < n_groups; ++g) {
        Factor f;
        f.tech = assigned[g];
        f.vars = factorization.groups[g];
        f.nodes = factorization.factor_nodes[g];
        if (f.tech == FactorTech::bspl) {
            std::vector<double> knots(f.nodes.col(0).begin(), f.nodes.col(0).end());
            f.bspl = BsplBasis(knots);
        } else if (f.tech == FactorTech::gp) {
            std::vector<double> dists;
            const int cap = std::min<int>(64, static_cast<int>(f.nodes.rows()));
            for (int a = 0; a < cap; ++a)
                for (int b = a + 1; b < cap; ++b)
                    dists.push_back((f.nodes.row(a) - f.nodes.row(b)).norm());
            double med = 1.0;
            if (!dists.empty()) {
                std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2), dists.end());
                med = std::max(1e-6, dists[dists.size() / 2]);
            }
            f.gp_log_length = std::log(med);
        } else if (f.tech == FactorTech::hda) {
            Eigen::MatrixXd profile = Eigen::MatrixXd::Zero(f.nodes.rows(), 1);
            Eigen::VectorXd counts = Eigen::VectorXd::Zero(f.nodes.rows());
            for (int i = 0; i < n; ++i) {
                const int node = factorization.grid_index[static_cast<std::size_t>(i)][g];
                profile(node, 0) += Y.row(i).mean();
                counts[node] += 1.0;
            }
            for (Eigen::Index i = 0; i < profile.rows(); ++i) profile(i, 0) /= std::max(1.0, counts[i]);
            const int p_units = std::min<int>(12, static_cast<int>(f.nodes.rows()) / 4);
            f.units = fit_hda_units(f.nodes, profile, std::max(1, p_units), ctx.rng.fork(0x5441 + g));
        }
        core->factors.push_back(std::move(f));
        core->dims.push_back(core->factors.back().basis_size());
    }

    // Per-factor designs and their Gram eigendecompositions.
    std::vector<Eigen::MatrixXd> designs;
    for (const auto& f : core->factors) designs.push_back(f.design());
    for (const auto& B : designs) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(B.transpose() * B);
        core->eigvecs.push_back(eig.eigenvectors());
        core->eigvals.push_back(eig.eigenvalues().cwiseMax(0.0));
    }

    // Right-hand side (kron B)' y arranged on the node grid, then rotated.
    std::vector<int> node_dims;
    for (const auto& f : core->factors) node_dims.push_back(static_cast<int>(f.nodes.rows()));
    core->rhs_rotated.resize(product_of(core->dims), m);
    for (int k = 0; k < m; ++k) {
        Eigen::VectorXd t = Eigen::VectorXd::Zero(product_of(node_dims));
        for (int i = 0; i < n; ++i) {
            long long flat = 0;
            for (std::size_t g = 0; g < n_groups; ++g)
                flat = flat * node_dims[g] + factorization.grid_index[static_cast<std::size_t>(i)][g];
            t[flat] = Y(i, k);
        }
        std::vector<int> dd = node_dims;
        for (std::size_t g = 0; g < n_groups; ++g)
            t = mode_multiply(t, dd, static_cast<int>(g), designs[g].transpose());
        for (std::size_t g = 0; g < n_groups; ++g)
            t = mode_multiply(t, dd, static_cast<int>(g), core->eigvecs[g].transpose());
        core->rhs_rotated.col(k) = t;
    }

    core->solve_with_ridge(0.0);
    return core;
}

std::unique_ptr<TechniqueModel> fit_ita_core(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                             const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                             const IncompleteGrid& grid, TrainContext& ctx) {
    auto core = std::make_unique<ItaCore>();
    core->d = static_cast<int>(U.cols());
    core->m = static_cast<int>(Y.cols());
    core->axis_nodes = grid.axis_nodes;
    for (int a = 0; a < core->d; ++a) {
        if (grid.axis_nodes[static_cast<std::size_t>(a)].size() < 2)
            throw ConfigError("ita: axis " + std::to_string(a + 1) + " has fewer than 2 nodes");
        core->bases.emplace_back(grid.axis_nodes[static_cast<std::size_t>(a)]);
        core->dims.push_back(core->bases.back().size());
    }
    core->cells = grid.cell_index;
    core->targets = Y;
    core->lambda = 1e-3 * ctx.tune.ita_lambda_scale.value_or(1.0);
    core->solve(&ctx);
    return core;
}

namespace {

SurrogateModel wrap_for(const TrainingSample& sample0, const ModelOptions& options,
                        std::unique_ptr<TechniqueModel> core, double seconds,
                        std::vector<std::string> warnings, Preprocessor pp) {
    ModelMeta meta;
    meta.n_train = sample0.n();
    meta.bbox_lo = sample0.inputs.colwise().minCoeff().transpose();
    meta.bbox_hi = sample0.inputs.colwise().maxCoeff().transpose();
    meta.train_seconds = seconds;
    meta.warnings = std::move(warnings);
    return SurrogateModel(std::move(pp), std::shared_ptr<const TechniqueModel>(std::move(core)),
                          options, std::move(meta));
}

}  // namespace

SurrogateModel fit_ta(const TrainingSample& sample0, const ModelOptions& options,
                      const std::vector<FactorTech>& techniques) {
    TrainingSample sample = sample0;
    sample.normalize_metadata();
    ModelOptions opt = options;
    opt.technique = TechniqueChoice::ta;
    const auto report = validate_sample(sample, opt);
    if (report.has_conflict()) throw ConfigError("invalid training request:\n" + report.summary());

    Stopwatch watch;
    Preprocessor pp(sample);
    const Eigen::MatrixXd U = pp.encode_rows(sample.inputs);
    const Eigen::MatrixXd Y = pp.standardize_outputs(sample.outputs);
    std::vector<std::string> warnings;
    TrainContext ctx{opt, TuneParams{}, Rng(opt.seed), &warnings};
    const auto factorization = factorize_doe(U);
    auto core = fit_ta_core(U, Y, factorization, techniques, ctx);
    if (opt.smoothing > 0.0) core = core->resmoothed(opt.smoothing);
    return wrap_for(sample, opt, std::move(core), watch.seconds(), std::move(warnings), std::move(pp));
}

SurrogateModel fit_ita(const TrainingSample& sample0, const ModelOptions& options) {
    TrainingSample sample = sample0;
    sample.normalize_metadata();
    ModelOptions opt = options;
    opt.technique = TechniqueChoice::ita;
    const auto report = validate_sample(sample, opt);
    if (report.has_conflict()) throw ConfigError("invalid training request:\n" + report.summary());

    Stopwatch watch;
    Preprocessor pp(sample);
    const Eigen::MatrixXd U = pp.encode_rows(sample.inputs);
    const Eigen::MatrixXd Y = pp.standardize_outputs(sample.outputs);
    std::vector<std::string> warnings;
    TrainContext ctx{opt, TuneParams{}, Rng(opt.seed), &warnings};
    const auto grid = detect_incomplete_grid(U);
    if (!grid) throw ConfigError("ita: training inputs do not form an incomplete grid");
    auto core = fit_ita_core(U, Y, *grid, ctx);
    if (opt.smoothing > 0.0) core = core->resmoothed(opt.smoothing);
    return wrap_for(sample, opt, std::move(core), watch.seconds(), std::move(warnings), std::move(pp));
}

std::vector<double> ita_cg_objective_trace(const TechniqueModel& core) {
    const auto* ita = dynamic_cast<const ItaCore*>(&core);
    if (!ita) throw Error("ita_cg_objective_trace: not an ita model");
    return ita->cg_objectives;
}

namespace detail_tensor {

std::unique_ptr<TechniqueModel> load_ta(const nlohmann::json& params) {
    auto core = std::make_unique<TaCore>();
    for (const auto& fj : params.at("factors")) core->factors.push_back(Factor::from_json(fj));
    core->dims = params.at("dims").get<std::vector<int>>();
    core->d = params.at("d").get<int>();
    core->m = params.at("m").get<int>();
    core->ridge = params.at("ridge").get<double>();
    const long long total = product_of(core->dims);
    auto mat = [&](const nlohmann::json& a, Eigen::Index rows, Eigen::Index cols) {
        const auto v = a.get<std::vector<double>>();
        if (static_cast<Eigen::Index>(v.size()) != rows * cols)
            throw IoError("model file: bad ta matrix size");
        return Eigen::MatrixXd(Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols));
    };
    core->coef = mat(params.at("coef"), total, core->m);
    core->rhs_rotated = mat(params.at("rhs_rotated"), total, core->m);
    for (std::size_t k = 0; k < core->dims.size(); ++k) {
        const auto& e = params.at("eigen").at(k);
        const int p = core->dims[k];
        core->eigvecs.push_back(mat(e.at("vectors"), p, p));
        const auto ev = e.at("values").get<std::vector<double>>();
        core->eigvals.push_back(Eigen::Map<const Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size())));
    }
    return core;
}

std::unique_ptr<TechniqueModel> load_ita(const nlohmann::json& params) {
    auto core = std::make_unique<ItaCore>();
    core->axis_nodes = params.at("axis_nodes").get<std::vector<std::vector<double>>>();
    for (const auto& bj : params.at("bases")) core->bases.push_back(BsplBasis::from_json(bj));
    core->dims = params.at("dims").get<std::vector<int>>();
    core->d = params.at("d").get<int>();
    core->m = params.at("m").get<int>();
    core->lambda = params.at("lambda").get<double>();
    core->shift = params.at("shift").get<double>();
    core->cells = params.at("cells").get<std::vector<std::vector<int>>>();
    const auto n_obs = params.at("n_obs").get<Eigen::Index>();
    const auto tv = params.at("targets").get<std::vector<double>>();
    core->targets = Eigen::Map<const Eigen::MatrixXd>(tv.data(), n_obs, core->m);
    const auto cv = params.at("coef").get<std::vector<double>>();
    core->coef = Eigen::Map<const Eigen::MatrixXd>(cv.data(), product_of(core->dims), core->m);
    return core;
}

}  // namespace detail_tensor

}  // namespace gta
