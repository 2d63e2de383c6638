#pragma once

#include "rmdp/experiments.hpp"
#include "rmdp/factor_model.hpp"
#include "rmdp/mdp.hpp"
#include "rmdp/robust.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rmdp {

struct UncertaintySpec {
    std::string type = "budget"; ///< "budget" or "polytope"
    double tau = 0.0;
    double c = 1.0;
    std::vector<std::pair<long, Vec>> pinned;
    std::vector<Polytope> polytopes; ///< type == "polytope": one per factor
};

struct SRectSpec {
    double tau = 0.0;
    std::vector<long> pinned_states;
};

/// Parsed instance document. Stochastic arrays are validated on load.
struct InstanceFile {
    MdpInstance instance;
    std::optional<TransitionKernel> kernel;
    std::optional<FactorModel> factor_model;
    std::optional<UncertaintySpec> uncertainty;
    std::optional<SRectSpec> s_rect;

    /// The kernel if present, otherwise the factor model assembled at W_nom.
    TransitionKernel nominal_kernel() const;
};

InstanceFile parse_instance(const nlohmann::json& doc);
nlohmann::json to_json(const InstanceFile& file);

InstanceFile load_instance(const std::string& path);
void save_instance(const InstanceFile& file, const std::string& path);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const nlohmann::json& doc, const std::string& path);

/**
 * Factor sets described by the file. `tau` overrides the budget radius.
 * Without an uncertainty block the sets are budget sets of radius `tau`
 * (0 when not given).
 */
FactorUncertainty build_uncertainty(const InstanceFile& file, std::optional<double> tau = {});

/// s-rectangular set around the nominal kernel; `tau` overrides the file.
SRectUncertainty build_s_rect(const InstanceFile& file, std::optional<double> tau = {});

/// Accepts either a bare matrix or an object with a "policy" field.
Policy parse_policy(const nlohmann::json& doc);

/// States whose every action returns to the state with probability 1.
std::vector<long> absorbing_states(const TransitionKernel& P);

nlohmann::json matrix_to_json(const Mat& M);
nlohmann::json vector_to_json(const Vec& v);
Mat matrix_from_json(const nlohmann::json& j, const std::string& what);
Vec vector_from_json(const nlohmann::json& j, const std::string& what);

nlohmann::json to_json(const RobustSolveReport& report);
nlohmann::json to_json(const ComparisonReport& report);

} // namespace rmdp
