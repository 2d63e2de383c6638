#include "rmdp/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace rmdp {

using nlohmann::json;

namespace {

const json& field(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + ": expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError(where + ": missing \"" + key + "\"");
    return *it;
}

double number(const json& j, const std::string& what) {
    if (!j.is_number()) throw ValidationError(what + ": expected a number");
    return j.get<double>();
}

long integer(const json& j, const std::string& what) {
    if (!j.is_number_integer()) throw ValidationError(what + ": expected an integer");
    return j.get<long>();
}

void expect_size(const json& j, long n, const std::string& what) {
    if (!j.is_array()) throw ValidationError(what + ": expected an array");
    if (static_cast<long>(j.size()) != n)
        throw DimensionMismatch(what + ": expected " + std::to_string(n) + " entries, got " +
                                std::to_string(j.size()));
}

template <typename F>
auto with_context(const std::string& what, F&& f) {
    try {
        return f();
    } catch (const ValidationError& e) {
        // Re-throw with the field name in front, keeping the error category.
        if (dynamic_cast<const NotStochastic*>(&e)) throw NotStochastic(what + ": " + e.what());
        if (dynamic_cast<const DimensionMismatch*>(&e)) throw DimensionMismatch(what + ": " + e.what());
        throw ValidationError(what + ": " + e.what());
    }
}

} // namespace

Vec vector_from_json(const json& j, const std::string& what) {
    if (!j.is_array()) throw ValidationError(what + ": expected an array");
    Vec v(static_cast<long>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) v(static_cast<long>(k)) = number(j[k], what);
    return v;
}

Mat matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw ValidationError(what + ": expected a non-empty 2-D array");
    if (!j[0].is_array()) throw ValidationError(what + ": expected a 2-D array");
    const long rows = static_cast<long>(j.size());
    const long cols = static_cast<long>(j[0].size());
    Mat M(rows, cols);
    for (long i = 0; i < rows; ++i) {
        expect_size(j[i], cols, what + " row " + std::to_string(i));
        for (long k = 0; k < cols; ++k) M(i, k) = number(j[i][k], what);
    }
    return M;
}

json vector_to_json(const Vec& v) {
    json out = json::array();
    for (long k = 0; k < v.size(); ++k) out.push_back(v(k));
    return out;
}

json matrix_to_json(const Mat& M) {
    json out = json::array();
    for (long i = 0; i < M.rows(); ++i) out.push_back(vector_to_json(M.row(i).transpose()));
    return out;
}

TransitionKernel InstanceFile::nominal_kernel() const {
    if (kernel) return *kernel;
    if (factor_model) return assemble_kernel(*factor_model, factor_model->W_nom());
    throw ValidationError("instance has neither \"kernel\" nor \"factor_model\"");
}

InstanceFile parse_instance(const json& doc) {
    if (!doc.is_object()) throw ValidationError("instance: expected a JSON object");
    const long S = integer(field(doc, "states", "instance"), "states");
    const long A = integer(field(doc, "actions", "instance"), "actions");
    if (S < 1 || A < 1) throw EmptyInput("instance: states and actions must be >= 1");
    const double discount = number(field(doc, "discount", "instance"), "discount");

    const json& jp0 = field(doc, "p0", "instance");
    expect_size(jp0, S, "p0");
    const Vec p0 = vector_from_json(jp0, "p0");

    const json& jr = field(doc, "rewards", "instance");
    expect_size(jr, S, "rewards");
    const Mat rewards = matrix_from_json(jr, "rewards");
    if (rewards.cols() != A) throw DimensionMismatch("rewards: expected " + std::to_string(A) + " columns");

    InstanceFile out{MdpInstance(rewards, discount, p0), {}, {}, {}, {}};

    if (doc.contains("kernel")) {
        const json& jk = doc["kernel"];
        expect_size(jk, S, "kernel");
        std::vector<Mat> slices;
        for (long s = 0; s < S; ++s) {
            expect_size(jk[s], A, "kernel[" + std::to_string(s) + "]");
            Mat slice = matrix_from_json(jk[s], "kernel");
            if (slice.cols() != S) throw DimensionMismatch("kernel: rows must have one entry per state");
            slices.push_back(std::move(slice));
        }
        out.kernel = with_context("kernel", [&] { return TransitionKernel(std::move(slices)); });
    }

    if (doc.contains("factor_model")) {
        const json& jf = doc["factor_model"];
        const long r = integer(field(jf, "r", "factor_model"), "factor_model.r");
        const json& jU = field(jf, "U", "factor_model");
        expect_size(jU, S, "factor_model.U");
        std::vector<Mat> U;
        for (long s = 0; s < S; ++s) {
            expect_size(jU[s], r, "factor_model.U[" + std::to_string(s) + "]");
            Mat block = matrix_from_json(jU[s], "factor_model.U");
            if (block.cols() != A) throw DimensionMismatch("factor_model.U: blocks must be r x A");
            U.push_back(std::move(block));
        }
        const json& jW = field(jf, "W_nom", "factor_model");
        expect_size(jW, S, "factor_model.W_nom");
        Mat W = matrix_from_json(jW, "factor_model.W_nom");
        if (W.cols() != r) throw DimensionMismatch("factor_model.W_nom: expected r columns");
        out.factor_model = with_context("factor_model", [&] { return FactorModel(std::move(U), std::move(W)); });
    }

    if (doc.contains("uncertainty")) {
        const json& ju = doc["uncertainty"];
        UncertaintySpec spec;
        if (ju.contains("type")) {
            if (!ju["type"].is_string()) throw ValidationError("uncertainty.type: expected a string");
            spec.type = ju["type"].get<std::string>();
        }
        if (spec.type == "budget") {
            if (ju.contains("tau")) spec.tau = number(ju["tau"], "uncertainty.tau");
            if (ju.contains("c")) spec.c = number(ju["c"], "uncertainty.c");
            if (!(spec.tau >= 0.0 && spec.tau <= 1.0)) throw ValidationError("uncertainty.tau: must lie in [0, 1]");
            if (!(spec.c >= 0.0)) throw ValidationError("uncertainty.c: must be >= 0");
        } else if (spec.type == "polytope") {
            const json& sets = field(ju, "sets", "uncertainty");
            if (!sets.is_array()) throw ValidationError("uncertainty.sets: expected an array");
            for (const auto& js : sets) {
                Polytope poly;
                poly.A = matrix_from_json(field(js, "A", "uncertainty.sets"), "uncertainty.sets.A");
                poly.b = vector_from_json(field(js, "b", "uncertainty.sets"), "uncertainty.sets.b");
                if (poly.b.size() != poly.A.rows()) throw DimensionMismatch("uncertainty.sets: b length differs from rows of A");
                spec.polytopes.push_back(std::move(poly));
            }
        } else {
            throw ValidationError("uncertainty.type: must be \"budget\" or \"polytope\"");
        }
        if (ju.contains("pinned")) {
            for (const auto& jp : ju["pinned"]) {
                const long index = integer(field(jp, "index", "uncertainty.pinned"), "uncertainty.pinned.index");
                Vec point = vector_from_json(field(jp, "point", "uncertainty.pinned"), "uncertainty.pinned.point");
                if (point.size() != S) throw DimensionMismatch("uncertainty.pinned.point: expected one entry per state");
                spec.pinned.emplace_back(index, std::move(point));
            }
        }
        out.uncertainty = std::move(spec);
    }

    if (doc.contains("s_rect")) {
        const json& js = doc["s_rect"];
        SRectSpec spec;
        if (js.contains("tau")) spec.tau = number(js["tau"], "s_rect.tau");
        if (js.contains("pinned_states"))
            for (const auto& jst : js["pinned_states"]) {
                const long s = integer(jst, "s_rect.pinned_states");
                if (s < 0 || s >= S) throw IndexOutOfRange("s_rect.pinned_states: state out of range");
                spec.pinned_states.push_back(s);
            }
        out.s_rect = std::move(spec);
    }

    if (out.kernel && out.factor_model &&
        (out.factor_model->states() != S || out.factor_model->actions() != A))
        throw DimensionMismatch("factor_model: dimensions differ from the instance");
    return out;
}

json to_json(const InstanceFile& file) {
    const MdpInstance& inst = file.instance;
    json doc;
    doc["states"] = inst.states();
    doc["actions"] = inst.actions();
    doc["discount"] = inst.discount();
    doc["p0"] = vector_to_json(inst.p0());
    doc["rewards"] = matrix_to_json(inst.rewards());
    if (file.kernel) {
        json k = json::array();
        for (const auto& slice : file.kernel->slices()) k.push_back(matrix_to_json(slice));
        doc["kernel"] = std::move(k);
    }
    if (file.factor_model) {
        json U = json::array();
        for (const auto& block : file.factor_model->U()) U.push_back(matrix_to_json(block));
        doc["factor_model"] = {{"r", file.factor_model->factors()},
                               {"U", std::move(U)},
                               {"W_nom", matrix_to_json(file.factor_model->W_nom())}};
    }
    if (file.uncertainty) {
        const UncertaintySpec& spec = *file.uncertainty;
        json ju;
        ju["type"] = spec.type;
        if (spec.type == "budget") {
            ju["tau"] = spec.tau;
            ju["c"] = spec.c;
        } else {
            json sets = json::array();
            for (const auto& poly : spec.polytopes)
                sets.push_back({{"A", matrix_to_json(poly.A)}, {"b", vector_to_json(poly.b)}});
            ju["sets"] = std::move(sets);
        }
        if (!spec.pinned.empty()) {
            json pinned = json::array();
            for (const auto& [index, point] : spec.pinned)
                pinned.push_back({{"index", index}, {"point", vector_to_json(point)}});
            ju["pinned"] = std::move(pinned);
        }
        doc["uncertainty"] = std::move(ju);
    }
    if (file.s_rect) doc["s_rect"] = {{"tau", file.s_rect->tau}, {"pinned_states", file.s_rect->pinned_states}};
    return doc;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": invalid JSON (" + e.what() + ")");
    }
}

void write_json_file(const json& doc, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot write " + path);
    os << doc.dump(2) << '\n';
}

InstanceFile load_instance(const std::string& path) { return parse_instance(read_json_file(path)); }

void save_instance(const InstanceFile& file, const std::string& path) { write_json_file(to_json(file), path); }

FactorUncertainty build_uncertainty(const InstanceFile& file, std::optional<double> tau) {
    if (!file.factor_model) throw ValidationError("instance has no \"factor_model\"");
    const FactorModel& fm = *file.factor_model;
    FactorUncertainty fu;
    const UncertaintySpec spec = file.uncertainty.value_or(UncertaintySpec{});
    if (spec.type == "polytope") {
        if (static_cast<long>(spec.polytopes.size()) != fm.factors())
            throw DimensionMismatch("uncertainty.sets: need one set per factor");
        for (const auto& poly : spec.polytopes) fu.sets.emplace_back(poly);
    } else {
        const double radius = tau.value_or(spec.tau);
        if (!(radius >= 0.0 && radius <= 1.0)) throw ValidationError("tau: must lie in [0, 1]");
        fu = build_budget_uncertainty(fm.W_nom(), radius, spec.c);
    }
    for (const auto& [index, point] : spec.pinned) fu = pin_factor(fu, index, point);
    validate(fu, fm.states());
    return fu;
}

SRectUncertainty build_s_rect(const InstanceFile& file, std::optional<double> tau) {
    double radius = 0.0;
    std::vector<long> pinned;
    if (file.s_rect) {
        radius = file.s_rect->tau;
        pinned = file.s_rect->pinned_states;
    } else if (file.uncertainty && file.uncertainty->type == "budget") {
        radius = file.uncertainty->tau;
    }
    if (tau) radius = *tau;
    return build_s_rect_uncertainty(file.nominal_kernel(), radius, pinned);
}

Policy parse_policy(const json& doc) {
    const json& m = doc.is_object() ? field(doc, "policy", "policy file") : doc;
    return with_context("policy", [&] { return Policy(matrix_from_json(m, "policy")); });
}

std::vector<long> absorbing_states(const TransitionKernel& P) {
    std::vector<long> out;
    for (long s = 0; s < P.states(); ++s) {
        bool absorbing = true;
        for (long a = 0; a < P.actions(); ++a) absorbing = absorbing && P(s, a, s) == 1.0;
        if (absorbing) out.push_back(s);
    }
    return out;
}

json to_json(const RobustSolveReport& report) {
    return {{"policy", matrix_to_json(report.policy.matrix())},
            {"W_star", matrix_to_json(report.W_star)},
            {"v", vector_to_json(report.v)},
            {"beta", vector_to_json(report.beta)},
            {"objective", report.objective},
            {"iterations", report.iterations},
            {"residual", report.residual},
            {"epsilon", report.epsilon},
            {"variant", report.variant == Variant::F1 ? "f1" : "f2"}};
}

json to_json(const ComparisonReport& report) {
    json rows = json::array();
    for (const auto& row : report.rows) {
        json jr = {{"tau", row.tau}, {"table", row.table}, {"metric", row.metric}, {"value", row.value}};
        jr["conf95"] = row.conf95 ? json(*row.conf95) : json(nullptr);
        rows.push_back(std::move(jr));
    }
    json robust_r = json::array(), robust_s = json::array();
    for (const auto& p : report.robust_r_policies) robust_r.push_back(matrix_to_json(p.matrix()));
    for (const auto& p : report.robust_s_policies) robust_s.push_back(matrix_to_json(p.matrix()));
    return {{"normalizer", report.normalizer},
            {"nominal_policy", matrix_to_json(report.nominal_policy.matrix())},
            {"robust_r_policies", std::move(robust_r)},
            {"robust_s_policies", std::move(robust_s)},
            {"rows", std::move(rows)}};
}

} // namespace rmdp
