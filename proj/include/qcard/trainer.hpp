#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qcard/errors.hpp"
#include "qcard/postproc.hpp"
#include "qcard/vqc.hpp"
#include "qcard/workload.hpp"

// Hybrid training loop: circuit forward/gradient per query, one Adam step per
// full-batch episode, all in natural-log cardinality space.
namespace qcard::trainer {

enum class Mode { Estimation, Correction };

inline const char* mode_name(Mode mode) {
    switch (mode) {
        case Mode::Estimation: return "estimate";
        case Mode::Correction: return "correct";
    }
    throw ConfigError("unknown mode");
}

inline Mode parse_mode(std::string_view name) {
    if (name == "estimate") return Mode::Estimation;
    if (name == "correct") return Mode::Correction;
    throw ConfigError("unknown mode: " + std::string(name) +
                      " (expected estimate or correct)");
}

struct ModelConfig {
    Mode mode = Mode::Estimation;
    vqc::EncodingSpec encoding;
    vqc::AnsatzSpec ansatz;
    postproc::PostLayer layer = postproc::make_layer(postproc::LayerKind::RationalLog);
    std::uint64_t seed = 0;
};

struct Model {
    ModelConfig config;
    vqc::ParamVector theta;
    std::string rng_state; // serialized engine, resumable after the init draws
};

namespace detail {

inline void check_config(const ModelConfig& cfg) {
    if (cfg.encoding.n_qubits != cfg.ansatz.n_qubits) {
        throw ConfigError("encoding uses " +
                          std::to_string(cfg.encoding.n_qubits) +
                          " qubits but ansatz uses " +
                          std::to_string(cfg.ansatz.n_qubits));
    }
    postproc::validate(cfg.layer);
    const std::size_t dim = std::size_t{1} << cfg.ansatz.n_qubits;
    if (static_cast<std::size_t>(cfg.layer.width) > dim) {
        throw ConfigError("layer width " + std::to_string(cfg.layer.width) +
                          " exceeds the " + std::to_string(dim) +
                          " basis states of " +
                          std::to_string(cfg.ansatz.n_qubits) + " qubits");
    }
}

inline double log_card(std::uint64_t card) {
    return std::log(static_cast<double>(card));
}

} // namespace detail

// Training target in log space: ln t for estimation, ln t - ln f for
// correction (the model then learns the multiplicative correction).
inline double target_log(const ModelConfig& cfg,
                         const workload::QueryFeature& query) {
    if (cfg.mode == Mode::Correction) {
        if (!query.classical_card) {
            throw WorkloadError("query '" + query.query_id +
                                "' has no classical estimate");
        }
        return detail::log_card(query.true_card) -
               detail::log_card(*query.classical_card);
    }
    return detail::log_card(query.true_card);
}

inline Model init_model(ModelConfig cfg, const workload::Workload& workload) {
    detail::check_config(cfg);
    if (workload.queries.empty()) throw UsageError("workload has no queries");
    workload::check_encoding_fit(workload, cfg.encoding.n_qubits);
    if (cfg.mode == Mode::Correction) workload::require_classical(workload);
    cfg.encoding.max_table_id = std::max(workload.schema_table_count, 1);

    Model model;
    model.config = std::move(cfg);
    std::mt19937_64 engine(model.config.seed);
    std::uniform_real_distribution<double> angle(-std::numbers::pi,
                                                 std::numbers::pi);
    model.theta.resize(vqc::param_count(model.config.ansatz));
    for (double& t : model.theta) t = angle(engine);

    if (model.config.layer.kind == postproc::LayerKind::Linear) {
        // The linear head's scale pins the output range to the targets; it is
        // held fixed during training.
        double max_log = 0.0;
        for (const auto& q : workload.queries) {
            max_log = std::max(max_log, detail::log_card(q.true_card));
        }
        if (max_log > 0.0) model.config.layer.scalars[0] = max_log;
    }

    std::ostringstream state;
    state << engine;
    model.rng_state = state.str();
    return model;
}

inline double predict(const Model& model, const workload::QueryFeature& query) {
    const auto encoding = vqc::encode_query(model.config.encoding, query.slots);
    const auto probs = vqc::forward(
        model.config.ansatz.n_qubits, encoding,
        vqc::build_ansatz(model.config.ansatz, model.theta));
    const double v = postproc::eval(model.config.layer, probs);
    if (model.config.mode == Mode::Correction) {
        if (!query.classical_card) {
            throw WorkloadError("query '" + query.query_id +
                                "' has no classical estimate");
        }
        return detail::log_card(*query.classical_card) + v;
    }
    return v;
}

struct LossGrad {
    double value = 0.0;
    double dpredicted = 0.0;
};

inline LossGrad loss(double predicted_log, double true_log) {
    if (!std::isfinite(predicted_log) || !std::isfinite(true_log)) {
        throw NumericError("non-finite value in loss");
    }
    const double delta = predicted_log - true_log;
    return {delta * delta, 2.0 * delta};
}

// ---------------------------------------------------------------------------
// Batch gradient

struct QueryGrad {
    double loss = 0.0;
    double predicted_log = 0.0;
    std::vector<double> dtheta;
    std::vector<double> dscalars;
};

inline QueryGrad query_gradient(const Model& model,
                                const workload::QueryFeature& query) {
    const double target = target_log(model.config, query);
    const double base = model.config.mode == Mode::Correction
                            ? detail::log_card(*query.classical_card)
                            : 0.0;
    const auto& layer = model.config.layer;
    QueryGrad out;
    out.dscalars.assign(postproc::scalar_count(layer), 0.0);

    const auto encoding = vqc::encode_query(model.config.encoding, query.slots);
    const auto tail = [&](const std::vector<double>& probs) {
        const auto head = postproc::grad(layer, probs);
        out.predicted_log = base + head.value;
        // The head output is compared against the mode-relative target, so
        // correction mode scores the multiplicative fix-up, not the absolute
        // cardinality twice over.
        const auto l = loss(head.value, target);
        vqc::LossEval eval;
        eval.value = l.value;
        eval.dprob.assign(probs.size(), 0.0);
        for (std::size_t i = 0; i < head.dx.size(); ++i) {
            eval.dprob[i] = l.dpredicted * head.dx[i];
        }
        for (std::size_t j = 0; j < head.dscalars.size(); ++j) {
            out.dscalars[j] = l.dpredicted * head.dscalars[j];
        }
        return eval;
    };
    auto grad =
        vqc::parameter_shift_grad(encoding, model.config.ansatz, model.theta, tail);
    out.loss = grad.loss;
    out.dtheta = std::move(grad.dtheta);
    return out;
}

struct BatchGrad {
    double total_loss = 0.0;
    std::vector<double> dtheta;
    std::vector<double> dscalars;
    std::vector<double> predictions; // per query, in input order
};

// Per-query work may fan out over threads; the reduction always walks queries
// in order, so the result is bitwise identical for any worker count.
inline BatchGrad batch_gradient(const Model& model,
                                const std::vector<workload::QueryFeature>& queries,
                                int workers = 1) {
    const std::size_t n = queries.size();
    std::vector<QueryGrad> per_query(n);
    const int used = std::clamp<int>(workers, 1, static_cast<int>(std::max<std::size_t>(n, 1)));
    if (used <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            per_query[i] = query_gradient(model, queries[i]);
        }
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(used));
        for (int w = 0; w < used; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = static_cast<std::size_t>(w); i < n;
                         i += static_cast<std::size_t>(used)) {
                        per_query[i] = query_gradient(model, queries[i]);
                    }
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (const auto& err : errors) {
            if (err) std::rethrow_exception(err);
        }
    }

    BatchGrad out;
    out.dtheta.assign(model.theta.size(), 0.0);
    out.dscalars.assign(postproc::scalar_count(model.config.layer), 0.0);
    out.predictions.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& q = per_query[i];
        out.total_loss += q.loss;
        for (std::size_t k = 0; k < out.dtheta.size(); ++k) {
            out.dtheta[k] += q.dtheta[k];
        }
        for (std::size_t j = 0; j < out.dscalars.size(); ++j) {
            out.dscalars[j] += q.dscalars[j];
        }
        out.predictions[i] = q.predicted_log;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Optimizer

struct TrainConfig {
    int episodes = 8000;
    double lr_initial = 0.05;
    // Decay chosen so the default schedule lands at lr_initial / 10 after the
    // default 8000 episodes.
    double lr_decay = std::pow(10.0, -1.0 / 8000.0);
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double split = 1.0; // train fraction; 1.0 trains and evaluates on everything
    int workers = 1;
};

namespace detail {

inline void check_train_config(const TrainConfig& cfg) {
    if (cfg.episodes < 0) throw ConfigError("episodes must be non-negative");
    if (cfg.lr_initial <= 0.0) throw ConfigError("lr_initial must be positive");
    if (cfg.lr_decay <= 0.0 || cfg.lr_decay > 1.0) {
        throw ConfigError("lr_decay must lie in (0, 1]");
    }
    if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0) {
        throw ConfigError("adam betas must lie in [0, 1)");
    }
    if (cfg.adam_eps <= 0.0) throw ConfigError("adam_eps must be positive");
    if (cfg.split <= 0.0 || cfg.split > 1.0) {
        throw ConfigError("split must lie in (0, 1]");
    }
    if (cfg.workers < 1) throw ConfigError("workers must be at least 1");
}

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long long t = 0;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void step(const std::vector<double*>& params, const std::vector<double>& grad,
              double lr, const TrainConfig& cfg) {
        ++t;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < grad.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            *params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
};

} // namespace detail

// ---------------------------------------------------------------------------
// Reports

struct QueryReport {
    std::string query_id;
    double predicted_log = 0.0;
    double true_log = 0.0;
    double abs_log_error = 0.0;
    std::optional<double> baseline_abs_log_error;
};

struct RunReport {
    std::vector<QueryReport> queries;
    double mean_abs_log_error = 0.0;
    std::optional<double> baseline_mean_abs_log_error;
    std::optional<double> improvement_factor; // unset when the model is exact
    bool exact_model = false;                 // model error is exactly zero
};

inline RunReport evaluate(
    const Model& model, const std::vector<workload::QueryFeature>& queries,
    const std::optional<std::vector<double>>& baseline_log_cards = {}) {
    if (queries.empty()) throw UsageError("nothing to evaluate");
    if (baseline_log_cards && baseline_log_cards->size() != queries.size()) {
        throw UsageError("baseline has " +
                         std::to_string(baseline_log_cards->size()) +
                         " entries for " + std::to_string(queries.size()) +
                         " queries");
    }
    RunReport report;
    double total = 0.0;
    for (const auto& q : queries) {
        QueryReport entry;
        entry.query_id = q.query_id;
        entry.predicted_log = predict(model, q);
        entry.true_log = detail::log_card(q.true_card);
        entry.abs_log_error = std::abs(entry.predicted_log - entry.true_log);
        total += entry.abs_log_error;
        report.queries.push_back(std::move(entry));
    }
    report.mean_abs_log_error = total / static_cast<double>(queries.size());
    if (baseline_log_cards) {
        double baseline_total = 0.0;
        for (std::size_t i = 0; i < queries.size(); ++i) {
            const double err = std::abs((*baseline_log_cards)[i] -
                                        report.queries[i].true_log);
            report.queries[i].baseline_abs_log_error = err;
            baseline_total += err;
        }
        report.baseline_mean_abs_log_error =
            baseline_total / static_cast<double>(queries.size());
        if (report.mean_abs_log_error == 0.0) {
            report.exact_model = true;
        } else {
            report.improvement_factor =
                *report.baseline_mean_abs_log_error / report.mean_abs_log_error;
        }
    }
    return report;
}

// Baseline log-cardinalities from the classical estimates, when every query
// has one.
inline std::optional<std::vector<double>> classical_baseline(
    const std::vector<workload::QueryFeature>& queries) {
    std::vector<double> out;
    for (const auto& q : queries) {
        if (!q.classical_card) return std::nullopt;
        out.push_back(detail::log_card(*q.classical_card));
    }
    return out;
}

struct TrainOutcome {
    RunReport report;               // evaluation on the eval split
    std::vector<double> loss_curve; // mean squared log error per episode
    std::vector<std::string> train_ids;
    std::vector<std::string> eval_ids;
};

inline TrainOutcome train(Model& model, const workload::Workload& workload,
                          const TrainConfig& cfg) {
    detail::check_train_config(cfg);
    detail::check_config(model.config);
    if (workload.queries.empty()) throw UsageError("workload has no queries");
    workload::check_encoding_fit(workload, model.config.encoding.n_qubits);
    if (model.config.mode == Mode::Correction) {
        workload::require_classical(workload);
    }

    // Split: deterministic shuffle decoupled from the init draws.
    std::vector<std::size_t> order(workload.queries.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<workload::QueryFeature> train_set;
    std::vector<workload::QueryFeature> eval_set;
    if (cfg.split >= 1.0) {
        train_set = workload.queries;
        eval_set = workload.queries;
    } else {
        std::mt19937_64 engine(model.config.seed + 1);
        std::shuffle(order.begin(), order.end(), engine);
        const auto train_n = std::max<std::size_t>(
            1, static_cast<std::size_t>(
                   cfg.split * static_cast<double>(order.size())));
        for (std::size_t i = 0; i < order.size(); ++i) {
            (i < train_n ? train_set : eval_set)
                .push_back(workload.queries[order[i]]);
        }
        if (eval_set.empty()) eval_set = train_set;
    }

    const bool freeze_scalars =
        model.config.layer.kind == postproc::LayerKind::Linear;
    const std::size_t n_theta = model.theta.size();
    const std::size_t n_scalars =
        freeze_scalars ? 0 : postproc::scalar_count(model.config.layer);

    detail::AdamState adam(n_theta + n_scalars);
    std::vector<double*> params;
    std::vector<double> grad(n_theta + n_scalars);
    params.reserve(n_theta + n_scalars);
    for (auto& t : model.theta) params.push_back(&t);
    for (std::size_t j = 0; j < n_scalars; ++j) {
        params.push_back(&model.config.layer.scalars[j]);
    }

    TrainOutcome outcome;
    for (const auto& q : train_set) outcome.train_ids.push_back(q.query_id);
    for (const auto& q : eval_set) outcome.eval_ids.push_back(q.query_id);

    double lr = cfg.lr_initial;
    for (int episode = 0; episode < cfg.episodes; ++episode) {
        BatchGrad batch;
        try {
            batch = batch_gradient(model, train_set, cfg.workers);
        } catch (const NumericError& e) {
            throw NumericError("episode " + std::to_string(episode) + ": " +
                               e.what());
        }
        const double mean_loss =
            batch.total_loss / static_cast<double>(train_set.size());
        if (!std::isfinite(mean_loss)) {
            throw NumericError("episode " + std::to_string(episode) +
                               ": non-finite loss");
        }
        outcome.loss_curve.push_back(mean_loss);

        for (std::size_t k = 0; k < n_theta; ++k) grad[k] = batch.dtheta[k];
        for (std::size_t j = 0; j < n_scalars; ++j) {
            grad[n_theta + j] = batch.dscalars[j];
        }
        adam.step(params, grad, lr, cfg);
        lr *= cfg.lr_decay;

        if (model.config.layer.kind == postproc::LayerKind::PlaceValue ||
            model.config.layer.kind == postproc::LayerKind::PlaceValueNeg) {
            // The base must stay above 1 for the head to remain a place-value
            // expansion.
            double& b = model.config.layer.scalars[0];
            b = std::max(b, 1.0 + 1e-6);
        }
    }

    outcome.report = evaluate(model, eval_set, classical_baseline(eval_set));
    return outcome;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointVersion = 1;

// Workload compatibility: the encoding must cover every table id the file can
// mention.
inline void check_compat(const Model& model, const workload::Workload& workload) {
    if (workload.schema_table_count > model.config.encoding.max_table_id) {
        throw WorkloadError(
            "workload spans " + std::to_string(workload.schema_table_count) +
            " tables but the checkpoint encodes at most " +
            std::to_string(model.config.encoding.max_table_id));
    }
}

inline void save_checkpoint(const Model& model,
                            const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["format_version"] = kCheckpointVersion;
    j["mode"] = mode_name(model.config.mode);
    j["encoding"] = {{"n_qubits", model.config.encoding.n_qubits},
                     {"max_table_id", model.config.encoding.max_table_id}};
    j["ansatz"] = {{"n_qubits", model.config.ansatz.n_qubits},
                   {"n_layers", model.config.ansatz.n_layers}};
    const auto& layer = model.config.layer;
    j["layer"] = {{"kind", postproc::kind_name(layer.kind)},
                  {"width", layer.width},
                  {"scalars", layer.scalars},
                  {"d", layer.d},
                  {"epsilon", layer.epsilon},
                  {"tie_scalars", layer.tie_scalars}};
    j["seed"] = model.config.seed;
    j["theta"] = model.theta;
    j["rng_state"] = model.rng_state;
    std::ofstream out(path);
    if (!out) throw WorkloadError("cannot write checkpoint " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw WorkloadError("failed writing checkpoint " + path.string());
}

inline Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw WorkloadError("cannot open checkpoint " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        const int version = j.at("format_version").get<int>();
        if (version != kCheckpointVersion) {
            throw WorkloadError("checkpoint " + path.string() +
                                " has unsupported version " +
                                std::to_string(version));
        }
        Model model;
        model.config.mode = parse_mode(j.at("mode").get<std::string>());
        model.config.encoding.n_qubits = j.at("encoding").at("n_qubits").get<int>();
        model.config.encoding.max_table_id =
            j.at("encoding").at("max_table_id").get<int>();
        model.config.ansatz.n_qubits = j.at("ansatz").at("n_qubits").get<int>();
        model.config.ansatz.n_layers = j.at("ansatz").at("n_layers").get<int>();
        const auto& layer = j.at("layer");
        model.config.layer.kind =
            postproc::parse_kind(layer.at("kind").get<std::string>());
        model.config.layer.width = layer.at("width").get<int>();
        model.config.layer.scalars =
            layer.at("scalars").get<std::vector<double>>();
        model.config.layer.d = layer.at("d").get<double>();
        model.config.layer.epsilon = layer.at("epsilon").get<double>();
        model.config.layer.tie_scalars = layer.at("tie_scalars").get<bool>();
        model.config.seed = j.at("seed").get<std::uint64_t>();
        model.theta = j.at("theta").get<std::vector<double>>();
        model.rng_state = j.at("rng_state").get<std::string>();
        try {
            detail::check_config(model.config);
        } catch (const ConfigError& e) {
            throw WorkloadError("checkpoint " + path.string() +
                                " is invalid: " + e.what());
        }
        if (model.theta.size() != vqc::param_count(model.config.ansatz)) {
            throw WorkloadError("checkpoint theta length does not match ansatz");
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw WorkloadError("checkpoint " + path.string() + ": " + e.what());
    }
}

} // namespace qcard::trainer
