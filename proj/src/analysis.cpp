#include "pheno/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "pheno/common.hpp"
#include "pheno/csv.hpp"

namespace pheno::analysis {

namespace {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
    const Eigen::VectorXd norms = x.rowwise().squaredNorm();
    Eigen::MatrixXd d = -2.0 * x * x.transpose();
    d.colwise() += norms;
    d.rowwise() += norms.transpose();
    d = d.cwiseMax(0.0);
    d.diagonal().setZero();
    return d;
}

void check_labels(std::span<const int> labels, const char* who) {
    bool pos = false, neg = false;
    for (int l : labels) {
        if (l == 1) pos = true;
        else if (l == 0) neg = true;
        else throw PreconditionError(std::string(who) + ": labels must be 0 or 1");
    }
    if (!pos || !neg) throw PreconditionError(std::string(who) + ": both classes must be present");
}

constexpr std::size_t kKlEvery = 25;
constexpr std::size_t kKlTail = 50;  // every iteration near the end

double kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
    double kl = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            if (i == j) continue;
            const double pij = p(i, j);
            if (pij > 0.0) kl += pij * std::log(pij / std::max(q(i, j), 1e-300));
        }
    }
    return kl;
}

}  // namespace

Eigen::MatrixXd joint_probabilities(const Eigen::MatrixXd& features, double perplexity) {
    const Eigen::Index n = features.rows();
    const Eigen::MatrixXd dist = squared_distances(features);
    const double target = std::log(perplexity);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);

    for (Eigen::Index i = 0; i < n; ++i) {
        double d_min = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i) d_min = std::min(d_min, dist(i, j));
        }
        double beta = 1.0;
        double lo = 0.0;
        double hi = std::numeric_limits<double>::infinity();
        Eigen::VectorXd row(n);
        for (int iter = 0; iter < 200; ++iter) {
            double sum = 0.0, weighted = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                const double shifted = dist(i, j) - d_min;
                row(j) = j == i ? 0.0 : std::exp(-beta * shifted);
                sum += row(j);
                weighted += row(j) * shifted;
            }
            const double entropy = std::log(sum) + beta * weighted / sum;
            row /= sum;
            const double diff = entropy - target;
            if (std::abs(diff) < 1e-5) break;
            if (diff > 0.0) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        p.row(i) = row.transpose();
    }
    Eigen::MatrixXd joint = ((p + p.transpose()) / (2.0 * static_cast<double>(n))).cwiseMax(1e-12);
    joint.diagonal().setZero();
    return joint;
}

Embedding tsne(const Eigen::MatrixXd& features, const TsneParams& params) {
    const Eigen::Index n = features.rows();
    if (n < 5) throw ParameterError("tsne: at least 5 points are required");
    if (!(params.perplexity > 0.0) || !(params.perplexity < static_cast<double>(n - 1) / 3.0)) {
        throw ParameterError("tsne: perplexity must be in (0, (n - 1) / 3) for n = " + std::to_string(n));
    }
    if (!features.allFinite()) throw PreconditionError("tsne: non-finite features");

    const Eigen::MatrixXd p = joint_probabilities(features, params.perplexity);

    Embedding e;
    e.perplexity = params.perplexity;
    e.seed = params.seed;
    e.coords.resize(n, 2);
    std::mt19937_64 rng(params.seed);
    std::normal_distribution<double> normal(0.0, 1e-4);
    for (Eigen::Index i = 0; i < n; ++i) {
        e.coords(i, 0) = normal(rng);
        e.coords(i, 1) = normal(rng);
    }

    Eigen::MatrixXd update = Eigen::MatrixXd::Zero(n, 2);
    Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
    Eigen::MatrixXd num = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd grad(n, 2);

    // Student-t kernel of the current embedding; returns its sum.
    auto student = [&] {
        double z = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double yj0 = e.coords(j, 0), yj1 = e.coords(j, 1);
            for (Eigen::Index i = j + 1; i < n; ++i) {
                const double d0 = e.coords(i, 0) - yj0, d1 = e.coords(i, 1) - yj1;
                const double v = 1.0 / (1.0 + d0 * d0 + d1 * d1);
                num(i, j) = v;
                num(j, i) = v;
                z += 2.0 * v;
            }
        }
        return z;
    };

    for (std::size_t it = 0; it < params.iterations; ++it) {
        const bool exaggerate = it < params.exaggeration_iterations;
        const double factor = exaggerate ? params.early_exaggeration : 1.0;
        const double momentum = exaggerate ? 0.5 : 0.8;

        const double z = student();
        // KL is recorded before each update.
        if (it % kKlEvery == 0 || it + kKlTail >= params.iterations) e.kl_history.push_back(kl_divergence(p, num / z));

        // dC/dy_i = 4 sum_j (p_ij - q_ij) num_ij (y_i - y_j)
        grad.setZero();
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) {
                if (i == j) continue;
                const double w = (factor * p(i, j) - num(i, j) / z) * num(i, j);
                grad(j, 0) += w * (e.coords(j, 0) - e.coords(i, 0));
                grad(j, 1) += w * (e.coords(j, 1) - e.coords(i, 1));
            }
        }
        grad *= 4.0;

        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index d = 0; d < 2; ++d) {
                const bool same_sign = (grad(i, d) > 0.0) == (update(i, d) > 0.0);
                gains(i, d) = same_sign ? std::max(gains(i, d) * 0.8, 0.01) : gains(i, d) + 0.2;
            }
        }
        update = momentum * update - params.learning_rate * gains.cwiseProduct(grad);
        e.coords += update;
        e.coords.rowwise() -= e.coords.colwise().mean();
    }
    const double z = student();
    e.kl_history.push_back(kl_divergence(p, num / z));
    if (!e.coords.allFinite()) throw NumericalError("tsne: embedding diverged");
    e.kl_divergence = e.kl_history.empty() ? 0.0 : e.kl_history.back();
    return e;
}

Eigen::VectorXd LogisticModel::decision(const Eigen::MatrixXd& features) const {
    if (features.cols() != weights.size()) throw PreconditionError("logistic: feature width mismatch");
    return (features * weights).array() + bias;
}

Eigen::VectorXd LogisticModel::predict_proba(const Eigen::MatrixXd& features) const {
    return decision(features).unaryExpr([](double s) { return 1.0 / (1.0 + std::exp(-s)); });
}

double logistic_objective(const LogisticModel& m, const Eigen::MatrixXd& features, std::span<const int> labels,
                          Eigen::VectorXd* grad_w, double* grad_b) {
    const Eigen::Index n = features.rows();
    const Eigen::VectorXd s = m.decision(features);
    double loss = 0.0;
    Eigen::VectorXd resid(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double y = labels[static_cast<std::size_t>(i)];
        // log(1 + e^s) - y s, evaluated stably
        const double si = s(i);
        const double softplus = si > 0.0 ? si + std::log1p(std::exp(-si)) : std::log1p(std::exp(si));
        loss += softplus - y * si;
        resid(i) = 1.0 / (1.0 + std::exp(-si)) - y;
    }
    const double nn = static_cast<double>(n);
    loss = loss / nn + 0.5 * m.l2 * m.weights.squaredNorm();
    if (grad_w != nullptr) *grad_w = features.transpose() * resid / nn + m.l2 * m.weights;
    if (grad_b != nullptr) *grad_b = resid.sum() / nn;
    return loss;
}

LogisticModel fit_logistic(const Eigen::MatrixXd& features, std::span<const int> labels, double l2,
                           std::size_t iterations) {
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw PreconditionError("fit_logistic: features and labels differ in length");
    }
    if (l2 < 0.0) throw ParameterError("fit_logistic: l2 must be >= 0");
    check_labels(labels, "fit_logistic");
    if (!features.allFinite()) throw PreconditionError("fit_logistic: non-finite features");

    LogisticModel m;
    m.weights = Eigen::VectorXd::Zero(features.cols());
    m.l2 = l2;

    const double max_norm = (features.rowwise().squaredNorm().array() + 1.0).maxCoeff();
    const double step = 1.0 / (0.25 * max_norm + l2);
    Eigen::VectorXd gw;
    double gb = 0.0;
    logistic_objective(m, features, labels, &gw, &gb);
    for (std::size_t it = 0; it < iterations; ++it) {
        m.weights -= step * gw;
        m.bias -= step * gb;
        logistic_objective(m, features, labels, &gw, &gb);
        ++m.iterations;
    }
    m.gradient_norm = std::sqrt(gw.squaredNorm() + gb * gb);
    if (!m.weights.allFinite() || !std::isfinite(m.bias)) throw NumericalError("fit_logistic: diverged");
    return m;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw PreconditionError("auc: scores and labels differ in length");
    check_labels(labels, "auc");
    const std::size_t n = scores.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[idx[k]] == 1) {
                rank_sum += avg_rank;
                ++n_pos;
            }
        }
        i = j;
    }
    const double pos = static_cast<double>(n_pos);
    const double neg = static_cast<double>(n - n_pos);
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double auc(const LogisticModel& m, const Eigen::MatrixXd& features, std::span<const int> labels) {
    const Eigen::VectorXd s = m.decision(features);
    return auc(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), labels);
}

AdmissionScores aggregate_by_admission(std::span<const double> scores, std::span<const std::int64_t> hadm_ids,
                                       std::span<const int> labels) {
    if (scores.size() != hadm_ids.size() || scores.size() != labels.size()) {
        throw PreconditionError("aggregate_by_admission: length mismatch");
    }
    struct Acc {
        double sum = 0.0;
        std::size_t n = 0;
        int label = 0;
    };
    std::map<std::int64_t, Acc> acc;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        auto& a = acc[hadm_ids[i]];
        a.sum += scores[i];
        ++a.n;
        a.label = labels[i];
    }
    AdmissionScores out;
    for (const auto& [hadm, a] : acc) {
        out.hadm_id.push_back(hadm);
        out.score.push_back(a.sum / static_cast<double>(a.n));
        out.label.push_back(a.label);
    }
    return out;
}

double nearest_neighbor_accuracy(const Eigen::MatrixXd& points, std::span<const int> labels) {
    const Eigen::Index n = points.rows();
    if (n < 2 || static_cast<std::size_t>(n) != labels.size()) {
        throw PreconditionError("nearest_neighbor_accuracy: need >= 2 labelled points");
    }
    const Eigen::MatrixXd d = squared_distances(points);
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index best = -1;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i && (best < 0 || d(i, j) < d(i, best))) best = j;
        }
        if (labels[static_cast<std::size_t>(best)] == labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

void write_embedding_csv(const std::filesystem::path& path, const Embedding& e, std::span<const std::size_t> patch_ids,
                         std::span<const int> labels) {
    if (patch_ids.size() != static_cast<std::size_t>(e.coords.rows()) || labels.size() != patch_ids.size()) {
        throw PreconditionError("write_embedding_csv: length mismatch");
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "patch_id,label,x,y\n";
    for (std::size_t i = 0; i < patch_ids.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out << patch_ids[i] << ',' << labels[i] << ',' << csv::format_double(e.coords(r, 0)) << ','
            << csv::format_double(e.coords(r, 1)) << "\n";
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace pheno::analysis
