#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pheno/analysis.hpp"
#include "pheno/autoencoder.hpp"
#include "pheno/cohort.hpp"
#include "pheno/common.hpp"
#include "pheno/gpr.hpp"
#include "pheno/pipeline.hpp"
#include "pheno/preprocess.hpp"

namespace py = pybind11;
using namespace pheno;

namespace {

KeyValues to_kv(const py::dict& d) {
    KeyValues kv;
    for (const auto& [k, v] : d) {
        std::string value;
        if (py::isinstance<py::bool_>(v)) value = v.cast<bool>() ? "true" : "false";
        else value = py::str(v).cast<std::string>();
        kv.set(py::str(k).cast<std::string>(), value);
    }
    return kv;
}

}  // namespace

PYBIND11_MODULE(_pheno, m) {
    m.doc() = "Computational phenotyping: warped GPR interpolation, stacked autoencoders, t-SNE and AUC.";

    // Translators are tried newest first, so the specific subclass goes last.
    py::register_exception<Error>(m, "PhenoError");
    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);

    // preprocessing
    py::class_<preprocess::WarpParams>(m, "WarpParams")
        .def(py::init([](double a, double b) { return preprocess::WarpParams{a, b}; }), py::arg("a") = 3.0,
             py::arg("b") = 0.0)
        .def_readwrite("a", &preprocess::WarpParams::a)
        .def_readwrite("b", &preprocess::WarpParams::b);
    m.def("warp_times", [](const std::vector<double>& t, const preprocess::WarpParams& p) { return preprocess::warp_times(t, p); },
          py::arg("times"), py::arg("params") = preprocess::WarpParams{});
    m.def("standardize", [](const std::vector<double>& v) {
        auto [z, s] = preprocess::standardize(v);
        return py::make_tuple(z, s.mean, s.std);
    });

    // GPR
    py::class_<gpr::RqHyperparams>(m, "RqHyperparams")
        .def(py::init([](double amplitude2, double alpha, double tau, double noise2) {
                 return gpr::RqHyperparams{amplitude2, alpha, tau, noise2};
             }),
             py::arg("amplitude2") = 1.0, py::arg("alpha") = 1.0, py::arg("tau") = 1.0, py::arg("noise2") = 0.1)
        .def_readwrite("amplitude2", &gpr::RqHyperparams::amplitude2)
        .def_readwrite("alpha", &gpr::RqHyperparams::alpha)
        .def_readwrite("tau", &gpr::RqHyperparams::tau)
        .def_readwrite("noise2", &gpr::RqHyperparams::noise2)
        .def("__repr__", [](const gpr::RqHyperparams& h) {
            return "RqHyperparams(amplitude2=" + std::to_string(h.amplitude2) + ", alpha=" + std::to_string(h.alpha) +
                   ", tau=" + std::to_string(h.tau) + ", noise2=" + std::to_string(h.noise2) + ")";
        });
    m.def("rq_kernel", &gpr::rq_kernel, py::arg("t"), py::arg("t_prime"), py::arg("hyper"));
    m.def("kernel_matrix", [](const std::vector<double>& a, const std::vector<double>& b, const gpr::RqHyperparams& h) {
        return gpr::kernel_matrix(a, b, h);
    });

    py::class_<gpr::GpModel>(m, "GpModel")
        .def_readonly("chol", &gpr::GpModel::chol)
        .def_readonly("weights", &gpr::GpModel::weights)
        .def_readonly("hyper", &gpr::GpModel::hyper)
        .def_readonly("jitter", &gpr::GpModel::jitter);
    m.def("gp_fit", [](const std::vector<double>& x, const std::vector<double>& y, const gpr::RqHyperparams& h) {
        return gpr::fit(x, y, h);
    }, py::arg("x"), py::arg("y"), py::arg("hyper"));
    m.def("gp_predict", [](const gpr::GpModel& model, const std::vector<double>& x_star) {
        auto p = gpr::predict(model, x_star);
        return py::make_tuple(p.means, p.variances);
    }, py::arg("model"), py::arg("x_star"));
    m.def("log_marginal_likelihood", [](const gpr::GpModel& model, const std::vector<double>& y) {
        return gpr::log_marginal_likelihood(model, y);
    });

    py::class_<gpr::GridSpec>(m, "GridSpec")
        .def(py::init<>())
        .def_readwrite("amplitude2", &gpr::GridSpec::amplitude2)
        .def_readwrite("alpha", &gpr::GridSpec::alpha)
        .def_readwrite("tau", &gpr::GridSpec::tau)
        .def_readwrite("noise2", &gpr::GridSpec::noise2)
        .def("size", &gpr::GridSpec::size)
        .def("at", &gpr::GridSpec::at);
    m.def("grid_search", [](const std::vector<std::pair<std::vector<double>, std::vector<double>>>& series,
                            const gpr::GridSpec& grid, unsigned threads) {
        std::vector<gpr::TrainingSeries> train;
        for (const auto& [x, y] : series) train.push_back({x, y});
        auto r = gpr::grid_search(train, grid, threads);
        return py::make_tuple(r.best, r.best_index, r.best_lml, r.objective);
    }, py::arg("series"), py::arg("grid") = gpr::GridSpec{}, py::arg("threads") = 0);
    m.def("grid_length", &gpr::grid_length, py::arg("span"), py::arg("interval_days"), py::arg("pad_samples"));

    // autoencoder
    py::class_<ae::TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("l1_activity", &ae::TrainConfig::l1_activity)
        .def_readwrite("l2_weight", &ae::TrainConfig::l2_weight)
        .def_readwrite("epochs", &ae::TrainConfig::epochs)
        .def_readwrite("learning_rate", &ae::TrainConfig::learning_rate)
        .def_readwrite("batch_size", &ae::TrainConfig::batch_size)
        .def_readwrite("validation_fraction", &ae::TrainConfig::validation_fraction)
        .def_readwrite("seed", &ae::TrainConfig::seed);
    py::class_<ae::StackedAutoencoder>(m, "StackedAutoencoder")
        .def_property_readonly("input_dim", &ae::StackedAutoencoder::input_dim)
        .def_property_readonly("hidden_dim", &ae::StackedAutoencoder::hidden_dim)
        .def("encode", [](const ae::StackedAutoencoder& s, const Eigen::MatrixXd& x, int layer) {
            return ae::encode(s, x, layer);
        }, py::arg("patches"), py::arg("layer") = 2)
        .def("signatures", &ae::first_layer_signatures)
        .def("save", [](const ae::StackedAutoencoder& s, const std::filesystem::path& p) { ae::save_model(p, s); });
    m.def("load_model", &ae::load_model);
    m.def("train_stacked", [](const Eigen::MatrixXd& patches, const ae::TrainConfig& cfg, std::size_t hidden) {
        auto t = ae::train_stacked(patches, cfg, hidden);
        return py::make_tuple(t.model, t.layer1.train_loss, t.layer2.train_loss, t.fine_tune.train_loss);
    }, py::arg("patches"), py::arg("config") = ae::TrainConfig{}, py::arg("hidden") = ae::kHiddenUnits);

    // analysis
    py::class_<analysis::TsneParams>(m, "TsneParams")
        .def(py::init<>())
        .def_readwrite("perplexity", &analysis::TsneParams::perplexity)
        .def_readwrite("iterations", &analysis::TsneParams::iterations)
        .def_readwrite("learning_rate", &analysis::TsneParams::learning_rate)
        .def_readwrite("early_exaggeration", &analysis::TsneParams::early_exaggeration)
        .def_readwrite("exaggeration_iterations", &analysis::TsneParams::exaggeration_iterations)
        .def_readwrite("seed", &analysis::TsneParams::seed);
    m.def("tsne", [](const Eigen::MatrixXd& x, const analysis::TsneParams& p) {
        auto e = analysis::tsne(x, p);
        return py::make_tuple(e.coords, e.kl_divergence);
    }, py::arg("features"), py::arg("params") = analysis::TsneParams{});
    m.def("fit_logistic", [](const Eigen::MatrixXd& x, const std::vector<int>& labels, double l2, std::size_t iters) {
        auto model = analysis::fit_logistic(x, labels, l2, iters);
        return py::make_tuple(model.weights, model.bias);
    }, py::arg("features"), py::arg("labels"), py::arg("l2") = 0.01, py::arg("iterations") = 2000);
    m.def("auc", [](const std::vector<double>& s, const std::vector<int>& l) { return analysis::auc(s, l); },
          py::arg("scores"), py::arg("labels"));
    m.def("nearest_neighbor_accuracy", [](const Eigen::MatrixXd& x, const std::vector<int>& l) {
        return analysis::nearest_neighbor_accuracy(x, l);
    });

    // pipeline
    m.def("generate_synthetic", [](const std::filesystem::path& dir, std::size_t n_per_class, double noise,
                                   std::uint64_t seed) {
        SyntheticSpec spec;
        spec.n_per_class = n_per_class;
        spec.noise = noise;
        spec.seed = seed;
        generate_synthetic(spec, dir);
    }, py::arg("dir"), py::arg("n_per_class") = 100, py::arg("noise") = 2.0, py::arg("seed") = 0);
    m.def("config_keys", &config_keys);
    m.def("run_pipeline", [](const py::dict& options) {
        const auto cfg = PipelineConfig::from(to_kv(options));
        py::gil_scoped_release release;
        run_pipeline(cfg);
    }, py::arg("options"), "Run every stage. `options` maps config keys to values.");
}
