#include <deeprank/cli.hpp>
#include <deeprank/data.hpp>
#include <deeprank/eval.hpp>
#include <deeprank/linear_ranksvm.hpp>
#include <deeprank/model_io.hpp>
#include <deeprank/trainer.hpp>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace deeprank;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<Eigen::VectorXd> rows(const RowMatrix& m)
{
	std::vector<Eigen::VectorXd> out;
	out.reserve(static_cast<std::size_t>(m.rows()));
	for (Eigen::Index r = 0; r < m.rows(); ++r)
		out.emplace_back(m.row(r).transpose());
	return out;
}

linear::PairDeltas deltas_from(const RowMatrix& ordered, const RowMatrix& similar)
{
	return {rows(ordered), rows(similar)};
}

std::size_t delta_dimension(const RowMatrix& ordered, const RowMatrix& similar)
{
	return static_cast<std::size_t>(ordered.rows() > 0 ? ordered.cols() : similar.cols());
}

/// A model, a weight vector, or any callable taking a feature vector.
eval::Scorer to_scorer(const py::object& source)
{
	if (py::isinstance<net::DeepRankModel>(source)) {
		auto model = std::make_shared<net::DeepRankModel>(source.cast<net::DeepRankModel>());
		return [model](const Eigen::VectorXd& x) { return net::score(*model, x); };
	}
	if (PyCallable_Check(source.ptr())) {
		return [source](const Eigen::VectorXd& x) {
			py::gil_scoped_acquire gil;
			return source(x).cast<double>();
		};
	}
	return eval::linear_scorer(source.cast<Eigen::VectorXd>());
}

std::vector<PairConstraint> select_pairs(const Dataset& ds, const std::string& attribute, const std::string& split)
{
	const auto& spec = ds.attribute(attribute);
	if (split == "all")
		return ds.pairs(spec.index);
	if (split == "train")
		return ds.pairs(spec.index, Split::Train);
	if (split == "test")
		return ds.pairs(spec.index, Split::Test);
	throw ValidationError("split must be train, test or all");
}

Dataset dataset_from_arrays(const std::vector<std::string>& ids, const RowMatrix& features,
                            const std::map<std::string, std::vector<PairConstraint>>& pairs)
{
	if (static_cast<Eigen::Index>(ids.size()) != features.rows())
		throw DimensionError("need one id per feature row");
	data::FeatureMap map;
	for (std::size_t k = 0; k < ids.size(); ++k)
		map[ids[k]] = FeatureVector{ids[k], features.row(static_cast<Eigen::Index>(k)).transpose()};
	if (map.size() != ids.size())
		throw ValidationError("item ids must be unique");
	return data::make_dataset(map, pairs, &ids);
}

} // namespace

PYBIND11_MODULE(_deeprank, m)
{
	m.doc() = "Pairwise attribute ranking with a rank-SVM loss";
	m.attr("__version__") = "0.1.0";

	auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
	py::register_exception<DimensionError>(m, "DimensionError", error.ptr());
	auto validation = py::register_exception<ValidationError>(m, "ValidationError", error.ptr());
	auto numerical = py::register_exception<NumericalError>(m, "NumericalError", error.ptr());
	py::register_exception<linear::ConvergenceError>(m, "ConvergenceError", numerical.ptr());
	(void)validation;

	// core
	py::enum_<Relation>(m, "Relation").value("Ordered", Relation::Ordered).value("Similar", Relation::Similar);
	py::enum_<Split>(m, "Split").value("Train", Split::Train).value("Test", Split::Test);

	py::class_<PairConstraint>(m, "PairConstraint")
		.def(py::init([](std::string first, std::string second, Relation relation, Split split) {
			     return PairConstraint{std::move(first), std::move(second), relation, split};
		     }),
		     py::arg("first"), py::arg("second"), py::arg("relation") = Relation::Ordered,
		     py::arg("split") = Split::Train)
		.def_readwrite("first", &PairConstraint::first)
		.def_readwrite("second", &PairConstraint::second)
		.def_readwrite("relation", &PairConstraint::relation)
		.def_readwrite("split", &PairConstraint::split)
		.def(py::self == py::self)
		.def("__repr__", [](const PairConstraint& p) {
			return "PairConstraint('" + p.first + "', '" + p.second + "', " +
			       (p.relation == Relation::Ordered ? "Ordered" : "Similar") + ", " +
			       (p.split == Split::Train ? "Train" : "Test") + ")";
		});

	py::class_<LossConfig>(m, "LossConfig")
		.def(py::init([](double c1, double c2) { return LossConfig{c1, c2}; }), py::arg("c1") = 0.1,
		     py::arg("c2") = 0.1)
		.def_readwrite("c1", &LossConfig::c1)
		.def_readwrite("c2", &LossConfig::c2);

	py::class_<Dataset>(m, "Dataset")
		.def(py::init(&dataset_from_arrays), py::arg("ids"), py::arg("features"),
		     py::arg("pairs") = std::map<std::string, std::vector<PairConstraint>>{},
		     "Items from an (n, d) feature matrix; pairs keyed by attribute name.")
		.def_property_readonly("dimension", &Dataset::dimension)
		.def("__len__", &Dataset::size)
		.def_property_readonly("ids",
		                       [](const Dataset& ds) {
			                       std::vector<std::string> ids;
			                       for (const auto& item : ds.items())
				                       ids.push_back(item.id);
			                       return ids;
		                       })
		.def_property_readonly("attributes",
		                       [](const Dataset& ds) {
			                       std::vector<std::string> names;
			                       for (const auto& a : ds.attributes())
				                       names.push_back(a.name);
			                       return names;
		                       })
		.def("features", [](const Dataset& ds, const std::string& id) { return ds.item(id).values; })
		.def("pairs", &select_pairs, py::arg("attribute"), py::arg("split") = "all")
		.def("standardized", &Dataset::standardized);

	m.def(
		"load_dataset",
		[](const std::filesystem::path& features, const std::optional<std::filesystem::path>& pairs) {
			std::vector<std::string> order;
			const auto f = data::load_features(features, &order);
			const auto p = pairs ? data::load_pairs(*pairs) : data::PairMap{};
			return data::make_dataset(f, p, &order);
		},
		py::arg("features"), py::arg("pairs") = std::nullopt);

	// linear_ranksvm
	py::class_<linear::LinearRankModel>(m, "LinearRankModel")
		.def_readonly("weights", &linear::LinearRankModel::weights)
		.def_readonly("objective", &linear::LinearRankModel::training_objective)
		.def_readonly("gradient_norm", &linear::LinearRankModel::gradient_norm)
		.def_readonly("iterations", &linear::LinearRankModel::iterations);

	m.def(
		"objective",
		[](const Eigen::VectorXd& w, const RowMatrix& ordered, const RowMatrix& similar, const LossConfig& cfg) {
			return linear::objective(w, deltas_from(ordered, similar), cfg);
		},
		py::arg("w"), py::arg("ordered"), py::arg("similar"), py::arg("cfg") = LossConfig{},
		"Rank-SVM objective; rows of `ordered` and `similar` are feature differences.");
	m.def(
		"objective_gradient",
		[](const Eigen::VectorXd& w, const RowMatrix& ordered, const RowMatrix& similar, const LossConfig& cfg) {
			return linear::objective_gradient(w, deltas_from(ordered, similar), cfg);
		},
		py::arg("w"), py::arg("ordered"), py::arg("similar"), py::arg("cfg") = LossConfig{});
	m.def(
		"solve",
		[](const RowMatrix& ordered, const RowMatrix& similar, const LossConfig& cfg, double tol,
		   std::size_t max_iters) {
			linear::SolveOptions options;
			options.tol = tol;
			options.max_iters = max_iters;
			return linear::solve(deltas_from(ordered, similar), delta_dimension(ordered, similar), cfg, options);
		},
		py::arg("ordered"), py::arg("similar"), py::arg("cfg") = LossConfig{}, py::arg("tol") = 1e-8,
		py::arg("max_iters") = 100000);
	m.def(
		"solve_dataset",
		[](const Dataset& ds, const std::string& attribute, const LossConfig& cfg, const std::string& split) {
			const auto pairs = select_pairs(ds, attribute, split);
			return linear::solve(pairs, ds, cfg);
		},
		py::arg("dataset"), py::arg("attribute"), py::arg("cfg") = LossConfig{}, py::arg("split") = "train");
	m.def(
		"brute_force_solve",
		[](const RowMatrix& ordered, const RowMatrix& similar, const LossConfig& cfg, double bound, double step) {
			return linear::brute_force_solve(deltas_from(ordered, similar), delta_dimension(ordered, similar), cfg,
			                                 bound, step);
		},
		py::arg("ordered"), py::arg("similar"), py::arg("cfg") = LossConfig{}, py::arg("bound") = 1.0,
		py::arg("step") = 1e-3);

	// net
	py::enum_<net::Activation>(m, "Activation")
		.value("ReLU", net::Activation::ReLU)
		.value("Tanh", net::Activation::Tanh);

	py::class_<net::NetArchitecture>(m, "NetArchitecture")
		.def(py::init([](std::size_t input_dim, std::vector<std::size_t> hidden, std::size_t embedding,
		                 net::Activation activation) {
			     return net::NetArchitecture{input_dim, std::move(hidden), embedding, activation};
		     }),
		     py::arg("input_dim"), py::arg("hidden_dims") = std::vector<std::size_t>{64, 64},
		     py::arg("embedding_dim") = 32, py::arg("activation") = net::Activation::ReLU)
		.def_readwrite("input_dim", &net::NetArchitecture::input_dim)
		.def_readwrite("hidden_dims", &net::NetArchitecture::hidden_dims)
		.def_readwrite("embedding_dim", &net::NetArchitecture::embedding_dim)
		.def_readwrite("activation", &net::NetArchitecture::activation)
		.def(py::self == py::self);

	py::class_<net::DeepRankModel>(m, "DeepRankModel")
		.def_property_readonly("arch", &net::DeepRankModel::arch)
		.def_property_readonly("ranking_weights", [](const net::DeepRankModel& model) { return model.params().ranking; })
		.def_property_readonly("layers",
		                       [](const net::DeepRankModel& model) {
			                       std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>> layers;
			                       for (const auto& layer : model.params().layers)
				                       layers.emplace_back(layer.weight, layer.bias);
			                       return layers;
		                       })
		.def_property_readonly("parameter_count",
		                       [](const net::DeepRankModel& model) { return model.params().count(); })
		.def("score", [](const net::DeepRankModel& model, const Eigen::VectorXd& x) { return net::score(model, x); })
		.def("scores",
		     [](const net::DeepRankModel& model, const RowMatrix& x) {
			     Eigen::VectorXd out(x.rows());
			     for (Eigen::Index r = 0; r < x.rows(); ++r)
				     out[r] = net::score(model, x.row(r).transpose());
			     return out;
		     })
		.def("embed", [](const net::DeepRankModel& model, const Eigen::VectorXd& x) { return net::embed(model, x); })
		.def("diff_score",
		     [](const net::DeepRankModel& model, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
			     return net::pair_forward(model, a, b).diff_score;
		     })
		.def("input_gradient",
		     [](const net::DeepRankModel& model, const Eigen::VectorXd& x) { return net::input_gradient(model, x); })
		.def("to_text", [](const net::DeepRankModel& model) {
			std::ostringstream out;
			io::write_model(out, model);
			return out.str();
		});

	m.def("init", &net::init, py::arg("arch"), py::arg("seed") = 0);
	m.def("linear_model", &net::linear_model, py::arg("weights"));
	m.def(
		"grad_check",
		[](const net::DeepRankModel& model, const Eigen::VectorXd& a, const Eigen::VectorXd& b, double step) {
			return net::grad_check(model, a, b, step);
		},
		py::arg("model"), py::arg("x_first"), py::arg("x_second"), py::arg("step") = 1e-5);
	m.def("save_model", &io::save_model, py::arg("path"), py::arg("model"));
	m.def("load_model", &io::load_model, py::arg("path"));
	m.def(
		"model_from_text",
		[](const std::string& text) {
			std::istringstream in(text);
			return io::read_model(in);
		},
		py::arg("text"));

	// trainer
	py::class_<train::TrainConfig>(m, "TrainConfig")
		.def(py::init<>())
		.def_readwrite("loss", &train::TrainConfig::loss)
		.def_readwrite("learning_rate", &train::TrainConfig::learning_rate)
		.def_readwrite("batch_size", &train::TrainConfig::batch_size)
		.def_readwrite("epochs", &train::TrainConfig::epochs)
		.def_readwrite("rho", &train::TrainConfig::rho)
		.def_readwrite("epsilon", &train::TrainConfig::epsilon)
		.def_readwrite("seed", &train::TrainConfig::seed)
		.def_readwrite("shuffle_each_epoch", &train::TrainConfig::shuffle_each_epoch)
		.def_readwrite("weight_decay_hidden", &train::TrainConfig::weight_decay_hidden)
		.def_readwrite("feature_jitter", &train::TrainConfig::feature_jitter);

	m.def(
		"train",
		[](const Dataset& ds, const std::string& attribute, const net::NetArchitecture& arch,
		   const train::TrainConfig& cfg, const train::EpochCallback& on_epoch) {
			auto result = train::train(ds, ds.attribute(attribute), arch, cfg, on_epoch);
			return py::make_tuple(std::move(result.model), std::move(result.history));
		},
		py::arg("dataset"), py::arg("attribute"), py::arg("arch"), py::arg("cfg") = train::TrainConfig{},
		py::arg("on_epoch") = train::EpochCallback{},
		"Returns (model, history) where history holds the mean batch loss of each epoch.");

	// data
	py::enum_<data::SynthMode>(m, "SynthMode")
		.value("Linear", data::SynthMode::Linear)
		.value("Nonlinear", data::SynthMode::Nonlinear)
		.value("Category", data::SynthMode::Category);

	py::class_<data::SynthSpec>(m, "SynthSpec")
		.def(py::init<>())
		.def_readwrite("mode", &data::SynthSpec::mode)
		.def_readwrite("dimension", &data::SynthSpec::dimension)
		.def_readwrite("n_items", &data::SynthSpec::n_items)
		.def_readwrite("n_ordered_pairs", &data::SynthSpec::n_ordered_pairs)
		.def_readwrite("n_similar_pairs", &data::SynthSpec::n_similar_pairs)
		.def_readwrite("similarity_threshold", &data::SynthSpec::similarity_threshold)
		.def_readwrite("noise_sigma", &data::SynthSpec::noise_sigma)
		.def_readwrite("seed", &data::SynthSpec::seed)
		.def_readwrite("n_categories", &data::SynthSpec::n_categories)
		.def_readwrite("test_fraction", &data::SynthSpec::test_fraction)
		.def_readwrite("attribute", &data::SynthSpec::attribute);

	m.def(
		"generate",
		[](const data::SynthSpec& spec) {
			auto synth = data::generate(spec);
			std::map<std::string, double> truth;
			for (std::size_t k = 0; k < synth.truth.ids.size(); ++k)
				truth[synth.truth.ids[k]] = synth.truth.strength[k];
			return py::make_tuple(std::move(synth.dataset), std::move(truth));
		},
		py::arg("spec"), "Returns (dataset, {id: latent strength}).");

	// eval
	py::class_<eval::EvalReport>(m, "EvalReport")
		.def_readonly("attribute", &eval::EvalReport::attribute)
		.def_readonly("n_ordered_pairs", &eval::EvalReport::n_ordered_pairs)
		.def_readonly("n_correct", &eval::EvalReport::n_correct)
		.def_readonly("accuracy", &eval::EvalReport::accuracy)
		.def_readonly("n_similar_excluded", &eval::EvalReport::n_similar_excluded)
		.def("__str__", &eval::format_report);

	m.def(
		"predict_pair",
		[](const py::object& scorer, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
			return eval::predict_pair(to_scorer(scorer), a, b);
		},
		py::arg("scorer"), py::arg("x_first"), py::arg("x_second"));
	m.def(
		"pairwise_accuracy",
		[](const py::object& scorer, const Dataset& ds, const std::string& attribute, const std::string& split) {
			const auto pairs = select_pairs(ds, attribute, split);
			return eval::pairwise_accuracy(to_scorer(scorer), pairs, ds, attribute);
		},
		py::arg("scorer"), py::arg("dataset"), py::arg("attribute"), py::arg("split") = "test",
		"`scorer` is a DeepRankModel, a linear weight vector or a callable.");
	m.def(
		"rank_items",
		[](const py::object& scorer, const Dataset& ds, bool normalize) {
			std::vector<std::string> ids;
			for (const auto& item : ds.items())
				ids.push_back(item.id);
			std::vector<std::pair<std::string, double>> out;
			for (auto& item : eval::rank_items(to_scorer(scorer), ids, ds, normalize))
				out.emplace_back(std::move(item.id), item.score);
			return out;
		},
		py::arg("scorer"), py::arg("dataset"), py::arg("normalize") = false);
	m.def(
		"kendall_tau",
		[](const std::vector<double>& scores, const std::vector<double>& truth) {
			return eval::kendall_tau(scores, truth);
		},
		py::arg("scores"), py::arg("truth"));
	m.def("input_attribution", &eval::input_attribution, py::arg("model"), py::arg("x"));

	// cli
	m.def(
		"run_cli",
		[](const std::vector<std::string>& args) {
			std::ostringstream out, err;
			const int code = cli::run(args, out, err);
			return py::make_tuple(code, out.str(), err.str());
		},
		py::arg("args"), "Runs the command-line tool in-process; returns (exit code, stdout, stderr).");
}
