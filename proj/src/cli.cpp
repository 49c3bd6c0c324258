#include <deeprank/cli.hpp>
#include <deeprank/eval.hpp>
#include <deeprank/linear_ranksvm.hpp>
#include <deeprank/model_io.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <optional>

namespace deeprank::cli {

namespace {

namespace fs = std::filesystem;

/// Subset of config keys exposed as flags on one subcommand.
class KeyFlags {
public:
	void add(CLI::App* command, std::initializer_list<const char*> names)
	{
		const CliConfig defaults;
		for (const char* name : names) {
			const auto& keys = config_keys();
			auto it = std::find_if(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name == name; });
			std::string flag = "--" + std::string(name);
			std::replace(flag.begin(), flag.end(), '_', '-');
			auto& value = values_[name];
			auto* option = command->add_option(flag, value, fmt::format("{} [{}]", it->help, it->get(defaults)));
			options_.emplace_back(name, option);
		}
	}

	/// Defaults, then the config file, then explicit flags.
	CliConfig resolve(const std::string& config_path) const
	{
		CliConfig cfg;
		if (!config_path.empty())
			apply_config(cfg, load_config(config_path));
		std::map<std::string, std::string> flags;
		for (const auto& [name, option] : options_) {
			if (option->count() > 0)
				flags[name] = values_.at(name);
		}
		apply_config(cfg, flags);
		return cfg;
	}

private:
	std::map<std::string, std::string> values_;
	std::vector<std::pair<std::string, CLI::Option*>> options_;
};

struct LoadedData {
	Dataset dataset;
	std::vector<std::string> order;
};

LoadedData load_dataset(const std::string& features_path, const std::string& pairs_path)
{
	std::vector<std::string> order;
	const auto features = data::load_features(features_path, &order);
	const auto pairs = pairs_path.empty() ? data::PairMap{} : data::load_pairs(pairs_path);
	return {data::make_dataset(features, pairs, &order), std::move(order)};
}

void check_model_dimension(const net::DeepRankModel& model, const Dataset& dataset)
{
	if (model.arch().input_dim != dataset.dimension())
		throw DimensionError(fmt::format("model expects {} features, feature file has {}", model.arch().input_dim,
		                                 dataset.dimension()));
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body)
{
	std::ofstream out(path, std::ios::binary);
	if (!out)
		throw ValidationError(fmt::format("cannot open '{}' for writing", path.string()));
	body(out);
	if (!out)
		throw ValidationError(fmt::format("failed writing '{}'", path.string()));
}

void cmd_synth(const CliConfig& cfg, const std::string& out_dir, std::ostream& err)
{
	const auto synthetic = data::generate(cfg.synth);
	fs::create_directories(out_dir);
	const fs::path dir(out_dir);
	write_file(dir / "features.csv", [&](std::ostream& o) { data::write_features(o, synthetic.dataset); });
	write_file(dir / "pairs.tsv", [&](std::ostream& o) { data::write_pairs(o, synthetic.dataset); });
	write_file(dir / "truth.tsv", [&](std::ostream& o) { data::write_truth(o, synthetic.truth); });
	err << fmt::format("wrote {} items and {} pairs to {}\n", synthetic.dataset.size(),
	                   synthetic.dataset.pairs(0).size(), dir.string());
}

void train_one(const CliConfig& base, const Dataset& dataset, const AttributeSpec& attribute,
               const fs::path& model_path, std::uint64_t seed, std::ostream& log)
{
	if (base.solver == "linear") {
		const auto pairs = dataset.pairs(attribute.index, Split::Train);
		if (pairs.empty())
			throw ValidationError(fmt::format("attribute '{}' has no training pairs", attribute.name));
		linear::SolveOptions options;
		options.tol = base.tol;
		options.max_iters = base.max_iters;
		const auto solution = linear::solve(pairs, dataset, base.train.loss, options);
		log << fmt::format("iterations {} objective {} gradient {}\n", solution.iterations,
		                   io::format_double(solution.training_objective), io::format_double(solution.gradient_norm));
		io::save_model(model_path, net::linear_model(solution.weights));
		return;
	}

	auto arch = base.arch;
	arch.input_dim = dataset.dimension();
	auto cfg = base.train;
	cfg.seed = seed;
	const auto result = train::train(dataset, attribute, arch, cfg, [&](std::size_t epoch, double loss, std::size_t n) {
		log << train::format_epoch_log(epoch, loss, n) << '\n';
	});
	io::save_model(model_path, result.model);
}

void cmd_train(const CliConfig& cfg, const std::string& features, const std::string& pairs, const std::string& attr,
               bool all_attrs, const std::string& model_out, const std::string& log_path, std::ostream& err)
{
	const auto loaded = load_dataset(features, pairs);
	const auto& dataset = loaded.dataset;

	std::ofstream log_file;
	if (!log_path.empty()) {
		log_file.open(log_path, std::ios::binary);
		if (!log_file)
			throw ValidationError(fmt::format("cannot open log file '{}'", log_path));
	}
	std::ostream& log = log_path.empty() ? err : log_file;

	if (!all_attrs) {
		if (attr.empty())
			throw ValidationError("train needs --attr or --all-attrs");
		train_one(cfg, dataset, dataset.attribute(attr), model_out, cfg.train.seed, log);
		return;
	}
	if (dataset.attributes().empty())
		throw ValidationError("pair file declares no attributes");
	fs::create_directories(model_out);
	for (const auto& attribute : dataset.attributes()) {
		log << "attribute " << attribute.name << '\n';
		train_one(cfg, dataset, attribute, fs::path(model_out) / (attribute.name + ".model"),
		          cfg.train.seed + attribute.index, log);
	}
}

void cmd_eval(const std::string& features, const std::string& pairs, const std::string& attr,
              const std::string& model_path, const std::string& split, std::ostream& out)
{
	const auto loaded = load_dataset(features, pairs);
	const auto& dataset = loaded.dataset;
	const auto model = io::load_model(model_path);
	check_model_dimension(model, dataset);
	const auto& attribute = dataset.attribute(attr);

	std::vector<PairConstraint> selected;
	if (split == "all")
		selected = dataset.pairs(attribute.index);
	else
		selected = dataset.pairs(attribute.index, split == "train" ? Split::Train : Split::Test);
	const auto report = eval::pairwise_accuracy(eval::model_scorer(model), selected, dataset, attribute.name);
	out << eval::format_report(report) << '\n';
}

void cmd_rank(const std::string& features, const std::string& model_path, bool normalize, std::ostream& out)
{
	const auto loaded = load_dataset(features, {});
	const auto model = io::load_model(model_path);
	check_model_dimension(model, loaded.dataset);
	const auto ranked = eval::rank_items(eval::model_scorer(model), loaded.order, loaded.dataset, normalize);
	for (const auto& item : ranked)
		out << item.id << '\t' << io::format_double(item.score) << '\n';
}

int cmd_gradcheck(std::uint64_t seed, const std::string& activation, double step, bool corrupt, std::ostream& out)
{
	net::NetArchitecture arch{6, {8, 6}, 4, net::parse_activation(activation)};
	const auto model = net::init(arch, seed);
	Rng rng(seed, 0x67726164 /* "grad" */);
	const auto [first, second] = net::sample_smooth_pair(model, rng);

	net::GradientHook hook;
	if (corrupt) {
		hook = [](net::ParameterGradients& grads) { grads.ranking[0] *= 2.0; };
	}
	const double error = net::grad_check(model, first, second, step, hook);
	const double threshold = arch.activation == net::Activation::Tanh ? 1e-6 : 1e-4;
	out << fmt::format("max_relative_error {:.6e} threshold {:.0e} activation {}\n", error, threshold,
	                   net::to_string(arch.activation));
	return error < threshold ? exit_ok : exit_numerical;
}

void cmd_attr(const std::string& features, const std::string& model_path, const std::string& item_id,
              std::ostream& out)
{
	const auto loaded = load_dataset(features, {});
	const auto model = io::load_model(model_path);
	check_model_dimension(model, loaded.dataset);
	const auto attribution = eval::input_attribution(model, loaded.dataset.item(item_id).values);
	for (Eigen::Index k = 0; k < attribution.size(); ++k)
		out << io::format_double(attribution[k]) << '\n';
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
	CLI::App app{"Pairwise attribute ranking with a rank-SVM loss: linear solver and Siamese network"};
	app.name("deeprank");
	app.require_subcommand(1);

	std::string config_path;
	std::string features, pairs, attr, model_path, out_dir, log_path, item_id, split = "test";
	std::string activation = "relu";
	bool all_attrs = false, normalize = false, corrupt = false;
	std::uint64_t gradcheck_seed = 0;
	double step = 1e-5;

	auto* synth = app.add_subcommand("synth", "generate a synthetic relative-attribute dataset");
	KeyFlags synth_flags;
	synth_flags.add(synth, {"mode", "d", "items", "ordered", "similar", "threshold", "noise", "seed", "categories",
	                        "test_fraction", "attribute"});
	synth->add_option("--out", out_dir, "output directory")->required();
	synth->add_option("--config", config_path, "key = value configuration file");

	auto* train = app.add_subcommand("train", "train one model per attribute on train-split pairs");
	KeyFlags train_flags;
	train_flags.add(train, {"c1", "c2", "learning_rate", "batch_size", "epochs", "rho", "epsilon", "seed", "shuffle",
	                        "weight_decay_hidden", "jitter", "hidden", "embedding", "activation", "solver", "tol",
	                        "max_iters"});
	train->add_option("--features", features, "feature file")->required();
	train->add_option("--pairs", pairs, "pair annotation file")->required();
	train->add_option("--attr", attr, "attribute to train");
	train->add_flag("--all-attrs", all_attrs, "train every attribute; --model-out is then a directory");
	train->add_option("--model-out", model_path, "model file to write")->required();
	train->add_option("--log", log_path, "write the epoch log here instead of stderr");
	train->add_option("--config", config_path, "key = value configuration file");

	auto* evaluate = app.add_subcommand("eval", "pairwise accuracy on ordered pairs, similar pairs excluded");
	evaluate->add_option("--features", features, "feature file")->required();
	evaluate->add_option("--pairs", pairs, "pair annotation file")->required();
	evaluate->add_option("--attr", attr, "attribute to evaluate")->required();
	evaluate->add_option("--model", model_path, "model file")->required();
	evaluate->add_option("--split", split, "pairs to evaluate: test, train or all")
		->check(CLI::IsMember({"test", "train", "all"}));

	auto* rank = app.add_subcommand("rank", "order items by model score, strongest first");
	rank->add_option("--features", features, "feature file")->required();
	rank->add_option("--model", model_path, "model file")->required();
	rank->add_flag("--normalize", normalize, "min-max map scores onto [-1, 1]");

	auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the pair gradients");
	gradcheck->add_option("--seed", gradcheck_seed, "model and input seed");
	gradcheck->add_option("--activation", activation, "relu or tanh")->check(CLI::IsMember({"relu", "tanh"}));
	gradcheck->add_option("--step", step, "finite-difference step");
	gradcheck->add_flag("--corrupt-gradient", corrupt, "double one analytic gradient entry (checker self-test)");

	auto* attribution = app.add_subcommand("attr", "gradient of an item's score with respect to its features");
	attribution->add_option("--features", features, "feature file")->required();
	attribution->add_option("--model", model_path, "model file")->required();
	attribution->add_option("--item", item_id, "item id")->required();

	try {
		std::vector<std::string> reversed(args.rbegin(), args.rend());
		app.parse(reversed);
	} catch (const CLI::ParseError& e) {
		const int code = app.exit(e, out, err);
		return code == 0 ? exit_ok : exit_usage;
	}

	try {
		if (synth->parsed()) {
			cmd_synth(synth_flags.resolve(config_path), out_dir, err);
		} else if (train->parsed()) {
			cmd_train(train_flags.resolve(config_path), features, pairs, attr, all_attrs, model_path, log_path, err);
		} else if (evaluate->parsed()) {
			cmd_eval(features, pairs, attr, model_path, split, out);
		} else if (rank->parsed()) {
			cmd_rank(features, model_path, normalize, out);
		} else if (gradcheck->parsed()) {
			return cmd_gradcheck(gradcheck_seed, activation, step, corrupt, out);
		} else if (attribution->parsed()) {
			cmd_attr(features, model_path, item_id, out);
		}
	} catch (const NumericalError& e) {
		err << "error: " << e.what() << '\n';
		return exit_numerical;
	} catch (const std::exception& e) {
		err << "error: " << e.what() << '\n';
		return exit_usage;
	}
	return exit_ok;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
	std::vector<std::string> args;
	for (int k = 1; k < argc; ++k)
		args.emplace_back(argv[k]);
	return run(args, out, err);
}

} // namespace deeprank::cli
