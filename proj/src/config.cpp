#include <deeprank/cli.hpp>
#include <deeprank/model_io.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace deeprank::cli {

namespace {

std::string trim(const std::string& text)
{
	const auto first = text.find_first_not_of(" \t\r\n");
	if (first == std::string::npos)
		return {};
	const auto last = text.find_last_not_of(" \t\r\n");
	return text.substr(first, last - first + 1);
}

template<typename T>
T parse_number(const std::string& key, const std::string& text)
{
	T value{};
	auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
	if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
		throw ValidationError(fmt::format("invalid value '{}' for '{}'", text, key));
	return value;
}

bool parse_bool(const std::string& key, const std::string& text)
{
	if (text == "true" || text == "1" || text == "yes" || text == "on")
		return true;
	if (text == "false" || text == "0" || text == "no" || text == "off")
		return false;
	throw ValidationError(fmt::format("invalid boolean '{}' for '{}'", text, key));
}

std::vector<std::size_t> parse_dims(const std::string& key, const std::string& text)
{
	std::vector<std::size_t> dims;
	if (text.empty() || text == "none")
		return dims;
	std::stringstream stream(text);
	for (std::string field; std::getline(stream, field, ',');)
		dims.push_back(parse_number<std::size_t>(key, trim(field)));
	return dims;
}

std::string join_dims(const std::vector<std::size_t>& dims)
{
	if (dims.empty())
		return "none";
	return fmt::format("{}", fmt::join(dims, ","));
}

template<typename Field>
ConfigKey size_key(std::string name, std::string help, Field field)
{
	return {name, std::move(help),
	        [name, field](CliConfig& cfg, const std::string& v) { field(cfg) = parse_number<std::size_t>(name, v); },
	        [field](const CliConfig& cfg) { return std::to_string(field(const_cast<CliConfig&>(cfg))); }};
}

template<typename Field>
ConfigKey real_key(std::string name, std::string help, Field field)
{
	return {name, std::move(help),
	        [name, field](CliConfig& cfg, const std::string& v) { field(cfg) = parse_number<double>(name, v); },
	        // Shortest form that still reads back to the same double.
	        [field](const CliConfig& cfg) { return fmt::format("{}", field(const_cast<CliConfig&>(cfg))); }};
}

std::vector<ConfigKey> build_keys()
{
	std::vector<ConfigKey> keys;

	// Synthetic data
	keys.push_back({"mode", "synthetic generator: linear, nonlinear or category",
	                [](CliConfig& c, const std::string& v) { c.synth.mode = data::parse_mode(v); },
	                [](const CliConfig& c) { return data::to_string(c.synth.mode); }});
	keys.push_back(size_key("d", "feature dimension of generated items", [](CliConfig& c) -> auto& { return c.synth.dimension; }));
	keys.push_back(size_key("items", "number of generated items", [](CliConfig& c) -> auto& { return c.synth.n_items; }));
	keys.push_back(size_key("ordered", "number of ordered pairs to generate", [](CliConfig& c) -> auto& { return c.synth.n_ordered_pairs; }));
	keys.push_back(size_key("similar", "number of similar pairs to generate", [](CliConfig& c) -> auto& { return c.synth.n_similar_pairs; }));
	keys.push_back(real_key("threshold", "strength difference at or below which a pair is similar",
	                        [](CliConfig& c) -> auto& { return c.synth.similarity_threshold; }));
	keys.push_back(real_key("noise", "stddev of label noise on latent strengths", [](CliConfig& c) -> auto& { return c.synth.noise_sigma; }));
	keys.push_back(size_key("categories", "number of categories in category mode", [](CliConfig& c) -> auto& { return c.synth.n_categories; }));
	keys.push_back(real_key("test_fraction", "fraction of generated pairs tagged as test",
	                        [](CliConfig& c) -> auto& { return c.synth.test_fraction; }));
	keys.push_back({"attribute", "attribute name written to the pair file",
	                [](CliConfig& c, const std::string& v) { c.synth.attribute = v; },
	                [](const CliConfig& c) { return c.synth.attribute; }});

	// Shared
	keys.push_back({"seed", "random seed for generation, initialization and shuffling",
	                [](CliConfig& c, const std::string& v) {
		                c.synth.seed = c.train.seed = parse_number<std::uint64_t>("seed", v);
	                },
	                [](const CliConfig& c) { return std::to_string(c.train.seed); }});

	// Loss and training
	keys.push_back(real_key("c1", "penalty on ordered-pair squared hinge", [](CliConfig& c) -> auto& { return c.train.loss.c1; }));
	keys.push_back(real_key("c2", "penalty on similar-pair squared difference", [](CliConfig& c) -> auto& { return c.train.loss.c2; }));
	keys.push_back(real_key("learning_rate", "RMSProp learning rate", [](CliConfig& c) -> auto& { return c.train.learning_rate; }));
	keys.push_back(size_key("batch_size", "pairs per mini-batch", [](CliConfig& c) -> auto& { return c.train.batch_size; }));
	keys.push_back(size_key("epochs", "passes over the training pairs", [](CliConfig& c) -> auto& { return c.train.epochs; }));
	keys.push_back(real_key("rho", "RMSProp decay", [](CliConfig& c) -> auto& { return c.train.rho; }));
	keys.push_back(real_key("epsilon", "RMSProp epsilon", [](CliConfig& c) -> auto& { return c.train.epsilon; }));
	keys.push_back({"shuffle", "reshuffle the pairs every epoch",
	                [](CliConfig& c, const std::string& v) { c.train.shuffle_each_epoch = parse_bool("shuffle", v); },
	                [](const CliConfig& c) { return std::string(c.train.shuffle_each_epoch ? "true" : "false"); }});
	keys.push_back(real_key("weight_decay_hidden", "L2 penalty on hidden weight matrices",
	                        [](CliConfig& c) -> auto& { return c.train.weight_decay_hidden; }));
	keys.push_back(real_key("jitter", "stddev of Gaussian feature jitter during training (0 = off)",
	                        [](CliConfig& c) -> auto& { return c.train.feature_jitter; }));

	// Network
	keys.push_back({"hidden", "comma-separated hidden layer widths, or none",
	                [](CliConfig& c, const std::string& v) { c.arch.hidden_dims = parse_dims("hidden", v); },
	                [](const CliConfig& c) { return join_dims(c.arch.hidden_dims); }});
	keys.push_back(size_key("embedding", "embedding dimension", [](CliConfig& c) -> auto& { return c.arch.embedding_dim; }));
	keys.push_back({"activation", "hidden activation: relu or tanh",
	                [](CliConfig& c, const std::string& v) { c.arch.activation = net::parse_activation(v); },
	                [](const CliConfig& c) { return net::to_string(c.arch.activation); }});

	// Linear solver
	keys.push_back({"solver", "deep (Siamese network) or linear (convex rank SVM)",
	                [](CliConfig& c, const std::string& v) {
		                if (v != "deep" && v != "linear")
			                throw ValidationError(fmt::format("unknown solver '{}' (expected deep or linear)", v));
		                c.solver = v;
	                },
	                [](const CliConfig& c) { return c.solver; }});
	keys.push_back(real_key("tol", "linear solver gradient tolerance", [](CliConfig& c) -> auto& { return c.tol; }));
	keys.push_back(size_key("max_iters", "linear solver iteration limit", [](CliConfig& c) -> auto& { return c.max_iters; }));
	return keys;
}

} // namespace

const std::vector<ConfigKey>& config_keys()
{
	static const std::vector<ConfigKey> keys = build_keys();
	return keys;
}

std::string normalize_key(std::string key)
{
	std::replace(key.begin(), key.end(), '-', '_');
	return key;
}

std::map<std::string, std::string> read_config(std::istream& in)
{
	std::map<std::string, std::string> settings;
	std::size_t line_number = 0;
	for (std::string line; std::getline(in, line);) {
		++line_number;
		const auto hash = line.find('#');
		if (hash != std::string::npos)
			line.erase(hash);
		line = trim(line);
		if (line.empty())
			continue;
		const auto eq = line.find('=');
		if (eq == std::string::npos)
			throw ValidationError(fmt::format("config line {}: expected 'key = value'", line_number));
		const std::string key = normalize_key(trim(line.substr(0, eq)));
		const std::string value = trim(line.substr(eq + 1));
		const auto& keys = config_keys();
		if (std::none_of(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name == key; }))
			throw ValidationError(fmt::format("config line {}: unknown key '{}'", line_number, key));
		settings[key] = value;
	}
	return settings;
}

std::map<std::string, std::string> load_config(const std::filesystem::path& path)
{
	std::ifstream in(path);
	if (!in)
		throw ValidationError(fmt::format("cannot open config file '{}'", path.string()));
	return read_config(in);
}

void apply_config(CliConfig& cfg, const std::map<std::string, std::string>& settings)
{
	const auto& keys = config_keys();
	for (const auto& [raw, value] : settings) {
		const std::string key = normalize_key(raw);
		auto it = std::find_if(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name == key; });
		if (it == keys.end())
			throw ValidationError(fmt::format("unknown configuration key '{}'", key));
		it->set(cfg, value);
	}
}

} // namespace deeprank::cli
