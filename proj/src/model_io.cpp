#include <deeprank/model_io.hpp>

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace deeprank::io {

namespace {

class LineReader {
public:
	explicit LineReader(std::istream& in)
		: in_(in)
	{
	}

	// Next non-empty, non-comment line split into whitespace tokens.
	std::vector<std::string> next()
	{
		std::string line;
		while (std::getline(in_, line)) {
			++number_;
			if (line.empty() || line[0] == '#')
				continue;
			std::istringstream tokens(line);
			std::vector<std::string> fields;
			for (std::string field; tokens >> field;)
				fields.push_back(field);
			if (!fields.empty())
				return fields;
		}
		throw ValidationError("model file ended unexpectedly");
	}

	std::vector<std::string> expect(const std::string& key, std::size_t min_fields)
	{
		auto fields = next();
		if (fields[0] != key || fields.size() < min_fields)
			throw ValidationError(fmt::format("model file line {}: expected '{}'", number_, key));
		return fields;
	}

	std::size_t line() const { return number_; }

private:
	std::istream& in_;
	std::size_t number_ = 0;
};

std::size_t parse_size(const std::string& text, const LineReader& reader)
{
	std::size_t value = 0;
	auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
	if (ec != std::errc() || ptr != text.data() + text.size())
		throw ValidationError(fmt::format("model file line {}: invalid integer '{}'", reader.line(), text));
	return value;
}

double parse_value(const std::string& text, const LineReader& reader)
{
	double value = 0.0;
	auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
	if (ec != std::errc() || ptr != text.data() + text.size())
		throw ValidationError(fmt::format("model file line {}: invalid number '{}'", reader.line(), text));
	return value;
}

void write_tensor(std::ostream& out, const std::string& name, const Eigen::MatrixXd& m)
{
	out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
	for (Eigen::Index r = 0; r < m.rows(); ++r) {
		for (Eigen::Index c = 0; c < m.cols(); ++c)
			out << (r == 0 && c == 0 ? "" : " ") << format_double(m(r, c));
	}
	out << '\n';
}

void write_tensor(std::ostream& out, const std::string& name, const Eigen::VectorXd& v)
{
	out << "tensor " << name << ' ' << v.size() << '\n';
	for (Eigen::Index k = 0; k < v.size(); ++k)
		out << (k == 0 ? "" : " ") << format_double(v[k]);
	out << '\n';
}

std::vector<double> read_values(LineReader& reader, std::size_t count)
{
	if (count == 0)
		return {};
	auto fields = reader.next();
	if (fields.size() != count)
		throw ValidationError(fmt::format("model file line {}: expected {} values, found {}", reader.line(), count,
		                                  fields.size()));
	std::vector<double> values;
	values.reserve(count);
	for (const auto& field : fields)
		values.push_back(parse_value(field, reader));
	return values;
}

Eigen::MatrixXd read_matrix(LineReader& reader, const std::string& name, std::size_t rows, std::size_t cols)
{
	auto header = reader.expect("tensor", 4);
	if (header.size() != 4 || header[1] != name || parse_size(header[2], reader) != rows || parse_size(header[3], reader) != cols)
		throw ValidationError(fmt::format("model file line {}: expected tensor {} of shape {}x{}", reader.line(),
		                                  name, rows, cols));
	const auto values = read_values(reader, rows * cols);
	Eigen::MatrixXd m(rows, cols);
	for (std::size_t r = 0; r < rows; ++r) {
		for (std::size_t c = 0; c < cols; ++c)
			m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * cols + c];
	}
	return m;
}

Eigen::VectorXd read_vector(LineReader& reader, const std::string& name, std::size_t size)
{
	auto header = reader.expect("tensor", 3);
	if (header.size() != 3 || header[1] != name || parse_size(header[2], reader) != size)
		throw ValidationError(fmt::format("model file line {}: expected tensor {} of length {}", reader.line(), name,
		                                  size));
	const auto values = read_values(reader, size);
	return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

} // namespace

std::string format_double(double value)
{
	return fmt::format("{:.17g}", value);
}

void write_model(std::ostream& out, const net::DeepRankModel& model)
{
	const auto& arch = model.arch();
	out << "deeprank-model " << model_format_version << '\n';
	out << "input_dim " << arch.input_dim << '\n';
	out << "hidden_dims";
	for (auto width : arch.hidden_dims)
		out << ' ' << width;
	out << '\n';
	out << "embedding_dim " << arch.embedding_dim << '\n';
	out << "activation " << net::to_string(arch.activation) << '\n';
	const auto& params = model.params();
	for (std::size_t l = 0; l < params.layers.size(); ++l) {
		write_tensor(out, fmt::format("layer{}.weight", l), params.layers[l].weight);
		if (params.layers[l].bias.size() > 0)
			write_tensor(out, fmt::format("layer{}.bias", l), params.layers[l].bias);
	}
	write_tensor(out, "ranking.weight", params.ranking);
	out << "end\n";
}

net::DeepRankModel read_model(std::istream& in)
{
	LineReader reader(in);
	auto magic = reader.expect("deeprank-model", 2);
	if (parse_size(magic[1], reader) != static_cast<std::size_t>(model_format_version))
		throw ValidationError(fmt::format("unsupported model format version {}", magic[1]));

	net::NetArchitecture arch;
	arch.input_dim = parse_size(reader.expect("input_dim", 2)[1], reader);
	auto hidden = reader.expect("hidden_dims", 1);
	arch.hidden_dims.clear();
	for (std::size_t k = 1; k < hidden.size(); ++k)
		arch.hidden_dims.push_back(parse_size(hidden[k], reader));
	arch.embedding_dim = parse_size(reader.expect("embedding_dim", 2)[1], reader);
	arch.activation = net::parse_activation(reader.expect("activation", 2)[1]);
	arch.validate();

	net::Parameters params;
	std::size_t fan_in = arch.input_dim;
	for (std::size_t l = 0; l <= arch.hidden_dims.size(); ++l) {
		const std::size_t fan_out = l < arch.hidden_dims.size() ? arch.hidden_dims[l] : arch.embedding_dim;
		net::DenseLayer layer;
		layer.weight = read_matrix(reader, fmt::format("layer{}.weight", l), fan_out, fan_in);
		if (l < arch.hidden_dims.size())
			layer.bias = read_vector(reader, fmt::format("layer{}.bias", l), fan_out);
		params.layers.push_back(std::move(layer));
		fan_in = fan_out;
	}
	params.ranking = read_vector(reader, "ranking.weight", arch.embedding_dim);
	reader.expect("end", 1);
	return net::DeepRankModel(std::move(arch), std::move(params));
}

void save_model(const std::filesystem::path& path, const net::DeepRankModel& model)
{
	std::ofstream out(path, std::ios::binary);
	if (!out)
		throw ValidationError(fmt::format("cannot open '{}' for writing", path.string()));
	write_model(out, model);
	if (!out)
		throw ValidationError(fmt::format("failed writing '{}'", path.string()));
}

net::DeepRankModel load_model(const std::filesystem::path& path)
{
	std::ifstream in(path, std::ios::binary);
	if (!in)
		throw ValidationError(fmt::format("cannot open model file '{}'", path.string()));
	return read_model(in);
}

} // namespace deeprank::io
