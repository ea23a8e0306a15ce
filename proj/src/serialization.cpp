#include "seqcast/serialization.hpp"

#include "seqcast/errors.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace seqcast {

namespace {

std::string hex_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_double(const std::string& token, std::size_t line) {
    const char* begin = token.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') {
        throw DataError("parameter file line " + std::to_string(line) + ": bad number '" + token + "'");
    }
    return v;
}

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
    return true;
}

}  // namespace

void write_param_file(std::ostream& out, const ParamFile& file) {
    out << "seqcast-params " << kParamFormatVersion << '\n';
    for (const auto& [key, value] : file.meta) {
        if (!valid_name(key) || value.find('\n') != std::string::npos) {
            throw ConfigError("parameter file: invalid metadata entry '" + key + "'");
        }
        out << "meta " << key << ' ' << value << '\n';
    }
    for (const auto& [name, t] : file.tensors) {
        if (!valid_name(name)) throw ConfigError("parameter file: invalid tensor name '" + name + "'");
        out << "tensor " << name << ' ' << t.rank();
        for (auto d : t.shape()) out << ' ' << d;
        out << '\n';
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (i) out << ' ';
            out << hex_double(t[i]);
        }
        out << '\n';
    }
    out << "end\n";
}

ParamFile read_param_file(std::istream& in) {
    ParamFile file;
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };
    if (!next_line()) throw DataError("parameter file is empty");
    {
        std::istringstream header(line);
        std::string magic;
        int version = 0;
        header >> magic >> version;
        if (magic != "seqcast-params") throw DataError("not a seqcast parameter file");
        if (version != kParamFormatVersion) {
            throw DataError("unsupported parameter file version " + std::to_string(version));
        }
    }
    bool ended = false;
    while (next_line()) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "end") {
            ended = true;
            break;
        }
        if (kind == "meta") {
            std::string key;
            ls >> key;
            std::string value;
            std::getline(ls, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            file.meta[key] = value;
        } else if (kind == "tensor") {
            std::string name;
            std::size_t rank = 0;
            ls >> name >> rank;
            Shape shape(rank);
            for (auto& d : shape) ls >> d;
            if (!ls || rank == 0 || rank > 3) {
                throw DataError("parameter file line " + std::to_string(line_no) + ": bad tensor header");
            }
            if (!next_line()) throw DataError("parameter file: missing values for tensor '" + name + "'");
            std::istringstream vs(line);
            std::vector<double> data;
            data.reserve(shape_product(shape));
            std::string token;
            while (vs >> token) data.push_back(parse_double(token, line_no));
            if (data.size() != shape_product(shape)) {
                throw DataError("parameter file line " + std::to_string(line_no) + ": tensor '" + name + "' has " +
                                std::to_string(data.size()) + " values, shape " + shape_to_string(shape));
            }
            file.tensors.emplace_back(name, Tensor(std::move(shape), std::move(data)));
        } else {
            throw DataError("parameter file line " + std::to_string(line_no) + ": unknown record '" + kind + "'");
        }
    }
    if (!ended) throw DataError("parameter file truncated (no 'end' record)");
    return file;
}

ParamFile model_to_param_file(Forecaster& model, const std::map<std::string, std::string>& extra_meta) {
    ParamFile file;
    file.meta = config_to_meta(model.config());
    for (const auto& [k, v] : extra_meta) file.meta[k] = v;
    for (const auto& p : model.parameters()) file.tensors.emplace_back(p.name, *p.value);
    return file;
}

std::unique_ptr<Forecaster> model_from_param_file(const ParamFile& file) {
    const ModelConfig config = config_from_meta(file.meta);
    Rng rng(0);
    auto model = make_model(config, rng);
    auto params = model->parameters();
    if (params.size() != file.tensors.size()) {
        throw DataError("parameter file holds " + std::to_string(file.tensors.size()) + " tensors, model '" +
                        std::string(to_string(config.kind)) + "' expects " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& [name, t] = file.tensors[i];
        if (name != params[i].name) {
            throw DataError("parameter file: expected tensor '" + params[i].name + "', found '" + name + "'");
        }
        if (t.shape() != params[i].value->shape()) {
            throw DataError("parameter file: tensor '" + name + "' has shape " + shape_to_string(t.shape()) +
                            ", expected " + shape_to_string(params[i].value->shape()));
        }
        *params[i].value = t;
    }
    return model;
}

void save_param_file(const std::filesystem::path& path, const ParamFile& file) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write parameter file " + path.string());
    write_param_file(out, file);
    if (!out) throw DataError("failed writing parameter file " + path.string());
}

ParamFile load_param_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open parameter file " + path.string());
    return read_param_file(in);
}

}  // namespace seqcast
