#pragma once

#include "seqcast/model.hpp"
#include "seqcast/tensor.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace seqcast {

// Text parameter format, version 1:
//
//   seqcast-params 1
//   meta <key> <value>            (zero or more; value runs to end of line)
//   tensor <name> <rank> <d0> [<d1> [<d2>]]
//   <row-major values as C99 hex floats, space separated, one line>
//   ...
//   end
//
// Hex floats make every value round-trip bit-exactly.
inline constexpr int kParamFormatVersion = 1;

struct ParamFile {
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, Tensor>> tensors;
};

void write_param_file(std::ostream& out, const ParamFile& file);
ParamFile read_param_file(std::istream& in);

/// Model config and every parameter tensor, plus caller-supplied metadata.
ParamFile model_to_param_file(Forecaster& model, const std::map<std::string, std::string>& extra_meta = {});
std::unique_ptr<Forecaster> model_from_param_file(const ParamFile& file);

void save_param_file(const std::filesystem::path& path, const ParamFile& file);
ParamFile load_param_file(const std::filesystem::path& path);

}  // namespace seqcast
