#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "asclf/expression.h"
#include "asclf/model.h"

namespace asclf {

/// Syntax or semantic error in a model file. `position()` is the byte offset
/// into the whole file; `line()` and `column()` are 1-based.
class ModelFileError : public ParseError {
 public:
  ModelFileError(std::size_t position, int line, int column, const std::string& message);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Closed-set target: distance to the set as an expression in x, and the two
/// class-K sandwich bounds as expressions in `r`.
struct TargetSpec {
  Expression distance;
  Expression gamma1;
  Expression gamma2;
};

/// Everything a model file can carry. Named parameters are folded into the
/// expressions at parse time.
struct ModelFile {
  ControlledDiffusion model;
  std::optional<CandidateFunction> candidate;
  /// Decay gauge l(x), an expression in x.
  std::optional<Expression> gauge;
  std::optional<TargetSpec> target;
};

ModelFile ParseModelFile(std::string_view text);
ModelFile LoadModelFile(const std::filesystem::path& path);

/// Canonical text; ParseModelFile(SerializeModelFile(m)) reproduces m.
std::string SerializeModelFile(const ModelFile& file);

/// Symbol table binding x1..xN to slots 0..N-1.
SymbolTable StateSymbols(int state_dim);

/// Parses a radial profile in the variable `r` (slot 0).
Expression ParseRadialExpression(std::string_view text);

/// 64-bit FNV-1a, used for run directory names and manifest hashes.
std::uint64_t Fnv1a(std::string_view bytes);
std::string HexDigest(std::uint64_t hash);

}  // namespace asclf
