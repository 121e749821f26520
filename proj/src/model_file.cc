#include "asclf/model_file.h"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace asclf {

ModelFileError::ModelFileError(std::size_t position, int line, int column,
                               const std::string& message)
    : ParseError(position, "line " + std::to_string(line) + ", column " +
                               std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

SymbolTable StateSymbols(int state_dim) {
  SymbolTable table;
  for (int i = 0; i < state_dim; ++i) table.variables["x" + std::to_string(i + 1)] = i;
  return table;
}

Expression ParseRadialExpression(std::string_view text) {
  SymbolTable table;
  table.variables["r"] = 0;
  return ParseExpression(text, table);
}

std::uint64_t Fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string HexDigest(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

namespace {

struct Entry {
  std::string key;
  std::string value;
  std::size_t key_offset;    // byte offset of key in file
  std::size_t value_offset;  // byte offset of value in file
  int line;
};

struct Section {
  std::string name;
  std::vector<Entry> entries;
  std::size_t offset;
  int line;
};

std::string Trim(std::string_view s, std::size_t* lead = nullptr) {
  std::size_t b = 0;
  while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  std::size_t e = s.size();
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  if (lead) *lead = b;
  return std::string(s.substr(b, e - b));
}

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {
    std::size_t line_start = 0;
    while (line_start <= text_.size()) {
      std::size_t end = text_.find('\n', line_start);
      if (end == std::string_view::npos) end = text_.size();
      line_starts_.push_back(line_start);
      if (end == text_.size()) break;
      line_start = end + 1;
    }
  }

  [[noreturn]] void Fail(std::size_t offset, const std::string& message) const {
    int line = 1;
    for (std::size_t i = 1; i < line_starts_.size() && line_starts_[i] <= offset; ++i) ++line;
    const int column = static_cast<int>(offset - line_starts_[line - 1]) + 1;
    throw ModelFileError(offset, line, column, message);
  }

  std::vector<Section> Split() const {
    std::vector<Section> sections;
    for (std::size_t li = 0; li < line_starts_.size(); ++li) {
      const std::size_t start = line_starts_[li];
      std::size_t end = text_.find('\n', start);
      if (end == std::string_view::npos) end = text_.size();
      std::string_view raw = text_.substr(start, end - start);
      if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
      std::size_t lead = 0;
      const std::string line = Trim(raw, &lead);
      if (line.empty()) continue;
      const int line_no = static_cast<int>(li) + 1;
      if (line.front() == '[') {
        if (line.back() != ']') Fail(start + lead + line.size(), "expected ']' closing section header");
        sections.push_back({Trim(std::string_view(line).substr(1, line.size() - 2)), {}, start + lead,
                            line_no});
        continue;
      }
      if (sections.empty()) Fail(start + lead, "entry outside of any [section]");
      const auto eq = raw.find('=');
      if (eq == std::string_view::npos) Fail(start + lead, "expected 'key = value'");
      std::size_t klead = 0;
      std::size_t vlead = 0;
      const std::string key = Trim(raw.substr(0, eq), &klead);
      const std::string value = Trim(raw.substr(eq + 1), &vlead);
      if (key.empty()) Fail(start + lead, "missing key before '='");
      sections.back().entries.push_back(
          {key, value, start + klead, start + eq + 1 + vlead, line_no});
    }
    return sections;
  }

  Expression ParseValue(const Entry& e, const SymbolTable& symbols) const {
    return ParseValueAt(e.value, e.value_offset, symbols);
  }

  Expression ParseValueAt(std::string_view text, std::size_t offset,
                          const SymbolTable& symbols) const {
    try {
      return ParseExpression(text, symbols);
    } catch (const ParseError& err) {
      Fail(offset + err.position(), err.detail());
    }
  }

  /// Splits at top-level commas, returning (piece, offset) pairs.
  std::vector<std::pair<std::string, std::size_t>> SplitList(const Entry& e) const {
    std::vector<std::pair<std::string, std::size_t>> out;
    if (e.value.empty()) return out;
    int depth = 0;
    std::size_t begin = 0;
    for (std::size_t i = 0; i <= e.value.size(); ++i) {
      if (i == e.value.size() || (e.value[i] == ',' && depth == 0)) {
        std::size_t lead = 0;
        std::string piece = Trim(std::string_view(e.value).substr(begin, i - begin), &lead);
        if (piece.empty()) Fail(e.value_offset + begin, "empty list element");
        out.emplace_back(std::move(piece), e.value_offset + begin + lead);
        begin = i + 1;
      } else if (e.value[i] == '(') {
        ++depth;
      } else if (e.value[i] == ')') {
        --depth;
      }
    }
    return out;
  }

  double ParseConstant(std::string_view text, std::size_t offset, const SymbolTable& symbols) const {
    const Expression v = ParseValueAt(text, offset, symbols);
    if (!v.is_constant()) Fail(offset, "expected a constant value");
    return v.constant_value();
  }

  int ParseInt(const Entry& e) const {
    try {
      std::size_t used = 0;
      const int v = std::stoi(e.value, &used);
      if (used != e.value.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      Fail(e.value_offset, "expected an integer, got '" + e.value + "'");
    }
  }

 private:
  std::string_view text_;
  std::vector<std::size_t> line_starts_;
};

// Parses "f3" -> (3) and "s2_1" / "s21" -> (2, 1); 1-based indices.
bool ParseIndexKey(const std::string& key, char prefix, int arity, std::vector<int>* idx) {
  if (key.size() < 2 || key[0] != prefix) return false;
  const std::string rest = key.substr(1);
  idx->clear();
  if (arity == 1) {
    if (rest.find_first_not_of("0123456789") != std::string::npos) return false;
    idx->push_back(std::stoi(rest));
    return true;
  }
  if (const auto us = rest.find('_'); us != std::string::npos) {
    const std::string a = rest.substr(0, us);
    const std::string b = rest.substr(us + 1);
    if (a.empty() || b.empty() || a.find_first_not_of("0123456789") != std::string::npos ||
        b.find_first_not_of("0123456789") != std::string::npos) {
      return false;
    }
    idx->push_back(std::stoi(a));
    idx->push_back(std::stoi(b));
    return true;
  }
  if (rest.size() == 2 && std::isdigit(static_cast<unsigned char>(rest[0])) &&
      std::isdigit(static_cast<unsigned char>(rest[1]))) {
    idx->push_back(rest[0] - '0');
    idx->push_back(rest[1] - '0');
    return true;
  }
  return false;
}

}  // namespace

ModelFile ParseModelFile(std::string_view text) {
  const Reader reader(text);
  const std::vector<Section> sections = reader.Split();

  std::map<std::string, const Section*> by_name;
  static const std::set<std::string> kKnown = {"dimensions", "parameters", "controls", "dynamics",
                                               "candidate",  "domain",     "target"};
  for (const Section& s : sections) {
    if (!kKnown.count(s.name)) reader.Fail(s.offset, "unknown section [" + s.name + "]");
    if (by_name.count(s.name)) reader.Fail(s.offset, "duplicate section [" + s.name + "]");
    by_name[s.name] = &s;
    std::set<std::string> keys;
    for (const Entry& e : s.entries) {
      if (!keys.insert(e.key).second) reader.Fail(e.key_offset, "duplicate key '" + e.key + "'");
    }
  }
  auto require = [&](const std::string& name) -> const Section& {
    auto it = by_name.find(name);
    if (it == by_name.end()) reader.Fail(text.size(), "missing section [" + name + "]");
    return *it->second;
  };

  // [dimensions]
  int n = 0;
  int m = 0;
  {
    const Section& s = require("dimensions");
    for (const Entry& e : s.entries) {
      if (e.key == "N") {
        n = reader.ParseInt(e);
      } else if (e.key == "M") {
        m = reader.ParseInt(e);
      } else {
        reader.Fail(e.key_offset, "unknown key '" + e.key + "' in [dimensions]");
      }
      if ((e.key == "N" && n < 1) || (e.key == "M" && m < 1)) {
        reader.Fail(e.value_offset, e.key + " must be >= 1");
      }
    }
    if (n == 0 || m == 0) reader.Fail(s.offset, "[dimensions] must declare N and M");
  }

  // [parameters]: named constants, each may use the ones before it.
  SymbolTable constants;
  if (auto it = by_name.find("parameters"); it != by_name.end()) {
    for (const Entry& e : it->second->entries) {
      constants.constants[e.key] = reader.ParseConstant(e.value, e.value_offset, constants);
    }
  }

  // [controls]
  ControlledDiffusion::Spec spec;
  spec.state_dim = n;
  spec.noise_dim = m;
  if (auto it = by_name.find("controls"); it != by_name.end()) {
    const Section& s = *it->second;
    std::size_t first = 0;
    if (!s.entries.empty() && s.entries[0].key == "params") {
      for (const auto& [name, offset] : reader.SplitList(s.entries[0])) {
        spec.param_names.push_back(name);
      }
      first = 1;
    }
    for (std::size_t k = first; k < s.entries.size(); ++k) {
      const Entry& e = s.entries[k];
      if (e.key == "params") reader.Fail(e.key_offset, "'params' must be the first entry");
      const auto values = reader.SplitList(e);
      if (values.size() != spec.param_names.size()) {
        reader.Fail(e.value_offset, "control '" + e.key + "' needs " +
                                        std::to_string(spec.param_names.size()) + " values");
      }
      Control control{e.key, VectorXd(static_cast<Index>(values.size()))};
      for (std::size_t v = 0; v < values.size(); ++v) {
        control.params[static_cast<Index>(v)] =
            reader.ParseConstant(values[v].first, values[v].second, constants);
      }
      spec.controls.push_back(std::move(control));
    }
    if (spec.controls.empty()) reader.Fail(s.offset, "[controls] declares no control");
  } else {
    spec.controls.push_back({"default", VectorXd()});
  }

  SymbolTable model_symbols = StateSymbols(n);
  model_symbols.constants = constants.constants;
  for (std::size_t k = 0; k < spec.param_names.size(); ++k) {
    const std::string& name = spec.param_names[k];
    if (model_symbols.variables.count(name)) {
      reader.Fail(by_name.at("controls")->offset, "control parameter '" + name + "' shadows a state variable");
    }
    model_symbols.variables[name] = n + static_cast<int>(k);
  }

  // [dynamics]
  {
    const Section& s = require("dynamics");
    const std::size_t nc = spec.controls.size();
    std::vector<std::optional<Expression>> drift_all(static_cast<std::size_t>(n));
    std::vector<std::optional<Expression>> sigma_all(static_cast<std::size_t>(n * m));
    std::vector<std::vector<std::optional<Expression>>> drift_at(
        nc, std::vector<std::optional<Expression>>(static_cast<std::size_t>(n)));
    std::vector<std::vector<std::optional<Expression>>> sigma_at(
        nc, std::vector<std::optional<Expression>>(static_cast<std::size_t>(n * m)));
    for (const Entry& e : s.entries) {
      std::string key = e.key;
      int control = -1;
      if (const auto at = key.find('@'); at != std::string::npos) {
        const std::string label = key.substr(at + 1);
        key = key.substr(0, at);
        for (std::size_t c = 0; c < nc; ++c) {
          if (spec.controls[c].label == label) control = static_cast<int>(c);
        }
        if (control < 0) reader.Fail(e.key_offset, "unknown control label '" + label + "'");
      }
      std::vector<int> idx;
      const Expression expr = reader.ParseValue(e, model_symbols);
      if (ParseIndexKey(key, 'f', 1, &idx)) {
        if (idx[0] < 1 || idx[0] > n) {
          reader.Fail(e.key_offset, "drift component " + key + " exceeds N = " + std::to_string(n));
        }
        auto& slot = control < 0 ? drift_all[idx[0] - 1] : drift_at[control][idx[0] - 1];
        slot = expr;
      } else if (ParseIndexKey(key, 's', 2, &idx)) {
        if (idx[0] < 1 || idx[0] > n || idx[1] < 1 || idx[1] > m) {
          reader.Fail(e.key_offset, "diffusion entry " + key + " outside N x M = " +
                                        std::to_string(n) + " x " + std::to_string(m));
        }
        const std::size_t k = static_cast<std::size_t>((idx[0] - 1) * m + (idx[1] - 1));
        auto& slot = control < 0 ? sigma_all[k] : sigma_at[control][k];
        slot = expr;
      } else {
        reader.Fail(e.key_offset, "unknown key '" + e.key + "' in [dynamics]");
      }
    }
    spec.drift.resize(nc);
    spec.diffusion.resize(nc);
    for (std::size_t c = 0; c < nc; ++c) {
      for (int i = 0; i < n; ++i) {
        const auto& e = drift_at[c][i] ? drift_at[c][i] : drift_all[i];
        if (!e) {
          throw DimensionError("drift f" + std::to_string(i + 1) + " missing for control '" +
                               spec.controls[c].label + "': drift length must equal N = " +
                               std::to_string(n));
        }
        spec.drift[c].push_back(*e);
      }
      for (int k = 0; k < n * m; ++k) {
        const auto& e = sigma_at[c][k] ? sigma_at[c][k] : sigma_all[k];
        spec.diffusion[c].push_back(e ? *e : Expression::Constant(0.0));
      }
    }
  }

  // [domain]
  if (auto it = by_name.find("domain"); it != by_name.end()) {
    Box box{VectorXd(), VectorXd()};
    for (const Entry& e : it->second->entries) {
      if (e.key != "lower" && e.key != "upper") {
        reader.Fail(e.key_offset, "unknown key '" + e.key + "' in [domain]");
      }
      const auto values = reader.SplitList(e);
      if (static_cast<int>(values.size()) != n) {
        reader.Fail(e.value_offset, e.key + " needs N = " + std::to_string(n) + " values");
      }
      VectorXd v(n);
      for (int i = 0; i < n; ++i) v[i] = reader.ParseConstant(values[i].first, values[i].second, constants);
      (e.key == "lower" ? box.lower : box.upper) = v;
    }
    if (box.lower.size() != n || box.upper.size() != n) {
      reader.Fail(it->second->offset, "[domain] needs both lower and upper");
    }
    if (!((box.upper.array() > box.lower.array()).all())) {
      reader.Fail(it->second->offset, "[domain] upper must exceed lower on every axis");
    }
    spec.domain = box;
  }

  ModelFile file{ControlledDiffusion(std::move(spec)), std::nullopt, std::nullopt, std::nullopt};
  SymbolTable state_symbols = StateSymbols(n);
  state_symbols.constants = constants.constants;

  // [candidate]
  if (auto it = by_name.find("candidate"); it != by_name.end()) {
    std::optional<Expression> v;
    DerivativeMode mode = DerivativeMode::kAnalytic;
    double fd_step = file.model.domain() ? 1e-4 * file.model.domain()->Diameter() : 1e-4;
    for (const Entry& e : it->second->entries) {
      if (e.key == "V") {
        v = reader.ParseValue(e, state_symbols);
      } else if (e.key == "l") {
        file.gauge = reader.ParseValue(e, state_symbols);
      } else if (e.key == "derivatives") {
        if (e.value == "analytic") {
          mode = DerivativeMode::kAnalytic;
        } else if (e.value == "central") {
          mode = DerivativeMode::kCentralDifference;
        } else {
          reader.Fail(e.value_offset, "derivatives must be 'analytic' or 'central'");
        }
      } else if (e.key == "fd_step") {
        fd_step = reader.ParseConstant(e.value, e.value_offset, constants);
        if (!(fd_step > 0.0)) reader.Fail(e.value_offset, "fd_step must be positive");
      } else {
        reader.Fail(e.key_offset, "unknown key '" + e.key + "' in [candidate]");
      }
    }
    if (v) file.candidate.emplace(*v, n, mode, fd_step);
  }

  // [target]
  if (auto it = by_name.find("target"); it != by_name.end()) {
    std::optional<Expression> d, g1, g2;
    SymbolTable radial;
    radial.variables["r"] = 0;
    radial.constants = constants.constants;
    for (const Entry& e : it->second->entries) {
      if (e.key == "d") {
        d = reader.ParseValue(e, state_symbols);
      } else if (e.key == "gamma1") {
        g1 = reader.ParseValue(e, radial);
      } else if (e.key == "gamma2") {
        g2 = reader.ParseValue(e, radial);
      } else {
        reader.Fail(e.key_offset, "unknown key '" + e.key + "' in [target]");
      }
    }
    if (!d || !g1 || !g2) reader.Fail(it->second->offset, "[target] needs d, gamma1 and gamma2");
    file.target = TargetSpec{*d, *g1, *g2};
  }
  return file;
}

ModelFile LoadModelFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseModelFile(buf.str());
}

std::string SerializeModelFile(const ModelFile& file) {
  const ControlledDiffusion& model = file.model;
  const int n = model.state_dim();
  const int m = model.noise_dim();
  std::ostringstream out;
  auto num = [](double v) { return Expression::Constant(v).ToString(); };

  out << "[dimensions]\nN = " << n << "\nM = " << m << "\n\n[controls]\n";
  if (!model.param_names().empty()) {
    out << "params = ";
    for (std::size_t k = 0; k < model.param_names().size(); ++k) {
      out << (k ? ", " : "") << model.param_names()[k];
    }
    out << "\n";
  }
  for (const Control& c : model.controls()) {
    out << c.label << " =";
    for (Index k = 0; k < c.params.size(); ++k) out << (k ? ", " : " ") << num(c.params[k]);
    out << "\n";
  }

  out << "\n[dynamics]\n";
  auto emit = [&](const std::string& key, auto get) {
    bool shared = true;
    for (int c = 1; c < model.num_controls(); ++c) {
      shared = shared && get(c).StructurallyEquals(get(0));
    }
    if (shared) {
      out << key << " = " << get(0).ToString() << "\n";
    } else {
      for (int c = 0; c < model.num_controls(); ++c) {
        out << key << "@" << model.controls()[c].label << " = " << get(c).ToString() << "\n";
      }
    }
  };
  for (int i = 0; i < n; ++i) {
    emit("f" + std::to_string(i + 1), [&](int c) { return model.drift_expression(c, i); });
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      bool all_zero = true;
      for (int c = 0; c < model.num_controls(); ++c) {
        all_zero = all_zero && model.diffusion_expression(c, i, j).IsConstant(0.0);
      }
      if (all_zero) continue;
      emit("s" + std::to_string(i + 1) + "_" + std::to_string(j + 1),
           [&](int c) { return model.diffusion_expression(c, i, j); });
    }
  }

  if (model.domain()) {
    out << "\n[domain]\nlower =";
    for (int i = 0; i < n; ++i) out << (i ? ", " : " ") << num(model.domain()->lower[i]);
    out << "\nupper =";
    for (int i = 0; i < n; ++i) out << (i ? ", " : " ") << num(model.domain()->upper[i]);
    out << "\n";
  }
  if (file.candidate || file.gauge) {
    out << "\n[candidate]\n";
    if (file.candidate) {
      out << "V = " << file.candidate->expression().ToString() << "\n";
      out << "derivatives = "
          << (file.candidate->mode() == DerivativeMode::kAnalytic ? "analytic" : "central") << "\n";
      out << "fd_step = " << num(file.candidate->fd_step()) << "\n";
    }
    if (file.gauge) out << "l = " << file.gauge->ToString() << "\n";
  }
  if (file.target) {
    out << "\n[target]\nd = " << file.target->distance.ToString()
        << "\ngamma1 = " << file.target->gamma1.ToString()
        << "\ngamma2 = " << file.target->gamma2.ToString() << "\n";
  }
  return out.str();
}

}  // namespace asclf
