#pragma once

// Versioned plain-text model files. Every number is written in shortest
// round-trip form, so save -> load reproduces parameters bit for bit.
//
//   downwash-model 1
//   type linear|deepset|grid
//   meta <key> <value...>           zero or more
//   ...type-specific sections...
//   end

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "downwash/io.hpp"
#include "downwash/models.hpp"

namespace downwash {

enum class ModelType { kLinear, kDeepSet, kGrid };

inline std::string_view to_string(ModelType t) {
  switch (t) {
    case ModelType::kLinear: return "linear";
    case ModelType::kDeepSet: return "deepset";
    case ModelType::kGrid: return "grid";
  }
  return "unknown";
}

namespace detail {

class ModelWriter {
 public:
  explicit ModelWriter(ModelType type) {
    out_ += "downwash-model 1\ntype ";
    out_ += to_string(type);
    out_ += '\n';
  }

  void meta(const Metadata& m) {
    for (const auto& [k, v] : m) {
      if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos) {
        throw IoError("model metadata key/value contains whitespace: '" + k + "'");
      }
      out_ += "meta " + k + " " + v + "\n";
    }
  }

  template <typename Range>
  void numbers(const std::string& tag, const Range& values) {
    out_ += tag;
    for (double v : values) {
      out_ += ' ';
      out_ += format_double(v);
    }
    out_ += '\n';
  }

  void scaling(const IoScaling& s) {
    numbers("input_scale", s.input_scale);
    numbers("output_scale", s.output_scale);
    numbers("loss_weights", s.loss_weights);
  }

  void mlp(const std::string& name, const Mlp& m) {
    out_ += "mlp " + name;
    for (auto d : m.dims()) out_ += " " + std::to_string(d);
    out_ += '\n';
    std::vector<double> p(m.parameter_count());
    m.write_parameters(p);
    // Eight values per line keeps files diffable.
    for (std::size_t i = 0; i < p.size(); i += 8) {
      out_ += 'p';
      for (std::size_t j = i; j < std::min(p.size(), i + 8); ++j) {
        out_ += ' ';
        out_ += format_double(p[j]);
      }
      out_ += '\n';
    }
  }

  void raw(const std::string& line) { out_ += line + "\n"; }

  std::string finish() {
    out_ += "end\n";
    return std::move(out_);
  }

 private:
  std::string out_;
};

class ModelReader {
 public:
  ModelReader(std::string text, std::string source) : source_(std::move(source)) {
    std::istringstream in(std::move(text));
    std::string line;
    while (std::getline(in, line)) lines_.push_back(line);
    const auto head = next_tokens();
    if (head.size() != 2 || head[0] != "downwash-model") fail("not a downwash model file");
    if (head[1] != "1") fail("unsupported model version " + head[1]);
    const auto type = next_tokens();
    if (type.size() != 2 || type[0] != "type") fail("expected 'type'");
    type_ = type[1];
  }

  const std::string& type() const { return type_; }

  Metadata meta() {
    Metadata m;
    while (at_ < lines_.size() && lines_[at_].rfind("meta ", 0) == 0) {
      const std::string& l = lines_[at_++];
      const auto sp = l.find(' ', 5);
      if (sp == std::string::npos) {
        m[l.substr(5)] = "";
      } else {
        m[l.substr(5, sp - 5)] = l.substr(sp + 1);
      }
    }
    return m;
  }

  std::vector<double> numbers(const std::string& tag, std::size_t count) {
    const auto t = next_tokens();
    if (t.empty() || t[0] != tag) fail("expected '" + tag + "'");
    if (t.size() != count + 1) fail("expected " + std::to_string(count) + " values for " + tag);
    std::vector<double> out;
    for (std::size_t i = 1; i < t.size(); ++i) out.push_back(number(t[i]));
    return out;
  }

  IoScaling scaling() {
    IoScaling s;
    auto copy = [](const std::vector<double>& v, auto& dst) {
      std::copy(v.begin(), v.end(), dst.begin());
    };
    copy(numbers("input_scale", 6), s.input_scale);
    copy(numbers("output_scale", 6), s.output_scale);
    copy(numbers("loss_weights", 6), s.loss_weights);
    return s;
  }

  Mlp mlp(const std::string& name) {
    const auto t = next_tokens();
    if (t.size() < 4 || t[0] != "mlp" || t[1] != name) fail("expected 'mlp " + name + "'");
    std::vector<std::size_t> dims;
    for (std::size_t i = 2; i < t.size(); ++i) dims.push_back(count(t[i]));
    Mlp m;
    try {
      m = Mlp(dims);
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
    std::vector<double> p;
    p.reserve(m.parameter_count());
    while (p.size() < m.parameter_count()) {
      const auto row = next_tokens();
      if (row.empty() || row[0] != "p") fail("expected parameter row");
      for (std::size_t i = 1; i < row.size(); ++i) p.push_back(number(row[i]));
    }
    if (p.size() != m.parameter_count()) fail("parameter count mismatch for " + name);
    m.read_parameters(p);
    return m;
  }

  std::vector<std::string> next_tokens() {
    while (at_ < lines_.size() && lines_[at_].empty()) ++at_;
    if (at_ >= lines_.size()) fail("unexpected end of file");
    std::istringstream ss(lines_[at_++]);
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
  }

  void expect_end() {
    const auto t = next_tokens();
    if (t.size() != 1 || t[0] != "end") fail("expected 'end'");
  }

  double number(const std::string& s) {
    try {
      return parse_double(s);
    } catch (const IoError& e) {
      fail(e.what());
    }
  }

  std::size_t count(const std::string& s) {
    const double v = number(s);
    if (!(v >= 0) || v != std::floor(v)) fail("expected a count, got '" + s + "'");
    return static_cast<std::size_t>(v);
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw IoError(source_ + ":" + std::to_string(at_) + ": " + msg);
  }

 private:
  std::vector<std::string> lines_;
  std::size_t at_ = 0;
  std::string source_;
  std::string type_;
};

inline ModelReader open_model(const std::filesystem::path& path, ModelType expected) {
  ModelReader r(read_text_file(path), path.string());
  if (r.type() != to_string(expected)) {
    r.fail("expected a " + std::string(to_string(expected)) + " model, found '" + r.type() + "'");
  }
  return r;
}

}  // namespace detail

inline std::string model_to_text(const LinearAggModel& m) {
  detail::ModelWriter w(ModelType::kLinear);
  w.meta(m.metadata);
  w.scaling(m.scaling);
  w.mlp("psi", m.psi);
  return w.finish();
}

inline std::string model_to_text(const DeepSetModel& m) {
  detail::ModelWriter w(ModelType::kDeepSet);
  w.meta(m.metadata);
  w.scaling(m.scaling);
  w.mlp("phi", m.phi);
  w.mlp("Phi", m.big_phi);
  return w.finish();
}

inline std::string model_to_text(const GridLookupModel& m) {
  detail::ModelWriter w(ModelType::kGrid);
  w.meta(m.metadata);
  w.numbers("lo", m.spec.lo);
  w.numbers("hi", m.spec.hi);
  w.raw("nodes " + std::to_string(m.spec.nodes[0]) + " " + std::to_string(m.spec.nodes[1]) +
        " " + std::to_string(m.spec.nodes[2]));
  for (const auto& c : m.cells) w.numbers("c", c.to_array());
  return w.finish();
}

template <typename Model>
void save_model(const Model& m, const std::filesystem::path& path) {
  write_text_file(path, model_to_text(m));
}

/// Reads the `type` line only.
inline ModelType model_type(const std::filesystem::path& path) {
  detail::ModelReader r(read_text_file(path), path.string());
  for (auto t : {ModelType::kLinear, ModelType::kDeepSet, ModelType::kGrid}) {
    if (r.type() == to_string(t)) return t;
  }
  r.fail("unknown model type '" + r.type() + "'");
}

inline LinearAggModel load_linear_model(const std::filesystem::path& path) {
  auto r = detail::open_model(path, ModelType::kLinear);
  LinearAggModel m;
  m.metadata = r.meta();
  m.scaling = r.scaling();
  m.psi = r.mlp("psi");
  r.expect_end();
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    r.fail(e.what());
  }
  return m;
}

inline DeepSetModel load_deepset_model(const std::filesystem::path& path) {
  auto r = detail::open_model(path, ModelType::kDeepSet);
  DeepSetModel m;
  m.metadata = r.meta();
  m.scaling = r.scaling();
  m.phi = r.mlp("phi");
  m.big_phi = r.mlp("Phi");
  r.expect_end();
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    r.fail(e.what());
  }
  return m;
}

inline GridLookupModel load_grid_model(const std::filesystem::path& path) {
  auto r = detail::open_model(path, ModelType::kGrid);
  GridLookupModel m;
  m.metadata = r.meta();
  const auto lo = r.numbers("lo", 3);
  const auto hi = r.numbers("hi", 3);
  const auto nodes = r.next_tokens();
  if (nodes.size() != 4 || nodes[0] != "nodes") r.fail("expected 'nodes'");
  for (std::size_t a = 0; a < 3; ++a) {
    m.spec.lo[a] = lo[a];
    m.spec.hi[a] = hi[a];
    m.spec.nodes[a] = r.count(nodes[a + 1]);
  }
  try {
    m.spec.validate();
  } catch (const std::invalid_argument& e) {
    r.fail(e.what());
  }
  m.cells.reserve(m.spec.cell_count());
  for (std::size_t c = 0; c < m.spec.cell_count(); ++c) {
    const auto v = r.numbers("c", 6);
    std::array<double, 6> a{};
    std::copy(v.begin(), v.end(), a.begin());
    m.cells.push_back(Wrench6::from_array(a));
  }
  r.expect_end();
  return m;
}

}  // namespace downwash
