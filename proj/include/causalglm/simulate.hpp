#pragma once

// Seeded structural-causal-model simulator. A model is a list of structural
// assignments (deterministic expression over parents plus optional normal
// noise) and one target node whose conditional law is Poisson (log link) or
// Bernoulli (logit link). Targets can be coupled to a latent node's noise:
// the uniform driving the latent noise is reused as the quantile level of
// the target draw, so the target is exactly family-distributed given its
// parents while staying correlated with downstream children of the latent.
//
// Noise for each node is drawn from a substream keyed by (seed, node name,
// row block), so generation is reproducible and independent of declaration
// order and of any parallel schedule.

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalglm/dataset.hpp"
#include "causalglm/edf.hpp"
#include "causalglm/rng.hpp"
#include "causalglm/special.hpp"

namespace causalglm {

// Largest Poisson rate the sampler accepts; beyond this, counts lose
// integer exactness in doubles.
inline constexpr double kMaxPoissonRate = 1e12;

// ---------------------------------------------------------------------------
// Expression language: +, -, *, unary minus, sin(x), cube(x), exp(x),
// numeric literals and parent names.
// ---------------------------------------------------------------------------

namespace expr {

struct Node {
  enum class Op { Const, Var, Add, Sub, Mul, Neg, Sin, Cube, Exp };
  Op op = Op::Const;
  double value = 0.0;
  int var = -1;
  std::unique_ptr<Node> lhs, rhs;

  double eval(const std::vector<const Eigen::VectorXd*>& vars, Eigen::Index row) const {
    switch (op) {
      case Op::Const: return value;
      case Op::Var: return (*vars[static_cast<std::size_t>(var)])[row];
      case Op::Add: return lhs->eval(vars, row) + rhs->eval(vars, row);
      case Op::Sub: return lhs->eval(vars, row) - rhs->eval(vars, row);
      case Op::Mul: return lhs->eval(vars, row) * rhs->eval(vars, row);
      case Op::Neg: return -lhs->eval(vars, row);
      case Op::Sin: return std::sin(lhs->eval(vars, row));
      case Op::Cube: {
        const double x = lhs->eval(vars, row);
        return x * x * x;
      }
      case Op::Exp: return std::exp(lhs->eval(vars, row));
    }
    return 0.0;
  }
};

class Parser {
 public:
  Parser(std::string_view src, const std::vector<std::string>& names)
      : src_(src), names_(names) {}

  std::unique_ptr<Node> parse() {
    auto node = parse_sum();
    skip_ws();
    if (pos_ != src_.size())
      fail("unexpected trailing input");
    return node;
  }

  const std::set<int>& used() const { return used_; }

 private:
  std::unique_ptr<Node> parse_sum() {
    auto node = parse_term();
    while (true) {
      skip_ws();
      if (peek() == '+' || peek() == '-') {
        const char op = take();
        auto out = std::make_unique<Node>();
        out->op = op == '+' ? Node::Op::Add : Node::Op::Sub;
        out->lhs = std::move(node);
        out->rhs = parse_term();
        node = std::move(out);
      } else {
        return node;
      }
    }
  }

  std::unique_ptr<Node> parse_term() {
    auto node = parse_factor();
    while (true) {
      skip_ws();
      if (peek() == '*') {
        take();
        auto out = std::make_unique<Node>();
        out->op = Node::Op::Mul;
        out->lhs = std::move(node);
        out->rhs = parse_factor();
        node = std::move(out);
      } else {
        return node;
      }
    }
  }

  std::unique_ptr<Node> parse_factor() {
    skip_ws();
    const char c = peek();
    if (c == '-') {
      take();
      auto out = std::make_unique<Node>();
      out->op = Node::Op::Neg;
      out->lhs = parse_factor();
      return out;
    }
    if (c == '(') {
      take();
      auto node = parse_sum();
      expect(')');
      return node;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    fail("expected a number, name or '('");
    return nullptr;
  }

  std::unique_ptr<Node> parse_number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.' ||
            src_[pos_] == 'e' || src_[pos_] == 'E' ||
            ((src_[pos_] == '+' || src_[pos_] == '-') && pos_ > start &&
             (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E'))))
      ++pos_;
    const std::string text(src_.substr(start, pos_ - start));
    auto out = std::make_unique<Node>();
    out->op = Node::Op::Const;
    try {
      std::size_t used = 0;
      out->value = std::stod(text, &used);
      if (used != text.size()) fail("bad numeric literal '" + text + "'");
    } catch (const std::exception&) {
      fail("bad numeric literal '" + text + "'");
    }
    return out;
  }

  std::unique_ptr<Node> parse_ident() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                  src_[pos_] == '_'))
      ++pos_;
    const std::string name(src_.substr(start, pos_ - start));
    skip_ws();
    if (peek() == '(') {
      take();
      auto arg = parse_sum();
      expect(')');
      auto out = std::make_unique<Node>();
      if (name == "sin")
        out->op = Node::Op::Sin;
      else if (name == "cube")
        out->op = Node::Op::Cube;
      else if (name == "exp")
        out->op = Node::Op::Exp;
      else
        fail("unknown function '" + name + "'");
      out->lhs = std::move(arg);
      return out;
    }
    for (std::size_t j = 0; j < names_.size(); ++j) {
      if (names_[j] == name) {
        auto out = std::make_unique<Node>();
        out->op = Node::Op::Var;
        out->var = static_cast<int>(j);
        used_.insert(out->var);
        return out;
      }
    }
    fail("unknown name '" + name + "' (not a declared parent)");
    return nullptr;
  }

  char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }
  char take() { return src_[pos_++]; }
  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }
  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    take();
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("scm expression '" + std::string(src_) + "': " + what);
  }

  std::string_view src_;
  const std::vector<std::string>& names_;
  std::set<int> used_;
  std::size_t pos_ = 0;
};

}  // namespace expr

// ---------------------------------------------------------------------------
// Model specification
// ---------------------------------------------------------------------------

struct ScmNode {
  std::string name;
  std::vector<std::string> parents;
  std::string expr;        // deterministic map of the parents; "0" for roots
  double noise_var = 0.0;  // variance of the additive normal noise
};

struct ScmTarget {
  std::string name;
  FamilyKind family = FamilyKind::Poisson;
  std::vector<std::string> parents;
  std::string theta;    // natural-parameter expression over the parents
  std::string latent;   // latent node whose noise uniform drives the draw; "" = independent
};

struct ScmSpec {
  std::vector<ScmNode> nodes;  // structural assignments, target excluded
  ScmTarget target;

  nlohmann::json to_json() const {
    nlohmann::json nodes_json = nlohmann::json::array();
    for (const auto& node : nodes) {
      nodes_json.push_back({{"name", node.name},
                            {"parents", node.parents},
                            {"expr", node.expr},
                            {"noise_var", node.noise_var}});
    }
    nlohmann::json target_json = {
        {"name", target.name},
        {"family", target.family == FamilyKind::Poisson ? "poisson" : "bernoulli"},
        {"parents", target.parents},
        {"theta", target.theta}};
    if (!target.latent.empty()) target_json["latent"] = target.latent;
    return nlohmann::json{{"nodes", nodes_json}, {"target", target_json}};
  }

  std::string to_json_string() const { return to_json().dump(); }

  static ScmSpec from_json(const nlohmann::json& j) {
    ScmSpec spec;
    for (const auto& node_json : j.at("nodes")) {
      ScmNode node;
      node.name = node_json.at("name").get<std::string>();
      node.parents = node_json.at("parents").get<std::vector<std::string>>();
      node.expr = node_json.at("expr").get<std::string>();
      node.noise_var = node_json.at("noise_var").get<double>();
      spec.nodes.push_back(std::move(node));
    }
    const auto& target_json = j.at("target");
    spec.target.name = target_json.at("name").get<std::string>();
    const std::string family = target_json.at("family").get<std::string>();
    if (family == "poisson")
      spec.target.family = FamilyKind::Poisson;
    else if (family == "bernoulli" || family == "binomial")
      spec.target.family = FamilyKind::Bernoulli;
    else
      throw std::invalid_argument("scm: unknown target family '" + family + "'");
    spec.target.parents = target_json.at("parents").get<std::vector<std::string>>();
    spec.target.theta = target_json.at("theta").get<std::string>();
    if (target_json.contains("latent"))
      spec.target.latent = target_json.at("latent").get<std::string>();
    return spec;
  }

  static ScmSpec from_json_string(const std::string& text) {
    return from_json(nlohmann::json::parse(text));
  }
};

struct ShiftSpec {
  double sigma2 = 0.0;
  std::vector<std::string> variables;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr Eigen::Index kGenBlock = 8192;

// Per-node noise uniforms, identical whether blocks are filled in sequence
// or in parallel.
inline Eigen::VectorXd node_uniforms(std::uint64_t seed, const std::string& name,
                                     Eigen::Index n) {
  Eigen::VectorXd u(n);
  for (Eigen::Index block = 0; block * kGenBlock < n; ++block) {
    Rng rng(substream_key(seed, name, static_cast<std::uint64_t>(block)));
    const Eigen::Index lo = block * kGenBlock;
    const Eigen::Index hi = std::min(n, lo + kGenBlock);
    for (Eigen::Index i = lo; i < hi; ++i) u[i] = rng.next_unit();
  }
  return u;
}

struct TopoEntry {
  bool is_target = false;
  std::size_t node_index = 0;  // valid when !is_target
};

}  // namespace detail

// Validates the spec and returns the evaluation order: a deterministic
// topological sort (lexicographic among ready names), independent of the
// declaration order.
inline std::vector<detail::TopoEntry> scm_validate(const ScmSpec& spec) {
  std::map<std::string, std::size_t> index;
  for (std::size_t k = 0; k < spec.nodes.size(); ++k) {
    if (!index.emplace(spec.nodes[k].name, k).second)
      throw std::invalid_argument("scm: duplicate node name '" + spec.nodes[k].name + "'");
  }
  if (index.count(spec.target.name))
    throw std::invalid_argument("scm: target name collides with a structural node");
  if (spec.target.name.empty()) throw std::invalid_argument("scm: target name empty");

  // Full parent lists, with the target treated as one more vertex. The
  // latent node counts as a dependency of the target.
  std::map<std::string, std::vector<std::string>> parents_of;
  for (const auto& node : spec.nodes) parents_of[node.name] = node.parents;
  auto target_deps = spec.target.parents;
  if (!spec.target.latent.empty()) {
    const auto it = index.find(spec.target.latent);
    if (it == index.end())
      throw std::invalid_argument("scm: latent node '" + spec.target.latent + "' not declared");
    if (!(spec.nodes[it->second].noise_var > 0.0))
      throw std::invalid_argument("scm: latent node must carry positive noise variance");
    target_deps.push_back(spec.target.latent);
  }
  parents_of[spec.target.name] = target_deps;

  for (const auto& [name, parents] : parents_of) {
    for (const auto& parent : parents) {
      if (!index.count(parent) && parent != spec.target.name)
        throw std::invalid_argument("scm: node '" + name + "' references undeclared parent '" +
                                    parent + "'");
      if (parent == name) throw std::invalid_argument("scm: node '" + name + "' is its own parent");
    }
  }

  // Kahn's algorithm with lexicographic tie-break.
  std::map<std::string, int> remaining;
  std::map<std::string, std::vector<std::string>> children;
  for (const auto& [name, parents] : parents_of) {
    remaining[name] = static_cast<int>(parents.size());
    for (const auto& parent : parents) children[parent].push_back(name);
  }
  std::set<std::string> ready;
  for (const auto& [name, count] : remaining)
    if (count == 0) ready.insert(name);

  std::vector<detail::TopoEntry> order;
  while (!ready.empty()) {
    const std::string name = *ready.begin();
    ready.erase(ready.begin());
    detail::TopoEntry entry;
    if (name == spec.target.name) {
      entry.is_target = true;
    } else {
      entry.node_index = index.at(name);
    }
    order.push_back(entry);
    for (const auto& child : children[name])
      if (--remaining[child] == 0) ready.insert(child);
  }
  if (order.size() != parents_of.size())
    throw std::invalid_argument("scm: parent lists contain a cycle");
  return order;
}

// Generates a dataset of n rows. Columns are the structural nodes in
// declaration order (minus the latent coupling node), target last.
inline Dataset gen_scm(const ScmSpec& spec, Eigen::Index n, std::uint64_t seed,
                       const std::string& generator_id,
                       const std::optional<ShiftSpec>& shift = std::nullopt) {
  if (n < 1) throw std::invalid_argument("gen_scm: n must be >= 1");
  const auto order = scm_validate(spec);

  std::set<std::string> shift_vars;
  if (shift) {
    for (const auto& name : shift->variables) {
      if (name == spec.target.name)
        throw std::invalid_argument("apply_shift: cannot shift the target variable");
      bool found = false;
      for (const auto& node : spec.nodes) found = found || node.name == name;
      if (!found)
        throw std::invalid_argument("apply_shift: unknown variable '" + name + "'");
      shift_vars.insert(name);
    }
    if (!(shift->sigma2 >= 0.0))
      throw std::invalid_argument("apply_shift: sigma2 must be >= 0");
  }

  // Values for every vertex, filled in topological order.
  std::map<std::string, Eigen::VectorXd> values;
  Eigen::VectorXd latent_uniforms;

  for (const auto& entry : order) {
    if (!entry.is_target) {
      const ScmNode& node = spec.nodes[entry.node_index];
      std::vector<const Eigen::VectorXd*> parent_cols;
      for (const auto& parent : node.parents) parent_cols.push_back(&values.at(parent));
      expr::Parser parser(node.expr, node.parents);
      const auto ast = parser.parse();

      Eigen::VectorXd col(n);
      for (Eigen::Index i = 0; i < n; ++i) col[i] = ast->eval(parent_cols, i);

      if (node.noise_var > 0.0) {
        const Eigen::VectorXd u = detail::node_uniforms(seed, node.name, n);
        const double sd = std::sqrt(node.noise_var);
        for (Eigen::Index i = 0; i < n; ++i) col[i] += sd * normal_quantile(u[i]);
        if (node.name == spec.target.latent) latent_uniforms = u;
      } else if (node.name == spec.target.latent) {
        throw std::logic_error("scm: latent node without noise");  // caught in validate
      }

      if (shift && shift_vars.count(node.name) && shift->sigma2 > 0.0) {
        const Eigen::VectorXd u =
            detail::node_uniforms(shift->seed, "shift::" + node.name, n);
        const double sd = std::sqrt(shift->sigma2);
        for (Eigen::Index i = 0; i < n; ++i) col[i] += sd * normal_quantile(u[i]);
      }
      values.emplace(node.name, std::move(col));
    } else {
      std::vector<const Eigen::VectorXd*> parent_cols;
      for (const auto& parent : spec.target.parents)
        parent_cols.push_back(&values.at(parent));
      expr::Parser parser(spec.target.theta, spec.target.parents);
      const auto ast = parser.parse();

      Eigen::VectorXd u;
      if (!spec.target.latent.empty()) {
        u = latent_uniforms;
        if (u.size() != n) throw std::logic_error("scm: latent uniforms missing");
      } else {
        u = detail::node_uniforms(seed, spec.target.name, n);
      }

      Eigen::VectorXd col(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double theta = ast->eval(parent_cols, i);
        if (spec.target.family == FamilyKind::Poisson) {
          const double rate = std::exp(theta);
          if (!(rate <= kMaxPoissonRate))
            throw std::overflow_error("gen_scm: Poisson rate above sampler's safe range");
          col[i] = poisson_quantile(u[i], rate);
        } else {
          const double p = logistic(theta);
          col[i] = u[i] <= 1.0 - p ? 0.0 : 1.0;
        }
      }
      values.emplace(spec.target.name, std::move(col));
    }
  }

  Dataset data;
  for (const auto& node : spec.nodes) {
    if (node.name == spec.target.latent) continue;
    data.names.push_back(node.name);
    data.columns.push_back(values.at(node.name));
  }
  data.names.push_back(spec.target.name);
  data.columns.push_back(values.at(spec.target.name));
  data.target_name = spec.target.name;
  data.meta.seed = seed;
  data.meta.generator = generator_id;
  data.meta.scm_json = spec.to_json_string();
  if (shift) {
    std::ostringstream desc;
    desc << "sigma2=" << shift->sigma2 << " vars=";
    for (std::size_t k = 0; k < shift->variables.size(); ++k) {
      if (k) desc << ',';
      desc << shift->variables[k];
    }
    desc << " seed=" << shift->seed;
    data.meta.shift = desc.str();
  }
  return data;
}

// ---------------------------------------------------------------------------
// The three built-in designs
// ---------------------------------------------------------------------------

inline ScmSpec fig1_spec() {
  ScmSpec spec;
  spec.nodes = {{"X1", {}, "0", 1.0},
                {"Z", {"X1"}, "X1", 1.0},
                {"X2", {"Z"}, "Z", 1.0}};
  spec.target = {"Y", FamilyKind::Poisson, {"X1"}, "X1", "Z"};
  return spec;
}

inline ScmSpec fig3_spec() {
  ScmSpec spec;
  const double v = 0.04;
  spec.nodes = {{"X1", {}, "0", v},
                {"X2", {"X1"}, "X1", v},
                {"X3", {"X1", "X2"}, "X1+X2", v},
                {"Z", {"X2", "X3"}, "sin(5*X2)+cube(X3)", v},
                {"X4", {"X2"}, "X2", v},
                {"X5", {"Z"}, "Z", v},
                {"X6", {"Z"}, "Z", v},
                {"X7", {"X6"}, "X6", v}};
  spec.target = {"Y", FamilyKind::Poisson, {"X2", "X3"}, "sin(5*X2)+cube(X3)", "Z"};
  return spec;
}

inline ScmSpec fig4_spec(double pi = 0.1) {
  if (!(pi > 0.0 && pi < 1.0))
    throw std::invalid_argument("fig4_spec: pi must lie in (0,1)");
  ScmSpec spec;
  std::ostringstream x5;
  x5 << detail::format_double(1.0 - pi) << "*Y+" << detail::format_double(pi) << "*(1-Y)";
  spec.nodes = {{"X1", {}, "0", 1.0},
                {"X2", {"X1"}, "X1", 1.0},
                {"X3", {}, "0", 1.0},
                {"X4", {"X2"}, "X2", 1.0},
                {"X5", {"Y"}, x5.str(), 1.0}};
  spec.target = {"Y", FamilyKind::Bernoulli, {"X2", "X3"}, "0.8*X2-0.9*X3", ""};
  return spec;
}

inline Dataset gen_fig1(Eigen::Index n, std::uint64_t seed) {
  return gen_scm(fig1_spec(), n, seed, "fig1");
}

inline Dataset gen_fig3(Eigen::Index n, std::uint64_t seed) {
  return gen_scm(fig3_spec(), n, seed, "fig3");
}

inline Dataset gen_fig4(Eigen::Index n, std::uint64_t seed, double pi = 0.1) {
  return gen_scm(fig4_spec(pi), n, seed, "fig4");
}

// Re-generates the dataset's SCM with extra N(0, sigma2) noise injected at
// the named nodes before downstream propagation, so children respond to the
// intervention. The base draw reuses the dataset's own seed; sigma2 = 0
// reproduces the input data exactly.
inline Dataset apply_shift(const Dataset& data, double sigma2,
                           const std::vector<std::string>& variables,
                           std::uint64_t seed) {
  if (data.meta.scm_json.empty())
    throw std::invalid_argument("apply_shift: dataset does not carry a generator spec");
  const ScmSpec spec = ScmSpec::from_json_string(data.meta.scm_json);
  ShiftSpec shift;
  shift.sigma2 = sigma2;
  shift.variables = variables;
  shift.seed = seed;
  return gen_scm(spec, data.n(), data.meta.seed, data.meta.generator, shift);
}

}  // namespace causalglm
