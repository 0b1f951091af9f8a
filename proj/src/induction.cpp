#include "loophole/induction.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "loophole/kernel.hpp"

namespace loophole::induction {

using rulelang::Condition;
using rulelang::GroundAtom;
using rulelang::Literal;
using rulelang::Term;

std::optional<std::string> InductionConfig::validate() const {
  if (max_literals < 1) return "max-literals must be >= 1";
  if (beam_width < 1) return "beam width must be >= 1";
  if (max_clauses < 1) return "max clauses must be >= 1";
  if (top_k_edges < 0) return "top-k must be >= 0";
  if (roles.empty()) return "at least one role is required";
  for (const auto& v : vocabulary) {
    auto p = predicate_from_name(v);
    if (!p || !is_state_predicate(*p)) return "vocabulary entry '" + v + "' is not a state predicate";
  }
  return std::nullopt;
}

LabeledExamples label(const TrajectorySet& set, double u_plus) {
  LabeledExamples out;
  out.u_plus = u_plus;
  for (const auto& t : set.trajectories) {
    if (!t.complete) continue;
    (t.utility > u_plus ? out.positives : out.negatives).push_back(t.id);
  }
  std::sort(out.positives.begin(), out.positives.end());
  std::sort(out.negatives.begin(), out.negatives.end());
  if (out.positives.empty()) spdlog::warn("no trajectory has utility above {}", u_plus);
  return out;
}

const ExampleBackground* Background::find(int trajectory_id) const {
  auto it = std::lower_bound(examples.begin(), examples.end(), trajectory_id,
                             [](const ExampleBackground& e, int id) { return e.trajectory_id < id; });
  return it != examples.end() && it->trajectory_id == trajectory_id ? &*it : nullptr;
}

Background build_background(const TrajectorySet& set, const InductionConfig& config) {
  Background bg;
  for (const auto& [var, _] : config.roles) bg.head_vars.push_back(var);
  const std::set<std::string> vocab(config.vocabulary.begin(), config.vocabulary.end());
  for (const auto& t : set.trajectories) {
    ExampleBackground ex;
    ex.trajectory_id = t.id;
    bool ok = true;
    for (const auto& [_, country] : config.roles) {
      std::optional<std::string> company;
      for (const auto& f : t.final_state) {
        if (f.predicate == "based" && f.args.size() == 2 && f.args[1] == country) {
          company = f.args[0];
          break;
        }
      }
      if (!company) {
        ok = false;
        break;
      }
      ex.role_entities.push_back(*company);
    }
    if (!ok) {
      bg.excluded.push_back(t.id);
      continue;
    }
    for (const auto& f : t.final_state) {
      if (vocab.count(f.predicate)) ex.facts.push_back(f);
    }
    std::sort(ex.facts.begin(), ex.facts.end());
    bg.examples.push_back(std::move(ex));
  }
  std::sort(bg.examples.begin(), bg.examples.end(),
            [](const auto& a, const auto& b) { return a.trajectory_id < b.trajectory_id; });
  if (!bg.excluded.empty()) spdlog::warn("{} trajectories lack a company for some role and are excluded", bg.excluded.size());
  return bg;
}

Metrics metrics_from(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  Metrics m{tp, fp, tn, fn, {}, {}, {}, {}, {}};
  auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = ratio(tp + tn, tp + tn + fp + fn);
  m.precision = ratio(tp, tp + fp);
  m.specificity = ratio(tn, tn + fp);
  m.sensitivity = ratio(tp, tp + fn);
  m.f1 = ratio(2 * tp, 2 * tp + fp + fn);
  return m;
}

namespace {

enum class ArgType : std::uint8_t { company, country, ip };

std::vector<ArgType> signature(Predicate p) {
  switch (p) {
    case Predicate::based:
    case Predicate::managed: return {ArgType::company, ArgType::country};
    case Predicate::isChildOf: return {ArgType::company, ArgType::company};
    case Predicate::ownsIP: return {ArgType::company, ArgType::ip};
    case Predicate::rentsIP: return {ArgType::company, ArgType::company, ArgType::ip};
    case Predicate::exists: return {ArgType::company};
    default: return {};
  }
}

// Backgrounds with identical facts and role bindings are evaluated once and
// carry their label counts as weights.
struct Unique {
  kernel::FactBase db;
  kernel::Binding seed;
  std::size_t pos = 0;
  std::size_t neg = 0;
  std::vector<int> ids;
};

class Engine {
 public:
  Engine(const Background& bg, const std::vector<std::string>& head_vars) : head_vars_(head_vars) {
    std::vector<std::string> names;
    for (const auto& ex : bg.examples) {
      for (const auto& f : ex.facts) names.insert(names.end(), f.args.begin(), f.args.end());
      names.insert(names.end(), ex.role_entities.begin(), ex.role_entities.end());
    }
    symbols_ = kernel::SymbolTable(std::move(names));
  }

  const kernel::SymbolTable& symbols() const { return symbols_; }

  // Adds an example; returns its unique index.
  std::size_t add(const ExampleBackground& ex, bool positive) {
    // Role companies become their head position and other companies are
    // numbered by first appearance, so isomorphic backgrounds mostly share a key.
    std::map<std::string, std::string> rename;
    for (std::size_t i = 0; i < ex.role_entities.size(); ++i) rename[ex.role_entities[i]] = "#" + std::to_string(i);
    auto render = [&](bool assign) {
      std::vector<std::pair<std::string, const GroundAtom*>> out;
      for (const auto& f : ex.facts) {
        const auto sig = signature(*predicate_from_name(f.predicate));
        std::string r = f.predicate + "(";
        for (std::size_t i = 0; i < f.args.size(); ++i) {
          const bool company = i < sig.size() && sig[i] == ArgType::company;
          auto it = rename.find(f.args[i]);
          r += it != rename.end() ? it->second : company ? std::string("?") : f.args[i];
          r += ",";
        }
        out.emplace_back(r + ")", &f);
      }
      std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      if (assign) {
        for (const auto& [_, f] : out) {
          const auto sig = signature(*predicate_from_name(f->predicate));
          for (std::size_t i = 0; i < f->args.size() && i < sig.size(); ++i) {
            if (sig[i] == ArgType::company && !rename.count(f->args[i])) {
              rename[f->args[i]] = "$" + std::to_string(rename.size());
            }
          }
        }
      }
      return out;
    };
    render(true);
    std::string key = std::to_string(ex.role_entities.size()) + "|";
    for (const auto& [r, _] : render(false)) key += r;
    auto [it, inserted] = index_.emplace(key, uniques_.size());
    if (inserted) {
      Unique u;
      std::vector<kernel::Fact> facts;
      for (const auto& g : ex.facts) {
        kernel::Fact f;
        f.predicate = *predicate_from_name(g.predicate);
        f.arity = static_cast<std::uint8_t>(g.args.size());
        for (std::size_t i = 0; i < g.args.size(); ++i) f.args[i] = symbols_.id(g.args[i]);
        facts.push_back(f);
      }
      u.db = kernel::FactBase(std::move(facts));
      for (const auto& r : ex.role_entities) u.seed.push_back(symbols_.id(r));
      uniques_.push_back(std::move(u));
    }
    Unique& u = uniques_[it->second];
    (positive ? u.pos : u.neg) += 1;
    u.ids.push_back(ex.trajectory_id);
    return it->second;
  }

  std::vector<Unique>& uniques() { return uniques_; }
  const std::vector<Unique>& uniques() const { return uniques_; }

  // nullopt if the body mentions a constant unknown to every example (then
  // it covers nothing).
  std::optional<kernel::CompiledCondition> compile(const Condition& body) const {
    try {
      return kernel::compile_condition(body, symbols_, head_vars_);
    } catch (const kernel::CompileError&) {
      return std::nullopt;
    }
  }

  bool covers(const kernel::CompiledCondition& c, const Unique& u) const {
    kernel::Binding seed(c.var_names.size(), kernel::kUnbound);
    std::copy(u.seed.begin(), u.seed.end(), seed.begin());
    return kernel::match_any(u.db, c, seed).has_value();
  }

 private:
  std::vector<std::string> head_vars_;
  kernel::SymbolTable symbols_;
  std::vector<Unique> uniques_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Candidate {
  Condition body;
  std::vector<std::pair<std::string, ArgType>> vars;  // non-head variables
  std::vector<std::size_t> covered;                   // unique indices
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::string key;

  double f1() const {
    const double den = static_cast<double>(2 * tp + fp + fn);
    return den == 0.0 ? 0.0 : static_cast<double>(2 * tp) / den;
  }
};

bool better(const Candidate& a, const Candidate& b) {
  const double fa = a.f1();
  const double fb = b.f1();
  if (fa != fb) return fa > fb;
  if (a.fp != b.fp) return a.fp < b.fp;
  if (a.body.size() != b.body.size()) return a.body.size() < b.body.size();
  if (a.vars.size() != b.vars.size()) return a.vars.size() < b.vars.size();
  return a.key < b.key;
}

std::string clause_key(const Condition& body) {
  std::vector<std::string> parts;
  for (const auto& l : body) parts.push_back(rulelang::render_literal(l));
  std::sort(parts.begin(), parts.end());
  std::string out;
  for (const auto& p : parts) out += p + ", ";
  return out;
}

class Learner {
 public:
  Learner(Engine& engine, const InductionConfig& config, const std::vector<std::string>& head_vars,
          std::map<ArgType, std::vector<std::string>> constants)
      : engine_(engine), config_(config), head_vars_(head_vars), constants_(std::move(constants)) {
    for (const auto& v : config.vocabulary) vocab_.push_back(*predicate_from_name(v));
  }

  // Best clause against the remaining positive weights `pos` and all negatives.
  std::optional<Candidate> best_clause(const std::vector<std::size_t>& pos) {
    std::size_t total_pos = 0;
    for (auto w : pos) total_pos += w;

    Candidate root;
    for (std::size_t i = 0; i < engine_.uniques().size(); ++i) root.covered.push_back(i);
    score(root, pos, total_pos);
    std::vector<Candidate> beam{root};
    std::optional<Candidate> best;

    for (int depth = 1; depth <= config_.max_literals && !beam.empty(); ++depth) {
      std::vector<Candidate> next;
      std::set<std::string> seen;
      for (const auto& parent : beam) {
        if (!parent.body.empty() && parent.fp == 0) continue;  // cannot improve by specializing
        for (auto& child : refinements(parent)) {
          child.key = clause_key(child.body);
          if (!seen.insert(child.key).second) continue;
          auto compiled = engine_.compile(child.body);
          if (!compiled) continue;
          std::vector<std::size_t> cov;
          for (auto u : parent.covered) {
            if (engine_.covers(*compiled, engine_.uniques()[u])) cov.push_back(u);
          }
          child.covered = std::move(cov);
          score(child, pos, total_pos);
          if (child.tp == 0) continue;
          next.push_back(std::move(child));
        }
      }
      std::sort(next.begin(), next.end(), better);
      if (next.size() > static_cast<std::size_t>(config_.beam_width)) next.resize(static_cast<std::size_t>(config_.beam_width));
      if (!next.empty() && (!best || better(next.front(), *best))) best = next.front();
      beam = std::move(next);
    }
    return best;
  }

 private:
  void score(Candidate& c, const std::vector<std::size_t>& pos, std::size_t total_pos) const {
    c.tp = 0;
    c.fp = 0;
    for (auto u : c.covered) {
      c.tp += pos[u];
      c.fp += engine_.uniques()[u].neg;
    }
    c.fn = total_pos - c.tp;
  }

  std::vector<Candidate> refinements(const Candidate& parent) const {
    std::vector<Candidate> out;
    for (Predicate p : vocab_) {
      const auto sig = signature(p);
      // options per position: existing variables, one fresh variable, constants
      std::vector<std::vector<std::pair<Term, int>>> options;  // (term, 0 existing | 1 fresh | 2 constant)
      for (ArgType t : sig) {
        std::vector<std::pair<Term, int>> opts;
        if (t == ArgType::company) {
          for (const auto& h : head_vars_) opts.emplace_back(Term::variable(h), 0);
        }
        for (const auto& [name, type] : parent.vars) {
          if (type == t) opts.emplace_back(Term::variable(name), 0);
        }
        opts.emplace_back(Term::variable(""), 1);
        if (auto it = constants_.find(t); it != constants_.end()) {
          for (const auto& c : it->second) opts.emplace_back(Term::constant(c), 2);
        }
        options.push_back(std::move(opts));
      }
      std::vector<std::size_t> pick(sig.size(), 0);
      while (true) {
        bool linked = false;
        for (std::size_t i = 0; i < sig.size(); ++i) linked |= options[i][pick[i]].second == 0;
        if (linked) {
          Candidate c;
          c.body = parent.body;
          c.vars = parent.vars;
          Literal l;
          l.kind = Literal::Kind::positive;
          l.atom.predicate = std::string(predicate_name(p));
          for (std::size_t i = 0; i < sig.size(); ++i) {
            Term term = options[i][pick[i]].first;
            if (options[i][pick[i]].second == 1) {
              term.name = "V" + std::to_string(c.vars.size() + 1);
              c.vars.emplace_back(term.name, sig[i]);
            }
            l.atom.args.push_back(term);
          }
          if (std::find(parent.body.begin(), parent.body.end(), l) == parent.body.end()) {
            c.body.push_back(std::move(l));
            out.push_back(std::move(c));
          }
        }
        std::size_t k = 0;
        while (k < sig.size() && ++pick[k] == options[k].size()) pick[k++] = 0;
        if (k == sig.size()) break;
      }
    }
    return out;
  }

  Engine& engine_;
  const InductionConfig& config_;
  const std::vector<std::string>& head_vars_;
  std::map<ArgType, std::vector<std::string>> constants_;
  std::vector<Predicate> vocab_;
};

double f1_of(std::size_t tp, std::size_t fp, std::size_t fn) {
  const auto den = 2 * tp + fp + fn;
  return den == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(den);
}

}  // namespace

bool covers(const Condition& body, const std::vector<std::string>& head_vars, const ExampleBackground& example) {
  Background single;
  single.head_vars = head_vars;
  single.examples.push_back(example);
  Engine engine(single, head_vars);
  engine.add(example, true);
  auto compiled = engine.compile(body);
  return compiled && engine.covers(*compiled, engine.uniques().front());
}

bool covers(const Hypothesis& h, const ExampleBackground& example) {
  return std::any_of(h.clauses.begin(), h.clauses.end(),
                     [&](const Clause& c) { return covers(c.body, h.head_vars, example); });
}

std::vector<int> covered_ids(const Hypothesis& h, const Background& background) {
  Engine engine(background, h.head_vars);
  std::vector<std::size_t> unique_of;
  for (const auto& ex : background.examples) unique_of.push_back(engine.add(ex, true));
  std::vector<bool> hit(engine.uniques().size(), false);
  for (const auto& c : h.clauses) {
    auto compiled = engine.compile(c.body);
    if (!compiled) continue;
    for (std::size_t u = 0; u < hit.size(); ++u) {
      if (!hit[u] && engine.covers(*compiled, engine.uniques()[u])) hit[u] = true;
    }
  }
  std::vector<int> out;
  for (std::size_t i = 0; i < background.examples.size(); ++i) {
    if (hit[unique_of[i]]) out.push_back(background.examples[i].trajectory_id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Metrics evaluate(const Hypothesis& h, const LabeledExamples& examples, const Background& background) {
  const auto cov = covered_ids(h, background);
  auto is_covered = [&](int id) { return std::binary_search(cov.begin(), cov.end(), id); };
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (int id : examples.positives) {
    if (!background.find(id)) continue;
    (is_covered(id) ? tp : fn) += 1;
  }
  for (int id : examples.negatives) {
    if (!background.find(id)) continue;
    (is_covered(id) ? fp : tn) += 1;
  }
  return metrics_from(tp, fp, tn, fn);
}

Hypothesis induce(const LabeledExamples& examples, const Background& background, const InductionConfig& config) {
  if (auto bad = config.validate()) throw std::invalid_argument(*bad);
  Hypothesis h;
  h.head_vars = background.head_vars;
  if (examples.positives.empty()) return h;

  Engine engine(background, h.head_vars);
  std::vector<std::size_t> pos_weight;
  std::vector<std::size_t> neg_weight;
  const std::set<int> positives(examples.positives.begin(), examples.positives.end());
  const std::set<int> negatives(examples.negatives.begin(), examples.negatives.end());
  std::map<ArgType, std::set<std::string>> constant_sets;
  for (const auto& ex : background.examples) {
    const bool pos = positives.count(ex.trajectory_id) > 0;
    if (!pos && !negatives.count(ex.trajectory_id)) continue;
    engine.add(ex, pos);
    for (const auto& f : ex.facts) {
      const auto sig = signature(*predicate_from_name(f.predicate));
      for (std::size_t i = 0; i < sig.size() && i < f.args.size(); ++i) {
        if (sig[i] != ArgType::company) constant_sets[sig[i]].insert(f.args[i]);
      }
    }
  }
  std::map<ArgType, std::vector<std::string>> constants;
  for (auto& [t, s] : constant_sets) constants[t] = {s.begin(), s.end()};

  const auto& uniques = engine.uniques();
  std::vector<std::size_t> remaining(uniques.size());
  std::size_t total_pos = 0;
  std::size_t total_neg = 0;
  for (std::size_t u = 0; u < uniques.size(); ++u) {
    remaining[u] = uniques[u].pos;
    total_pos += uniques[u].pos;
    total_neg += uniques[u].neg;
  }

  Learner learner(engine, config, h.head_vars, constants);
  std::vector<bool> hit(uniques.size(), false);
  double current_f1 = 0.0;
  for (int round = 0; round < config.max_clauses; ++round) {
    if (std::all_of(remaining.begin(), remaining.end(), [](std::size_t w) { return w == 0; })) break;
    auto best = learner.best_clause(remaining);
    if (!best) break;

    std::vector<bool> next_hit = hit;
    for (auto u : best->covered) next_hit[u] = true;
    std::size_t tp = 0, fp = 0;
    for (std::size_t u = 0; u < uniques.size(); ++u) {
      if (next_hit[u]) {
        tp += uniques[u].pos;
        fp += uniques[u].neg;
      }
    }
    const double f1 = f1_of(tp, fp, total_pos - tp);
    if (!(f1 > current_f1)) break;
    current_f1 = f1;
    hit = std::move(next_hit);
    for (auto u : best->covered) remaining[u] = 0;

    // metrics of the clause alone over all labeled examples
    std::size_t ctp = 0, cfp = 0;
    for (auto u : best->covered) {
      ctp += uniques[u].pos;
      cfp += uniques[u].neg;
    }
    h.clauses.push_back({best->body, metrics_from(ctp, cfp, total_neg - cfp, total_pos - ctp)});
  }
  return h;
}

std::vector<SchemeEdge> scheme_graph(const Hypothesis& h, std::size_t top_k) {
  std::map<std::tuple<std::string, std::string, std::string>, double> edges;
  for (const auto& c : h.clauses) {
    const double w = c.metrics.f1.value_or(0.0);
    for (const auto& l : c.body) {
      if (l.kind != Literal::Kind::positive) continue;
      const auto& a = l.atom.args;
      std::optional<std::tuple<std::string, std::string, std::string>> key;
      if (l.atom.predicate == "rentsIP" && a.size() == 3) key = {a[0].name, a[1].name, "rents"};
      if (l.atom.predicate == "managed" && a.size() == 2) key = {a[0].name, a[1].name, "managed"};
      if (l.atom.predicate == "ownsIP" && a.size() == 2) key = {a[0].name, a[1].name, "owns"};
      if (!key) continue;
      auto [it, inserted] = edges.emplace(*key, w);
      if (!inserted) it->second = std::max(it->second, w);
    }
  }
  std::vector<SchemeEdge> out;
  for (const auto& [k, w] : edges) out.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), w});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.weight > b.weight; });
  if (out.size() > top_k) out.resize(top_k);
  return out;
}

std::string render_clause(const std::vector<std::string>& head_vars, const Condition& body) {
  std::string out = "taxScheme(";
  for (std::size_t i = 0; i < head_vars.size(); ++i) {
    if (i) out += ", ";
    out += head_vars[i];
  }
  out += ")";
  if (!body.empty()) out += " :- " + rulelang::render_condition(body);
  return out + ".";
}

std::string render_hypothesis(const Hypothesis& h) {
  std::string out;
  for (const auto& c : h.clauses) {
    out += "# f1 " + (c.metrics.f1 ? rulelang::format_number(*c.metrics.f1) : std::string("undefined")) + "\n";
    out += render_clause(h.head_vars, c.body) + "\n";
  }
  return out;
}

std::string scheme_dot(const std::vector<SchemeEdge>& edges) {
  std::string out = "digraph scheme {\n";
  for (const auto& e : edges) {
    const std::string w = rulelang::format_number(e.weight);
    out += "  \"" + e.from + "\" -> \"" + e.to + "\" [label=\"" + e.label + " " + w + "\", weight=" + w + "];\n";
  }
  return out + "}\n";
}

std::string scheme_csv(const std::vector<SchemeEdge>& edges) {
  std::string out = "from,to,label,weight\n";
  for (const auto& e : edges) out += e.from + "," + e.to + "," + e.label + "," + rulelang::format_number(e.weight) + "\n";
  return out;
}

}  // namespace loophole::induction
