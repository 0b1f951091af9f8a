#include "loophole/kernel.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "loophole/hashing.hpp"

namespace loophole::kernel {

using rulelang::Literal;

// ---------------------------------------------------------------------------
// symbols and facts

SymbolTable::SymbolTable(std::vector<std::string> names) : names_(std::move(names)) {
  std::sort(names_.begin(), names_.end());
  names_.erase(std::unique(names_.begin(), names_.end()), names_.end());
  if (names_.size() >= kMarket) throw CompileError("too many entities");
}

std::optional<EntityId> SymbolTable::find(std::string_view name) const {
  auto it = std::lower_bound(names_.begin(), names_.end(), name);
  if (it == names_.end() || *it != name) return std::nullopt;
  return static_cast<EntityId>(it - names_.begin());
}

EntityId SymbolTable::id(std::string_view name) const {
  auto v = find(name);
  if (!v) throw CompileError("unknown entity '" + std::string(name) + "'");
  return *v;
}

const std::string& SymbolTable::name(EntityId id) const {
  static const std::string market = "market";
  if (id == kMarket) return market;
  return names_.at(id);
}

Fact make_fact(Predicate p, std::initializer_list<EntityId> args) {
  Fact f;
  f.predicate = p;
  f.arity = static_cast<std::uint8_t>(args.size());
  std::size_t i = 0;
  for (EntityId a : args) f.args[i++] = a;
  return f;
}

std::string to_string(const Fact& f, const SymbolTable& symbols) {
  return rulelang::render_ground(to_ground(f, symbols));
}

rulelang::GroundAtom to_ground(const Fact& f, const SymbolTable& symbols) {
  rulelang::GroundAtom g{std::string(predicate_name(f.predicate)), {}};
  for (std::size_t i = 0; i < f.arity; ++i) g.args.push_back(symbols.name(f.args[i]));
  return g;
}

State::State(std::vector<Fact> facts, int step_count, bool transfer_used)
    : facts_(std::move(facts)), step_count_(step_count), transfer_used_(transfer_used) {
  std::sort(facts_.begin(), facts_.end());
  facts_.erase(std::unique(facts_.begin(), facts_.end()), facts_.end());
  std::uint64_t h = kFnvOffset ^ (transfer_used_ ? 0x5bd1e995ULL : 0ULL);
  for (const Fact& f : facts_) {
    std::uint64_t word = static_cast<std::uint64_t>(f.predicate) | (std::uint64_t{f.args[0]} << 8) |
                         (std::uint64_t{f.args[1]} << 24) | (std::uint64_t{f.args[2]} << 40);
    h = mix64(h ^ word);
  }
  hash_ = h;
}

bool State::contains(const Fact& f) const { return std::binary_search(facts_.begin(), facts_.end(), f); }

FactBase::FactBase(std::vector<Fact> facts) : facts_(std::move(facts)) {
  std::sort(facts_.begin(), facts_.end());
  facts_.erase(std::unique(facts_.begin(), facts_.end()), facts_.end());
  std::size_t j = 0;
  for (std::size_t p = 0; p <= kPredicateCount; ++p) {
    while (j < facts_.size() && static_cast<std::size_t>(facts_[j].predicate) < p) ++j;
    offsets_[p] = static_cast<std::uint32_t>(j);
  }
}

bool FactBase::contains(const Fact& f) const { return std::binary_search(facts_.begin(), facts_.end(), f); }

std::optional<std::string> check_invariants(const State& s, const SymbolTable& symbols) {
  auto n = [&](EntityId id) { return symbols.name(id); };
  std::map<EntityId, EntityId> owner;
  std::map<EntityId, int> based_count;
  std::map<EntityId, int> managed_count;
  std::map<EntityId, EntityId> parent;
  std::map<EntityId, std::vector<std::pair<EntityId, EntityId>>> licences;  // ip -> (owner, renter)
  std::set<EntityId> ips_seen;

  for (const Fact& f : s.facts()) {
    if (!is_state_predicate(f.predicate)) return "non-state predicate '" + std::string(predicate_name(f.predicate)) + "'";
    switch (f.predicate) {
      case Predicate::ownsIP:
        if (!owner.emplace(f.args[1], f.args[0]).second) return "ip '" + n(f.args[1]) + "' has two owners";
        ips_seen.insert(f.args[1]);
        break;
      case Predicate::rentsIP:
        licences[f.args[2]].emplace_back(f.args[0], f.args[1]);
        ips_seen.insert(f.args[2]);
        break;
      case Predicate::based:
        if (++based_count[f.args[0]] > 1) return "company '" + n(f.args[0]) + "' is based in two countries";
        break;
      case Predicate::managed:
        if (++managed_count[f.args[0]] > 1) return "company '" + n(f.args[0]) + "' is managed from two countries";
        break;
      case Predicate::isChildOf:
        if (f.args[0] == f.args[1]) return "company '" + n(f.args[0]) + "' is its own parent";
        if (!parent.emplace(f.args[0], f.args[1]).second) return "company '" + n(f.args[0]) + "' has two parents";
        break;
      default:
        break;
    }
  }
  for (EntityId ip : ips_seen) {
    if (!owner.count(ip)) return "ip '" + n(ip) + "' has no owner";
  }
  for (const auto& [child, _] : parent) {
    std::set<EntityId> seen{child};
    for (auto it = parent.find(child); it != parent.end(); it = parent.find(it->second)) {
      if (!seen.insert(it->second).second) return "isChildOf cycle through '" + n(child) + "'";
    }
  }
  for (const auto& [ip, edges] : licences) {
    std::map<EntityId, std::vector<EntityId>> out;
    for (const auto& [o, r] : edges) out[o].push_back(r);
    // 0 unvisited, 1 on stack, 2 done
    std::map<EntityId, int> colour;
    bool cyclic = false;
    auto visit = [&](auto&& self, EntityId v) -> void {
      colour[v] = 1;
      for (EntityId w : out[v]) {
        if (colour[w] == 1) cyclic = true;
        else if (colour[w] == 0) self(self, w);
      }
      colour[v] = 2;
    };
    for (const auto& [o, _] : out) {
      if (colour[o] == 0) visit(visit, o);
    }
    if (cyclic) return "rentsIP cycle for ip '" + n(ip) + "'";
  }
  return std::nullopt;
}

std::optional<EntityId> residency(const State& s, EntityId company) {
  std::optional<EntityId> based;
  for (const Fact& f : s.facts()) {
    if (f.args[0] != company) continue;
    if (f.predicate == Predicate::managed) return f.args[1];
    if (f.predicate == Predicate::based) based = f.args[1];
  }
  return based;
}

std::vector<EntityId> companies(const State& s) {
  std::vector<EntityId> out;
  for (const Fact& f : s.facts()) {
    if (f.predicate == Predicate::exists) out.push_back(f.args[0]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// compilation

std::optional<std::size_t> CompiledCondition::var_index(std::string_view name) const {
  for (std::size_t i = 0; i < var_names.size(); ++i) {
    if (var_names[i] == name) return i;
  }
  return std::nullopt;
}

namespace {

class ConditionCompiler {
 public:
  ConditionCompiler(const SymbolTable& symbols, std::span<const std::string> leading) : symbols_(symbols) {
    for (const auto& v : leading) var(v);
  }

  Term term(const rulelang::Term& t) {
    switch (t.kind) {
      case rulelang::Term::Kind::anonymous: return {Term::Kind::anonymous, 0};
      case rulelang::Term::Kind::variable: return {Term::Kind::variable, var(t.name)};
      case rulelang::Term::Kind::constant: {
        auto id = symbols_.find(t.name);
        if (!id) throw CompileError("unknown constant '" + t.name + "'");
        return {Term::Kind::constant, *id};
      }
    }
    return {};
  }

  CompiledLiteral literal(const Literal& l) {
    CompiledLiteral out;
    out.kind = l.kind;
    if (l.kind == Literal::Kind::positive || l.kind == Literal::Kind::negative) {
      auto p = predicate_from_name(l.atom.predicate);
      if (!p) throw CompileError("unknown predicate '" + l.atom.predicate + "'");
      if (l.atom.args.size() != predicate_arity(*p))
        throw CompileError("wrong arity for '" + l.atom.predicate + "'");
      out.predicate = *p;
      out.arity = predicate_arity(*p);
      for (std::size_t i = 0; i < out.arity; ++i) out.args[i] = term(l.atom.args[i]);
    } else {
      out.lhs = term(l.lhs);
      out.rhs = term(l.rhs);
    }
    return out;
  }

  std::vector<std::string> take_vars() { return std::move(vars_); }

 private:
  EntityId var(const std::string& name) {
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i] == name) return static_cast<EntityId>(i);
    }
    vars_.push_back(name);
    return static_cast<EntityId>(vars_.size() - 1);
  }

  const SymbolTable& symbols_;
  std::vector<std::string> vars_;
};

void collect_constants(const rulelang::Condition& c, std::vector<std::string>& names) {
  for (const auto& l : c) {
    for (const auto& t : l.atom.args) {
      if (t.kind == rulelang::Term::Kind::constant) names.push_back(t.name);
    }
    for (const auto* t : {&l.lhs, &l.rhs}) {
      if (t->kind == rulelang::Term::Kind::constant && !t->name.empty()) names.push_back(t->name);
    }
  }
}

}  // namespace

CompiledCondition compile_condition(const rulelang::Condition& c, const SymbolTable& symbols,
                                    std::span<const std::string> leading_vars) {
  ConditionCompiler cc(symbols, leading_vars);
  CompiledCondition out;
  for (const auto& l : c) out.literals.push_back(cc.literal(l));
  out.var_names = cc.take_vars();
  if (out.literals.size() > 64) throw CompileError("condition has more than 64 literals");
  return out;
}

Domain compile(const rulelang::RuleSetDoc& rules, const rulelang::StateSpec& state,
               const economy::ScenarioConfig& config) {
  std::vector<std::string> names;
  for (const auto& c : state.declared_companies) names.push_back(c);
  for (const auto& i : state.declared_ips) names.push_back(i);
  for (const auto& f : state.facts) {
    for (const auto& a : f.args) names.push_back(a);
  }
  for (const auto& c : config.company_pool) names.push_back(c);
  for (const auto& [c, _] : config.revenue_table) names.push_back(c);
  for (const auto& h : config.tax_havens) names.push_back(h);
  for (const auto& [c, _] : rules.rate_table) names.push_back(c);
  for (const auto& r : rules.regions) {
    names.push_back(r.name);
    for (const auto& m : r.members) names.push_back(m);
  }
  for (const auto& r : rules.action_rules) {
    collect_constants(r.pre, names);
    collect_constants(r.effects, names);
  }
  for (const auto& r : rules.reduction_rules) collect_constants(r.when, names);

  Domain d;
  d.symbols = SymbolTable(std::move(names));
  d.config = config;
  const std::size_t n = d.symbols.size();

  for (const auto& r : rules.action_rules) {
    auto name = action_name_from(r.name);
    if (!name) throw CompileError("unknown action '" + r.name + "'");
    if (r.params.size() > kMaxParams) throw CompileError("action '" + r.name + "' has too many parameters");
    rulelang::Condition combined = r.pre;
    combined.insert(combined.end(), r.effects.begin(), r.effects.end());
    CompiledCondition all = compile_condition(combined, d.symbols, r.params);
    CompiledActionRule cr;
    cr.name = *name;
    cr.legal_ref = r.legal_ref;
    cr.params = r.params;
    cr.pre.var_names = all.var_names;
    cr.pre.literals.assign(all.literals.begin(), all.literals.begin() + static_cast<std::ptrdiff_t>(r.pre.size()));
    for (std::size_t i = r.pre.size(); i < all.literals.size(); ++i) {
      const auto& l = all.literals[i];
      for (std::size_t k = 0; k < l.arity; ++k) {
        if (l.args[k].kind == Term::Kind::anonymous) throw CompileError("'_' in effect of '" + r.name + "'");
      }
      (l.kind == Literal::Kind::positive ? cr.add : cr.del).push_back(l);
    }
    d.actions.push_back(std::move(cr));
  }
  std::stable_sort(d.actions.begin(), d.actions.end(), [](const auto& a, const auto& b) {
    return std::tie(a.name, a.legal_ref) < std::tie(b.name, b.legal_ref);
  });

  static const std::string kSelf = "Self";
  for (const auto& r : rules.reduction_rules) {
    CompiledReduction cr;
    cr.legal_ref = r.legal_ref;
    cr.kind = r.kind;
    cr.when = compile_condition(r.when, d.symbols, std::span<const std::string>(&kSelf, 1));
    cr.new_base = r.new_base;
    cr.new_rate = r.new_rate;
    d.reductions.push_back(std::move(cr));
  }
  std::stable_sort(d.reductions.begin(), d.reductions.end(), [](const auto& a, const auto& b) {
    return std::tie(a.legal_ref, a.kind) < std::tie(b.legal_ref, b.kind);
  });

  d.rate.assign(n, -1.0);
  for (const auto& [c, r] : rules.rate_table) d.rate[d.symbols.id(c)] = r;
  for (const auto& r : rules.regions) {
    for (const auto& m : r.members) d.regions.emplace_back(d.symbols.id(m), d.symbols.id(r.name));
  }

  if (!(config.royalty_rate >= 0.0 && config.royalty_rate <= 1.0))
    throw CompileError("royalty rate outside [0,1]");
  d.revenue.assign(n, 0.0);
  d.haven.assign(n, false);
  for (const auto& [c, rev] : config.revenue_table) {
    if (!(rev >= 0.0)) throw CompileError("negative revenue for '" + c + "'");
    const EntityId id = d.symbols.id(c);
    if (d.rate[id] < 0.0) throw CompileError("no tax rate for scenario country '" + c + "'");
    d.countries.push_back(id);
    d.revenue[id] = rev;
  }
  for (const auto& h : config.tax_havens) {
    const EntityId id = d.symbols.id(h);
    if (std::find(d.countries.begin(), d.countries.end(), id) == d.countries.end())
      throw CompileError("haven '" + h + "' is not a scenario country");
    d.haven[id] = true;
  }
  for (const auto& c : config.company_pool) {
    if (std::find(state.declared_companies.begin(), state.declared_companies.end(), c) !=
        state.declared_companies.end())
      throw CompileError("pool id '" + c + "' is already a company");
    d.pool.push_back(d.symbols.id(c));
  }

  std::vector<Fact> facts;
  for (const auto& c : state.declared_companies) facts.push_back(make_fact(Predicate::exists, {d.symbols.id(c)}));
  for (const auto& g : state.facts) {
    auto p = predicate_from_name(g.predicate);
    if (!p || !is_state_predicate(*p) || g.args.size() != predicate_arity(*p))
      throw CompileError("invalid fact '" + rulelang::render_ground(g) + "'");
    Fact f;
    f.predicate = *p;
    f.arity = predicate_arity(*p);
    for (std::size_t i = 0; i < f.arity; ++i) f.args[i] = d.symbols.id(g.args[i]);
    facts.push_back(f);
  }
  d.initial = State(std::move(facts));
  if (auto bad = check_invariants(d.initial, d.symbols)) throw CompileError("initial state: " + *bad);
  return d;
}

Domain compile(const rulelang::RuleSetDoc& rules, const rulelang::StateSpec& state) {
  return compile(rules, state, economy::scenario_from(state));
}

// ---------------------------------------------------------------------------
// transitions

FactBase action_facts(const State& s, const Domain& d) {
  std::vector<Fact> facts = s.facts();
  facts.reserve(facts.size() * 2 + d.countries.size() * 2 + d.regions.size() + 1);
  for (const Fact& f : s.facts()) {
    if (f.predicate == Predicate::ownsIP) facts.push_back(make_fact(Predicate::access, {f.args[0], f.args[1]}));
    if (f.predicate == Predicate::rentsIP) facts.push_back(make_fact(Predicate::access, {f.args[1], f.args[2]}));
  }
  for (EntityId c : d.pool) {
    if (!s.contains(make_fact(Predicate::exists, {c}))) {
      facts.push_back(make_fact(Predicate::fresh, {c}));
      break;
    }
  }
  for (EntityId c : d.countries) {
    facts.push_back(make_fact(Predicate::country, {c}));
    if (d.haven[c]) facts.push_back(make_fact(Predicate::haven, {c}));
  }
  for (const auto& [c, r] : d.regions) facts.push_back(make_fact(Predicate::inRegion, {c, r}));
  return FactBase(std::move(facts));
}

std::vector<GroundedAction> applicable_actions(const State& s, const FactBase& db, const Domain& d) {
  std::vector<GroundedAction> out;
  for (std::size_t r = 0; r < d.actions.size(); ++r) {
    const auto& rule = d.actions[r];
    if (rule.name == ActionName::transferIP && s.transfer_used()) continue;
    const auto bindings = match(db, rule.pre);
    const std::size_t begin = out.size();
    for (const auto& b : bindings) {
      GroundedAction a;
      a.rule = static_cast<std::uint16_t>(r);
      a.arity = static_cast<std::uint8_t>(rule.params.size());
      for (std::size_t i = 0; i < a.arity; ++i) a.args[i] = b[i];
      out.push_back(a);
    }
    // bindings are sorted by variable index and params come first
    out.erase(std::unique(out.begin() + static_cast<std::ptrdiff_t>(begin), out.end()), out.end());
  }
  return out;
}

std::vector<GroundedAction> applicable_actions(const State& s, const Domain& d) {
  return applicable_actions(s, action_facts(s, d), d);
}

State apply_action(const State& s, const GroundedAction& a, const Domain& d) {
  if (a.rule >= d.actions.size()) throw ContractViolation("unknown action rule");
  const auto& rule = d.actions[a.rule];
  if (a.arity != rule.params.size()) throw ContractViolation("action arity mismatch");
  if (rule.name == ActionName::transferIP && s.transfer_used())
    throw ContractViolation("IP may be transferred only once: " + describe(a, d));
  Binding seed(rule.pre.var_names.size(), kUnbound);
  for (std::size_t i = 0; i < a.arity; ++i) seed[i] = a.args[i];
  const auto binding = match_any(action_facts(s, d), rule.pre, seed);
  if (!binding) throw ContractViolation("action not applicable: " + describe(a, d));

  auto ground = [&](const CompiledLiteral& l) {
    Fact f;
    f.predicate = l.predicate;
    f.arity = l.arity;
    for (std::size_t i = 0; i < l.arity; ++i) {
      const Term& t = l.args[i];
      f.args[i] = t.kind == Term::Kind::constant ? t.value : (*binding)[t.value];
    }
    return f;
  };

  std::vector<Fact> facts = s.facts();
  for (const auto& l : rule.del) {
    const Fact f = ground(l);
    facts.erase(std::remove(facts.begin(), facts.end(), f), facts.end());
  }
  for (const auto& l : rule.add) facts.push_back(ground(l));
  State next(std::move(facts), s.step_count() + 1, s.transfer_used() || rule.name == ActionName::transferIP);
  if (auto bad = check_invariants(next, d.symbols)) {
    throw ContractViolation("rule " + std::string(action_name(rule.name)) + " \"" + rule.legal_ref +
                            "\" breaks a state invariant: " + *bad);
  }
  return next;
}

std::vector<std::string> action_args(const GroundedAction& a, const Domain& d) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < a.arity; ++i) out.push_back(d.symbols.name(a.args[i]));
  return out;
}

std::string describe(const GroundedAction& a, const Domain& d) {
  const auto& rule = d.actions.at(a.rule);
  std::string out(action_name(rule.name));
  out += "(";
  const auto args = action_args(a, d);
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ", ";
    out += args[i];
  }
  return out + ") [" + rule.legal_ref + "]";
}

}  // namespace loophole::kernel
