#include <algorithm>
#include <set>

#include "loophole/rulelang.hpp"
#include "rulelang_lexer.hpp"

namespace loophole::rulelang {

using detail::Tok;
using detail::Token;

void LinearExpr::add(ExprVar v, double coeff) {
  auto it = std::lower_bound(terms.begin(), terms.end(), v,
                             [](const auto& t, ExprVar x) { return t.first < x; });
  if (it != terms.end() && it->first == v) {
    it->second += coeff;
    if (it->second == 0.0) terms.erase(it);
  } else if (coeff != 0.0) {
    terms.insert(it, {v, coeff});
  }
}

double LinearExpr::evaluate(const std::array<double, kExprVarCount>& values) const {
  double acc = constant;
  for (const auto& [v, c] : terms) acc += c * values[static_cast<std::size_t>(v)];
  return acc;
}

std::string rule_id(const ActionRuleDoc& r) { return "action:" + r.name + "@" + r.legal_ref; }

std::string rule_id(const ReductionRuleDoc& r) {
  return "reduction:" + std::string(reduction_kind_name(r.kind)) + "@" + r.legal_ref;
}

std::string format_diagnostic(const Diagnostic& d, std::string_view source_name) {
  std::string out;
  if (!source_name.empty()) {
    out += source_name;
    out += ':';
  }
  out += std::to_string(d.span.line) + ":" + std::to_string(d.span.column) + ": ";
  out += d.severity == Severity::error ? "error: " : "warning: ";
  out += d.message;
  return out;
}

namespace {

struct Located {
  Span span;
};

struct ParsedFile {
  std::vector<std::pair<Region, Span>> regions;
  std::vector<std::tuple<std::string, double, Span>> rates;
  std::vector<std::pair<ActionRuleDoc, Span>> actions;
  std::vector<std::pair<ReductionRuleDoc, Span>> reductions;
  std::vector<std::pair<std::string, Span>> companies;
  std::vector<std::pair<std::string, Span>> ips;
  std::vector<std::pair<GroundAtom, Span>> facts;
  ScenarioDecl scenario;
  bool has_scenario = false;
  std::vector<std::pair<std::string, Span>> scenario_spans;  // keyword, position
  std::vector<Span> rule_statements;
  std::vector<Span> state_statements;
  std::vector<Diagnostic> diagnostics;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : toks_(detail::tokenize(src)) {}

  ParsedFile parse_file() {
    while (peek().kind != Tok::end) {
      const std::size_t before = pos_;
      if (!statement()) recover(before);
    }
    return std::move(out_);
  }

  std::optional<Condition> parse_bare_condition() {
    Condition c;
    if (peek().kind == Tok::end) return c;
    if (!condition(c, {Tok::end})) return std::nullopt;
    if (!expect(Tok::end, "end of condition")) return std::nullopt;
    return c;
  }

  std::vector<Diagnostic>& diagnostics() { return out_.diagnostics; }

 private:
  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool accept(Tok k) {
    if (peek().kind != k) return false;
    next();
    return true;
  }

  void error(const Span& span, std::string msg) {
    out_.diagnostics.push_back({Severity::error, std::move(msg), span});
  }

  bool expect(Tok k, std::string_view what) {
    if (peek().kind == k) {
      next();
      return true;
    }
    const Token& t = peek();
    std::string msg = "expected " + std::string(detail::token_name(k));
    if (!what.empty()) msg += " in " + std::string(what);
    msg += ", found ";
    msg += t.kind == Tok::end ? std::string("end of input") : "'" + t.text + "'";
    if (t.kind == Tok::invalid) msg = "invalid token '" + t.text + "'";
    error(t.span, msg);
    return false;
  }

  bool expect_keyword(std::string_view kw) {
    if (peek().kind == Tok::ident && peek().text == kw) {
      next();
      return true;
    }
    error(peek().span, "expected '" + std::string(kw) + "', found '" + peek().text + "'");
    return false;
  }

  // Skip the remainder of a broken statement: up to and including the next
  // top-level '.', or the closing '}' of a block.
  void recover(std::size_t start) {
    int depth = 0;
    bool in_block = false;
    for (std::size_t k = start; k < pos_; ++k) {
      if (toks_[k].kind == Tok::lbrace) {
        ++depth;
        in_block = true;
      } else if (toks_[k].kind == Tok::rbrace) {
        --depth;
      }
    }
    if (pos_ == start && peek().kind != Tok::end) next();
    while (peek().kind != Tok::end) {
      const Tok k = peek().kind;
      if (k == Tok::lbrace) {
        ++depth;
        in_block = true;
      } else if (k == Tok::rbrace) {
        --depth;
        if (depth <= 0 && in_block) {
          next();
          return;
        }
      } else if (k == Tok::dot && depth <= 0 && !in_block) {
        next();
        return;
      }
      next();
    }
  }

  bool number(double& v) {
    bool negative = accept(Tok::minus);
    if (peek().kind != Tok::number) {
      error(peek().span, "expected number, found '" + peek().text + "'");
      return false;
    }
    v = next().number;
    if (negative) v = -v;
    return true;
  }

  bool constant_name(std::string& out, std::string_view what) {
    if (peek().kind != Tok::ident) {
      error(peek().span, "expected " + std::string(what) + ", found '" + peek().text + "'");
      return false;
    }
    out = next().text;
    return true;
  }

  bool statement() {
    const Token& head = peek();
    if (head.kind != Tok::ident) {
      if (head.kind == Tok::invalid) {
        error(head.span, "invalid token '" + head.text + "'");
      } else {
        error(head.span, "expected a statement, found '" + head.text + "'");
      }
      return false;
    }
    const std::string kw = head.text;
    const Span span = head.span;
    if (kw == "company" || kw == "ip") return declaration(kw, span);
    if (kw == "fact") return fact_statement(span);
    if (kw == "rate") return rate_statement(span);
    if (kw == "region") return region_statement(span);
    if (kw == "action") return action_statement(span);
    if (kw == "reduction") return reduction_statement(span);
    if (kw == "country" || kw == "haven" || kw == "pool" || kw == "royalty_rate" || kw == "transfer_price" ||
        kw == "cost")
      return scenario_statement(kw, span);
    error(span, "unknown statement '" + kw + "'");
    return false;
  }

  bool declaration(const std::string& kw, Span span) {
    next();
    std::string name;
    if (!constant_name(name, kw + " id")) return false;
    if (!expect(Tok::dot, kw + " declaration")) return false;
    (kw == "company" ? out_.companies : out_.ips).emplace_back(name, span);
    out_.state_statements.push_back(span);
    return true;
  }

  bool fact_statement(Span span) {
    next();
    Atom atom;
    if (!this->atom(atom)) return false;
    if (!expect(Tok::dot, "fact")) return false;
    GroundAtom g{atom.predicate, {}};
    for (const auto& t : atom.args) {
      if (t.kind != Term::Kind::constant) {
        error(span, "fact arguments must be constants, found '" + t.name + "'");
        return false;
      }
      g.args.push_back(t.name);
    }
    out_.facts.emplace_back(std::move(g), span);
    out_.state_statements.push_back(span);
    return true;
  }

  bool rate_statement(Span span) {
    next();
    std::string country;
    double v = 0;
    if (!constant_name(country, "country")) return false;
    if (!number(v)) return false;
    if (!expect(Tok::dot, "rate")) return false;
    out_.rates.emplace_back(country, v, span);
    out_.rule_statements.push_back(span);
    return true;
  }

  bool region_statement(Span span) {
    next();
    Region r;
    if (!constant_name(r.name, "region name")) return false;
    if (!expect(Tok::colon, "region")) return false;
    do {
      std::string m;
      if (!constant_name(m, "country")) return false;
      r.members.push_back(m);
    } while (accept(Tok::comma));
    if (!expect(Tok::dot, "region")) return false;
    out_.regions.emplace_back(std::move(r), span);
    out_.rule_statements.push_back(span);
    return true;
  }

  bool scenario_statement(const std::string& kw, Span span) {
    next();
    auto& sc = out_.scenario;
    if (kw == "country") {
      std::string c;
      double rev = 0;
      if (!constant_name(c, "country")) return false;
      if (!expect_keyword("revenue")) return false;
      if (!number(rev)) return false;
      sc.countries.emplace_back(c, rev);
    } else if (kw == "haven") {
      std::string c;
      if (!constant_name(c, "country")) return false;
      sc.havens.push_back(c);
    } else if (kw == "pool") {
      do {
        std::string c;
        if (!constant_name(c, "company id")) return false;
        sc.pool.push_back(c);
      } while (accept(Tok::comma));
    } else {
      double v = 0;
      if (!number(v)) return false;
      auto& slot = kw == "royalty_rate" ? sc.royalty_rate : kw == "transfer_price" ? sc.transfer_price : sc.cost;
      if (slot) {
        error(span, "duplicate '" + kw + "' statement");
        return false;
      }
      slot = v;
    }
    if (!expect(Tok::dot, kw)) return false;
    out_.has_scenario = true;
    out_.scenario_spans.emplace_back(kw, span);
    out_.state_statements.push_back(span);
    return true;
  }

  bool term(Term& t) {
    const Token& tok = peek();
    switch (tok.kind) {
      case Tok::variable: t = Term::variable(next().text); return true;
      case Tok::ident: t = Term::constant(next().text); return true;
      case Tok::anonymous: next(); t = Term::anonymous(); return true;
      default:
        error(tok.span, "expected a term, found '" + tok.text + "'");
        return false;
    }
  }

  bool atom(Atom& a) {
    if (peek().kind != Tok::ident) {
      error(peek().span, "expected a predicate, found '" + peek().text + "'");
      return false;
    }
    a.predicate = next().text;
    a.args.clear();
    if (!expect(Tok::lparen, "atom '" + a.predicate + "'")) return false;
    if (peek().kind != Tok::rparen) {
      do {
        Term t;
        if (!term(t)) return false;
        a.args.push_back(std::move(t));
      } while (accept(Tok::comma));
    }
    return expect(Tok::rparen, "atom '" + a.predicate + "'");
  }

  bool literal(Literal& l) {
    const Token& tok = peek();
    if (tok.kind == Tok::ident && tok.text == "not" && peek(1).kind == Tok::ident) {
      next();
      l.kind = Literal::Kind::negative;
      return atom(l.atom);
    }
    if (tok.kind == Tok::ident && peek(1).kind == Tok::lparen) {
      l.kind = Literal::Kind::positive;
      return atom(l.atom);
    }
    if (!term(l.lhs)) return false;
    if (accept(Tok::eq)) {
      l.kind = Literal::Kind::equal;
    } else if (accept(Tok::neq)) {
      l.kind = Literal::Kind::not_equal;
    } else {
      error(peek().span, "expected '=' or '!=' after term '" + l.lhs.name + "'");
      return false;
    }
    return term(l.rhs);
  }

  bool condition(Condition& c, std::initializer_list<Tok> terminators) {
    auto at_end = [&] {
      return std::find(terminators.begin(), terminators.end(), peek().kind) != terminators.end();
    };
    if (at_end()) return true;
    do {
      Literal l;
      if (!literal(l)) return false;
      c.push_back(std::move(l));
    } while (accept(Tok::comma));
    if (!at_end()) {
      error(peek().span, "expected ',' or end of condition, found '" + peek().text + "'");
      return false;
    }
    return true;
  }

  bool field(std::string_view name) {
    if (!expect_keyword(name)) return false;
    return expect(Tok::colon, std::string(name));
  }

  bool action_statement(Span span) {
    next();
    ActionRuleDoc r;
    if (!constant_name(r.name, "action name")) return false;
    if (!expect(Tok::lparen, "action parameters")) return false;
    if (peek().kind != Tok::rparen) {
      do {
        if (peek().kind != Tok::variable) {
          error(peek().span, "action parameters must be variables, found '" + peek().text + "'");
          return false;
        }
        r.params.push_back(next().text);
      } while (accept(Tok::comma));
    }
    if (!expect(Tok::rparen, "action parameters")) return false;
    if (!expect_keyword("ref")) return false;
    if (peek().kind != Tok::string) {
      error(peek().span, "expected quoted legal reference after 'ref'");
      return false;
    }
    r.legal_ref = next().text;
    if (!expect(Tok::lbrace, "action body")) return false;
    if (!field("pre")) return false;
    if (!condition(r.pre, {Tok::semicolon})) return false;
    next();
    if (!field("eff")) return false;
    if (!condition(r.effects, {Tok::semicolon})) return false;
    next();
    if (!expect(Tok::rbrace, "action body")) return false;
    out_.actions.emplace_back(std::move(r), span);
    out_.rule_statements.push_back(span);
    return true;
  }

  bool expr(LinearExpr& e) {
    e = {};
    double sign = 1.0;
    if (accept(Tok::minus)) sign = -1.0;
    else accept(Tok::plus);
    while (true) {
      double coeff = sign;
      std::optional<ExprVar> var;
      do {
        const Token& tok = peek();
        if (tok.kind == Tok::number) {
          coeff *= next().number;
        } else if (tok.kind == Tok::variable) {
          auto v = expr_var_from_name(tok.text);
          if (!v) {
            error(tok.span, "unknown quantity '" + tok.text + "' in expression");
            return false;
          }
          if (var) {
            error(tok.span, "expression is not linear: product of '" + std::string(expr_var_name(*var)) +
                                "' and '" + tok.text + "'");
            return false;
          }
          var = v;
          next();
        } else {
          error(tok.span, "expected number or quantity in expression, found '" + tok.text + "'");
          return false;
        }
      } while (accept(Tok::star));
      if (var) {
        e.add(*var, coeff);
      } else {
        e.constant += coeff;
      }
      if (accept(Tok::plus)) {
        sign = 1.0;
      } else if (accept(Tok::minus)) {
        sign = -1.0;
      } else {
        break;
      }
    }
    return true;
  }

  bool reduction_statement(Span span) {
    next();
    ReductionRuleDoc r;
    if (peek().kind != Tok::string) {
      error(peek().span, "expected quoted legal reference after 'reduction'");
      return false;
    }
    r.legal_ref = next().text;
    if (!expect_keyword("kind")) return false;
    std::string kind;
    const Span kind_span = peek().span;
    if (!constant_name(kind, "reduction kind")) return false;
    auto k = reduction_kind_from(kind);
    if (!k) {
      error(kind_span, "reduction kind must be 'deductible' or 'exemption', found '" + kind + "'");
      return false;
    }
    r.kind = *k;
    if (!expect(Tok::lbrace, "reduction body")) return false;
    if (!field("when")) return false;
    if (!condition(r.when, {Tok::semicolon})) return false;
    next();
    if (!field("new_base")) return false;
    if (!expr(r.new_base)) return false;
    if (!expect(Tok::semicolon, "new_base")) return false;
    if (!field("new_rate")) return false;
    if (!expr(r.new_rate)) return false;
    if (!expect(Tok::semicolon, "new_rate")) return false;
    if (!expect(Tok::rbrace, "reduction body")) return false;
    out_.reductions.emplace_back(std::move(r), span);
    out_.rule_statements.push_back(span);
    return true;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  ParsedFile out_;
};

// ---------------------------------------------------------------------------
// validation

class Validator {
 public:
  explicit Validator(std::vector<Diagnostic>& diags) : diags_(diags) {}

  void error(Span span, std::string msg) { diags_.push_back({Severity::error, std::move(msg), span}); }

  bool check_atom(const Atom& a, LiteralContext ctx, Span span) {
    auto p = predicate_from_name(a.predicate);
    if (!p) {
      error(span, "unknown predicate '" + a.predicate + "'");
      return false;
    }
    if (!predicate_allowed(*p, ctx)) {
      error(span, "predicate '" + a.predicate + "' is not allowed here");
      return false;
    }
    if (a.args.size() != predicate_arity(*p)) {
      error(span, "predicate '" + a.predicate + "' expects " + std::to_string(predicate_arity(*p)) +
                      " arguments, got " + std::to_string(a.args.size()));
      return false;
    }
    return true;
  }

  // Variables bound by positive literals, closed under equality binding.
  static std::set<std::string> bound_vars(const Condition& c, std::set<std::string> seed) {
    for (const auto& l : c) {
      if (l.kind != Literal::Kind::positive) continue;
      for (const auto& t : l.atom.args) {
        if (t.kind == Term::Kind::variable) seed.insert(t.name);
      }
    }
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& l : c) {
        if (l.kind != Literal::Kind::equal) continue;
        auto bound = [&](const Term& t) {
          return t.kind == Term::Kind::constant || (t.kind == Term::Kind::variable && seed.count(t.name));
        };
        if (bound(l.lhs) && l.rhs.kind == Term::Kind::variable && !seed.count(l.rhs.name)) {
          seed.insert(l.rhs.name);
          changed = true;
        }
        if (bound(l.rhs) && l.lhs.kind == Term::Kind::variable && !seed.count(l.lhs.name)) {
          seed.insert(l.lhs.name);
          changed = true;
        }
      }
    }
    return seed;
  }

  bool check_condition(const Condition& c, LiteralContext ctx, Span span, const std::set<std::string>& seed,
                       std::set<std::string>* bound_out) {
    bool ok = true;
    for (const auto& l : c) {
      if (l.kind == Literal::Kind::positive || l.kind == Literal::Kind::negative) {
        ok &= check_atom(l.atom, ctx, span);
      } else if (l.lhs.kind == Term::Kind::anonymous || l.rhs.kind == Term::Kind::anonymous) {
        error(span, "'_' cannot be compared");
        ok = false;
      }
    }
    if (c.size() > 64) {
      error(span, "condition has more than 64 literals");
      ok = false;
    }
    const auto bound = bound_vars(c, seed);
    for (const auto& l : c) {
      std::vector<const Term*> terms;
      if (l.kind == Literal::Kind::negative) {
        for (const auto& t : l.atom.args) terms.push_back(&t);
      } else if (l.kind != Literal::Kind::positive) {
        terms = {&l.lhs, &l.rhs};
      }
      for (const Term* t : terms) {
        if (t->kind == Term::Kind::variable && !bound.count(t->name)) {
          error(span, "variable '" + t->name + "' in '" + render_literal(l) +
                          "' is not bound by a positive literal");
          ok = false;
        }
      }
    }
    if (bound_out) *bound_out = bound;
    return ok;
  }

 private:
  std::vector<Diagnostic>& diags_;
};

bool has_errors(const std::vector<Diagnostic>& d) {
  return std::any_of(d.begin(), d.end(), [](const Diagnostic& x) { return x.severity == Severity::error; });
}

void validate_action(const ActionRuleDoc& r, Span span, Validator& v) {
  if (!action_name_from(r.name)) {
    v.error(span, "unknown action '" + r.name + "' (expected addChild, rentIP or transferIP)");
  }
  if (r.legal_ref.empty()) v.error(span, "empty legal reference");
  std::set<std::string> params;
  for (const auto& p : r.params) {
    if (!params.insert(p).second) v.error(span, "duplicate parameter '" + p + "'");
  }
  std::set<std::string> bound;
  v.check_condition(r.pre, LiteralContext::action_pre, span, {}, &bound);
  for (const auto& p : r.params) {
    if (!bound.count(p)) v.error(span, "parameter '" + p + "' is not bound by the precondition");
  }
  for (const auto& e : r.effects) {
    if (e.kind != Literal::Kind::positive && e.kind != Literal::Kind::negative) {
      v.error(span, "effects must be atoms or negated atoms");
      continue;
    }
    v.check_atom(e.atom, LiteralContext::action_eff, span);
    for (const auto& t : e.atom.args) {
      if (t.kind == Term::Kind::anonymous) {
        v.error(span, "'_' is not allowed in effects");
      } else if (t.kind == Term::Kind::variable && !bound.count(t.name)) {
        v.error(span, "unbound variable '" + t.name + "' in effect '" + render_literal(e) +
                          "' is not bound in the precondition");
      }
    }
  }
}

void validate_reduction(const ReductionRuleDoc& r, Span span, Validator& v) {
  if (r.legal_ref.empty()) v.error(span, "empty legal reference");
  v.check_condition(r.when, LiteralContext::reduction_when, span, {"Self"}, nullptr);
}

std::vector<Diagnostic> misplaced(const std::vector<Span>& spans, const char* what) {
  std::vector<Diagnostic> out;
  for (const auto& s : spans) out.push_back({Severity::error, std::string(what), s});
  return out;
}

void sort_diagnostics(std::vector<Diagnostic>& d) {
  std::stable_sort(d.begin(), d.end(), [](const Diagnostic& a, const Diagnostic& b) {
    return std::tie(a.span.line, a.span.column) < std::tie(b.span.line, b.span.column);
  });
}

}  // namespace

ParseResult<RuleSetDoc> parse_ruleset(std::string_view text) {
  Parser parser(text);
  ParsedFile f = parser.parse_file();
  ParseResult<RuleSetDoc> result;
  auto& diags = f.diagnostics;
  for (auto& d : misplaced(f.state_statements, "state or scenario statement is not allowed in a rule set"))
    diags.push_back(std::move(d));

  Validator v(diags);
  RuleSetDoc doc;

  std::set<std::string> region_names;
  for (auto& [r, span] : f.regions) {
    if (!region_names.insert(r.name).second) v.error(span, "duplicate region '" + r.name + "'");
    doc.regions.push_back(r);
  }
  for (auto& [country, rate, span] : f.rates) {
    if (!(rate >= 0.0 && rate <= 1.0)) {
      v.error(span, "rate outside [0,1] for '" + country + "': " + format_number(rate));
    }
    if (!doc.rate_table.emplace(country, rate).second) v.error(span, "duplicate rate for '" + country + "'");
  }
  for (auto& [r, span] : f.actions) {
    validate_action(r, span, v);
    const auto id = rule_id(r);
    if (!doc.source_spans.emplace(id, span).second) {
      v.error(span, "duplicate rule id: action '" + r.name + "' with ref \"" + r.legal_ref + "\"");
    }
    doc.action_rules.push_back(std::move(r));
  }
  for (auto& [r, span] : f.reductions) {
    validate_reduction(r, span, v);
    const auto id = rule_id(r);
    if (!doc.source_spans.emplace(id, span).second) {
      v.error(span, "duplicate rule id: " + std::string(reduction_kind_name(r.kind)) + " reduction with ref \"" +
                        r.legal_ref + "\"");
    }
    doc.reduction_rules.push_back(std::move(r));
  }

  sort_diagnostics(diags);
  result.diagnostics = std::move(diags);
  if (!has_errors(result.diagnostics)) result.document = std::move(doc);
  return result;
}

ParseResult<StateSpec> parse_state_spec(std::string_view text) {
  Parser parser(text);
  ParsedFile f = parser.parse_file();
  ParseResult<StateSpec> result;
  auto& diags = f.diagnostics;
  for (auto& d : misplaced(f.rule_statements, "rule statement is not allowed in a state specification"))
    diags.push_back(std::move(d));

  Validator v(diags);
  StateSpec spec;
  std::set<std::string> companies;
  std::set<std::string> ips;
  for (auto& [name, span] : f.companies) {
    if (ips.count(name)) v.error(span, "'" + name + "' is already declared as an ip");
    if (companies.insert(name).second) spec.declared_companies.push_back(name);
  }
  for (auto& [name, span] : f.ips) {
    if (companies.count(name)) v.error(span, "'" + name + "' is already declared as a company");
    if (ips.insert(name).second) spec.declared_ips.push_back(name);
  }

  std::set<GroundAtom> seen;
  for (auto& [g, span] : f.facts) {
    Atom a{g.predicate, {}};
    for (const auto& s : g.args) a.args.push_back(Term::constant(s));
    if (!v.check_atom(a, LiteralContext::state_fact, span)) continue;
    const auto p = *predicate_from_name(g.predicate);
    auto need = [&](const std::string& id, const std::set<std::string>& pool, const char* kind) {
      if (!pool.count(id)) v.error(span, "undeclared " + std::string(kind) + " '" + id + "' in fact");
    };
    switch (p) {
      case Predicate::based:
      case Predicate::managed:
      case Predicate::exists:
        need(g.args[0], companies, "company");
        break;
      case Predicate::isChildOf:
        need(g.args[0], companies, "company");
        need(g.args[1], companies, "company");
        break;
      case Predicate::ownsIP:
        need(g.args[0], companies, "company");
        need(g.args[1], ips, "ip");
        break;
      case Predicate::rentsIP:
        need(g.args[0], companies, "company");
        need(g.args[1], companies, "company");
        need(g.args[2], ips, "ip");
        break;
      default:
        break;
    }
    if (seen.insert(g).second) spec.facts.push_back(g);
  }

  if (f.has_scenario) {
    const auto& sc = f.scenario;
    Span at = f.scenario_spans.front().second;
    auto span_of = [&](std::string_view kw) {
      for (const auto& [k, s] : f.scenario_spans)
        if (k == kw) return s;
      return at;
    };
    std::set<std::string> countries;
    for (const auto& [c, rev] : sc.countries) {
      if (!countries.insert(c).second) v.error(span_of("country"), "duplicate country '" + c + "'");
      if (!(rev >= 0.0)) v.error(span_of("country"), "negative revenue for '" + c + "'");
    }
    for (const auto& h : sc.havens) {
      if (!sc.countries.empty() && !countries.count(h))
        v.error(span_of("haven"), "haven '" + h + "' is not a declared country");
    }
    std::set<std::string> pool;
    for (const auto& c : sc.pool) {
      if (companies.count(c)) v.error(span_of("pool"), "pool id '" + c + "' is already a declared company");
      if (!pool.insert(c).second) v.error(span_of("pool"), "duplicate pool id '" + c + "'");
    }
    if (sc.royalty_rate && !(*sc.royalty_rate >= 0.0 && *sc.royalty_rate <= 1.0))
      v.error(span_of("royalty_rate"), "royalty rate outside [0,1]");
    if (sc.transfer_price && !(*sc.transfer_price >= 0.0))
      v.error(span_of("transfer_price"), "negative transfer price");
    if (sc.cost && !(*sc.cost > 0.0)) v.error(span_of("cost"), "cost per action must be positive");
    spec.scenario = sc;
  }

  sort_diagnostics(diags);
  result.diagnostics = std::move(diags);
  if (!has_errors(result.diagnostics)) result.document = std::move(spec);
  return result;
}

ParseResult<Condition> parse_condition(std::string_view text, LiteralContext ctx) {
  Parser parser(text);
  ParseResult<Condition> result;
  auto c = parser.parse_bare_condition();
  auto& diags = parser.diagnostics();
  if (c) {
    Validator v(diags);
    std::set<std::string> seed;
    if (ctx == LiteralContext::reduction_when) seed.insert("Self");
    for (const auto& l : *c) {
      if (l.kind == Literal::Kind::positive || l.kind == Literal::Kind::negative) v.check_atom(l.atom, ctx, {1, 1});
    }
  }
  result.diagnostics = std::move(diags);
  if (c && !has_errors(result.diagnostics)) result.document = std::move(*c);
  return result;
}

}  // namespace loophole::rulelang
